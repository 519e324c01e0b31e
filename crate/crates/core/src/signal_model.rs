//! Steering vectors, channel matrices and the noiseless sampled signal.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HrfError, Result};
use crate::linalg::{cis, CMat, CVec, J};
use crate::scenario::{OfdmPlan, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVec,
    pub angle_rad: f64,
    pub spacing_ratio: f64,
}

/// a_n(θ) = exp(j2π(d/λ)(n−1)sin θ), n = 1..N.
pub fn steering_vector(theta: f64, n_antennas: usize, spacing_ratio: f64) -> SteeringVector {
    let k = 2.0 * PI * spacing_ratio * theta.sin();
    SteeringVector {
        entries: CVec::from_fn(n_antennas, |n, _| cis(k * n as f64)),
        angle_rad: theta,
        spacing_ratio,
    }
}

/// ∂a/∂θ, entry n = j2π(d/λ)(n−1)cos θ·a_n(θ).
pub fn steering_derivative(theta: f64, n_antennas: usize, spacing_ratio: f64) -> CVec {
    let a = steering_vector(theta, n_antennas, spacing_ratio).entries;
    let k = 2.0 * PI * spacing_ratio * theta.cos();
    CVec::from_fn(n_antennas, |n, _| J * (k * n as f64) * a[n])
}

/// c_m(τ, v) = exp(−j2π((mΔf + f_c)τ − mv/M)).
pub fn subcarrier_phase(m: i32, tau: f64, v: usize, plan: &OfdmPlan, carrier_hz: f64) -> Complex64 {
    let m = m as f64;
    // Split the phase into cycles before the 2π multiply to keep f_c·τ exact.
    let cycles = (m * plan.subcarrier_spacing_hz + carrier_hz) * tau
        - m * v as f64 / plan.samples_per_symbol as f64;
    cis(-2.0 * PI * cycles.rem_euclid(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Echo,
    Direct,
    Reflected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// N × N_tx
    pub entries: CMat,
    pub kind: ChannelKind,
    pub symbol_index: usize,
    pub subcarrier: i32,
    pub sample: usize,
}

fn outer_t(a: &CVec, b: &CVec, scale: Complex64) -> CMat {
    CMat::from_fn(a.len(), b.len(), |r, c| scale * a[r] * b[c])
}

fn doppler(sc: &Scenario, f_d: f64, l: usize) -> Complex64 {
    cis(2.0 * PI * f_d * l as f64 * sc.ofdm.symbol_duration())
}

fn bs_steer(sc: &Scenario, theta: f64) -> CVec {
    steering_vector(theta, sc.num_bs_antennas, sc.antenna_spacing_ratio).entries
}

fn check_target(sc: &Scenario, i: usize) -> Result<()> {
    if i >= sc.targets.len() {
        return Err(HrfError::Lookup(format!("no target {i}")));
    }
    Ok(())
}

fn check_user(sc: &Scenario, k: usize) -> Result<()> {
    if k >= sc.users.len() {
        return Err(HrfError::Lookup(format!("no user {k}")));
    }
    Ok(())
}

/// Complex scalar in front of the echo outer product a_r a_tᵀ.
pub(crate) fn echo_scalar(sc: &Scenario, i: usize, l: usize, m: i32, v: usize) -> Complex64 {
    let t = &sc.targets[i];
    sc.echo_gain(i)
        * doppler(sc, t.doppler_hz, l)
        * subcarrier_phase(m, 2.0 * sc.target_delay(i), v, &sc.ofdm, sc.carrier_hz)
}

pub(crate) fn direct_scalar(sc: &Scenario, k: usize, m: i32, v: usize) -> Complex64 {
    sc.direct_gain(k) * subcarrier_phase(m, sc.direct_delay(k), v, &sc.ofdm, sc.carrier_hz)
}

pub(crate) fn reflected_scalar(sc: &Scenario, k: usize, slot: usize, l: usize, m: i32, v: usize) -> Complex64 {
    let j = sc.users[k].observed_targets[slot];
    sc.reflected_gain(k, slot)
        * doppler(sc, sc.targets[j].doppler_hz, l)
        * subcarrier_phase(m, sc.reflected_delay(k, slot), v, &sc.ofdm, sc.carrier_hz)
}

fn user_steer(sc: &Scenario, k: usize, theta: f64) -> CVec {
    steering_vector(theta, sc.users[k].num_antennas, sc.antenna_spacing_ratio).entries
}

/// H^echo_{ℓ,m,i}[v] = g e^{j2πf_D ℓT} c_m(2τ, v) a_r(θ) a_t(θ)ᵀ.
pub fn channel_echo(sc: &Scenario, i: usize, l: usize, m: i32, v: usize) -> Result<ChannelMatrix> {
    check_target(sc, i)?;
    let a = bs_steer(sc, sc.targets[i].aoa_rad);
    Ok(ChannelMatrix {
        entries: outer_t(&a, &a, echo_scalar(sc, i, l, m, v)),
        kind: ChannelKind::Echo,
        symbol_index: l,
        subcarrier: m,
        sample: v,
    })
}

/// H^dp_{ℓ,m,k}[v] = g_{k,0} c_m(τ_k, v) a_r(θ_{r,k}) a_u(θ_k)ᵀ.
pub fn channel_direct(sc: &Scenario, k: usize, l: usize, m: i32, v: usize) -> Result<ChannelMatrix> {
    check_user(sc, k)?;
    let u = &sc.users[k];
    Ok(ChannelMatrix {
        entries: outer_t(
            &bs_steer(sc, u.aoa_rad),
            &user_steer(sc, k, u.aod_rad),
            direct_scalar(sc, k, m, v),
        ),
        kind: ChannelKind::Direct,
        symbol_index: l,
        subcarrier: m,
        sample: v,
    })
}

/// H^ref_{ℓ,m,k,j}[v] = g_{k,j} e^{j2πf_D ℓT} c_m(φ_{k,j}, v) a_r(θ_j) a_u(θ_{k,j})ᵀ.
pub fn channel_reflected(
    sc: &Scenario,
    k: usize,
    j: usize,
    l: usize,
    m: i32,
    v: usize,
) -> Result<ChannelMatrix> {
    check_user(sc, k)?;
    check_target(sc, j)?;
    let slot = sc.users[k]
        .slot_of(j)
        .ok_or_else(|| HrfError::Lookup(format!("user {k} does not observe target {j}")))?;
    Ok(ChannelMatrix {
        entries: outer_t(
            &bs_steer(sc, sc.targets[j].aoa_rad),
            &user_steer(sc, k, sc.users[k].per_target_aod[slot]),
            reflected_scalar(sc, k, slot, l, m, v),
        ),
        kind: ChannelKind::Reflected,
        symbol_index: l,
        subcarrier: m,
        sample: v,
    })
}

/// Transmit precoders: f for the BS and f_k^u per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub bs: CVec,
    pub users: Vec<CVec>,
}

impl Precoders {
    pub fn zeros(sc: &Scenario) -> Self {
        Self {
            bs: CVec::zeros(sc.num_bs_antennas),
            users: sc.users.iter().map(|u| CVec::zeros(u.num_antennas)).collect(),
        }
    }

    /// Isotropic-power precoders: every antenna at amplitude √(P_max/N).
    pub fn uniform(sc: &Scenario) -> Self {
        let amp = |p: f64, n: usize| CVec::from_element(n, Complex64::new((p / n as f64).sqrt(), 0.0));
        Self {
            bs: amp(sc.bs_max_power, sc.num_bs_antennas),
            users: sc
                .users
                .iter()
                .map(|u| amp(u.max_power, u.num_antennas))
                .collect(),
        }
    }

    pub fn user(&self, k: usize) -> Result<&CVec> {
        self.users
            .get(k)
            .ok_or_else(|| HrfError::Lookup(format!("no precoder for user {k}")))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            bs: &self.bs * Complex64::new(c, 0.0),
            users: self.users.iter().map(|f| f * Complex64::new(c, 0.0)).collect(),
        }
    }

    pub fn check(&self, sc: &Scenario) -> Result<()> {
        if self.bs.len() != sc.num_bs_antennas {
            return Err(HrfError::shape(
                format!("BS precoder of length {}", sc.num_bs_antennas),
                format!("length {}", self.bs.len()),
            ));
        }
        if self.users.len() != sc.users.len() {
            return Err(HrfError::shape(
                format!("{} user precoders", sc.users.len()),
                format!("{}", self.users.len()),
            ));
        }
        for (k, (f, u)) in self.users.iter().zip(&sc.users).enumerate() {
            if f.len() != u.num_antennas {
                return Err(HrfError::shape(
                    format!("user {k} precoder of length {}", u.num_antennas),
                    format!("length {}", f.len()),
                ));
            }
        }
        Ok(())
    }
}

/// Data symbols b^{(ℓ)}_{m,k}, indexed `[k][ℓ][position of m in 𝒞_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbols {
    values: Vec<Vec<Vec<Complex64>>>,
}

impl Symbols {
    /// Seeded QPSK symbols with E|b|² = σ²_k.
    pub fn qpsk(plan: &OfdmPlan, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(plan, |sigma| {
            let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(re, im) * (sigma / 2f64.sqrt())
        })
    }

    /// Deterministic b = σ_k for every entry.
    pub fn ones(plan: &OfdmPlan) -> Self {
        Self::build(plan, |sigma| Complex64::new(sigma, 0.0))
    }

    fn build(plan: &OfdmPlan, mut draw: impl FnMut(f64) -> Complex64) -> Self {
        let n_tx = plan.ul_subcarriers_per_user.len() + 1;
        let values = (0..n_tx)
            .map(|k| {
                let sigma = plan.symbol_variances[k].sqrt();
                (0..plan.num_symbols)
                    .map(|_| plan.subcarriers(k).iter().map(|_| draw(sigma)).collect())
                    .collect()
            })
            .collect();
        Self { values }
    }

    /// Symbol of transmitter k (0 = BS) on symbol ℓ at position `pos` in its subcarrier set.
    pub fn get(&self, k: usize, l: usize, pos: usize) -> Complex64 {
        self.values[k][l][pos]
    }

    pub fn set(&mut self, k: usize, l: usize, pos: usize, b: Complex64) {
        self.values[k][l][pos] = b;
    }

    fn check(&self, plan: &OfdmPlan) -> Result<()> {
        let n_tx = plan.ul_subcarriers_per_user.len() + 1;
        let ok = self.values.len() == n_tx
            && self.values.iter().enumerate().all(|(k, per_l)| {
                per_l.len() == plan.num_symbols
                    && per_l.iter().all(|row| row.len() == plan.subcarriers(k).len())
            });
        if ok {
            Ok(())
        } else {
            Err(HrfError::shape(
                "symbols matching the OFDM plan".to_string(),
                "mismatched symbol table".to_string(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessSample {
    pub x: CVec,
    pub symbol_index: usize,
    pub sample: usize,
    /// ∂x/∂θᵢ^tar for every target i.
    pub derivatives: Vec<CVec>,
}

/// x_ℓ[v]: the three channel-filtered contributions summed over subcarriers.
///
/// The rank-1 channels are applied as a_r·(scalar·a_txᵀf), which never forms
/// the N × N_tx matrix.
pub fn noiseless_sample(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    l: usize,
    v: usize,
) -> Result<NoiselessSample> {
    precoders.check(sc)?;
    symbols.check(&sc.ofdm)?;
    let n = sc.num_bs_antennas;
    let mut x = CVec::zeros(n);
    let mut derivatives = vec![CVec::zeros(n); sc.targets.len()];

    for (i, t) in sc.targets.iter().enumerate() {
        let a = bs_steer(sc, t.aoa_rad);
        let da = steering_derivative(t.aoa_rad, n, sc.antenna_spacing_ratio);
        let at_f = a.transpose() * &precoders.bs;
        let dat_f = da.transpose() * &precoders.bs;
        let (at_f, dat_f) = (at_f[0], dat_f[0]);
        let mut s = Complex64::new(0.0, 0.0);
        for (pos, &m) in sc.ofdm.dl_subcarriers.iter().enumerate() {
            s += symbols.get(0, l, pos) * echo_scalar(sc, i, l, m, v);
        }
        x += &a * (s * at_f);
        derivatives[i] += (&da * at_f + &a * dat_f) * s;
    }

    for (k, u) in sc.users.iter().enumerate() {
        let fk = &precoders.users[k];
        let ul = sc.ofdm.subcarriers(k + 1);
        let a_dp = bs_steer(sc, u.aoa_rad);
        let au_f = (user_steer(sc, k, u.aod_rad).transpose() * fk)[0];
        let mut s = Complex64::new(0.0, 0.0);
        for (pos, &m) in ul.iter().enumerate() {
            s += symbols.get(k + 1, l, pos) * direct_scalar(sc, k, m, v);
        }
        x += &a_dp * (s * au_f);

        for (slot, &j) in u.observed_targets.iter().enumerate() {
            let theta = sc.targets[j].aoa_rad;
            let a = bs_steer(sc, theta);
            let da = steering_derivative(theta, n, sc.antenna_spacing_ratio);
            let au_f = (user_steer(sc, k, u.per_target_aod[slot]).transpose() * fk)[0];
            let mut s = Complex64::new(0.0, 0.0);
            for (pos, &m) in ul.iter().enumerate() {
                s += symbols.get(k + 1, l, pos) * reflected_scalar(sc, k, slot, l, m, v);
            }
            x += &a * (s * au_f);
            derivatives[j] += &da * (s * au_f);
        }
    }

    Ok(NoiselessSample {
        x,
        symbol_index: l,
        sample: v,
        derivatives,
    })
}

/// ∂x_ℓ[v]/∂θᵢ^tar with the user-side departure angles held fixed.
pub fn sample_derivative_aoa(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    l: usize,
    v: usize,
    i: usize,
) -> Result<CVec> {
    check_target(sc, i)?;
    let mut s = noiseless_sample(sc, precoders, symbols, l, v)?;
    Ok(s.derivatives.swap_remove(i))
}

/// Scalar factors of the rank-1 channels at (ℓ, m, v), exposed for covariance builders.
pub(crate) mod scalars {
    pub(crate) use super::{direct_scalar, echo_scalar, reflected_scalar};
}

pub(crate) fn bs_steering(sc: &Scenario, theta: f64) -> CVec {
    bs_steer(sc, theta)
}

pub(crate) fn user_steering(sc: &Scenario, k: usize, theta: f64) -> CVec {
    user_steer(sc, k, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use crate::scenario::default_scenario;

    #[test]
    fn steering_examples() {
        let a = steering_vector(0.0, 5, 0.5).entries;
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let a = steering_vector(PI / 6.0, 2, 0.5).entries;
        assert!((a[1] - J).norm() < 1e-12);
        let p = steering_vector(0.3, 6, 0.5).entries;
        let m = steering_vector(-0.3, 6, 0.5).entries;
        for n in 0..6 {
            assert!((p[n] - m[n].conj()).norm() < 1e-14);
            assert!((p[n].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_derivative_matches_central_difference() {
        let (theta, h) = (0.37, 1e-6);
        let d = steering_derivative(theta, 8, 0.5);
        let fd = (steering_vector(theta + h, 8, 0.5).entries
            - steering_vector(theta - h, 8, 0.5).entries)
            / Complex64::new(2.0 * h, 0.0);
        assert_eq!(d[0], Complex64::new(0.0, 0.0));
        assert!((d - fd).norm() < 1e-8);
        let edge = steering_derivative(PI / 2.0 - 1e-9, 8, 0.5);
        assert!(edge.norm() < 1e-6);
    }

    #[test]
    fn subcarrier_phase_examples() {
        let plan = default_scenario().ofdm;
        assert!((subcarrier_phase(0, 0.0, 0, &plan, 24e9) - 1.0).norm() < 1e-15);
        // m = 1, τ = 1 µs: (15e3 + 24e9)·1e-6 = 24000.015 cycles → phase −2π·0.015.
        let c = subcarrier_phase(1, 1e-6, 0, &plan, 24e9);
        assert!((c - cis(-2.0 * PI * 0.015)).norm() < 1e-9);
        // v enters as +2π m v / M.
        let c = subcarrier_phase(3, 0.0, 5, &plan, 24e9);
        assert!((c - cis(2.0 * PI * 15.0 / 64.0)).norm() < 1e-12);
    }

    #[test]
    fn channels_are_rank_one() {
        let sc = default_scenario();
        let mats = [
            channel_echo(&sc, 0, 2, 5, 3).unwrap(),
            channel_direct(&sc, 0, 0, 40, 1).unwrap(),
            channel_reflected(&sc, 0, 0, 1, 41, 7).unwrap(),
        ];
        for h in &mats {
            assert_eq!(numerical_rank(&h.entries, 1e-10), 1);
        }
        assert!(matches!(channel_echo(&sc, 3, 0, 0, 0), Err(HrfError::Lookup(_))));
        assert!(matches!(channel_direct(&sc, 1, 0, 0, 0), Err(HrfError::Lookup(_))));
    }

    #[test]
    fn zero_doppler_echo_is_symbol_invariant() {
        let sc = default_scenario();
        let a = channel_echo(&sc, 0, 0, 4, 2).unwrap().entries;
        let b = channel_echo(&sc, 0, 9, 4, 2).unwrap().entries;
        assert!((a - b).norm() < 1e-20);
    }

    #[test]
    fn sample_matches_explicit_channel_sum() {
        let sc = default_scenario();
        let p = Precoders::uniform(&sc);
        let sym = Symbols::qpsk(&sc.ofdm, 7);
        let (l, v) = (3, 11);
        let mut want = CVec::zeros(sc.num_bs_antennas);
        for (pos, &m) in sc.ofdm.dl_subcarriers.iter().enumerate() {
            want += channel_echo(&sc, 0, l, m, v).unwrap().entries * &p.bs * sym.get(0, l, pos);
        }
        for (pos, &m) in sc.ofdm.subcarriers(1).iter().enumerate() {
            let h = channel_direct(&sc, 0, l, m, v).unwrap().entries
                + channel_reflected(&sc, 0, 0, l, m, v).unwrap().entries;
            want += h * &p.users[0] * sym.get(1, l, pos);
        }
        let got = noiseless_sample(&sc, &p, &sym, l, v).unwrap().x;
        assert!((got - &want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn sample_is_linear_in_precoders() {
        let sc = default_scenario();
        let p = Precoders::uniform(&sc);
        let sym = Symbols::qpsk(&sc.ofdm, 1);
        let mut bs_only = p.clone();
        bs_only.users[0].fill(Complex64::new(0.0, 0.0));
        let mut user_only = p.clone();
        user_only.bs.fill(Complex64::new(0.0, 0.0));
        let full = noiseless_sample(&sc, &p, &sym, 0, 0).unwrap().x;
        let parts = noiseless_sample(&sc, &bs_only, &sym, 0, 0).unwrap().x
            + noiseless_sample(&sc, &user_only, &sym, 0, 0).unwrap().x;
        assert!((full - parts).norm() < 1e-20);
        let zero = noiseless_sample(&sc, &Precoders::zeros(&sc), &sym, 0, 0).unwrap().x;
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn precoder_shape_is_checked() {
        let sc = default_scenario();
        let mut p = Precoders::uniform(&sc);
        p.bs = CVec::zeros(3);
        let sym = Symbols::ones(&sc.ofdm);
        assert!(matches!(
            noiseless_sample(&sc, &p, &sym, 0, 0),
            Err(HrfError::Shape { .. })
        ));
    }
}
