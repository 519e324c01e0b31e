//! Physical HRF setup: geometry, power budgets, OFDM plan and link gains.
//!
//! Positions live in the BS frame: the BS array sits at the origin with its
//! broadside along +x, so an object at range `r` and angle `θ` is at
//! `(r cos θ, r sin θ)`. User arrays carry their own broadside direction in
//! the same frame, which lets the per-target departure angles and path
//! lengths be recomputed when a target moves.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{HrfError, Result};
use crate::linalg::cis;
use crate::signal_model::Precoders;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmPlan {
    pub subcarrier_spacing_hz: f64,
    /// L
    pub num_symbols: usize,
    /// M
    pub samples_per_symbol: usize,
    /// 𝒞₀
    pub dl_subcarriers: Vec<i32>,
    /// 𝒞_k for k = 1..K
    pub ul_subcarriers_per_user: Vec<Vec<i32>>,
    /// σ²_k for k = 0..K (index 0 is the BS downlink stream)
    pub symbol_variances: Vec<f64>,
}

impl OfdmPlan {
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    /// Subcarrier set of transmitter `k` (0 = BS, 1..=K users).
    pub fn subcarriers(&self, k: usize) -> &[i32] {
        if k == 0 {
            &self.dl_subcarriers
        } else {
            &self.ul_subcarriers_per_user[k - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HrfError::InvalidScenario(m.to_string()));
        if self.num_symbols < 1 || self.samples_per_symbol < 1 {
            return bad("num_symbols and samples_per_symbol must be at least 1");
        }
        if !(self.subcarrier_spacing_hz > 0.0 && self.subcarrier_spacing_hz.is_finite()) {
            return bad("subcarrier spacing must be positive");
        }
        if self.symbol_variances.len() != self.ul_subcarriers_per_user.len() + 1 {
            return bad("symbol_variances needs one entry for the BS and one per user");
        }
        if self.symbol_variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("symbol variances must be positive");
        }
        let mut seen = HashSet::new();
        for k in 0..=self.ul_subcarriers_per_user.len() {
            for &m in self.subcarriers(k) {
                if !seen.insert(m) {
                    return Err(HrfError::InvalidScenario(format!(
                        "subcarrier {m} is assigned twice (sets must be disjoint)"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub aoa_rad: f64,
    pub range_m: f64,
    pub doppler_hz: f64,
    pub rcs_m2: f64,
    /// Replaces the monostatic radar-equation gain g_i^tar.
    pub gain_override: Option<Complex64>,
}

impl TargetSpec {
    pub fn new(aoa_rad: f64, range_m: f64, rcs_m2: f64) -> Self {
        Self {
            aoa_rad,
            range_m,
            doppler_hz: 0.0,
            rcs_m2,
            gain_override: None,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        position(self.range_m, self.aoa_rad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub num_antennas: usize,
    /// θ_{r,k}^u, direct-path arrival angle at the BS.
    pub aoa_rad: f64,
    /// θ_k^u, departure angle towards the BS at the user array.
    pub aod_rad: f64,
    pub range_m: f64,
    /// Φ_k, indices into the scenario targets.
    pub observed_targets: Vec<usize>,
    /// θ_{k,j}^u per observed target.
    pub per_target_aod: Vec<f64>,
    /// user → target → BS path length per observed target.
    pub per_target_path_m: Vec<f64>,
    pub max_power: f64,
    /// Direction the user array faces in the BS frame; required for geometry updates.
    pub broadside_rad: Option<f64>,
    /// Replaces the Friis gain g_{k,0}^u.
    pub gain_override: Option<Complex64>,
    /// Replaces the bistatic gain g_{k,j} per observed target.
    pub per_target_gain_override: Vec<Option<Complex64>>,
}

impl UserSpec {
    /// User at `(range, aoa)` whose array faces `broadside_rad`; the departure
    /// angle towards the BS follows from the geometry.
    pub fn placed(
        num_antennas: usize,
        range_m: f64,
        aoa_rad: f64,
        broadside_rad: f64,
        max_power: f64,
    ) -> Self {
        let p = position(range_m, aoa_rad);
        let aod = departure_angle(p, [0.0, 0.0], broadside_rad);
        Self {
            num_antennas,
            aoa_rad,
            aod_rad: aod,
            range_m,
            observed_targets: Vec::new(),
            per_target_aod: Vec::new(),
            per_target_path_m: Vec::new(),
            max_power,
            broadside_rad: Some(broadside_rad),
            gain_override: None,
            per_target_gain_override: Vec::new(),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        position(self.range_m, self.aoa_rad)
    }

    /// Position of target `j` in Φ_k, if observed.
    pub fn slot_of(&self, target: usize) -> Option<usize> {
        self.observed_targets.iter().position(|&t| t == target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub carrier_hz: f64,
    pub num_bs_antennas: usize,
    /// d/λ
    pub antenna_spacing_ratio: f64,
    /// Φ₀ = all targets.
    pub targets: Vec<TargetSpec>,
    pub users: Vec<UserSpec>,
    pub ofdm: OfdmPlan,
    /// σ²
    pub noise_variance: f64,
    pub bs_max_power: f64,
}

pub fn position(range_m: f64, angle_rad: f64) -> [f64; 2] {
    [range_m * angle_rad.cos(), range_m * angle_rad.sin()]
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Folds an angle into [−π/2, π/2]; a ULA cannot tell θ from π − θ.
pub fn fold_ula_angle(angle: f64) -> f64 {
    angle.sin().clamp(-1.0, 1.0).asin()
}

/// Departure angle from an array at `from` facing `broadside` towards `to`.
pub fn departure_angle(from: [f64; 2], to: [f64; 2], broadside: f64) -> f64 {
    let dir = (to[1] - from[1]).atan2(to[0] - from[0]);
    fold_ula_angle(dir - broadside)
}

/// Direction (BS frame) that bisects the directions from `from` to `a` and `b`.
pub fn bisector(from: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let da = (a[1] - from[1]).atan2(a[0] - from[0]);
    let db = (b[1] - from[1]).atan2(b[0] - from[0]);
    let (s, c) = (da.sin() + db.sin(), da.cos() + db.cos());
    s.atan2(c)
}

/// Friis free-space gain γ = λ/(4πd)·e^{−j2π f_c d/c}.
pub fn path_gain_direct(range_m: f64, carrier_hz: f64) -> Result<Complex64> {
    if !(range_m > 0.0) || !(carrier_hz > 0.0) {
        return Err(HrfError::domain(format!(
            "direct path needs positive range and carrier (range {range_m}, f_c {carrier_hz})"
        )));
    }
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    let tau = range_m / SPEED_OF_LIGHT;
    Ok(cis(-2.0 * PI * carrier_hz * tau) * (lambda / (4.0 * PI * range_m)))
}

/// Monostatic echo gain λ·√(σ/4π)/(4π·d)², phase from the round-trip delay.
pub fn path_gain_radar(range_m: f64, rcs_m2: f64, carrier_hz: f64) -> Result<Complex64> {
    path_gain_bistatic(range_m, range_m, rcs_m2, carrier_hz)
}

/// Bistatic reflection gain λ·√(σ/4π)/((4π)²·d₁·d₂) for legs d₁ and d₂.
pub fn path_gain_bistatic(
    leg1_m: f64,
    leg2_m: f64,
    rcs_m2: f64,
    carrier_hz: f64,
) -> Result<Complex64> {
    if !(leg1_m > 0.0) || !(leg2_m > 0.0) || !(rcs_m2 > 0.0) || !(carrier_hz > 0.0) {
        return Err(HrfError::domain(format!(
            "reflected path needs positive legs, rcs and carrier ({leg1_m}, {leg2_m}, {rcs_m2}, {carrier_hz})"
        )));
    }
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    let mag = lambda * (rcs_m2 / (4.0 * PI)).sqrt() / ((4.0 * PI).powi(2) * leg1_m * leg2_m);
    let tau = (leg1_m + leg2_m) / SPEED_OF_LIGHT;
    Ok(cis(-2.0 * PI * carrier_hz * tau) * mag)
}

/// DR_sig = 10·log₁₀(P_dp / P_ref) in dB.
pub fn dynamic_range_sig(p_direct: f64, p_reflected: f64) -> Result<f64> {
    if !(p_direct > 0.0) || !(p_reflected > 0.0) {
        return Err(HrfError::domain(format!(
            "powers must be positive (direct {p_direct}, reflected {p_reflected})"
        )));
    }
    Ok(10.0 * (p_direct / p_reflected).log10())
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HrfError::InvalidScenario(m));
        if self.num_bs_antennas < 2 {
            return bad(format!(
                "need at least 2 BS antennas, got {}",
                self.num_bs_antennas
            ));
        }
        if !(self.carrier_hz > 0.0) {
            return bad("carrier must be positive".into());
        }
        if !(self.antenna_spacing_ratio > 0.0 && self.antenna_spacing_ratio <= 1.0) {
            return bad(format!(
                "d/λ must lie in (0, 1], got {}",
                self.antenna_spacing_ratio
            ));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad("noise variance must be positive".into());
        }
        if !(self.bs_max_power > 0.0) {
            return bad("BS power budget must be positive".into());
        }
        self.ofdm.validate()?;
        if self.ofdm.ul_subcarriers_per_user.len() != self.users.len() {
            return bad(format!(
                "{} users but {} uplink subcarrier sets",
                self.users.len(),
                self.ofdm.ul_subcarriers_per_user.len()
            ));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.aoa_rad.abs() < FRAC_PI_2) {
                return bad(format!("target {i}: |aoa| must be below π/2"));
            }
            if !(t.range_m > 0.0) || !(t.rcs_m2 > 0.0) || !t.doppler_hz.is_finite() {
                return bad(format!("target {i}: range and rcs must be positive"));
            }
        }
        let mut claimed = HashSet::new();
        for (k, u) in self.users.iter().enumerate() {
            if u.num_antennas < 1 || !(u.range_m > 0.0) || !(u.max_power > 0.0) {
                return bad(format!(
                    "user {k}: antennas, range and max_power must be positive"
                ));
            }
            if u.observed_targets.len() > self.targets.len() {
                return bad(format!("user {k}: observes more targets than exist"));
            }
            let n = u.observed_targets.len();
            if u.per_target_aod.len() != n
                || u.per_target_path_m.len() != n
                || !(u.per_target_gain_override.is_empty()
                    || u.per_target_gain_override.len() == n)
            {
                return bad(format!("user {k}: per-target fields must match Φ_k"));
            }
            for (slot, &j) in u.observed_targets.iter().enumerate() {
                if j >= self.targets.len() {
                    return bad(format!("user {k}: observed target {j} does not exist"));
                }
                if !claimed.insert(j) {
                    return bad(format!(
                        "target {j} is observed by more than one user (Φ_k must be disjoint)"
                    ));
                }
                if !(u.per_target_path_m[slot] > 0.0) {
                    return bad(format!("user {k}: reflected path length must be positive"));
                }
            }
        }
        Ok(())
    }

    /// One-way delay τ_i^tar; the echo travels 2τ.
    pub fn target_delay(&self, i: usize) -> f64 {
        self.targets[i].range_m / SPEED_OF_LIGHT
    }

    /// τ_k^u
    pub fn direct_delay(&self, k: usize) -> f64 {
        self.users[k].range_m / SPEED_OF_LIGHT
    }

    /// φ_{k,j} for the `slot`-th observed target of user k.
    pub fn reflected_delay(&self, k: usize, slot: usize) -> f64 {
        self.users[k].per_target_path_m[slot] / SPEED_OF_LIGHT
    }

    /// g_i^tar used inside the channel (carrier phase lives in c_m).
    pub fn echo_gain(&self, i: usize) -> Complex64 {
        let t = &self.targets[i];
        t.gain_override.unwrap_or_else(|| {
            let g = path_gain_radar(t.range_m, t.rcs_m2, self.carrier_hz)
                .expect("validated target");
            Complex64::new(g.norm(), 0.0)
        })
    }

    /// g_{k,0}^u
    pub fn direct_gain(&self, k: usize) -> Complex64 {
        let u = &self.users[k];
        u.gain_override.unwrap_or_else(|| {
            let g = path_gain_direct(u.range_m, self.carrier_hz).expect("validated user");
            Complex64::new(g.norm(), 0.0)
        })
    }

    /// g_{k,j} of the `slot`-th observed target of user k.
    pub fn reflected_gain(&self, k: usize, slot: usize) -> Complex64 {
        let u = &self.users[k];
        if let Some(Some(g)) = u.per_target_gain_override.get(slot) {
            return *g;
        }
        let j = u.observed_targets[slot];
        let t = &self.targets[j];
        let d_bs = t.range_m;
        let d_user = (u.per_target_path_m[slot] - d_bs).max(1e-9);
        let g = path_gain_bistatic(d_user, d_bs, t.rcs_m2, self.carrier_hz)
            .expect("validated reflected path");
        Complex64::new(g.norm(), 0.0)
    }

    /// Precoder-independent DR_sig of the reflection of target `slot` seen by
    /// user k, i.e. the direct/reflected power ratio under isotropic transmission.
    pub fn link_dynamic_range_db(&self, k: usize, slot: usize) -> Result<f64> {
        let pd = self.direct_gain(k).norm_sqr();
        let pr = self.reflected_gain(k, slot).norm_sqr();
        dynamic_range_sig(pd, pr)
    }

    /// Received direct-path and reflected-path powers of user k (summed over
    /// ℓ, v and the user's subcarriers, unit symbols) by explicit accumulation
    /// of ‖H^dp f‖² and ‖H^ref f‖².
    pub fn path_powers(&self, k: usize, slot: usize, precoders: &Precoders) -> Result<(f64, f64)> {
        use crate::signal_model::{channel_direct, channel_reflected};
        let f = precoders.user(k)?;
        let j = *self.users[k]
            .observed_targets
            .get(slot)
            .ok_or_else(|| HrfError::Lookup(format!("user {k} has no target slot {slot}")))?;
        let mut pd = 0.0;
        let mut pr = 0.0;
        for l in 0..self.ofdm.num_symbols {
            for v in 0..self.ofdm.samples_per_symbol {
                for &m in self.ofdm.subcarriers(k + 1) {
                    pd += (channel_direct(self, k, l, m, v)?.entries * f).norm_squared();
                    pr += (channel_reflected(self, k, j, l, m, v)?.entries * f).norm_squared();
                }
            }
        }
        Ok((pd, pr))
    }

    /// Scenario with every reflected path dropped whose DR_sig exceeds the
    /// ADC dynamic range minus `margin_db`: those reflections sit below the
    /// quantization floor and cannot contribute to fusion.
    pub fn resolvable_at(&self, adc_dr_db: f64, margin_db: f64) -> Scenario {
        let mut out = self.clone();
        for (k, u) in out.users.iter_mut().enumerate() {
            let mut keep = Vec::new();
            for slot in 0..u.observed_targets.len() {
                let dr = self
                    .link_dynamic_range_db(k, slot)
                    .unwrap_or(f64::INFINITY);
                if dr + margin_db <= adc_dr_db {
                    keep.push(slot);
                }
            }
            let pick = |v: &Vec<f64>| keep.iter().map(|&s| v[s]).collect::<Vec<_>>();
            u.per_target_aod = pick(&u.per_target_aod);
            u.per_target_path_m = pick(&u.per_target_path_m);
            if !u.per_target_gain_override.is_empty() {
                u.per_target_gain_override =
                    keep.iter().map(|&s| u.per_target_gain_override[s]).collect();
            }
            u.observed_targets = keep.iter().map(|&s| u.observed_targets[s]).collect();
        }
        out
    }

    /// Adds target `j` to Φ_k with departure angle and path length taken from
    /// the geometry; needs the user's broadside.
    pub fn observe(&mut self, k: usize, j: usize) -> Result<()> {
        if j >= self.targets.len() {
            return Err(HrfError::Lookup(format!("no target {j}")));
        }
        let u = self
            .users
            .get_mut(k)
            .ok_or_else(|| HrfError::Lookup(format!("no user {k}")))?;
        let broadside = u.broadside_rad.ok_or_else(|| {
            HrfError::InvalidScenario(format!("user {k} has no broadside; cannot derive geometry"))
        })?;
        let (aod, path) = reflection_geometry(u.position(), &self.targets[j], broadside);
        if let Some(slot) = u.slot_of(j) {
            u.per_target_aod[slot] = aod;
            u.per_target_path_m[slot] = path;
        } else {
            u.observed_targets.push(j);
            u.per_target_aod.push(aod);
            u.per_target_path_m.push(path);
            if !u.per_target_gain_override.is_empty() {
                u.per_target_gain_override.push(None);
            }
        }
        Ok(())
    }

    /// Moves target `i` and refreshes the geometry-derived reflected-path
    /// fields of every user that observes it and knows its broadside.
    pub fn move_target(&mut self, i: usize, range_m: f64, aoa_rad: f64) -> Result<()> {
        let t = self
            .targets
            .get_mut(i)
            .ok_or_else(|| HrfError::Lookup(format!("no target {i}")))?;
        t.range_m = range_m;
        t.aoa_rad = aoa_rad;
        let target = t.clone();
        for u in self.users.iter_mut() {
            if let (Some(slot), Some(b)) = (u.slot_of(i), u.broadside_rad) {
                let (aod, path) = reflection_geometry(u.position(), &target, b);
                u.per_target_aod[slot] = aod;
                u.per_target_path_m[slot] = path;
            }
        }
        Ok(())
    }

    /// σ² that puts the per-antenna direct-path SNR of user k at `snr_db`
    /// under isotropic full-power transmission on all of its subcarriers.
    pub fn noise_for_direct_snr(&self, k: usize, snr_db: f64) -> f64 {
        let n_sc = self.ofdm.subcarriers(k + 1).len() as f64;
        let p = self.ofdm.symbol_variances[k + 1]
            * n_sc
            * self.direct_gain(k).norm_sqr()
            * self.users[k].max_power;
        p / 10f64.powf(snr_db / 10.0)
    }
}

fn reflection_geometry(user_pos: [f64; 2], target: &TargetSpec, broadside: f64) -> (f64, f64) {
    let tp = target.position();
    let aod = departure_angle(user_pos, tp, broadside);
    let path = distance(user_pos, tp) + target.range_m;
    (aod, path)
}

/// Constants of the shipped default scenario.
pub mod defaults {
    pub const CARRIER_HZ: f64 = 24e9;
    pub const BS_ANTENNAS: usize = 8;
    pub const USER_ANTENNAS: usize = 4;
    pub const SPACING_RATIO: f64 = 0.5;
    pub const NUM_SYMBOLS: usize = 14;
    pub const SAMPLES_PER_SYMBOL: usize = 64;
    pub const DL_SUBCARRIERS: usize = 36;
    pub const UL_SUBCARRIERS: usize = 24;
    pub const SUBCARRIER_SPACING_HZ: f64 = 15e3;
    pub const USER_RANGE_M: f64 = 100.0;
    pub const USER_AOA_DEG: f64 = -20.0;
    pub const TARGET_RANGE_M: f64 = 100.0;
    pub const TARGET_AOA_DEG: f64 = -10.0;
    pub const TARGET_RCS_M2: f64 = 2000.0;
    /// 10 dBm. A weak illuminator keeps the user reflection, not the
    /// monostatic echo, the dominant sensing path.
    pub const BS_MAX_POWER_W: f64 = 0.01;
    /// 23 dBm.
    pub const USER_MAX_POWER_W: f64 = 0.2;
    /// Per-antenna direct-path SNR that fixes σ². With the 32-fold array gain
    /// of the direct link this puts the peak uplink rate near 2.1 kbps.
    pub const DIRECT_SNR_DB: f64 = -25.0;
}

/// Default scenario: K = 1 user and P = 1 target, both 100 m from the BS.
///
/// The user array faces the bisector of its directions to the BS and to the
/// target. Power budgets, the target RCS and σ² are assumptions; see
/// [`defaults`].
pub fn default_scenario() -> Scenario {
    use defaults::*;
    let user_aoa = USER_AOA_DEG.to_radians();
    let target = TargetSpec::new(TARGET_AOA_DEG.to_radians(), TARGET_RANGE_M, TARGET_RCS_M2);
    let up = position(USER_RANGE_M, user_aoa);
    let broadside = bisector(up, [0.0, 0.0], target.position());
    let user = UserSpec::placed(
        USER_ANTENNAS,
        USER_RANGE_M,
        user_aoa,
        broadside,
        USER_MAX_POWER_W,
    );
    let dl: Vec<i32> = (0..DL_SUBCARRIERS as i32).collect();
    let ul: Vec<i32> = (DL_SUBCARRIERS as i32..(DL_SUBCARRIERS + UL_SUBCARRIERS) as i32).collect();
    let mut s = Scenario {
        carrier_hz: CARRIER_HZ,
        num_bs_antennas: BS_ANTENNAS,
        antenna_spacing_ratio: SPACING_RATIO,
        targets: vec![target],
        users: vec![user],
        ofdm: OfdmPlan {
            subcarrier_spacing_hz: SUBCARRIER_SPACING_HZ,
            num_symbols: NUM_SYMBOLS,
            samples_per_symbol: SAMPLES_PER_SYMBOL,
            dl_subcarriers: dl,
            ul_subcarriers_per_user: vec![ul],
            symbol_variances: vec![1.0, 1.0],
        },
        noise_variance: 1.0,
        bs_max_power: BS_MAX_POWER_W,
    };
    s.observe(0, 0).expect("default geometry");
    s.noise_variance = s.noise_for_direct_snr(0, DIRECT_SNR_DB);
    s
}
