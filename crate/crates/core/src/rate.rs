//! Received-signal covariance and uplink mutual-information bounds.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{HrfError, Result};
use crate::linalg::{is_hermitian_psd, logdet_hpd, trace_re, CMat};
use crate::scenario::Scenario;
use crate::signal_model::{channel_direct, channel_echo, channel_reflected, scalars};

#[derive(Debug, Clone, PartialEq)]
pub struct SignalCovariance {
    pub matrix: CMat,
    pub symbol_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// log₂|I + ((1 − η)/σ²)R_xx|
    LowerBound,
    /// (2/(πσ²))·tr(R_xx), reported in bits.
    OneBitApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub mi_bits_per_symbol: f64,
    pub rate_kbps: f64,
    pub kind: RateKind,
    /// Per-antenna SNR above −10 dB where the one-bit expression is used.
    pub low_snr_warning: bool,
}

impl RateValue {
    pub fn new(mi_bits: f64, kind: RateKind, subcarrier_spacing_hz: f64) -> Self {
        Self {
            mi_bits_per_symbol: mi_bits,
            rate_kbps: bits_to_kbps(mi_bits, subcarrier_spacing_hz),
            kind,
            low_snr_warning: false,
        }
    }
}

/// One vector symbol per OFDM symbol duration 1/Δf.
pub fn bits_to_kbps(mi_bits: f64, subcarrier_spacing_hz: f64) -> f64 {
    mi_bits * subcarrier_spacing_hz / 1000.0
}

fn check_inputs(r0: &CMat, rk: &[CMat], sc: &Scenario) -> Result<()> {
    let n = sc.num_bs_antennas;
    if r0.nrows() != n || r0.ncols() != n {
        return Err(HrfError::shape(format!("R0 of size {n}×{n}"), format!("{}×{}", r0.nrows(), r0.ncols())));
    }
    if rk.len() != sc.users.len() {
        return Err(HrfError::shape(format!("{} user covariances", sc.users.len()), rk.len()));
    }
    for (k, (r, u)) in rk.iter().zip(&sc.users).enumerate() {
        let m = u.num_antennas;
        if r.nrows() != m || r.ncols() != m {
            return Err(HrfError::shape(
                format!("R_{} of size {m}×{m}", k + 1),
                format!("{}×{}", r.nrows(), r.ncols()),
            ));
        }
    }
    Ok(())
}

/// R_xx for symbol ℓ, averaged over the samples v, by explicit summation of
/// H R Hᴴ over every subcarrier and sample.
///
/// All targets echo the same DL symbol on a subcarrier, so the echo channel
/// enters as Σᵢ H^echo_i; likewise the UL channel is H^dp + Σ_j H^ref.
pub fn signal_covariance(r0: &CMat, rk: &[CMat], sc: &Scenario, l: usize) -> Result<SignalCovariance> {
    check_inputs(r0, rk, sc)?;
    let n = sc.num_bs_antennas;
    let plan = &sc.ofdm;
    let mut acc = CMat::zeros(n, n);
    for v in 0..plan.samples_per_symbol {
        for &m in &plan.dl_subcarriers {
            let mut h = CMat::zeros(n, n);
            for i in 0..sc.targets.len() {
                h += channel_echo(sc, i, l, m, v)?.entries;
            }
            acc += &h * r0 * h.adjoint() * Complex64::new(plan.symbol_variances[0], 0.0);
        }
        for (k, u) in sc.users.iter().enumerate() {
            for &m in plan.subcarriers(k + 1) {
                let mut h = channel_direct(sc, k, l, m, v)?.entries;
                for &j in &u.observed_targets {
                    h += channel_reflected(sc, k, j, l, m, v)?.entries;
                }
                acc += &h * &rk[k] * h.adjoint() * Complex64::new(plan.symbol_variances[k + 1], 0.0);
            }
        }
    }
    let matrix = acc / Complex64::new(plan.samples_per_symbol as f64, 0.0);
    Ok(SignalCovariance {
        matrix: (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0),
        symbol_index: l,
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(HrfError::domain(format!("η must lie in [0, 1), got {eta}")));
    }
    Ok(())
}

/// log₂|I + ((1 − η)/σ²)R_xx| in bits per vector symbol.
pub fn mi_lower_bound(r_xx: &CMat, eta: f64, sigma2: f64, subcarrier_spacing_hz: f64) -> Result<RateValue> {
    check_eta(eta)?;
    if !(sigma2 > 0.0) {
        return Err(HrfError::domain("σ² must be positive"));
    }
    let tol = 1e-9;
    if !is_hermitian_psd(r_xx, tol) {
        return Err(HrfError::domain("R_xx is not Hermitian PSD"));
    }
    let n = r_xx.nrows();
    let m = CMat::identity(n, n) + r_xx * Complex64::new((1.0 - eta) / sigma2, 0.0);
    let ld = logdet_hpd(&m).ok_or_else(|| HrfError::domain("I + cR_xx is not positive definite"))?;
    Ok(RateValue::new(ld.max(0.0) / LN_2, RateKind::LowerBound, subcarrier_spacing_hz))
}

/// (2/(πσ²))·tr(R_xx) converted from nats to bits.
pub fn mi_one_bit(r_xx: &CMat, sigma2: f64, subcarrier_spacing_hz: f64) -> Result<RateValue> {
    if !(sigma2 > 0.0) {
        return Err(HrfError::domain("σ² must be positive"));
    }
    let tr = trace_re(r_xx).max(0.0);
    let n = r_xx.nrows().max(1) as f64;
    let mut v = RateValue::new(one_bit_nats(tr, sigma2) / LN_2, RateKind::OneBitApprox, subcarrier_spacing_hz);
    v.low_snr_warning = tr / (n * sigma2) > 0.1;
    Ok(v)
}

/// The raw one-bit trace expression (2/(πσ²))·tr(R_xx).
pub fn one_bit_nats(trace: f64, sigma2: f64) -> f64 {
    2.0 / (PI * sigma2) * trace
}

/// Factored linear map R ↦ Σ_r G_r R G_rᴴ for one transmitter.
#[derive(Debug, Clone)]
pub struct CovarianceMap {
    pub factors: Vec<CMat>,
    /// N, the receive dimension.
    pub rows: usize,
}

impl CovarianceMap {
    pub fn apply(&self, r: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows, self.rows);
        for g in &self.factors {
            out += g * r * g.adjoint();
        }
        out
    }

    /// Builds the map Σ_t (Σ_p s_p(t) U_p) R (Σ_q s_q(t) U_q)ᴴ from the path
    /// matrices U_p and the Gram matrix W_pq = Σ_t s_p(t) conj(s_q(t)).
    fn from_paths(paths: Vec<CMat>, gram: CMat, rows: usize) -> Self {
        if paths.is_empty() {
            return Self { factors: Vec::new(), rows };
        }
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut factors = Vec::new();
        for (r, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= 1e-13 * top || lam <= 0.0 {
                continue;
            }
            let col = eig.eigenvectors.column(r);
            let mut g = CMat::zeros(paths[0].nrows(), paths[0].ncols());
            for (p, u) in paths.iter().enumerate() {
                g += u * (col[p] * lam.sqrt());
            }
            factors.push(g);
        }
        Self {
            factors,
            rows,
        }
    }
}

/// R_xx as a linear function of (R₀, R_k) for each distinct symbol index.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    /// One entry per distinct symbol (a single entry when no target moves).
    pub per_symbol: Vec<(Option<CovarianceMap>, Vec<CovarianceMap>)>,
    pub num_bs_antennas: usize,
}

impl CovarianceModel {
    /// `include_echo = false` drops the DL echo from R_xx, leaving the uplink
    /// signal that carries the users' data.
    pub fn new(sc: &Scenario, include_echo: bool) -> Self {
        let static_scene = sc.targets.iter().all(|t| t.doppler_hz == 0.0);
        let symbols: Vec<usize> = if static_scene {
            vec![0]
        } else {
            (0..sc.ofdm.num_symbols).collect()
        };
        let per_symbol = symbols
            .into_iter()
            .map(|l| {
                let echo = include_echo.then(|| echo_map(sc, l));
                let users = (0..sc.users.len()).map(|k| uplink_map(sc, k, l)).collect();
                (echo, users)
            })
            .collect();
        Self {
            per_symbol,
            num_bs_antennas: sc.num_bs_antennas,
        }
    }

    pub fn covariance(&self, idx: usize, r0: &CMat, rk: &[CMat]) -> CMat {
        let (echo, users) = &self.per_symbol[idx];
        let n = self.num_bs_antennas;
        let mut out = echo.as_ref().map(|m| m.apply(r0)).unwrap_or_else(|| CMat::zeros(n, n));
        for (map, r) in users.iter().zip(rk) {
            out += map.apply(r);
        }
        out
    }
}

fn sample_grid(sc: &Scenario, subcarriers: &[i32]) -> Vec<(i32, usize)> {
    subcarriers
        .iter()
        .flat_map(|&m| (0..sc.ofdm.samples_per_symbol).map(move |v| (m, v)))
        .collect()
}

fn gram(scal: &[Vec<Complex64>], weight: f64) -> CMat {
    let p = scal.len();
    CMat::from_fn(p, p, |a, b| {
        scal[a].iter().zip(&scal[b]).map(|(x, y)| x * y.conj()).sum::<Complex64>() * weight
    })
}

fn echo_map(sc: &Scenario, l: usize) -> CovarianceMap {
    let grid = sample_grid(sc, &sc.ofdm.dl_subcarriers);
    let w = sc.ofdm.symbol_variances[0] / sc.ofdm.samples_per_symbol as f64;
    let scal: Vec<Vec<Complex64>> = (0..sc.targets.len())
        .map(|i| grid.iter().map(|&(m, v)| scalars::echo_scalar(sc, i, l, m, v)).collect())
        .collect();
    let paths = sc
        .targets
        .iter()
        .map(|t| {
            let a = crate::signal_model::bs_steering(sc, t.aoa_rad);
            &a * a.transpose()
        })
        .collect();
    CovarianceMap::from_paths(paths, gram(&scal, w), sc.num_bs_antennas)
}

fn uplink_map(sc: &Scenario, k: usize, l: usize) -> CovarianceMap {
    let u = &sc.users[k];
    let grid = sample_grid(sc, sc.ofdm.subcarriers(k + 1));
    let w = sc.ofdm.symbol_variances[k + 1] / sc.ofdm.samples_per_symbol as f64;
    let mut scal = vec![grid.iter().map(|&(m, v)| scalars::direct_scalar(sc, k, m, v)).collect::<Vec<_>>()];
    let mut paths = vec![
        crate::signal_model::bs_steering(sc, u.aoa_rad)
            * crate::signal_model::user_steering(sc, k, u.aod_rad).transpose(),
    ];
    for (slot, &j) in u.observed_targets.iter().enumerate() {
        scal.push(
            grid.iter()
                .map(|&(m, v)| scalars::reflected_scalar(sc, k, slot, l, m, v))
                .collect(),
        );
        paths.push(
            crate::signal_model::bs_steering(sc, sc.targets[j].aoa_rad)
                * crate::signal_model::user_steering(sc, k, u.per_target_aod[slot]).transpose(),
        );
    }
    CovarianceMap::from_paths(paths, gram(&scal, w), sc.num_bs_antennas)
}

/// Uplink rate as a function of the covariances, averaged over distinct symbols.
#[derive(Debug, Clone)]
pub struct RateModel {
    pub covariance: CovarianceModel,
    pub kind: RateKind,
    /// (1 − η)/σ² for the log-det bound, 2/(πσ²·ln 2) for the one-bit form.
    pub coefficient: f64,
    pub subcarrier_spacing_hz: f64,
    pub noise_variance: f64,
}

impl RateModel {
    /// The one-bit trace form applies at b = 1, the log-det bound otherwise.
    pub fn new(sc: &Scenario, bits: u32, eta: f64, include_echo: bool) -> Result<Self> {
        check_eta(eta)?;
        let (kind, coefficient) = if bits == 1 {
            (RateKind::OneBitApprox, 2.0 / (PI * sc.noise_variance * LN_2))
        } else {
            (RateKind::LowerBound, (1.0 - eta) / sc.noise_variance)
        };
        Ok(Self {
            covariance: CovarianceModel::new(sc, include_echo),
            kind,
            coefficient,
            subcarrier_spacing_hz: sc.ofdm.subcarrier_spacing_hz,
            noise_variance: sc.noise_variance,
        })
    }

    pub fn num_symbols(&self) -> usize {
        self.covariance.per_symbol.len()
    }

    /// Mean MI in bits per vector symbol; `None` outside the log-det domain.
    pub fn bits(&self, r0: &CMat, rk: &[CMat]) -> Option<f64> {
        let mut total = 0.0;
        for idx in 0..self.num_symbols() {
            let rxx = self.covariance.covariance(idx, r0, rk);
            total += match self.kind {
                RateKind::OneBitApprox => self.coefficient * trace_re(&rxx),
                RateKind::LowerBound => {
                    let n = rxx.nrows();
                    let m = CMat::identity(n, n) + rxx * Complex64::new(self.coefficient, 0.0);
                    logdet_hpd(&m)? / LN_2
                }
            };
        }
        Some(total / self.num_symbols() as f64)
    }

    pub fn value(&self, r0: &CMat, rk: &[CMat]) -> RateValue {
        let bits = self.bits(r0, rk).unwrap_or(f64::NAN);
        RateValue::new(bits, self.kind, self.subcarrier_spacing_hz)
    }
}
