//! Fisher information of the quantized observation and the resulting CRBs.
//!
//! Three evaluators share one parameter model:
//! * [`fim_exact`] sums the per-bin Λ terms of the discrete likelihood.
//! * [`empirical_fim`] estimates the score variance by simulation.
//! * [`fim_lower_bound_aoa`] is the Bussgang low-SNR bound, linear in the
//!   transmit covariances.
//!
//! Per real component the noise std is σ/√2 and quantizer thresholds are
//! scaled by the per-antenna AGC scale from [`agc_scale`].

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{HrfError, Result};
use crate::linalg::{is_hermitian_psd, trace_prod_re, CMat, CVec};
use crate::normal;
use crate::quantizer::{compensated_sum, Quantizer};
use crate::scenario::Scenario;
use crate::signal_model::{
    noiseless_sample, scalars, steering_derivative, Precoders, Symbols,
};

/// Scalar entries of ψ that the FIM evaluators can differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    TargetAoa(usize),
    TargetRange(usize),
    TargetDoppler(usize),
    UserAoa(usize),
    UserRange(usize),
}

impl Parameter {
    pub fn label(&self) -> String {
        match self {
            Parameter::TargetAoa(i) => format!("theta_tar_{i}"),
            Parameter::TargetRange(i) => format!("range_tar_{i}"),
            Parameter::TargetDoppler(i) => format!("doppler_tar_{i}"),
            Parameter::UserAoa(k) => format!("theta_user_{k}"),
            Parameter::UserRange(k) => format!("range_user_{k}"),
        }
    }

    fn slot(&self, sc: &Scenario) -> Result<()> {
        let ok = match *self {
            Parameter::TargetAoa(i) | Parameter::TargetRange(i) | Parameter::TargetDoppler(i) => {
                i < sc.targets.len()
            }
            Parameter::UserAoa(k) | Parameter::UserRange(k) => k < sc.users.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(HrfError::Lookup(format!("{} does not exist", self.label())))
        }
    }

    pub fn get(&self, sc: &Scenario) -> Result<f64> {
        self.slot(sc)?;
        Ok(match *self {
            Parameter::TargetAoa(i) => sc.targets[i].aoa_rad,
            Parameter::TargetRange(i) => sc.targets[i].range_m,
            Parameter::TargetDoppler(i) => sc.targets[i].doppler_hz,
            Parameter::UserAoa(k) => sc.users[k].aoa_rad,
            Parameter::UserRange(k) => sc.users[k].range_m,
        })
    }

    /// Sets the raw field; every other scenario field is held fixed.
    pub fn set(&self, sc: &mut Scenario, value: f64) -> Result<()> {
        self.slot(sc)?;
        match *self {
            Parameter::TargetAoa(i) => sc.targets[i].aoa_rad = value,
            Parameter::TargetRange(i) => sc.targets[i].range_m = value,
            Parameter::TargetDoppler(i) => sc.targets[i].doppler_hz = value,
            Parameter::UserAoa(k) => sc.users[k].aoa_rad = value,
            Parameter::UserRange(k) => sc.users[k].range_m = value,
        }
        Ok(())
    }

    fn perturbed(&self, sc: &Scenario, delta: f64) -> Result<Scenario> {
        let mut s = sc.clone();
        self.set(&mut s, self.get(sc)? + delta)?;
        Ok(s)
    }

    fn fd_step(&self, sc: &Scenario) -> Result<f64> {
        Ok(1e-7 * self.get(sc)?.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FimKind {
    Exact,
    LowSnrBound,
    Empirical,
    /// Unquantized observation, (2/σ²)·Re Σ ∂xᴴ∂x.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimResult {
    pub matrix: DMatrix<f64>,
    pub kind: FimKind,
    pub param_labels: Vec<String>,
}

impl FimResult {
    pub fn scalar(&self) -> f64 {
        self.matrix[(0, 0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbValue {
    pub value: f64,
    pub index: usize,
    pub fim_kind: FimKind,
}

/// Λ = [φ(α) − φ(β)]² / (Φ(α) − Φ(β)) for bin `bin` (0-based) of the
/// quantizer scaled by `scale`, with noise std σ/√2 around `x`.
pub fn lambda_term(x: f64, sigma: f64, quantizer: &Quantizer, bin: usize, scale: f64) -> f64 {
    let s = sigma / SQRT_2;
    let alpha = (quantizer.thresholds[bin + 1] * scale - x) / s;
    let beta = (quantizer.thresholds[bin] * scale - x) / s;
    let p = normal::interval(beta, alpha);
    if p < 1e-300 {
        return 0.0;
    }
    let d = normal::pdf(alpha) - normal::pdf(beta);
    d * d / p
}

/// Σ_bins Λ for one real component; equals (σ²/2)·(Fisher information of the mean).
pub fn lambda_sum(x: f64, sigma: f64, quantizer: &Quantizer, scale: f64) -> f64 {
    let s = sigma / SQRT_2;
    let z: Vec<f64> = quantizer
        .thresholds
        .iter()
        .map(|&t| (t * scale - x) / s)
        .collect();
    let phi: Vec<f64> = z.iter().map(|&v| normal::pdf(v)).collect();
    compensated_sum((0..quantizer.num_bins()).map(|q| {
        let p = normal::interval(z[q], z[q + 1]);
        if p < 1e-300 {
            0.0
        } else {
            let d = phi[q + 1] - phi[q];
            d * d / p
        }
    }))
}

/// Per-antenna AGC scale: std of the real part of x + w, averaged over the frame.
pub fn agc_scale(sc: &Scenario, precoders: &Precoders, symbols: &Symbols) -> Result<Vec<f64>> {
    let n = sc.num_bs_antennas;
    let mut power = vec![0.0; n];
    let count = (sc.ofdm.num_symbols * sc.ofdm.samples_per_symbol) as f64;
    for l in 0..sc.ofdm.num_symbols {
        for v in 0..sc.ofdm.samples_per_symbol {
            let x = noiseless_sample(sc, precoders, symbols, l, v)?.x;
            for (p, xn) in power.iter_mut().zip(x.iter()) {
                *p += xn.norm_sqr();
            }
        }
    }
    Ok(power
        .into_iter()
        .map(|p| ((p / count + sc.noise_variance) / 2.0).sqrt())
        .collect())
}

/// x and ∂x/∂ψ_p at every (ℓ, v), in (ℓ, v) order.
struct Frame {
    samples: Vec<(CVec, Vec<CVec>)>,
}

fn frame(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    params: &[Parameter],
) -> Result<Frame> {
    for p in params {
        p.slot(sc)?;
    }
    // Perturbed scenarios for the finite-difference parameters.
    let mut fd = Vec::with_capacity(params.len());
    for p in params {
        fd.push(match p {
            Parameter::TargetAoa(_) => None,
            _ => {
                let h = p.fd_step(sc)?;
                Some((p.perturbed(sc, h)?, p.perturbed(sc, -h)?, h))
            }
        });
    }
    let idx: Vec<(usize, usize)> = (0..sc.ofdm.num_symbols)
        .flat_map(|l| (0..sc.ofdm.samples_per_symbol).map(move |v| (l, v)))
        .collect();
    let samples = idx
        .par_iter()
        .map(|&(l, v)| -> Result<(CVec, Vec<CVec>)> {
            let s = noiseless_sample(sc, precoders, symbols, l, v)?;
            let mut ds = Vec::with_capacity(params.len());
            for (p, fdp) in params.iter().zip(&fd) {
                let d = match (p, fdp) {
                    (Parameter::TargetAoa(i), _) => s.derivatives[*i].clone(),
                    (_, Some((sp, sm, h))) => {
                        let xp = noiseless_sample(sp, precoders, symbols, l, v)?.x;
                        let xm = noiseless_sample(sm, precoders, symbols, l, v)?.x;
                        (xp - xm) / Complex64::new(2.0 * h, 0.0)
                    }
                    _ => unreachable!("finite-difference scenarios exist for non-AoA parameters"),
                };
                if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(HrfError::NonFiniteDerivative(p.label()));
                }
                ds.push(d);
            }
            Ok((s.x, ds))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Frame { samples })
}

fn labels(params: &[Parameter]) -> Vec<String> {
    params.iter().map(Parameter::label).collect()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m = (&*m + t) * 0.5;
}

/// Exact FIM of the quantized observation over all (ℓ, v, n) and bins.
pub fn fim_exact(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    quantizer: &Quantizer,
    params: &[Parameter],
) -> Result<FimResult> {
    let scale = agc_scale(sc, precoders, symbols)?;
    fim_exact_with_scale(sc, precoders, symbols, quantizer, params, &scale)
}

/// [`fim_exact`] with an explicit AGC scale per antenna.
pub fn fim_exact_with_scale(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    quantizer: &Quantizer,
    params: &[Parameter],
    scale: &[f64],
) -> Result<FimResult> {
    if scale.len() != sc.num_bs_antennas {
        return Err(HrfError::shape(
            format!("{} AGC scales", sc.num_bs_antennas),
            scale.len(),
        ));
    }
    let fr = frame(sc, precoders, symbols, params)?;
    let sigma = sc.noise_variance.sqrt();
    let np = params.len();
    // One partial FIM per sample, reduced in order for determinism.
    let partials: Vec<DMatrix<f64>> = fr
        .samples
        .par_iter()
        .map(|(x, ds)| {
            let mut f = DMatrix::zeros(np, np);
            for n in 0..x.len() {
                let lr = lambda_sum(x[n].re, sigma, quantizer, scale[n]);
                let li = lambda_sum(x[n].im, sigma, quantizer, scale[n]);
                for i in 0..np {
                    for j in 0..np {
                        f[(i, j)] += ds[i][n].re * ds[j][n].re * lr + ds[i][n].im * ds[j][n].im * li;
                    }
                }
            }
            f
        })
        .collect();
    let mut matrix = partials
        .iter()
        .fold(DMatrix::zeros(np, np), |acc, f| acc + f)
        * (2.0 / sc.noise_variance);
    symmetrize(&mut matrix);
    Ok(FimResult {
        matrix,
        kind: FimKind::Exact,
        param_labels: labels(params),
    })
}

/// FIM of the unquantized observation.
pub fn fim_gaussian(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    params: &[Parameter],
) -> Result<FimResult> {
    let fr = frame(sc, precoders, symbols, params)?;
    let np = params.len();
    let mut matrix = DMatrix::zeros(np, np);
    for (_, ds) in &fr.samples {
        for i in 0..np {
            for j in 0..np {
                matrix[(i, j)] += ds[i].dotc(&ds[j]).re;
            }
        }
    }
    matrix *= 2.0 / sc.noise_variance;
    symmetrize(&mut matrix);
    Ok(FimResult {
        matrix,
        kind: FimKind::Gaussian,
        param_labels: labels(params),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFim {
    pub fim: FimResult,
    pub std_error: f64,
    /// Mean score; should vanish within a few standard errors.
    pub mean_score: f64,
}

const EMPIRICAL_CHUNK: usize = 4096;

/// Monte-Carlo estimate of E[(∂ log p(r_q | ψ)/∂ψ)²] for one parameter.
///
/// Each draw adds CN(0, σ²) noise to x(ψ), quantizes with the AGC scale at ψ
/// and differentiates the exact log-likelihood of the observed bins by
/// central differences.
pub fn empirical_fim(
    sc: &Scenario,
    precoders: &Precoders,
    symbols: &Symbols,
    quantizer: &Quantizer,
    param: Parameter,
    n_draws: usize,
    seed: u64,
) -> Result<EmpiricalFim> {
    if n_draws < 2 {
        return Err(HrfError::domain("empirical FIM needs at least 2 draws"));
    }
    param.slot(sc)?;
    let scale = agc_scale(sc, precoders, symbols)?;
    let h = 1e-6 * param.get(sc)?.abs().max(1.0);
    let sp = param.perturbed(sc, h)?;
    let sm = param.perturbed(sc, -h)?;
    let mut x0 = Vec::new();
    let mut xp = Vec::new();
    let mut xm = Vec::new();
    for l in 0..sc.ofdm.num_symbols {
        for v in 0..sc.ofdm.samples_per_symbol {
            x0.push(noiseless_sample(sc, precoders, symbols, l, v)?.x);
            xp.push(noiseless_sample(&sp, precoders, symbols, l, v)?.x);
            xm.push(noiseless_sample(&sm, precoders, symbols, l, v)?.x);
        }
    }
    let s = (sc.noise_variance / 2.0).sqrt();
    let log_p = |mean: f64, q: usize, sc_n: f64| -> f64 {
        let lo = (quantizer.thresholds[q] * sc_n - mean) / s;
        let hi = (quantizer.thresholds[q + 1] * sc_n - mean) / s;
        normal::interval(lo, hi).max(1e-300).ln()
    };
    let n_chunks = n_draws.div_ceil(EMPIRICAL_CHUNK);
    let sums: Vec<(f64, f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = EMPIRICAL_CHUNK.min(n_draws - c * EMPIRICAL_CHUNK);
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for _ in 0..count {
                let mut score = 0.0;
                for t in 0..x0.len() {
                    for n in 0..x0[t].len() {
                        let wr: f64 = StandardNormal.sample(&mut rng);
                        let wi: f64 = StandardNormal.sample(&mut rng);
                        let r = x0[t][n] + Complex64::new(wr * s, wi * s);
                        let qr = quantizer.bin_of(r.re / scale[n]);
                        let qi = quantizer.bin_of(r.im / scale[n]);
                        score += (log_p(xp[t][n].re, qr, scale[n])
                            - log_p(xm[t][n].re, qr, scale[n])
                            + log_p(xp[t][n].im, qi, scale[n])
                            - log_p(xm[t][n].im, qi, scale[n]))
                            / (2.0 * h);
                    }
                }
                s1 += score;
                s2 += score * score;
                s4 += score.powi(4);
            }
            (s1, s2, s4)
        })
        .collect();
    let n = n_draws as f64;
    let s1 = compensated_sum(sums.iter().map(|t| t.0));
    let s2 = compensated_sum(sums.iter().map(|t| t.1));
    let s4 = compensated_sum(sums.iter().map(|t| t.2));
    let mean_sq = s2 / n;
    let var_sq = (s4 / n - mean_sq * mean_sq).max(0.0) * n / (n - 1.0);
    Ok(EmpiricalFim {
        fim: FimResult {
            matrix: DMatrix::from_element(1, 1, mean_sq),
            kind: FimKind::Empirical,
            param_labels: vec![param.label()],
        },
        std_error: (var_sq / n).sqrt(),
        mean_score: s1 / n,
    })
}

/// The low-SNR AoA FIM bound as a linear map of the transmit covariances:
/// F_ij = c·Re[tr(R₀ G⁰_ij) + Σ_k tr(R_k G^k_ij)] with c = 2(1 − η)/σ².
#[derive(Debug, Clone)]
pub struct AoaFimModel {
    /// P
    pub num_targets: usize,
    pub coefficient: f64,
    /// G⁰_ij, row-major over (i, j).
    pub bs_terms: Vec<CMat>,
    /// G^k_ij per user, row-major over (i, j).
    pub user_terms: Vec<Vec<CMat>>,
}

impl AoaFimModel {
    pub fn new(sc: &Scenario, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(HrfError::domain(format!("η must lie in [0, 1], got {eta}")));
        }
        let p = sc.targets.len();
        let n = sc.num_bs_antennas;
        let plan = &sc.ofdm;
        let lmv: Vec<(usize, usize)> = (0..plan.num_symbols)
            .flat_map(|l| (0..plan.samples_per_symbol).map(move |v| (l, v)))
            .collect();

        // Echo: A^i = s_i(ℓ,m,v)·(ȧ aᵀ + a ȧᵀ).
        let d_mats: Vec<CMat> = sc
            .targets
            .iter()
            .map(|t| {
                let a = crate::signal_model::bs_steering(sc, t.aoa_rad);
                let da = steering_derivative(t.aoa_rad, n, sc.antenna_spacing_ratio);
                &da * a.transpose() + &a * da.transpose()
            })
            .collect();
        let sigma0 = plan.symbol_variances[0];
        let mut bs_terms = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                let w = phase_gram(&lmv, &plan.dl_subcarriers, |l, m, v| {
                    (
                        scalars::echo_scalar(sc, i, l, m, v),
                        scalars::echo_scalar(sc, j, l, m, v),
                    )
                });
                bs_terms.push(d_mats[i].adjoint() * &d_mats[j] * (w * sigma0));
            }
        }

        // Reflection: B^{k,i} = s_{k,i}(ℓ,m,v)·ȧ_r(θ_i) a_u(θ_{k,i})ᵀ.
        let mut user_terms = Vec::with_capacity(sc.users.len());
        for (k, u) in sc.users.iter().enumerate() {
            let nu = u.num_antennas;
            let sigma_k = plan.symbol_variances[k + 1];
            let b_mats: Vec<Option<(CMat, usize)>> = (0..p)
                .map(|i| {
                    u.slot_of(i).map(|slot| {
                        let da = steering_derivative(sc.targets[i].aoa_rad, n, sc.antenna_spacing_ratio);
                        let au = crate::signal_model::user_steering(sc, k, u.per_target_aod[slot]);
                        (da * au.transpose(), slot)
                    })
                })
                .collect();
            let mut terms = Vec::with_capacity(p * p);
            for i in 0..p {
                for j in 0..p {
                    terms.push(match (&b_mats[i], &b_mats[j]) {
                        (Some((bi, si)), Some((bj, sj))) => {
                            let w = phase_gram(&lmv, plan.subcarriers(k + 1), |l, m, v| {
                                (
                                    scalars::reflected_scalar(sc, k, *si, l, m, v),
                                    scalars::reflected_scalar(sc, k, *sj, l, m, v),
                                )
                            });
                            bi.adjoint() * bj * (w * sigma_k)
                        }
                        _ => CMat::zeros(nu, nu),
                    });
                }
            }
            user_terms.push(terms);
        }
        Ok(Self {
            num_targets: p,
            coefficient: 2.0 * (1.0 - eta) / sc.noise_variance,
            bs_terms,
            user_terms,
        })
    }

    /// Entry (i, j) for covariances (R₀, R_k).
    pub fn entry(&self, r0: &CMat, rk: &[CMat], i: usize, j: usize) -> f64 {
        let idx = i * self.num_targets + j;
        let mut v = trace_prod_re(r0, &self.bs_terms[idx]);
        for (r, terms) in rk.iter().zip(&self.user_terms) {
            v += trace_prod_re(r, &terms[idx]);
        }
        self.coefficient * v
    }

    pub fn evaluate(&self, r0: &CMat, rk: &[CMat]) -> DMatrix<f64> {
        let p = self.num_targets;
        let mut m = DMatrix::from_fn(p, p, |i, j| self.entry(r0, rk, i, j));
        symmetrize(&mut m);
        m
    }

    /// Hermitian matrix C with F_ij = Re tr(R₀ C) restricted to R₀ (coefficient included).
    pub fn bs_gradient(&self, i: usize, j: usize) -> CMat {
        let g = &self.bs_terms[i * self.num_targets + j];
        (g + g.adjoint()) * Complex64::new(0.5 * self.coefficient, 0.0)
    }

    /// Hermitian matrix C with F_ij = Re tr(R_k C) restricted to R_k.
    pub fn user_gradient(&self, k: usize, i: usize, j: usize) -> CMat {
        let g = &self.user_terms[k][i * self.num_targets + j];
        (g + g.adjoint()) * Complex64::new(0.5 * self.coefficient, 0.0)
    }
}

/// Σ_{ℓ,m,v} conj(sᵢ)·sⱼ.
fn phase_gram(
    lmv: &[(usize, usize)],
    subcarriers: &[i32],
    mut s: impl FnMut(usize, i32, usize) -> (Complex64, Complex64),
) -> Complex64 {
    let mut re = Vec::with_capacity(lmv.len() * subcarriers.len());
    let mut im = Vec::with_capacity(lmv.len() * subcarriers.len());
    for &(l, v) in lmv {
        for &m in subcarriers {
            let (a, b) = s(l, m, v);
            let z = a.conj() * b;
            re.push(z.re);
            im.push(z.im);
        }
    }
    Complex64::new(compensated_sum(re), compensated_sum(im))
}

fn check_psd(r: &CMat, n: usize, what: &str) -> Result<()> {
    if r.nrows() != n || r.ncols() != n {
        return Err(HrfError::shape(
            format!("{what} of size {n}×{n}"),
            format!("{}×{}", r.nrows(), r.ncols()),
        ));
    }
    let tol = 1e-9 * r.trace().re.abs().max(1e-300);
    if !is_hermitian_psd(r, tol) {
        return Err(HrfError::domain(format!("{what} is not Hermitian PSD")));
    }
    Ok(())
}

/// Low-SNR Bussgang lower bound on the P × P AoA FIM.
pub fn fim_lower_bound_aoa(r0: &CMat, rk: &[CMat], sc: &Scenario, eta: f64) -> Result<FimResult> {
    check_psd(r0, sc.num_bs_antennas, "R0")?;
    if rk.len() != sc.users.len() {
        return Err(HrfError::shape(format!("{} user covariances", sc.users.len()), rk.len()));
    }
    for (k, (r, u)) in rk.iter().zip(&sc.users).enumerate() {
        check_psd(r, u.num_antennas, &format!("R_{}", k + 1))?;
    }
    let model = AoaFimModel::new(sc, eta)?;
    Ok(FimResult {
        matrix: model.evaluate(r0, rk),
        kind: FimKind::LowSnrBound,
        param_labels: (0..sc.targets.len())
            .map(|i| Parameter::TargetAoa(i).label())
            .collect(),
    })
}

/// ([F⁻¹])_{ii}; rejects FIMs with condition number ≥ 1e12.
pub fn crb(fim: &FimResult, index: usize) -> Result<CrbValue> {
    let m = &fim.matrix;
    let p = m.nrows();
    if index >= p {
        return Err(HrfError::Lookup(format!("FIM has no parameter {index}")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(HrfError::Unidentifiable {
            condition: f64::INFINITY,
        });
    }
    let eig = m.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if !(lo > 0.0) || hi / lo >= 1e12 {
        return Err(HrfError::Unidentifiable {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let value = if p == 1 {
        1.0 / m[(0, 0)]
    } else {
        let inv = m
            .clone()
            .cholesky()
            .ok_or(HrfError::Unidentifiable {
                condition: f64::INFINITY,
            })?
            .inverse();
        inv[(index, index)]
    };
    Ok(CrbValue {
        value,
        index,
        fim_kind: fim.kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::design_lloyd_max;
    use crate::scenario::default_scenario;

    fn small() -> Scenario {
        let mut sc = default_scenario();
        sc.ofdm.num_symbols = 2;
        sc.ofdm.samples_per_symbol = 4;
        sc.ofdm.dl_subcarriers = vec![0, 1];
        sc.ofdm.ul_subcarriers_per_user = vec![vec![2, 3]];
        sc
    }

    #[test]
    fn crb_examples() {
        let f = |m: DMatrix<f64>| FimResult {
            matrix: m,
            kind: FimKind::Exact,
            param_labels: vec![],
        };
        assert_eq!(crb(&f(DMatrix::from_element(1, 1, 4.0)), 0).unwrap().value, 0.25);
        let d = crb(&f(DMatrix::from_diagonal(&nalgebra::dvector![2.0, 5.0])), 1).unwrap();
        assert!((d.value - 0.2).abs() < 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((crb(&f(m), 0).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(crb(&f(sing), 0), Err(HrfError::Unidentifiable { .. })));
        assert!(crb(&f(DMatrix::zeros(1, 1)), 0).is_err());
    }

    #[test]
    fn lambda_symmetric_bin_vanishes_and_probabilities_sum() {
        let q = Quantizer {
            bits: 0,
            thresholds: vec![f64::NEG_INFINITY, -1.0, 1.0, f64::INFINITY],
            levels: vec![-1.5, 0.0, 1.5],
            eta: 0.0,
        };
        assert!(lambda_term(0.0, 1.0, &q, 1, 1.0).abs() < 1e-300);
        assert!(lambda_term(0.3, 1.0, &q, 1, 1.0) > 0.0);

        let q = design_lloyd_max(2).unwrap();
        let s = 1.0 / SQRT_2;
        let probs: f64 = (0..q.num_bins())
            .map(|b| normal::interval((q.thresholds[b] - 0.3) / s, (q.thresholds[b + 1] - 0.3) / s))
            .sum();
        assert!((probs - 1.0).abs() < 1e-14);
        let direct: f64 = (0..q.num_bins()).map(|b| lambda_term(0.3, 1.0, &q, b, 1.0)).sum();
        assert!((direct - lambda_sum(0.3, 1.0, &q, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn lambda_sum_at_zero_signal_is_bussgang_gain() {
        // Σ_b (φ_b − φ_{b+1})²/p_b = Σ p_b y_b² = 1 − η for a Lloyd-Max codebook.
        for b in 1..=4 {
            let q = design_lloyd_max(b).unwrap();
            let s = 1.0 / SQRT_2;
            assert!((lambda_sum(0.0, 1.0, &q, s) - (1.0 - q.eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_precoders_give_zero_fim() {
        let sc = small();
        let q = design_lloyd_max(2).unwrap();
        let sym = Symbols::ones(&sc.ofdm);
        let f = fim_exact(&sc, &Precoders::zeros(&sc), &sym, &q, &[Parameter::TargetAoa(0)]).unwrap();
        assert_eq!(f.scalar(), 0.0);
    }

    #[test]
    fn lower_bound_is_linear_and_vanishes_at_eta_one() {
        let sc = small();
        let n = sc.num_bs_antennas;
        let r0 = CMat::identity(n, n) * Complex64::new(0.1, 0.0);
        let r1 = CMat::identity(4, 4) * Complex64::new(0.05, 0.0);
        let z = fim_lower_bound_aoa(&r0, std::slice::from_ref(&r1), &sc, 1.0).unwrap();
        assert_eq!(z.scalar(), 0.0);
        let a = fim_lower_bound_aoa(&r0, std::slice::from_ref(&r1), &sc, 0.2).unwrap().scalar();
        let b = fim_lower_bound_aoa(&r0, &[CMat::zeros(4, 4)], &sc, 0.2).unwrap().scalar();
        let c = fim_lower_bound_aoa(&CMat::zeros(n, n), &[r1], &sc, 0.2).unwrap().scalar();
        assert!((a - b - c).abs() <= 1e-12 * a);
        let bad = CMat::identity(n, n) * Complex64::new(-1.0, 0.0);
        assert!(fim_lower_bound_aoa(&bad, &[CMat::zeros(4, 4)], &sc, 0.2).is_err());
    }

    #[test]
    fn unknown_parameter_is_a_lookup_error() {
        let sc = small();
        let q = design_lloyd_max(1).unwrap();
        let sym = Symbols::ones(&sc.ofdm);
        let r = fim_exact(&sc, &Precoders::uniform(&sc), &sym, &q, &[Parameter::TargetAoa(4)]);
        assert!(matches!(r, Err(HrfError::Lookup(_))));
    }
}
