//! Lloyd-Max scalar quantizers for Gaussian inputs and the ADC models built on them.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::error::{HrfError, Result};
use crate::linalg::{CMat, CVec};
use crate::normal;

pub const MAX_BITS: u32 = 16;

/// Optimal b-bit quantizer for a unit-variance Gaussian input.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    pub bits: u32,
    /// 2^b + 1 values, first −∞ and last +∞.
    pub thresholds: Vec<f64>,
    /// 2^b reconstruction levels.
    pub levels: Vec<f64>,
    /// Normalized MSE E[(X − Q(X))²] for X ~ N(0, 1).
    pub eta: f64,
}

/// E[X | a < X < b] for X ~ N(0, 1), with the bin probability.
fn centroid(a: f64, b: f64) -> (f64, f64) {
    let p = normal::interval(a, b);
    ((normal::pdf(a) - normal::pdf(b)) / p, p)
}

/// Newton residual t_i − (y_{i−1} + y_i)/2 and its tridiagonal Jacobian.
struct Residual {
    r: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn residual(t: &[f64]) -> Residual {
    // t holds the K−1 interior thresholds.
    let n = t.len();
    let edge = |i: isize| -> f64 {
        if i < 0 {
            f64::NEG_INFINITY
        } else if i as usize >= n {
            f64::INFINITY
        } else {
            t[i as usize]
        }
    };
    // Bin q spans (edge(q−1), edge(q)), q = 0..=n.
    let mut c = Vec::with_capacity(n + 1);
    let mut dca = Vec::with_capacity(n + 1);
    let mut dcb = Vec::with_capacity(n + 1);
    for q in 0..=n {
        let (a, b) = (edge(q as isize - 1), edge(q as isize));
        let (cq, p) = centroid(a, b);
        let da = if a.is_finite() { normal::pdf(a) * (cq - a) / p } else { 0.0 };
        let db = if b.is_finite() { normal::pdf(b) * (b - cq) / p } else { 0.0 };
        c.push(cq);
        dca.push(da);
        dcb.push(db);
    }
    let mut out = Residual {
        r: vec![0.0; n],
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    for i in 0..n {
        // Threshold i separates bins i and i+1.
        out.r[i] = t[i] - 0.5 * (c[i] + c[i + 1]);
        out.diag[i] = 1.0 - 0.5 * (dcb[i] + dca[i + 1]);
        out.lower[i] = -0.5 * dca[i];
        out.upper[i] = -0.5 * dcb[i + 1];
    }
    out
}

/// Solves a tridiagonal system (Thomas algorithm); `lower[0]` and `upper[n−1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let m = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / m;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    x
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn strictly_increasing(t: &[f64]) -> bool {
    t.windows(2).all(|w| w[0] < w[1])
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in values {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Designs the b-bit Lloyd-Max quantizer for N(0, 1).
///
/// Starts from the asymptotically optimal compander thresholds √3·Φ⁻¹(i/K)
/// and runs damped Newton on the joint Lloyd/Max fixed point.
pub fn design_lloyd_max(bits: u32) -> Result<Quantizer> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(HrfError::domain(format!(
            "bits must lie in 1..={MAX_BITS}, got {bits}"
        )));
    }
    let k = 1usize << bits;
    let mut t: Vec<f64> = (1..k)
        .map(|i| 3f64.sqrt() * normal::quantile(i as f64 / k as f64))
        .collect();

    const TOL: f64 = 1e-13;
    let mut res = residual(&t);
    let mut norm = inf_norm(&res.r);
    let mut iter = 0;
    while norm > TOL && iter < 100 {
        iter += 1;
        let neg: Vec<f64> = res.r.iter().map(|x| -x).collect();
        let step = solve_tridiagonal(&res.lower, &res.diag, &res.upper, &neg);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-6 {
            let trial: Vec<f64> = t.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            if strictly_increasing(&trial) {
                let tr = residual(&trial);
                let tn = inf_norm(&tr.r);
                if tn < norm {
                    t = trial;
                    res = tr;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm > 1e-10 {
        return Err(HrfError::Numerical {
            message: format!("Lloyd-Max design for b = {bits} did not converge"),
            residual: norm,
        });
    }
    // Exact symmetry: X and −X share the codebook.
    for i in 0..t.len() / 2 {
        let s = 0.5 * (t[t.len() - 1 - i] - t[i]);
        t[i] = -s;
        let last = t.len() - 1 - i;
        t[last] = s;
    }
    if t.len() % 2 == 1 {
        let mid = t.len() / 2;
        t[mid] = 0.0;
    }

    let mut thresholds = Vec::with_capacity(k + 1);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend_from_slice(&t);
    thresholds.push(f64::INFINITY);
    let mut levels = Vec::with_capacity(k);
    let mut probs = Vec::with_capacity(k);
    for w in thresholds.windows(2) {
        let (c, p) = centroid(w[0], w[1]);
        levels.push(c);
        probs.push(p);
    }
    let eta = 1.0 - compensated_sum(levels.iter().zip(&probs).map(|(y, p)| p * y * y));
    Ok(Quantizer {
        bits,
        thresholds,
        levels,
        eta,
    })
}

impl Quantizer {
    pub fn num_bins(&self) -> usize {
        self.levels.len()
    }

    /// Bin of a normalized input (0-based).
    pub fn bin_of(&self, x: f64) -> usize {
        let interior = &self.thresholds[1..self.thresholds.len() - 1];
        interior.partition_point(|&t| t <= x)
    }

    /// Q(x) for a normalized input.
    pub fn apply(&self, x: f64) -> f64 {
        self.levels[self.bin_of(x)]
    }

    /// max |y_q − E[X | bin q]|.
    pub fn lloyd_residual(&self) -> f64 {
        self.thresholds
            .windows(2)
            .zip(&self.levels)
            .map(|(w, y)| (centroid(w[0], w[1]).0 - y).abs())
            .fold(0.0, f64::max)
    }

    /// max |t_q − (y_{q−1} + y_q)/2| over finite thresholds.
    pub fn max_residual(&self) -> f64 {
        (1..self.levels.len())
            .map(|q| (self.thresholds[q] - 0.5 * (self.levels[q - 1] + self.levels[q])).abs())
            .fold(0.0, f64::max)
    }
}

/// Quantized complex samples with the per-antenna AGC scale used.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedFrame {
    pub r_q: CVec,
    pub scale: Vec<f64>,
}

/// Quantizes real and imaginary parts of each antenna separately after
/// normalizing by that antenna's scale.
pub fn quantize(r: &CVec, quantizer: &Quantizer, scale: &[f64]) -> Result<QuantizedFrame> {
    if scale.len() != r.len() {
        return Err(HrfError::shape(
            format!("{} scales", r.len()),
            format!("{}", scale.len()),
        ));
    }
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(HrfError::domain("AGC scales must be positive"));
    }
    let r_q = CVec::from_fn(r.len(), |n, _| {
        let s = scale[n];
        Complex64::new(
            s * quantizer.apply(r[n].re / s),
            s * quantizer.apply(r[n].im / s),
        )
    });
    Ok(QuantizedFrame {
        r_q,
        scale: scale.to_vec(),
    })
}

/// Bussgang gain 1 − η of the white low-SNR model G = (1 − η)·I.
pub fn bussgang_gain(quantizer: &Quantizer) -> f64 {
    1.0 - quantizer.eta
}

/// Full-scale-sinusoid SQNR model 6.02·b + 1.76 dB.
pub fn adc_dynamic_range(bits: u32) -> f64 {
    6.02 * bits as f64 + 1.76
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinBits {
    pub bits: u32,
    /// No b ≤ 16 reaches the requested range; `bits` is then 16.
    pub saturated: bool,
}

/// Smallest b with `adc_dynamic_range(b) ≥ dr_sig_db + margin_db`.
pub fn min_bits_for_dr(dr_sig_db: f64, margin_db: f64) -> Result<MinBits> {
    if !(margin_db >= 0.0) || dr_sig_db.is_nan() {
        return Err(HrfError::domain(format!(
            "margin must be non-negative and DR finite (dr {dr_sig_db}, margin {margin_db})"
        )));
    }
    let need = dr_sig_db + margin_db;
    Ok((1..=MAX_BITS)
        .find(|&b| adc_dynamic_range(b) >= need)
        .map(|bits| MinBits {
            bits,
            saturated: false,
        })
        .unwrap_or(MinBits {
            bits: MAX_BITS,
            saturated: true,
        }))
}

/// Output covariance of an ideal 1-bit quantizer (arcsine law).
pub fn arcsine_covariance(r_in: &CMat) -> Result<CMat> {
    let n = r_in.nrows();
    if r_in.ncols() != n {
        return Err(HrfError::shape("square matrix", format!("{}×{}", n, r_in.ncols())));
    }
    let d: Vec<f64> = (0..n).map(|i| r_in[(i, i)].re).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(HrfError::domain("arcsine law needs a positive diagonal"));
    }
    Ok(CMat::from_fn(n, n, |i, j| {
        let s = (d[i] * d[j]).sqrt();
        let z = r_in[(i, j)] / s;
        Complex64::new(
            FRAC_2_PI * z.re.clamp(-1.0, 1.0).asin(),
            FRAC_2_PI * z.im.clamp(-1.0, 1.0).asin(),
        )
    }))
}

/// 1 − 2/π, the 1-bit distortion factor.
pub fn one_bit_eta() -> f64 {
    1.0 - 2.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bit_closed_form() {
        let q = design_lloyd_max(1).unwrap();
        let y = (2.0 / PI).sqrt();
        assert_eq!(q.thresholds, vec![f64::NEG_INFINITY, 0.0, f64::INFINITY]);
        assert!((q.levels[0] + y).abs() < 1e-12 && (q.levels[1] - y).abs() < 1e-12);
        assert!((q.eta - one_bit_eta()).abs() < 1e-12);
        assert!((bussgang_gain(&q) - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_residuals() {
        for b in 1..=12 {
            let q = design_lloyd_max(b).unwrap();
            assert!(q.lloyd_residual() < 1e-10, "b={b} lloyd {}", q.lloyd_residual());
            assert!(q.max_residual() < 1e-10, "b={b} max {}", q.max_residual());
            assert_eq!(q.levels.len(), 1 << b);
        }
    }

    #[test]
    fn sixteen_bits_converges() {
        let q = design_lloyd_max(16).unwrap();
        assert!(q.eta > 0.0 && q.eta < 1e-8);
        assert!(q.max_residual() < 1e-10);
    }

    #[test]
    fn eta_strictly_decreasing() {
        let etas: Vec<f64> = (1..=9).map(|b| design_lloyd_max(b).unwrap().eta).collect();
        assert!(etas.windows(2).all(|w| w[1] < w[0]), "{etas:?}");
    }

    #[test]
    fn rejects_out_of_range_bits() {
        assert!(design_lloyd_max(0).is_err());
        assert!(design_lloyd_max(17).is_err());
    }

    #[test]
    fn quantize_fixed_points_and_sign() {
        let q = design_lloyd_max(3).unwrap();
        let s = 2.5;
        let r = CVec::from_vec(vec![
            Complex64::new(q.levels[2] * s, q.levels[7] * s),
            Complex64::new(-0.1, 3.0),
        ]);
        let out = quantize(&r, &q, &[s, s]).unwrap();
        assert!((out.r_q[0] - r[0]).norm() < 1e-12);
        let again = quantize(&out.r_q, &q, &[s, s]).unwrap();
        assert_eq!(again.r_q, out.r_q);

        let q1 = design_lloyd_max(1).unwrap();
        let out = quantize(&r, &q1, &[1.0, 1.0]).unwrap();
        assert!(out.r_q[1].re < 0.0 && out.r_q[1].im > 0.0);
    }

    #[test]
    fn adc_range_and_min_bits() {
        assert!((adc_dynamic_range(1) - 7.78).abs() < 1e-12);
        assert!((adc_dynamic_range(4) - 25.84).abs() < 1e-12);
        assert_eq!(min_bits_for_dr(0.0, 0.0).unwrap().bits, 1);
        assert_eq!(min_bits_for_dr(20.0, 0.0).unwrap().bits, 4);
        assert_eq!(min_bits_for_dr(19.82, 0.0).unwrap().bits, 3);
        let sat = min_bits_for_dr(120.0, 0.0).unwrap();
        assert!(sat.saturated && sat.bits == 16);
        assert!(min_bits_for_dr(10.0, -1.0).is_err());
    }

    #[test]
    fn arcsine_examples() {
        let eye = CMat::identity(3, 3);
        let out = arcsine_covariance(&eye).unwrap();
        assert!((out - CMat::identity(3, 3)).norm() < 1e-15);
        let mut r = CMat::identity(2, 2);
        r[(0, 1)] = Complex64::new(0.5, 0.0);
        r[(1, 0)] = Complex64::new(0.5, 0.0);
        let out = arcsine_covariance(&r).unwrap();
        assert!((out[(0, 1)].re - FRAC_2_PI * 0.5f64.asin()).abs() < 1e-15);
        let mut z = CMat::identity(2, 2);
        z[(1, 1)] = Complex64::new(0.0, 0.0);
        assert!(arcsine_covariance(&z).is_err());
    }

    #[test]
    fn tridiagonal_solver() {
        let lower = [0.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 0.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &[5.0, 6.0, 5.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
