//! Small dense complex linear-algebra helpers shared by the model and the solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// `exp(j·phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re tr(A·B) without forming the product.
pub fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(h)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(h: &CMat) -> f64 {
    hermitian_eigenvalues(h).first().copied().unwrap_or(0.0)
}

/// Hermitian to `tol` (Frobenius, relative) and min eigenvalue ≥ −tol·max(1, tr).
pub fn is_hermitian_psd(h: &CMat, tol: f64) -> bool {
    if !h.is_square() {
        return false;
    }
    let scale = h.norm().max(1e-300);
    if (h - h.adjoint()).norm() > tol * scale {
        return false;
    }
    min_eigenvalue(h) >= -tol * trace_re(h).abs().max(1.0)
}

/// log det of a Hermitian positive-definite matrix; `None` if not PD.
/// Cholesky factor of the Hermitian part, or `None` unless it is strictly
/// positive definite. nalgebra takes complex square roots of negative pivots
/// instead of failing, so every pivot must come out real and positive.
pub fn cholesky_hpd(h: &CMat) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = hermitian_part(h).cholesky()?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-10 * d.re {
            return None;
        }
    }
    Some(chol)
}

pub fn logdet_hpd(h: &CMat) -> Option<f64> {
    let chol = cholesky_hpd(h)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += 2.0 * d.ln();
    }
    Some(acc)
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of n×n Hermitian matrices under ⟨A,B⟩ = Re tr(AB).
///
/// Coordinates are ordered: the n diagonal entries, then for each i<j the
/// symmetric real part and the antisymmetric imaginary part.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    elems: Vec<CMat>,
}

impl HermitianBasis {
    pub fn new(n: usize) -> Self {
        let mut elems = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(i, i)] = Complex64::new(1.0, 0.0);
            elems.push(e);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut re = CMat::zeros(n, n);
                re[(i, j)] = Complex64::new(s, 0.0);
                re[(j, i)] = Complex64::new(s, 0.0);
                elems.push(re);
                let mut im = CMat::zeros(n, n);
                im[(i, j)] = Complex64::new(0.0, s);
                im[(j, i)] = Complex64::new(0.0, -s);
                elems.push(im);
            }
        }
        Self { n, elems }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elems.len()
    }

    pub fn elem(&self, p: usize) -> &CMat {
        &self.elems[p]
    }

    pub fn elems(&self) -> &[CMat] {
        &self.elems
    }

    /// Coordinates of a Hermitian matrix (or of the Hermitian part of any matrix).
    pub fn coords(&self, m: &CMat) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..n {
            out.push(m[(i, i)].re);
        }
        let s = std::f64::consts::SQRT_2;
        for i in 0..n {
            for j in (i + 1)..n {
                // Re tr(E m) for the two off-diagonal elements
                let h = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out.push(s * h.re);
                out.push(s * h.im);
            }
        }
        out
    }

    pub fn matrix(&self, coords: &[f64]) -> CMat {
        let n = self.n;
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(coords[i], 0.0);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut p = n;
        for i in 0..n {
            for j in (i + 1)..n {
                let z = Complex64::new(s * coords[p], s * coords[p + 1]);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                p += 2;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_rejects_indefinite_complex_matrix() {
        // Negative pivots come back from nalgebra as nearly imaginary roots.
        let mut m = CMat::from_diagonal_element(3, 3, Complex64::new(1.0, 0.0));
        m[(1, 2)] = Complex64::new(0.3, 2.0);
        m[(2, 1)] = m[(1, 2)].conj();
        assert!(min_eigenvalue(&m) < 0.0);
        assert!(cholesky_hpd(&m).is_none());
        assert!(logdet_hpd(&m).is_none());
        m[(1, 2)] = Complex64::new(0.3, 0.2);
        m[(2, 1)] = m[(1, 2)].conj();
        assert!(cholesky_hpd(&m).is_some());
    }

    #[test]
    fn basis_is_orthonormal_and_round_trips() {
        let b = HermitianBasis::new(3);
        assert_eq!(b.dim(), 9);
        for p in 0..b.dim() {
            for q in 0..b.dim() {
                let ip = trace_prod_re(b.elem(p), b.elem(q));
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-14, "p={p} q={q} ip={ip}");
            }
            let c = b.coords(b.elem(p));
            for (q, v) in c.iter().enumerate() {
                assert!((v - if p == q { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = b.matrix(&x);
        let back = b.coords(&m);
        for (a, c) in x.iter().zip(&back) {
            assert!((a - c).abs() < 1e-14);
        }
        // coordinates reproduce the trace inner product
        let g = b.matrix(&[0.3, -1.0, 2.0, 0.1, 0.2, -0.4, 0.5, 0.9, -0.7]);
        let dot: f64 = b.coords(&g).iter().zip(&x).map(|(u, v)| u * v).sum();
        assert!((dot - trace_prod_re(&g, &m)).abs() < 1e-12);
    }

    #[test]
    fn logdet_and_rank() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        assert!((logdet_hpd(&m).unwrap() - 6f64.ln()).abs() < 1e-14);
        let v = CVec::from_vec(vec![Complex64::new(1.0, 1.0), Complex64::new(0.5, -2.0)]);
        let r1 = &v * v.adjoint();
        assert_eq!(numerical_rank(&r1, 1e-10), 1);
        assert!(logdet_hpd(&r1).is_none() || logdet_hpd(&r1).unwrap() < -20.0);
    }
}
