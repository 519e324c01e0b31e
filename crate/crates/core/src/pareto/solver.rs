//! Log-barrier interior-point method for concave maximization over a product
//! of trace-capped Hermitian PSD blocks.
//!
//! Each block R_b is parametrized by its coordinates in an orthonormal
//! Hermitian basis, so Newton steps run in real coordinates. Barriers:
//! −log det R_b, −log(cap_b − tr R_b) and −log(f_i(R) − lower_i) for the
//! concave constraint functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fisher::AoaFimModel;
use crate::linalg::{trace_prod_re, CMat, HermitianBasis};
use crate::rate::{RateKind, RateModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub size: usize,
    /// Trace cap; blocks with cap ≤ 0 are pinned at zero.
    pub cap: f64,
}

/// Concave function of the block matrices. Block 0 is the BS covariance and
/// block k ≥ 1 the covariance of user k − 1.
#[derive(Debug, Clone, Copy)]
pub enum Concave<'a> {
    /// Σ_b Re tr(R_b C_b) + constant, with Hermitian C_b.
    Linear { grads: &'a [CMat], constant: f64 },
    /// Uplink MI in bits.
    Rate(&'a RateModel),
    /// −[F(R)⁻¹]_ii for the linear AoA FIM model.
    NegCrb { fim: &'a AoaFimModel, index: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct Constraint<'a> {
    pub func: Concave<'a>,
    pub lower: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexProblem<'a> {
    pub blocks: Vec<Block>,
    /// Maximized.
    pub objective: Concave<'a>,
    pub constraints: Vec<Constraint<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Objective at the returned iterate, in the objective's own units.
    pub objective: f64,
    /// max(0, lower − f_i, tr − cap, −λ_min) over all constraints.
    pub constraint_violation: f64,
    pub iterations: usize,
    /// Barrier certificate m/t relative to |objective|.
    pub gap: f64,
    pub status: SolveStatus,
    /// Largest value reached by the first unsatisfiable constraint function.
    pub max_constraint_hint: Option<f64>,
}

pub const MAX_NEWTON: usize = 500;
const GAP_TOL: f64 = 1e-9;
const T_GROWTH: f64 = 20.0;

struct Layout {
    bases: Vec<Option<HermitianBasis>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl Layout {
    fn new(blocks: &[Block]) -> Self {
        let mut bases = Vec::new();
        let mut offsets = Vec::new();
        let mut dim = 0;
        for b in blocks {
            offsets.push(dim);
            if b.cap > 0.0 && b.size > 0 {
                let basis = HermitianBasis::new(b.size);
                dim += basis.dim();
                bases.push(Some(basis));
            } else {
                bases.push(None);
            }
        }
        Self { bases, offsets, dim }
    }

    fn matrices(&self, blocks: &[Block], x: &[f64]) -> Vec<CMat> {
        blocks
            .iter()
            .zip(&self.bases)
            .zip(&self.offsets)
            .map(|((b, basis), &o)| match basis {
                Some(h) => h.matrix(&x[o..o + h.dim()]),
                None => CMat::zeros(b.size, b.size),
            })
            .collect()
    }

    fn coords(&self, mats: &[CMat]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for ((basis, &o), m) in self.bases.iter().zip(&self.offsets).zip(mats) {
            if let Some(h) = basis {
                x[o..o + h.dim()].copy_from_slice(&h.coords(m));
            }
        }
        x
    }

    /// Gradient vector of R ↦ Σ_b Re tr(R_b C_b).
    fn linear_grad(&self, grads: &[CMat]) -> Vec<f64> {
        self.coords(grads)
    }

    /// (block, basis element) for every coordinate.
    fn elements(&self) -> Vec<(usize, &CMat)> {
        let mut out = Vec::with_capacity(self.dim);
        for (b, basis) in self.bases.iter().enumerate() {
            if let Some(h) = basis {
                for e in h.elems() {
                    out.push((b, e));
                }
            }
        }
        out
    }
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Option<DMatrix<f64>>,
}

/// Precomputed derivative data of a concave function.
enum Prepared<'a> {
    Linear {
        grad: Vec<f64>,
        constant: f64,
    },
    LinearRate {
        grad: Vec<f64>,
    },
    LogDetRate {
        model: &'a RateModel,
        /// L_idx(E_p) for every symbol index and coordinate.
        images: Vec<Vec<CMat>>,
    },
    NegCrb {
        /// dF/dx_p
        slopes: Vec<DMatrix<f64>>,
        index: usize,
    },
}

fn block_map(model: &RateModel, idx: usize, block: usize) -> Option<&crate::rate::CovarianceMap> {
    let (echo, users) = &model.covariance.per_symbol[idx];
    if block == 0 {
        echo.as_ref()
    } else {
        users.get(block - 1)
    }
}

impl<'a> Prepared<'a> {
    fn new(f: Concave<'a>, layout: &Layout, blocks: &[Block]) -> Self {
        match f {
            Concave::Linear { grads, constant } => Prepared::Linear {
                grad: layout.linear_grad(grads),
                constant,
            },
            Concave::Rate(model) => {
                let nsym = model.num_symbols();
                match model.kind {
                    RateKind::OneBitApprox => {
                        // tr Σ G R Gᴴ = Re tr(R Σ GᴴG)
                        let grads: Vec<CMat> = blocks
                            .iter()
                            .enumerate()
                            .map(|(b, blk)| {
                                let mut c = CMat::zeros(blk.size, blk.size);
                                for idx in 0..nsym {
                                    if let Some(map) = block_map(model, idx, b) {
                                        for g in &map.factors {
                                            c += g.adjoint() * g;
                                        }
                                    }
                                }
                                c * Complex64::new(model.coefficient / nsym as f64, 0.0)
                            })
                            .collect();
                        Prepared::LinearRate {
                            grad: layout.linear_grad(&grads),
                        }
                    }
                    RateKind::LowerBound => {
                        let n = model.covariance.num_bs_antennas;
                        let images = (0..nsym)
                            .map(|idx| {
                                layout
                                    .elements()
                                    .into_iter()
                                    .map(|(b, e)| match block_map(model, idx, b) {
                                        Some(map) => map.apply(e),
                                        None => CMat::zeros(n, n),
                                    })
                                    .collect()
                            })
                            .collect();
                        Prepared::LogDetRate { model, images }
                    }
                }
            }
            Concave::NegCrb { fim, index } => {
                let p = fim.num_targets;
                let slopes = layout
                    .elements()
                    .into_iter()
                    .map(|(b, e)| {
                        DMatrix::from_fn(p, p, |i, j| {
                            let c = if b == 0 {
                                fim.bs_gradient(i, j)
                            } else {
                                fim.user_gradient(b - 1, i, j)
                            };
                            trace_prod_re(e, &c)
                        })
                    })
                    .collect();
                Prepared::NegCrb { slopes, index }
            }
        }
    }

    /// `None` outside the function's domain.
    fn eval(&self, x: &[f64], mats: &[CMat], want_hess: bool) -> Option<Eval> {
        let dim = x.len();
        match self {
            Prepared::Linear { grad, constant } => Some(Eval {
                value: dot(grad, x) + constant,
                grad: grad.clone(),
                hess: want_hess.then(|| DMatrix::zeros(dim, dim)),
            }),
            Prepared::LinearRate { grad } => Some(Eval {
                value: dot(grad, x),
                grad: grad.clone(),
                hess: want_hess.then(|| DMatrix::zeros(dim, dim)),
            }),
            Prepared::LogDetRate { model, images } => {
                let nsym = images.len();
                let c = model.coefficient;
                let scale = 1.0 / (nsym as f64 * std::f64::consts::LN_2);
                let mut value = 0.0;
                let mut grad = vec![0.0; dim];
                let mut hess = want_hess.then(|| DMatrix::zeros(dim, dim));
                for (idx, imgs) in images.iter().enumerate() {
                    let rxx = model.covariance.covariance(idx, &mats[0], &mats[1..]);
                    let n = rxx.nrows();
                    let s = CMat::identity(n, n) + rxx * Complex64::new(c, 0.0);
                    let chol = crate::linalg::cholesky_hpd(&s)?;
                    let l = chol.l_dirty();
                    let mut ld = 0.0;
                    for i in 0..n {
                        let d = l[(i, i)].re;
                        if !(d > 0.0) {
                            return None;
                        }
                        ld += 2.0 * d.ln();
                    }
                    value += ld * scale;
                    let sinv = chol.inverse();
                    let m: Vec<CMat> = imgs.iter().map(|img| &sinv * img).collect();
                    for p in 0..dim {
                        grad[p] += c * scale * trace_re_c(&m[p]);
                    }
                    if let Some(h) = hess.as_mut() {
                        for p in 0..dim {
                            for q in p..dim {
                                let v = -c * c * scale * trace_prod_re(&m[p], &m[q]);
                                h[(p, q)] += v;
                                if q != p {
                                    h[(q, p)] += v;
                                }
                            }
                        }
                    }
                }
                Some(Eval { value, grad, hess })
            }
            Prepared::NegCrb { slopes, index } => {
                let p = slopes.first().map(|s| s.nrows()).unwrap_or(0);
                let mut f = DMatrix::zeros(p, p);
                for (s, xi) in slopes.iter().zip(x) {
                    f += s * *xi;
                }
                let chol = f.cholesky()?;
                let mut e = DVector::zeros(p);
                e[*index] = 1.0;
                let z = chol.solve(&e);
                let value = -z[*index];
                let u: Vec<DVector<f64>> = slopes.iter().map(|s| s * &z).collect();
                let grad: Vec<f64> = u.iter().map(|ui| z.dot(ui)).collect();
                let hess = want_hess.then(|| {
                    let w: Vec<DVector<f64>> = u.iter().map(|ui| chol.solve(ui)).collect();
                    DMatrix::from_fn(dim, dim, |a, b| -2.0 * u[a].dot(&w[b]))
                });
                Some(Eval { value, grad, hess })
            }
        }
    }
}

fn trace_re_c(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Barrier<'p> {
    blocks: &'p [Block],
    layout: &'p Layout,
    objective: &'p Prepared<'p>,
    constraints: Vec<(&'p Prepared<'p>, f64)>,
    /// Objective normalization.
    scale: f64,
}

struct BarrierEval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    objective: f64,
}

impl<'p> Barrier<'p> {
    fn degree(&self) -> f64 {
        let mut m = 0.0;
        for (b, basis) in self.blocks.iter().zip(&self.layout.bases) {
            if basis.is_some() {
                m += b.size as f64 + 1.0;
            }
        }
        m + self.constraints.len() as f64
    }

    /// t·(−f₀/scale) + barrier terms; `None` outside the open domain.
    fn eval(&self, x: &[f64], t: f64, want_hess: bool) -> Option<BarrierEval> {
        let dim = x.len();
        let mats = self.layout.matrices(self.blocks, x);
        let mut value = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(if want_hess { dim } else { 0 }, if want_hess { dim } else { 0 });

        for (bi, ((b, basis), &o)) in self
            .blocks
            .iter()
            .zip(&self.layout.bases)
            .zip(&self.layout.offsets)
            .enumerate()
        {
            let Some(h) = basis else { continue };
            let r = &mats[bi];
            let chol = crate::linalg::cholesky_hpd(r)?;
            let l = chol.l_dirty();
            let mut ld = 0.0;
            for i in 0..b.size {
                let d = l[(i, i)].re;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                ld += 2.0 * d.ln();
            }
            let slack = b.cap - (0..b.size).map(|i| r[(i, i)].re).sum::<f64>();
            if !(slack > 0.0) {
                return None;
            }
            value += -ld - slack.ln();
            let rinv = chol.inverse();
            let g = h.coords(&rinv);
            let k = h.dim();
            for p in 0..k {
                grad[o + p] -= g[p];
                if p < b.size {
                    grad[o + p] += 1.0 / slack;
                }
            }
            if want_hess {
                let m: Vec<CMat> = h.elems().iter().map(|e| &rinv * e).collect();
                for p in 0..k {
                    for q in p..k {
                        let mut v = trace_prod_re(&m[p], &m[q]);
                        if p < b.size && q < b.size {
                            v += 1.0 / (slack * slack);
                        }
                        hess[(o + p, o + q)] += v;
                        if q != p {
                            hess[(o + q, o + p)] += v;
                        }
                    }
                }
            }
        }

        for (c, lower) in &self.constraints {
            let e = c.eval(x, &mats, want_hess)?;
            let s = e.value - lower;
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            value -= s.ln();
            for p in 0..dim {
                grad[p] -= e.grad[p] / s;
            }
            if want_hess {
                let ch = e.hess.as_ref().expect("hessian requested");
                for p in 0..dim {
                    for q in 0..dim {
                        hess[(p, q)] += e.grad[p] * e.grad[q] / (s * s) - ch[(p, q)] / s;
                    }
                }
            }
        }

        let e = self.objective.eval(x, &mats, want_hess)?;
        if !e.value.is_finite() {
            return None;
        }
        let w = t / self.scale;
        value -= w * e.value;
        for p in 0..dim {
            grad[p] -= w * e.grad[p];
        }
        if want_hess {
            hess -= e.hess.as_ref().expect("hessian requested") * w;
        }
        Some(BarrierEval {
            value,
            grad,
            hess,
            objective: e.value,
        })
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let neg = -grad;
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(&neg));
    }
    let scale = hess.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
    let mut reg = 1e-12 * scale;
    for _ in 0..20 {
        let h = hess + DMatrix::identity(hess.nrows(), hess.ncols()) * reg;
        if let Some(ch) = h.cholesky() {
            return Some(ch.solve(&neg));
        }
        reg *= 100.0;
    }
    None
}

struct Outcome {
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    gap: f64,
    status: SolveStatus,
}

/// Barrier path-following from a strictly feasible `x0`. When `stop_above`
/// is set, returns as soon as the objective exceeds it.
fn path_follow(bar: &Barrier, x0: Vec<f64>, budget: usize, stop_above: Option<f64>) -> Outcome {
    let m = bar.degree();
    let mut x = x0;
    let mut t = 1.0;
    let mut iterations = 0;
    let mut objective = bar
        .eval(&x, t, false)
        .map(|e| e.objective)
        .unwrap_or(f64::NAN);
    loop {
        // Centering.
        loop {
            if iterations >= budget {
                return Outcome {
                    x,
                    objective,
                    iterations,
                    gap: relative_gap(m, t, bar.scale, objective),
                    status: SolveStatus::MaxIter,
                };
            }
            let Some(e) = bar.eval(&x, t, true) else { break };
            objective = e.objective;
            let Some(dx) = newton_direction(&e.hess, &e.grad) else { break };
                        let decrement = -e.grad.dot(&dx);
            // Past the rounding floor of the barrier value no step can be verified.
            if decrement / 2.0 <= 1e-8f64.max(1e-13 * e.value.abs()) {
                break;
            }
            iterations += 1;
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(te) = bar.eval(&trial, t, false) {
                    if te.value < e.value && te.value <= e.value - 0.25 * step * decrement {
                        x = trial;
                        objective = te.objective;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if let Some(target) = stop_above {
                if objective > target {
                    return Outcome {
                        x,
                        objective,
                        iterations,
                        gap: f64::NAN,
                        status: SolveStatus::Optimal,
                    };
                }
            }
            if !moved {
                break;
            }
        }
        let gap = relative_gap(m, t, bar.scale, objective);
        if gap <= GAP_TOL {
            return Outcome {
                x,
                objective,
                iterations,
                gap,
                status: SolveStatus::Optimal,
            };
        }
        t *= T_GROWTH;
    }
}

fn blend(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect()
}

/// Solves `problem`, optionally starting near `hint` (one matrix per block).
///
/// Returns the report and the block matrices of the final iterate.
pub fn solve_convex(problem: &ConvexProblem, hint: Option<&[CMat]>) -> (SolveReport, Vec<CMat>) {
    let blocks = &problem.blocks;
    let layout = Layout::new(blocks);
    let objective = Prepared::new(problem.objective, &layout, blocks);
    let constraints: Vec<Prepared> = problem
        .constraints
        .iter()
        .map(|c| Prepared::new(c.func, &layout, blocks))
        .collect();
    let lowers: Vec<f64> = problem.constraints.iter().map(|c| c.lower).collect();

    let center_mats: Vec<CMat> = blocks
        .iter()
        .map(|b| {
            if b.cap > 0.0 {
                CMat::identity(b.size, b.size) * Complex64::new(b.cap / (2.0 * b.size as f64), 0.0)
            } else {
                CMat::zeros(b.size, b.size)
            }
        })
        .collect();
    let center = layout.coords(&center_mats);

    let satisfied = |x: &[f64], which: &[usize]| -> bool {
        let mats = layout.matrices(blocks, x);
        which.iter().all(|&i| {
            constraints[i]
                .eval(x, &mats, false)
                .is_some_and(|e| e.value > lowers[i])
        })
    };
    let all: Vec<usize> = (0..constraints.len()).collect();

    let finish = |x: Vec<f64>, status: SolveStatus, iterations: usize, gap: f64, hint_val: Option<f64>| {
        let mats = layout.matrices(blocks, &x);
        let obj = objective
            .eval(&x, &mats, false)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        let mut viol: f64 = 0.0;
        for (c, &lo) in constraints.iter().zip(&lowers) {
            match c.eval(&x, &mats, false) {
                Some(e) => viol = viol.max(lo - e.value),
                None => viol = f64::INFINITY,
            }
        }
        for (b, r) in blocks.iter().zip(&mats) {
            let tr: f64 = (0..b.size).map(|i| r[(i, i)].re).sum();
            viol = viol.max(tr - b.cap.max(0.0));
            if b.size > 0 {
                viol = viol.max(-crate::linalg::min_eigenvalue(r));
            }
        }
        (
            SolveReport {
                objective: obj,
                constraint_violation: viol.max(0.0),
                iterations,
                gap,
                status,
                max_constraint_hint: hint_val,
            },
            mats,
        )
    };

    // Start point: center, else a blend towards the hint, else phase I.
    let mut x0 = center.clone();
    let mut iterations = 0;
    if !satisfied(&x0, &all) {
        let mut found = false;
        if let Some(h) = hint {
            let hx = layout.coords(h);
            for theta in [0.5, 0.2, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8] {
                let trial = blend(&hx, &center, theta);
                if satisfied(&trial, &all) {
                    x0 = trial;
                    found = true;
                    break;
                }
            }
        }
        if !found {
            for i in 0..constraints.len() {
                if satisfied(&x0, &[i]) {
                    continue;
                }
                let kept: Vec<(&Prepared, f64)> = (0..i)
                    .filter(|j| satisfied(&x0, &[*j]))
                    .map(|j| (&constraints[j], lowers[j]))
                    .collect();
                let start_scale = scale_at(&constraints[i], &layout, blocks, &x0, lowers[i]);
                let bar = Barrier {
                    blocks,
                    layout: &layout,
                    objective: &constraints[i],
                    constraints: kept,
                    scale: start_scale,
                };
                let out = path_follow(&bar, x0.clone(), MAX_NEWTON - iterations, Some(lowers[i]));
                iterations += out.iterations;
                x0 = out.x;
                if !(out.objective > lowers[i]) {
                    let status = if out.status == SolveStatus::MaxIter {
                        SolveStatus::MaxIter
                    } else {
                        SolveStatus::Infeasible
                    };
                    return finish(x0, status, iterations, f64::NAN, Some(out.objective));
                }
            }
        }
    }

    if layout.dim == 0 {
        return finish(x0, SolveStatus::Optimal, 0, 0.0, None);
    }
    let bar = Barrier {
        blocks,
        layout: &layout,
        objective: &objective,
        constraints: constraints.iter().zip(&lowers).map(|(c, &l)| (c, l)).collect(),
        scale: scale_at(&objective, &layout, blocks, &x0, 0.0),
    };
    let out = path_follow(&bar, x0, MAX_NEWTON - iterations, None);
    finish(out.x, out.status, iterations + out.iterations, out.gap, None)
}

/// Magnitude of `f` around `x`: the larger of |f(x)|, |reference| and the
/// first-order variation ‖∇f‖·‖x‖. A value alone can vanish by cancellation
/// at the starting point.
fn scale_at(f: &Prepared, layout: &Layout, blocks: &[Block], x: &[f64], reference: f64) -> f64 {
    let (value, slope) = match f.eval(x, &layout.matrices(blocks, x), false) {
        Some(e) => (e.value, dot(&e.grad, &e.grad).sqrt() * dot(x, x).sqrt()),
        None => (f64::NAN, f64::NAN),
    };
    let s = value.abs().max(reference.abs()).max(slope);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Duality-gap bound m/t in objective units, relative to max(|f|, scale).
fn relative_gap(m: f64, t: f64, scale: f64, objective: f64) -> f64 {
    m * scale / (t * objective.abs().max(scale))
}
