//! Sensing-centric (P0) and communication-centric (P1) covariance designs and
//! the CRB-rate boundary between them.
//!
//! P0 maximizes the AoA information of one target subject to a rate floor μ;
//! P1 maximizes the uplink rate subject to a CRB cap Γ. Both run over PSD
//! covariances with trace caps. For a single target the FIM is a scalar
//! linear in the covariances, so P0's objective is linear and P1's CRB cap is
//! a linear constraint F ≥ 1/Γ; with several targets −[F⁻¹]_ii is used
//! directly as a concave function.

pub mod solver;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{HrfError, Result};
use crate::fisher::{crb, AoaFimModel, FimKind, FimResult, Parameter};
use crate::linalg::{hermitian_part, trace_re, CMat, CVec};
use crate::quantizer::{adc_dynamic_range, Quantizer};
use crate::rate::{RateModel, RateValue};
use crate::scenario::Scenario;
use solver::{solve_convex, Block, Concave, Constraint, ConvexProblem};
pub use solver::{SolveReport, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub r0: CMat,
    pub rk: Vec<CMat>,
}

impl CovariancePair {
    fn from_blocks(mut blocks: Vec<CMat>) -> Self {
        let r0 = blocks.remove(0);
        Self {
            r0: hermitian_part(&r0),
            rk: blocks.iter().map(hermitian_part).collect(),
        }
    }

    fn blocks(&self) -> Vec<CMat> {
        let mut v = vec![self.r0.clone()];
        v.extend(self.rk.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuGrid {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Rate floor μ in P0.
    Mu,
    /// CRB cap Γ in P1.
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoOptions {
    /// Target whose AoA CRB is traded against rate.
    pub target_index: usize,
    /// Drop reflected paths whose dynamic range exceeds the ADC's from the
    /// sensing FIM.
    pub mask_unresolvable: bool,
    /// Extra dB the ADC must cover beyond DR_sig.
    pub margin_db: f64,
    /// Count the DL echo as part of the rate's received covariance.
    pub rate_includes_echo: bool,
    pub mu_grid: MuGrid,
    pub sweep_mode: SweepMode,
    /// The top of the μ grid sits at rate(B)·(1 − backoff).
    pub top_backoff: f64,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        Self {
            target_index: 0,
            mask_unresolvable: true,
            margin_db: 0.0,
            rate_includes_echo: false,
            mu_grid: MuGrid::Linear,
            sweep_mode: SweepMode::Mu,
            top_backoff: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub mu_bits: Option<f64>,
    pub gamma: Option<f64>,
    /// rad²; infinite when the FIM is singular.
    pub crb: f64,
    pub rate: RateValue,
    pub covariances: CovariancePair,
    pub report: SolveReport,
    /// 1 − λ₁/tr per block (R₀ first); `None` for an all-zero block.
    pub rank1_gaps: Vec<Option<f64>>,
}

/// FIM and rate models of one scenario at one ADC resolution.
#[derive(Debug, Clone)]
pub struct TradeoffModel {
    pub fim: AoaFimModel,
    pub rate: RateModel,
    pub blocks: Vec<Block>,
    pub target_index: usize,
    /// Sensing gradients for the single-target case.
    scalar_grads: Option<Vec<CMat>>,
}

impl TradeoffModel {
    pub fn new(sc: &Scenario, q: &Quantizer, opts: &ParetoOptions) -> Result<Self> {
        sc.validate()?;
        if opts.target_index >= sc.targets.len() {
            return Err(HrfError::Lookup(format!("no target {}", opts.target_index)));
        }
        let sensing = if opts.mask_unresolvable {
            sc.resolvable_at(adc_dynamic_range(q.bits), opts.margin_db)
        } else {
            sc.clone()
        };
        let fim = AoaFimModel::new(&sensing, q.eta)?;
        let rate = RateModel::new(sc, q.bits, q.eta, opts.rate_includes_echo)?;
        let mut blocks = vec![Block {
            size: sc.num_bs_antennas,
            cap: sc.bs_max_power,
        }];
        blocks.extend(sc.users.iter().map(|u| Block {
            size: u.num_antennas,
            cap: u.max_power,
        }));
        let scalar_grads = (fim.num_targets == 1).then(|| {
            let mut g = vec![fim.bs_gradient(0, 0)];
            g.extend((0..sc.users.len()).map(|k| fim.user_gradient(k, 0, 0)));
            g
        });
        Ok(Self {
            fim,
            rate,
            blocks,
            target_index: opts.target_index,
            scalar_grads,
        })
    }

    pub fn fim(&self, pair: &CovariancePair) -> FimResult {
        FimResult {
            matrix: self.fim.evaluate(&pair.r0, &pair.rk),
            kind: FimKind::LowSnrBound,
            param_labels: (0..self.fim.num_targets)
                .map(|i| Parameter::TargetAoa(i).label())
                .collect(),
        }
    }

    /// CRB of the traded target; +∞ when the FIM is singular.
    pub fn crb(&self, pair: &CovariancePair) -> f64 {
        crb(&self.fim(pair), self.target_index)
            .map(|c| c.value)
            .unwrap_or(f64::INFINITY)
    }

    pub fn rate(&self, pair: &CovariancePair) -> RateValue {
        self.rate.value(&pair.r0, &pair.rk)
    }

    fn sensing(&self) -> Concave<'_> {
        match &self.scalar_grads {
            Some(g) => Concave::Linear {
                grads: g,
                constant: 0.0,
            },
            None => Concave::NegCrb {
                fim: &self.fim,
                index: self.target_index,
            },
        }
    }

    /// Sensing constraint equivalent to CRB ≤ Γ.
    fn crb_cap(&self, gamma: f64) -> Constraint<'_> {
        match &self.scalar_grads {
            Some(_) => Constraint {
                func: self.sensing(),
                lower: 1.0 / gamma,
            },
            None => Constraint {
                func: self.sensing(),
                lower: -gamma,
            },
        }
    }

    fn point(
        &self,
        blocks: Vec<CMat>,
        report: SolveReport,
        mu: Option<f64>,
        gamma: Option<f64>,
    ) -> ParetoPoint {
        let covariances = CovariancePair::from_blocks(blocks);
        let rank1_gaps = covariances
            .blocks()
            .iter()
            .map(|r| extract_rank1(r).1)
            .collect();
        ParetoPoint {
            mu_bits: mu,
            gamma,
            crb: self.crb(&covariances),
            rate: self.rate(&covariances),
            covariances,
            report,
            rank1_gaps,
        }
    }

    /// P0: minimize the CRB subject to rate ≥ μ.
    pub fn solve_p0(&self, mu: f64, hint: Option<&CovariancePair>) -> Result<ParetoPoint> {
        if !(mu >= 0.0) {
            return Err(HrfError::domain(format!("μ must be non-negative, got {mu}")));
        }
        let constraints = if mu > 0.0 {
            vec![Constraint {
                func: Concave::Rate(&self.rate),
                lower: mu,
            }]
        } else {
            vec![]
        };
        let problem = ConvexProblem {
            blocks: self.blocks.clone(),
            objective: self.sensing(),
            constraints,
        };
        let hint_blocks = hint.map(CovariancePair::blocks);
        let (report, blocks) = solve_convex(&problem, hint_blocks.as_deref());
        let point = self.point(blocks, report, Some(mu), None);
        if point.report.status != SolveStatus::Infeasible && !point.crb.is_finite() {
            return Err(HrfError::Unidentifiable {
                condition: f64::INFINITY,
            });
        }
        Ok(point)
    }

    /// P1: maximize the rate subject to CRB ≤ Γ; Γ = 0 or ∞ drops the cap.
    pub fn solve_p1(&self, gamma: f64, hint: Option<&CovariancePair>) -> Result<ParetoPoint> {
        if !(gamma >= 0.0) {
            return Err(HrfError::domain(format!("Γ must be non-negative, got {gamma}")));
        }
        let active = gamma > 0.0 && gamma.is_finite();
        let problem = ConvexProblem {
            blocks: self.blocks.clone(),
            objective: Concave::Rate(&self.rate),
            constraints: if active { vec![self.crb_cap(gamma)] } else { vec![] },
        };
        let hint_blocks = hint.map(CovariancePair::blocks);
        let (report, blocks) = solve_convex(&problem, hint_blocks.as_deref());
        Ok(self.point(blocks, report, None, Some(gamma)))
    }

    /// Boundary between the sensing-optimal and rate-optimal endpoints.
    pub fn boundary(&self, n_points: usize, opts: &ParetoOptions) -> Result<Vec<ParetoPoint>> {
        if n_points < 2 {
            return Err(HrfError::domain("a boundary sweep needs at least 2 points"));
        }
        let a = self.solve_p0(0.0, None)?;
        let b = self.solve_p1(0.0, None)?;
        let lo = a.rate.mi_bits_per_symbol;
        let hi = b.rate.mi_bits_per_symbol * (1.0 - opts.top_backoff);
        let mut points: Vec<ParetoPoint> = match opts.sweep_mode {
            SweepMode::Mu => {
                let grid = mu_grid(lo, hi.max(lo), n_points, opts.mu_grid);
                grid.par_iter()
                    .map(|&mu| self.solve_p0(mu, Some(&b.covariances)))
                    .collect::<Result<Vec<_>>>()?
            }
            SweepMode::Gamma => {
                let top = self.solve_p0(hi.max(lo), Some(&b.covariances))?;
                let grid = mu_grid(a.crb, top.crb.max(a.crb), n_points, opts.mu_grid);
                grid.par_iter()
                    .map(|&g| self.solve_p1(g, Some(&a.covariances)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        points.sort_by(|p, q| {
            p.rate
                .mi_bits_per_symbol
                .total_cmp(&q.rate.mi_bits_per_symbol)
                .then(p.crb.total_cmp(&q.crb))
        });
        Ok(points)
    }
}

/// `n` values from `lo` to `hi`, linear or geometric.
pub fn mu_grid(lo: f64, hi: f64, n: usize, kind: MuGrid) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let last = (n - 1) as f64;
    match kind {
        MuGrid::Linear => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / last })
            .collect(),
        MuGrid::Log => {
            // A zero lower end starts the geometric grid three decades down.
            let start = if lo > 0.0 { lo } else { hi * 1e-3 };
            let mut g: Vec<f64> = (0..n)
                .map(|i| start * (hi / start).powf(i as f64 / last))
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

/// Sensing-centric endpoint: minimum CRB subject to rate ≥ μ.
pub fn solve_p0(sc: &Scenario, q: &Quantizer, mu: f64) -> Result<ParetoPoint> {
    TradeoffModel::new(sc, q, &ParetoOptions::default())?.solve_p0(mu, None)
}

/// Communication-centric design: maximum rate subject to CRB ≤ Γ.
pub fn solve_p1(sc: &Scenario, q: &Quantizer, gamma: f64) -> Result<ParetoPoint> {
    TradeoffModel::new(sc, q, &ParetoOptions::default())?.solve_p1(gamma, None)
}

/// μ-sweep of P0 between the two endpoints with default options.
pub fn boundary_sweep(sc: &Scenario, q: &Quantizer, n_points: usize) -> Result<Vec<ParetoPoint>> {
    let opts = ParetoOptions::default();
    TradeoffModel::new(sc, q, &opts)?.boundary(n_points, &opts)
}

/// f = √tr(R)·u₁ with the rank-1 gap 1 − λ₁/tr(R); the gap is `None` for R = 0.
pub fn extract_rank1(r: &CMat) -> (CVec, Option<f64>) {
    let n = r.nrows();
    let h = hermitian_part(r);
    let tr = trace_re(&h);
    if !(tr > 0.0) {
        return (CVec::zeros(n), None);
    }
    let eig = h.symmetric_eigen();
    let (idx, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let u = eig.eigenvectors.column(idx).into_owned();
    // Fix the global phase: first non-negligible entry real positive.
    let pivot = u.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    let f = u * phase * Complex64::new(tr.sqrt(), 0.0);
    (f, Some((1.0 - lam / tr).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank1_examples() {
        let f = CVec::from_vec(vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0)]);
        let r = &f * f.adjoint();
        let (g, gap) = extract_rank1(&r);
        assert!(gap.unwrap() < 1e-12);
        let rr = &g * g.adjoint();
        assert!((rr - r).norm() < 1e-12);
        let (_, gap) = extract_rank1(&CMat::identity(2, 2));
        assert!((gap.unwrap() - 0.5).abs() < 1e-12);
        let (z, gap) = extract_rank1(&CMat::zeros(3, 3));
        assert!(gap.is_none() && z.norm() == 0.0);
    }

    #[test]
    fn grids() {
        assert_eq!(mu_grid(1.0, 3.0, 3, MuGrid::Linear), vec![1.0, 2.0, 3.0]);
        let g = mu_grid(1.0, 100.0, 3, MuGrid::Log);
        assert!((g[1] - 10.0).abs() < 1e-12);
        let g = mu_grid(0.0, 1.0, 4, MuGrid::Log);
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
