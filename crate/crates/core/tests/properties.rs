//! Invariants that must hold for every input, checked with proptest.

use hrf_core::fisher::{crb, fim_lower_bound_aoa, FimKind, FimResult};
use hrf_core::linalg::{is_hermitian_psd, min_eigenvalue, numerical_rank, trace_re, CMat, CVec};
use hrf_core::pareto::solver::{solve_convex, Block, Concave, ConvexProblem};
use hrf_core::quantizer::{design_lloyd_max, min_bits_for_dr, quantize};
use hrf_core::rate::{mi_lower_bound, signal_covariance};
use hrf_core::scenario::{default_scenario, dynamic_range_sig, Scenario};
use hrf_core::signal_model::{channel_echo, channel_reflected, noiseless_sample, steering_vector, Precoders, Symbols};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn cvec(values: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(values.len(), values.iter().map(|&(re, im)| Complex64::new(re, im)))
}

/// A·Aᴴ from n² complex entries.
fn psd(n: usize, values: &[(f64, f64)]) -> CMat {
    let a = CMat::from_iterator(n, n, values.iter().map(|&(re, im)| Complex64::new(re, im)));
    &a * a.adjoint()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

fn scenario_at(aoa: f64, range: f64) -> Scenario {
    let mut sc = default_scenario();
    sc.ofdm.num_symbols = 2;
    sc.ofdm.samples_per_symbol = 8;
    sc.ofdm.dl_subcarriers = vec![0, 1, 2];
    sc.ofdm.ul_subcarriers_per_user = vec![vec![3, 4]];
    sc.move_target(0, range, aoa).unwrap();
    sc
}

proptest! {
    #[test]
    fn steering_entries_are_unit_phasors(theta in -1.5..1.5f64, n in 1usize..16, d in 0.05..1.0f64) {
        let a = steering_vector(theta, n, d).entries;
        prop_assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for z in a.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dynamic_range_is_antisymmetric_and_scale_free(a in 1e-12..1e3f64, b in 1e-12..1e3f64, s in 1e-6..1e6f64) {
        let ab = dynamic_range_sig(a, b).unwrap();
        prop_assert!((ab + dynamic_range_sig(b, a).unwrap()).abs() < 1e-9);
        prop_assert!((ab - dynamic_range_sig(s * a, s * b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn min_bits_never_drops_as_range_grows(d1 in -10.0..120.0f64, d2 in -10.0..120.0f64, margin in 0.0..10.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(min_bits_for_dr(lo, margin).unwrap().bits <= min_bits_for_dr(hi, margin).unwrap().bits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantized_samples_lie_on_scaled_levels_and_requantize_to_themselves(
        bits in 1u32..5,
        values in entries(6),
        scales in prop::collection::vec(0.1..3.0f64, 6),
    ) {
        let q = design_lloyd_max(bits).unwrap();
        let r = cvec(&values) * Complex64::new(4.0, 0.0);
        let out = quantize(&r, &q, &scales).unwrap();
        for (z, &s) in out.r_q.iter().zip(&scales) {
            for part in [z.re, z.im] {
                prop_assert!(q.levels.iter().any(|&y| (s * y - part).abs() <= 1e-12 * s));
            }
        }
        let again = quantize(&out.r_q, &q, &scales).unwrap();
        prop_assert!((&again.r_q - &out.r_q).norm() <= 1e-12);
    }

    #[test]
    fn channels_are_rank_one(aoa in -1.2..1.2f64, range in 20.0..200.0f64, m in 0i32..3, v in 0usize..8) {
        let sc = scenario_at(aoa, range);
        let echo = channel_echo(&sc, 0, 1, m, v).unwrap().entries;
        let refl = channel_reflected(&sc, 0, 0, 1, m + 3, v).unwrap().entries;
        prop_assert_eq!(numerical_rank(&echo, 1e-10), 1);
        prop_assert_eq!(numerical_rank(&refl, 1e-10), 1);
    }

    #[test]
    fn samples_are_linear_in_the_precoders(
        f1 in entries(12), f2 in entries(12), alpha in -2.0..2.0f64, beta in -2.0..2.0f64, l in 0usize..2, v in 0usize..8,
    ) {
        let sc = scenario_at(0.3, 80.0);
        let sym = Symbols::qpsk(&sc.ofdm, 9);
        let make = |f: &[(f64, f64)]| Precoders { bs: cvec(&f[..8]), users: vec![cvec(&f[8..])] };
        let (p1, p2) = (make(&f1), make(&f2));
        let mix = Precoders {
            bs: &p1.bs * Complex64::new(alpha, 0.0) + &p2.bs * Complex64::new(beta, 0.0),
            users: vec![&p1.users[0] * Complex64::new(alpha, 0.0) + &p2.users[0] * Complex64::new(beta, 0.0)],
        };
        let x = |p: &Precoders| noiseless_sample(&sc, p, &sym, l, v).unwrap().x;
        let want = x(&p1) * Complex64::new(alpha, 0.0) + x(&p2) * Complex64::new(beta, 0.0);
        prop_assert!((x(&mix) - &want).norm() <= 1e-9 * want.norm().max(1e-12));
    }

    #[test]
    fn aoa_bound_is_symmetric_psd_linear_and_monotone(
        a0 in entries(64), a1 in entries(16), d0 in entries(64), scale in 0.1..10.0f64, aoa in -1.0..1.0f64,
    ) {
        let mut sc = scenario_at(aoa, 90.0);
        let mut t2 = sc.targets[0].clone();
        t2.aoa_rad = (aoa + 0.4).clamp(-1.4, 1.4);
        sc.targets.push(t2);
        let (r0, r1) = (psd(8, &a0), psd(4, &a1));
        let f = fim_lower_bound_aoa(&r0, std::slice::from_ref(&r1), &sc, 0.1).unwrap().matrix;
        prop_assert!((&f - f.transpose()).norm() <= 1e-10 * f.norm().max(1e-300));
        let fc = f.map(|x| Complex64::new(x, 0.0));
        prop_assert!(min_eigenvalue(&fc) >= -1e-9 * f.trace().abs());

        let s = Complex64::new(scale, 0.0);
        let fs = fim_lower_bound_aoa(&(&r0 * s), &[&r1 * s], &sc, 0.1).unwrap().matrix;
        prop_assert!((&fs - &f * scale).norm() <= 1e-9 * (f.norm() * scale).max(1e-300));

        let more = fim_lower_bound_aoa(&(&r0 + psd(8, &d0)), &[r1], &sc, 0.1).unwrap().matrix;
        let diff = (more - &f).map(|x| Complex64::new(x, 0.0));
        prop_assert!(min_eigenvalue(&diff) >= -1e-9 * f.trace().abs().max(1e-300));
    }

    #[test]
    fn crb_is_positive_for_nonsingular_fims(d in prop::collection::vec(0.1..10.0f64, 3), off in -0.05..0.05f64) {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        m[(0, 1)] = off;
        m[(1, 0)] = off;
        let fim = FimResult { matrix: m, kind: FimKind::LowSnrBound, param_labels: vec![] };
        for i in 0..3 {
            prop_assert!(crb(&fim, i).unwrap().value > 0.0);
        }
    }

    #[test]
    fn received_covariance_is_psd_and_rate_is_monotone_in_distortion(
        a0 in entries(64), a1 in entries(16), l in 0usize..2, e1 in 0.0..0.99f64, e2 in 0.0..0.99f64,
    ) {
        let sc = scenario_at(-0.17, 100.0);
        let rxx = signal_covariance(&psd(8, &a0), &[psd(4, &a1)], &sc, l).unwrap().matrix;
        prop_assert!(is_hermitian_psd(&rxx, 1e-10));
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let sigma2 = trace_re(&rxx).max(1e-300) / 8.0;
        let r_lo = mi_lower_bound(&rxx, lo, sigma2, 15e3).unwrap().mi_bits_per_symbol;
        let r_hi = mi_lower_bound(&rxx, hi, sigma2, 15e3).unwrap().mi_bits_per_symbol;
        prop_assert!(r_hi >= 0.0);
        prop_assert!(r_hi <= r_lo + 1e-12);
    }

    #[test]
    fn solver_iterates_respect_psd_and_trace_caps(c0 in entries(9), c1 in entries(4), cap0 in 0.1..5.0f64, cap1 in 0.1..5.0f64) {
        let herm = |m: CMat| (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let grads = [
            herm(CMat::from_iterator(3, 3, c0.iter().map(|&(re, im)| Complex64::new(re, im)))),
            herm(CMat::from_iterator(2, 2, c1.iter().map(|&(re, im)| Complex64::new(re, im)))),
        ];
        let p = ConvexProblem {
            blocks: vec![Block { size: 3, cap: cap0 }, Block { size: 2, cap: cap1 }],
            objective: Concave::Linear { grads: &grads, constant: 0.0 },
            constraints: vec![],
        };
        let (rep, sol) = solve_convex(&p, None);
        for (r, cap) in sol.iter().zip([cap0, cap1]) {
            prop_assert!(trace_re(r) <= cap + 1e-8);
            prop_assert!(min_eigenvalue(r) >= -1e-9);
        }
        prop_assert!(rep.constraint_violation <= 1e-9);
    }
}
