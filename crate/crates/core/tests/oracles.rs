//! Derived values checked against oracles that do not share code with the
//! implementation: quadrature, seeded Monte-Carlo, high-precision constants
//! computed offline, and closed forms.

use std::f64::consts::PI;

use hrf_core::fisher::{crb, fim_exact, fim_gaussian, fim_lower_bound_aoa, lambda_term, Parameter};
use hrf_core::linalg::{trace_re, CMat, CVec};
use hrf_core::pareto::{ParetoOptions, SolveStatus, TradeoffModel};
use hrf_core::quantizer::{arcsine_covariance, design_lloyd_max, Quantizer};
use hrf_core::rate::{mi_lower_bound, signal_covariance};
use hrf_core::scenario::{default_scenario, dynamic_range_sig, OfdmPlan, Scenario, TargetSpec};
use hrf_core::signal_model::{
    channel_direct, channel_reflected, noiseless_sample, steering_vector, subcarrier_phase, Precoders, Symbols,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// E[(X − Q(X))²] for X ~ N(0, 1) by bin-wise quadrature over [−12, 12].
fn quadrature_mse(q: &Quantizer) -> f64 {
    let mut total = 0.0;
    for (bin, &y) in q.levels.iter().enumerate() {
        let lo = q.thresholds[bin].max(-12.0);
        let hi = q.thresholds[bin + 1].min(12.0);
        if hi > lo {
            total += simpson(|x| (x - y) * (x - y) * gauss_pdf(x), lo, hi, 4000);
        }
    }
    total
}

#[test]
fn quantizer_distortion_matches_quadrature() {
    for b in 1..=5 {
        let q = design_lloyd_max(b).unwrap();
        let mse = quadrature_mse(&q);
        assert!((mse - q.eta).abs() < 1e-6, "b={b}: quadrature {mse} vs η {}", q.eta);
    }
    // Classic Lloyd-Max table values for 4 and 8 levels.
    assert!((design_lloyd_max(2).unwrap().eta - 0.11748).abs() < 5e-5);
    assert!((design_lloyd_max(3).unwrap().eta - 0.03454).abs() < 5e-5);
}

#[test]
fn bussgang_gain_matches_regression_on_gaussian_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x2: f64 = xs.iter().map(|x| x * x).sum();
    for b in [1, 2, 3, 16] {
        let q = design_lloyd_max(b).unwrap();
        let qx: f64 = xs.iter().map(|&x| q.apply(x) * x).sum();
        let gain = qx / x2;
        let tol = if b == 16 { 1e-4 } else { 1e-3 };
        assert!((gain - (1.0 - q.eta)).abs() < tol, "b={b}: regression {gain} vs {}", 1.0 - q.eta);
        if b == 16 {
            assert!((gain - 1.0).abs() < 1e-4);
        }
    }
}

#[test]
fn sixteen_bit_quantizer_error_is_tiny() {
    let q = design_lloyd_max(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let worst = (0..200_000)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            (q.apply(x) - x).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "max error {worst}");
}

#[test]
fn arcsine_law_matches_sign_correlation() {
    let rho = c(0.6, 0.3);
    let r_in = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), rho, rho.conj(), c(1.0, 0.0)]);
    let want = arcsine_covariance(&r_in).unwrap()[(0, 1)];

    // x₂ = ρ*·x₁ + √(1 − |ρ|²)·w gives E[x₁x₂*] = ρ for unit CN inputs.
    let s = (1.0 - rho.norm_sqr()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cn = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re, im) / 2f64.sqrt()
    };
    let n = 4_000_000;
    let mut acc = c(0.0, 0.0);
    for _ in 0..n {
        let x1 = cn();
        let x2 = rho.conj() * x1 + cn() * s;
        let q = |z: Complex64| c(z.re.signum(), z.im.signum()) / 2f64.sqrt();
        acc += q(x1) * q(x2).conj();
    }
    let got = acc / n as f64;
    assert!((got - want).norm() < 1e-3, "Monte-Carlo {got} vs arcsine {want}");
}

#[test]
fn lambda_term_frozen_values() {
    // x = 0.5, σ = 1, unit scale; values from 30-digit evaluation of
    // φ(β)²/(1 − Φ(β)) and φ(β)²/Φ(β) with β = −0.5·√2. The tolerance is
    // the accuracy of the normal CDF, about 1e-11.
    let q = design_lloyd_max(1).unwrap();
    let upper = lambda_term(0.5, 1.0, &q, 1, 1.0);
    let lower = lambda_term(0.5, 1.0, &q, 0, 1.0);
    assert!((upper - 0.126_974_495_741_357_85).abs() < 1e-10, "{upper}");
    assert!((lower - 0.402_637_447_472_502_1).abs() < 1e-10, "{lower}");
}

#[test]
fn steering_and_subcarrier_phase_examples() {
    let a = steering_vector(PI / 6.0, 2, 0.5).entries;
    assert!((a[0] - c(1.0, 0.0)).norm() < 1e-15);
    assert!((a[1] - c(0.0, 1.0)).norm() < 1e-12);

    // (24e9 + 15e3)·1e-6 = 24000.015 cycles; only the fractional 0.015 matters.
    let plan = default_scenario().ofdm;
    let got = subcarrier_phase(1, 1e-6, 0, &plan, 24e9);
    let want = Complex64::from_polar(1.0, -2.0 * PI * 0.015);
    assert!((got - want).norm() < 1e-9, "{got} vs {want}");
}

#[test]
fn dynamic_range_matches_brute_force_path_powers() {
    let sc = default_scenario();
    // One active user antenna: both paths see unit array factor at the user.
    let mut p = Precoders::zeros(&sc);
    p.users[0][0] = c(1.0, 0.0);
    let (pd, pr) = sc.path_powers(0, 0, &p).unwrap();
    let brute = dynamic_range_sig(pd, pr).unwrap();
    let model = sc.link_dynamic_range_db(0, 0).unwrap();
    let gains = 20.0 * (sc.direct_gain(0).norm() / sc.reflected_gain(0, 0).norm()).log10();
    assert!((brute - model).abs() < 1e-9, "{brute} vs {model}");
    assert!((brute - gains).abs() < 1e-9);
}

fn user_only(mut sc: Scenario) -> Scenario {
    sc.targets.clear();
    let u = &mut sc.users[0];
    u.observed_targets.clear();
    u.per_target_aod.clear();
    u.per_target_path_m.clear();
    u.per_target_gain_override.clear();
    sc
}

fn outer(f: &CVec) -> CMat {
    f * f.adjoint()
}

fn monte_carlo_covariance(sc: &Scenario, p: &Precoders, draws: u64) -> CMat {
    let n = sc.num_bs_antennas;
    let mut acc = CMat::zeros(n, n);
    for seed in 0..draws {
        let sym = Symbols::qpsk(&sc.ofdm, 1000 + seed);
        let x = noiseless_sample(sc, p, &sym, 0, 0).unwrap().x;
        acc += outer(&x);
    }
    acc / c(draws as f64, 0.0)
}

#[test]
fn direct_path_covariance_closed_form_and_monte_carlo() {
    let sc = user_only(default_scenario());
    let mut p = Precoders::zeros(&sc);
    p.users[0] = CVec::from_fn(4, |i, _| Complex64::from_polar(0.2, 0.7 * i as f64));
    let rk = outer(&p.users[0]);
    let r0 = CMat::zeros(sc.num_bs_antennas, sc.num_bs_antennas);
    let model = signal_covariance(&r0, &[rk], &sc, 0).unwrap().matrix;

    let u = &sc.users[0];
    let a_r = steering_vector(u.aoa_rad, sc.num_bs_antennas, 0.5).entries;
    let a_u = steering_vector(u.aod_rad, u.num_antennas, 0.5).entries;
    let beam = (a_u.transpose() * &p.users[0])[(0, 0)].norm_sqr();
    let closed = outer(&a_r) * c(24.0 * sc.direct_gain(0).norm_sqr() * beam, 0.0);
    assert!((&model - &closed).norm() <= 1e-10 * closed.norm());

    let mc = monte_carlo_covariance(&sc, &p, 10_000);
    let err = (&mc - &model).norm() / model.norm();
    assert!(err < 0.02, "relative Frobenius error {err}");
}

#[test]
fn full_scenario_covariance_matches_monte_carlo() {
    let sc = default_scenario();
    let p = Precoders::uniform(&sc);
    let model = signal_covariance(&outer(&p.bs), &[outer(&p.users[0])], &sc, 0).unwrap().matrix;
    let mc = monte_carlo_covariance(&sc, &p, 10_000);
    let err = (&mc - &model).norm() / model.norm();
    assert!(err < 0.03, "relative Frobenius error {err}");
}

/// Default geometry shrunk to 2 symbols and 16 samples; subcarriers stay
/// distinct modulo M.
fn compact() -> Scenario {
    let mut sc = default_scenario();
    sc.ofdm.num_symbols = 2;
    sc.ofdm.samples_per_symbol = 16;
    sc.ofdm.dl_subcarriers = (0..6).collect();
    sc.ofdm.ul_subcarriers_per_user = vec![(6..10).collect()];
    sc.noise_variance = sc.noise_for_direct_snr(0, -15.0);
    sc
}

#[test]
fn aoa_bound_equals_averaged_random_symbol_construction() {
    let sc = compact();
    let mut p = Precoders::uniform(&sc);
    p.bs = CVec::from_fn(8, |i, _| Complex64::from_polar(0.03, 0.4 * i as f64));
    p.users[0] = CVec::from_fn(4, |i, _| Complex64::from_polar(0.2, -1.1 * i as f64));
    let eta = design_lloyd_max(3).unwrap().eta;
    let bound = fim_lower_bound_aoa(&outer(&p.bs), &[outer(&p.users[0])], &sc, eta)
        .unwrap()
        .scalar();
    let draws = 200;
    let mean = (0..draws)
        .map(|s| {
            let sym = Symbols::qpsk(&sc.ofdm, s);
            fim_gaussian(&sc, &p, &sym, &[Parameter::TargetAoa(0)]).unwrap().scalar()
        })
        .sum::<f64>()
        / draws as f64;
    let want = (1.0 - eta) * mean;
    assert!(((bound - want) / want).abs() < 0.05, "bound {bound} vs {want}");
}

/// N = 2, one DL subcarrier, one symbol and sample, no users.
fn tiny(snr_db: f64) -> (Scenario, Precoders) {
    let sc = Scenario {
        carrier_hz: 24e9,
        num_bs_antennas: 2,
        antenna_spacing_ratio: 0.5,
        targets: vec![TargetSpec {
            gain_override: Some(c(1.0, 0.0)),
            ..TargetSpec::new(0.3, 50.0, 1.0)
        }],
        users: vec![],
        ofdm: OfdmPlan {
            subcarrier_spacing_hz: 15e3,
            num_symbols: 1,
            samples_per_symbol: 1,
            dl_subcarriers: vec![0],
            ul_subcarriers_per_user: vec![],
            symbol_variances: vec![1.0],
        },
        noise_variance: 10f64.powf(-snr_db / 10.0),
        bs_max_power: 1.0,
    };
    let p = Precoders {
        bs: CVec::from_vec(vec![c(0.7, 0.0), c(0.0, 0.7)]),
        users: vec![],
    };
    (sc, p)
}

#[test]
fn sixteen_bit_exact_fim_approaches_gaussian() {
    let (sc, p) = tiny(0.0);
    let sym = Symbols::ones(&sc.ofdm);
    let params = [Parameter::TargetAoa(0)];
    let q = design_lloyd_max(16).unwrap();
    let exact = fim_exact(&sc, &p, &sym, &q, &params).unwrap().scalar();
    let gauss = fim_gaussian(&sc, &p, &sym, &params).unwrap().scalar();
    assert!(((exact - gauss) / gauss).abs() < 0.01, "exact {exact} vs Gaussian {gauss}");
}

#[test]
fn rate_endpoint_matches_waterfilling() {
    // One UL subcarrier and no Doppler: R_xx = σ²·H R Hᴴ with a rank-2 H, so
    // the rate-optimal covariance is waterfilling over the eigenmodes of HᴴH.
    let mut sc = default_scenario();
    sc.ofdm.num_symbols = 1;
    sc.ofdm.samples_per_symbol = 4;
    sc.ofdm.dl_subcarriers = vec![0];
    sc.ofdm.ul_subcarriers_per_user = vec![vec![1]];
    let g_dp = sc.direct_gain(0).norm();
    sc.users[0].per_target_gain_override = vec![Some(c(0.0, 0.6 * g_dp))];
    sc.noise_variance = g_dp * g_dp * 0.2;

    let q = design_lloyd_max(6).unwrap();
    let opts = ParetoOptions::default();
    let model = TradeoffModel::new(&sc, &q, &opts).unwrap();
    let point = model.solve_p1(0.0, None).unwrap();
    assert_eq!(point.report.status, SolveStatus::Optimal);

    let h = channel_direct(&sc, 0, 0, 1, 0).unwrap().entries + channel_reflected(&sc, 0, 0, 0, 1, 0).unwrap().entries;
    let gram = h.adjoint() * &h * c((1.0 - q.eta) / sc.noise_variance, 0.0);
    let mut gains: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().filter(|&g| g > 1e-12).collect();
    gains.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(gains.len(), 2);
    let budget = sc.users[0].max_power;
    // Water level for the largest active set.
    let mut best = 0.0;
    for active in 1..=gains.len() {
        let g = &gains[..active];
        let level = (budget + g.iter().map(|x| 1.0 / x).sum::<f64>()) / active as f64;
        if g.iter().all(|x| level > 1.0 / x) {
            best = g.iter().map(|x| (level * x).log2()).sum();
        }
    }
    let got = point.rate.mi_bits_per_symbol;
    assert!(((got - best) / best).abs() < 1e-6, "solver {got} vs waterfilling {best}");
}

fn default_model(bits: u32) -> (Scenario, Quantizer, TradeoffModel, ParetoOptions) {
    let sc = default_scenario();
    let q = design_lloyd_max(bits).unwrap();
    let opts = ParetoOptions::default();
    let m = TradeoffModel::new(&sc, &q, &opts).unwrap();
    (sc, q, m, opts)
}

#[test]
fn sensing_endpoint_uses_a_full_power_budget() {
    let (sc, _, m, _) = default_model(4);
    let a = m.solve_p0(0.0, None).unwrap();
    assert_eq!(a.report.status, SolveStatus::Optimal);
    let bs = trace_re(&a.covariances.r0) / sc.bs_max_power;
    let user = trace_re(&a.covariances.rk[0]) / sc.users[0].max_power;
    assert!((bs - 1.0).abs() < 1e-6 || (user - 1.0).abs() < 1e-6, "{bs} {user}");
}

#[test]
fn boundary_points_are_consistent_with_model_reevaluation() {
    let (sc, q, m, opts) = default_model(4);
    let pts = m.boundary(6, &opts).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].rate.mi_bits_per_symbol >= w[0].rate.mi_bits_per_symbol - 1e-9);
        assert!(w[1].crb >= w[0].crb * (1.0 - 1e-6), "{} then {}", w[0].crb, w[1].crb);
    }
    let a = m.solve_p0(0.0, None).unwrap();
    assert!(((pts[0].crb - a.crb) / a.crb).abs() < 1e-5);
    let b = m.solve_p1(0.0, None).unwrap();
    let top = pts.last().unwrap().rate.mi_bits_per_symbol;
    assert!(((top - b.rate.mi_bits_per_symbol) / top).abs() < 1e-5);

    let n = sc.num_bs_antennas;
    for pt in &pts {
        assert_eq!(pt.report.status, SolveStatus::Optimal);
        let cov = &pt.covariances;
        assert!(trace_re(&cov.r0) <= sc.bs_max_power * (1.0 + 1e-8));
        assert!(trace_re(&cov.rk[0]) <= sc.users[0].max_power * (1.0 + 1e-8));

        let fim = fim_lower_bound_aoa(&cov.r0, &cov.rk, &sc, q.eta).unwrap();
        let again = crb(&fim, 0).unwrap().value;
        assert!(((again - pt.crb) / pt.crb).abs() < 1e-6);

        // The echo does not enter the rate, so R₀ = 0 reproduces it.
        let zero = CMat::zeros(n, n);
        let bits = (0..sc.ofdm.num_symbols)
            .map(|l| {
                let rxx = signal_covariance(&zero, &cov.rk, &sc, l).unwrap().matrix;
                mi_lower_bound(&rxx, q.eta, sc.noise_variance, 15e3).unwrap().mi_bits_per_symbol
            })
            .sum::<f64>()
            / sc.ofdm.num_symbols as f64;
        assert!(((bits - pt.rate.mi_bits_per_symbol) / bits).abs() < 1e-6);
    }
}
