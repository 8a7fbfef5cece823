use super::*;
use crate::channel::{apply_derivative_channel, gen_awgn, DerivativeTap, NoiseModel};
use crate::signal_space::detect_l0;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn set(ns: &[u32]) -> BTreeSet<u32> {
    ns.iter().copied().collect()
}

fn grid() -> Grid {
    Grid::new(0.0, 0.01, 600).unwrap()
}

fn gauss() -> Family {
    Family::PowerExp { d: 2 }
}

fn svd_rank(a: &DesignMatrix, tol: f64) -> usize {
    let m = DMatrix::from_fn(a.rows(), a.column_count(), |i, j| a.normalized_column(j)[i]);
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * top).count()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn single_column_is_normalized_square() {
    let g = grid();
    let a = build_basis(&BasisSpec { family: gauss(), k_max: 0, n_set: set(&[2]), delays: vec![0.0] }, &g).unwrap();
    assert_eq!(a.column_count(), 1);
    let f2: Vec<f64> = g.times().map(|t| (-2.0 * t * t).exp()).collect();
    let s = f2.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((a.meta()[0].scale - s).abs() <= 1e-12 * s);
    for (z, v) in a.normalized_column(0).iter().zip(&f2) {
        assert!((z.re - v / s).abs() <= 1e-14);
        assert_eq!(z.im, 0.0);
    }
}

#[test]
fn column_order_is_delay_then_power_then_order() {
    let spec = BasisSpec { family: gauss(), k_max: 1, n_set: set(&[3, 2]), delays: vec![0.5, 0.0] };
    let a = build_basis(&spec, &grid()).unwrap();
    let keys: Vec<(f64, u32, usize)> = a.meta().iter().map(|m| (m.tau, m.n, m.k)).collect();
    assert_eq!(
        keys,
        vec![(0.5, 2, 0), (0.5, 2, 1), (0.5, 3, 0), (0.5, 3, 1), (0.0, 2, 0), (0.0, 2, 1), (0.0, 3, 0), (0.0, 3, 1)]
    );
}

#[test]
fn basis_errors() {
    let g = grid();
    let spec = |k_max, delays: Vec<f64>| BasisSpec { family: gauss(), k_max, n_set: set(&[2]), delays };
    assert!(matches!(build_basis(&spec(13, vec![0.0]), &g), Err(Error::OrderTooHigh { .. })));
    assert!(matches!(build_basis(&spec(1, vec![7.0]), &g), Err(Error::DelayOutOfSpan { .. })));
    assert!(matches!(build_basis(&spec(1, vec![-0.1]), &g), Err(Error::DelayOutOfSpan { .. })));
    assert!(matches!(build_basis(&spec(1, vec![]), &g), Err(Error::EmptyBasis)));
    let mut bad = spec(1, vec![0.0]);
    bad.n_set = set(&[1]);
    assert!(build_basis(&bad, &g).is_err());
}

#[test]
fn damped_exp_basis_has_rank_one() {
    let g = Grid::new(0.0, 0.5, 800).unwrap();
    for k_max in 0..=6 {
        for n in [2, 3, 5] {
            let spec =
                BasisSpec { family: Family::DampedExp { tau: 100.0 }, k_max, n_set: set(&[n]), delays: vec![0.0] };
            let a = build_basis(&spec, &g).unwrap();
            let r = SampledSignal::on_grid(g, a.raw_column(0)).unwrap();
            let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(res.numerical_rank, 1, "k_max={k_max} n={n}");
            assert_eq!(res.dropped.len(), k_max);
            assert!(res.dropped.iter().all(|d| d.reason == DropReason::RankTolerance));
        }
    }
}

#[test]
fn two_delays_give_full_rank_matching_svd() {
    let g = grid();
    for k_max in 0..=3 {
        let spec = BasisSpec { family: gauss(), k_max, n_set: set(&[2]), delays: vec![0.5, 2.0] };
        let a = build_basis(&spec, &g).unwrap();
        let r = SampledSignal::on_grid(g, a.raw_column(0)).unwrap();
        let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(res.numerical_rank, 2 * (k_max + 1));
        assert_eq!(res.numerical_rank, svd_rank(&a, DEFAULT_RANK_TOL));
        assert!(res.condition_estimate >= 1.0);
    }
}

#[test]
fn exact_member_of_span() {
    let g = grid();
    let spec = BasisSpec { family: gauss(), k_max: 3, n_set: set(&[2]), delays: vec![0.3] };
    let a = build_basis(&spec, &g).unwrap();
    let target: Vec<Complex64> = a.raw_column(3).iter().map(|z| z * 2.0).collect();
    let r = SampledSignal::on_grid(g, target).unwrap();
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    for c in &res.coefficients {
        let want = if c.column == 3 { 2.0 } else { 0.0 };
        assert!((c.beta() - want).norm() <= 1e-8, "column {} beta {}", c.column, c.beta());
    }
    assert!(res.residual <= 1e-10 * r.norm2());
}

#[test]
fn recovers_derivative_channel_taps() {
    let g = grid();
    let family = gauss();
    let taps = [
        DerivativeTap::new(0, 0.0, Complex64::new(1.5, 0.0)),
        DerivativeTap::new(1, 0.0, Complex64::new(-0.7, 0.0)),
        DerivativeTap::new(2, 0.0, Complex64::new(0.3, 0.0)),
    ];
    let r = apply_derivative_channel(&family, &set(&[2]), &taps, &NoiseModel::silent(), &g).unwrap();
    let a = build_basis(&BasisSpec { family, k_max: 2, n_set: set(&[2]), delays: vec![0.0] }, &g).unwrap();
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(res.numerical_rank, 3);
    for tap in &taps {
        let beta = res.beta_of(tap.order, 2, 0.0).unwrap();
        assert!((beta - tap.gain()).norm() <= 1e-8 * tap.gain().norm(), "order {}: {beta}", tap.order);
    }
}

#[test]
fn zero_target_gives_empty_fit() {
    let g = grid();
    let a = build_basis(&BasisSpec { family: gauss(), k_max: 2, n_set: set(&[2]), delays: vec![0.0] }, &g).unwrap();
    let res = solve_projection(&SampledSignal::zeros(g).unwrap(), &a, DEFAULT_RANK_TOL).unwrap();
    assert!(res.coefficients.is_empty());
    assert_eq!(res.residual, 0.0);
    assert!(res.dropped.iter().all(|d| d.reason == DropReason::ZeroTarget));
}

#[test]
fn zero_columns_are_dropped() {
    let g = grid();
    let spec = BasisSpec { family: Family::Constant { value: 1.0 }, k_max: 2, n_set: set(&[2]), delays: vec![0.0] };
    let a = build_basis(&spec, &g).unwrap();
    let r = SampledSignal::from_fn(g, |_| Complex64::new(3.0, -1.0)).unwrap();
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(res.numerical_rank, 1);
    assert_eq!(res.dropped.iter().filter(|d| d.reason == DropReason::ZeroColumn).count(), 2);
    assert!((res.beta_of(0, 2, 0.0).unwrap() - Complex64::new(3.0, -1.0)).norm() <= 1e-12);
}

#[test]
fn solve_errors() {
    let g = grid();
    let a = build_basis(&BasisSpec { family: gauss(), k_max: 0, n_set: set(&[2]), delays: vec![0.0] }, &g).unwrap();
    let r = SampledSignal::zeros(Grid::new(0.0, 0.01, 10).unwrap()).unwrap();
    assert!(matches!(solve_projection(&r, &a, 1e-10), Err(Error::DimensionMismatch { .. })));
    let r = SampledSignal::zeros(g).unwrap();
    assert!(solve_projection(&r, &a, 0.0).is_err());
    assert!(solve_projection(&r, &a, 1.0).is_err());
    let empty = DesignMatrix::from_columns(g, vec![]).unwrap();
    assert!(matches!(solve_projection(&r, &empty, 1e-10), Err(Error::EmptyBasis)));
}

fn orthonormal_basis(g: Grid, p: usize) -> DesignMatrix {
    let a = build_basis(&BasisSpec { family: gauss(), k_max: p - 1, n_set: set(&[2]), delays: vec![0.5] }, &g).unwrap();
    let m = DMatrix::from_fn(a.rows(), p, |i, j| a.normalized_column(j)[i]);
    let q = m.qr().q();
    let cols = (0..p).map(|j| ((j, 2, 0.5), q.column(j).iter().copied().collect())).collect();
    DesignMatrix::from_columns(g, cols).unwrap()
}

#[test]
fn noise_residual_follows_chi_square() {
    let g = Grid::new(0.0, 0.01, 400).unwrap();
    let a = orthonormal_basis(g, 4);
    let sigma2 = 0.25;
    let mut mean = 0.0;
    for seed in 0..100 {
        let r = gen_awgn(&g, &NoiseModel { sigma2, seed }, false).unwrap();
        let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(res.numerical_rank, 4);
        mean += res.residual.powi(2) / 100.0;
    }
    let want = (400.0 - 4.0) * sigma2;
    assert!((mean - want).abs() <= 0.1 * want, "mean J² {mean} vs {want}");
}

#[test]
fn residual_json_shape() {
    let g = grid();
    let a = build_basis(&BasisSpec { family: gauss(), k_max: 1, n_set: set(&[2]), delays: vec![0.0] }, &g).unwrap();
    let r = SampledSignal::on_grid(g, a.raw_column(1)).unwrap();
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    let v: serde_json::Value = serde_json::to_value(&res).unwrap();
    for key in ["columns", "residual", "rank", "dropped"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for key in ["k", "n", "tau", "beta_re", "beta_im"] {
        assert!(v["columns"][0].get(key).is_some(), "{key}");
    }
    let back: ProjectionResult = serde_json::from_value(v).unwrap();
    assert_eq!(back, res);
}

fn noisy_target(g: Grid, seed: u64) -> SampledSignal {
    let taps = [
        DerivativeTap::new(0, 0.4, Complex64::new(1.0, 0.5)),
        DerivativeTap::new(1, 0.4, Complex64::new(-0.2, 0.0)),
        DerivativeTap::new(0, 2.5, Complex64::new(0.3, 0.0)),
    ];
    let noise = NoiseModel { sigma2: 0.01, seed };
    apply_derivative_channel(&gauss(), &set(&[2]), &taps, &noise, &g).unwrap()
}

fn two_delay_basis(g: Grid) -> DesignMatrix {
    build_basis(&BasisSpec { family: gauss(), k_max: 2, n_set: set(&[2, 3]), delays: vec![0.4, 2.5] }, &g).unwrap()
}

#[test]
fn normal_equations_hold() {
    let g = grid();
    let a = two_delay_basis(g);
    let r = noisy_target(g, 3);
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    let fitted = a.fitted(&res).unwrap();
    let e: Vec<Complex64> = fitted.samples().iter().zip(r.samples()).map(|(x, y)| x - y).collect();
    let a_fro = (0..a.column_count()).map(|j| a.meta()[j].scale.powi(2)).sum::<f64>().sqrt();
    for c in &res.coefficients {
        let col = a.raw_column(c.column);
        let g: Complex64 = col.iter().zip(&e).map(|(x, y)| x.conj() * y).sum();
        assert!(g.norm() <= 1e-8 * a_fro * r.norm2(), "column {}: {}", c.column, g.norm());
    }
    assert!((res.residual - norm(&e)).abs() <= 1e-10 * res.residual);
}

#[test]
fn projection_is_idempotent() {
    let g = grid();
    let a = two_delay_basis(g);
    let r = noisy_target(g, 5);
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
    let fitted = a.fitted(&res).unwrap();
    let again = solve_projection(&fitted, &a, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(again.numerical_rank, res.numerical_rank);
    for (x, y) in res.coefficients.iter().zip(&again.coefficients) {
        assert_eq!(x.column, y.column);
        assert!((x.beta() - y.beta()).norm() <= 1e-10 * x.beta().norm().max(1e-300));
    }
    assert!(again.residual <= 1e-12 * r.norm2());
}

#[test]
fn truncate_orders_examples() {
    let g = Grid::new(0.0, 0.5, 800).unwrap();
    let damped = Family::DampedExp { tau: 100.0 };
    let b = truncate_orders(&damped, &set(&[2]), &g, 1e-8).unwrap();
    assert_eq!(b.l0, 4);
    assert!(!b.saturated);
    assert_eq!(b.l0, detect_l0(&damped, 2, &g, 1e-8).unwrap().l0);
    let c = truncate_orders(&Family::Constant { value: 2.0 }, &set(&[2, 3]), &g, 1e-8).unwrap();
    assert_eq!(c.l0, 0);
    let loose = truncate_orders(&damped, &set(&[2]), &g, 0.5).unwrap();
    assert!(loose.l0 <= b.l0);
    assert!(truncate_orders(&damped, &set(&[2]), &g, 0.0).is_err());
}

#[test]
fn truncate_orders_agrees_with_direct_sup_norms() {
    let g = Grid::new(0.0, 0.01, 500).unwrap();
    for family in [gauss(), Family::PowerExp { d: 1 }, Family::DampedExp { tau: 3.0 }] {
        for n in [2, 3, 4] {
            for eps in [1e-2, 1e-4, 1e-8] {
                let via_lemma = truncate_orders(&family, &set(&[n]), &g, eps).unwrap();
                let direct = detect_l0(&family, n, &g, eps).unwrap();
                assert_eq!(via_lemma, direct, "{family:?} n={n} eps={eps}");
            }
        }
    }
}

#[test]
fn single_on_grid_echo_is_exact() {
    let g = Grid::new(0.0, 0.01, 512).unwrap();
    let family = gauss();
    let tau = 37.0 * g.dt;
    let taps = [DerivativeTap::new(0, tau, Complex64::new(0.8, 0.0))];
    let r = apply_derivative_channel(&family, &set(&[2]), &taps, &NoiseModel::silent(), &g).unwrap();
    let search = DelaySearch { max_taps: 3, min_separation: 0.1, ..Default::default() };
    assert_eq!(estimate_delays(&r, &family, 2, &search).unwrap(), vec![tau]);
}

#[test]
fn derivative_echo_found_with_subspace_search() {
    let g = Grid::new(0.0, 0.01, 1024).unwrap();
    let family = gauss();
    let tau = 2.0;
    let taps = [
        DerivativeTap::new(0, tau, Complex64::new(1.0, 0.0)),
        DerivativeTap::new(1, tau, Complex64::new(0.4, 0.0)),
        DerivativeTap::new(2, tau, Complex64::new(-0.05, 0.0)),
    ];
    let r = apply_derivative_channel(&family, &set(&[2]), &taps, &NoiseModel { sigma2: 1e-3, seed: 9 }, &g).unwrap();
    let search = DelaySearch { max_taps: 1, k_max: 2, ..Default::default() };
    let found = estimate_delays(&r, &family, 2, &search).unwrap();
    assert_eq!(found.len(), 1);
    assert!((found[0] - tau).abs() <= g.dt, "{found:?}");
}

#[test]
fn two_echoes_at_twenty_db() {
    let g = Grid::new(0.0, 0.05, 256).unwrap();
    let family = gauss();
    let (t1, t2) = (20.0 * g.dt, 55.0 * g.dt);
    let clean = apply_derivative_channel(
        &family,
        &set(&[2]),
        &[DerivativeTap::new(0, t1, Complex64::new(1.0, 0.0)), DerivativeTap::new(0, t2, Complex64::new(0.7, 0.0))],
        &NoiseModel::silent(),
        &g,
    )
    .unwrap();
    let power = clean.norm2().powi(2) / g.len as f64;
    let search = DelaySearch { max_taps: 2, min_separation: 5.0 * g.dt, ..Default::default() };
    let mut err1 = Vec::new();
    let mut err2 = Vec::new();
    for seed in 0..100 {
        let noise = gen_awgn(&g, &NoiseModel { sigma2: power / 100.0, seed }, false).unwrap();
        let r = clean.try_add(&noise).unwrap();
        let found = estimate_delays(&r, &family, 2, &search).unwrap();
        let nearest = |t: f64| found.iter().map(|x| (x - t).abs()).fold(f64::INFINITY, f64::min);
        err1.push(nearest(t1));
        err2.push(nearest(t2));
    }
    for errs in [&mut err1, &mut err2] {
        errs.sort_by(f64::total_cmp);
        assert!(errs[50] <= g.dt, "median error {}", errs[50]);
    }
}

#[test]
fn pure_noise_yields_no_delays() {
    let g = Grid::new(0.0, 0.05, 256).unwrap();
    let search = DelaySearch { max_taps: 3, min_separation: 0.25, ..Default::default() };
    let mut hits = 0;
    for seed in 0..50 {
        let r = gen_awgn(&g, &NoiseModel { sigma2: 1.0, seed }, seed % 2 == 0).unwrap();
        hits += estimate_delays(&r, &gauss(), 2, &search).unwrap().len();
    }
    assert_eq!(hits, 0);
    let zero = SampledSignal::zeros(g).unwrap();
    assert!(estimate_delays(&zero, &gauss(), 2, &search).unwrap().is_empty());
}

#[test]
fn delay_search_validation() {
    let g = Grid::new(0.0, 0.05, 64).unwrap();
    let r = SampledSignal::zeros(g).unwrap();
    let bad = DelaySearch { max_taps: 0, ..Default::default() };
    assert!(estimate_delays(&r, &gauss(), 2, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn column_scaling_leaves_fit_unchanged(scales in prop::collection::vec(-8.0f64..8.0, 6), seed in 0u64..1000) {
        let g = Grid::new(0.0, 0.02, 300).unwrap();
        let r = noisy_target(g, seed);
        let base = build_basis(&BasisSpec { family: gauss(), k_max: 2, n_set: set(&[2]), delays: vec![0.4, 2.5] }, &g).unwrap();
        let scaled_cols = (0..base.column_count())
            .map(|j| {
                let m = base.meta()[j];
                let s = 10f64.powf(scales[j]);
                ((m.k, m.n, m.tau), base.raw_column(j).iter().map(|z| z * s).collect())
            })
            .collect();
        let scaled = DesignMatrix::from_columns(g, scaled_cols).unwrap();
        let f1 = base.fitted(&solve_projection(&r, &base, DEFAULT_RANK_TOL).unwrap()).unwrap();
        let f2 = scaled.fitted(&solve_projection(&r, &scaled, DEFAULT_RANK_TOL).unwrap()).unwrap();
        let diff: Vec<Complex64> = f1.samples().iter().zip(f2.samples()).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&diff) <= 1e-10 * f1.norm2());
    }

    #[test]
    fn perturbing_beta_never_lowers_residual(seed in 0u64..1000, col in 0usize..6, dre in -1.0f64..1.0, dim in -1.0f64..1.0) {
        let g = Grid::new(0.0, 0.02, 300).unwrap();
        let r = noisy_target(g, seed);
        let a = build_basis(&BasisSpec { family: gauss(), k_max: 2, n_set: set(&[2]), delays: vec![0.4, 2.5] }, &g).unwrap();
        let res = solve_projection(&r, &a, DEFAULT_RANK_TOL).unwrap();
        let mut moved = res.clone();
        let c = &mut moved.coefficients[col % res.coefficients.len()];
        c.beta_re += dre * 1e-3;
        c.beta_im += dim * 1e-3;
        let fitted = a.fitted(&moved).unwrap();
        let j: f64 = norm(&fitted.samples().iter().zip(r.samples()).map(|(x, y)| x - y).collect::<Vec<_>>());
        prop_assert!(j >= res.residual - 1e-10 * r.norm2());
    }
}
