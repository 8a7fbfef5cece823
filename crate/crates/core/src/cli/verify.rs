//! Built-in invariant suite run by `ctk verify`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{render, simulate};
use crate::channel::{apply_derivative_channel, gen_awgn, DerivativeTap, NoiseModel};
use crate::energy_ops::{
    apply_psi, differentiate, lemma0_from_parts, psi_from_parts, DerivativeMethod, OperatorIndex, Sign,
};
use crate::error::Result;
use crate::matched_filter::{snr_quadratic, snr_ratio, FilterVector, NoiseCovariance, TemplateVector};
use crate::projection::{build_basis, estimate_delays, solve_projection, BasisSpec, DelaySearch, DEFAULT_RANK_TOL};
use crate::signal::{Grid, SampledSignal};
use crate::signal_space::{detect_l0, energy, eval_family, Family};

/// Time budget for the whole suite, seconds.
pub const RUNTIME_BUDGET_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Corrupts the first-order operator inputs so the cancellation check fails.
    pub perturb_psi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub total_ms: f64,
}

impl VerifySummary {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status}  {:width$}  {:>9.1} ms  {}\n", c.name, c.elapsed_ms, c.detail));
        }
        out.push_str(&format!(
            "{} of {} checks passed in {:.1} ms\n",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len(),
            self.total_ms
        ));
        out
    }
}

type Outcome = Result<(bool, String)>;

fn signal(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<SampledSignal> {
    SampledSignal::from_fn(grid, f)
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn cancellation_suite() -> Result<Vec<SampledSignal>> {
    let g = Grid::new(0.0, 0.01, 401)?;
    let mut out = vec![
        signal(g, |t| real((-t).exp()))?,
        signal(g, |t| real((0.5 * t).exp()))?,
        signal(g, |t| real((3.0 * t).sin()))?,
        signal(g, |t| real((2.0 * t + 1.0).cos()))?,
        signal(g, |t| real((5.0 * t).sin() * (-0.3 * t).exp()))?,
        signal(g, |t| real(t * t * (4.0 * t).cos()))?,
        signal(g, |t| Complex64::new(0.0, 5.0 * t).exp())?,
        signal(g, |t| Complex64::new(-0.1 * t, t * t).exp())?,
        signal(g, |t| real((-(t - 2.0).powi(2)).exp()))?,
    ];
    out.push(gen_awgn(&g, &NoiseModel { sigma2: 1.0, seed: 1 }, false)?);
    out.push(gen_awgn(&g, &NoiseModel { sigma2: 1.0, seed: 2 }, true)?);
    Ok(out)
}

fn psi1_minus_cancellation(opts: VerifyOptions) -> Outcome {
    let method = DerivativeMethod::default();
    let mut worst = 0.0f64;
    let suite = cancellation_suite()?;
    for s in &suite {
        let d1 = differentiate(s, 1, method)?;
        let psi = if opts.perturb_psi {
            let skewed = d1.scale(real(1.0 + 1e-6));
            psi_from_parts(s, &skewed, s, &d1, Sign::Minus)?
        } else {
            apply_psi(s, OperatorIndex::minus(1)?, method)?
        };
        let reference = s.try_mul(&d1)?.max_abs();
        worst = worst.max(psi.max_abs() / reference);
    }
    Ok((worst <= 1e-12, format!("{} signals, worst ratio {worst:.3e} (limit 1e-12)", suite.len())))
}

fn classical_tk_value() -> Outcome {
    let (a, w) = (2.0, 2.0 * PI * 5.0);
    let g = Grid::new(0.0, 1.0 / 1024.0, 1024)?;
    let s = signal(g, |t| real(a * (w * t).cos()))?;
    let psi = apply_psi(&s, OperatorIndex::minus(2)?, DerivativeMethod::Spectral)?;
    let want = a * a * w * w;
    let err = psi.samples()[16..1008].iter().map(|z| (z - want).norm() / want).fold(0.0, f64::max);
    Ok((err <= 1e-6, format!("max rel error {err:.3e} vs A²ω² (limit 1e-6)")))
}

/// Max chain-rule residual over samples with `lo <= t <= hi`.
pub fn chain_rule_window(
    s: &SampledSignal,
    k: usize,
    sign: Sign,
    method: DerivativeMethod,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let lhs = differentiate(&apply_psi(s, OperatorIndex::new(k, sign)?, method)?, 1, method)?;
    let next = apply_psi(s, OperatorIndex::new(k + 1, sign)?, method)?;
    let prev = apply_psi(&differentiate(s, 1, method)?, OperatorIndex::new(k - 1, sign)?, method)?;
    Ok(s.grid()
        .times()
        .enumerate()
        .filter(|(_, t)| *t >= lo && *t <= hi)
        .map(|(i, _)| (lhs.samples()[i] - next.samples()[i] - prev.samples()[i]).norm())
        .fold(0.0, f64::max))
}

// (label, sign, span, window start, window end, signal)
type ChainCase = (&'static str, Sign, f64, f64, f64, fn(f64) -> f64);

fn chain_rule_order() -> Outcome {
    let method = DerivativeMethod::FiniteDifference { accuracy: 8 };
    let cases: [ChainCase; 3] = [
        ("exp+", Sign::Plus, 12.0, 4.0, 8.0, |t| (-t).exp()),
        ("cos+", Sign::Plus, 20.0, 5.0, 15.0, f64::cos),
        ("cos-", Sign::Minus, 20.0, 5.0, 15.0, f64::cos),
    ];
    let mut worst = f64::INFINITY;
    let mut detail = Vec::new();
    for (name, sign, span, lo, hi, f) in cases {
        for k in 2..=4 {
            let res = |dt: f64| -> Result<f64> {
                let g = Grid::new(0.0, dt, (span / dt).round() as usize + 1)?;
                chain_rule_window(&signal(g, |t| real(f(t)))?, k, sign, method, lo, hi)
            };
            let order = (res(0.4)? / res(0.2)?).log2();
            worst = worst.min(order);
            detail.push(format!("{name}k{k}={order:.2}"));
        }
    }
    Ok((worst >= 7.5, format!("min order {worst:.2} (limit 7.5): {}", detail.join(" "))))
}

fn lemma0_instance() -> Outcome {
    let g = Grid::new(0.0, 0.01, 1001)?;
    let mut worst = 0.0f64;
    for tau in [0.5, 2.0, 10.0] {
        let fam = Family::DampedExp { tau };
        let as_signal = |n, order| -> Result<SampledSignal> {
            let v: Vec<Complex64> = fam.sample_derivative(n, order, &g, 0.0).into_iter().map(real).collect();
            SampledSignal::on_grid(g, v)
        };
        let (f, df) = (as_signal(1, 0)?, as_signal(1, 1)?);
        for n in 2..=4 {
            let want = as_signal(n, 1)?;
            let got = lemma0_from_parts(&f, &df, n)?;
            worst = worst.max(got.try_sub(&want)?.max_abs() / want.max_abs());
        }
    }
    Ok((worst <= 1e-10, format!("worst rel error {worst:.3e} (limit 1e-10)")))
}

fn energy_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for (tau, n) in [(1.0, 2u32), (100.0, 2), (10.0, 5)] {
        let len = 20_001;
        let g = Grid::new(0.0, 20.0 * tau / n as f64 / (len - 1) as f64, len)?;
        let e = energy(&eval_family(&Family::DampedExp { tau }, n, &g)?);
        let want = tau / (2.0 * n as f64);
        worst = worst.max((e - want).abs() / want);
    }
    Ok((worst <= 1e-6, format!("worst rel error {worst:.3e} vs τ/(2n) (limit 1e-6)")))
}

fn powers(ns: &[u32]) -> BTreeSet<u32> {
    ns.iter().copied().collect()
}

fn collinear_rank() -> Outcome {
    let g = Grid::new(0.0, 0.5, 800)?;
    let spec = BasisSpec { family: Family::DampedExp { tau: 100.0 }, k_max: 5, n_set: powers(&[2]), delays: vec![0.0] };
    let a = build_basis(&spec, &g)?;
    let r = SampledSignal::on_grid(g, a.raw_column(0))?;
    let rank = solve_projection(&r, &a, DEFAULT_RANK_TOL)?.numerical_rank;
    Ok((rank == 1, format!("numerical rank {rank} of 6 columns (want 1)")))
}

/// Grid, template and taps shared by the recovery checks.
pub fn recovery_setup() -> Result<(Grid, Family, Vec<DerivativeTap>)> {
    let g = Grid::new(0.0, 0.01, 1024)?;
    let taps = [1.5, -0.7, 0.3].iter().enumerate().map(|(k, &r)| DerivativeTap::new(k, 2.0, real(r))).collect();
    Ok((g, Family::PowerExp { d: 2 }, taps))
}

fn noiseless_recovery() -> Outcome {
    let (g, family, taps) = recovery_setup()?;
    let r = apply_derivative_channel(&family, &powers(&[2]), &taps, &NoiseModel::silent(), &g)?;
    let a = build_basis(&BasisSpec { family, k_max: 2, n_set: powers(&[2]), delays: vec![2.0] }, &g)?;
    let res = solve_projection(&r, &a, DEFAULT_RANK_TOL)?;
    let mut worst = 0.0f64;
    for t in &taps {
        let beta = res.beta_of(t.order, 2, t.delay).unwrap_or_default();
        worst = worst.max((beta - t.gain()).norm() / t.gain().norm());
    }
    let j = res.residual / r.norm2();
    Ok((worst <= 1e-8 && j <= 1e-10, format!("gain rel error {worst:.3e} (limit 1e-8), J/‖r‖ {j:.3e} (limit 1e-10)")))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn noisy_recovery() -> Outcome {
    let (g, family, taps) = recovery_setup()?;
    let ns = powers(&[2]);
    let clean = apply_derivative_channel(&family, &ns, &taps, &NoiseModel::silent(), &g)?;
    let sigma2 = clean.norm2().powi(2) / g.len as f64 / 100.0;
    let search = DelaySearch { max_taps: 1, k_max: 2, ..Default::default() };
    let mut delay_err = Vec::new();
    let mut gain_err = vec![Vec::new(); taps.len()];
    for seed in 0..100 {
        let r = apply_derivative_channel(&family, &ns, &taps, &NoiseModel { sigma2, seed }, &g)?;
        let found = estimate_delays(&r, &family, 2, &search)?;
        let Some(&tau) = found.first() else {
            delay_err.push(f64::INFINITY);
            gain_err.iter_mut().for_each(|v| v.push(f64::INFINITY));
            continue;
        };
        delay_err.push((tau - 2.0).abs() / g.dt);
        let a = build_basis(&BasisSpec { family, k_max: 2, n_set: ns.clone(), delays: vec![tau] }, &g)?;
        let res = solve_projection(&r, &a, DEFAULT_RANK_TOL)?;
        for (t, errs) in taps.iter().zip(gain_err.iter_mut()) {
            let beta = res.beta_of(t.order, 2, tau).unwrap_or_default();
            errs.push((beta - t.gain()).norm() / t.gain().norm());
        }
    }
    let d = median(delay_err);
    let gmax = gain_err.into_iter().map(median).fold(0.0, f64::max);
    Ok((
        d <= 1.0 && gmax <= 0.05,
        format!("median delay error {d:.3} samples (limit 1), worst median gain error {gmax:.4} (limit 0.05)"),
    ))
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
    (0..dim).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn snr_reduction() -> Outcome {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = TemplateVector::from_samples(random_vec(&mut rng, dim))?;
    let ar1 = DMatrix::from_fn(dim, dim, |i, j| real(0.5f64.powi((i as i32 - j as i32).abs())));
    let mut worst_eq = 0.0f64;
    let mut violations = 0;
    for r in [NoiseCovariance::diagonal(0.3, dim)?, NoiseCovariance::dense(ar1)?] {
        let q = snr_quadratic(&f, &r)?;
        let best = snr_ratio(&FilterVector::matched(&f, &r)?, &f, &r)?;
        worst_eq = worst_eq.max((best - q).abs() / q);
        for _ in 0..1000 {
            if snr_ratio(&FilterVector::new(random_vec(&mut rng, dim))?, &f, &r)? > q * (1.0 + 1e-10) {
                violations += 1;
            }
        }
    }
    Ok((
        worst_eq <= 1e-10 && violations == 0,
        format!("reduction rel error {worst_eq:.3e} (limit 1e-10), {violations} bound violations in 2000 filters"),
    ))
}

fn l0_detection() -> Outcome {
    let g = Grid::new(0.0, 0.5, 800)?;
    let slow = detect_l0(&Family::DampedExp { tau: 100.0 }, 2, &g, 1e-8)?;
    let fast = detect_l0(&Family::DampedExp { tau: 1.0 }, 2, &g, 1e-8)?;
    let ok = slow.l0 == 4 && !slow.saturated && fast.saturated;
    Ok((ok, format!("tau=100: l0={} saturated={}; tau=1: saturated={}", slow.l0, slow.saturated, fast.saturated)))
}

/// Seeded noisy blind-mode config used by the determinism check.
pub fn determinism_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "family": {"kind": "power_exp", "d": 2},
            "grid": {"t0": 0.0, "dt": 0.01, "len": 512},
            "channel": {"kind": "derivative", "taps": [
                {"order": 0, "delay": 1.5, "gain_re": 1.0, "gain_im": 0.5},
                {"order": 1, "delay": 1.5, "gain_re": -0.3, "gain_im": 0.0}
            ]},
            "noise": {"sigma2": 0.01, "seed": 7},
            "basis": {"k_max": 1, "n_set": [2, 3], "delays": {"mode": "blind", "max_taps": 1}}
        }"#,
    )
    .expect("built-in config is valid")
}

fn determinism() -> Outcome {
    let cfg = determinism_config();
    let a = render(&simulate(&cfg)?)?;
    let b = render(&simulate(&cfg)?)?;
    let same = a == b;
    Ok((same, format!("{} output files {}", a.len(), if same { "byte-identical" } else { "differ" })))
}

fn csv_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid::new(0.125, 1e-3 / 3.0, 500)?;
    let s = SampledSignal::on_grid(g, random_vec(&mut rng, 500).iter().map(|z| z * 1e5f64.powf(z.re)).collect())?;
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    let back = SampledSignal::read_csv(buf.as_slice())?;
    let same = back.samples() == s.samples();
    Ok((same, format!("{} samples {}", s.len(), if same { "bit-exact" } else { "changed" })))
}

fn config_echo() -> Outcome {
    let cfg = determinism_config();
    let back = ExperimentConfig::from_json(&cfg.to_json()?)?;
    Ok((back == cfg, "config re-parses to an equal value".into()))
}

pub fn run_verify(opts: VerifyOptions) -> VerifySummary {
    let start = Instant::now();
    type Check = Box<dyn Fn() -> Outcome>;
    let checks: Vec<(&str, Check)> = vec![
        ("psi1_minus_cancellation", Box::new(move || psi1_minus_cancellation(opts))),
        ("classical_tk_value", Box::new(classical_tk_value)),
        ("chain_rule_convergence", Box::new(chain_rule_order)),
        ("power_rule_identity", Box::new(lemma0_instance)),
        ("energy_closed_form", Box::new(energy_closed_form)),
        ("collinear_rank", Box::new(collinear_rank)),
        ("noiseless_recovery", Box::new(noiseless_recovery)),
        ("noisy_blind_recovery", Box::new(noisy_recovery)),
        ("snr_reduction", Box::new(snr_reduction)),
        ("l0_detection", Box::new(l0_detection)),
        ("determinism", Box::new(determinism)),
        ("csv_round_trip", Box::new(csv_round_trip)),
        ("config_echo", Box::new(config_echo)),
    ];
    let mut results = Vec::new();
    for (name, check) in checks {
        let t = Instant::now();
        let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        log::debug!("{name}: {passed} ({detail})");
        results.push(CheckResult { name: name.into(), passed, detail, elapsed_ms: t.elapsed().as_secs_f64() * 1e3 });
    }
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    results.push(CheckResult {
        name: "suite_runtime".into(),
        passed: total_ms <= RUNTIME_BUDGET_S * 1e3,
        detail: format!("{:.2} s (limit {RUNTIME_BUDGET_S} s)", total_ms / 1e3),
        elapsed_ms: 0.0,
    });
    VerifySummary { passed: results.iter().all(|c| c.passed), checks: results, total_ms }
}
