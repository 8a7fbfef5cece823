//! Config-driven pipelines: template, channel, decomposition, SNR.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{ChannelSpec, CovarianceSpec, DelayMode, ExperimentConfig, KMax};
use crate::channel::{
    apply_classical_channel, apply_derivative_channel, gen_awgn, gen_saleh_valenzuela, ClassicalTap, DerivativeTap,
    NoiseModel,
};
use crate::error::{Error, Result};
use crate::matched_filter::{estimate_noise_cov, snr_subchannel, NoiseCovariance, SnrReport};
use crate::projection::{
    build_basis, estimate_delays, solve_projection, truncate_orders, BasisSpec, DelaySearch, ProjectionResult,
};
use crate::signal::SampledSignal;
use crate::signal_space::{check_membership, eval_family, MembershipReport, MembershipTolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub noise: Option<u64>,
    pub channel: Option<u64>,
    pub covariance: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub k_max_effective: usize,
    /// Set when `k_max` was derived and hit the order cap.
    pub k_max_saturated: bool,
    pub delay_mode: String,
    pub delays: Vec<f64>,
    /// Absent when blind search found no delays.
    pub projection: Option<ProjectionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    pub decomposition: Decomposition,
    pub snr: Option<SnrReport>,
    pub membership: Vec<MembershipReport>,
}

/// Wall-clock stage timings in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages_ms: BTreeMap<String, f64>,
    pub total_ms: f64,
}

impl Timing {
    fn record<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        self.stages_ms.insert(stage.into(), ms);
        self.total_ms += ms;
        out
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub template: SampledSignal,
    pub received: SampledSignal,
    pub taps: Vec<DerivativeTap>,
    pub report: RunReport,
    pub timing: Timing,
}

pub fn seeds(cfg: &ExperimentConfig) -> Seeds {
    Seeds {
        noise: cfg.noise.seed,
        channel: match cfg.channel {
            ChannelSpec::SalehValenzuela { seed, .. } => seed,
            _ => None,
        },
        covariance: match cfg.snr {
            Some(CovarianceSpec::Estimated { seed, .. }) => seed,
            _ => None,
        },
    }
}

pub fn template(cfg: &ExperimentConfig) -> Result<SampledSignal> {
    eval_family(&cfg.family, cfg.template_power(), &cfg.grid)
}

fn classical_taps(cfg: &ExperimentConfig) -> Result<Option<Vec<ClassicalTap>>> {
    Ok(match &cfg.channel {
        ChannelSpec::Identity => Some(vec![ClassicalTap { amplitude: 1.0, phase: 0.0, delay: 0.0 }]),
        ChannelSpec::Classical { taps } => Some(taps.clone()),
        ChannelSpec::SalehValenzuela { .. } => {
            Some(gen_saleh_valenzuela(&cfg.channel.sv_params().expect("sv channel"))?)
        }
        ChannelSpec::Derivative { .. } => None,
    })
}

/// Channel taps in derivative form; classical taps become order-0 taps.
pub fn channel_taps(cfg: &ExperimentConfig) -> Result<Vec<DerivativeTap>> {
    match (&cfg.channel, classical_taps(cfg)?) {
        (_, Some(taps)) => Ok(taps.iter().map(DerivativeTap::from).collect()),
        (ChannelSpec::Derivative { taps, .. }, None) => Ok(taps.clone()),
        _ => unreachable!("every channel kind yields taps"),
    }
}

fn noise_model(cfg: &ExperimentConfig) -> NoiseModel {
    NoiseModel { sigma2: cfg.noise.sigma2, seed: cfg.noise.seed.unwrap_or(0) }
}

pub fn received(cfg: &ExperimentConfig, template: &SampledSignal) -> Result<SampledSignal> {
    let noise = noise_model(cfg);
    match (&cfg.channel, classical_taps(cfg)?) {
        (_, Some(taps)) => apply_classical_channel(template, &taps, &noise),
        (ChannelSpec::Derivative { n_set, taps }, None) => {
            let n_set = n_set.as_ref().unwrap_or(&cfg.basis.n_set);
            apply_derivative_channel(&cfg.family, n_set, taps, &noise, &cfg.grid)
        }
        _ => unreachable!("every channel kind yields taps"),
    }
}

fn resolve_k_max(cfg: &ExperimentConfig) -> Result<(usize, bool)> {
    match cfg.basis.k_max {
        KMax::Fixed(k) => Ok((k, false)),
        KMax::Auto(_) => {
            let b = truncate_orders(&cfg.family, &cfg.basis.n_set, &cfg.grid, cfg.solver.epsilon_rel)?;
            Ok((b.l0, b.saturated))
        }
    }
}

/// Resolves delays and fits the basis to `r`.
pub fn decompose(cfg: &ExperimentConfig, r: &SampledSignal) -> Result<Decomposition> {
    if !r.grid().approx_eq(&cfg.grid, 1e-9) {
        return Err(Error::GridMismatch);
    }
    let r = r.clone().regrid(cfg.grid)?;
    let (k_max, saturated) = resolve_k_max(cfg)?;
    let (mode, delays) = match &cfg.basis.delays {
        DelayMode::Truth => {
            let mut d: Vec<f64> = channel_taps(cfg)?.iter().map(|t| t.delay).collect();
            d.sort_by(f64::total_cmp);
            d.dedup();
            ("truth", d)
        }
        DelayMode::Known { values } => ("known", values.clone()),
        DelayMode::Blind { max_taps, min_separation } => {
            let n = *cfg.basis.n_set.iter().next().expect("validated nonempty");
            let search = DelaySearch {
                max_taps: *max_taps,
                min_separation: *min_separation,
                k_max,
                false_alarm: cfg.solver.false_alarm,
            };
            ("blind", estimate_delays(&r, &cfg.family, n, &search)?)
        }
    };
    log::info!("decomposing with k_max {k_max} and {} {mode} delays", delays.len());
    let projection = if delays.is_empty() {
        None
    } else {
        let spec = BasisSpec { family: cfg.family, k_max, n_set: cfg.basis.n_set.clone(), delays: delays.clone() };
        let a = build_basis(&spec, &cfg.grid)?;
        Some(solve_projection(&r, &a, cfg.solver.rank_tol)?)
    };
    Ok(Decomposition {
        k_max_effective: k_max,
        k_max_saturated: saturated,
        delay_mode: mode.into(),
        delays,
        projection,
    })
}

pub fn covariance(cfg: &ExperimentConfig, spec: &CovarianceSpec) -> Result<NoiseCovariance> {
    let dim = cfg.grid.len;
    match *spec {
        CovarianceSpec::Diagonal { sigma2 } => NoiseCovariance::diagonal(sigma2, dim),
        CovarianceSpec::Ar1 { sigma2, rho } => NoiseCovariance::dense(DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(sigma2 * rho.powi((i as i32 - j as i32).abs()), 0.0)
        })),
        CovarianceSpec::Estimated { form, sigma2, realizations, seed } => {
            let base = seed.ok_or_else(|| Error::Config("snr.seed is required".into()))?;
            let noise = (0..realizations as u64)
                .map(|i| gen_awgn(&cfg.grid, &NoiseModel { sigma2, seed: base.wrapping_add(i) }, false))
                .collect::<Result<Vec<_>>>()?;
            estimate_noise_cov(&noise, form)
        }
    }
}

pub fn snr(cfg: &ExperimentConfig) -> Result<Option<SnrReport>> {
    cfg.covariance_spec()
        .map(|spec| snr_subchannel(&cfg.family, &cfg.basis.n_set, &cfg.grid, &covariance(cfg, &spec)?))
        .transpose()
}

pub fn membership(cfg: &ExperimentConfig) -> Result<Vec<MembershipReport>> {
    let tol = MembershipTolerances { epsilon_rel: cfg.solver.epsilon_rel, taylor_rel: cfg.solver.taylor_rel };
    cfg.basis.n_set.iter().map(|&n| check_membership(&cfg.family, n, &cfg.grid, &tol)).collect()
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let mut timing = Timing::default();
    let template = timing.record("template", || template(cfg))?;
    let taps = timing.record("channel_taps", || channel_taps(cfg))?;
    let received = timing.record("channel", || received(cfg, &template))?;
    let decomposition = timing.record("decompose", || decompose(cfg, &received))?;
    let snr = timing.record("snr", || snr(cfg))?;
    let membership = timing.record("membership", || membership(cfg))?;
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seeds: seeds(cfg),
        decomposition,
        snr,
        membership,
    };
    Ok(Simulation { template, received, taps, report, timing })
}

/// Deterministic output files of a simulation, in write order.
pub fn render(sim: &Simulation) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut template = Vec::new();
    sim.template.write_csv(&mut template)?;
    let mut received = Vec::new();
    sim.received.write_csv(&mut received)?;
    let mut taps = Vec::new();
    crate::channel::write_taps_csv(&sim.taps, &mut taps)?;
    let mut report = serde_json::to_vec_pretty(&sim.report)?;
    report.push(b'\n');
    Ok(vec![("template.csv", template), ("received.csv", received), ("taps.csv", taps), ("report.json", report)])
}
