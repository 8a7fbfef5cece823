//! Experiment configuration read from JSON.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ClassicalTap, DerivativeTap, SalehValenzuelaParams};
use crate::error::{Error, Result};
use crate::matched_filter::CovarianceForm;
use crate::projection::DEFAULT_RANK_TOL;
use crate::signal::Grid;
use crate::signal_space::{Family, DEFAULT_EPSILON_REL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub grid: Grid,
    /// Power of `f` used as the transmitted template; defaults to the smallest
    /// basis power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_power: Option<u32>,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub basis: BasisConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<CovarianceSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Single unit tap at zero delay.
    Identity,
    Classical {
        taps: Vec<ClassicalTap>,
    },
    Derivative {
        /// Defaults to the basis powers.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_set: Option<BTreeSet<u32>>,
        taps: Vec<DerivativeTap>,
    },
    SalehValenzuela {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cluster_rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ray_rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cluster_decay: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ray_decay: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_delay: Option<f64>,
    },
}

impl ChannelSpec {
    pub fn sv_params(&self) -> Option<SalehValenzuelaParams> {
        match *self {
            ChannelSpec::SalehValenzuela { seed, cluster_rate, ray_rate, cluster_decay, ray_decay, max_delay } => {
                let d = SalehValenzuelaParams::indoor(seed.unwrap_or(0));
                Some(SalehValenzuelaParams {
                    cluster_rate: cluster_rate.unwrap_or(d.cluster_rate),
                    ray_rate: ray_rate.unwrap_or(d.ray_rate),
                    cluster_decay: cluster_decay.unwrap_or(d.cluster_decay),
                    ray_decay: ray_decay.unwrap_or(d.ray_decay),
                    max_delay: max_delay.unwrap_or(d.max_delay),
                    seed: d.seed,
                })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KMax {
    Fixed(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayMode {
    /// Delays of the configured channel taps.
    Truth,
    Known {
        values: Vec<f64>,
    },
    Blind {
        max_taps: usize,
        #[serde(default)]
        min_separation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub k_max: KMax,
    pub n_set: BTreeSet<u32>,
    #[serde(default = "default_delays")]
    pub delays: DelayMode,
}

fn default_delays() -> DelayMode {
    DelayMode::Truth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rank_tol: f64,
    pub epsilon_rel: f64,
    pub taylor_rel: f64,
    pub false_alarm: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank_tol: DEFAULT_RANK_TOL,
            epsilon_rel: DEFAULT_EPSILON_REL,
            taylor_rel: 1e-6,
            false_alarm: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Diagonal {
        sigma2: f64,
    },
    /// `σ² ρ^{|i-j|}`.
    Ar1 {
        sigma2: f64,
        rho: f64,
    },
    /// Sample estimate from seeded white-noise realizations.
    Estimated {
        form: CovarianceForm,
        sigma2: f64,
        realizations: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replaces every seed with one derived from `seed`: noise `seed`,
    /// channel `seed + 1`, covariance estimate `seed + 2`.
    pub fn override_seed(&mut self, seed: u64) {
        self.noise.seed = Some(seed);
        if let ChannelSpec::SalehValenzuela { seed: s, .. } = &mut self.channel {
            *s = Some(seed.wrapping_add(1));
        }
        if let Some(CovarianceSpec::Estimated { seed: s, .. }) = &mut self.snr {
            *s = Some(seed.wrapping_add(2));
        }
    }

    pub fn template_power(&self) -> u32 {
        self.template_power.unwrap_or_else(|| self.basis.n_set.iter().next().copied().unwrap_or(2))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| config_err(e.to_string());
        self.family.validate().map_err(wrap)?;
        self.grid.validate().map_err(wrap)?;
        if self.grid.t0 < 0.0 {
            return Err(config_err("grid.t0 must be >= 0"));
        }
        if self.basis.n_set.is_empty() || self.basis.n_set.iter().any(|&n| n < 2) {
            return Err(config_err("basis.n_set must be nonempty with every n > 1"));
        }
        if let KMax::Fixed(k) = self.basis.k_max {
            if k > crate::energy_ops::MAX_DERIVATIVE_ORDER {
                return Err(config_err(format!("basis.k_max {k} exceeds 12")));
            }
        }
        if self.template_power() == 0 {
            return Err(config_err("template_power must be >= 1"));
        }
        let s = self.solver;
        for (name, v) in [
            ("rank_tol", s.rank_tol),
            ("epsilon_rel", s.epsilon_rel),
            ("taylor_rel", s.taylor_rel),
            ("false_alarm", s.false_alarm),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(format!("solver.{name} must lie in (0, 1) (got {v})")));
            }
        }
        if !(self.noise.sigma2.is_finite() && self.noise.sigma2 >= 0.0) {
            return Err(config_err("noise.sigma2 must be finite and >= 0"));
        }
        if self.noise.sigma2 > 0.0 && self.noise.seed.is_none() {
            return Err(config_err("noise.seed is required when noise.sigma2 > 0"));
        }
        match &self.channel {
            ChannelSpec::SalehValenzuela { seed, .. } => {
                if seed.is_none() {
                    return Err(config_err("channel.seed is required for the saleh_valenzuela channel"));
                }
                self.channel.sv_params().expect("sv channel").validate().map_err(wrap)?;
            }
            ChannelSpec::Derivative { n_set: Some(ns), .. } if ns.is_empty() || ns.iter().any(|&n| n < 2) => {
                return Err(config_err("channel.n_set must be nonempty with every n > 1"));
            }
            _ => {}
        }
        match &self.basis.delays {
            DelayMode::Blind { max_taps, min_separation } => {
                if *max_taps == 0 || !(min_separation.is_finite() && *min_separation >= 0.0) {
                    return Err(config_err("blind delays need max_taps >= 1 and min_separation >= 0"));
                }
            }
            DelayMode::Known { values } if values.is_empty() => {
                return Err(config_err("basis.delays.values must not be empty"));
            }
            _ => {}
        }
        if let Some(cov) = &self.snr {
            let (sigma2, ok) = match *cov {
                CovarianceSpec::Diagonal { sigma2 } => (sigma2, true),
                CovarianceSpec::Ar1 { sigma2, rho } => (sigma2, rho.abs() < 1.0),
                CovarianceSpec::Estimated { sigma2, realizations, seed, .. } => {
                    if seed.is_none() {
                        return Err(config_err("snr.seed is required for an estimated covariance"));
                    }
                    (sigma2, realizations > 0)
                }
            };
            if !(sigma2.is_finite() && sigma2 > 0.0 && ok) {
                return Err(config_err("snr covariance needs sigma2 > 0, |rho| < 1 and realizations >= 1"));
            }
        }
        Ok(())
    }

    /// Covariance used for SNR: the explicit `snr` block, or `σ² I` from the
    /// noise model when that is nonzero.
    pub fn covariance_spec(&self) -> Option<CovarianceSpec> {
        self.snr.or((self.noise.sigma2 > 0.0).then_some(CovarianceSpec::Diagonal { sigma2: self.noise.sigma2 }))
    }
}
