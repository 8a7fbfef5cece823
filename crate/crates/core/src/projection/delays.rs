//! Blind delay search by successive cancellation.
//!
//! At every integer lag the residual is projected onto the span of
//! `∂^k f^n(t - lag·dt)`, `k = 0..=k_max`; the lag with the largest projected
//! energy is accepted when it clears a chi-square false-alarm threshold, its
//! subspace is fitted and subtracted, and the search repeats. With `k_max = 0`
//! the statistic is the squared normalized cross-correlation against `f^n`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_basis, solve_projection, BasisSpec, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::signal_space::Family;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelaySearch {
    pub max_taps: usize,
    /// Minimum spacing between returned delays, seconds.
    pub min_separation: f64,
    /// Highest derivative order in the per-lag subspace.
    pub k_max: usize,
    /// Probability that pure noise yields a detection.
    pub false_alarm: f64,
}

impl Default for DelaySearch {
    fn default() -> Self {
        DelaySearch { max_taps: 1, min_separation: 0.0, k_max: 0, false_alarm: 1e-3 }
    }
}

impl DelaySearch {
    pub fn validate(&self) -> Result<()> {
        if self.max_taps == 0 {
            return Err(Error::InvalidArgument("max_taps must be >= 1".into()));
        }
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return Err(Error::InvalidArgument("min_separation must be finite and >= 0".into()));
        }
        if !(self.false_alarm > 0.0 && self.false_alarm < 1.0) {
            return Err(Error::InvalidArgument("false_alarm must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

// Laurent-Massart: P(χ²_d ≥ d + 2√(d x) + 2x) ≤ e^{-x}.
fn chi_square_threshold(dof: usize, x: f64) -> f64 {
    let d = dof as f64;
    d + 2.0 * (d * x).sqrt() + 2.0 * x
}

struct LagScan {
    energy: Vec<f64>,
    rank: Vec<usize>,
}

/// Projected energy of `r` at every lag. `h[a][j + len - 1]` holds
/// `∂^a f^n(t0 + j dt)` for `j ∈ (-len, len)`.
fn scan(h: &[Vec<f64>], r: &[Complex64]) -> LagScan {
    let len = r.len();
    let m = h.len();
    let mut energy = vec![0.0; len];
    let mut rank = vec![0; len];
    for l in 0..len {
        let base = len - 1 - l;
        let mut gram = DMatrix::<f64>::zeros(m, m);
        let mut b = vec![Complex64::new(0.0, 0.0); m];
        for a in 0..m {
            let ha = &h[a][base..base + len];
            b[a] = ha.iter().zip(r).map(|(x, y)| y * x).sum();
            for c in a..m {
                let v: f64 = ha.iter().zip(&h[c][base..base + len]).map(|(x, y)| x * y).sum();
                gram[(a, c)] = v;
                gram[(c, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            continue;
        }
        let mut e = 0.0;
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 1e-10 * top {
                continue;
            }
            let proj: Complex64 = (0..m).map(|a| b[a] * eig.eigenvectors[(a, i)]).sum();
            e += proj.norm_sqr() / lambda;
            rank[l] += 1;
        }
        energy[l] = e;
    }
    LagScan { energy, rank }
}

/// Estimated echo delays of `f^n` in `r`, ascending, at most `max_taps`.
pub fn estimate_delays(r: &SampledSignal, family: &Family, n: u32, search: &DelaySearch) -> Result<Vec<f64>> {
    family.validate()?;
    search.validate()?;
    let grid = r.grid();
    let len = grid.len;
    let dt = grid.dt;
    let complex = !r.is_real();

    let h: Vec<Vec<f64>> = (0..=search.k_max)
        .map(|k| {
            let df = family.derivative_fn(n, k);
            (0..2 * len - 1).map(|j| df.eval(grid.t0 + (j as f64 - (len - 1) as f64) * dt)).collect()
        })
        .collect();
    let x = (len as f64 / search.false_alarm).ln();

    let total = r.norm2().powi(2);
    let mut residual = r.samples().to_vec();
    let mut found: Vec<f64> = Vec::new();
    while found.len() < search.max_taps {
        let res_energy: f64 = residual.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 || res_energy <= 1e-20 * total {
            break;
        }
        let LagScan { energy, rank } = scan(&h, &residual);
        let allowed =
            |l: usize| found.iter().all(|&tau| (l as f64 * dt - tau).abs() >= search.min_separation.max(0.5 * dt));
        let mut best: Option<usize> = None;
        for l in 0..len {
            if allowed(l) && rank[l] > 0 && best.is_none_or(|b| energy[l] > energy[b]) {
                best = Some(l);
            }
        }
        let Some(l) = best else { break };

        let dof = if complex { 2 * rank[l] } else { rank[l] };
        let rest = res_energy - energy[l];
        let sigma2 = rest / (len - rank[l]).max(1) as f64;
        let stat = if complex { 2.0 * energy[l] } else { energy[l] };
        let explained = rest <= 1e-12 * res_energy;
        if !explained && stat < sigma2 * chi_square_threshold(dof, x) {
            break;
        }

        let mut delta = 0.0;
        if !explained && l > 0 && l + 1 < len {
            let (em, e0, ep) = (energy[l - 1], energy[l], energy[l + 1]);
            let curv = em - 2.0 * e0 + ep;
            if curv < 0.0 {
                delta = (0.5 * (em - ep) / curv).clamp(-0.5, 0.5);
            }
            if delta.abs() < 1e-9 {
                delta = 0.0;
            }
        }
        let tau = ((l as f64 + delta) * dt).clamp(0.0, grid.span());
        let mut n_set = std::collections::BTreeSet::new();
        n_set.insert(n);
        let basis = build_basis(&BasisSpec { family: *family, k_max: search.k_max, n_set, delays: vec![tau] }, &grid)?;
        let current = SampledSignal::on_grid(grid, residual.clone())?;
        let fit = solve_projection(&current, &basis, DEFAULT_RANK_TOL)?;
        let fitted = basis.fitted(&fit)?;
        for (z, f) in residual.iter_mut().zip(fitted.samples()) {
            *z -= f;
        }
        found.push(tau);
    }
    found.sort_by(f64::total_cmp);
    Ok(found)
}
