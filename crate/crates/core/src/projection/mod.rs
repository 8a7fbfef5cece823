//! Projection of a received signal onto the derivative basis
//! `[∂_t^k f^n(t - τ_l)]`.
//!
//! The basis is realized as a design matrix of analytic, unit-normalized
//! columns. The least-squares fit uses Householder QR with column pivoting;
//! pivots below `rank_tol` times the first pivot end the factorization and
//! the remaining columns are reported as dropped. With that support fixed the
//! problem is an ordinary convex least-squares fit.

mod delays;
mod qr;

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::check_powers;
use crate::energy_ops::MAX_DERIVATIVE_ORDER;
use crate::error::{Error, Result};
use crate::signal::{Grid, SampledSignal};
use crate::signal_space::{l0_from_sups, Family, L0Bound};

pub use delays::{estimate_delays, DelaySearch};
use qr::PivotedQr;

/// Default relative pivot tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: Family,
    pub k_max: usize,
    pub n_set: BTreeSet<u32>,
    pub delays: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub k: usize,
    pub n: u32,
    pub tau: f64,
    /// Norm of the column before normalization (0 for an all-zero column).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    grid: Grid,
    meta: Vec<ColumnMeta>,
    /// Unit-norm columns (or zero columns when `scale == 0`).
    columns: Vec<Vec<Complex64>>,
}

impl DesignMatrix {
    /// Builds a design matrix from raw columns, normalizing each one.
    pub fn from_columns(grid: Grid, columns: Vec<((usize, u32, f64), Vec<Complex64>)>) -> Result<Self> {
        grid.validate()?;
        let mut meta = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for ((k, n, tau), mut col) in columns {
            if col.len() != grid.len {
                return Err(Error::DimensionMismatch { expected: grid.len, got: col.len() });
            }
            if col.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite);
            }
            let scale = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if scale > 0.0 {
                for z in col.iter_mut() {
                    *z /= scale;
                }
            }
            meta.push(ColumnMeta { k, n, tau, scale });
            cols.push(col);
        }
        Ok(DesignMatrix { grid, meta, columns: cols })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn rows(&self) -> usize {
        self.grid.len
    }

    pub fn column_count(&self) -> usize {
        self.meta.len()
    }

    pub fn meta(&self) -> &[ColumnMeta] {
        &self.meta
    }

    pub fn normalized_column(&self, i: usize) -> &[Complex64] {
        &self.columns[i]
    }

    /// Column `i` in original units.
    pub fn raw_column(&self, i: usize) -> Vec<Complex64> {
        let s = self.meta[i].scale;
        self.columns[i].iter().map(|z| z * s).collect()
    }

    /// `A β` for the coefficients of a projection result.
    pub fn fitted(&self, result: &ProjectionResult) -> Result<SampledSignal> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.rows()];
        for c in &result.coefficients {
            let raw = self.raw_column(c.column);
            let beta = c.beta();
            for (a, z) in acc.iter_mut().zip(raw) {
                *a += beta * z;
            }
        }
        SampledSignal::on_grid(self.grid, acc)
    }
}

pub fn build_basis(spec: &BasisSpec, grid: &Grid) -> Result<DesignMatrix> {
    spec.family.validate()?;
    grid.validate()?;
    check_powers(&spec.n_set)?;
    if spec.k_max > MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh { order: spec.k_max, max: MAX_DERIVATIVE_ORDER });
    }
    if spec.delays.is_empty() {
        return Err(Error::EmptyBasis);
    }
    for &tau in &spec.delays {
        if !(tau.is_finite() && tau >= 0.0 && tau <= grid.span() * (1.0 + 1e-12)) {
            return Err(Error::DelayOutOfSpan { delay: tau, span: grid.span() });
        }
    }
    let mut columns = Vec::new();
    for &tau in &spec.delays {
        for &n in &spec.n_set {
            for k in 0..=spec.k_max {
                let col = spec
                    .family
                    .sample_derivative(n, k, grid, tau)
                    .into_iter()
                    .map(|v| Complex64::new(v, 0.0))
                    .collect();
                columns.push(((k, n, tau), col));
            }
        }
    }
    DesignMatrix::from_columns(*grid, columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    /// Index of the column in the design matrix.
    pub column: usize,
    pub k: usize,
    pub n: u32,
    pub tau: f64,
    pub beta_re: f64,
    pub beta_im: f64,
}

impl Coefficient {
    pub fn beta(&self) -> Complex64 {
        Complex64::new(self.beta_re, self.beta_im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Pivot fell below the rank tolerance (collinear with retained columns).
    RankTolerance,
    /// Column is identically zero.
    ZeroColumn,
    /// Target is identically zero.
    ZeroTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: usize,
    pub k: usize,
    pub n: u32,
    pub tau: f64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    #[serde(rename = "columns")]
    pub coefficients: Vec<Coefficient>,
    /// `‖r - A β‖₂` recomputed from the returned coefficients.
    pub residual: f64,
    #[serde(rename = "rank")]
    pub numerical_rank: usize,
    pub dropped: Vec<DroppedColumn>,
    /// Ratio of the first to the last accepted pivot magnitude.
    pub condition_estimate: f64,
}

impl ProjectionResult {
    /// Result with no fitted columns; the residual is the target norm.
    pub fn empty(target_norm: f64) -> Self {
        ProjectionResult {
            coefficients: Vec::new(),
            residual: target_norm,
            numerical_rank: 0,
            dropped: Vec::new(),
            condition_estimate: 0.0,
        }
    }

    /// Coefficient of the column with the given `(k, n)` at delay `tau`.
    pub fn beta_of(&self, k: usize, n: u32, tau: f64) -> Option<Complex64> {
        self.coefficients.iter().find(|c| c.k == k && c.n == n && c.tau == tau).map(Coefficient::beta)
    }
}

/// Minimizes `‖A β - r‖₂` over the columns retained by pivoted QR.
pub fn solve_projection(r: &SampledSignal, a: &DesignMatrix, rank_tol: f64) -> Result<ProjectionResult> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must lie in (0, 1) (got {rank_tol})")));
    }
    if a.column_count() == 0 {
        return Err(Error::EmptyBasis);
    }
    if r.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: r.len() });
    }
    let drop = |i: usize, reason| {
        let m = a.meta[i];
        DroppedColumn { column: i, k: m.k, n: m.n, tau: m.tau, reason }
    };

    let (live, zero): (Vec<usize>, Vec<usize>) = (0..a.column_count()).partition(|&i| a.meta[i].scale > 0.0);
    let mut dropped: Vec<DroppedColumn> = zero.iter().map(|&i| drop(i, DropReason::ZeroColumn)).collect();
    let live_cols: Vec<Vec<Complex64>> = live.iter().map(|&i| a.columns[i].clone()).collect();
    let qr = PivotedQr::factor(&live_cols, r.samples(), rank_tol);
    let rank = qr.rank;
    let condition_estimate = if rank == 0 { 0.0 } else { qr.diag(0).norm() / qr.diag(rank - 1).norm() };

    if r.norm2() == 0.0 {
        dropped.extend(live.iter().map(|&i| drop(i, DropReason::ZeroTarget)));
        dropped.sort_by_key(|d| d.column);
        return Ok(ProjectionResult {
            coefficients: Vec::new(),
            residual: 0.0,
            numerical_rank: rank,
            dropped,
            condition_estimate,
        });
    }

    let beta_norm = qr.solve();
    let mut coefficients: Vec<Coefficient> = (0..rank)
        .map(|j| {
            let col = live[qr.perm[j]];
            let m = a.meta[col];
            let beta = beta_norm[j] / m.scale;
            Coefficient { column: col, k: m.k, n: m.n, tau: m.tau, beta_re: beta.re, beta_im: beta.im }
        })
        .collect();
    coefficients.sort_by_key(|c| c.column);
    dropped.extend(qr.perm[rank..].iter().map(|&j| drop(live[j], DropReason::RankTolerance)));
    dropped.sort_by_key(|d| d.column);

    let mut result =
        ProjectionResult { coefficients, residual: 0.0, numerical_rank: rank, dropped, condition_estimate };
    let fitted = a.fitted(&result)?;
    result.residual = r.samples().iter().zip(fitted.samples()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    Ok(result)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Derivative-order bound read from the power-rule factorization
/// `∂^l f^n = (n/2) ∂^{l-1}(f^{n-2} Ψ_1^+(f))`, expanded with Leibniz's rule
/// over closed-form derivatives of `f^{n-2}` and `Ψ_1^+(f) = ∂(f²)`.
/// Returns the largest bound over `n_set`.
pub fn truncate_orders(family: &Family, n_set: &BTreeSet<u32>, grid: &Grid, epsilon_rel: f64) -> Result<L0Bound> {
    family.validate()?;
    grid.validate()?;
    check_powers(n_set)?;
    if !(epsilon_rel > 0.0 && epsilon_rel < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon_rel must lie in (0, 1) (got {epsilon_rel})")));
    }
    let mut out = L0Bound { l0: 0, saturated: false };
    for &n in n_set {
        let alpha = n as f64 / 2.0;
        let reference = family.sample_derivative(n, 0, grid, 0.0).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let outer: Vec<Vec<f64>> =
            (0..MAX_DERIVATIVE_ORDER).map(|j| family.sample_derivative(n - 2, j, grid, 0.0)).collect();
        let psi1: Vec<Vec<f64>> =
            (0..MAX_DERIVATIVE_ORDER).map(|j| family.sample_derivative(2, j + 1, grid, 0.0)).collect();
        let mut sups = vec![reference];
        for l in 1..=MAX_DERIVATIVE_ORDER {
            let sup = (0..grid.len)
                .map(|i| {
                    let v: f64 = (0..l).map(|j| binomial(l - 1, j) * outer[l - 1 - j][i] * psi1[j][i]).sum();
                    (alpha * v).abs()
                })
                .fold(0.0, f64::max);
            sups.push(sup);
        }
        let b = l0_from_sups(&sups, reference, epsilon_rel);
        out.l0 = out.l0.max(b.l0);
        out.saturated |= b.saturated;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
