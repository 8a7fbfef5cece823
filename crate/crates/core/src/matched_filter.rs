//! Noise covariance estimation and matched-filter SNR.
//!
//! `SNR = |hᴴF|² / (hᴴ R h)` is maximized by `h = R⁻¹F`, where it reduces to
//! `Fᴴ R⁻¹ F`. Per-subchannel templates are Hadamard powers `f(n) = f ⊙ … ⊙ f`
//! of the sampled template; the stacked template uses block-diagonal `R`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::check_powers;
use crate::error::{Error, Result};
use crate::signal::{Grid, SampledSignal};
use crate::signal_space::{eval_family, Family};

/// Relative diagonal loading, scaled by `trace / dim`.
pub const LOADING_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceForm {
    Diagonal,
    Dense,
}

#[derive(Debug, Clone)]
enum Repr {
    Diagonal(f64),
    Dense { matrix: DMatrix<Complex64>, chol: Cholesky<Complex64, Dyn> },
}

// Complex square roots never fail, so a negative pivot shows up as an
// imaginary diagonal entry of L instead of a factorization error.
fn positive_pivots(chol: &Cholesky<Complex64, Dyn>) -> bool {
    let l = chol.l_dirty();
    (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-8 * d.re
    })
}

#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    repr: Repr,
    dim: usize,
    loading: f64,
}

impl NoiseCovariance {
    /// `σ² I` of the given dimension.
    pub fn diagonal(sigma2: f64, dim: usize) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::DegenerateCovariance(format!("diagonal form needs sigma2 > 0 (got {sigma2})")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("covariance dimension must be >= 1".into()));
        }
        Ok(NoiseCovariance { repr: Repr::Diagonal(sigma2), dim, loading: 0.0 })
    }

    /// Dense Hermitian positive-definite matrix; fails if not factorable.
    pub fn dense(matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::dense_loaded(matrix, false)
    }

    fn dense_loaded(matrix: DMatrix<Complex64>, force_loading: bool) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "covariance must be square and nonempty (got {}x{})",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-10 * scale {
            return Err(Error::InvalidArgument("covariance is not Hermitian".into()));
        }
        let matrix = (&matrix + matrix.adjoint()).map(|z| z * 0.5);
        let trace: f64 = (0..dim).map(|i| matrix[(i, i)].re).sum();
        if !(trace > 0.0) {
            return Err(Error::DegenerateCovariance("covariance has nonpositive trace".into()));
        }
        let loading = LOADING_REL * trace / dim as f64;
        let factor = |m: &DMatrix<Complex64>| Cholesky::new(m.clone()).filter(positive_pivots);
        let plain = if force_loading { None } else { factor(&matrix) };
        match plain {
            Some(chol) => Ok(NoiseCovariance { repr: Repr::Dense { matrix, chol }, dim, loading: 0.0 }),
            None => {
                let loaded = &matrix + DMatrix::<Complex64>::identity(dim, dim).map(|z| z * loading);
                let chol = factor(&loaded)
                    .ok_or_else(|| Error::DegenerateCovariance("covariance is not positive definite".into()))?;
                Ok(NoiseCovariance { repr: Repr::Dense { matrix: loaded, chol }, dim, loading })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> CovarianceForm {
        match self.repr {
            Repr::Diagonal(_) => CovarianceForm::Diagonal,
            Repr::Dense { .. } => CovarianceForm::Dense,
        }
    }

    /// Diagonal loading added to the estimate (0 when none was needed).
    pub fn loading(&self) -> f64 {
        self.loading
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self.repr {
            Repr::Diagonal(s) => Some(s),
            Repr::Dense { .. } => None,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        match &self.repr {
            Repr::Diagonal(s) => DMatrix::identity(self.dim, self.dim).map(|z: Complex64| z * *s),
            Repr::Dense { matrix, .. } => matrix.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match &self.repr {
            Repr::Diagonal(s) => Self::diagonal(s * factor, self.dim),
            Repr::Dense { matrix, .. } => {
                let mut out = Self::dense(matrix.map(|z| z * factor))?;
                out.loading = self.loading * factor;
                Ok(out)
            }
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: len });
        }
        Ok(())
    }

    /// `R x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(x.len())?;
        Ok(match &self.repr {
            Repr::Diagonal(s) => x.iter().map(|z| z * *s).collect(),
            Repr::Dense { matrix, .. } => (matrix * DVector::from_column_slice(x)).iter().copied().collect(),
        })
    }

    /// `R⁻¹ x` through the Cholesky factor.
    pub fn solve(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(x.len())?;
        Ok(match &self.repr {
            Repr::Diagonal(s) => x.iter().map(|z| z / *s).collect(),
            Repr::Dense { chol, .. } => chol.solve(&DVector::from_column_slice(x)).iter().copied().collect(),
        })
    }
}

/// Sample estimate of `E{ννᴴ}` from noise realizations.
pub fn estimate_noise_cov(noise: &[SampledSignal], form: CovarianceForm) -> Result<NoiseCovariance> {
    let first = noise.first().ok_or_else(|| Error::InvalidArgument("no noise realizations".into()))?;
    let dim = first.len();
    for s in noise {
        if s.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
        }
    }
    let count = noise.len() as f64;
    match form {
        CovarianceForm::Diagonal => {
            let power: f64 = noise.iter().map(|s| s.norm2().powi(2)).sum();
            let sigma2 = power / (count * dim as f64);
            if sigma2 == 0.0 {
                return Err(Error::DegenerateCovariance("noise realizations are identically zero".into()));
            }
            NoiseCovariance::diagonal(sigma2, dim)
        }
        CovarianceForm::Dense => {
            let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
            for s in noise {
                let v = DVector::from_column_slice(s.samples());
                acc += &v * v.adjoint();
            }
            acc /= Complex64::new(count, 0.0);
            if acc.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                return Err(Error::DegenerateCovariance("noise realizations are identically zero".into()));
            }
            NoiseCovariance::dense_loaded(acc, noise.len() < dim)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Family { family: Family, n: u32 },
    Stacked { n_set: Vec<u32> },
    Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateVector {
    pub entries: Vec<Complex64>,
    pub provenance: Provenance,
}

impl TemplateVector {
    pub fn from_samples(entries: Vec<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(TemplateVector { entries, provenance: Provenance::Samples })
    }

    /// `f(n)`: the n-th Hadamard power of the sampled `f`.
    pub fn family_power(family: &Family, n: u32, grid: &Grid) -> Result<Self> {
        let f = eval_family(family, 1, grid)?;
        Ok(TemplateVector {
            entries: f.powi(n as i32).into_samples(),
            provenance: Provenance::Family { family: *family, n },
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterVector {
    pub entries: Vec<Complex64>,
}

impl FilterVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(Error::ZeroFilter);
        }
        Ok(FilterVector { entries })
    }

    /// The SNR-maximizing filter `R⁻¹F`.
    pub fn matched(f: &TemplateVector, r: &NoiseCovariance) -> Result<Self> {
        FilterVector::new(r.solve(&f.entries)?)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|hᴴF|² / (hᴴ R h)`.
pub fn snr_ratio(h: &FilterVector, f: &TemplateVector, r: &NoiseCovariance) -> Result<f64> {
    r.check_dim(f.entries.len())?;
    let rh = r.apply(&h.entries)?;
    let denom = dot(&h.entries, &rh).re;
    if !(denom > 0.0) {
        return Err(Error::ZeroFilter);
    }
    Ok(dot(&h.entries, &f.entries).norm_sqr() / denom)
}

/// `Fᴴ R⁻¹ F`.
pub fn snr_quadratic(f: &TemplateVector, r: &NoiseCovariance) -> Result<f64> {
    if let Some(s) = r.sigma2() {
        r.check_dim(f.entries.len())?;
        return Ok(f.norm_sqr() / s);
    }
    let w = r.solve(&f.entries)?;
    Ok(dot(&f.entries, &w).re.max(0.0))
}

/// Whitened matched-filter statistic `(R⁻¹F)ᴴ r`.
pub fn matched_filter_output(r: &SampledSignal, f: &TemplateVector, cov: &NoiseCovariance) -> Result<Complex64> {
    if r.len() != f.entries.len() {
        return Err(Error::DimensionMismatch { expected: f.entries.len(), got: r.len() });
    }
    let w = cov.solve(&f.entries)?;
    Ok(dot(&w, r.samples()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrForm {
    Ratio,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub snr_total: f64,
    pub per_n: BTreeMap<u32, f64>,
    pub noise_form: CovarianceForm,
    pub loading_applied: f64,
    pub form_used: SnrForm,
    /// Stacked-template covariance layout.
    pub stacked_covariance: String,
}

/// `SNR_n = f(n)ᴴ R⁻¹ f(n)` for each `n`, and the stacked total.
pub fn snr_subchannel(family: &Family, n_set: &BTreeSet<u32>, grid: &Grid, r: &NoiseCovariance) -> Result<SnrReport> {
    check_powers(n_set)?;
    r.check_dim(grid.len)?;
    let mut per_n = BTreeMap::new();
    for &n in n_set {
        let f = TemplateVector::family_power(family, n, grid)?;
        per_n.insert(n, snr_quadratic(&f, r)?);
    }
    Ok(SnrReport {
        snr_total: per_n.values().sum(),
        per_n,
        noise_form: r.form(),
        loading_applied: r.loading(),
        form_used: SnrForm::Quadratic,
        stacked_covariance: "block_diagonal".into(),
    })
}
