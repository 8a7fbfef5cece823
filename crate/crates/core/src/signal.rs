//! Uniformly sampled complex signals and their CSV representation.
//!
//! The CSV layout is a `t,re,im` header followed by one row per sample. Values
//! are written with the shortest representation that parses back to the same
//! `f64`, so a write/read cycle is lossless.

use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling grid: `t_i = t0 + i * dt` for `i in 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        let g = Grid { t0, dt, len };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() {
            return Err(Error::InvalidGrid(format!("t0 = {} is not finite", self.t0)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {} must be finite and > 0", self.dt)));
        }
        if self.len < 2 {
            return Err(Error::InvalidGrid(format!("len = {} must be at least 2", self.len)));
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }

    /// Duration covered by the samples, `(len - 1) * dt`.
    pub fn span(&self) -> f64 {
        (self.len - 1) as f64 * self.dt
    }

    /// Grid equality up to a relative tolerance on `t0` and `dt`; used when a
    /// grid is reconstructed from text.
    pub fn approx_eq(&self, other: &Grid, rel: f64) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= rel * scale.max(f64::MIN_POSITIVE);
        self.len == other.len
            && close(self.dt, other.dt, self.dt.abs())
            && close(self.t0, other.t0, self.t0.abs().max(self.dt * self.len as f64))
    }
}

/// A uniformly sampled, possibly complex-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(t0: f64, dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        Self::on_grid(Grid::new(t0, dt, samples.len())?, samples)
    }

    pub fn on_grid(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if grid.len != samples.len() {
            return Err(Error::DimensionMismatch { expected: grid.len, got: samples.len() });
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(SampledSignal { grid, samples })
    }

    pub fn from_real(t0: f64, dt: f64, values: &[f64]) -> Result<Self> {
        Self::new(t0, dt, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f(t)` on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = grid.times().map(f).collect();
        Self::on_grid(grid, samples)
    }

    pub fn zeros(grid: Grid) -> Result<Self> {
        Self::on_grid(grid, vec![Complex64::new(0.0, 0.0); grid.len])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn t0(&self) -> f64 {
        self.grid.t0
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// True when every sample has a zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn is_grid_compatible(&self, other: &SampledSignal) -> bool {
        self.grid == other.grid
    }

    pub fn ensure_compatible(&self, other: &SampledSignal) -> Result<()> {
        if self.is_grid_compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Returns a signal on the same grid with new samples. Internal results
    /// are finite by construction, callers outside the crate go through
    /// [`SampledSignal::on_grid`].
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> SampledSignal {
        debug_assert_eq!(samples.len(), self.samples.len());
        SampledSignal { grid: self.grid, samples }
    }

    /// Replaces the grid, keeping samples. Lengths must agree.
    pub fn regrid(self, grid: Grid) -> Result<SampledSignal> {
        Self::on_grid(grid, self.samples)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> SampledSignal {
        self.with_samples(self.samples.iter().map(|&z| f(z)).collect())
    }

    pub fn scale(&self, lambda: Complex64) -> SampledSignal {
        self.map(|z| lambda * z)
    }

    pub fn powi(&self, n: i32) -> SampledSignal {
        self.map(|z| z.powi(n))
    }

    fn zip_with(&self, other: &SampledSignal, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<SampledSignal> {
        self.ensure_compatible(other)?;
        Ok(self.with_samples(self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn try_add(&self, other: &SampledSignal) -> Result<SampledSignal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &SampledSignal) -> Result<SampledSignal> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product, no conjugation.
    pub fn try_mul(&self, other: &SampledSignal) -> Result<SampledSignal> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max modulus over `margin..len - margin`.
    pub fn interior_max_abs(&self, margin: usize) -> f64 {
        interior(&self.samples, margin).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm2(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "re", "im"])?;
        for (t, z) in self.grid.times().zip(&self.samples) {
            wtr.serialize((t, z.re, z.im))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the `t,re,im` format. The grid is rebuilt from the first and
    /// last time stamps; callers that know the intended grid should compare
    /// with [`Grid::approx_eq`] and [`SampledSignal::regrid`].
    pub fn read_csv<R: Read>(r: R) -> Result<SampledSignal> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "re", "im"] {
            return Err(Error::Config(format!("expected CSV header t,re,im, got {:?}", headers)));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let (t, re, im): (f64, f64, f64) = row?;
            times.push(t);
            samples.push(Complex64::new(re, im));
        }
        if times.len() < 2 {
            return Err(Error::InvalidGrid("CSV holds fewer than 2 samples".into()));
        }
        let t0 = times[0];
        let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
        let grid = Grid::new(t0, dt, times.len())?;
        for (i, &t) in times.iter().enumerate() {
            if (t - grid.time(i)).abs() > 1e-9 * dt.max(grid.time(i).abs() * 1e-6) {
                return Err(Error::InvalidGrid(format!("time stamp {i} ({t}) is not uniformly spaced")));
            }
        }
        SampledSignal::on_grid(grid, samples)
    }
}

pub(crate) fn interior<T>(v: &[T], margin: usize) -> &[T] {
    if 2 * margin >= v.len() {
        &v[0..0]
    } else {
        &v[margin..v.len() - margin]
    }
}

impl Add for &SampledSignal {
    type Output = SampledSignal;
    /// Panics on grid mismatch; use [`SampledSignal::try_add`] otherwise.
    fn add(self, rhs: &SampledSignal) -> SampledSignal {
        self.try_add(rhs).expect("grid mismatch")
    }
}

impl Sub for &SampledSignal {
    type Output = SampledSignal;
    fn sub(self, rhs: &SampledSignal) -> SampledSignal {
        self.try_sub(rhs).expect("grid mismatch")
    }
}

impl Mul for &SampledSignal {
    type Output = SampledSignal;
    fn mul(self, rhs: &SampledSignal) -> SampledSignal {
        self.try_mul(rhs).expect("grid mismatch")
    }
}
