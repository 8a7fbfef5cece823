//! Discrete derivatives and the conjugate energy-operator family
//!
//! `Ψ_k^±(s) = ∂s · ∂^{k-1}s ± s · ∂^k s`, evaluated pointwise on a sampled
//! grid. Products are plain (unconjugated) complex products.
//!
//! Two derivative backends are provided. Finite differences use Fornberg
//! weights: centred stencils in the interior and one-sided stencils of the
//! same accuracy order within half a stencil of either end. The spectral
//! backend differentiates in the frequency domain and assumes the samples are
//! one period of a periodic signal.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{interior, SampledSignal};

/// Highest derivative order any operation will compute.
pub const MAX_DERIVATIVE_ORDER: usize = 12;

/// Shortest signal the spectral backend accepts.
pub const MIN_SPECTRAL_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivativeMethod {
    FiniteDifference { accuracy: usize },
    Spectral,
}

impl Default for DerivativeMethod {
    fn default() -> Self {
        DerivativeMethod::FiniteDifference { accuracy: 8 }
    }
}

impl DerivativeMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DerivativeMethod::FiniteDifference { accuracy } if ![2, 4, 6, 8].contains(&accuracy) => {
                Err(Error::InvalidArgument(format!(
                    "finite-difference accuracy must be one of 2, 4, 6, 8 (got {accuracy})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of samples at each end that are computed with one-sided
    /// stencils for a derivative of the given order. Zero for spectral.
    pub fn boundary_width(&self, order: usize) -> usize {
        match *self {
            DerivativeMethod::FiniteDifference { accuracy } if order > 0 => centered_width(order, accuracy) / 2,
            _ => 0,
        }
    }

    /// Width of the widest stencil used for `order`.
    pub fn stencil_width(&self, order: usize) -> usize {
        match *self {
            DerivativeMethod::FiniteDifference { accuracy } if order > 0 => {
                centered_width(order, accuracy).max(order + accuracy)
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply(self, a: Complex64, b: Complex64) -> Complex64 {
        match self {
            Sign::Plus => a + b,
            Sign::Minus => a - b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorIndex {
    pub k: usize,
    pub sign: Sign,
}

impl OperatorIndex {
    pub fn new(k: usize, sign: Sign) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("operator index k must be >= 1".into()));
        }
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::OrderTooHigh { order: k, max: MAX_DERIVATIVE_ORDER });
        }
        Ok(OperatorIndex { k, sign })
    }

    pub fn plus(k: usize) -> Result<Self> {
        Self::new(k, Sign::Plus)
    }

    pub fn minus(k: usize) -> Result<Self> {
        Self::new(k, Sign::Minus)
    }
}

// Odd number of nodes for a centred stencil of the requested accuracy.
fn centered_width(order: usize, accuracy: usize) -> usize {
    2 * order.div_ceil(2) - 1 + accuracy
}

/// Fornberg's recursion: weights of the `order`-th derivative at `x0` using
/// the given nodes.
pub(crate) fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(order)
}

struct Stencil {
    start: usize,
    weights: Vec<f64>,
}

fn fd_stencils(len: usize, order: usize, accuracy: usize) -> Vec<Stencil> {
    let wc = centered_width(order, accuracy);
    let half = wc / 2;
    let wb = order + accuracy;
    let centered = {
        let nodes: Vec<f64> = (0..wc).map(|j| j as f64 - half as f64).collect();
        fornberg_weights(0.0, &nodes, order)
    };
    let edge_nodes: Vec<f64> = (0..wb).map(|j| j as f64).collect();
    (0..len)
        .map(|i| {
            if i < half {
                Stencil { start: 0, weights: fornberg_weights(i as f64, &edge_nodes, order) }
            } else if i + half >= len {
                let start = len - wb;
                Stencil { start, weights: fornberg_weights((i - start) as f64, &edge_nodes, order) }
            } else {
                Stencil { start: i - half, weights: centered.clone() }
            }
        })
        .collect()
}

/// Returns the `order`-th time derivative of `s` on the same grid.
pub fn differentiate(s: &SampledSignal, order: usize, method: DerivativeMethod) -> Result<SampledSignal> {
    method.validate()?;
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh { order, max: MAX_DERIVATIVE_ORDER });
    }
    if order == 0 {
        return Ok(s.clone());
    }
    match method {
        DerivativeMethod::FiniteDifference { accuracy } => {
            let width = method.stencil_width(order);
            if s.len() <= width {
                return Err(Error::StencilTooWide { len: s.len(), width });
            }
            let scale = s.dt().powi(order as i32).recip();
            let x = s.samples();
            let out = fd_stencils(s.len(), order, accuracy)
                .iter()
                .map(|st| {
                    let acc = st
                        .weights
                        .iter()
                        .zip(&x[st.start..st.start + st.weights.len()])
                        .fold(Complex64::new(0.0, 0.0), |acc, (&w, &z)| acc + z * w);
                    acc * scale
                })
                .collect();
            Ok(s.with_samples(out))
        }
        DerivativeMethod::Spectral => spectral_derivative(s, order),
    }
}

fn spectral_derivative(s: &SampledSignal, order: usize) -> Result<SampledSignal> {
    let n = s.len();
    if n < MIN_SPECTRAL_LEN {
        return Err(Error::StencilTooWide { len: n, width: MIN_SPECTRAL_LEN - 1 });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = s.samples().to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let base = 2.0 * std::f64::consts::PI / (n as f64 * s.dt());
    let i_pow = Complex64::new(0.0, 1.0).powi(order as i32);
    for (m, z) in buf.iter_mut().enumerate() {
        let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        // The Nyquist bin of an even-length transform has no sign; odd orders drop it.
        if n.is_multiple_of(2) && m == n / 2 && order % 2 == 1 {
            *z = Complex64::new(0.0, 0.0);
            continue;
        }
        *z *= i_pow * (base * freq).powi(order as i32);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    Ok(s.with_samples(buf.into_iter().map(|z| z * inv).collect()))
}

/// Combines precomputed derivatives into `∂s · ∂^{k-1}s ± s · ∂^k s`.
pub fn psi_from_parts(
    s: &SampledSignal,
    d1: &SampledSignal,
    dkm1: &SampledSignal,
    dk: &SampledSignal,
    sign: Sign,
) -> Result<SampledSignal> {
    s.ensure_compatible(d1)?;
    s.ensure_compatible(dkm1)?;
    s.ensure_compatible(dk)?;
    let out = (0..s.len())
        .map(|i| sign.apply(d1.samples()[i] * dkm1.samples()[i], s.samples()[i] * dk.samples()[i]))
        .collect();
    Ok(s.with_samples(out))
}

/// Applies `Ψ_k^±` to a sampled signal.
pub fn apply_psi(s: &SampledSignal, idx: OperatorIndex, method: DerivativeMethod) -> Result<SampledSignal> {
    let idx = OperatorIndex::new(idx.k, idx.sign)?;
    let d1 = differentiate(s, 1, method)?;
    let dkm1 = if idx.k == 1 { s.clone() } else { differentiate(s, idx.k - 1, method)? };
    let dk = if idx.k == 1 { d1.clone() } else { differentiate(s, idx.k, method)? };
    psi_from_parts(s, &d1, &dkm1, &dk, idx.sign)
}

/// Outcome of the chain-rule check `∂Ψ_k(s) = Ψ_{k+1}(s) + Ψ_{k-1}(∂s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleResidual {
    /// Max modulus of the identity residual over interior samples.
    pub max_abs: f64,
    /// Max of `|∂s · ∂^k s| + |s · ∂^{k+1} s|` over the same samples, the
    /// size of the two terms of `Ψ_{k+1}` before they combine.
    pub reference: f64,
    /// Samples excluded at each end.
    pub margin: usize,
}

impl ChainRuleResidual {
    pub fn relative(&self) -> f64 {
        if self.reference == 0.0 {
            self.max_abs
        } else {
            self.max_abs / self.reference
        }
    }
}

pub fn psi_derivative_identity_residual(
    s: &SampledSignal,
    k: usize,
    sign: Sign,
    method: DerivativeMethod,
) -> Result<ChainRuleResidual> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("chain-rule identity needs k >= 2 (got {k})")));
    }
    let lhs = differentiate(&apply_psi(s, OperatorIndex::new(k, sign)?, method)?, 1, method)?;
    let next = apply_psi(s, OperatorIndex::new(k + 1, sign)?, method)?;
    let ds = differentiate(s, 1, method)?;
    let prev = apply_psi(&ds, OperatorIndex::new(k - 1, sign)?, method)?;

    let b = |o: usize| method.boundary_width(o);
    let margin = (b(1) + b(k)).max(b(k + 1)).max(b(1) + b(k - 1));
    let residual: Vec<f64> =
        (0..s.len()).map(|i| (lhs.samples()[i] - next.samples()[i] - prev.samples()[i]).norm()).collect();
    let max_abs = interior(&residual, margin).iter().copied().fold(0.0, f64::max);

    let dk = differentiate(s, k, method)?;
    let dk1 = differentiate(s, k + 1, method)?;
    let terms: Vec<f64> = (0..s.len())
        .map(|i| (ds.samples()[i] * dk.samples()[i]).norm() + (s.samples()[i] * dk1.samples()[i]).norm())
        .collect();
    let reference = interior(&terms, margin).iter().copied().fold(0.0, f64::max);
    Ok(ChainRuleResidual { max_abs, reference, margin })
}

/// `(n/2) · f^{n-2} · Ψ_1^+(f)` from samples of `f` and `∂f`. Equals `∂(f^n)`.
pub fn lemma0_from_parts(f: &SampledSignal, df: &SampledSignal, n: u32) -> Result<SampledSignal> {
    if n <= 1 {
        return Err(Error::InvalidArgument(format!("power n must be > 1 (got {n})")));
    }
    let psi1 = psi_from_parts(f, df, f, df, Sign::Plus)?;
    let alpha = n as f64 / 2.0;
    let out = f.samples().iter().zip(psi1.samples()).map(|(&z, &p)| z.powi(n as i32 - 2) * p * alpha).collect();
    Ok(f.with_samples(out))
}

/// Power-rule form `(n/2) f^{n-2} Ψ_1^+ f` of `∂(f^n)` with `∂f` taken from the given backend.
pub fn lemma0_decomposition(f: &SampledSignal, n: u32, method: DerivativeMethod) -> Result<SampledSignal> {
    if n <= 1 {
        return Err(Error::InvalidArgument(format!("power n must be > 1 (got {n})")));
    }
    let df = differentiate(f, 1, method)?;
    lemma0_from_parts(f, &df, n)
}
