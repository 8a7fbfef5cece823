//! Template families `f^n` and executable derivative-decay, summability,
//! Taylor and energy checks.
//!
//! Every family is causal: `f^n(t) = 0` for `t < 0`, the closed form for
//! `t >= 0`. Derivatives are the one-sided analytic derivatives of the closed
//! form and are also zero before the onset. Membership is certified at grid
//! resolution only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy_ops::MAX_DERIVATIVE_ORDER;
use crate::error::{Error, Result};
use crate::signal::{Grid, SampledSignal};

/// Default relative threshold below which a derivative counts as negligible.
pub const DEFAULT_EPSILON_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `f^n(t) = exp(-n t / tau)`.
    DampedExp { tau: f64 },
    /// `f^n(t) = exp(-n t^d)`.
    PowerExp { d: u32 },
    /// `f^n(t) = value^n`; `value = 0` is the zero signal.
    Constant { value: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::DampedExp { tau } if !(tau.is_finite() && tau > 0.0) => {
                Err(Error::InvalidArgument(format!("damped exponential needs tau > 0 (got {tau})")))
            }
            Family::PowerExp { d: 0 } => Err(Error::InvalidArgument("power-exponential degree d must be >= 1".into())),
            Family::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidArgument("constant family value must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Analytic `∂_t^order f^n` as a reusable evaluator. `n = 0` gives the
    /// unit step.
    pub fn derivative_fn(&self, n: u32, order: usize) -> DerivativeFn {
        let nf = n as f64;
        match *self {
            Family::DampedExp { tau } => DerivativeFn::Exp { rate: nf / tau, coeff: (-nf / tau).powi(order as i32) },
            Family::PowerExp { d } => DerivativeFn::PolyExp { n: nf, d: d as i32, poly: power_exp_poly(nf, d, order) },
            Family::Constant { value } => DerivativeFn::Const(if order == 0 { value.powi(n as i32) } else { 0.0 }),
        }
    }

    pub fn eval(&self, n: u32, t: f64) -> f64 {
        self.derivative_fn(n, 0).eval(t)
    }

    pub fn derivative(&self, n: u32, order: usize, t: f64) -> f64 {
        self.derivative_fn(n, order).eval(t)
    }

    /// Samples of `∂^order f^n(t - delay)` on the grid.
    pub fn sample_derivative(&self, n: u32, order: usize, grid: &Grid, delay: f64) -> Vec<f64> {
        let df = self.derivative_fn(n, order);
        grid.times().map(|t| df.eval(t - delay)).collect()
    }
}

/// Closed-form evaluator for one derivative of one family power.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeFn {
    Exp {
        rate: f64,
        coeff: f64,
    },
    /// `poly(t) * exp(-n t^d)`, coefficients in ascending degree.
    PolyExp {
        n: f64,
        d: i32,
        poly: Vec<f64>,
    },
    Const(f64),
}

impl DerivativeFn {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            DerivativeFn::Exp { rate, coeff } => coeff * (-rate * t).exp(),
            DerivativeFn::PolyExp { n, d, poly } => {
                let p = poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
                p * (-n * t.powi(*d)).exp()
            }
            DerivativeFn::Const(c) => *c,
        }
    }
}

// P_{k+1} = P_k' - n d t^{d-1} P_k with P_0 = 1.
fn power_exp_poly(n: f64, d: u32, order: usize) -> Vec<f64> {
    let d = d as usize;
    let mut p = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; p.len() + d];
        for (j, &c) in p.iter().enumerate().skip(1) {
            next[j - 1] += j as f64 * c;
        }
        for (j, &c) in p.iter().enumerate() {
            next[j + d - 1] -= n * d as f64 * c;
        }
        p = next;
    }
    p
}

/// Samples `f^n` on the grid from its closed form.
pub fn eval_family(family: &Family, n: u32, grid: &Grid) -> Result<SampledSignal> {
    family.validate()?;
    grid.validate()?;
    if grid.t0 < 0.0 {
        return Err(Error::InvalidGrid(format!("family grids start at t0 >= 0 (got {})", grid.t0)));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("family power n must be >= 1".into()));
    }
    let samples = family.sample_derivative(n, 0, grid, 0.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    SampledSignal::on_grid(*grid, samples)
}

/// Trapezoidal integral of `|s|^2` over the grid span.
pub fn energy(s: &SampledSignal) -> f64 {
    let p = s.samples();
    let inner: f64 = p.iter().map(|z| z.norm_sqr()).sum();
    s.dt() * (inner - 0.5 * (p[0].norm_sqr() + p[p.len() - 1].norm_sqr()))
}

/// Trapezoidal energy over `[t0, t_i]` for every `i`.
pub fn energy_partial_sums(s: &SampledSignal) -> Vec<f64> {
    let p = s.samples();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(p.len());
    out.push(0.0);
    for w in p.windows(2) {
        acc += 0.5 * s.dt() * (w[0].norm_sqr() + w[1].norm_sqr());
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Bound {
    pub l0: usize,
    /// True when derivatives up to the order cap never became negligible.
    pub saturated: bool,
}

/// Smallest `l0` with `sup[l] <= eps * reference` for every `l0 < l < sup.len()`.
/// `sup[0]` is ignored.
pub(crate) fn l0_from_sups(sup: &[f64], reference: f64, eps: f64) -> L0Bound {
    let cap = sup.len() - 1;
    let last_bad = (1..=cap).rev().find(|&l| !(sup[l] <= eps * reference));
    match last_bad {
        Some(l) if l == cap => L0Bound { l0: cap, saturated: true },
        Some(l) => L0Bound { l0: l, saturated: false },
        None => L0Bound { l0: 0, saturated: false },
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon_rel must lie in (0, 1) (got {eps})")))
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Grid sup-norms of `∂^l f^n` for `l = 0..=max_order`.
pub fn derivative_sup_norms(family: &Family, n: u32, grid: &Grid, max_order: usize) -> Vec<f64> {
    (0..=max_order).map(|l| sup_abs(&family.sample_derivative(n, l, grid, 0.0))).collect()
}

/// Derivative-order bound of `f^n` on the grid, capped at
/// [`MAX_DERIVATIVE_ORDER`].
pub fn detect_l0(family: &Family, n: u32, grid: &Grid, epsilon_rel: f64) -> Result<L0Bound> {
    family.validate()?;
    grid.validate()?;
    check_eps(epsilon_rel)?;
    let sup = derivative_sup_norms(family, n, grid, MAX_DERIVATIVE_ORDER);
    Ok(l0_from_sups(&sup, sup[0], epsilon_rel))
}

/// Max over grid steps of `|Σ_{l<=order} ∂^l f^n(t_i) dt^l / l! - f^n(t_{i+1})|`,
/// relative to `sup |f^n|`.
pub fn taylor_max_rel_error(family: &Family, n: u32, grid: &Grid, order: usize) -> f64 {
    let derivs: Vec<Vec<f64>> = (0..=order).map(|l| family.sample_derivative(n, l, grid, 0.0)).collect();
    let values = &derivs[0];
    let sup = sup_abs(values);
    if sup == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..grid.len - 1 {
        let mut term = 1.0;
        let mut approx = 0.0;
        for (l, d) in derivs.iter().enumerate() {
            if l > 0 {
                term *= grid.dt / l as f64;
            }
            approx += d[i] * term;
        }
        worst = worst.max((approx - values[i + 1]).abs());
    }
    worst / sup
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipTolerances {
    pub epsilon_rel: f64,
    pub taylor_rel: f64,
}

impl Default for MembershipTolerances {
    fn default() -> Self {
        MembershipTolerances { epsilon_rel: DEFAULT_EPSILON_REL, taylor_rel: 1e-6 }
    }
}

/// Outcome of each membership check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipPasses {
    /// Derivatives beyond `l0` are negligible below the order cap.
    pub derivative_decay: bool,
    /// `Σ_{l<=l0} ∂^l f^n(t)` is finite and within `(l0 + 1) max_l |∂^l f^n(t)|`.
    pub summable: bool,
    /// Order-`l0` Taylor steps reproduce the next sample.
    pub taylor_convergent: bool,
    /// Energy partial sums are finite and nondecreasing.
    pub energy_convergent: bool,
}

impl MembershipPasses {
    pub fn all(&self) -> bool {
        self.derivative_decay && self.summable && self.taylor_convergent && self.energy_convergent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub family: Family,
    pub n: u32,
    pub l0: usize,
    pub saturated: bool,
    /// `sup |∂^l f^n|` for `l = 0..=l0 + 1`.
    pub sup_norms: Vec<f64>,
    pub energy: f64,
    pub taylor_max_rel_error: f64,
    pub passes: MembershipPasses,
}

pub fn check_membership(family: &Family, n: u32, grid: &Grid, tol: &MembershipTolerances) -> Result<MembershipReport> {
    let bound = detect_l0(family, n, grid, tol.epsilon_rel)?;
    let l0 = bound.l0;
    let sup_norms = derivative_sup_norms(family, n, grid, l0 + 1);

    let derivs: Vec<Vec<f64>> = (0..=l0).map(|l| family.sample_derivative(n, l, grid, 0.0)).collect();
    let summable = (0..grid.len).all(|i| {
        let sum: f64 = derivs.iter().map(|d| d[i]).sum();
        let peak = derivs.iter().map(|d| d[i].abs()).fold(0.0, f64::max);
        sum.is_finite() && sum.abs() <= (l0 + 1) as f64 * peak * (1.0 + 1e-12)
    });

    let taylor_max_rel_error = taylor_max_rel_error(family, n, grid, l0);
    let signal = eval_family(family, n, grid)?;
    let partial = energy_partial_sums(&signal);
    let energy_convergent = partial.iter().all(|e| e.is_finite()) && partial.windows(2).all(|w| w[1] >= w[0]);

    Ok(MembershipReport {
        family: *family,
        n,
        l0,
        saturated: bound.saturated,
        sup_norms,
        energy: energy(&signal),
        taylor_max_rel_error,
        passes: MembershipPasses {
            derivative_decay: !bound.saturated,
            summable,
            taylor_convergent: taylor_max_rel_error <= tol.taylor_rel,
            energy_convergent,
        },
    })
}
