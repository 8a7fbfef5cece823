//! Multipath channel simulation.
//!
//! Two tap models are supported. Classical taps are `a e^{jφ} g(t - τ)`.
//! Derivative taps are `ρ ∂_t^l f^n(t - τ)`. Both add optional white Gaussian
//! noise. Random tap lists come from a Saleh-Valenzuela cluster generator.
//! All randomness is drawn from a ChaCha8 stream seeded explicitly by the
//! caller.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::energy_ops::MAX_DERIVATIVE_ORDER;
use crate::error::{Error, Result};
use crate::signal::{Grid, SampledSignal};
use crate::signal_space::Family;

/// Length of the windowed-sinc fractional-delay interpolator.
pub const FRACTIONAL_DELAY_TAPS: usize = 16;

// Delays within this many samples of a grid point are treated as on-grid.
const ON_GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTap {
    pub amplitude: f64,
    pub phase: f64,
    pub delay: f64,
}

impl ClassicalTap {
    pub fn gain(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTap {
    pub order: usize,
    pub delay: f64,
    pub gain_re: f64,
    pub gain_im: f64,
}

impl DerivativeTap {
    pub fn new(order: usize, delay: f64, gain: Complex64) -> Self {
        DerivativeTap { order, delay, gain_re: gain.re, gain_im: gain.im }
    }

    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-sample noise variance.
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn silent() -> Self {
        NoiseModel { sigma2: 0.0, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.sigma2.is_finite() && self.sigma2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("noise variance must be >= 0 (got {})", self.sigma2)))
        }
    }
}

fn check_delay(delay: f64, grid: &Grid) -> Result<()> {
    if delay.is_finite() && delay >= 0.0 && delay <= grid.span() * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(Error::DelayOutOfSpan { delay, span: grid.span() })
    }
}

fn blackman(u: f64, half: f64) -> f64 {
    if u.abs() >= half {
        0.0
    } else {
        0.42 + 0.5 * (PI * u / half).cos() + 0.08 * (2.0 * PI * u / half).cos()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `g(t - delay)` on `g`'s grid. Samples before the start of `g` are zero.
/// On-grid delays are exact sample shifts; off-grid delays use a
/// Blackman-windowed sinc of [`FRACTIONAL_DELAY_TAPS`] taps with unit DC gain.
pub fn delay_signal(g: &SampledSignal, delay: f64) -> Result<Vec<Complex64>> {
    let grid = g.grid();
    check_delay(delay, &grid)?;
    let x = g.samples();
    let len = x.len();
    let shift = delay / grid.dt;
    let whole = shift.round();
    if (shift - whole).abs() <= ON_GRID_TOL {
        let m = whole as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        out[m.min(len)..].copy_from_slice(&x[..len - m.min(len)]);
        return Ok(out);
    }
    let half = (FRACTIONAL_DELAY_TAPS / 2) as f64;
    let out = (0..len)
        .map(|i| {
            let pos = i as f64 - shift;
            let base = pos.floor() as i64;
            let lo = base - (FRACTIONAL_DELAY_TAPS as i64 / 2 - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut wsum = 0.0;
            for j in lo..lo + FRACTIONAL_DELAY_TAPS as i64 {
                let u = pos - j as f64;
                let w = sinc(u) * blackman(u, half);
                wsum += w;
                if j >= 0 && (j as usize) < len {
                    acc += x[j as usize] * w;
                }
            }
            acc / wsum
        })
        .collect();
    Ok(out)
}

/// Gaussian noise on the grid, circular complex (`σ²/2` per component) when
/// `complex`, real otherwise. Deterministic in the seed.
pub fn gen_awgn(grid: &Grid, noise: &NoiseModel, complex: bool) -> Result<SampledSignal> {
    grid.validate()?;
    noise.validate()?;
    if noise.sigma2 == 0.0 {
        return SampledSignal::zeros(*grid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let samples = if complex {
        let s = (noise.sigma2 / 2.0).sqrt();
        (0..grid.len)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect()
    } else {
        let s = noise.sigma2.sqrt();
        (0..grid.len).map(|_| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), 0.0)).collect()
    };
    SampledSignal::on_grid(*grid, samples)
}

fn add_noise(mut acc: Vec<Complex64>, grid: &Grid, noise: &NoiseModel) -> Result<SampledSignal> {
    if noise.sigma2 > 0.0 {
        let complex = acc.iter().any(|z| z.im != 0.0);
        let eta = gen_awgn(grid, noise, complex)?;
        for (a, e) in acc.iter_mut().zip(eta.samples()) {
            *a += e;
        }
    }
    SampledSignal::on_grid(*grid, acc)
}

/// `r = Σ a_l e^{jφ_l} g(t - τ_l) + η` with time-invariant taps.
pub fn apply_classical_channel(g: &SampledSignal, taps: &[ClassicalTap], noise: &NoiseModel) -> Result<SampledSignal> {
    noise.validate()?;
    let grid = g.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); g.len()];
    for tap in taps {
        if !(tap.amplitude.is_finite() && tap.amplitude >= 0.0 && tap.phase.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid classical tap {tap:?}")));
        }
        let shifted = delay_signal(g, tap.delay)?;
        let gain = tap.gain();
        for (a, s) in acc.iter_mut().zip(shifted) {
            *a += gain * s;
        }
    }
    add_noise(acc, &grid, noise)
}

pub(crate) fn check_powers(n_set: &BTreeSet<u32>) -> Result<()> {
    if n_set.is_empty() {
        return Err(Error::InvalidArgument("power set must not be empty".into()));
    }
    if let Some(&n) = n_set.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!("powers must be > 1 (got {n})")));
    }
    Ok(())
}

/// `r = Σ_n Σ_l ρ_l ∂_t^{order_l} f^n(t - τ_l) + η` from closed-form
/// derivatives of the family.
pub fn apply_derivative_channel(
    family: &Family,
    n_set: &BTreeSet<u32>,
    taps: &[DerivativeTap],
    noise: &NoiseModel,
    grid: &Grid,
) -> Result<SampledSignal> {
    family.validate()?;
    grid.validate()?;
    noise.validate()?;
    check_powers(n_set)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len];
    for tap in taps {
        if tap.order > MAX_DERIVATIVE_ORDER {
            return Err(Error::OrderTooHigh { order: tap.order, max: MAX_DERIVATIVE_ORDER });
        }
        check_delay(tap.delay, grid)?;
        let gain = tap.gain();
        if !(gain.re.is_finite() && gain.im.is_finite()) {
            return Err(Error::InvalidArgument("tap gain must be finite".into()));
        }
        for &n in n_set {
            let col = family.sample_derivative(n, tap.order, grid, tap.delay);
            for (a, v) in acc.iter_mut().zip(col) {
                *a += gain * v;
            }
        }
    }
    add_noise(acc, grid, noise)
}

/// Saleh-Valenzuela cluster model parameters. Rates in 1/s, decays and
/// `max_delay` in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalehValenzuelaParams {
    pub cluster_rate: f64,
    pub ray_rate: f64,
    pub cluster_decay: f64,
    pub ray_decay: f64,
    pub max_delay: f64,
    pub seed: u64,
}

impl SalehValenzuelaParams {
    /// Indoor values of the original measurement campaign: 1/Λ = 300 ns,
    /// 1/λ = 5 ns, Γ = 60 ns, γ = 20 ns. Taps stop at 300 ns.
    pub fn indoor(seed: u64) -> Self {
        SalehValenzuelaParams {
            cluster_rate: 1.0 / 300e-9,
            ray_rate: 1.0 / 5e-9,
            cluster_decay: 60e-9,
            ray_decay: 20e-9,
            max_delay: 300e-9,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.cluster_rate, self.ray_rate, self.cluster_decay, self.ray_decay, self.max_delay];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("Saleh-Valenzuela parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvCluster {
    pub arrival: f64,
    /// Rays in arrival order; the first ray arrives with the cluster.
    pub rays: Vec<ClassicalTap>,
}

/// Clustered tap realization. Cluster and ray inter-arrival times are
/// exponential; the mean ray power is `exp(-T/Γ) exp(-τ/γ)`, amplitudes are
/// Rayleigh and phases uniform on `[0, 2π)`.
pub fn gen_saleh_valenzuela_clusters(p: &SalehValenzuelaParams) -> Result<Vec<SvCluster>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let cluster_gap = Exp::new(p.cluster_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let ray_gap = Exp::new(p.ray_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let unit = Exp::new(1.0).expect("unit rate");
    let mut clusters = Vec::new();
    let mut arrival = 0.0;
    while arrival <= p.max_delay {
        let mut rays = Vec::new();
        let mut offset = 0.0;
        while arrival + offset <= p.max_delay {
            let mean_power = (-arrival / p.cluster_decay).exp() * (-offset / p.ray_decay).exp();
            // |h|^2 is exponential for a Rayleigh amplitude.
            let power: f64 = mean_power * unit.sample(&mut rng);
            let phase = rng.random_range(0.0..2.0 * PI);
            rays.push(ClassicalTap { amplitude: power.sqrt(), phase, delay: arrival + offset });
            offset += ray_gap.sample(&mut rng);
        }
        clusters.push(SvCluster { arrival, rays });
        arrival += cluster_gap.sample(&mut rng);
    }
    Ok(clusters)
}

/// Flattened Saleh-Valenzuela taps sorted by delay.
pub fn gen_saleh_valenzuela(p: &SalehValenzuelaParams) -> Result<Vec<ClassicalTap>> {
    let mut taps: Vec<ClassicalTap> = gen_saleh_valenzuela_clusters(p)?.into_iter().flat_map(|c| c.rays).collect();
    taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(taps)
}

impl From<&ClassicalTap> for DerivativeTap {
    fn from(t: &ClassicalTap) -> Self {
        DerivativeTap::new(0, t.delay, t.gain())
    }
}

/// Writes taps as CSV with header `delay,order,gain_re,gain_im`.
pub fn write_taps_csv<W: Write>(taps: &[DerivativeTap], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["delay", "order", "gain_re", "gain_im"])?;
    for t in taps {
        wtr.serialize((t.delay, t.order, t.gain_re, t.gain_im))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_taps_csv<R: Read>(r: R) -> Result<Vec<DerivativeTap>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let (delay, order, gain_re, gain_im): (f64, usize, f64, f64) = row?;
        out.push(DerivativeTap { order, delay, gain_re, gain_im });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_ops::{lemma0_from_parts, DerivativeMethod};
    use proptest::prelude::*;

    fn pulse(grid: Grid) -> SampledSignal {
        SampledSignal::from_fn(grid, |t| Complex64::new((-(t - 1.0) * (t - 1.0) * 8.0).exp(), 0.3 * t.sin())).unwrap()
    }

    #[test]
    fn identity_and_phase_flip() {
        let grid = Grid::new(0.0, 0.01, 300).unwrap();
        let g = pulse(grid);
        let id = ClassicalTap { amplitude: 1.0, phase: 0.0, delay: 0.0 };
        assert_eq!(apply_classical_channel(&g, &[id], &NoiseModel::silent()).unwrap(), g);
        let flip = ClassicalTap { amplitude: 2.0, phase: PI, delay: 0.0 };
        let r = apply_classical_channel(&g, &[flip], &NoiseModel::silent()).unwrap();
        for (a, b) in r.samples().iter().zip(g.samples()) {
            assert!((a + 2.0 * b).norm() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn two_on_grid_taps_match_direct_convolution() {
        let grid = Grid::new(0.0, 0.01, 200).unwrap();
        let g = pulse(grid);
        let taps = [
            ClassicalTap { amplitude: 1.0, phase: 0.3, delay: 0.0 },
            ClassicalTap { amplitude: 0.5, phase: -1.2, delay: 17.0 * 0.01 },
        ];
        let r = apply_classical_channel(&g, &taps, &NoiseModel::silent()).unwrap();
        // Dense convolution with a two-spike kernel.
        let mut kernel = vec![Complex64::new(0.0, 0.0); grid.len];
        kernel[0] += taps[0].gain();
        kernel[17] += taps[1].gain();
        for i in 0..grid.len {
            let conv: Complex64 = (0..=i).map(|j| kernel[j] * g.samples()[i - j]).sum();
            assert!((conv - r.samples()[i]).norm() <= 1e-14);
        }
    }

    #[test]
    fn fractional_delay_tracks_band_limited_signal() {
        let grid = Grid::new(0.0, 0.01, 400).unwrap();
        let f = |t: f64| (-(t - 2.0) * (t - 2.0) * 4.0).exp();
        let g = SampledSignal::from_fn(grid, |t| Complex64::new(f(t), 0.0)).unwrap();
        let delay = 0.3456;
        let out = delay_signal(&g, delay).unwrap();
        for (i, z) in out.iter().enumerate().skip(20).take(360) {
            assert!((z.re - f(grid.time(i) - delay)).abs() < 1e-4, "sample {i}");
        }
    }

    #[test]
    fn rejects_delay_outside_span() {
        let grid = Grid::new(0.0, 0.01, 100).unwrap();
        let g = pulse(grid);
        let tap = ClassicalTap { amplitude: 1.0, phase: 0.0, delay: 1.5 };
        assert!(matches!(
            apply_classical_channel(&g, &[tap], &NoiseModel::silent()),
            Err(Error::DelayOutOfSpan { .. })
        ));
    }

    #[test]
    fn derivative_channel_examples() {
        let grid = Grid::new(0.0, 0.01, 500).unwrap();
        let fam = Family::DampedExp { tau: 1.0 };
        let n_set = BTreeSet::from([2]);
        let tap0 = DerivativeTap::new(0, 0.0, Complex64::new(1.0, 0.0));
        let r = apply_derivative_channel(&fam, &n_set, &[tap0], &NoiseModel::silent(), &grid).unwrap();
        for (i, z) in r.samples().iter().enumerate() {
            assert_eq!(z.re, (-2.0 * grid.time(i)).exp());
        }
        let tap1 = DerivativeTap::new(1, 0.0, Complex64::new(1.0, 0.0));
        let r = apply_derivative_channel(&fam, &n_set, &[tap1], &NoiseModel::silent(), &grid).unwrap();
        for (i, z) in r.samples().iter().enumerate() {
            let e = -2.0 * (-2.0 * grid.time(i)).exp();
            assert!((z.re - e).abs() <= 1e-15 * e.abs());
        }
        // (n/2) f^{n-2} Ψ_1^+ f with analytic f and f'.
        let f = SampledSignal::from_real(0.0, 0.01, &fam.sample_derivative(1, 0, &grid, 0.0)).unwrap();
        let df = SampledSignal::from_real(0.0, 0.01, &fam.sample_derivative(1, 1, &grid, 0.0)).unwrap();
        let l0 = lemma0_from_parts(&f, &df, 2).unwrap();
        for (a, b) in l0.samples().iter().zip(r.samples()) {
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
        let _ = DerivativeMethod::default();
        assert!(apply_derivative_channel(&fam, &BTreeSet::from([1]), &[tap0], &NoiseModel::silent(), &grid).is_err());
    }

    #[test]
    fn zero_order_derivative_channel_matches_classical() {
        let grid = Grid::new(0.0, 0.01, 400).unwrap();
        let fam = Family::PowerExp { d: 2 };
        let n_set = BTreeSet::from([3]);
        let taps = [
            DerivativeTap::new(0, 0.5, Complex64::new(0.8, -0.4)),
            DerivativeTap::new(0, 1.25, Complex64::new(-0.3, 0.1)),
        ];
        let r = apply_derivative_channel(&fam, &n_set, &taps, &NoiseModel::silent(), &grid).unwrap();
        let g = crate::signal_space::eval_family(&fam, 3, &grid).unwrap();
        let classical: Vec<ClassicalTap> = taps
            .iter()
            .map(|t| ClassicalTap { amplitude: t.gain().norm(), phase: t.gain().arg(), delay: t.delay })
            .collect();
        let c = apply_classical_channel(&g, &classical, &NoiseModel::silent()).unwrap();
        assert!((&r - &c).max_abs() <= 1e-12);
    }

    #[test]
    fn awgn_statistics_and_determinism() {
        let grid = Grid::new(0.0, 1.0, 1_000_000).unwrap();
        let z = gen_awgn(&grid, &NoiseModel { sigma2: 0.0, seed: 9 }, true).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        for complex in [false, true] {
            let noise = NoiseModel { sigma2: 1.0, seed: 42 };
            let a = gen_awgn(&grid, &noise, complex).unwrap();
            let n = a.len() as f64;
            let mean: Complex64 = a.samples().iter().sum::<Complex64>() / n;
            let var = a.samples().iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
            assert!((var - 1.0).abs() <= 0.01, "variance {var}");
            assert!(mean.norm() < 0.01);
            assert_eq!(a, gen_awgn(&grid, &noise, complex).unwrap());
        }
    }

    #[test]
    fn saleh_valenzuela_truncation_and_determinism() {
        let mut p = SalehValenzuelaParams::indoor(3);
        p.max_delay = 1e-15;
        let taps = gen_saleh_valenzuela(&p).unwrap();
        assert!(taps.len() <= 1);
        assert!(taps.iter().all(|t| t.delay == 0.0));

        let p = SalehValenzuelaParams::indoor(77);
        let a = gen_saleh_valenzuela(&p).unwrap();
        assert_eq!(a, gen_saleh_valenzuela(&p).unwrap());
        assert!(a.iter().all(|t| t.delay <= p.max_delay && t.phase >= 0.0 && t.phase < 2.0 * PI));
        assert!(a.windows(2).all(|w| w[0].delay <= w[1].delay));

        let mut bad = p;
        bad.ray_decay = 0.0;
        assert!(gen_saleh_valenzuela(&bad).is_err());
    }

    #[test]
    fn saleh_valenzuela_cluster_envelope() {
        // Regress log mean power of cluster-leading rays on arrival time.
        let gamma = 60e-9;
        let width = 25e-9;
        let bins = 12;
        let mut sum_t = vec![0.0; bins];
        let mut sum_p = vec![0.0; bins];
        let mut count = vec![0usize; bins];
        for seed in 0..10_000u64 {
            let mut p = SalehValenzuelaParams::indoor(seed);
            p.max_delay = width * bins as f64;
            for c in gen_saleh_valenzuela_clusters(&p).unwrap() {
                let b = ((c.arrival / width) as usize).min(bins - 1);
                sum_t[b] += c.arrival;
                sum_p[b] += c.rays[0].amplitude.powi(2);
                count[b] += 1;
            }
        }
        let pts: Vec<(f64, f64)> = (0..bins)
            .filter(|&b| count[b] >= 200)
            .map(|b| (sum_t[b] / count[b] as f64, (sum_p[b] / count[b] as f64).ln()))
            .collect();
        assert!(pts.len() >= 8);
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let expect = -1.0 / gamma;
        assert!((slope - expect).abs() <= 0.1 * expect.abs(), "slope {slope} vs {expect}");
    }

    #[test]
    fn taps_csv_round_trip() {
        let taps = vec![
            DerivativeTap::new(0, 0.1, Complex64::new(1.5, 0.0)),
            DerivativeTap::new(2, 0.25, Complex64::new(-0.7, 1e-17)),
        ];
        let mut buf = Vec::new();
        write_taps_csv(&taps, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("delay,order,gain_re,gain_im\n"));
        assert_eq!(read_taps_csv(buf.as_slice()).unwrap(), taps);
    }

    proptest! {
        #[test]
        fn classical_channel_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, ph in 0.0f64..6.0) {
            let grid = Grid::new(0.0, 0.01, 160).unwrap();
            let g = pulse(grid);
            let h = SampledSignal::from_fn(grid, |t| Complex64::new((5.0 * t).cos(), 0.0)).unwrap();
            let taps = [
                ClassicalTap { amplitude: 1.0, phase: ph, delay: d1 },
                ClassicalTap { amplitude: 0.4, phase: 0.0, delay: d2 },
            ];
            let (ca, cb) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
            let silent = NoiseModel::silent();
            let lhs = apply_classical_channel(&(&g.scale(ca) + &h.scale(cb)), &taps, &silent).unwrap();
            let rhs = &apply_classical_channel(&g, &taps, &silent).unwrap().scale(ca)
                + &apply_classical_channel(&h, &taps, &silent).unwrap().scale(cb);
            prop_assert!((&lhs - &rhs).max_abs() <= 1e-13 * (a.abs() + b.abs() + 1.0));
        }

        #[test]
        fn noiseless_output_is_seed_independent(seed in any::<u64>()) {
            let grid = Grid::new(0.0, 0.01, 100).unwrap();
            let g = pulse(grid);
            let taps = [ClassicalTap { amplitude: 0.7, phase: 1.0, delay: 0.123 }];
            let a = apply_classical_channel(&g, &taps, &NoiseModel { sigma2: 0.0, seed }).unwrap();
            let b = apply_classical_channel(&g, &taps, &NoiseModel::silent()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
