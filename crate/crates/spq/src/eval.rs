//! Statistical checks: histogram TV distances, χ² and KS tests, entropy estimates,
//! and the convergence and independence experiments built on them.

use std::collections::HashMap;
use std::hash::Hash;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use spq_core::bounds::cor2_tv_bound;
use spq_core::linalg::unit_ball_volume;
use spq_core::quantizer::ShiftPeriodicQuantizer;
use spq_core::region::uniform_in_box;
use spq_core::rng::{derive_seed, substream, StreamRng};
use spq_core::{Lattice, Region, Vector};

use crate::par::{collect_shards, map_indexed};

/// Fewest samples accepted by [`empirical_tv`].
pub const MIN_TV_SAMPLES: usize = 10_000;

/// Total point budget for per-bin reference masses.
const MASS_POINTS: usize = 1 << 22;

/// Regular grid of `binsⁿ` boxes over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    lo: Vector,
    hi: Vector,
    bins: usize,
}

impl Grid {
    pub fn new(lo: Vector, hi: Vector, bins: usize) -> Result<Self> {
        ensure!(lo.len() == hi.len(), "grid corners differ in dimension");
        ensure!(bins >= 1, "grid needs at least one bin per axis");
        ensure!(
            lo.is_finite() && hi.is_finite(),
            "grid corners must be finite"
        );
        ensure!(
            lo.as_slice().iter().zip(hi.as_slice()).all(|(l, h)| l < h),
            "grid box is empty"
        );
        ensure!(
            bins.checked_pow(lo.len() as u32)
                .is_some_and(|c| c <= 1 << 24),
            "too many grid cells"
        );
        Ok(Grid { lo, hi, bins })
    }

    /// Grid over the bounding box of `region`.
    pub fn around(region: &Region, bins: usize) -> Result<Self> {
        let (lo, hi) = region.bounding_box();
        Self::new(lo, hi, bins)
    }

    /// Cube `[-half, half]ⁿ`.
    pub fn centered(n: usize, half: f64, bins: usize) -> Result<Self> {
        Self::new(Vector::splat(n, -half), Vector::splat(n, half), bins)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn cells(&self) -> usize {
        self.bins.pow(self.dim() as u32)
    }

    pub fn index(&self, x: &Vector) -> Option<usize> {
        let mut idx = 0;
        for i in (0..self.dim()).rev() {
            let (l, h) = (self.lo.as_slice()[i], self.hi.as_slice()[i]);
            let t = (x.as_slice()[i] - l) / (h - l);
            if !(0.0..=1.0).contains(&t) {
                return None;
            }
            let k = ((t * self.bins as f64) as usize).min(self.bins - 1);
            idx = idx * self.bins + k;
        }
        Some(idx)
    }

    pub fn cell_box(&self, index: usize) -> (Vector, Vector) {
        let mut rest = index;
        let mut lo = self.lo;
        let mut hi = self.lo;
        for i in 0..self.dim() {
            let k = rest % self.bins;
            rest /= self.bins;
            let w = (self.hi.as_slice()[i] - self.lo.as_slice()[i]) / self.bins as f64;
            lo.as_mut_slice()[i] = self.lo.as_slice()[i] + k as f64 * w;
            hi.as_mut_slice()[i] = self.lo.as_slice()[i] + (k + 1) as f64 * w;
        }
        (lo, hi)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.hi.as_slice()[i] - self.lo.as_slice()[i]) / self.bins as f64)
            .product()
    }

    /// Counts per cell plus an overflow count for points outside the grid.
    pub fn histogram<'a>(&self, samples: impl IntoIterator<Item = &'a Vector>) -> Histogram {
        let mut counts = vec![0u64; self.cells()];
        let mut outside = 0;
        for x in samples {
            match self.index(x) {
                Some(i) => counts[i] += 1,
                None => outside += 1,
            }
        }
        Histogram { counts, outside }
    }

    /// `∫_cell weight` for every cell, by Monte Carlo with stream `i` of `seed` for cell `i`.
    pub fn integrate<F>(&self, weight: F, seed: u64) -> Vec<f64>
    where
        F: Fn(&Vector) -> f64 + Sync,
    {
        let per_cell = (MASS_POINTS / self.cells()).clamp(256, 16_384);
        let volume = self.cell_volume();
        map_indexed(self.cells(), |i| {
            let (lo, hi) = self.cell_box(i);
            let mut rng = substream(seed, i as u64);
            let sum: f64 = (0..per_cell)
                .map(|_| weight(&uniform_in_box(&lo, &hi, &mut rng)))
                .sum();
            volume * sum / per_cell as f64
        })
    }

    /// Cell masses of `Unif(region)`, normalized to sum to one.
    pub fn region_masses(&self, region: &Region, seed: u64) -> Result<Vec<f64>> {
        let raw = self.integrate(|x| f64::from(u8::from(region.contains(x))), seed);
        let total: f64 = raw.iter().sum();
        ensure!(total > 0.0, "reference region has no mass on the grid");
        Ok(raw.into_iter().map(|m| m / total).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    /// Counts with the overflow appended as a final bin.
    fn with_overflow(&self) -> Vec<u64> {
        let mut v = self.counts.clone();
        v.push(self.outside);
        v
    }
}

/// Reference probabilities with the missing mass (outside the grid) appended.
fn masses_with_overflow(masses: &[f64]) -> Vec<f64> {
    let mut v = masses.to_vec();
    v.push((1.0 - masses.iter().sum::<f64>()).max(0.0));
    v
}

/// Half-L1 distance between a histogram and reference cell masses (missing mass sits outside).
pub fn tv_against(hist: &Histogram, masses: &[f64]) -> f64 {
    let n = hist.total() as f64;
    let p = masses_with_overflow(masses);
    0.5 * hist
        .with_overflow()
        .iter()
        .zip(&p)
        .map(|(&c, &m)| (c as f64 / n - m).abs())
        .sum::<f64>()
}

/// Half-L1 distance between two histograms on the same grid.
pub fn tv_between(a: &Histogram, b: &Histogram) -> f64 {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    0.5 * a
        .with_overflow()
        .iter()
        .zip(b.with_overflow())
        .map(|(&x, y)| (x as f64 / na - y as f64 / nb).abs())
        .sum::<f64>()
}

/// Empirical TV distance between `samples` and `Unif(reference)` on `binsⁿ` cells over the
/// reference's bounding box. Cell masses are Monte Carlo estimates drawn from `seed`.
pub fn empirical_tv(samples: &[Vector], reference: &Region, bins: usize, seed: u64) -> Result<f64> {
    ensure!(
        samples.len() >= MIN_TV_SAMPLES,
        "need at least {MIN_TV_SAMPLES} samples, got {}",
        samples.len()
    );
    let grid = Grid::around(reference, bins)?;
    let masses = grid.region_masses(reference, seed)?;
    Ok(tv_against(&grid.histogram(samples), &masses))
}

/// Bins per axis keeping the expected histogram TV of `samples` exact draws near `floor`.
///
/// With `B` occupied cells the expected TV of an exact sample is about `√(B / (2πN))`.
pub fn noise_floor_bins(n: usize, samples: usize, floor: f64) -> usize {
    let cells = 2.0 * std::f64::consts::PI * samples as f64 * floor * floor;
    (cells.powf(1.0 / n as f64).floor() as usize).max(2)
}

/// Outcome of a χ² test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn chi_square(statistic: f64, df: usize) -> ChiSquare {
    let p_value = if !statistic.is_finite() {
        0.0
    } else if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    ChiSquare {
        statistic,
        df,
        p_value,
    }
}

/// Goodness of fit of a histogram to reference cell masses (overflow included).
pub fn chi2_gof(hist: &Histogram, masses: &[f64]) -> ChiSquare {
    let n = hist.total() as f64;
    let mut stat = 0.0;
    let mut used = 0usize;
    for (c, m) in hist
        .with_overflow()
        .into_iter()
        .zip(masses_with_overflow(masses))
    {
        let expected = n * m;
        if expected > 1e-12 {
            stat += (c as f64 - expected).powi(2) / expected;
            used += 1;
        } else if c > 0 {
            stat = f64::INFINITY;
        }
    }
    chi_square(stat, used.saturating_sub(1))
}

/// Two-sample χ² homogeneity test over the cells either histogram visits.
pub fn chi2_two_sample(a: &Histogram, b: &Histogram) -> ChiSquare {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (x, y) in a.with_overflow().into_iter().zip(b.with_overflow()) {
        if x + y > 0 {
            stat += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
            used += 1;
        }
    }
    chi_square(stat, used.saturating_sub(1))
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Plug-in and Miller–Madow entropy estimates in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub plug_in: f64,
    pub miller_madow: f64,
    pub symbols: usize,
    pub samples: u64,
}

pub fn entropy_bits<T: Hash + Eq>(symbols: impl IntoIterator<Item = T>) -> EntropyEstimate {
    let mut counts: HashMap<T, u64> = HashMap::new();
    for s in symbols {
        *counts.entry(s).or_default() += 1;
    }
    entropy_from_counts(counts.values().copied())
}

pub fn entropy_from_counts(counts: impl IntoIterator<Item = u64>) -> EntropyEstimate {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return EntropyEstimate {
            plug_in: 0.0,
            miller_madow: 0.0,
            symbols: 0,
            samples: 0,
        };
    }
    let nf = n as f64;
    let plug_in = -counts
        .iter()
        .map(|&c| c as f64 / nf)
        .map(|p| p * p.log2())
        .sum::<f64>();
    let miller_madow = plug_in + (counts.len() as f64 - 1.0) / (2.0 * nf * std::f64::consts::LN_2);
    EntropyEstimate {
        plug_in,
        miller_madow,
        symbols: counts.len(),
        samples: n,
    }
}

/// One radius of [`entropy_convergence`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub r: f64,
    pub entropy: EntropyEstimate,
    /// `log₂ μ(rA)`.
    pub log_volume: f64,
    /// `H(Q(x)) − log₂ μ(rA)` with the Miller–Madow estimate.
    pub excess: f64,
    /// `excess − H̄(Q)`.
    pub gap: f64,
}

/// `H(Q(x)) − log₂ μ(rA)` for `x ∼ Unif(rA)` at each radius, compared with `H̄(Q)`.
pub fn entropy_convergence(
    q: &ShiftPeriodicQuantizer,
    shape: &Region,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    ensure!(radii.windows(2).all(|w| w[0] < w[1]), "radii must increase");
    ensure!(radii.iter().all(|&r| r > 0.0), "radii must be positive");
    ensure!(
        shape.dim() == q.dim(),
        "shape and quantizer dimensions differ"
    );
    let mu = match shape.closed_form_volume() {
        Some(v) => v,
        None => {
            shape
                .volume(
                    spq_core::region::DEFAULT_VOLUME_BUDGET,
                    derive_seed(seed, 0xA11),
                )?
                .value
        }
    };
    shape.sample_uniform(&mut substream(seed, 0))?;
    let limit = q.normalized_entropy();
    let n = q.dim() as f64;
    Ok(radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let cells = collect_shards(samples, derive_seed(seed, i as u64 + 1), |rng| {
                let x = shape
                    .sample_uniform(rng)
                    .expect("shape was sampled above")
                    .scale(r);
                q.quantize(&x).cell
            });
            let entropy = entropy_bits(cells);
            let log_volume = (mu * r.powf(n)).log2();
            let excess = entropy.miller_madow - log_volume;
            ConvergenceRow {
                r,
                entropy,
                log_volume,
                excess,
                gap: excess - limit,
            }
        })
        .collect())
}

/// One radius of [`cor2_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cor2Row {
    pub r: f64,
    pub tv: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Slack added to truncation TV bounds for histogram noise.
pub const TV_SLACK: f64 = 0.02;

/// Errors of `x ∼ Unif(r·G·B_n)` against `Unif(error region)` for each radius.
///
/// The bound is evaluated in lattice coordinates, where the input set is `r·B_n` with
/// volume `rⁿ μ(B_n)`.
pub fn cor2_check(
    q: &ShiftPeriodicQuantizer,
    radii: &[f64],
    samples: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<Cor2Row>> {
    let n = q.dim();
    let reference = q.error_region()?;
    let grid = Grid::around(&reference, bins)?;
    let masses = grid.region_masses(&reference, derive_seed(seed, 0))?;
    let g = *q.lattice().generator();
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            ensure!(r > 0.0, "radii must be positive");
            let ball = Region::unit_ball(n);
            let errors = collect_shards(samples, derive_seed(seed, i as u64 + 1), |rng| {
                let x = g.mul_vec(&ball.sample_uniform(rng).expect("unit ball").scale(r));
                x - q.quantize(&x).q
            });
            let tv = tv_against(&grid.histogram(&errors), &masses);
            let bound = cor2_tv_bound(n, r, r.powi(n as i32) * unit_ball_volume(n));
            Ok(Cor2Row {
                r,
                tv,
                bound,
                pass: tv <= bound + TV_SLACK,
            })
        })
        .collect()
}

/// Kind of statistic recorded in a [`TestReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Tv,
    /// Smallest p-value over a family of χ² tests.
    ChiSquareP,
    Ks,
    EntropyBits,
    /// Largest absolute deviation.
    Deviation,
    Seconds,
    Count,
}

/// Outcome of one named check. Every field except `runtime_s` is a function of the inputs and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub kind: Statistic,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub samples: u64,
    pub seed: u64,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl TestReport {
    /// Report that passes when `statistic <= threshold`.
    pub fn at_most(
        name: &str,
        kind: Statistic,
        statistic: f64,
        threshold: f64,
        samples: u64,
        seed: u64,
        started: Instant,
    ) -> Self {
        Self::new(
            name,
            kind,
            statistic,
            threshold,
            statistic <= threshold,
            samples,
            seed,
            started,
        )
    }

    /// Report that passes when `statistic > threshold`.
    pub fn above(
        name: &str,
        kind: Statistic,
        statistic: f64,
        threshold: f64,
        samples: u64,
        seed: u64,
        started: Instant,
    ) -> Self {
        Self::new(
            name,
            kind,
            statistic,
            threshold,
            statistic > threshold,
            samples,
            seed,
            started,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        kind: Statistic,
        statistic: f64,
        threshold: f64,
        pass: bool,
        samples: u64,
        seed: u64,
        started: Instant,
    ) -> Self {
        TestReport {
            name: name.to_owned(),
            kind,
            statistic,
            threshold,
            pass,
            samples,
            seed,
            runtime_s: started.elapsed().as_secs_f64(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Failed report for a check that could not run.
    pub fn error(name: &str, seed: u64, started: Instant, err: &anyhow::Error) -> Self {
        Self::new(
            name,
            Statistic::Count,
            f64::NAN,
            f64::NAN,
            false,
            0,
            seed,
            started,
        )
        .with_note(format!("error: {err:#}"))
    }

    /// One aligned text line.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{verdict}  {:<44} {:>12.6} vs {:>10.6}  n={:<9} {:>7.2}s",
            self.name, self.statistic, self.threshold, self.samples, self.runtime_s
        );
        if !self.note.is_empty() {
            s.push_str("  ");
            s.push_str(&self.note);
        }
        s
    }
}

/// Significance level of the χ² checks.
pub const ALPHA: f64 = 0.01;

/// Pairwise two-sample χ² over error histograms at several fixed inputs.
///
/// `errors(x, rng)` draws one error for input `x`. Probe `i` uses its own seed derived
/// from `seed`. Passes iff every pair has `p > ALPHA`; the statistic is the smallest p.
pub fn independence_check<F>(
    name: &str,
    probes: &[Vector],
    samples: usize,
    grid: &Grid,
    seed: u64,
    errors: F,
) -> Result<TestReport>
where
    F: Fn(&Vector, &mut StreamRng) -> Vector + Sync,
{
    let started = Instant::now();
    ensure!(probes.len() >= 2, "independence needs at least two probes");
    let hists: Vec<Histogram> = probes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let e = collect_shards(samples, derive_seed(seed, i as u64), |rng| errors(x, rng));
            grid.histogram(&e)
        })
        .collect();
    let mut min_p = 1.0f64;
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            min_p = min_p.min(chi2_two_sample(&hists[i], &hists[j]).p_value);
        }
    }
    let note = format!("{} probes, {} bins per axis", probes.len(), grid.bins());
    Ok(TestReport::above(
        name,
        Statistic::ChiSquareP,
        min_p,
        ALPHA,
        (samples * probes.len()) as u64,
        seed,
        started,
    )
    .with_note(note))
}

/// Folding test for a Nyquist dither: reduce draws modulo the lattice and test uniformity of
/// `frac(G⁻¹w)` on a `binsⁿ` grid of the unit cube with a χ² goodness of fit.
pub fn folding_check<F>(
    name: &str,
    lattice: &Lattice,
    samples: usize,
    bins: usize,
    seed: u64,
    draw: F,
) -> Result<TestReport>
where
    F: Fn(&mut StreamRng) -> Vector + Sync,
{
    let started = Instant::now();
    let n = lattice.dim();
    let inv = *lattice.generator_inverse();
    let folded = collect_shards(samples, seed, |rng| {
        inv.mul_vec(&draw(rng)).map(|t| t - t.floor())
    });
    let grid = Grid::new(Vector::zeros(n), Vector::splat(n, 1.0), bins)?;
    let hist = grid.histogram(&folded);
    let masses = vec![1.0 / grid.cells() as f64; grid.cells()];
    let chi = chi2_gof(&hist, &masses);
    Ok(TestReport::above(
        name,
        Statistic::ChiSquareP,
        chi.p_value,
        ALPHA,
        samples as u64,
        seed,
        started,
    )
    .with_note(format!("chi2 = {:.1} on {} df", chi.statistic, chi.df)))
}

/// Draw errors of `q` under `x ∼ Unif(S)` (its error distribution), in parallel.
pub fn sample_errors(q: &ShiftPeriodicQuantizer, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let cell = q.basic_cell_region()?;
    cell.sample_uniform(&mut substream(seed, u64::MAX))
        .map_err(|e| anyhow!("basic cell: {e}"))?;
    Ok(collect_shards(count, seed, |rng| {
        let u = cell
            .sample_uniform(rng)
            .expect("basic cell was sampled above");
        u - q.quantize(&u).q
    }))
}

/// Fail unless `values` is non-increasing in absolute value.
pub fn check_decreasing(values: &[f64]) -> Result<()> {
    for w in values.windows(2) {
        if w[1].abs() > w[0].abs() {
            bail!("|{}| after |{}| is not a decrease", w[1], w[0]);
        }
    }
    Ok(())
}
