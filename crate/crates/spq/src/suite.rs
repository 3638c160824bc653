//! Named validation checks shared by `spq validate`, `spq reproduce` and the acceptance run.
//!
//! Every check returns a [`TestReport`]; a check that cannot run reports a failure with
//! the error in its note instead of aborting the suite.

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use spq_core::bounds::{
    hexagon_disk_bound, packing_density, reproduce_paper_table, sphere_packing_lower_bound,
    ReferenceRow,
};
use spq_core::dissect::{dissection_entropy, DissectConfig};
use spq_core::dither::{DitherKind, DitheredChannel, NyquistDither};
use spq_core::layered::{EllipticalDensity, LayeredChannel};
use spq_core::linalg::unit_ball_volume;
use spq_core::quantizer::{ShiftPeriodicQuantizer, Variant};
use spq_core::region::uniform_in_box;
use spq_core::rng::{derive_seed, substream};
use spq_core::{BasicCell, Lattice, Matrix, NamedLattice, Region, Vector};

use crate::eval::{
    self, check_decreasing, chi2_gof, chi2_two_sample, cor2_check, entropy_convergence,
    folding_check, independence_check, ks_one_sample, ks_two_sample, noise_floor_bins, tv_against,
    tv_between, Grid, Statistic, TestReport, ALPHA, TV_SLACK,
};
use crate::formats;
use crate::par::collect_shards;
use crate::partition::partition_grid;
use crate::presets::{build_preset, summarize, Preset};

/// Which checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// The twelve acceptance checks.
    Acceptance,
    /// Acceptance checks plus the per-module invariants.
    Full,
    /// Per-module invariants at reduced sample sizes.
    Quick,
}

/// Sample sizes and construction budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    /// Samples per statistical check.
    pub samples: usize,
    /// Samples for the 3D complement volumes.
    pub volume_samples: usize,
    /// Samples per radius in the entropy-convergence experiment.
    pub entropy_samples: usize,
    /// Points compared in the serialization round trip.
    pub round_trip_points: usize,
    /// Points per axis of the partition export check.
    pub partition_points: usize,
    pub dissect: DissectConfig,
}

impl Settings {
    pub fn full(seed: u64) -> Self {
        Settings {
            seed,
            samples: 100_000,
            volume_samples: 1_000_000,
            entropy_samples: 1_000_000,
            round_trip_points: 10_000,
            partition_points: 400,
            dissect: DissectConfig {
                seed,
                ..DissectConfig::default()
            },
        }
    }

    pub fn quick(seed: u64) -> Self {
        Settings {
            seed,
            samples: 20_000,
            volume_samples: 100_000,
            entropy_samples: 100_000,
            round_trip_points: 2_000,
            partition_points: 100,
            dissect: DissectConfig {
                seed,
                max_pieces: 16,
                budget: 50_000,
                volume_budget: 200_000,
                ..DissectConfig::default()
            },
        }
    }

    fn derive(&self, tag: u64) -> u64 {
        derive_seed(self.seed, tag)
    }
}

/// Quantizers built once and shared by the checks.
pub struct Fixture {
    pub hex_disk: ShiftPeriodicQuantizer,
    pub hex_disk_seconds: f64,
    pub others: Vec<(Preset, ShiftPeriodicQuantizer, f64)>,
}

impl Fixture {
    /// Build the hexagon/disk quantizer and, if `all`, the other shipped examples.
    pub fn build(settings: &Settings, all: bool) -> Result<Self> {
        let timed = |p| -> Result<(ShiftPeriodicQuantizer, f64)> {
            let t = Instant::now();
            let q = build_preset(p, &settings.dissect)?;
            Ok((q, t.elapsed().as_secs_f64()))
        };
        let (hex_disk, hex_disk_seconds) = timed(Preset::HexagonDisk)?;
        let mut others = Vec::new();
        if all {
            for p in [Preset::SquareDisk, Preset::FccBall, Preset::BccBall] {
                let (q, s) = timed(p)?;
                others.push((p, q, s));
            }
        }
        Ok(Fixture {
            hex_disk,
            hex_disk_seconds,
            others,
        })
    }

    /// Every shipped example with a dissection.
    pub fn shipped(&self) -> Vec<(Preset, &ShiftPeriodicQuantizer)> {
        let mut v = vec![(Preset::HexagonDisk, &self.hex_disk)];
        v.extend(self.others.iter().map(|(p, q, _)| (*p, q)));
        v
    }
}

fn guard(name: &str, seed: u64, check: impl FnOnce(Instant) -> Result<TestReport>) -> TestReport {
    let started = Instant::now();
    check(started).unwrap_or_else(|e| TestReport::error(name, seed, started, &e))
}

/// Target value of the hexagon/disk entropy bound.
pub const HEX_DISK_BOUND: f64 = -1.01666;
/// `−log₂ π`, the lower end of the hexagon/disk sandwich.
pub const HEX_DISK_LOWER: f64 = -1.65150;

pub fn example1_bound(seed: u64) -> TestReport {
    let name = "hexagon/disk entropy bound";
    guard(name, seed, |started| {
        let b = hexagon_disk_bound()?;
        let dev = (b.value - HEX_DISK_BOUND).abs();
        let secs = started.elapsed().as_secs_f64();
        Ok(TestReport::new(
            name,
            Statistic::Deviation,
            dev,
            1e-3,
            dev <= 1e-3 && secs < 1.0,
            0,
            seed,
            started,
        )
        .with_note(format!("bound {:.6} bits in {secs:.3}s", b.value)))
    })
}

fn table_rows(rows: &[ReferenceRow], filter: impl Fn(&str) -> bool) -> Vec<&ReferenceRow> {
    rows.iter().filter(|r| filter(&r.quantity)).collect()
}

pub fn example2_bounds(s: &Settings) -> TestReport {
    let name = "fcc/bcc ball bounds and complement volumes";
    guard(name, s.seed, |started| {
        let rows = reproduce_paper_table(s.volume_samples, s.seed)?;
        let picked = table_rows(&rows, |q| q.starts_with("fcc") || q.starts_with("bcc "));
        ensure!(
            picked.len() == 4,
            "expected four fcc/bcc rows, found {}",
            picked.len()
        );
        let secs = started.elapsed().as_secs_f64();
        let worst = picked
            .iter()
            .filter(|r| r.quantity.contains("entropy"))
            .map(|r| (r.computed - r.reference).abs())
            .fold(0.0, f64::max);
        let pass = picked.iter().all(|r| r.pass) && secs < 30.0;
        let note = picked
            .iter()
            .map(|r| format!("{} = {:.5}", r.quantity, r.computed))
            .collect::<Vec<_>>()
            .join("; ");
        Ok(TestReport::new(
            name,
            Statistic::Deviation,
            worst,
            5e-3,
            pass,
            s.volume_samples as u64,
            s.seed,
            started,
        )
        .with_note(format!("{note}; {secs:.1}s")))
    })
}

pub fn packing_converse(seed: u64) -> TestReport {
    let name = "sphere-packing converse bounds";
    guard(name, seed, |started| {
        let mut worst = 0.0f64;
        let mut values = Vec::new();
        for (n, reference) in [(2usize, -1.65142), (3, -2.06641)] {
            let v = sphere_packing_lower_bound(n, packing_density(n)?)?;
            worst = worst.max((v - reference).abs());
            values.push(format!("n={n}: {v:.6}"));
        }
        Ok(
            TestReport::at_most(name, Statistic::Deviation, worst, 1e-4, 0, seed, started)
                .with_note(values.join(", ")),
        )
    })
}

pub fn sandwich(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "hexagon/disk entropy sandwich";
    guard(name, s.seed, |started| {
        let h = fix.hex_disk.normalized_entropy();
        let (lo, hi) = (HEX_DISK_LOWER - 0.02, HEX_DISK_BOUND + 0.05);
        let pieces = fix.hex_disk.dissection().map_or(0, |d| d.piece_count() + 1);
        let pass = (lo..=hi).contains(&h) && fix.hex_disk_seconds < 120.0;
        Ok(TestReport::new(
            name,
            Statistic::EntropyBits,
            h,
            hi,
            pass,
            s.dissect.budget as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "{lo:.5} <= H = {h:.5} <= {hi:.5}; k = {pieces}; built in {:.1}s",
            fix.hex_disk_seconds
        )))
    })
}

fn bins_for(n: usize, samples: usize) -> usize {
    noise_floor_bins(n, samples, 0.01)
}

pub fn error_law(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "hexagon/disk error law vs Unif(disk)";
    guard(name, s.seed, |started| {
        let summary = summarize(&fix.hex_disk, &s.dissect)?;
        let errors = eval::sample_errors(&fix.hex_disk, s.samples, s.derive(5))?;
        let bins = bins_for(2, s.samples);
        let tv = eval::empirical_tv(&errors, &Region::unit_ball(2), bins, s.derive(50))?;
        let threshold = summary.tv_bound + TV_SLACK;
        Ok(TestReport::at_most(
            name,
            Statistic::Tv,
            tv,
            threshold,
            s.samples as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "truncation bound {:.4}; {bins}x{bins} bins",
            summary.tv_bound
        )))
    })
}

pub fn dissection_ledger(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "dissection residual and entropy ledger";
    guard(name, s.seed, |started| {
        let mut worst = f64::NEG_INFINITY;
        let mut notes = Vec::new();
        let mut pass = true;
        for (preset, q) in fix.shipped() {
            let d = q
                .dissection()
                .context("shipped example without a dissection")?;
            // γ_0 = μ(A) = η/κ holds by definition, so only the greedy steps are informative.
            for (i, (g, se)) in d
                .residual_masses()
                .iter()
                .zip(d.residual_std_errors())
                .enumerate()
                .skip(1)
            {
                let ratio = g / (d.residual_bound(i) + 3.0 * se);
                worst = worst.max(ratio);
                pass &= ratio <= 1.0;
            }
            let h = dissection_entropy(d);
            let cap = (d.eta() / d.mass().value).log2() + 4.0 + 0.05;
            pass &= h <= cap;
            notes.push(format!(
                "{preset:?}: {} pieces, H = {h:.3} <= {cap:.3}",
                d.piece_count()
            ));
        }
        Ok(TestReport::new(
            name,
            Statistic::Deviation,
            worst,
            1.0,
            pass,
            0,
            s.seed,
            started,
        )
        .with_note(format!(
            "largest gamma_i / (eta/(kappa+i) + 3 sigma) over i >= 1; {}",
            notes.join("; ")
        )))
    })
}

pub fn baseline_exactness(s: &Settings) -> TestReport {
    let name = "A = S gives the lattice entropy exactly";
    guard(name, s.seed, |started| {
        let mut worst = 0.0f64;
        for p in [Preset::HexagonIdentity, Preset::Interval] {
            let q = build_preset(p, &s.dissect)?;
            ensure!(
                q.variant() == Variant::LatticeBaseline,
                "{p:?} did not reduce to the lattice quantizer"
            );
            worst = worst.max((q.normalized_entropy() - -q.lattice().det_abs().log2()).abs());
        }
        let square = ShiftPeriodicQuantizer::build_q2(
            Lattice::cubic(2, 1.0)?,
            BasicCell::parallelepiped(2),
            Region::cuboid(&Vector::zeros(2), &Vector::splat(2, 1.0))?,
            &s.dissect,
        )?;
        worst = worst.max(square.normalized_entropy().abs());
        Ok(TestReport::new(
            name,
            Statistic::Deviation,
            worst,
            0.0,
            worst == 0.0,
            0,
            s.seed,
            started,
        ))
    })
}

/// Probe inputs spanning several basic cells.
pub fn probes() -> Vec<Vector> {
    [
        [0.0, 0.0],
        [7.3, -2.1],
        [0.5, 0.5],
        [-3.2, 11.9],
        [100.25, -40.7],
    ]
    .iter()
    .map(|p| Vector::from_slice(p))
    .collect()
}

pub fn dither_independence(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "dithered errors independent of the input";
    guard(name, s.seed, |started| {
        let q = &fix.hex_disk;
        let channel = DitheredChannel::with_voronoi_dither(q);
        let grid = Grid::centered(2, 1.0, 64)?;
        let dithered =
            independence_check(name, &probes(), s.samples, &grid, s.derive(8), |x, rng| {
                channel.transmit(x, rng).error(x)
            })?;
        let control = independence_check(
            "undithered control",
            &probes(),
            s.samples,
            &grid,
            s.derive(80),
            |x, _| *x - q.quantize(x).q,
        )?;
        let pass = dithered.pass && !control.pass;
        Ok(TestReport { pass, ..dithered }.with_note(format!(
            "5 probes, 64x64 bins; undithered control min p = {:.3e} ({})",
            control.statistic,
            if control.pass {
                "did not fail"
            } else {
                "fails as expected"
            }
        )))
        .map(|r| TestReport {
            runtime_s: started.elapsed().as_secs_f64(),
            ..r
        })
    })
}

pub fn entropy_trend(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "entropy of Q(x), x ~ Unif(rB2), approaches H";
    guard(name, s.seed, |started| {
        let rows = entropy_convergence(
            &fix.hex_disk,
            &Region::unit_ball(2),
            &[2.0, 4.0, 8.0, 16.0],
            s.entropy_samples,
            s.derive(9),
        )?;
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let last = gaps.last().copied().unwrap_or(f64::NAN).abs();
        let trend = check_decreasing(&gaps);
        let pass = last <= 0.15 && trend.is_ok();
        let note = format!(
            "gaps {}{}",
            gaps.iter()
                .map(|g| format!("{g:+.4}"))
                .collect::<Vec<_>>()
                .join(" "),
            trend
                .err()
                .map(|e| format!("; trend broken: {e}"))
                .unwrap_or_default()
        );
        Ok(TestReport::new(
            name,
            Statistic::EntropyBits,
            last,
            0.15,
            pass,
            (4 * s.entropy_samples) as u64,
            s.seed,
            started,
        )
        .with_note(note))
    })
}

/// Standard bivariate normal radial CDF.
fn rayleigh_cdf(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        1.0 - (-r * r / 2.0).exp()
    }
}

pub fn layered_gaussian(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "layered Gaussian channel radial law";
    guard(name, s.seed, |started| {
        let f = EllipticalDensity::gaussian(2, 1.0)?;
        let channel = LayeredChannel::new(&f, &fix.hex_disk)?;
        let radii_at = |x: Vector, seed| {
            collect_shards(s.samples, seed, |rng| {
                channel.transmit(&x, rng).transmission.error(&x).norm()
            })
        };
        let r0 = radii_at(Vector::zeros(2), s.derive(10));
        let r1 = radii_at(Vector::from_slice(&[10.0, -3.0]), s.derive(11));
        let ks = ks_one_sample(&r0, rayleigh_cdf);
        let ks2 = ks_two_sample(&r0, &r1);
        let pass = ks <= 0.02 && ks2 <= 0.03;
        Ok(TestReport::new(
            name,
            Statistic::Ks,
            ks,
            0.02,
            pass,
            (2 * s.samples) as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "two-sample KS between x = 0 and x = (10, -3): {ks2:.4} (<= 0.03)"
        )))
    })
}

pub fn truncation_tv(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "error TV for x ~ Unif(rGB2) under the bound";
    guard(name, s.seed, |started| {
        let rows = cor2_check(
            &fix.hex_disk,
            &[5.0, 10.0, 20.0],
            s.samples,
            bins_for(2, s.samples),
            s.derive(12),
        )?;
        let worst = rows
            .iter()
            .map(|r| r.tv - (r.bound + TV_SLACK))
            .fold(f64::NEG_INFINITY, f64::max);
        let note = rows
            .iter()
            .map(|r| format!("r={}: {:.4} vs {:.4}", r.r, r.tv, r.bound + TV_SLACK))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(TestReport::new(
            name,
            Statistic::Tv,
            worst,
            0.0,
            rows.iter().all(|r| r.pass),
            (3 * s.samples) as u64,
            s.seed,
            started,
        )
        .with_note(note))
    })
}

pub fn round_trip(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "quantizer save/load round trip";
    guard(name, s.seed, |started| {
        let path = std::env::temp_dir().join(format!(
            "spq-round-trip-{}-{}.json",
            std::process::id(),
            s.seed
        ));
        formats::save_quantizer(&path, &fix.hex_disk)?;
        let loaded = formats::load_quantizer(&path);
        std::fs::remove_file(&path).ok();
        let loaded = loaded?;
        let mut rng = substream(s.derive(13), 0);
        let (lo, hi) = (Vector::splat(2, -50.0), Vector::splat(2, 50.0));
        let mismatches = (0..s.round_trip_points)
            .filter(|_| {
                let x = uniform_in_box(&lo, &hi, &mut rng);
                let (a, b) = (fix.hex_disk.quantize(&x), loaded.quantize(&x));
                a.cell != b.cell
                    || a.q
                        .as_slice()
                        .iter()
                        .zip(b.q.as_slice())
                        .any(|(u, v)| u.to_bits() != v.to_bits())
            })
            .count();
        Ok(TestReport::at_most(
            name,
            Statistic::Count,
            mismatches as f64,
            0.0,
            s.round_trip_points as u64,
            s.seed,
            started,
        ))
    })
}

/// The twelve acceptance checks, numbered.
pub fn acceptance(fix: &Fixture, s: &Settings) -> Vec<TestReport> {
    let checks = [
        example1_bound(s.seed),
        example2_bounds(s),
        packing_converse(s.seed),
        sandwich(fix, s),
        error_law(fix, s),
        dissection_ledger(fix, s),
        baseline_exactness(s),
        dither_independence(fix, s),
        entropy_trend(fix, s),
        layered_gaussian(fix, s),
        truncation_tv(fix, s),
        round_trip(fix, s),
    ];
    checks
        .into_iter()
        .enumerate()
        .map(|(i, r)| TestReport {
            name: format!("{:>2}. {}", i + 1, r.name),
            ..r
        })
        .collect()
}

pub fn shift_periodicity(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "shift periodicity over v in {-2..2}^n";
    guard(name, s.seed, |started| {
        let mut worst = 0.0f64;
        let mut count = 0u64;
        for (_, q) in fix.shipped() {
            let n = q.dim();
            let g = q.lattice().generator();
            let mut rng = substream(s.derive(20), n as u64);
            let (lo, hi) = (Vector::splat(n, -10.0), Vector::splat(n, 10.0));
            for _ in 0..200 {
                let x = uniform_in_box(&lo, &hi, &mut rng);
                let base = q.quantize(&x).q;
                for code in 0..5usize.pow(n as u32) {
                    let v =
                        Vector::from_fn(n, |i| ((code / 5usize.pow(i as u32)) % 5) as f64 - 2.0);
                    let shift = g.mul_vec(&v);
                    let moved = q.quantize(&(x + shift)).q;
                    worst = worst.max(
                        (moved - base - shift)
                            .as_slice()
                            .iter()
                            .fold(0.0, |m, d| m.max(d.abs())),
                    );
                    count += 1;
                }
            }
        }
        Ok(TestReport::at_most(
            name,
            Statistic::Deviation,
            worst,
            1e-9,
            count,
            s.seed,
            started,
        ))
    })
}

pub fn error_bounds(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "errors bounded by r_A + r_S";
    guard(name, s.seed, |started| {
        let mut worst = f64::NEG_INFINITY;
        let mut notes = Vec::new();
        for (preset, q) in fix.shipped() {
            let limit = q.target().bounding_radius() + q.cell_region().bounding_radius();
            let cell = q.basic_cell_region()?;
            let mut rng = substream(s.derive(21), q.dim() as u64);
            let mut residual = 0;
            for _ in 0..s.samples / 10 {
                let u = cell.sample_uniform(&mut rng)?;
                let r = q.quantize(&u);
                let e = (u - r.q).norm();
                worst = worst.max(e - q.max_error_radius());
                if r.residual {
                    residual += 1;
                } else {
                    worst = worst.max(e - limit);
                }
            }
            notes.push(format!("{preset:?}: {residual} residual"));
        }
        Ok(TestReport::at_most(
            name,
            Statistic::Deviation,
            worst,
            1e-9,
            (s.samples / 10 * fix.shipped().len()) as u64,
            s.seed,
            started,
        )
        .with_note(notes.join(", ")))
    })
}

pub fn entropy_bounds(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "-log mu(A) - 0.02 <= H <= construction bound";
    guard(name, s.seed, |started| {
        let mut worst = f64::NEG_INFINITY;
        let mut notes = Vec::new();
        for (preset, q) in fix.shipped() {
            let sm = summarize(q, &s.dissect)?;
            let upper = sm.upper_bound.context("no construction bound")?;
            worst = worst
                .max(sm.lower_bound - 0.02 - sm.normalized_entropy)
                .max(sm.normalized_entropy - upper);
            notes.push(format!(
                "{preset:?}: {:.4} <= {:.4} <= {:.4}",
                sm.lower_bound, sm.normalized_entropy, upper
            ));
        }
        Ok(
            TestReport::at_most(name, Statistic::Deviation, worst, 0.0, 0, s.seed, started)
                .with_note(notes.join("; ")),
        )
    })
}

/// Error histograms under different Nyquist inputs agree pairwise.
pub fn nyquist_invariance(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "Nyquist inputs give the same error law";
    guard(name, s.seed, |started| {
        // Two independent histograms double the variance: aim the bins at a 0.007 floor.
        let q = &fix.hex_disk;
        let bins = noise_floor_bins(2, s.samples, 0.007);
        let grid = Grid::centered(2, q.max_error_radius(), bins)?;
        let cell = q.basic_cell_region()?;
        let sub = NyquistDither::new(
            DitherKind::UniformSublatticeCell {
                index: Matrix::diagonal(&Vector::splat(2, 2.0)),
            },
            q.lattice().clone(),
        )?;
        let a = collect_shards(s.samples, s.derive(22), |rng| {
            let x = cell.sample_uniform(rng).expect("basic cell");
            x - q.quantize(&x).q
        });
        let b = collect_shards(s.samples, s.derive(23), |rng| {
            let x = sub.sample(rng);
            x - q.quantize(&x).q
        });
        let tv2 = tv_between(&grid.histogram(&a), &grid.histogram(&b));

        // One-dimensional quantizer with a two-piece target, fed triangular and uniform inputs.
        let lattice = Lattice::cubic(1, 1.0)?;
        let target = Region::union(vec![
            Region::cuboid(&Vector::from_slice(&[-0.25]), &Vector::from_slice(&[0.25]))?,
            Region::cuboid(&Vector::from_slice(&[0.6]), &Vector::from_slice(&[1.1]))?,
        ])?;
        let q1 = ShiftPeriodicQuantizer::build_q2(
            lattice.clone(),
            BasicCell::Voronoi,
            target,
            &s.dissect,
        )?;
        let tri = NyquistDither::new(DitherKind::Triangular1d, lattice)?;
        let bins1 = noise_floor_bins(1, s.samples, 0.007);
        let grid1 = Grid::centered(1, q1.max_error_radius(), bins1)?;
        let cell1 = q1.basic_cell_region()?;
        let c = collect_shards(s.samples, s.derive(24), |rng| {
            let x = cell1.sample_uniform(rng).expect("basic cell");
            x - q1.quantize(&x).q
        });
        let d = collect_shards(s.samples, s.derive(25), |rng| {
            let x = tri.sample(rng);
            x - q1.quantize(&x).q
        });
        let tv1 = tv_between(&grid1.histogram(&c), &grid1.histogram(&d));
        Ok(TestReport::at_most(
            name,
            Statistic::Tv,
            tv2.max(tv1),
            TV_SLACK,
            (4 * s.samples) as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "2D cell vs 2x sublattice cell: {tv2:.4}; 1D uniform vs triangular: {tv1:.4}"
        )))
    })
}

pub fn folding(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "folding test separates Nyquist from half-cell dither";
    guard(name, s.seed, |started| {
        let lattice = fix.hex_disk.lattice().clone();
        let dither = NyquistDither::uniform_voronoi(lattice.clone());
        let good = folding_check(
            "voronoi dither",
            &lattice,
            s.samples,
            16,
            s.derive(26),
            |rng| dither.sample(rng),
        )?;
        let g = *lattice.generator();
        let half = folding_check(
            "half-cell dither",
            &lattice,
            s.samples,
            16,
            s.derive(27),
            |rng| {
                g.mul_vec(&uniform_in_box(
                    &Vector::zeros(2),
                    &Vector::from_slice(&[0.5, 1.0]),
                    rng,
                ))
            },
        )?;
        let pass = good.pass && !half.pass;
        Ok(TestReport::new(
            name,
            Statistic::ChiSquareP,
            good.statistic,
            ALPHA,
            pass,
            (2 * s.samples) as u64,
            s.seed,
            started,
        )
        .with_note(format!("half-cell control p = {:.3e}", half.statistic)))
    })
}

pub fn dithered_error_law(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "dithered error law at a far input";
    guard(name, s.seed, |started| {
        let q = &fix.hex_disk;
        let summary = summarize(q, &s.dissect)?;
        let channel = DitheredChannel::with_voronoi_dither(q);
        let far = Vector::from_slice(&[7.3, -2.1]);
        let errs = |x: Vector, seed| {
            collect_shards(s.samples, seed, |rng| channel.transmit(&x, rng).error(&x))
        };
        let (e_far, e_zero) = (
            errs(far, s.derive(28)),
            errs(Vector::zeros(2), s.derive(29)),
        );
        let disk = Region::unit_ball(2);
        let bins = bins_for(2, s.samples);
        let tv = eval::empirical_tv(&e_far, &disk, bins, s.derive(30))?;
        let grid = Grid::around(&disk, noise_floor_bins(2, s.samples, 0.007))?;
        let pair = tv_between(&grid.histogram(&e_far), &grid.histogram(&e_zero));
        let pass = tv <= summary.tv_bound + TV_SLACK && pair <= 0.03;
        Ok(TestReport::new(
            name,
            Statistic::Tv,
            tv,
            summary.tv_bound + TV_SLACK,
            pass,
            (2 * s.samples) as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "TV between x = (7.3, -2.1) and x = 0: {pair:.4} (<= 0.03)"
        )))
    })
}

pub fn layered_mixture(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "layered mixture matches the Gaussian density";
    guard(name, s.seed, |started| {
        let f = EllipticalDensity::gaussian(2, 1.0)?;
        let channel = LayeredChannel::new(&f, &fix.hex_disk)?;
        let x = Vector::from_slice(&[0.3, -1.7]);
        let draws = collect_shards(s.samples, s.derive(31), |rng| {
            let t = channel.transmit(&x, rng);
            (t.level.radius, t.transmission.error(&x))
        });
        let grid = Grid::centered(2, 4.0, bins_for(2, s.samples))?;
        let masses = grid.integrate(|e| f.density(e), s.derive(32));
        let errors: Vec<Vector> = draws.iter().map(|d| d.1).collect();
        let tv = tv_against(&grid.histogram(&errors), &masses);

        // Given its level, an error scaled back by the level radius follows the unit quantizer's
        // dithered error law, which is compared against a fresh sample of that law.
        let mut sorted: Vec<(f64, Vector)> =
            draws.iter().map(|&(r, e)| (r, e.scale(1.0 / r))).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let buckets = (s.samples / 1000).clamp(1, 5);
        let unit = DitheredChannel::with_voronoi_dither(&fix.hex_disk);
        let zero = Vector::zeros(2);
        let reference = collect_shards(s.samples, s.derive(33), |rng| {
            unit.transmit(&zero, rng).error(&zero)
        });
        let ugrid = Grid::around(&Region::unit_ball(2), 6)?;
        let href = ugrid.histogram(&reference);
        let min_p = sorted
            .chunks(sorted.len().div_ceil(buckets))
            .map(|chunk| {
                chi2_two_sample(&ugrid.histogram(chunk.iter().map(|c| &c.1)), &href).p_value
            })
            .fold(1.0, f64::min);

        // Mean squared error scales with σ².
        let mse = |sigma: f64, seed| -> Result<f64> {
            let g = EllipticalDensity::gaussian(2, sigma)?;
            let ch = LayeredChannel::new(&g, &fix.hex_disk)?;
            let e = collect_shards(s.samples, seed, |rng| {
                ch.transmit(&x, rng).transmission.error(&x).norm_sq()
            });
            Ok(e.iter().sum::<f64>() / e.len() as f64 / (2.0 * sigma * sigma))
        };
        let (m1, m2) = (mse(0.25, s.derive(34))?, mse(4.0, s.derive(35))?);
        let pass = tv <= 0.03
            && min_p > ALPHA / buckets as f64
            && (m1 - 1.0).abs() < 0.05
            && (m2 - 1.0).abs() < 0.05;
        Ok(TestReport::new(name, Statistic::Tv, tv, 0.03, pass, (3 * s.samples) as u64, s.seed, started).with_note(format!(
            "per-level two-sample chi2 min p = {min_p:.3} over {buckets} buckets (Bonferroni); MSE/(2 sigma^2) = {m1:.4}, {m2:.4}"
        )))
    })
}

pub fn level_law(s: &Settings) -> TestReport {
    let name = "level R has density mu(A_r)";
    guard(name, s.seed, |started| {
        let f = EllipticalDensity::gaussian(1, 1.0)?;
        let levels = collect_shards(s.samples, s.derive(36), |rng| {
            Vector::from_slice(&[f.sample_level(rng).r])
        });
        let grid = Grid::new(Vector::zeros(1), Vector::splat(1, f.peak()), 50)?;
        let masses = grid.integrate(
            |r| f.level_density(r.as_slice()[0].max(1e-300)).unwrap_or(0.0),
            s.derive(37),
        );
        let chi = chi2_gof(&grid.histogram(&levels), &masses);
        Ok(TestReport::above(
            name,
            Statistic::ChiSquareP,
            chi.p_value,
            ALPHA,
            s.samples as u64,
            s.seed,
            started,
        )
        .with_note(format!(
            "chi2 = {:.1} on {} df, 50 bins",
            chi.statistic, chi.df
        )))
    })
}

pub fn partition_images(fix: &Fixture, s: &Settings) -> TestReport {
    let name = "partition export images land in the disk";
    guard(name, s.seed, |started| {
        let pts = partition_grid(&fix.hex_disk, s.partition_points)?;
        let outside = pts
            .iter()
            .filter(|p| !p.residual && p.image.norm() > 1.0 + 1e-9)
            .count();
        Ok(TestReport::at_most(
            name,
            Statistic::Count,
            outside as f64,
            0.0,
            pts.len() as u64,
            s.seed,
            started,
        ))
    })
}

pub fn ball_volumes(s: &Settings) -> TestReport {
    let name = "Monte Carlo region volumes within 3 sigma";
    guard(name, s.seed, |started| {
        let hex = Lattice::named(
            NamedLattice::Hexagonal,
            2,
            spq_core::lattice::hexagonal_unit_disk_scale(),
        )?;
        let cases = [
            (
                Region::difference(Region::unit_ball(2), Region::unit_ball(2).scale(0.5)?)?,
                0.75 * PI,
            ),
            (
                Region::intersect(vec![Region::voronoi(hex), Region::unit_ball(2)])?,
                PI - 3.0 * {
                    let t = 2.0 * spq_core::lattice::hexagonal_unit_disk_scale().acos();
                    t - t.sin()
                },
            ),
            (
                Region::unit_ball(3).translate(Vector::from_slice(&[1.0, 2.0, 3.0]))?,
                unit_ball_volume(3),
            ),
        ];
        let mut worst = 0.0f64;
        for (i, (region, exact)) in cases.iter().enumerate() {
            let v = region.volume(s.volume_samples, s.derive(40 + i as u64))?;
            let z = if v.std_error > 0.0 {
                (v.value - exact).abs() / v.std_error
            } else {
                (v.value - exact).abs() / 1e-12
            };
            worst = worst.max(z);
        }
        Ok(TestReport::at_most(
            name,
            Statistic::Deviation,
            worst,
            3.0,
            s.volume_samples as u64,
            s.seed,
            started,
        )
        .with_note("largest |estimate - exact| / sigma"))
    })
}

pub fn reproduction_table(s: &Settings) -> TestReport {
    let name = "reproduction table rows";
    guard(name, s.seed, |started| {
        let rows = reproduce_paper_table(s.volume_samples, s.seed)?;
        let failed: Vec<&str> = rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.quantity.as_str())
            .collect();
        Ok(TestReport::at_most(
            name,
            Statistic::Count,
            failed.len() as f64,
            0.0,
            s.volume_samples as u64,
            s.seed,
            started,
        )
        .with_note(if failed.is_empty() {
            format!("{} rows", rows.len())
        } else {
            format!("failed: {}", failed.join(", "))
        }))
    })
}

/// Per-module invariants beyond the acceptance checks.
pub fn invariants(fix: &Fixture, s: &Settings) -> Vec<TestReport> {
    vec![
        shift_periodicity(fix, s),
        error_bounds(fix, s),
        entropy_bounds(fix, s),
        nyquist_invariance(fix, s),
        folding(fix, s),
        dithered_error_law(fix, s),
        layered_mixture(fix, s),
        level_law(s),
        partition_images(fix, s),
        ball_volumes(s),
        reproduction_table(s),
    ]
}

/// Run a suite, building the fixtures it needs.
pub fn run(suite: Suite, s: &Settings) -> Result<Vec<TestReport>> {
    let fix = Fixture::build(s, true)?;
    Ok(match suite {
        Suite::Acceptance => acceptance(&fix, s),
        Suite::Full => {
            let mut v = acceptance(&fix, s);
            v.extend(invariants(&fix, s));
            v
        }
        Suite::Quick => invariants(&fix, s),
    })
}

/// Aligned text rendering of a set of reports.
pub fn render(reports: &[TestReport]) -> String {
    let passed = reports.iter().filter(|r| r.pass).count();
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.line());
        out.push('\n');
    }
    out.push_str(&format!("{passed}/{} passed\n", reports.len()));
    out
}
