//! Shipped quantizer constructions and the summary printed after a build.

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use spq_core::bounds::{lower_bound_uniform, q1_bound, q2_bound};
use spq_core::dissect::{tv_truncation_bound, DissectConfig};
use spq_core::lattice::hexagonal_unit_disk_scale;
use spq_core::linalg::unit_ball_volume;
use spq_core::quantizer::{ShiftPeriodicQuantizer, Variant};
use spq_core::rng::derive_seed;
use spq_core::{BasicCell, Lattice, NamedLattice, Region};

/// Named constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Hexagonal Voronoi cell of area π onto the unit disk (big-cell construction).
    HexagonDisk,
    /// FCC rhombic dodecahedron of volume 4π/3 onto the unit ball.
    FccBall,
    /// BCC truncated octahedron of volume 4π/3 onto the unit ball.
    BccBall,
    /// Square of area π onto the unit disk (whole-cell construction).
    SquareDisk,
    /// Hexagonal Voronoi cell onto itself: the plain lattice quantizer.
    HexagonIdentity,
    /// `[−1, 1)` onto `[−1, 1]`.
    Interval,
}

/// Build description read from JSON by `spq build --spec`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSpec {
    pub lattice: Lattice,
    pub cell: BasicCell,
    pub target: Region,
    pub variant: Variant,
}

pub fn preset_spec(preset: Preset) -> Result<BuildSpec> {
    let ball_lattice = |name| Lattice::named_with_volume(name, 3, unit_ball_volume(3));
    let hex = || Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale());
    Ok(match preset {
        Preset::HexagonDisk => BuildSpec {
            lattice: hex()?,
            cell: BasicCell::Voronoi,
            target: Region::unit_ball(2),
            variant: Variant::Q2,
        },
        Preset::FccBall => BuildSpec {
            lattice: ball_lattice(NamedLattice::Fcc)?,
            cell: BasicCell::Voronoi,
            target: Region::unit_ball(3),
            variant: Variant::Q2,
        },
        Preset::BccBall => BuildSpec {
            lattice: ball_lattice(NamedLattice::Bcc)?,
            cell: BasicCell::Voronoi,
            target: Region::unit_ball(3),
            variant: Variant::Q2,
        },
        Preset::SquareDisk => BuildSpec {
            lattice: Lattice::cubic(2, std::f64::consts::PI.sqrt())?,
            cell: BasicCell::parallelepiped(2),
            target: Region::unit_ball(2),
            variant: Variant::Q1,
        },
        Preset::HexagonIdentity => {
            let lattice = hex()?;
            let target = Region::voronoi(lattice.clone());
            BuildSpec {
                lattice,
                cell: BasicCell::Voronoi,
                target,
                variant: Variant::Q2,
            }
        }
        Preset::Interval => BuildSpec {
            lattice: Lattice::cubic(1, 2.0)?,
            cell: BasicCell::Voronoi,
            target: Region::unit_ball(1),
            variant: Variant::Q2,
        },
    })
}

pub fn build(spec: &BuildSpec, cfg: &DissectConfig) -> Result<ShiftPeriodicQuantizer> {
    let (l, c, t) = (spec.lattice.clone(), spec.cell.clone(), spec.target.clone());
    let q = match spec.variant {
        Variant::LatticeBaseline => ShiftPeriodicQuantizer::baseline(l, c),
        Variant::Q1 => ShiftPeriodicQuantizer::build_q1(l, c, t, cfg),
        Variant::Q2 => ShiftPeriodicQuantizer::build_q2(l, c, t, cfg),
    };
    q.context("building the quantizer")
}

pub fn build_preset(preset: Preset, cfg: &DissectConfig) -> Result<ShiftPeriodicQuantizer> {
    build(&preset_spec(preset)?, cfg)
}

/// Entropy figures of a built quantizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: Variant,
    pub dim: usize,
    pub det: f64,
    pub pieces: usize,
    pub truncated: bool,
    /// `H̄(Q)` in bits.
    pub normalized_entropy: f64,
    /// `−log₂ μ(A)`.
    pub lower_bound: f64,
    /// Construction upper bound evaluated with the dissection's `η`.
    pub upper_bound: Option<f64>,
    /// Total-variation bound for the finite number of pieces.
    pub tv_bound: f64,
    pub eta: Option<f64>,
    pub max_error_radius: f64,
}

/// Summary with `μ(A)` from the closed form, or Monte Carlo at the config's volume budget.
pub fn summarize(q: &ShiftPeriodicQuantizer, cfg: &DissectConfig) -> Result<Summary> {
    let mu_a = match q.target().closed_form_volume() {
        Some(v) => v,
        None => {
            q.target()
                .volume(cfg.volume_budget, derive_seed(cfg.seed, 0x5A))?
                .value
        }
    };
    let d = q.dissection();
    let (upper_bound, tv_bound) = match (q.variant(), d) {
        (Variant::Q1, Some(d)) => (
            Some(q1_bound(d.eta(), mu_a)),
            tv_truncation_bound(d.eta(), d.piece_count(), mu_a),
        ),
        (Variant::Q2, Some(d)) => {
            let hat = d.mass().value;
            (
                Some(q2_bound(hat, mu_a, d.eta())?),
                tv_truncation_bound(d.eta(), d.piece_count(), hat),
            )
        }
        (Variant::LatticeBaseline, None) => (Some(lower_bound_uniform(q.lattice().det_abs())), 0.0),
        _ => bail!("quantizer variant and dissection disagree"),
    };
    Ok(Summary {
        variant: q.variant(),
        dim: q.dim(),
        det: q.lattice().det_abs(),
        pieces: d.map_or(1, |d| {
            d.piece_count() + usize::from(q.variant() == Variant::Q2)
        }),
        truncated: d.is_some_and(|d| d.truncated()),
        normalized_entropy: q.normalized_entropy(),
        lower_bound: lower_bound_uniform(mu_a),
        upper_bound,
        tv_bound,
        eta: d.map(|d| d.eta()),
        max_error_radius: q.max_error_radius(),
    })
}
