//! Bounded subsets of ℝⁿ built from primitives and boolean combinators.
//!
//! Membership is exact (up to floating point) for every node. Volumes are closed
//! form for primitives and their similarity/affine images, and seeded Monte Carlo
//! over the bounding box otherwise.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lattice::{BasicCell, Lattice};
use crate::linalg::{unit_ball_volume, Matrix, Vector};
use crate::polytope::{Halfspace, Polytope};
use crate::rng::{shard_sizes, substream};

/// Default Monte Carlo budget for volume estimates.
pub const DEFAULT_VOLUME_BUDGET: usize = 1_000_000;
/// Smallest Monte Carlo budget accepted by [`Region::volume`].
pub const MIN_VOLUME_BUDGET: usize = 10_000;
/// Monte Carlo volume estimates are split into this many independent substreams.
pub const VOLUME_SHARDS: usize = 16;
/// Rejection sampling gives up after this many proposals.
pub const MAX_PROPOSALS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    ClosedForm,
    Grid,
    MonteCarlo,
}

/// A volume with its standard error and provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: VolumeMethod,
    pub samples: u64,
    pub seed: u64,
}

impl VolumeEstimate {
    pub fn exact(value: f64) -> Self {
        VolumeEstimate {
            value,
            std_error: 0.0,
            method: VolumeMethod::ClosedForm,
            samples: 0,
            seed: 0,
        }
    }

    /// Hit-or-miss estimate from `hits` out of `samples` uniform points in a box of volume `box_volume`.
    ///
    /// With no hits the standard error is reported as `box_volume / samples`, the
    /// resolution of the estimator.
    pub fn from_hits(box_volume: f64, hits: u64, samples: u64, seed: u64) -> Self {
        let p = hits as f64 / samples as f64;
        let value = box_volume * p;
        let std_error = if hits == 0 {
            box_volume / samples as f64
        } else {
            value * libm::sqrt((1.0 - p) / (p * samples as f64))
        };
        VolumeEstimate {
            value,
            std_error,
            method: VolumeMethod::MonteCarlo,
            samples,
            seed,
        }
    }

    /// True when `other` is within `k` combined standard errors (plus round-off slack).
    pub fn agrees_with(&self, other: &VolumeEstimate, k: f64) -> bool {
        let sigma = libm::sqrt(self.std_error * self.std_error + other.std_error * other.std_error);
        let slack = 1e-9 * self.value.abs().max(other.value.abs());
        libm::fabs(self.value - other.value) <= k * sigma + slack
    }
}

/// `{M y + c : ‖y‖ ≤ 1}` with `M` full rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    matrix: Matrix,
    inverse: Matrix,
    center: Vector,
}

impl Ellipsoid {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn center(&self) -> Vector {
        self.center
    }
}

/// `{origin + G u : u ∈ [0,1)ⁿ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parallelepiped {
    generator: Matrix,
    inverse: Matrix,
    origin: Vector,
}

impl Parallelepiped {
    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn origin(&self) -> Vector {
        self.origin
    }
}

/// `{L y + s : y ∈ child}` with `L` full rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    child: Box<Region>,
    matrix: Matrix,
    inverse: Matrix,
    shift: Vector,
}

impl Affine {
    pub fn child(&self) -> &Region {
        &self.child
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn shift(&self) -> Vector {
        self.shift
    }
}

/// A bounded region of ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionSpec", into = "RegionSpec")]
pub enum Region {
    /// Closed ball.
    Ball {
        center: Vector,
        radius: f64,
    },
    Ellipsoid(Ellipsoid),
    Polytope(Polytope),
    Parallelepiped(Parallelepiped),
    /// Voronoi cell of the origin, half-open according to the lattice's tie rule.
    Voronoi(Lattice),
    Translate {
        child: Box<Region>,
        shift: Vector,
    },
    Scale {
        child: Box<Region>,
        factor: f64,
    },
    Affine(Affine),
    Intersect(Vec<Region>),
    Union(Vec<Region>),
    /// `left` minus the closed set `right`.
    Difference {
        left: Box<Region>,
        right: Box<Region>,
    },
}

fn check_vector(v: &Vector, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} has non-finite entries")))
    }
}

impl Region {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        check_vector(&center, "ball center")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn unit_ball(n: usize) -> Self {
        Region::Ball {
            center: Vector::zeros(n),
            radius: 1.0,
        }
    }

    pub fn ellipsoid(matrix: Matrix, center: Vector) -> Result<Self> {
        check_dim(matrix.dim(), center.len())?;
        check_vector(&center, "ellipsoid center")?;
        let inverse = matrix.inverse()?;
        Ok(Region::Ellipsoid(Ellipsoid {
            matrix,
            inverse,
            center,
        }))
    }

    pub fn polytope(halfspaces: Vec<Halfspace>) -> Result<Self> {
        Ok(Region::Polytope(Polytope::new(halfspaces)?))
    }

    pub fn cuboid(lo: &Vector, hi: &Vector) -> Result<Self> {
        Ok(Region::Polytope(Polytope::cuboid(lo, hi)?))
    }

    pub fn parallelepiped(generator: Matrix, origin: Vector) -> Result<Self> {
        check_dim(generator.dim(), origin.len())?;
        check_vector(&origin, "parallelepiped origin")?;
        let inverse = generator.inverse()?;
        Ok(Region::Parallelepiped(Parallelepiped {
            generator,
            inverse,
            origin,
        }))
    }

    pub fn voronoi(lattice: Lattice) -> Self {
        Region::Voronoi(lattice)
    }

    /// The region occupied by `cell` for `lattice`.
    pub fn basic_cell(lattice: &Lattice, cell: &BasicCell) -> Self {
        match cell {
            BasicCell::Voronoi => Region::Voronoi(lattice.clone()),
            BasicCell::Parallelepiped { offset } => Region::Parallelepiped(Parallelepiped {
                generator: *lattice.generator(),
                inverse: *lattice.generator_inverse(),
                origin: *offset,
            }),
        }
    }

    pub fn translate(self, shift: Vector) -> Result<Self> {
        check_dim(self.dim(), shift.len())?;
        check_vector(&shift, "translation")?;
        Ok(Region::Translate {
            child: Box::new(self),
            shift,
        })
    }

    pub fn scale(self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(Region::Scale {
            child: Box::new(self),
            factor,
        })
    }

    pub fn affine(self, matrix: Matrix, shift: Vector) -> Result<Self> {
        check_dim(self.dim(), matrix.dim())?;
        check_dim(self.dim(), shift.len())?;
        check_vector(&shift, "affine shift")?;
        let inverse = matrix.inverse()?;
        Ok(Region::Affine(Affine {
            child: Box::new(self),
            matrix,
            inverse,
            shift,
        }))
    }

    pub fn intersect(children: Vec<Region>) -> Result<Self> {
        Self::check_children(&children)?;
        Ok(Region::Intersect(children))
    }

    pub fn union(children: Vec<Region>) -> Result<Self> {
        Self::check_children(&children)?;
        Ok(Region::Union(children))
    }

    pub fn difference(left: Region, right: Region) -> Result<Self> {
        check_dim(left.dim(), right.dim())?;
        Ok(Region::Difference {
            left: Box::new(left),
            right: Box::new(right),
        })
    }

    fn check_children(children: &[Region]) -> Result<()> {
        let first = children
            .first()
            .ok_or_else(|| Error::Config("combinator needs at least one child".into()))?;
        for c in children {
            check_dim(first.dim(), c.dim())?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Ellipsoid(e) => e.center.len(),
            Region::Polytope(p) => p.dim(),
            Region::Parallelepiped(p) => p.origin.len(),
            Region::Voronoi(l) => l.dim(),
            Region::Translate { shift, .. } => shift.len(),
            Region::Scale { child, .. } => child.dim(),
            Region::Affine(a) => a.shift.len(),
            Region::Intersect(c) | Region::Union(c) => c[0].dim(),
            Region::Difference { left, .. } => left.dim(),
        }
    }

    /// Membership test; dimensions must agree (checked in debug builds, see [`Self::try_contains`]).
    #[inline]
    pub fn contains(&self, x: &Vector) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Region::Ball { center, radius } => (*x - *center).norm_sq() <= radius * radius,
            Region::Ellipsoid(e) => e.inverse.mul_vec(&(*x - e.center)).norm_sq() <= 1.0,
            Region::Polytope(p) => p.contains(x),
            Region::Parallelepiped(p) => {
                let u = p.inverse.mul_vec(&(*x - p.origin));
                u.as_slice().iter().all(|&c| (0.0..1.0).contains(&c))
            }
            Region::Voronoi(l) => l.in_voronoi_cell(x),
            Region::Translate { child, shift } => child.contains(&(*x - *shift)),
            Region::Scale { child, factor } => child.contains(&x.scale(1.0 / factor)),
            Region::Affine(a) => a.child.contains(&a.inverse.mul_vec(&(*x - a.shift))),
            Region::Intersect(c) => c.iter().all(|r| r.contains(x)),
            Region::Union(c) => c.iter().any(|r| r.contains(x)),
            Region::Difference { left, right } => left.contains(x) && !right.contains(x),
        }
    }

    pub fn try_contains(&self, x: &Vector) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains(x))
    }

    /// Axis-aligned box containing the region. May be empty (`lo > hi`) for intersections.
    pub fn bounding_box(&self) -> (Vector, Vector) {
        match self {
            Region::Ball { center, radius } => {
                (center.map(|c| c - radius), center.map(|c| c + radius))
            }
            Region::Ellipsoid(e) => {
                let half = Vector::from_fn(e.center.len(), |i| e.matrix.row(i).norm());
                (e.center - half, e.center + half)
            }
            Region::Polytope(p) => p.bounding_box(),
            Region::Parallelepiped(p) => {
                let n = p.origin.len();
                let lo = Vector::from_fn(n, |i| (0..n).map(|j| p.generator[(i, j)].min(0.0)).sum());
                let hi = Vector::from_fn(n, |i| (0..n).map(|j| p.generator[(i, j)].max(0.0)).sum());
                (p.origin + lo, p.origin + hi)
            }
            Region::Voronoi(l) => l.voronoi_bounding_box(),
            Region::Translate { child, shift } => {
                let (lo, hi) = child.bounding_box();
                (lo + *shift, hi + *shift)
            }
            Region::Scale { child, factor } => {
                let (lo, hi) = child.bounding_box();
                (lo.scale(*factor), hi.scale(*factor))
            }
            Region::Affine(a) => {
                let (lo, hi) = a.child.bounding_box();
                let n = lo.len();
                let mid = (lo + hi).scale(0.5);
                let half = (hi - lo).scale(0.5);
                let c = a.matrix.mul_vec(&mid) + a.shift;
                let h = Vector::from_fn(n, |i| {
                    (0..n).map(|j| libm::fabs(a.matrix[(i, j)]) * half[j]).sum()
                });
                (c - h, c + h)
            }
            Region::Intersect(children) => {
                let mut it = children.iter().map(Region::bounding_box);
                let first = it.next().expect("non-empty");
                it.fold(first, |(lo, hi), (l, h)| {
                    (lo.zip_map(&l, f64::max), hi.zip_map(&h, f64::min))
                })
            }
            Region::Union(children) => {
                let mut it = children.iter().map(Region::bounding_box);
                let first = it.next().expect("non-empty");
                it.fold(first, |(lo, hi), (l, h)| {
                    (lo.zip_map(&l, f64::min), hi.zip_map(&h, f64::max))
                })
            }
            Region::Difference { left, .. } => left.bounding_box(),
        }
    }

    /// A ball `(center, radius)` containing the region.
    ///
    /// Exact (smallest) for balls, ellipsoids and Voronoi cells of centrally symmetric
    /// lattices; polytopes and parallelepipeds use the bounding-box center.
    pub fn bounding_ball(&self) -> (Vector, f64) {
        match self {
            Region::Ball { center, radius } => (*center, *radius),
            Region::Ellipsoid(e) => (e.center, e.matrix.spectral_norm()),
            Region::Polytope(p) => {
                let (lo, hi) = p.bounding_box();
                let c = (lo + hi).scale(0.5);
                (
                    c,
                    p.vertices()
                        .iter()
                        .map(|v| (*v - c).norm())
                        .fold(0.0, f64::max),
                )
            }
            Region::Parallelepiped(p) => {
                let n = p.origin.len();
                let (lo, hi) = self.bounding_box();
                let c = (lo + hi).scale(0.5);
                let r = (0..1usize << n)
                    .map(|mask| {
                        let u = Vector::from_fn(n, |j| ((mask >> j) & 1) as f64);
                        (p.origin + p.generator.mul_vec(&u) - c).norm()
                    })
                    .fold(0.0, f64::max);
                (c, r)
            }
            Region::Voronoi(l) => (Vector::zeros(l.dim()), l.covering_radius()),
            Region::Translate { child, shift } => {
                let (c, r) = child.bounding_ball();
                (c + *shift, r)
            }
            Region::Scale { child, factor } => {
                let (c, r) = child.bounding_ball();
                (c.scale(*factor), r * factor)
            }
            Region::Affine(a) => {
                let (c, r) = a.child.bounding_ball();
                (a.matrix.mul_vec(&c) + a.shift, a.matrix.spectral_norm() * r)
            }
            Region::Intersect(children) => children
                .iter()
                .map(Region::bounding_ball)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty"),
            Region::Union(children) => {
                let (lo, hi) = self.bounding_box();
                let c = (lo + hi).scale(0.5);
                let r = children
                    .iter()
                    .map(|ch| {
                        let (cc, rr) = ch.bounding_ball();
                        (cc - c).norm() + rr
                    })
                    .fold(0.0, f64::max);
                (c, r)
            }
            Region::Difference { left, .. } => left.bounding_ball(),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_ball().1
    }

    /// Closed-form volume when the tree is a primitive under translations, scalings and affine maps.
    pub fn closed_form_volume(&self) -> Option<f64> {
        let n = self.dim();
        match self {
            Region::Ball { radius, .. } => Some(unit_ball_volume(n) * libm::pow(*radius, n as f64)),
            Region::Ellipsoid(e) => Some(libm::fabs(e.matrix.det()) * unit_ball_volume(n)),
            Region::Parallelepiped(p) => Some(libm::fabs(p.generator.det())),
            Region::Voronoi(l) => Some(l.det_abs()),
            Region::Translate { child, .. } => child.closed_form_volume(),
            Region::Scale { child, factor } => child
                .closed_form_volume()
                .map(|v| v * libm::pow(*factor, n as f64)),
            Region::Affine(a) => a
                .child
                .closed_form_volume()
                .map(|v| v * libm::fabs(a.matrix.det())),
            _ => None,
        }
    }

    /// Lebesgue measure of the region.
    ///
    /// Closed form where available; otherwise hit-or-miss Monte Carlo over the
    /// bounding box with `budget` points split across [`VOLUME_SHARDS`] substreams of `seed`.
    pub fn volume(&self, budget: usize, seed: u64) -> Result<VolumeEstimate> {
        if let Some(v) = self.closed_form_volume() {
            return Ok(VolumeEstimate {
                seed,
                ..VolumeEstimate::exact(v)
            });
        }
        let plan = self.monte_carlo_plan(budget)?;
        let Some((lo, hi)) = plan else {
            return Ok(VolumeEstimate {
                seed,
                ..VolumeEstimate::exact(0.0)
            });
        };
        let hits: u64 = shard_sizes(budget, VOLUME_SHARDS)
            .enumerate()
            .map(|(s, count)| self.count_hits(&lo, &hi, count, &mut substream(seed, s as u64)))
            .sum();
        Ok(VolumeEstimate::from_hits(
            box_volume(&lo, &hi),
            hits,
            budget as u64,
            seed,
        ))
    }

    /// Validates a Monte Carlo budget and returns the sampling box (`None` if provably empty).
    pub fn monte_carlo_plan(&self, budget: usize) -> Result<Option<(Vector, Vector)>> {
        if budget < MIN_VOLUME_BUDGET {
            return Err(Error::Config(format!(
                "Monte Carlo budget {budget} below the minimum {MIN_VOLUME_BUDGET}"
            )));
        }
        let (lo, hi) = self.bounding_box();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Unbounded("bounding box is not finite".into()));
        }
        if lo.as_slice().iter().zip(hi.as_slice()).any(|(l, h)| l >= h) {
            return Ok(None);
        }
        Ok(Some((lo, hi)))
    }

    /// Number of `count` uniform points in `[lo, hi)` that fall inside the region.
    pub fn count_hits<R: Rng + ?Sized>(
        &self,
        lo: &Vector,
        hi: &Vector,
        count: usize,
        rng: &mut R,
    ) -> u64 {
        let mut hits = 0;
        for _ in 0..count {
            if self.contains(&uniform_in_box(lo, hi, rng)) {
                hits += 1;
            }
        }
        hits
    }

    /// Uniform sample by rejection from the bounding box (parallelepipeds are sampled directly).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        if let Region::Parallelepiped(p) = self {
            let u = Vector::from_fn(p.origin.len(), |_| rng.random::<f64>());
            let x = p.origin + p.generator.mul_vec(&u);
            // Rounding can push Gu onto the far face; fall back to rejection then.
            if self.contains(&x) {
                return Ok(x);
            }
        }
        let (lo, hi) = self.bounding_box();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Unbounded("bounding box is not finite".into()));
        }
        for _ in 0..MAX_PROPOSALS {
            let x = uniform_in_box(&lo, &hi, rng);
            if self.contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::Degenerate(format!(
            "no accepted sample after {MAX_PROPOSALS} proposals"
        )))
    }

    /// True for the closed unit ball centered at the origin.
    pub fn is_unit_ball(&self) -> bool {
        matches!(self, Region::Ball { center, radius } if *radius == 1.0 && center.norm_sq() == 0.0)
    }
}

/// Uniform point in the box `[lo, hi)`.
#[inline]
pub fn uniform_in_box<R: Rng + ?Sized>(lo: &Vector, hi: &Vector, rng: &mut R) -> Vector {
    Vector::from_fn(lo.len(), |i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>())
}

pub fn box_volume(lo: &Vector, hi: &Vector) -> f64 {
    lo.as_slice()
        .iter()
        .zip(hi.as_slice())
        .map(|(l, h)| (h - l).max(0.0))
        .product()
}

/// Ball containing the Minkowski difference `S − A = {s − a}`: centers subtract, radii add.
pub fn minkowski_difference_ball(s: &Region, a: &Region) -> (Vector, f64) {
    let (cs, rs) = s.bounding_ball();
    let (ca, ra) = a.bounding_ball();
    (cs - ca, rs + ra)
}

/// Upper bound on `μ(S − A)`: the volume of [`minkowski_difference_ball`].
pub fn minkowski_difference_volume_bound(s: &Region, a: &Region) -> f64 {
    let (_, r) = minkowski_difference_ball(s, a);
    unit_ball_volume(s.dim()) * libm::pow(r, s.dim() as f64)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RegionSpec {
    Ball {
        center: Vector,
        radius: f64,
    },
    Ellipsoid {
        matrix: Matrix,
        center: Vector,
    },
    Polytope {
        halfspaces: Vec<Halfspace>,
    },
    Parallelepiped {
        generator: Matrix,
        origin: Vector,
    },
    Voronoi {
        lattice: Lattice,
    },
    Translate {
        child: Box<Region>,
        shift: Vector,
    },
    Scale {
        child: Box<Region>,
        factor: f64,
    },
    Affine {
        child: Box<Region>,
        matrix: Matrix,
        shift: Vector,
    },
    Intersect {
        children: Vec<Region>,
    },
    Union {
        children: Vec<Region>,
    },
    Difference {
        left: Box<Region>,
        right: Box<Region>,
    },
}

impl TryFrom<RegionSpec> for Region {
    type Error = Error;

    fn try_from(spec: RegionSpec) -> Result<Self> {
        match spec {
            RegionSpec::Ball { center, radius } => Region::ball(center, radius),
            RegionSpec::Ellipsoid { matrix, center } => Region::ellipsoid(matrix, center),
            RegionSpec::Polytope { halfspaces } => Region::polytope(halfspaces),
            RegionSpec::Parallelepiped { generator, origin } => {
                Region::parallelepiped(generator, origin)
            }
            RegionSpec::Voronoi { lattice } => Ok(Region::voronoi(lattice)),
            RegionSpec::Translate { child, shift } => child.translate(shift),
            RegionSpec::Scale { child, factor } => child.scale(factor),
            RegionSpec::Affine {
                child,
                matrix,
                shift,
            } => child.affine(matrix, shift),
            RegionSpec::Intersect { children } => Region::intersect(children),
            RegionSpec::Union { children } => Region::union(children),
            RegionSpec::Difference { left, right } => Region::difference(*left, *right),
        }
    }
}

impl From<Region> for RegionSpec {
    fn from(r: Region) -> Self {
        match r {
            Region::Ball { center, radius } => RegionSpec::Ball { center, radius },
            Region::Ellipsoid(e) => RegionSpec::Ellipsoid {
                matrix: e.matrix,
                center: e.center,
            },
            Region::Polytope(p) => RegionSpec::Polytope {
                halfspaces: p.halfspaces().to_vec(),
            },
            Region::Parallelepiped(p) => RegionSpec::Parallelepiped {
                generator: p.generator,
                origin: p.origin,
            },
            Region::Voronoi(lattice) => RegionSpec::Voronoi { lattice },
            Region::Translate { child, shift } => RegionSpec::Translate { child, shift },
            Region::Scale { child, factor } => RegionSpec::Scale { child, factor },
            Region::Affine(a) => RegionSpec::Affine {
                child: a.child,
                matrix: a.matrix,
                shift: a.shift,
            },
            Region::Intersect(children) => RegionSpec::Intersect { children },
            Region::Union(children) => RegionSpec::Union { children },
            Region::Difference { left, right } => RegionSpec::Difference { left, right },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hexagonal_unit_disk_scale, NamedLattice};
    use crate::rng::substream;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::Rng;

    fn hexagon() -> Region {
        Region::voronoi(
            Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale()).unwrap(),
        )
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x)
    }

    #[test]
    fn contains_examples() {
        let disk = Region::unit_ball(2);
        assert!(disk.contains(&v(&[0.0, 0.0])));
        assert!(disk.contains(&v(&[1.0, 0.0])));
        let ring = Region::difference(hexagon(), disk).unwrap();
        assert!(!ring.contains(&v(&[0.0, 0.0])));
        assert!(!hexagon().contains(&v(&[0.0, hexagonal_unit_disk_scale() * 1.01])));
        assert!(matches!(
            hexagon().try_contains(&v(&[0.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn combinator_dimensions_checked() {
        let r = Region::union(vec![Region::unit_ball(2), Region::unit_ball(3)]);
        assert!(matches!(r, Err(Error::Dimension { .. })));
        assert!(Region::ellipsoid(Matrix::zeros(2), Vector::zeros(2)).is_err());
        assert!(Region::ball(Vector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn closed_form_volumes() {
        let disk = Region::unit_ball(2)
            .volume(DEFAULT_VOLUME_BUDGET, 1)
            .unwrap();
        assert_eq!(disk.method, VolumeMethod::ClosedForm);
        assert_eq!(disk.std_error, 0.0);
        assert!((disk.value - PI).abs() < 1e-15);
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0]]).unwrap();
        let e = Region::ellipsoid(m, v(&[3.0, 1.0]))
            .unwrap()
            .volume(MIN_VOLUME_BUDGET, 1)
            .unwrap();
        assert!((e.value - 2.0 * PI).abs() < 1e-12);
        let scaled = Region::unit_ball(3)
            .scale(2.0)
            .unwrap()
            .translate(v(&[1.0, 1.0, 1.0]))
            .unwrap();
        assert!((scaled.closed_form_volume().unwrap() - 32.0 * PI / 3.0).abs() < 1e-12);
        assert!((hexagon().closed_form_volume().unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_ball_volume_within_three_sigma() {
        for n in [2usize, 3] {
            let exact = unit_ball_volume(n);
            // Wrap the ball in an intersection to force the Monte Carlo path.
            let r = Region::intersect(vec![Region::unit_ball(n)]).unwrap();
            let est = r.volume(DEFAULT_VOLUME_BUDGET, 7).unwrap();
            assert_eq!(est.method, VolumeMethod::MonteCarlo);
            assert!(
                (est.value - exact).abs() <= 3.0 * est.std_error,
                "{est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_budget_checked() {
        let r = Region::difference(hexagon(), Region::unit_ball(2)).unwrap();
        assert_eq!(r.volume(100_000, 3).unwrap(), r.volume(100_000, 3).unwrap());
        assert!(matches!(r.volume(100, 3), Err(Error::Config(_))));
    }

    #[test]
    fn hexagon_minus_disk_area() {
        let a = hexagonal_unit_disk_scale();
        let theta = 2.0 * a.acos();
        let exact = 3.0 * (theta - theta.sin());
        let r = Region::difference(hexagon(), Region::unit_ball(2)).unwrap();
        let est = r.volume(DEFAULT_VOLUME_BUDGET, 11).unwrap();
        assert!(
            (est.value - exact).abs() <= 3.0 * est.std_error,
            "{est:?} vs {exact}"
        );
    }

    #[test]
    fn empty_intersection_has_zero_volume() {
        let a = Region::unit_ball(2);
        let b = Region::unit_ball(2).translate(v(&[5.0, 0.0])).unwrap();
        let est = Region::intersect(vec![a, b])
            .unwrap()
            .volume(MIN_VOLUME_BUDGET, 0)
            .unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn disjoint_union_volume_is_additive() {
        let x = Region::difference(hexagon(), Region::unit_ball(2)).unwrap();
        let y = Region::unit_ball(2)
            .scale(0.5)
            .unwrap()
            .translate(v(&[3.0, 0.0]))
            .unwrap();
        let y = Region::intersect(vec![y]).unwrap();
        let u = Region::union(vec![x.clone(), y.clone()]).unwrap();
        let (vx, vy, vu) = (
            x.volume(400_000, 1).unwrap(),
            y.volume(400_000, 2).unwrap(),
            u.volume(400_000, 3).unwrap(),
        );
        assert!(
            (vu.value - vx.value - vy.value).abs()
                <= 3.0 * (vx.std_error + vy.std_error + vu.std_error)
        );
    }

    #[test]
    fn bounding_radius_examples() {
        assert_eq!(Region::unit_ball(3).bounding_radius(), 1.0);
        let r_hex = (2.0 * PI / (3.0 * 3f64.sqrt())).sqrt();
        assert!((hexagon().bounding_radius() - r_hex).abs() < 1e-12);
        let g = (PI / 3.0).cbrt();
        let bcc = Region::voronoi(Lattice::named(NamedLattice::Bcc, 3, g).unwrap());
        assert!((bcc.bounding_radius() - 5f64.sqrt() / 2.0 * g).abs() < 1e-12);
        let (_, r) = minkowski_difference_ball(&hexagon(), &Region::unit_ball(2));
        assert!((r - (1.0 + r_hex)).abs() < 1e-12);
        let e = Region::ellipsoid(Matrix::diagonal(&v(&[1.0, 3.0])), Vector::zeros(2)).unwrap();
        assert!((e.bounding_radius() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = substream(5, 0);
        let disk = Region::unit_ball(2);
        let n = 100_000;
        let mut mean = Vector::zeros(2);
        for _ in 0..n {
            let x = disk.sample_uniform(&mut rng).unwrap();
            assert!(x.norm() <= 1.0);
            mean += x;
        }
        mean = mean.scale(1.0 / n as f64);
        // Each coordinate has variance 1/4 on the unit disk.
        let sigma = (0.25 / n as f64).sqrt();
        assert!(
            mean.as_slice().iter().all(|m| m.abs() < 3.0 * sigma),
            "{mean:?}"
        );

        let square = Region::parallelepiped(Matrix::identity(2), Vector::zeros(2)).unwrap();
        for _ in 0..1000 {
            let x = square.sample_uniform(&mut rng).unwrap();
            assert!(x.as_slice().iter().all(|c| (0.0..1.0).contains(c)));
        }
    }

    #[test]
    fn degenerate_region_sampling_fails() {
        let a = Region::unit_ball(1);
        let b = Region::unit_ball(1).translate(v(&[0.5])).unwrap();
        // Empty set with a non-empty bounding box.
        let sliver = Region::difference(a.clone(), Region::union(vec![a, b]).unwrap()).unwrap();
        let mut rng = substream(1, 0);
        assert!(matches!(
            sliver.sample_uniform(&mut rng),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn translation_preserves_volume() {
        let r = Region::difference(hexagon(), Region::unit_ball(2)).unwrap();
        let a = r.volume(200_000, 9).unwrap();
        let mut rng = substream(12, 0);
        for i in 0..10 {
            let z = v(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
            let b = r
                .clone()
                .translate(z)
                .unwrap()
                .volume(200_000, 100 + i)
                .unwrap();
            assert!(a.agrees_with(&b, 3.0), "{a:?} {b:?}");
        }
    }

    fn arbitrary_region() -> impl Strategy<Value = Region> {
        prop_oneof![
            Just(Region::unit_ball(2)),
            Just(hexagon()),
            Just(Region::difference(hexagon(), Region::unit_ball(2)).unwrap()),
            Just(Region::difference(Region::unit_ball(2), hexagon()).unwrap()),
            Just(
                Region::ellipsoid(
                    Matrix::from_rows(&[vec![1.0, 0.3], vec![-0.2, 0.5]]).unwrap(),
                    v(&[0.5, -1.0])
                )
                .unwrap()
            ),
            Just(
                Region::unit_ball(2)
                    .affine(
                        Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap(),
                        v(&[1.0, 2.0])
                    )
                    .unwrap()
            ),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn samples_are_members(r in arbitrary_region(), seed in any::<u64>()) {
            let mut rng = substream(seed, 0);
            for _ in 0..200 {
                let x = r.sample_uniform(&mut rng).unwrap();
                prop_assert!(r.contains(&x));
            }
        }

        #[test]
        fn bounding_ball_contains_samples(r in arbitrary_region(), seed in any::<u64>()) {
            let (c, rad) = r.bounding_ball();
            let (lo, hi) = r.bounding_box();
            let mut rng = substream(seed, 1);
            for _ in 0..200 {
                let x = r.sample_uniform(&mut rng).unwrap();
                prop_assert!((x - c).norm() <= rad * (1.0 + 1e-12));
                prop_assert!((0..2).all(|i| lo[i] <= x[i] && x[i] <= hi[i]));
            }
        }

    }
}
