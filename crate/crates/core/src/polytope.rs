//! Bounded convex polytopes given by half-spaces `a·x ≤ b`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{Matrix, Vector};

/// The closed half-space `normal · x ≤ offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Self {
        Halfspace { normal, offset }
    }

    #[inline]
    pub fn contains(&self, x: &Vector) -> bool {
        self.normal.dot(x) <= self.offset
    }
}

/// Combinations are enumerated exhaustively; refuse inputs that would take too long.
const MAX_COMBINATIONS: u64 = 5_000_000;

/// Intersection of finitely many half-spaces, validated to be bounded and non-empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeSpec", into = "PolytopeSpec")]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vector>,
    lo: Vector,
    hi: Vector,
}

#[derive(Serialize, Deserialize)]
struct PolytopeSpec {
    halfspaces: Vec<Halfspace>,
}

impl TryFrom<PolytopeSpec> for Polytope {
    type Error = Error;
    fn try_from(spec: PolytopeSpec) -> Result<Self> {
        Polytope::new(spec.halfspaces)
    }
}

impl From<Polytope> for PolytopeSpec {
    fn from(p: Polytope) -> Self {
        PolytopeSpec {
            halfspaces: p.halfspaces,
        }
    }
}

impl Polytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let n = halfspaces
            .first()
            .map(|h| h.normal.len())
            .ok_or_else(|| Error::Config("polytope needs at least one half-space".into()))?;
        for (i, h) in halfspaces.iter().enumerate() {
            if h.normal.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: h.normal.len(),
                });
            }
            if !h.normal.is_finite() || !h.offset.is_finite() || h.normal.norm_sq() == 0.0 {
                return Err(Error::Config(format!("half-space {i} is degenerate")));
            }
        }
        if halfspaces.len() < n + 1 {
            return Err(Error::Unbounded(format!(
                "{} half-spaces cannot bound a region in dimension {n}",
                halfspaces.len()
            )));
        }
        // Bounded iff the recession cone {d : a·d ≤ 0} is trivial; probe it inside the unit box.
        let mut cone: Vec<Halfspace> = halfspaces
            .iter()
            .map(|h| Halfspace::new(h.normal, 0.0))
            .collect();
        for i in 0..n {
            let e = Vector::from_fn(n, |j| if i == j { 1.0 } else { 0.0 });
            cone.push(Halfspace::new(e, 1.0));
            cone.push(Halfspace::new(-e, 1.0));
        }
        let cone_vertices = enumerate_vertices(&cone, n)?;
        if cone_vertices.iter().any(|v| v.norm() > 1e-9) {
            return Err(Error::Unbounded(
                "half-space list has a non-trivial recession cone".into(),
            ));
        }
        let vertices = enumerate_vertices(&halfspaces, n)?;
        if vertices.is_empty() {
            return Err(Error::Degenerate(
                "half-space list has no feasible vertex".into(),
            ));
        }
        let mut lo = Vector::splat(n, f64::INFINITY);
        let mut hi = Vector::splat(n, f64::NEG_INFINITY);
        for v in &vertices {
            for i in 0..n {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        Ok(Polytope {
            halfspaces,
            vertices,
            lo,
            hi,
        })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn cuboid(lo: &Vector, hi: &Vector) -> Result<Self> {
        let n = lo.len();
        let mut hs = Vec::with_capacity(2 * n);
        for i in 0..n {
            let e = Vector::from_fn(n, |j| if i == j { 1.0 } else { 0.0 });
            hs.push(Halfspace::new(e, hi[i]));
            hs.push(Halfspace::new(-e, -lo[i]));
        }
        Polytope::new(hs)
    }

    /// The closed Voronoi cell of the origin as a polytope (n ≤ 4).
    pub fn voronoi_cell(lattice: &Lattice) -> Result<Self> {
        let relevant = lattice.relevant_vectors();
        if relevant.is_empty() {
            return Err(Error::Config(
                "Voronoi facets are only enumerated for n ≤ 4".into(),
            ));
        }
        Polytope::new(
            relevant
                .into_iter()
                .map(|p| Halfspace::new(p, p.norm_sq() / 2.0))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn contains(&self, x: &Vector) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn bounding_box(&self) -> (Vector, Vector) {
        (self.lo, self.hi)
    }
}

fn binomial(m: usize, k: usize) -> u64 {
    let k = k.min(m - k);
    (0..k).fold(1u64, |acc, i| {
        acc.saturating_mul((m - i) as u64) / (i as u64 + 1)
    })
}

/// Feasible intersections of `n` boundary hyperplanes.
fn enumerate_vertices(hs: &[Halfspace], n: usize) -> Result<Vec<Vector>> {
    let m = hs.len();
    if m < n {
        return Ok(Vec::new());
    }
    if binomial(m, n) > MAX_COMBINATIONS {
        return Err(Error::Config(format!(
            "too many half-spaces ({m}) for vertex enumeration"
        )));
    }
    let scale = hs
        .iter()
        .map(|h| libm::fabs(h.offset) / h.normal.norm())
        .fold(1.0, f64::max);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let rows: Vec<Vector> = idx.iter().map(|&i| hs[i].normal).collect();
        let a = Matrix::from_columns(&rows).transpose();
        let b = Vector::from_fn(n, |i| hs[idx[i]].offset);
        if let Some(x) = a.solve(&b) {
            if hs
                .iter()
                .all(|h| h.normal.dot(&x) <= h.offset + 1e-9 * scale * h.normal.norm())
            {
                out.push(x);
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hexagonal_unit_disk_scale, NamedLattice};

    #[test]
    fn square_vertices_and_box() {
        let p = Polytope::cuboid(
            &Vector::from_slice(&[0.0, -1.0]),
            &Vector::from_slice(&[2.0, 1.0]),
        )
        .unwrap();
        assert_eq!(p.vertices().len(), 4);
        let (lo, hi) = p.bounding_box();
        assert_eq!(lo.as_slice(), &[0.0, -1.0]);
        assert_eq!(hi.as_slice(), &[2.0, 1.0]);
        assert!(p.contains(&Vector::from_slice(&[2.0, 1.0])));
        assert!(!p.contains(&Vector::from_slice(&[2.0 + 1e-12, 0.0])));
    }

    #[test]
    fn unbounded_lists_rejected() {
        let half_plane = vec![
            Halfspace::new(Vector::from_slice(&[1.0, 0.0]), 1.0),
            Halfspace::new(Vector::from_slice(&[-1.0, 0.0]), 1.0),
            Halfspace::new(Vector::from_slice(&[0.0, 1.0]), 1.0),
        ];
        assert!(matches!(
            Polytope::new(half_plane),
            Err(Error::Unbounded(_))
        ));
    }

    #[test]
    fn infeasible_lists_rejected() {
        let empty = vec![
            Halfspace::new(Vector::from_slice(&[1.0]), -1.0),
            Halfspace::new(Vector::from_slice(&[-1.0]), -1.0),
        ];
        assert!(matches!(Polytope::new(empty), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hexagon_from_lattice() {
        let hex = Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale()).unwrap();
        let p = Polytope::voronoi_cell(&hex).unwrap();
        assert_eq!(p.vertices().len(), 6);
        let r = p.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((r - hex.covering_radius()).abs() < 1e-12);
    }
}
