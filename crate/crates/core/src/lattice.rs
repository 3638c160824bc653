//! Lattices `Λ(G) = {Gv : v ∈ ℤⁿ}`, nearest-point search and reduction modulo a basic cell.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use core::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector, MAX_DIM};

/// Lattices with closed-form bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedLattice {
    /// `scale · I`, any dimension.
    Cubic,
    /// Columns `scale·(0,2)` and `scale·(√3,1)`; the Voronoi cell is a regular hexagon with apothem `scale`.
    Hexagonal,
    /// Face-centered cubic, columns `scale·(−1,−1,0)`, `scale·(1,−1,0)`, `scale·(0,1,−1)`.
    Fcc,
    /// Body-centered cubic, columns `scale·(2,0,0)`, `scale·(0,2,0)`, `scale·(1,1,1)`.
    Bcc,
}

impl NamedLattice {
    /// `|det G|` of the basis at unit scale, for dimension `n`.
    fn unit_det(self) -> f64 {
        match self {
            NamedLattice::Cubic => 1.0,
            NamedLattice::Hexagonal => 2.0 * libm::sqrt(3.0),
            NamedLattice::Fcc => 2.0,
            NamedLattice::Bcc => 4.0,
        }
    }

    fn check_dim(self, n: usize) -> Result<()> {
        let ok = match self {
            NamedLattice::Cubic => (1..=MAX_DIM).contains(&n),
            NamedLattice::Hexagonal => n == 2,
            NamedLattice::Fcc | NamedLattice::Bcc => n == 3,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{self:?} lattice is not defined in dimension {n}"
            )))
        }
    }

    /// Scale at which the fundamental cell has volume `volume`.
    pub fn scale_for_volume(self, n: usize, volume: f64) -> Result<f64> {
        self.check_dim(n)?;
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::Config(format!(
                "cell volume must be positive, got {volume}"
            )));
        }
        Ok(libm::pow(volume / self.unit_det(), 1.0 / n as f64))
    }

    fn generator(self, n: usize, scale: f64) -> Matrix {
        let s3 = libm::sqrt(3.0);
        let cols: Vec<Vector> = match self {
            NamedLattice::Cubic => return Matrix::identity(n).scale(scale),
            NamedLattice::Hexagonal => vec![[0.0, 2.0].as_slice(), &[s3, 1.0]]
                .into_iter()
                .map(Vector::from_slice)
                .collect(),
            NamedLattice::Fcc => vec![
                [-1.0, -1.0, 0.0].as_slice(),
                &[1.0, -1.0, 0.0],
                &[0.0, 1.0, -1.0],
            ]
            .into_iter()
            .map(Vector::from_slice)
            .collect(),
            NamedLattice::Bcc => vec![
                [2.0, 0.0, 0.0].as_slice(),
                &[0.0, 2.0, 0.0],
                &[1.0, 1.0, 1.0],
            ]
            .into_iter()
            .map(Vector::from_slice)
            .collect(),
        };
        Matrix::from_columns(&cols).scale(scale)
    }
}

/// Integer coordinates `v` together with the lattice point `Gv`.
#[derive(Clone, Copy, Debug)]
pub struct LatticeVector {
    len: u8,
    coords: [i64; MAX_DIM],
    point: Vector,
}

impl LatticeVector {
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.len as usize]
    }

    /// The lattice point `Gv`.
    pub fn point(&self) -> Vector {
        self.point
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }
}

impl PartialEq for LatticeVector {
    fn eq(&self, other: &Self) -> bool {
        self.coords() == other.coords()
    }
}

impl Eq for LatticeVector {}

impl Hash for LatticeVector {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coords().hash(state);
    }
}

impl PartialOrd for LatticeVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LatticeVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords().cmp(other.coords())
    }
}

/// Choice of fundamental domain used by [`Lattice::mod_cell`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasicCell {
    /// Points whose nearest lattice point is the origin (ties to the lexicographically smallest `v`).
    Voronoi,
    /// `offset + {Gu : u ∈ [0,1)ⁿ}`.
    Parallelepiped { offset: Vector },
}

impl BasicCell {
    pub fn parallelepiped(n: usize) -> Self {
        BasicCell::Parallelepiped {
            offset: Vector::zeros(n),
        }
    }
}

#[derive(Clone, Debug)]
struct Relevant {
    coords: [i64; MAX_DIM],
    point: Vector,
    norm_sq: f64,
}

/// Largest dimension for which Voronoi-relevant vectors and cell vertices are enumerated.
const VORONOI_ENUMERATION_MAX_DIM: usize = 4;

/// A full-rank lattice with cached inverse, determinant and Voronoi-cell geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LatticeSpec", into = "LatticeSpec")]
pub struct Lattice {
    generator: Matrix,
    inverse: Matrix,
    det_abs: f64,
    label: Option<(NamedLattice, f64)>,
    relevant: Vec<Relevant>,
    covering_radius: f64,
    voronoi_box: (Vector, Vector),
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.generator == other.generator
    }
}

impl Lattice {
    /// Lattice generated by the columns of `generator`.
    pub fn new(generator: Matrix) -> Result<Self> {
        Self::build(generator, None)
    }

    pub fn named(name: NamedLattice, n: usize, scale: f64) -> Result<Self> {
        name.check_dim(n)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!(
                "lattice scale must be positive, got {scale}"
            )));
        }
        Self::build(name.generator(n, scale), Some((name, scale)))
    }

    /// Named lattice rescaled so that its cells have volume `volume`.
    pub fn named_with_volume(name: NamedLattice, n: usize, volume: f64) -> Result<Self> {
        Self::named(name, n, name.scale_for_volume(n, volume)?)
    }

    pub fn cubic(n: usize, scale: f64) -> Result<Self> {
        Self::named(NamedLattice::Cubic, n, scale)
    }

    fn build(generator: Matrix, label: Option<(NamedLattice, f64)>) -> Result<Self> {
        if !generator.is_finite() {
            return Err(Error::Config(
                "generator matrix has non-finite entries".into(),
            ));
        }
        let inverse = generator.inverse()?;
        let det_abs = libm::fabs(generator.det());
        if det_abs <= 0.0 {
            return Err(Error::Singular);
        }
        let n = generator.dim();
        let mut lattice = Lattice {
            generator,
            inverse,
            det_abs,
            label,
            relevant: Vec::new(),
            covering_radius: 0.0,
            voronoi_box: (Vector::zeros(n), Vector::zeros(n)),
        };
        lattice.init_voronoi();
        Ok(lattice)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// Generator matrix `G`; its columns are the basis vectors.
    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn generator_inverse(&self) -> &Matrix {
        &self.inverse
    }

    /// `|det G|`, the volume of every basic cell.
    pub fn det_abs(&self) -> f64 {
        self.det_abs
    }

    pub fn label(&self) -> Option<(NamedLattice, f64)> {
        self.label
    }

    /// Lattice generated by `T·G`.
    pub fn transformed(&self, t: &Matrix) -> Result<Self> {
        Self::new(t.mul_mat(&self.generator))
    }

    pub fn vector(&self, coords: &[i64]) -> LatticeVector {
        let n = self.dim();
        assert_eq!(coords.len(), n, "coordinate length mismatch");
        let mut c = [0i64; MAX_DIM];
        c[..n].copy_from_slice(coords);
        let v = Vector::from_fn(n, |i| c[i] as f64);
        LatticeVector {
            len: n as u8,
            coords: c,
            point: self.generator.mul_vec(&v),
        }
    }

    fn vector_from_array(&self, c: [i64; MAX_DIM]) -> LatticeVector {
        let n = self.dim();
        let v = Vector::from_fn(n, |i| c[i] as f64);
        LatticeVector {
            len: n as u8,
            coords: c,
            point: self.generator.mul_vec(&v),
        }
    }

    /// Closest lattice point to `x`; ties go to the lexicographically smallest `v`.
    ///
    /// Rounds `G⁻¹x` and then searches all offsets in `{−2..2}ⁿ` around it.
    pub fn nearest_point(&self, x: &Vector) -> LatticeVector {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let u = self.inverse.mul_vec(x);
        let mut base = [0i64; MAX_DIM];
        for i in 0..n {
            base[i] = libm::round(u[i]) as i64;
        }
        let mut best = base;
        let mut best_d = f64::INFINITY;
        let mut off = [-2i64; MAX_DIM];
        loop {
            let mut cand = [0i64; MAX_DIM];
            for i in 0..n {
                cand[i] = base[i] + off[i];
            }
            let mut d = 0.0;
            for r in 0..n {
                let p: f64 = cand[..n]
                    .iter()
                    .enumerate()
                    .map(|(c, &k)| self.generator[(r, c)] * k as f64)
                    .sum();
                let e = x[r] - p;
                d += e * e;
            }
            if d < best_d {
                best_d = d;
                best = cand;
            }
            // Odometer over offsets; the last coordinate varies fastest, so the
            // iteration order is lexicographic in `v`.
            let mut i = n;
            loop {
                if i == 0 {
                    return self.vector_from_array(best);
                }
                i -= 1;
                if off[i] < 2 {
                    off[i] += 1;
                    break;
                }
                off[i] = -2;
            }
        }
    }

    /// `x mod S`: returns `(x − Gv, v)` with `x − Gv` in the chosen basic cell.
    pub fn mod_cell(&self, cell: &BasicCell, x: &Vector) -> (Vector, LatticeVector) {
        let v = match cell {
            BasicCell::Voronoi => self.nearest_point(x),
            BasicCell::Parallelepiped { offset } => {
                let u = self.inverse.mul_vec(&(*x - *offset));
                let mut c = [0i64; MAX_DIM];
                for i in 0..self.dim() {
                    let f = libm::floor(u[i]);
                    // u slightly below an integer can round to frac == 1.0.
                    c[i] = if u[i] - f >= 1.0 {
                        f as i64 + 1
                    } else {
                        f as i64
                    };
                }
                self.vector_from_array(c)
            }
        };
        (*x - v.point, v)
    }

    /// Voronoi-cell membership of the origin's cell, consistent with [`Self::nearest_point`] ties.
    pub fn in_voronoi_cell(&self, x: &Vector) -> bool {
        if self.relevant.is_empty() {
            return self.nearest_point(x).is_zero();
        }
        for r in &self.relevant {
            // ‖x − p‖² − ‖x‖² = ‖p‖² − 2 x·p
            let gap = r.norm_sq - 2.0 * x.dot(&r.point);
            if gap < 0.0 {
                return false;
            }
            if gap == 0.0
                && r.coords[..self.dim()]
                    .iter()
                    .find(|&&c| c != 0)
                    .is_some_and(|&c| c < 0)
            {
                return false;
            }
        }
        true
    }

    /// Largest distance from the origin to a point of the Voronoi cell (exact for n ≤ 4).
    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    /// Axis-aligned bounding box of the Voronoi cell.
    pub fn voronoi_bounding_box(&self) -> (Vector, Vector) {
        self.voronoi_box
    }

    /// Voronoi-relevant vectors `Gv` (empty for n > 4).
    pub fn relevant_vectors(&self) -> Vec<Vector> {
        self.relevant.iter().map(|r| r.point).collect()
    }

    /// Each `{−k..k}ⁿ` integer offset, in lexicographic order.
    pub fn offsets(&self, k: i64) -> impl Iterator<Item = LatticeVector> + '_ {
        let n = self.dim() as u32;
        let side = (2 * k + 1) as usize;
        (0..side.pow(n)).map(move |mut idx| {
            let mut c = [0i64; MAX_DIM];
            for i in (0..n as usize).rev() {
                c[i] = (idx % side) as i64 - k;
                idx /= side;
            }
            self.vector_from_array(c)
        })
    }

    fn init_voronoi(&mut self) {
        let n = self.dim();
        let half_sum: f64 = (0..n).map(|j| self.generator.column(j).norm()).sum::<f64>() / 2.0;
        self.covering_radius = half_sum;
        self.voronoi_box = (Vector::splat(n, -half_sum), Vector::splat(n, half_sum));
        if n > VORONOI_ENUMERATION_MAX_DIM {
            return;
        }
        let candidates: Vec<LatticeVector> = self.offsets(2).filter(|v| !v.is_zero()).collect();
        let relevant: Vec<Relevant> = candidates
            .iter()
            .filter(|v| self.is_relevant(v))
            .map(|v| Relevant {
                coords: v.coords,
                point: v.point,
                norm_sq: v.point.norm_sq(),
            })
            .collect();
        self.relevant = relevant;
        if let Some((radius, lo, hi)) = self.voronoi_vertices_extent() {
            self.covering_radius = radius;
            self.voronoi_box = (lo, hi);
        }
    }

    /// `p = Gv` is relevant when 0 and p are the only closest lattice points to p/2.
    fn is_relevant(&self, v: &LatticeVector) -> bool {
        let mid = v.point.scale(0.5);
        let r2 = mid.norm_sq();
        let u = self.inverse.mul_vec(&mid);
        let n = self.dim();
        self.offsets(2).all(|off| {
            let mut c = [0i64; MAX_DIM];
            for i in 0..n {
                c[i] = libm::round(u[i]) as i64 + off.coords[i];
            }
            let w = self.vector_from_array(c);
            if w.is_zero() || w == *v {
                return true;
            }
            (mid - w.point).norm_sq() > r2 * (1.0 + 1e-9)
        })
    }

    /// Vertices of the Voronoi cell from n-subsets of relevant facets.
    fn voronoi_vertices_extent(&self) -> Option<(f64, Vector, Vector)> {
        let n = self.dim();
        let m = self.relevant.len();
        if m < n {
            return None;
        }
        let scale = self.relevant.iter().map(|r| r.norm_sq).fold(0.0, f64::max);
        let mut radius: f64 = 0.0;
        let mut lo = Vector::splat(n, f64::INFINITY);
        let mut hi = Vector::splat(n, f64::NEG_INFINITY);
        let mut found = false;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let rows: Vec<Vector> = idx.iter().map(|&i| self.relevant[i].point).collect();
            let a = Matrix::from_columns(&rows).transpose();
            let b = Vector::from_fn(n, |i| self.relevant[idx[i]].norm_sq / 2.0);
            if let Some(x) = a.solve(&b) {
                let inside = self
                    .relevant
                    .iter()
                    .all(|r| x.dot(&r.point) <= r.norm_sq / 2.0 + 1e-9 * scale);
                if inside {
                    found = true;
                    radius = radius.max(x.norm());
                    for i in 0..n {
                        lo[i] = lo[i].min(x[i]);
                        hi[i] = hi[i].max(x[i]);
                    }
                }
            }
            // Next n-combination of 0..m.
            let mut i = n;
            loop {
                if i == 0 {
                    return found.then_some((radius, lo, hi));
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
}

#[derive(Serialize, Deserialize)]
struct LatticeSpec {
    n: usize,
    #[serde(rename = "G")]
    g: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<NamedLattice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl TryFrom<LatticeSpec> for Lattice {
    type Error = Error;

    fn try_from(spec: LatticeSpec) -> Result<Self> {
        if spec.g.dim() != spec.n {
            return Err(Error::Dimension {
                expected: spec.n,
                got: spec.g.dim(),
            });
        }
        let label = match (spec.name, spec.scale) {
            (Some(name), Some(scale)) => Some((name, scale)),
            _ => None,
        };
        Lattice::build(spec.g, label)
    }
}

impl From<Lattice> for LatticeSpec {
    fn from(l: Lattice) -> Self {
        LatticeSpec {
            n: l.dim(),
            g: l.generator,
            name: l.label.map(|(name, _)| name),
            scale: l.label.map(|(_, s)| s),
        }
    }
}

/// Scale making the hexagonal lattice cell area `π` (apothem `√(π/(2√3))`).
pub fn hexagonal_unit_disk_scale() -> f64 {
    libm::sqrt(PI / (2.0 * libm::sqrt(3.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alpha() -> f64 {
        hexagonal_unit_disk_scale()
    }

    fn beta() -> f64 {
        libm::cbrt(2.0 * PI / 3.0)
    }

    fn gamma() -> f64 {
        libm::cbrt(PI / 3.0)
    }

    fn shipped() -> Vec<Lattice> {
        vec![
            Lattice::cubic(1, 2.0).unwrap(),
            Lattice::cubic(2, 1.0).unwrap(),
            Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap(),
            Lattice::named(NamedLattice::Fcc, 3, beta()).unwrap(),
            Lattice::named(NamedLattice::Bcc, 3, gamma()).unwrap(),
        ]
    }

    fn shipped_cached() -> &'static [Lattice] {
        static CACHE: std::sync::OnceLock<Vec<Lattice>> = std::sync::OnceLock::new();
        CACHE.get_or_init(shipped)
    }

    /// Exhaustive nearest point over `{−3..3}ⁿ` around the rounded coordinates.
    fn brute_nearest(l: &Lattice, x: &Vector) -> Vec<i64> {
        let u = l.generator_inverse().mul_vec(x);
        let base: Vec<i64> = u.as_slice().iter().map(|c| c.round() as i64).collect();
        let mut best: Option<(f64, Vec<i64>)> = None;
        for off in l.offsets(3) {
            let c: Vec<i64> = base.iter().zip(off.coords()).map(|(b, o)| b + o).collect();
            let d = (*x - l.vector(&c).point()).norm_sq();
            match &best {
                Some((bd, bc)) if d > *bd || (d == *bd && c >= *bc) => {}
                _ => best = Some((d, c)),
            }
        }
        best.unwrap().1
    }

    #[test]
    fn named_determinants() {
        let hex = Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap();
        assert!((hex.det_abs() - PI).abs() < 1e-12 * PI);
        let fcc = Lattice::named(NamedLattice::Fcc, 3, beta()).unwrap();
        assert!((fcc.det_abs() - 4.0 * PI / 3.0).abs() < 1e-12 * 4.0);
        let bcc = Lattice::named(NamedLattice::Bcc, 3, gamma()).unwrap();
        assert!((bcc.det_abs() - 4.0 * PI / 3.0).abs() < 1e-12 * 4.0);
        assert_eq!(Lattice::cubic(2, 1.0).unwrap().det_abs(), 1.0);
    }

    #[test]
    fn incompatible_names_rejected() {
        assert!(matches!(
            Lattice::named(NamedLattice::Hexagonal, 3, 1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Lattice::named(NamedLattice::Fcc, 2, 1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(Lattice::cubic(2, -1.0), Err(Error::Config(_))));
        assert!(matches!(Lattice::cubic(9, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn scale_for_volume_hits_target() {
        for (name, n) in [
            (NamedLattice::Cubic, 4),
            (NamedLattice::Hexagonal, 2),
            (NamedLattice::Fcc, 3),
            (NamedLattice::Bcc, 3),
        ] {
            let l = Lattice::named_with_volume(name, n, 2.5).unwrap();
            assert!((l.det_abs() - 2.5).abs() < 1e-12);
        }
        let s = NamedLattice::Hexagonal.scale_for_volume(2, PI).unwrap();
        assert!((s - alpha()).abs() < 1e-15);
    }

    #[test]
    fn nearest_point_examples() {
        let c2 = Lattice::cubic(2, 1.0).unwrap();
        assert_eq!(
            c2.nearest_point(&Vector::from_slice(&[0.6, 0.2])).coords(),
            &[1, 0]
        );
        for l in shipped() {
            let coords: Vec<i64> = [5, -2, 3].iter().copied().take(l.dim()).collect();
            let p = l.vector(&coords).point();
            assert_eq!(l.nearest_point(&p).coords(), coords.as_slice());
            assert!(l.nearest_point(&Vector::zeros(l.dim())).is_zero());
        }
    }

    #[test]
    fn nearest_point_ties_go_lexicographically_smallest() {
        let c1 = Lattice::cubic(1, 1.0).unwrap();
        assert_eq!(c1.nearest_point(&Vector::from_slice(&[0.5])).coords(), &[0]);
        assert_eq!(
            c1.nearest_point(&Vector::from_slice(&[-0.5])).coords(),
            &[-1]
        );
        let c2 = Lattice::cubic(2, 1.0).unwrap();
        assert_eq!(
            c2.nearest_point(&Vector::from_slice(&[0.5, 0.5])).coords(),
            &[0, 0]
        );
        assert_eq!(
            c2.nearest_point(&Vector::from_slice(&[-0.5, 0.5])).coords(),
            &[-1, 0]
        );
    }

    #[test]
    fn mod_cell_examples() {
        let l = Lattice::cubic(1, 2.0).unwrap();
        let cell = BasicCell::Parallelepiped {
            offset: Vector::from_slice(&[-1.0]),
        };
        let (r, v) = l.mod_cell(&cell, &Vector::from_slice(&[3.5]));
        assert_eq!(r[0], -0.5);
        assert_eq!(v.coords(), &[2]);

        let inside = Vector::from_slice(&[0.25]);
        let (r, v) = l.mod_cell(&cell, &inside);
        assert_eq!(r, inside);
        assert!(v.is_zero());

        let hex = Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap();
        let x = hex.vector(&[1, 1]).point() + Vector::from_slice(&[0.1, 0.1]);
        let (r, v) = hex.mod_cell(&BasicCell::Voronoi, &x);
        assert_eq!(v.coords(), &[1, 1]);
        assert!(r.max_abs_diff(&Vector::from_slice(&[0.1, 0.1])) < 1e-12);
    }

    #[test]
    fn relevant_vector_counts() {
        let counts: Vec<usize> = shipped()
            .iter()
            .map(|l| l.relevant_vectors().len())
            .collect();
        assert_eq!(counts, vec![2, 4, 6, 12, 14]);
    }

    #[test]
    fn voronoi_circumradii() {
        let hex = Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap();
        let r_hex = (2.0 * PI / (3.0 * 3f64.sqrt())).sqrt();
        assert!((hex.covering_radius() - r_hex).abs() < 1e-12);
        assert!((r_hex - 1.0996).abs() < 1e-4);
        let fcc = Lattice::named(NamedLattice::Fcc, 3, beta()).unwrap();
        assert!((fcc.covering_radius() - beta()).abs() < 1e-12);
        let bcc = Lattice::named(NamedLattice::Bcc, 3, gamma()).unwrap();
        assert!((bcc.covering_radius() - 5f64.sqrt() / 2.0 * gamma()).abs() < 1e-12);
        let c3 = Lattice::cubic(3, 2.0).unwrap();
        assert!((c3.covering_radius() - 3f64.sqrt()).abs() < 1e-12);
        let (lo, hi) = c3.voronoi_bounding_box();
        assert!(lo.max_abs_diff(&Vector::splat(3, -1.0)) < 1e-12);
        assert!(hi.max_abs_diff(&Vector::splat(3, 1.0)) < 1e-12);
    }

    #[test]
    fn hexagon_face_membership() {
        let hex = Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap();
        assert!(!hex.in_voronoi_cell(&Vector::from_slice(&[0.0, alpha() * 1.01])));
        assert!(hex.in_voronoi_cell(&Vector::from_slice(&[0.0, alpha() * 0.99])));
    }

    #[test]
    fn high_dimensional_cubic_falls_back_to_search() {
        let l = Lattice::cubic(5, 1.0).unwrap();
        assert!(l.relevant_vectors().is_empty());
        assert!(l.in_voronoi_cell(&Vector::splat(5, 0.4)));
        assert!(!l.in_voronoi_cell(&Vector::from_slice(&[0.6, 0.0, 0.0, 0.0, 0.0])));
    }

    #[test]
    fn serde_round_trip() {
        let hex = Lattice::named(NamedLattice::Hexagonal, 2, alpha()).unwrap();
        let spec = LatticeSpec::from(hex.clone());
        let back = Lattice::try_from(spec).unwrap();
        assert_eq!(back, hex);
        assert_eq!(back.label(), hex.label());
    }

    fn lattice_and_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (0usize..5).prop_flat_map(|i| {
            let n = [1, 2, 2, 3, 3][i];
            (Just(i), proptest::collection::vec(-20.0f64..20.0, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn nearest_point_matches_exhaustive_search((i, x) in lattice_and_point()) {
            let l = &shipped_cached()[i];
            let x = Vector::from_slice(&x);
            let expected = brute_nearest(l, &x);
            let got = l.nearest_point(&x);
            prop_assert_eq!(got.coords(), expected.as_slice());
        }

        #[test]
        fn reduction_is_periodic((i, x) in lattice_and_point(), shift in proptest::collection::vec(-6i64..6, 3)) {
            let l = &shipped_cached()[i];
            let x = Vector::from_slice(&x);
            let v = l.vector(&shift[..l.dim()]);
            for cell in [BasicCell::Voronoi, BasicCell::parallelepiped(l.dim())] {
                let (r0, v0) = l.mod_cell(&cell, &x);
                let (r1, v1) = l.mod_cell(&cell, &(x + v.point()));
                prop_assert!(r0.max_abs_diff(&r1) < 1e-9);
                prop_assert!((r0 + v0.point()).max_abs_diff(&x) < 1e-9);
                prop_assert!((r1 + v1.point()).max_abs_diff(&(x + v.point())) < 1e-9);
            }
        }

        #[test]
        fn voronoi_residue_is_closest_to_origin((i, x) in lattice_and_point()) {
            let l = &shipped_cached()[i];
            let (r, _) = l.mod_cell(&BasicCell::Voronoi, &Vector::from_slice(&x));
            for w in l.offsets(3) {
                prop_assert!(r.norm() <= (r - w.point()).norm() + 1e-12);
            }
            prop_assert!(l.in_voronoi_cell(&r));
        }

        #[test]
        fn parallelepiped_residue_in_unit_cube((i, x) in lattice_and_point()) {
            let l = &shipped_cached()[i];
            let (r, _) = l.mod_cell(&BasicCell::parallelepiped(l.dim()), &Vector::from_slice(&x));
            let u = l.generator_inverse().mul_vec(&r);
            for c in u.as_slice() {
                prop_assert!(*c >= -1e-9 && *c < 1.0 + 1e-9);
            }
        }
    }
}
