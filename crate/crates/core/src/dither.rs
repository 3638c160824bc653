//! Nyquist dither and the subtractive-dither channel.
//!
//! A density `f` is Nyquist for the lattice generated by `G` when its lattice-periodic
//! replication `Σ_v f(t + Gv)` equals `1/|det G|` everywhere. Adding such a dither `w`
//! before a shift-periodic quantizer and subtracting it afterwards makes the error
//! `x − (Q(x + w) − w)` independent of `x` and distributed as the quantizer's error law.

use alloc::format;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lattice::{BasicCell, Lattice};
use crate::linalg::{Matrix, Vector};
use crate::quantizer::{FramedQuantizer, Quantized, ShiftPeriodicQuantizer};
use crate::region::{uniform_in_box, Region};

/// Family of Nyquist densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DitherKind {
    /// Uniform over a basic cell of the lattice.
    UniformCell { cell: BasicCell },
    /// Uniform over the parallelepiped `G·K·[0,1)ⁿ` of the sublattice with integer index matrix `K`.
    UniformSublatticeCell { index: Matrix },
    /// Triangular density `max{1/Δ − |x|/Δ², 0}` on a one-dimensional lattice `Δℤ`.
    Triangular1d,
}

/// A Nyquist dither law for a specific lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DitherSpec", into = "DitherSpec")]
pub struct NyquistDither {
    kind: DitherKind,
    lattice: Lattice,
    /// Support used for sampling and density evaluation.
    support: Region,
    /// `|det|` of the support's generator (or `Δ` for the triangular law).
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct DitherSpec {
    #[serde(flatten)]
    kind: DitherKind,
    lattice: Lattice,
}

impl TryFrom<DitherSpec> for NyquistDither {
    type Error = Error;
    fn try_from(s: DitherSpec) -> Result<Self> {
        NyquistDither::new(s.kind, s.lattice)
    }
}

impl From<NyquistDither> for DitherSpec {
    fn from(d: NyquistDither) -> Self {
        DitherSpec {
            kind: d.kind,
            lattice: d.lattice,
        }
    }
}

impl NyquistDither {
    pub fn new(kind: DitherKind, lattice: Lattice) -> Result<Self> {
        let n = lattice.dim();
        let (support, scale) = match &kind {
            DitherKind::UniformCell { cell } => {
                if let BasicCell::Parallelepiped { offset } = cell {
                    check_dim(n, offset.len())?;
                }
                (Region::basic_cell(&lattice, cell), lattice.det_abs())
            }
            DitherKind::UniformSublatticeCell { index } => {
                check_dim(n, index.dim())?;
                let integral = (0..n).all(|i| {
                    (0..n).all(|j| {
                        libm::trunc(index[(i, j)]) == index[(i, j)] && index[(i, j)].is_finite()
                    })
                });
                if !integral {
                    return Err(Error::Config(
                        "sublattice index matrix must be integral".into(),
                    ));
                }
                let generator = lattice.generator().mul_mat(index);
                let det = libm::fabs(generator.det());
                if det < 0.5 * lattice.det_abs() {
                    return Err(Error::Config("sublattice index matrix is singular".into()));
                }
                (Region::parallelepiped(generator, Vector::zeros(n))?, det)
            }
            DitherKind::Triangular1d => {
                if n != 1 {
                    return Err(Error::Config(format!(
                        "triangular dither needs a one-dimensional lattice, got n = {n}"
                    )));
                }
                let delta = lattice.det_abs();
                (Region::ball(Vector::zeros(1), delta)?, delta)
            }
        };
        Ok(NyquistDither {
            kind,
            lattice,
            support,
            scale,
        })
    }

    /// Uniform over the lattice's Voronoi cell.
    pub fn uniform_voronoi(lattice: Lattice) -> Self {
        Self::new(
            DitherKind::UniformCell {
                cell: BasicCell::Voronoi,
            },
            lattice,
        )
        .expect("Voronoi cell is always valid")
    }

    pub fn kind(&self) -> &DitherKind {
        &self.kind
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Region outside which the density vanishes.
    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let n = self.lattice.dim();
        match &self.kind {
            DitherKind::UniformCell { .. } => self
                .support
                .sample_uniform(rng)
                .expect("basic cells have positive volume"),
            DitherKind::UniformSublatticeCell { index } => {
                let u = uniform_in_box(&Vector::zeros(n), &Vector::splat(n, 1.0), rng);
                self.lattice.generator().mul_mat(index).mul_vec(&u)
            }
            DitherKind::Triangular1d => {
                let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                Vector::from_slice(&[self.scale * (u1 + u2 - 1.0)])
            }
        }
    }

    /// Density of the dither at `t`.
    pub fn density(&self, t: &Vector) -> f64 {
        match &self.kind {
            DitherKind::Triangular1d => {
                let d = self.scale;
                (1.0 / d - libm::fabs(t[0]) / (d * d)).max(0.0)
            }
            _ if self.support.contains(t) => 1.0 / self.scale,
            _ => 0.0,
        }
    }

    /// `Σ_v f(t + Gv)` over every lattice translate that can reach the support.
    pub fn replication_sum(&self, t: &Vector) -> f64 {
        let reach = self.support.bounding_ball();
        let ginv = self.lattice.generator_inverse().spectral_norm();
        let k = libm::ceil((reach.0.norm() + reach.1 + t.norm()) * ginv) as i64 + 1;
        self.lattice
            .offsets(k)
            .map(|v| self.density(&(*t + v.point())))
            .sum()
    }
}

/// Subtractive encode: `Q(x + w)`.
pub fn dithered_encode(q: &ShiftPeriodicQuantizer, x: &Vector, w: &Vector) -> Quantized {
    q.quantize(&(*x + *w))
}

/// Subtractive decode: `q − w`.
pub fn dithered_decode(q: &Vector, w: &Vector) -> Vector {
    *q - *w
}

/// One use of the dithered channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission {
    pub w: Vector,
    pub q: Quantized,
    pub y: Vector,
}

impl Transmission {
    /// `x − y`.
    pub fn error(&self, x: &Vector) -> Vector {
        *x - self.y
    }
}

/// Quantizer and dither that share a lattice.
#[derive(Clone, Debug)]
pub struct DitheredChannel<'a> {
    quantizer: &'a ShiftPeriodicQuantizer,
    dither: NyquistDither,
}

impl<'a> DitheredChannel<'a> {
    /// Fails unless the dither is Nyquist for the quantizer's own lattice.
    pub fn new(quantizer: &'a ShiftPeriodicQuantizer, dither: NyquistDither) -> Result<Self> {
        if quantizer.lattice() != dither.lattice() {
            return Err(Error::Config(
                "dither lattice differs from the quantizer's lattice".into(),
            ));
        }
        Ok(DitheredChannel { quantizer, dither })
    }

    /// Channel with dither uniform over the quantizer's Voronoi cell.
    pub fn with_voronoi_dither(quantizer: &'a ShiftPeriodicQuantizer) -> Self {
        let dither = NyquistDither::uniform_voronoi(quantizer.lattice().clone());
        DitheredChannel { quantizer, dither }
    }

    pub fn quantizer(&self) -> &ShiftPeriodicQuantizer {
        self.quantizer
    }

    pub fn dither(&self) -> &NyquistDither {
        &self.dither
    }

    /// Encode and decode `x` with a given dither.
    pub fn transmit_with(&self, x: &Vector, w: Vector) -> Transmission {
        let q = dithered_encode(self.quantizer, x, &w);
        Transmission {
            w,
            y: dithered_decode(&q.q, &w),
            q,
        }
    }

    /// Encode and decode `x` with a fresh dither.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Transmission {
        let w = self.dither.sample(rng);
        self.transmit_with(x, w)
    }
}

/// Subtractive dither through a [`FramedQuantizer`], with the dither drawn for the base
/// lattice and mapped by the frame's linear part (which keeps it Nyquist for `L·G`).
pub fn transmit_framed<R: Rng + ?Sized>(
    q: &FramedQuantizer<'_>,
    base_dither: &NyquistDither,
    x: &Vector,
    rng: &mut R,
) -> Transmission {
    let w = q.map_cell_point(&base_dither.sample(rng));
    let r = q.quantize(&(*x + w));
    Transmission {
        w,
        y: r.q - w,
        q: r,
    }
}
