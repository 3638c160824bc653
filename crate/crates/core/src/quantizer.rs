//! Shift-periodic quantizers built from a lattice, a basic cell and a dissection.
//!
//! Three variants share one evaluation path: reduce `x` to its residue `u` in the basic
//! cell `S` (so `x = u + Gv`), map the residue to a reconstruction offset, and add `Gv`
//! back. The lattice baseline uses offset `0` everywhere. `Q1` uses the translation
//! `z_i` of the piece of a dissection of `S` into `A` containing `u`. `Q2` keeps `0` on
//! `A ∩ S` (one big cell) and dissects only `S \ A` into `A \ S`.
//!
//! An optional affine frame `(L, c)` turns `Q` into `x ↦ L·Q(L⁻¹x) − c`, which is
//! shift-periodic over `LG` with error uniform over `L·A + c`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dissect::{dissect, Assignment, DissectConfig, Dissection};
use crate::error::{check_dim, Error, Result};
use crate::lattice::{BasicCell, Lattice, LatticeVector};
use crate::linalg::{Matrix, Vector};
use crate::region::Region;
use crate::rng::{derive_seed, substream};

/// Quantizer construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain lattice quantizer: every residue maps to the lattice point.
    #[serde(rename = "baseline")]
    LatticeBaseline,
    /// Whole-cell dissection of `S` into `A`.
    Q1,
    /// Big cell `A ∩ S` plus a dissection of `S \ A` into `A \ S`.
    Q2,
}

/// Quantization cell: lattice translate plus piece index (0 for the big cell or the baseline).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub lattice: LatticeVector,
    pub piece: u16,
}

/// Output of [`ShiftPeriodicQuantizer::quantize`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantized {
    pub q: Vector,
    pub cell: CellId,
    /// The residue was not covered by any piece of a truncated dissection and took the
    /// last translation; the error may then fall outside the target set.
    pub residual: bool,
}

/// Affine change of coordinates `x ↦ L·Q(L⁻¹x) − c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameSpec", into = "FrameSpec")]
pub struct Frame {
    matrix: Matrix,
    inverse: Matrix,
    shift: Vector,
}

#[derive(Serialize, Deserialize)]
struct FrameSpec {
    matrix: Matrix,
    shift: Vector,
}

impl TryFrom<FrameSpec> for Frame {
    type Error = Error;
    fn try_from(f: FrameSpec) -> Result<Self> {
        Frame::new(f.matrix, f.shift)
    }
}

impl From<Frame> for FrameSpec {
    fn from(f: Frame) -> Self {
        FrameSpec {
            matrix: f.matrix,
            shift: f.shift,
        }
    }
}

impl Frame {
    /// Frame with linear part `matrix` (full rank) and error offset `shift`.
    pub fn new(matrix: Matrix, shift: Vector) -> Result<Self> {
        check_dim(matrix.dim(), shift.len())?;
        if !matrix.is_finite() || !shift.is_finite() {
            return Err(Error::Config("frame must be finite".into()));
        }
        let inverse = matrix.inverse()?;
        Ok(Frame {
            matrix,
            inverse,
            shift,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn shift(&self) -> Vector {
        self.shift
    }

    /// `self ∘ inner`: applying `inner` first, then `self`.
    pub fn compose(&self, inner: &Frame) -> Frame {
        Frame {
            matrix: self.matrix.mul_mat(&inner.matrix),
            inverse: inner.inverse.mul_mat(&self.inverse),
            shift: self.matrix.mul_vec(&inner.shift) + self.shift,
        }
    }

    #[inline]
    fn pull(&self, x: &Vector) -> Vector {
        self.inverse.mul_vec(x)
    }

    #[inline]
    fn push(&self, q: &Vector) -> Vector {
        self.matrix.mul_vec(q) - self.shift
    }

    fn log2_det(&self) -> f64 {
        libm::log2(libm::fabs(self.matrix.det()))
    }
}

/// A quantizer with `Q(x + Gv) = Q(x) + Gv` whose error is (close to) uniform over a target set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerSpec", into = "QuantizerSpec")]
pub struct ShiftPeriodicQuantizer {
    base_lattice: Lattice,
    cell: BasicCell,
    cell_region: Region,
    target: Region,
    variant: Variant,
    dissection: Option<Dissection>,
    frame: Option<Frame>,
    /// Lattice of the framed quantizer (`L·G`); equal to `base_lattice` without a frame.
    lattice: Lattice,
    base_max_error: f64,
}

fn check_volumes(lattice: &Lattice, target: &Region, cfg: &DissectConfig) -> Result<()> {
    let vol_a = target.volume(cfg.volume_budget, derive_seed(cfg.seed, 11))?;
    let vol_s = crate::region::VolumeEstimate::exact(lattice.det_abs());
    if !vol_a.agrees_with(&vol_s, 3.0) {
        return Err(Error::VolumeMismatch(format!(
            "target volume {} ± {} differs from cell volume {}",
            vol_a.value,
            vol_a.std_error,
            lattice.det_abs()
        )));
    }
    Ok(())
}

impl ShiftPeriodicQuantizer {
    /// The lattice quantizer whose cells are translates of `cell`; its error is uniform over the cell.
    pub fn baseline(lattice: Lattice, cell: BasicCell) -> Result<Self> {
        let target = Region::basic_cell(&lattice, &cell);
        Self::assemble(lattice, cell, target, Variant::LatticeBaseline, None, None)
    }

    /// Dissect the whole cell `S` into `target` with at most `cfg.max_pieces` pieces.
    pub fn build_q1(
        lattice: Lattice,
        cell: BasicCell,
        target: Region,
        cfg: &DissectConfig,
    ) -> Result<Self> {
        check_dim(lattice.dim(), target.dim())?;
        check_volumes(&lattice, &target, cfg)?;
        let s = Region::basic_cell(&lattice, &cell);
        let d = dissect(&target, &s, cfg)?;
        Self::assemble(lattice, cell, target, Variant::Q1, Some(d), None)
    }

    /// Keep `A ∩ S` as one cell and dissect `S \ A` into `A \ S` with `cfg.max_pieces − 1` pieces.
    ///
    /// Falls back to the lattice baseline when the Monte Carlo estimate of `μ(S \ A)` is zero.
    pub fn build_q2(
        lattice: Lattice,
        cell: BasicCell,
        target: Region,
        cfg: &DissectConfig,
    ) -> Result<Self> {
        check_dim(lattice.dim(), target.dim())?;
        if cfg.max_pieces < 2 {
            return Err(Error::Config("the second construction needs k ≥ 2".into()));
        }
        check_volumes(&lattice, &target, cfg)?;
        let s = Region::basic_cell(&lattice, &cell);
        let s_hat = Region::difference(s.clone(), target.clone())?;
        let a_hat = Region::difference(target.clone(), s)?;
        let vol = s_hat.volume(cfg.volume_budget, derive_seed(cfg.seed, 12))?;
        if vol.value == 0.0 {
            return Self::assemble(lattice, cell, target, Variant::LatticeBaseline, None, None);
        }
        let sub = DissectConfig {
            max_pieces: cfg.max_pieces - 1,
            ..cfg.clone()
        };
        let d = dissect(&a_hat, &s_hat, &sub)?;
        Self::assemble(lattice, cell, target, Variant::Q2, Some(d), None)
    }

    fn assemble(
        base_lattice: Lattice,
        cell: BasicCell,
        target: Region,
        variant: Variant,
        dissection: Option<Dissection>,
        frame: Option<Frame>,
    ) -> Result<Self> {
        let n = base_lattice.dim();
        check_dim(n, target.dim())?;
        if let BasicCell::Parallelepiped { offset } = &cell {
            check_dim(n, offset.len())?;
        }
        if dissection.is_none() != (variant == Variant::LatticeBaseline) {
            return Err(Error::Config(format!(
                "variant {variant:?} does not match the dissection"
            )));
        }
        if let Some(d) = &dissection {
            check_dim(n, d.source().dim())?;
        }
        let cell_region = Region::basic_cell(&base_lattice, &cell);
        let lattice = match &frame {
            Some(f) => {
                check_dim(n, f.matrix.dim())?;
                base_lattice.transformed(&f.matrix)?
            }
            None => base_lattice.clone(),
        };
        let radius = |r: &Region, shift: Vector| {
            let (c, rad) = r.bounding_ball();
            (c - shift).norm() + rad
        };
        let base_max_error = match &dissection {
            None => radius(&cell_region, Vector::zeros(n)),
            Some(d) => {
                let last = *d.translations().last().expect("non-empty");
                radius(&target, Vector::zeros(n)).max(radius(&cell_region, last))
            }
        };
        Ok(ShiftPeriodicQuantizer {
            base_lattice,
            cell,
            cell_region,
            target,
            variant,
            dissection,
            frame,
            lattice,
            base_max_error,
        })
    }

    /// `x ↦ L·Q(L⁻¹x) − c` applied on top of any existing frame.
    pub fn transformed(&self, frame: &Frame) -> Result<Self> {
        let f = match &self.frame {
            Some(inner) => frame.compose(inner),
            None => frame.clone(),
        };
        Self::assemble(
            self.base_lattice.clone(),
            self.cell.clone(),
            self.target.clone(),
            self.variant,
            self.dissection.clone(),
            Some(f),
        )
    }

    /// A borrowed view applying `frame` on top of this quantizer, without copying it.
    pub fn view<'a>(&'a self, frame: &Frame) -> FramedQuantizer<'a> {
        let frame = match &self.frame {
            Some(inner) => frame.compose(inner),
            None => frame.clone(),
        };
        FramedQuantizer { base: self, frame }
    }

    /// Lattice over which the quantizer is shift-periodic (including the frame).
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Lattice of the unframed construction.
    pub fn base_lattice(&self) -> &Lattice {
        &self.base_lattice
    }

    pub fn cell(&self) -> &BasicCell {
        &self.cell
    }

    /// The basic cell `S` of the unframed construction.
    pub fn cell_region(&self) -> &Region {
        &self.cell_region
    }

    /// Target error set `A` of the unframed construction.
    pub fn target(&self) -> &Region {
        &self.target
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dissection(&self) -> Option<&Dissection> {
        self.dissection.as_ref()
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.frame.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// Set the error is uniform over, in output coordinates (`L·A + c` with a frame).
    pub fn error_region(&self) -> Result<Region> {
        framed_region(&self.target, self.frame.as_ref())
    }

    /// Quantization cell of the lattice point itself, in output coordinates.
    pub fn basic_cell_region(&self) -> Result<Region> {
        match &self.frame {
            None => Ok(self.cell_region.clone()),
            Some(f) => self
                .cell_region
                .clone()
                .affine(f.matrix, Vector::zeros(self.dim())),
        }
    }

    /// Bound on `‖x − Q(x)‖` over all `x`.
    pub fn max_error_radius(&self) -> f64 {
        match &self.frame {
            None => self.base_max_error,
            Some(f) => f.matrix.spectral_norm() * self.base_max_error + f.shift.norm(),
        }
    }

    /// Unframed evaluation on a residue-reduced point.
    fn quantize_base(&self, x: &Vector) -> Quantized {
        let (u, v) = self.base_lattice.mod_cell(&self.cell, x);
        let gv = v.point();
        let (offset, piece, residual) = match (&self.variant, &self.dissection) {
            (Variant::Q2, _) if self.target.contains(&u) => (None, 0, false),
            (_, Some(d)) => {
                let (i, residual) = match d.assign_unchecked(&u) {
                    Assignment::Piece(i) => (i, false),
                    Assignment::Residual => (d.piece_count(), true),
                };
                (Some(d.translations()[i - 1]), i as u16, residual)
            }
            _ => (None, 0, false),
        };
        let q = match offset {
            Some(z) => z + gv,
            None => gv,
        };
        Quantized {
            q,
            cell: CellId { lattice: v, piece },
            residual,
        }
    }

    /// Reconstruction point and cell of `x`.
    pub fn quantize(&self, x: &Vector) -> Quantized {
        debug_assert_eq!(x.len(), self.dim());
        match &self.frame {
            None => self.quantize_base(x),
            Some(f) => {
                let r = self.quantize_base(&f.pull(x));
                Quantized {
                    q: f.push(&r.q),
                    ..r
                }
            }
        }
    }

    /// [`Self::quantize`] with dimension and finiteness checks.
    pub fn try_quantize(&self, x: &Vector) -> Result<Quantized> {
        check_dim(self.dim(), x.len())?;
        if !x.is_finite() {
            return Err(Error::Domain(format!("cannot quantize non-finite {x:?}")));
        }
        Ok(self.quantize(x))
    }

    /// Cell volumes `μ_j` (unframed) and probabilities `p_j` of a uniform residue.
    pub fn cell_masses(&self) -> Vec<(f64, f64)> {
        let det = self.base_lattice.det_abs();
        match (&self.variant, &self.dissection) {
            (Variant::LatticeBaseline, _) | (_, None) => alloc::vec![(det, 1.0)],
            (Variant::Q1, Some(d)) => {
                let m = d.merged_piece_masses();
                let total: f64 = m.iter().sum();
                m.into_iter()
                    .map(|mi| (mi * det / total, mi / total))
                    .collect()
            }
            (Variant::Q2, Some(d)) => {
                let m = d.merged_piece_masses();
                let big = (det - m.iter().sum::<f64>()).max(0.0);
                core::iter::once(big)
                    .chain(m)
                    .map(|mi| (mi, mi / det))
                    .collect()
            }
        }
    }

    /// `H̄(Q) = E[−log₂ μ(cell)]` in bits, from the estimated cell volumes.
    pub fn normalized_entropy(&self) -> f64 {
        let h: f64 = self
            .cell_masses()
            .iter()
            .filter(|(m, p)| *m > 0.0 && *p > 0.0)
            .map(|(m, p)| -p * libm::log2(*m))
            .sum();
        match &self.frame {
            None => h,
            Some(f) => h - f.log2_det(),
        }
    }

    /// `u − Q(u)` for `count` points `u` uniform over the basic cell.
    pub fn sample_error(&self, count: usize, seed: u64) -> Result<Vec<Vector>> {
        let mut rng = substream(seed, 0);
        self.sample_error_with(count, &mut rng)
    }

    /// [`Self::sample_error`] drawing from a caller-supplied generator.
    pub fn sample_error_with<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Vector>> {
        if count == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        let cell = self.basic_cell_region()?;
        (0..count)
            .map(|_| {
                let u = cell.sample_uniform(rng)?;
                Ok(u - self.quantize(&u).q)
            })
            .collect()
    }
}

fn framed_region(target: &Region, frame: Option<&Frame>) -> Result<Region> {
    match frame {
        None => Ok(target.clone()),
        Some(f) => target.clone().affine(f.matrix, f.shift),
    }
}

/// [`ShiftPeriodicQuantizer`] seen through an extra frame, borrowing the construction.
#[derive(Clone, Debug)]
pub struct FramedQuantizer<'a> {
    base: &'a ShiftPeriodicQuantizer,
    frame: Frame,
}

impl FramedQuantizer<'_> {
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn quantize(&self, x: &Vector) -> Quantized {
        let r = self.base.quantize_base(&self.frame.pull(x));
        Quantized {
            q: self.frame.push(&r.q),
            ..r
        }
    }

    /// Map a point of the unframed basic cell into this quantizer's coordinates (linear part only).
    pub fn map_cell_point(&self, u: &Vector) -> Vector {
        self.frame.matrix.mul_vec(u)
    }

    pub fn error_region(&self) -> Result<Region> {
        framed_region(&self.base.target, Some(&self.frame))
    }

    pub fn normalized_entropy(&self) -> f64 {
        let unframed = match &self.base.frame {
            None => self.base.normalized_entropy(),
            Some(f) => self.base.normalized_entropy() + f.log2_det(),
        };
        unframed - self.frame.log2_det()
    }
}

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct QuantizerSpec {
    lattice: Lattice,
    cell: BasicCell,
    target: Region,
    variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dissection: Option<Dissection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame: Option<Frame>,
    format_version: u32,
}

impl TryFrom<QuantizerSpec> for ShiftPeriodicQuantizer {
    type Error = Error;
    fn try_from(s: QuantizerSpec) -> Result<Self> {
        if s.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported quantizer format version {}",
                s.format_version
            )));
        }
        Self::assemble(
            s.lattice,
            s.cell,
            s.target,
            s.variant,
            s.dissection,
            s.frame,
        )
    }
}

impl From<ShiftPeriodicQuantizer> for QuantizerSpec {
    fn from(q: ShiftPeriodicQuantizer) -> Self {
        QuantizerSpec {
            lattice: q.base_lattice,
            cell: q.cell,
            target: q.target,
            variant: q.variant,
            dissection: q.dissection,
            frame: q.frame,
            format_version: FORMAT_VERSION,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hexagonal_unit_disk_scale, NamedLattice};
    use crate::linalg::unit_ball_volume;
    use crate::rng::substream;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x)
    }

    fn hex() -> Lattice {
        Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale()).unwrap()
    }

    fn cfg() -> DissectConfig {
        DissectConfig {
            budget: 50_000,
            volume_budget: 200_000,
            ..DissectConfig::default()
        }
    }

    fn hex_disk_q2() -> &'static ShiftPeriodicQuantizer {
        static Q: OnceLock<ShiftPeriodicQuantizer> = OnceLock::new();
        Q.get_or_init(|| {
            ShiftPeriodicQuantizer::build_q2(
                hex(),
                BasicCell::Voronoi,
                Region::unit_ball(2),
                &cfg(),
            )
            .unwrap()
        })
    }

    #[test]
    fn unit_interval_single_cell() {
        let l = Lattice::cubic(1, 1.0).unwrap();
        let target = Region::cuboid(&v(&[0.0]), &v(&[1.0])).unwrap();
        let q = ShiftPeriodicQuantizer::build_q1(l, BasicCell::parallelepiped(1), target, &cfg())
            .unwrap();
        assert_eq!(q.dissection().unwrap().piece_count(), 1);
        for x in [0.0, 0.25, 0.999] {
            assert_eq!(q.quantize(&v(&[x])).q, v(&[0.0]));
        }
        assert_eq!(q.quantize(&v(&[3.5])).q, v(&[3.0]));
        assert_eq!(q.normalized_entropy(), 0.0);
    }

    #[test]
    fn baseline_entropy_is_minus_log_volume() {
        let q = ShiftPeriodicQuantizer::baseline(hex(), BasicCell::Voronoi).unwrap();
        assert!((q.normalized_entropy() + core::f64::consts::PI.log2()).abs() < 1e-12);
        assert!((q.normalized_entropy() + 1.6515).abs() < 1e-4);
    }

    #[test]
    fn q2_with_equal_sets_degenerates_to_baseline() {
        let l = hex();
        let target = Region::voronoi(l.clone());
        let q = ShiftPeriodicQuantizer::build_q2(l, BasicCell::Voronoi, target, &cfg()).unwrap();
        assert_eq!(q.variant(), Variant::LatticeBaseline);
        let x = v(&[2.3, -0.7]);
        assert_eq!(q.quantize(&x).cell.lattice, q.lattice().nearest_point(&x));
    }

    #[test]
    fn mismatched_volumes_rejected() {
        let err = ShiftPeriodicQuantizer::build_q1(
            hex(),
            BasicCell::Voronoi,
            Region::ball(v(&[0.0, 0.0]), 1.2).unwrap(),
            &cfg(),
        );
        assert!(matches!(err, Err(Error::VolumeMismatch(_))));
    }

    #[test]
    fn hexagon_disk_examples() {
        let q = hex_disk_q2();
        assert_eq!(q.variant(), Variant::Q2);
        let r = q.quantize(&v(&[0.1, 0.1]));
        assert_eq!(r.q, v(&[0.0, 0.0]));
        assert_eq!(r.cell.piece, 0);
        // Just inside a hexagon corner, outside the unit disk.
        let corner = q.lattice().covering_radius() * 0.98;
        let x = v(&[corner, 0.0]);
        assert!(q.cell_region().contains(&x) && !q.target().contains(&x));
        let r = q.quantize(&x);
        assert!(r.cell.piece > 0);
        assert!((x - r.q).norm() <= 1.0 + 1e-9);
        let h = q.normalized_entropy();
        assert!((-1.6515..=-1.01666).contains(&h), "{h}");
        assert!(q.dissection().unwrap().piece_count() <= 63);
    }

    #[test]
    fn errors_stay_bounded() {
        // Residues left over by the truncated dissection take the last translation, so only
        // covered residues are guaranteed to land in the target; all stay within the
        // advertised radius.
        let q = hex_disk_q2();
        let bound = q.target().bounding_radius() + q.cell_region().bounding_radius();
        let mut rng = substream(3, 0);
        for _ in 0..20_000 {
            let u = q.cell_region().sample_uniform(&mut rng).unwrap();
            let r = q.quantize(&u);
            let e = u - r.q;
            assert!(e.norm() <= q.max_error_radius() + 1e-9);
            if !r.residual {
                assert!(e.norm() <= bound + 1e-9);
                assert!(q.target().contains(&e));
            }
        }
    }

    #[test]
    fn entropy_respects_uniform_lower_bound() {
        let q = hex_disk_q2();
        assert!(q.normalized_entropy() >= -unit_ball_volume(2).log2() - 0.02);
    }

    #[test]
    fn frame_scales_entropy_and_error() {
        let q = hex_disk_q2();
        let f = Frame::new(Matrix::identity(2).scale(2.0), Vector::zeros(2)).unwrap();
        let t = q.transformed(&f).unwrap();
        assert!((t.normalized_entropy() - (q.normalized_entropy() - 2.0)).abs() < 1e-12);
        assert!((t.lattice().det_abs() - 4.0 * q.lattice().det_abs()).abs() < 1e-9);
        for e in t.sample_error(5000, 4).unwrap() {
            assert!(e.norm() <= 2.0 * q.max_error_radius() + 1e-9);
        }
        let view = q.view(&f);
        let x = v(&[3.3, -1.7]);
        assert_eq!(view.quantize(&x), t.quantize(&x));
    }

    #[test]
    fn identity_frame_is_transparent() {
        let q = hex_disk_q2();
        let t = q
            .transformed(&Frame::new(Matrix::identity(2), Vector::zeros(2)).unwrap())
            .unwrap();
        for x in [v(&[0.3, 0.9]), v(&[-4.1, 2.2])] {
            assert_eq!(t.quantize(&x), q.quantize(&x));
        }
    }

    #[test]
    fn serde_round_trip() {
        let q = hex_disk_q2();
        let spec = QuantizerSpec::from(q.clone());
        let back = ShiftPeriodicQuantizer::try_from(spec).unwrap();
        assert_eq!(&back, q);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn shift_periodic(x in prop::array::uniform2(-20.0f64..20.0), a in -2i64..=2, b in -2i64..=2) {
            let q = hex_disk_q2();
            let x = v(&x);
            let gv = q.lattice().vector(&[a, b]).point();
            let d = q.quantize(&(x + gv)).q - q.quantize(&x).q - gv;
            prop_assert!(d.norm() < 1e-9);
        }

        #[test]
        fn framed_shift_periodic(x in prop::array::uniform2(-20.0f64..20.0), a in -2i64..=2, b in -2i64..=2) {
            let m = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.0, 2.0]]).unwrap();
            let t = hex_disk_q2().transformed(&Frame::new(m, v(&[0.5, -1.0])).unwrap()).unwrap();
            let x = v(&x);
            let gv = t.lattice().vector(&[a, b]).point();
            let d = t.quantize(&(x + gv)).q - t.quantize(&x).q - gv;
            prop_assert!(d.norm() < 1e-9);
        }
    }
}
