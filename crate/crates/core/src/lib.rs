//! Shift-periodic vector quantizers whose error is uniform over a prescribed set.
//!
//! A quantizer `Q` is shift-periodic over the lattice generated by `G` when
//! `Q(x + Gv) = Q(x) + Gv` for every integer vector `v`. Starting from a basic
//! cell `S` and a target set `A` of the same volume, [`dissect`] cuts `S` into
//! translated pieces that reassemble into `A`, and [`quantizer`] turns the
//! translations into a quantizer whose error `x - Q(x)` is uniform over `A`
//! when `x` is uniform over `S` (or under subtractive dither, see [`dither`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form used by every argument check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrices and vectors are fixed-capacity values; boxing enum variants would only add allocations.
#![allow(clippy::large_enum_variant)]

extern crate alloc;

pub mod bounds;
pub mod dissect;
pub mod dither;
pub mod error;
pub mod lattice;
pub mod layered;
pub mod linalg;
pub mod polytope;
pub mod quantizer;
pub mod region;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::{BasicCell, Lattice, LatticeVector, NamedLattice};
pub use linalg::{Matrix, Vector, MAX_DIM};
pub use region::{Region, VolumeEstimate, VolumeMethod};
