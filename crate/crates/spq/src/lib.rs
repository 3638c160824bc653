//! Command line front end, file formats and statistical harness for `spq-core`.

pub mod eval;
pub mod formats;
pub mod par;
pub mod partition;
pub mod presets;
pub mod suite;
