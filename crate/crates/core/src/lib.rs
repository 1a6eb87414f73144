//! Remaining-useful-life prediction that transfers across operating
//! conditions and fault modes by describing every sample through its
//! per-feature distance to a peer group of nominal samples.

pub mod adapt;
pub mod cosmo;
pub mod dataset;
pub mod eval;
pub mod regress;
pub mod runner;
