//! Exact-arithmetic engine for constraint-coupled Spencer operators on semisimple Lie
//! algebras: Chevalley bases, symmetric powers, Spencer extension operators and their
//! kernels, representation-theoretic decomposition, a discrete Spencer complex on flat
//! tori, and a lattice variational solver for compatible pairs.

pub mod cli;
pub mod cochain;
pub mod error;
pub mod kernel;
pub mod lie;
pub mod linalg;
pub mod rep;
pub mod report;
pub mod spencer;
pub mod sym;
pub mod varsolve;

pub use error::{Result, SpencerError};

/// Exact rational scalar used throughout.
pub type Q = num_rational::BigRational;
