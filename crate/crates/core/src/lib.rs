//! D3Q19 lattice Boltzmann (BGK) solver with interchangeable streaming
//! strategies, plus the measurement harness used to compare them.
//!
//! The numerical core is generic over the storage scalar; [`Solver32`] and
//! [`Solver64`] are the two concrete instantiations used by the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod scalar;
pub mod solver;
pub mod streaming;

pub use error::ConfigError;
pub use kernels::{MacroState, RelaxationParams};
pub use lattice::{make_d3q19, CellClassification, CellFlag, DistributionField, DomainDims, LatticeDescriptor, Layout};
pub use scalar::{Real, Scalar};
pub use solver::{CavityResult, Ordering, Precision, SimConfig, Solver, SolverError};
pub use streaming::{Boundary, StrategyKind, StreamStrategy};

pub type Field32 = DistributionField<f32>;
pub type Field64 = DistributionField<f64>;
pub type Solver32 = Solver<f32>;
pub type Solver64 = Solver<f64>;
pub type Descriptor64 = LatticeDescriptor<f64>;
/// Exact descriptor for identity checks.
pub type DescriptorExact = LatticeDescriptor<num_rational::Ratio<i64>>;
