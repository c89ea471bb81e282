//! Mathematical objects of the model and their validity checks.

pub mod eigenpair;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod periodic;
pub mod reaction;

pub use eigenpair::{EigenPair, Envelope};
pub use field::{CellField, TailedField};
pub use grid::Grid;
pub use kernel::{validate_kernel, KernelReport, KernelShape, StableKernel};
pub use periodic::Periodic;
pub use reaction::{validate_reaction, ReactionModel, ReactionReport, ReactionShape};
