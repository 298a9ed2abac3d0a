//! Reaction-diffusion of KPP type on regular metric trees.
//!
//! The crate covers the spectral side (bottom of the spectrum `E0`, bands,
//! truncated principal eigenvalues, speed bounds), exact piecewise barrier
//! profiles with residual checks, a monotone finite-volume solver on both the
//! radially reduced half-line and the explicitly expanded tree, and front
//! diagnostics. The `treefront` binary wires these into config-driven runs;
//! the `examples/` directory shows each capability on its own.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod config;
pub mod error;
pub mod front;
pub mod output;
pub mod pde;
pub mod plot;
pub mod reaction;
pub mod run;
pub mod spectral;
pub mod tree;

pub use error::{Error, Result};
pub use reaction::{logistic, power_kpp, Nonlinearity};
pub use tree::{RegularTree, TreeExpansion, TreeSpec};
