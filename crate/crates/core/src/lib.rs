//! Atom-photon bound states of a two-level emitter coupled to self-similar
//! photonic lattices.
//!
//! The crate builds fractal and control lattices ([`graphs`]), assembles the
//! bath and coupled single-excitation Hamiltonians ([`operators`]), solves for
//! extremal eigenpairs, resolvent columns and heat kernels ([`solvers`]),
//! extracts the bound state and its profiles ([`boundstate`]), and fits the
//! far-field localization length and near-field exponent ([`scaling`]).
//! [`experiment`] wires these into the reproducible pipelines driven by the
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod boundstate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod io;
pub mod operators;
pub mod scaling;
pub mod solvers;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use graphs::{build_graph, FamilySpec, FractalDimensions, Graph};
pub use operators::{Bath, EmitterConfig, SparseOperator};
