//! Moments of uniformly random loopless multigraphs with a fixed degree
//! sequence.
//!
//! The crate provides
//!
//! * [`graph`]: multigraphs, degree sequences, edge-list ingestion and the
//!   collapsed simple graph;
//! * [`enumerate`]: exhaustive enumeration of tiny ensembles for exact
//!   moments under the uniform and configuration models;
//! * [`mcmc`]: a degree-preserving edge-swap chain targeting either model,
//!   with Monte Carlo moment accumulation;
//! * [`solver`]: the coordinate-wise solver for `β`, the expected collapsed
//!   degrees, and Jacobian diagnostics;
//! * [`estimators`]: the Chung–Lu and solver-based estimates of Ω, χ and σ;
//! * [`modularity`]: modularity matrices and multiway spectral partitioning;
//! * [`experiments`]: synthetic sequences, convergence traces and
//!   perturbation tests.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod enumerate;
mod error;
pub mod estimators;
pub mod experiments;
pub mod graph;
pub mod mcmc;
pub mod modularity;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};

/// Crate version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use nalgebra;

pub use enumerate::{enumerate_ensemble, oracle_moments, EnumeratedEnsemble, OracleMoments};
pub use estimators::{
    chi_estimate, cl_estimate, collapse_error_bound, omega_i_estimate, relative_error, EstimateSource,
    MomentEstimates, RegularityConstants, RelativeError,
};
pub use graph::{collapse, from_edge_list, temporal_threshold, CollapsedStats, DegreeSequence, EdgeRecord, LabelledGraph, Multigraph};
pub use mcmc::{
    configuration_identity_residual, mc_estimates, run_chain, ChainConfig, ChainRun, EdgeSwapChain, Model,
    MomentAccumulator, PairMoments,
};
pub use modularity::{modularity, modularity_matrix, msp, ModularityMatrix, MspConfig, NullSource, Partition};
pub use solver::{
    classify, coordinate_update, implied_degrees, jacobian, jacobian_min_eigenvalue, pair_kernel, solve,
    BetaEstimate, Classification, SolverConfig, StopReason, UpdateScheme,
};
