//! Approximate balanced truncation for discrete-time, stable, linear
//! time-periodic (LTP) systems.
//!
//! The system `x(k+1) = A(k)x(k) + B(k)u(k)`, `y(k) = C(k)x(k)` with
//! T-periodic matrices is lifted to a time-invariant system at a base time
//! `j`. Empirical Gramian factors are assembled from impulse-response
//! snapshots of the periodic system (primal for controllability, adjoint for
//! observability), and the balancing modes come from an SVD of `YᵀX`
//! without ever forming the n×n Gramians. For many outputs, a T-periodic POD
//! output projection cuts the adjoint campaign to `T·r_op` simulations.
//!
//! An exact lifted-Lyapunov path is kept alongside as a desk-scale oracle.
//!
//! All matrices are real; every formula carries over to the complex case by
//! replacing transposes with conjugate transposes.

pub mod balancing;
pub mod bench;
pub mod error;
pub mod gramians;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod projection;
pub mod system;

pub use balancing::{
    balance, exact_balanced_truncation, reduce, simulate_reduced, BalancedBasis, ReducedModel,
    DEFAULT_RANK_TOL,
};
pub use error::{Error, Result};
pub use gramians::{
    controllability_factor, exact_gramians, truncation_bound, min_input_energy, observability_factor,
    output_energy, ControllabilityCampaign, FactorKind, GramianPair, Provenance, SnapshotFactor,
};
pub use lifting::{lift, lifted_impulse_response, ImpulseResponseBlocks, LiftedSystem};
pub use projection::{
    dual_input_projection, pod_output_projection, projection_objective, InputProjection,
    OutputProjection, ProjectionObjective, ProjectionVariant,
};
pub use system::{AdjointSystem, PeriodicSystem, Time, Trajectory};
