//! Numerical toolkit for step-two Carnot groups given by structure constants.
//!
//! - [`algebra`]: group law, dilations, validation.
//! - [`jmaps`]: the skew operators `J_u` and the Métivier test.
//! - [`filtration`]: the pointwise invariant `N(p)` and the search for `N_0`.
//! - [`geodesics`]: exponential map and two distance solvers.
//! - [`mcp`]: distortion coefficients and empirical contraction exponents.
//! - [`deformation`]: the family `G_k` and experiments along it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod deformation;
pub mod error;
pub mod filtration;
pub mod format;
pub mod geodesics;
pub mod jmaps;
pub mod linalg;
pub mod mcp;
pub mod rng;

pub use algebra::{
    euclidean, free_step_two, heisenberg, validate_dense, validate_spec, GroupPoint, StructureConstants,
    ValidationReport,
};
pub use deformation::{
    convergence_report, gk_family, gk_member, semicontinuity_experiment, ConvergenceReport, FamilyIndex,
    GroupFamily, SemicontinuityReport,
};
pub use error::{CarnotError, Result};
pub use filtration::{
    annihilator, flag_subspace, n0_search, w_decomposition, FiltrationReport, N0SearchResult, PointInvariant,
};
pub use format::{parse_spec, write_spec, SpecFile};
pub use geodesics::{
    distance, exp_map, left_frame, minimizing_check, path_length, Covector, DistanceEstimate, DistanceMethod,
    DistanceOptions, GeodesicPath,
};
pub use jmaps::{j_operator, metivier_check, JOperator, MetivierStatus, MetivierVerdict};
pub use mcp::{
    contraction_exponent, jacobian_exp, mcp_integrand, nce_lower_bound, s_k, zs_volume_ratio, ContractionSample,
    DistortionQuery, NceReport,
};
