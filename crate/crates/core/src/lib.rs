//! Generalized eigenvector and canonical-correlation solvers built on
//! black-box linear operators.
//!
//! The central primitive is an inexact power iteration for the pair (A, B)
//! with A symmetric and B symmetric positive definite: each outer step
//! replaces the exact application of B⁻¹A by a warm-started first-order
//! solve of the quadratic `min_w ½ wᵀBw − wᵀ(A w_t)`, so the only access
//! to A and B is through matrix-vector products. On top of that sit:
//!
//! - [`power::genelin`] / [`power::genelink`]: top-1 / top-k generalized
//!   eigenvectors with a two-phase inner-tolerance schedule,
//! - [`cca::ccalin`]: canonical correlation analysis by reduction to the
//!   block pair ([0 S_xy; S_yx 0], diag(S_xx, S_yy)),
//! - [`power::solve_linear_system_via_geneig`]: solving M x = m as a
//!   rank-one top-eigenvector problem,
//! - [`oracle`]: slow, dependency-free dense references (Jacobi
//!   eigensolver, dense CCA, principal angles) used to validate the fast
//!   paths in tests.

pub mod cca;
pub mod error;
pub mod io;
pub mod linops;
pub mod oracle;
pub mod power;
pub mod solvers;
pub mod synth;

pub use cca::{build_cca_operators, ccalin, pcc, tcc, CcaDataset, CcaResult, CcaTrace, DataMatrix};
pub use error::{Error, Result};
pub use linops::{
    b_dot, b_norm, estimate_extreme_eigs, gs_b, random_gaussian_matrix, random_unit_b,
    DenseSymmetricOperator, DiagonalOperator, GsOutcome, LinearOperator, Rank1Operator,
    SparseSymmetricMatrix, SpdOperator, SpectralEstimate, Subspace,
};
pub use power::{
    gamma_matrix, genelin, genelink, iteration_bound, rayleigh_beta,
    solve_linear_system_via_geneig, tolerance_schedule, ConvergenceTrace, GenEigConfig,
    GenEigProblem, SchedulePhase, StopReason, Top1Result, TopkResult, TraceEntry,
};
pub use solvers::{
    required_iterations, run_agd, run_gd, solve_spd, QuadraticObjective, SolveMethod,
    SolveReport, SolverConfig, SpectralSource,
};
pub use synth::{generate_cca, generate_geneig, CcaInstance, CcaSpec, GeneigInstance, GeneigSpec};
