//! Error type shared by every module of the toolkit.

use crate::mesh::EdgeTag;

/// Errors produced by meshing, validation, assembly and solves.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Cell geometry violates its invariants (hole margin, refinement level).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Mesh failed a quality invariant (orientation, conformity, min angle).
    #[error("mesh quality violation: {0}")]
    MeshQuality(String),

    /// A face node of a tile found no exact-coordinate partner while stitching.
    #[error("stitch failure: {0}")]
    StitchFailure(String),

    /// The symmetric part of a diffusion matrix is not positive definite.
    #[error("matrix not elliptic: min eigenvalue of symmetric part = {m}")]
    NotElliptic { m: f64 },

    /// A scalar field required to be positive has a non-positive sample.
    #[error("field not positive: min sample = {min}")]
    NotPositive { min: f64 },

    /// An operation needing hole-boundary edges ran on a mesh without them.
    #[error("mesh has no SIGMA edges")]
    EmptySigma,

    /// The requested boundary edge group is absent from the mesh.
    #[error("missing edge tag {0:?}")]
    MissingTag(EdgeTag),

    /// A node is claimed by two incompatible constraints.
    #[error("conflicting constraints on node {node}")]
    ConflictingConstraints { node: usize },

    /// The linear solver failed to reach the requested residual.
    #[error("solver breakdown: relative residual {residual:.3e} after {iterations} iterations")]
    SolverBreakdown { residual: f64, iterations: usize },

    /// Neumann-type solvability violated: the surface load does not have
    /// (discrete) zero mean.
    #[error("incompatible surface data: discrete mean {mean:.3e} exceeds 1e-10")]
    Incompatible { mean: f64 },

    /// Cell solutions and coefficients refer to different meshes.
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    /// Macro solution and cell solutions come from different pipelines.
    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    /// Coercivity gate failed and was not overridden.
    #[error("coercivity check failed: c0 = {c0:.6e} (sqrt(mu0*m) = {lhs:.6e} <= C_s*|alpha|_inf = {rhs:.6e})")]
    CoercivityFailed { c0: f64, lhs: f64, rhs: f64 },

    /// Invalid study configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
