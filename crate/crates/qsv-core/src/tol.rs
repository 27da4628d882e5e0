//! Numerical tolerances, all stated against `f64` arithmetic.
//!
//! Every validity check and every documented guarantee in the crate pins
//! one of the constants below, so the precision contract lives in one
//! place.

/// Hermiticity pre-check for eigendecomposition: `‖M − M†‖_F` bound.
pub const HERMITIAN: f64 = 1e-10;

/// Eigendecomposition reconstruction and unitarity guarantee (Frobenius).
pub const RECONSTRUCT: f64 = 1e-10;

/// Jacobi convergence: off-diagonal Frobenius norm threshold.
pub const JACOBI_OFFDIAG: f64 = 1e-12;

/// Hard cap on Jacobi sweeps; convergence is quadratic and never gets
/// anywhere near this at the supported dimensions.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// `psd_sqrt` result guarantee: `‖R·R − M‖_F` bound.
pub const SQRT_RESIDUAL: f64 = 1e-9;

/// Eigenvalues in `[PSD_CLAMP, 0)` are clamped to zero by `psd_sqrt`;
/// anything below is a genuine PSD violation.
pub const PSD_CLAMP: f64 = -1e-8;

/// State invariants: per-block minimum eigenvalue and hermiticity bound.
pub const STATE_PSD: f64 = -1e-9;

/// State invariants: deviation of the total trace from 1.
pub const STATE_TRACE: f64 = 1e-9;

/// Channel invariant: deviation of the trace-preservation identity.
pub const TRACE_PRESERVING: f64 = 1e-9;

/// POVM validity: effect PSD bound and `ΣE − I` deviation bound.
pub const POVM: f64 = 1e-9;

/// Choi-matrix PSD check for single-block component maps.
pub const CHOI_PSD: f64 = -1e-8;

/// Combinator law identities (re-indexings and interchange) hold within
/// this bound on action matrices.
pub const REINDEX: f64 = 1e-12;

/// General metric identities (Helstrom = trace distance, sandwiches, ...).
pub const METRIC: f64 = 1e-9;

/// Fast-path versus brute-force-tensor oracle agreement.
pub const ORACLE: f64 = 1e-10;

/// A verification margin counts as non-negative above this.
pub const MARGIN: f64 = -1e-9;

/// Simulator-parameter scan: coarse grid step over q ∈ [0,1].
pub const Q_GRID: f64 = 1e-3;

/// Simulator-parameter scan: golden-section refinement width.
pub const Q_REFINE: f64 = 1e-6;

/// Eigenvalues above this count toward the support projector.
pub const SUPPORT: f64 = 1e-12;

/// Relative spectral floor for operator square roots: eigenvalues below
/// this fraction of the largest are treated as exact zeros. Without the
/// floor, Jacobi round-off of order 1e-17 on true zeros turns into
/// `sqrt(1e-17) ~ 3e-9` phantom contributions, which is what limits
/// fidelity accuracy on rank-deficient states.
pub const EIG_FLOOR: f64 = 1e-13;
