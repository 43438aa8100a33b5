//! Central numeric tolerances. All values are exact rationals or simple
//! closed forms in the scenarios of interest, so tight tolerances are cheap.

/// Hermiticity / normalization / exact-value comparisons.
pub const TOL_EXACT: f64 = 1e-12;

/// Reconstruction residuals (eigendecomposition, Schmidt) and moment
/// agreement between independent routes.
pub const TOL_RECON: f64 = 1e-10;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const TOL_DEGENERATE: f64 = 1e-9;

/// Square-root arguments with magnitude at most SQRT_CLAMP are flushed to
/// exact 0 (roots amplify float dust of exact zeros to sqrt scale); anything
/// more negative is an error, since second moments are nonnegative.
pub const SQRT_CLAMP: f64 = 1e-12;

/// Flush threshold for square-root arguments built from sampled moment
/// tables. Sits well above the statistical noise of the supported sample
/// budgets (per-entry scatter below 1e-2) and well below the smallest
/// nonzero argument in the canonical scenarios (about 7e-2).
pub const NOISE_CLAMP: f64 = 2e-2;

/// Marginal-consistency check on empirical (sampled) moment tables.
pub const TOL_SAMPLED_MARGINAL: f64 = 1e-6;

/// Threshold below which the extra variance budget `c` of the LHV
/// construction is treated as exactly zero.
pub const LHV_C_ZERO: f64 = 1e-14;

/// Cells with joint weight below this are dropped from the LHV model.
pub const LHV_WEIGHT_ZERO: f64 = 1e-15;

/// Conditional variance below this collapses to a point mass.
pub const LHV_VAR_DELTA: f64 = 1e-14;
