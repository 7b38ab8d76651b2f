//! Centralized numerical tolerances.
//!
//! Every comparison tolerance used by the library and its verification
//! suites is defined here, with the reasoning recorded next to the value.
//! Callers may override the defaults where an operation takes an explicit
//! tolerance, but the constants below are the single source of the
//! defaults.

/// Pointwise algebraic identities: adjoint relations, defining relations of
/// the two gradients, bracket symmetry splits. These involve a handful of
/// linear solves and inner products on well-conditioned catalog structures,
/// so they hold to a comfortable multiple of machine epsilon.
pub const TOL_ALGEBRAIC: f64 = 1e-9;

/// Identities that consume first or second derivatives of fields (product
/// and chain rules for the Laplace-like operators, naturality under chart
/// maps, Jacobi sums). Second derivatives lose a few more digits than plain
/// algebra, hence one order looser than [`TOL_ALGEBRAIC`].
pub const TOL_DIFFERENTIAL: f64 = 1e-8;

/// Quadrature and flow-integration comparisons: Green identities at finite
/// order, transported measures, bracket transport along numerical flows.
/// Dominated by quadrature truncation and RK4 global error.
pub const TOL_INTEGRAL: f64 = 1e-6;

/// Structure flags (symmetric, skew, constant) are decided by probing the
/// matrix field at quasi-random points and comparing entries. Exact flags
/// on catalog structures differ by exactly zero; anything beyond rounding
/// noise means the flag is genuinely false.
pub const TOL_FLAG: f64 = 1e-12;

/// Ceiling for the infinity-norm condition estimate of any pointwise linear
/// solve. Above this, solutions carry too few trustworthy digits for the
/// identity checks downstream, so the solve fails loudly instead.
pub const COND_CEILING: f64 = 1e12;

/// Slack allowed when checking strict monotonicity of a scalar along a
/// numerically integrated trajectory: successive values may agree to
/// rounding without falsifying strictness. Scaled by `1 + |value|`.
pub const TOL_MONOTONE_SLACK: f64 = 1e-12;

/// Seeds for periodicity probes must not start at a critical point of the
/// generating function; gradients below this floor are rejected.
pub const SEED_GRADIENT_FLOOR: f64 = 1e-8;

/// A variation used in an interior-support check must vanish on the box
/// boundary to this tolerance at every boundary quadrature node.
pub const TOL_BOUNDARY_SUPPORT: f64 = 1e-14;
