//! Numerical tolerances shared by verifiers and acceptance checks.
//!
//! Verifiers report raw slack; these constants are the policy applied to it.

/// Relative tolerance for membership in `Ax`, scaled by `1 + ||x||`.
pub const MEMBER_GAP_REL: f64 = 1e-9;

/// Allowed violation for monotonicity, cocoercivity and nonexpansiveness samples.
pub const PROPERTY_TOL: f64 = 1e-12;

/// One-step inequality between two forward-backward maps.
pub const LEMMA_GAP_TOL: f64 = 1e-10;

/// All-pairs distance bound between two forward-backward sequences, relative to `1 + scale`.
pub const KOBAYASHI_REL_TOL: f64 = 1e-9;

/// Algebraic identities of the step coefficients and `c_{k,l}` recurrences.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Default cap on forward-backward steps spent by a single flow query.
pub const DEFAULT_FLOW_BUDGET: u64 = 50_000_000;

/// Membership tolerance at `x`.
pub fn member_tol(x_norm: f64) -> f64 {
    MEMBER_GAP_REL * (1.0 + x_norm)
}
