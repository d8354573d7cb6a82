//! Discrete-time rate certification.
//!
//! The Lyapunov energy `E = a f(x) + ⟨∇f(x), v⟩ + (b/2)|v|²` contracts by the
//! factor `δ` per MSGD step whenever `(a, b)` satisfies the constrained
//! system checked by [`constraint_residuals`]. [`certify_rate`] searches for
//! the pair maximising `r(a, b) = min(1 + aγ, 1/δ)`; the remaining functions
//! evaluate the closed-form small-step rates and the SGD baseline.

mod coefficients;
mod solver;
mod theory;

pub use coefficients::{
    constraint_residuals, step_coefficients, CoefficientSet, ConstraintResiduals, Relation,
    CONSISTENCY_TOLERANCE,
};
pub use solver::{certify_rate, certify_rate_with, recursive_bound, RateCertificate, SolverOptions};
pub use theory::{
    feasible_pair, optimal_friction_discrete, rate_lem49378, sgd_kappa_threshold,
    sgd_step_factor, small_step_rate, theo2_interval_branch, theo2_point_branch, Binding,
    FeasiblePair, MuWindow, SgdFactor, SmallStepRate, TheoreticalRate,
};
