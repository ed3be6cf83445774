//! Finite-sum nonconvex optimization with variance-reduced gradient estimators.
//!
//! The crate is built around objectives of the form `f(x) = (1/n) · Σ f_i(x)`
//! where each component `f_i` is smooth but `f` may be nonconvex. It provides:
//!
//! * an oracle interface for finite-sum problems with IFO (incremental
//!   first-order oracle) accounting ([`FiniteSumProblem`], [`IfoLedger`]),
//! * four built-in problem families with seeded, reproducible data
//!   ([`problems`]),
//! * a family of gradient estimators spanning plain SGD, scaled SVRG, a
//!   λ-weighted unbiased estimator, a λ-weighted biased estimator, and the
//!   hybrid switch used by ISVRG+ ([`estimators`]),
//! * decayed / fixed / hybrid-max / practical step-size schedules
//!   ([`schedules`]),
//! * an epoch-based optimizer loop with snapshot control variates
//!   ([`optimizer`]),
//! * a calculator for the convergence constants, Lyapunov recursions,
//!   admissible λ ranges, and IFO complexity attached to these estimators
//!   ([`theory`]).

#![forbid(unsafe_code)]

pub mod estimators;
pub mod ledger;
pub mod optimizer;
pub mod oracle;
pub mod problems;
pub mod schedules;
pub mod theory;
pub mod vector;

pub use estimators::{
    direction, exact_bias, exact_mean, exact_second_moment, fetches_per_step, DirectionWeights,
    EstimatorError, EstimatorKind, EstimatorSpec,
};
pub use ledger::{IfoLedger, LedgerChannel};
pub use optimizer::{
    default_inner_length, run, select_output, EpochGradientMode, InnerLengthRule, OutputPolicy,
    RunConfig, RunError, RunOutcome, SnapshotWeights, TraceRecord,
};
pub use oracle::{full_gradient, grad_sq_norm, objective_value, FiniteSumProblem, OracleError};
pub use problems::{
    estimate_lipschitz, estimate_sigma, finite_diff_check, make_problem, BuiltinProblem,
    ProblemFamily, ProblemRecipe, RecipeError,
};
pub use schedules::{
    crossover_index, decayed_step, fixed_step, hybrid_c_from_constants, Branch, ScheduleError,
    ScheduleKind, StepSchedule,
};
pub use theory::{
    admissible_lambda, decayed_bound_base, decayed_c_biased, decayed_c_scaled_svrg,
    decayed_c_weighted_unbiased, decayed_factor_biased, decayed_factor_scaled_svrg,
    decayed_factor_weighted_unbiased, fixed_bound_closed_biased, fixed_bound_closed_scaled_svrg,
    fixed_bound_closed_weighted_unbiased, fixed_bound_from_gamma, gamma_lower_bound, hybrid_bound,
    ifo_complexity, lambda_factor_optima, lyapunov_recursion, sample_scale, AdmissibleLambda,
    AdmissibleTable, DecayedFamilyReport, FactorOptima, FixedFamilyReport, IfoComplexity,
    IfoRegime, LambdaInterval, LambdaOptimum, NuConstants, RecursionFamily, RecursionTable,
    TheoryError, TheoryInputs, TheoryReport, WeightedFamily,
};
pub use vector::ParamVector;

// Book chapters double as doc-tests so the guide's code stays compilable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/finite-sums.md")]
    mod finite_sums {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/schedules.md")]
    mod schedules {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
}
