//! Stochastic gradient directions built from three ingredients: the sampled
//! component gradient at the current point, the same component's gradient at
//! the epoch snapshot, and the full gradient at the snapshot.
//!
//! Every estimator in this crate is a weight triple `(current, snapshot,
//! full)` applied by one shared combiner,
//!
//! ```text
//! v = w_current·∇f_i(x) + w_snapshot·∇f_i(x̃) + w_full·∇f(x̃),
//! ```
//!
//! so estimators that share a weight triple produce bitwise-identical
//! directions. In particular the unbiased and biased λ-weighted families
//! coincide with the halved control-variate direction at λ = ½, and the
//! λ = 0 unbiased estimator collapses to plain SGD.
//!
//! A weight that is exactly zero means the corresponding gradient is never
//! read, so the caller may skip fetching it; the per-step oracle cost is the
//! number of component-gradient fetches actually performed.

use crate::ledger::{IfoLedger, LedgerChannel};
use crate::oracle::{full_gradient, FiniteSumProblem, OracleError};
use crate::schedules::Branch;
use crate::vector::{KahanVector, ParamVector};
use serde::{Deserialize, Serialize};

/// Largest component count accepted by the exact enumeration oracles.
pub const EXACT_ORACLE_MAX_COMPONENTS: usize = 1_000_000;

/// The estimator families. λ parameters live in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// `∇f_i(x)` — weights (1, 0, 0).
    PlainSgd,
    /// `½∇f_i(x) − ½∇f_i(x̃) + ½∇f(x̃)` — weights (½, −½, ½).
    ScaledSvrg,
    /// `(1−λ)∇f_i(x) − λ∇f_i(x̃) + λ∇f(x̃)`; its mean is `(1−λ)∇f(x)`.
    WeightedUnbiased { lambda: f64 },
    /// `(1−λ)(∇f_i(x) − ∇f_i(x̃)) + λ∇f(x̃)`; trades bias for variance.
    Biased { lambda: f64 },
    /// Branch-driven switch: the biased family while the step schedule is on
    /// its decayed branch, the unbiased family once it fixes.
    HybridSwitch {
        lambda_biased: f64,
        lambda_unbiased: f64,
    },
}

/// Default biased-phase weight for the hybrid switch.
pub const DEFAULT_LAMBDA_BIASED: f64 = 2.0 / 3.0;
/// Default unbiased-phase weight for the hybrid switch.
pub const DEFAULT_LAMBDA_UNBIASED: f64 = 0.01;

/// Errors from estimator construction and the exact oracles.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("{name} must lie in [0, 1], got {value}")]
    LambdaOutOfRange { name: &'static str, value: f64 },
    #[error("gradient arguments disagree in dimension: {expected} vs {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(
        "exact enumeration is limited to {EXACT_ORACLE_MAX_COMPONENTS} components, got {0}"
    )]
    TooManyComponents(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A validated estimator choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    kind: EstimatorKind,
}

/// The weight triple applied by the shared combiner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionWeights {
    /// Coefficient of `∇f_i(x)` (current point, sampled component).
    pub current: f64,
    /// Coefficient of `∇f_i(x̃)` (snapshot, sampled component).
    pub snapshot: f64,
    /// Coefficient of `∇f(x̃)` (snapshot, full gradient).
    pub full: f64,
}

fn check_lambda(name: &'static str, value: f64) -> Result<(), EstimatorError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EstimatorError::LambdaOutOfRange { name, value })
    }
}

impl EstimatorSpec {
    /// Validate λ parameters and wrap the kind.
    pub fn new(kind: EstimatorKind) -> Result<EstimatorSpec, EstimatorError> {
        match kind {
            EstimatorKind::PlainSgd | EstimatorKind::ScaledSvrg => {}
            EstimatorKind::WeightedUnbiased { lambda } => check_lambda("lambda", lambda)?,
            EstimatorKind::Biased { lambda } => check_lambda("lambda", lambda)?,
            EstimatorKind::HybridSwitch {
                lambda_biased,
                lambda_unbiased,
            } => {
                check_lambda("lambda_biased", lambda_biased)?;
                check_lambda("lambda_unbiased", lambda_unbiased)?;
            }
        }
        Ok(EstimatorSpec { kind })
    }

    pub fn plain_sgd() -> EstimatorSpec {
        EstimatorSpec {
            kind: EstimatorKind::PlainSgd,
        }
    }

    pub fn scaled_svrg() -> EstimatorSpec {
        EstimatorSpec {
            kind: EstimatorKind::ScaledSvrg,
        }
    }

    pub fn weighted_unbiased(lambda: f64) -> Result<EstimatorSpec, EstimatorError> {
        Self::new(EstimatorKind::WeightedUnbiased { lambda })
    }

    pub fn biased(lambda: f64) -> Result<EstimatorSpec, EstimatorError> {
        Self::new(EstimatorKind::Biased { lambda })
    }

    /// Hybrid switch with the default phase weights (2/3 biased, 0.01
    /// unbiased).
    pub fn hybrid_default() -> EstimatorSpec {
        EstimatorSpec {
            kind: EstimatorKind::HybridSwitch {
                lambda_biased: DEFAULT_LAMBDA_BIASED,
                lambda_unbiased: DEFAULT_LAMBDA_UNBIASED,
            },
        }
    }

    pub fn hybrid(lambda_biased: f64, lambda_unbiased: f64) -> Result<EstimatorSpec, EstimatorError> {
        Self::new(EstimatorKind::HybridSwitch {
            lambda_biased,
            lambda_unbiased,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// The weight triple used on the given schedule branch. Only the hybrid
    /// switch reads the branch.
    pub fn weights(&self, branch: Branch) -> DirectionWeights {
        match self.kind {
            EstimatorKind::PlainSgd => DirectionWeights {
                current: 1.0,
                snapshot: 0.0,
                full: 0.0,
            },
            EstimatorKind::ScaledSvrg => DirectionWeights {
                current: 0.5,
                snapshot: -0.5,
                full: 0.5,
            },
            EstimatorKind::WeightedUnbiased { lambda } => DirectionWeights {
                current: 1.0 - lambda,
                snapshot: -lambda,
                full: lambda,
            },
            EstimatorKind::Biased { lambda } => DirectionWeights {
                current: 1.0 - lambda,
                snapshot: -(1.0 - lambda),
                full: lambda,
            },
            EstimatorKind::HybridSwitch {
                lambda_biased,
                lambda_unbiased,
            } => match branch {
                Branch::Decayed => EstimatorSpec {
                    kind: EstimatorKind::Biased {
                        lambda: lambda_biased,
                    },
                }
                .weights(branch),
                Branch::Fixed => EstimatorSpec {
                    kind: EstimatorKind::WeightedUnbiased {
                        lambda: lambda_unbiased,
                    },
                }
                .weights(branch),
            },
        }
    }

    /// True when some branch gives the snapshot full gradient a nonzero
    /// weight, i.e. when epochs must compute `∇f(x̃)` at all.
    pub fn uses_full_gradient(&self) -> bool {
        self.weights(Branch::Decayed).full != 0.0 || self.weights(Branch::Fixed).full != 0.0
    }
}

/// Number of component-gradient fetches a step with these weights performs:
/// one for the current point and one for the snapshot, each counted only
/// when its weight is nonzero.
pub fn fetches_per_step(weights: DirectionWeights) -> u64 {
    (weights.current != 0.0) as u64 + (weights.snapshot != 0.0) as u64
}

/// Apply the weight triple:
/// `w_current·grad_current + w_snapshot·grad_snapshot + w_full·grad_full`.
///
/// Terms with an exactly-zero weight are skipped, so a caller that did not
/// fetch a gradient may pass any finite placeholder (conventionally zeros)
/// for it without affecting the result.
pub fn direction(
    weights: DirectionWeights,
    grad_current: &ParamVector,
    grad_snapshot: &ParamVector,
    grad_full: &ParamVector,
) -> Result<ParamVector, EstimatorError> {
    let dim = grad_current.dim();
    for other in [grad_snapshot.dim(), grad_full.dim()] {
        if other != dim {
            return Err(EstimatorError::DimensionMismatch {
                expected: dim,
                actual: other,
            });
        }
    }
    let mut out = vec![0.0; dim];
    for (weight, source) in [
        (weights.current, grad_current),
        (weights.snapshot, grad_snapshot),
        (weights.full, grad_full),
    ] {
        if weight != 0.0 {
            let src = source.as_slice();
            for (o, s) in out.iter_mut().zip(src) {
                *o += weight * s;
            }
        }
    }
    Ok(ParamVector::new(out))
}

fn exact_setup<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &ParamVector,
    snapshot: &ParamVector,
) -> Result<ParamVector, EstimatorError> {
    let n = problem.num_components();
    if n > EXACT_ORACLE_MAX_COMPONENTS {
        return Err(EstimatorError::TooManyComponents(n));
    }
    let mut scratch = IfoLedger::new();
    let full = full_gradient(problem, snapshot, &mut scratch, LedgerChannel::Evaluation)?;
    let _ = x; // dimension mismatches surface on the first component call
    Ok(full)
}

/// Exact mean of the estimator over the uniform component index, computed by
/// full enumeration. Refuses problems with more than
/// [`EXACT_ORACLE_MAX_COMPONENTS`] components.
pub fn exact_mean<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    weights: DirectionWeights,
    x: &ParamVector,
    snapshot: &ParamVector,
) -> Result<ParamVector, EstimatorError> {
    let full = exact_setup(problem, x, snapshot)?;
    let n = problem.num_components();
    let mut acc = KahanVector::zeros(problem.dim());
    for i in 0..n {
        let gc = problem.component_gradient(i, x);
        let gs = problem.component_gradient(i, snapshot);
        let v = direction(weights, &gc, &gs, &full)?;
        acc.add(&v);
    }
    Ok(acc.mean(n as f64))
}

/// Exact bias `E[v] − ∇f(x)` of the estimator, by full enumeration.
pub fn exact_bias<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    weights: DirectionWeights,
    x: &ParamVector,
    snapshot: &ParamVector,
) -> Result<ParamVector, EstimatorError> {
    let mut mean = exact_mean(problem, weights, x, snapshot)?;
    let mut scratch = IfoLedger::new();
    let grad_x = full_gradient(problem, x, &mut scratch, LedgerChannel::Evaluation)?;
    mean.axpy(-1.0, &grad_x);
    Ok(mean)
}

/// Exact second moment `E‖v‖²` of the estimator, by full enumeration.
pub fn exact_second_moment<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    weights: DirectionWeights,
    x: &ParamVector,
    snapshot: &ParamVector,
) -> Result<f64, EstimatorError> {
    let full = exact_setup(problem, x, snapshot)?;
    let n = problem.num_components();
    let mut acc = crate::vector::KahanSum::new();
    for i in 0..n {
        let gc = problem.component_gradient(i, x);
        let gs = problem.component_gradient(i, snapshot);
        let v = direction(weights, &gc, &gs, &full)?;
        acc.add(v.norm_sq());
    }
    Ok(acc.value() / (n as f64))
}
