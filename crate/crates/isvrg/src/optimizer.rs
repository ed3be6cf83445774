//! The epoch/inner-loop skeleton shared by every estimator: per epoch, an
//! optional full gradient at the snapshot, `m` sampled inner steps, a
//! snapshot update, and one trace record; across epochs, early stopping on a
//! gradient target or an oracle budget.
//!
//! The random stream is consumed only by component-index sampling (and by
//! the final draw of the uniform-snapshot output policy), so two runs with
//! the same seed are bit-identical regardless of which gradients their
//! estimators skip.

use crate::estimators::{direction, fetches_per_step, EstimatorError, EstimatorSpec};
use crate::ledger::{IfoLedger, LedgerChannel};
use crate::oracle::{full_gradient, grad_sq_norm, objective_value, FiniteSumProblem, OracleError};
use crate::schedules::{Branch, ScheduleError, StepSchedule};
use crate::vector::{KahanSum, ParamVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How each epoch's snapshot is formed from the epoch's iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotWeights {
    /// Snapshot = last inner iterate. Needs no iterate history (O(d) memory).
    LastIterate,
    /// Snapshot = Σ p_i·x_i over the epoch's m+1 iterates (x_0 included).
    /// Weights must be non-negative and sum to 1 within 1e-12.
    Explicit(Vec<f64>),
}

/// Which point a finished run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputPolicy {
    /// The final snapshot.
    LastSnapshot,
    /// The recorded snapshot with the smallest measured squared gradient
    /// norm (ties go to the earliest).
    BestSnapshotByGradNorm,
    /// A uniformly random recorded snapshot, drawn from the run's stream.
    UniformRandomSnapshot,
}

/// Whether epochs compute the snapshot full gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochGradientMode {
    /// Compute it exactly when some branch of the estimator reads it.
    Auto,
    /// Always compute it (classic snapshot accounting even for plain SGD).
    Always,
    /// Never compute it; rejected when the estimator reads it.
    Never,
}

/// Configuration of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub estimator: EstimatorSpec,
    pub schedule: StepSchedule,
    /// Number of epochs S (the total step count is T = S·m).
    pub epochs: usize,
    /// Inner steps per epoch m.
    pub inner_length: usize,
    pub snapshot_weights: SnapshotWeights,
    pub seed: u64,
    pub x0: ParamVector,
    /// Early-stop target for the measured squared gradient norm; 0 disables
    /// early stopping.
    pub epsilon: f64,
    /// Optional cap on optimization-channel oracle calls. The run stops at
    /// the first epoch boundary at or past the cap.
    pub ifo_budget: Option<u64>,
    pub output_policy: OutputPolicy,
    pub epoch_gradient: EpochGradientMode,
}

impl RunConfig {
    /// A last-iterate, last-snapshot, auto-gradient configuration.
    pub fn new(
        estimator: EstimatorSpec,
        schedule: StepSchedule,
        epochs: usize,
        inner_length: usize,
        seed: u64,
        x0: ParamVector,
    ) -> RunConfig {
        RunConfig {
            estimator,
            schedule,
            epochs,
            inner_length,
            snapshot_weights: SnapshotWeights::LastIterate,
            seed,
            x0,
            epsilon: 0.0,
            ifo_budget: None,
            output_policy: OutputPolicy::LastSnapshot,
            epoch_gradient: EpochGradientMode::Auto,
        }
    }

    fn validate<P: FiniteSumProblem + ?Sized>(&self, problem: &P) -> Result<(), RunError> {
        let fail = |reason: String| Err(RunError::InvalidConfig { reason });
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.inner_length == 0 {
            return fail("inner_length must be at least 1".into());
        }
        if self.x0.dim() != problem.dim() {
            return fail(format!(
                "x0 has dimension {}, problem has {}",
                self.x0.dim(),
                problem.dim()
            ));
        }
        if !self.x0.is_all_finite() {
            return fail("x0 has non-finite coordinates".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return fail(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if self.ifo_budget == Some(0) {
            return fail("ifo_budget must be positive when given".into());
        }
        self.schedule.validate()?;
        if let SnapshotWeights::Explicit(p) = &self.snapshot_weights {
            if p.len() != self.inner_length + 1 {
                return fail(format!(
                    "snapshot weights need m+1 = {} entries, got {}",
                    self.inner_length + 1,
                    p.len()
                ));
            }
            if p.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return fail("snapshot weights must be non-negative and finite".into());
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return fail(format!("snapshot weights sum to {sum}, expected 1"));
            }
        }
        if self.epoch_gradient == EpochGradientMode::Never && self.estimator.uses_full_gradient() {
            return fail("epoch gradient disabled but the estimator reads it".into());
        }
        Ok(())
    }
}

/// One per-epoch diagnostic record. The objective and gradient diagnostics
/// are measured at the epoch's snapshot and charged to the evaluation
/// channel, never to the optimization budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Epoch index; 0 is the starting point before any step.
    pub epoch: usize,
    /// Cumulative optimization-channel oracle calls when the record was made.
    pub cumulative_ifo: u64,
    /// f at the snapshot.
    pub objective: f64,
    /// ‖∇f‖² at the snapshot.
    pub grad_sq: f64,
    /// Step size of the epoch's last inner step (0 for the initial record).
    pub step_size_last: f64,
    /// Branch of the epoch's last inner step (schedule's initial branch for
    /// the initial record).
    pub branch_last: Branch,
    /// Mean of ‖v‖² over the epoch's inner steps (0 for the initial record).
    pub second_moment_est: f64,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// The point selected by the output policy.
    pub output: ParamVector,
    pub trace: Vec<TraceRecord>,
    /// Recorded snapshots, aligned with `trace` (entry 0 is the start).
    pub snapshots: Vec<ParamVector>,
    pub ledger: IfoLedger,
    /// True when the oracle budget stopped the run before its S epochs.
    pub truncated: bool,
    pub epochs_completed: usize,
}

/// Errors from configuration and execution.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid run configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("iterates diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Records up to the last finite measurement.
        trace: Vec<TraceRecord>,
    },
    #[error(transparent)]
    Oracle(OracleError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// The family whose recommended inner length should be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerLengthRule {
    Svrg,
    Unbiased,
    Biased,
    IsvrgPlus,
}

/// Recommended epoch length for each family (all floors, minimum 1):
///
/// * svrg: `⌊9·n^{α/2}/5⌋`
/// * unbiased: `⌊3·n^{(3a+b)α}/(1−λ)⌋`
/// * biased: `⌊3·n^{2aα}/(2(1−λ))⌋`
/// * the hybrid: `⌊n^{(3a+b)α}⌋`
///
/// λ is read only by the unbiased/biased rules and must be below 1 there.
pub fn default_inner_length(
    rule: InnerLengthRule,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
    lambda: f64,
) -> Result<usize, RunError> {
    let invalid = |reason: String| RunError::InvalidConfig { reason };
    if n == 0 {
        return Err(invalid("n must be at least 1".into()));
    }
    let nf = n as f64;
    let raw = match rule {
        InnerLengthRule::Svrg => 9.0 * nf.powf(alpha / 2.0) / 5.0,
        InnerLengthRule::Unbiased | InnerLengthRule::Biased => {
            if !(lambda >= 0.0 && lambda < 1.0) {
                return Err(invalid(format!(
                    "lambda must lie in [0, 1) for this rule, got {lambda}"
                )));
            }
            match rule {
                InnerLengthRule::Unbiased => 3.0 * nf.powf((3.0 * a + b) * alpha) / (1.0 - lambda),
                _ => 3.0 * nf.powf(2.0 * a * alpha) / (2.0 * (1.0 - lambda)),
            }
        }
        InnerLengthRule::IsvrgPlus => nf.powf((3.0 * a + b) * alpha),
    };
    if !raw.is_finite() {
        return Err(invalid(format!("inner-length formula overflowed: {raw}")));
    }
    Ok((raw.floor() as usize).max(1))
}

/// Pick the reported point from recorded snapshots. The random stream is
/// touched only by the uniform policy.
pub fn select_output(
    trace: &[TraceRecord],
    snapshots: &[ParamVector],
    policy: OutputPolicy,
    rng: &mut ChaCha8Rng,
) -> ParamVector {
    assert!(
        !snapshots.is_empty() && trace.len() == snapshots.len(),
        "trace and snapshots must be non-empty and aligned"
    );
    match policy {
        OutputPolicy::LastSnapshot => snapshots[snapshots.len() - 1].clone(),
        OutputPolicy::BestSnapshotByGradNorm => {
            let mut best = 0;
            for (k, record) in trace.iter().enumerate() {
                if record.grad_sq < trace[best].grad_sq {
                    best = k;
                }
            }
            snapshots[best].clone()
        }
        OutputPolicy::UniformRandomSnapshot => {
            snapshots[rng.gen_range(0..snapshots.len())].clone()
        }
    }
}

fn divergence_of(err: OracleError, epoch: usize, trace: &[TraceRecord]) -> RunError {
    match err {
        OracleError::NonFiniteValue { .. } | OracleError::NonFiniteGradient { .. } => {
            RunError::Diverged {
                epoch,
                trace: trace.to_vec(),
            }
        }
        other => RunError::Oracle(other),
    }
}

/// Execute the configured run.
///
/// Per epoch: the snapshot full gradient is computed when the mode calls for
/// it (n optimization oracle calls); each of the m inner steps samples a
/// component index, fetches only the component gradients whose estimator
/// weights are nonzero (charging one optimization call each), and moves
/// against the combined direction with the scheduled step. The snapshot is
/// then rebuilt from the epoch's iterates, diagnostics are measured at it on
/// the evaluation channel, and the run stops early once the measured ‖∇f‖²
/// reaches a positive `epsilon` or the optimization budget is exhausted.
pub fn run<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    config: &RunConfig,
) -> Result<RunOutcome, RunError> {
    config.validate(problem)?;
    let n = problem.num_components();
    let dim = problem.dim();
    let m = config.inner_length;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ledger = IfoLedger::new();

    let needs_epoch_gradient = match config.epoch_gradient {
        EpochGradientMode::Auto => config.estimator.uses_full_gradient(),
        EpochGradientMode::Always => true,
        EpochGradientMode::Never => false,
    };

    let mut x = config.x0.clone();
    let mut snapshot = x.clone();
    let mut snapshots = vec![snapshot.clone()];
    let mut trace: Vec<TraceRecord> = Vec::new();
    let placeholder = ParamVector::zeros(dim);

    let record_epoch = |epoch: usize,
                        point: &ParamVector,
                        step: f64,
                        branch: Branch,
                        second_moment: f64,
                        ledger: &mut IfoLedger,
                        trace: &mut Vec<TraceRecord>|
     -> Result<(), RunError> {
        let objective = objective_value(problem, point, ledger, LedgerChannel::Evaluation)
            .map_err(|e| divergence_of(e, epoch, trace))?;
        let grad_sq =
            grad_sq_norm(problem, point, ledger).map_err(|e| divergence_of(e, epoch, trace))?;
        trace.push(TraceRecord {
            epoch,
            cumulative_ifo: ledger.optimization_ifo(),
            objective,
            grad_sq,
            step_size_last: step,
            branch_last: branch,
            second_moment_est: second_moment,
        });
        Ok(())
    };

    let initial_branch = config.schedule.step_at(0, 1, 1).1;
    record_epoch(0, &snapshot, 0.0, initial_branch, 0.0, &mut ledger, &mut trace)?;

    let mut truncated = false;
    let mut epochs_completed = 0;
    let stop_now = |record: &TraceRecord, config: &RunConfig| -> (bool, bool) {
        if config.epsilon > 0.0 && record.grad_sq <= config.epsilon {
            return (true, false);
        }
        if let Some(budget) = config.ifo_budget {
            if record.cumulative_ifo >= budget {
                return (true, true);
            }
        }
        (false, false)
    };

    let (stop, _) = stop_now(&trace[0], config);
    if !stop {
        'epochs: for s in 1..=config.epochs {
            let epoch_grad = if needs_epoch_gradient {
                match full_gradient(problem, &snapshot, &mut ledger, LedgerChannel::Optimization) {
                    Ok(g) => g,
                    Err(e) => return Err(divergence_of(e, s, &trace)),
                }
            } else {
                placeholder.clone()
            };

            let mut history = match &config.snapshot_weights {
                SnapshotWeights::LastIterate => None,
                SnapshotWeights::Explicit(_) => Some(vec![x.clone()]),
            };
            let mut second_moment = KahanSum::new();
            let mut last_step = 0.0;
            let mut last_branch = initial_branch;

            for t in 0..m {
                let index = rng.gen_range(0..n);
                let delta = ((s - 1) * m + t) as u64;
                let (eta, branch) = config.schedule.step_at(delta, t + 1, s);
                let weights = config.estimator.weights(branch);
                let grad_current = if weights.current != 0.0 {
                    ledger.charge(LedgerChannel::Optimization, 1);
                    problem.component_gradient(index, &x)
                } else {
                    placeholder.clone()
                };
                let grad_snapshot = if weights.snapshot != 0.0 {
                    ledger.charge(LedgerChannel::Optimization, 1);
                    problem.component_gradient(index, &snapshot)
                } else {
                    placeholder.clone()
                };
                debug_assert_eq!(
                    (weights.current != 0.0) as u64 + (weights.snapshot != 0.0) as u64,
                    fetches_per_step(weights)
                );
                let v = direction(weights, &grad_current, &grad_snapshot, &epoch_grad)?;
                second_moment.add(v.norm_sq());
                x.axpy(-eta, &v);
                if !x.is_all_finite() {
                    return Err(RunError::Diverged { epoch: s, trace });
                }
                if let Some(history) = history.as_mut() {
                    history.push(x.clone());
                }
                last_step = eta;
                last_branch = branch;
            }

            snapshot = match &config.snapshot_weights {
                SnapshotWeights::LastIterate => x.clone(),
                SnapshotWeights::Explicit(p) => {
                    let iterates = history.as_ref().expect("history kept for explicit weights");
                    let mut avg = ParamVector::zeros(dim);
                    for (weight, iterate) in p.iter().zip(iterates) {
                        if *weight != 0.0 {
                            avg.axpy(*weight, iterate);
                        }
                    }
                    avg
                }
            };
            if !snapshot.is_all_finite() {
                return Err(RunError::Diverged { epoch: s, trace });
            }
            snapshots.push(snapshot.clone());
            record_epoch(
                s,
                &snapshot,
                last_step,
                last_branch,
                second_moment.value() / m as f64,
                &mut ledger,
                &mut trace,
            )?;
            epochs_completed = s;
            let (stop, because_budget) = stop_now(trace.last().expect("just pushed"), config);
            if stop {
                truncated = because_budget && s < config.epochs;
                break 'epochs;
            }
        }
    }

    let output = select_output(&trace, &snapshots, config.output_policy, &mut rng);
    Ok(RunOutcome {
        output,
        trace,
        snapshots,
        ledger,
        truncated,
        epochs_completed,
    })
}
