//! Experiment execution: scalar tuning, parallel (optimizer × seed)
//! fan-out, matched-budget checkpoints, and seed summaries.
//!
//! Cells run concurrently inside a worker pool (size overridable through the
//! `ISVRG_WORKERS` environment variable); each cell owns its generator,
//! ledger, and output file. Summaries are a single-threaded reduction after
//! every cell has finished. Comparisons are always made at identical
//! cumulative optimization-oracle counts — never at identical epoch counts,
//! which cost different amounts of oracle work per optimizer — by linear
//! interpolation of each trace at a shared checkpoint grid whose last point
//! is exactly the budget.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use isvrg::{
    fetches_per_step, run, Branch, BuiltinProblem, EpochGradientMode, EstimatorKind,
    EstimatorSpec, RunConfig, RunError, RunOutcome, StepSchedule, TraceRecord,
};

use crate::config::{Budget, Experiment, OptimizerPlan, PlanKind};
use crate::trace::{summary_csv, summary_json, sweep_csv, trace_csv, trace_file_name, SummaryRow,
    SweepRow};
use crate::CliError;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "ISVRG_WORKERS";

/// Build the worker pool, honoring [`WORKERS_ENV`] when set.
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let workers: usize = raw.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {raw:?}"
            ))
        })?;
        if workers == 0 {
            return Err(CliError::Config(format!("{WORKERS_ENV} must be at least 1")));
        }
        builder = builder.num_threads(workers);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("building worker pool: {e}")))
}

/// Write a text file, mapping failures into the I/O exit bucket.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Budget arithmetic and trace interpolation.
// ---------------------------------------------------------------------------

/// Cheapest possible optimization-oracle cost of one epoch, used to size the
/// epoch count so an oracle budget always binds before the epoch count does.
pub(crate) fn per_epoch_floor(
    estimator: &EstimatorSpec,
    mode: EpochGradientMode,
    m: usize,
    n: usize,
) -> u64 {
    let full = match mode {
        EpochGradientMode::Always => true,
        EpochGradientMode::Never => false,
        EpochGradientMode::Auto => estimator.uses_full_gradient(),
    };
    let fetches = fetches_per_step(estimator.weights(Branch::Decayed))
        .min(fetches_per_step(estimator.weights(Branch::Fixed)));
    let cost = (if full { n as u64 } else { 0 }) + m as u64 * fetches;
    cost.max(1)
}

/// Translate the uniform budget into (epoch count, oracle cap) for one
/// optimizer. An oracle budget gets enough epochs that the cap is what
/// stops the run.
pub fn epochs_for(
    budget: &Budget,
    estimator: &EstimatorSpec,
    mode: EpochGradientMode,
    m: usize,
    n: usize,
) -> (usize, Option<u64>) {
    match budget {
        Budget::Epochs(e) => (*e, None),
        Budget::Ifo(b) => {
            let floor = per_epoch_floor(estimator, mode, m, n);
            ((b / floor) as usize + 2, Some(*b))
        }
    }
}

/// The matched checkpoint grid: `intervals + 1` evenly spaced oracle counts
/// from 0 to the budget inclusive (deduplicated when the budget is tiny).
/// The last checkpoint is exactly the budget.
pub fn checkpoint_grid(budget: u64, intervals: usize) -> Vec<u64> {
    assert!(intervals >= 1, "at least one checkpoint interval");
    let b = budget as u128;
    let k = intervals as u128;
    let mut grid: Vec<u64> = (0..=k).map(|j| ((b * j) / k) as u64).collect();
    grid.dedup();
    grid
}

/// Squared gradient norm at an oracle count, linearly interpolated between
/// the two bracketing epoch records (clamped flat outside the recorded
/// range).
pub fn grad_sq_at(trace: &[TraceRecord], target: u64) -> f64 {
    assert!(!trace.is_empty(), "every run records its starting point");
    if target <= trace[0].cumulative_ifo {
        return trace[0].grad_sq;
    }
    let last = trace.last().expect("non-empty");
    if target >= last.cumulative_ifo {
        return last.grad_sq;
    }
    let hi = trace.partition_point(|r| r.cumulative_ifo < target);
    let (lo, hi) = (&trace[hi - 1], &trace[hi]);
    let span = (hi.cumulative_ifo - lo.cumulative_ifo) as f64;
    let w = (target - lo.cumulative_ifo) as f64 / span;
    lo.grad_sq + (hi.grad_sq - lo.grad_sq) * w
}

/// The squared gradient norm a run ends the budget with: interpolated at an
/// oracle budget, the last record under an epoch budget.
pub fn final_grad_sq(budget: &Budget, trace: &[TraceRecord]) -> f64 {
    match budget {
        Budget::Ifo(b) => grad_sq_at(trace, *b),
        Budget::Epochs(_) => trace.last().expect("non-empty").grad_sq,
    }
}

/// Median of a non-empty slice (mean of the two middle values when even).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

// ---------------------------------------------------------------------------
// Cell execution.
// ---------------------------------------------------------------------------

/// A run that blew up: the epoch it happened in and the records up to it.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub epoch: usize,
    pub trace: Vec<TraceRecord>,
}

/// One finished (optimizer, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub plan_index: usize,
    pub optimizer: String,
    pub seed: u64,
    pub outcome: Result<RunOutcome, Divergence>,
}

/// Run one configuration, keeping divergence as data (it is a result to
/// report, not an abort) and mapping everything else into the
/// configuration bucket.
fn run_classified(
    problem: &BuiltinProblem,
    cfg: &RunConfig,
    label: &str,
) -> Result<Result<RunOutcome, Divergence>, CliError> {
    match run(problem, cfg) {
        Ok(out) => Ok(Ok(out)),
        Err(RunError::Diverged { epoch, trace }) => Ok(Err(Divergence { epoch, trace })),
        Err(other) => Err(CliError::Config(format!("optimizer {label:?}: {other}"))),
    }
}

/// Build the estimator and schedule an entry describes (`scalar` must be
/// resolved for presets).
fn materialize(
    ex: &Experiment,
    plan: &OptimizerPlan,
    scalar: Option<f64>,
) -> Result<(EstimatorSpec, StepSchedule), CliError> {
    match &plan.kind {
        PlanKind::Preset { preset, .. } => {
            let s = scalar.ok_or_else(|| {
                CliError::Config(format!(
                    "optimizer {:?}: preset scalar is unresolved",
                    plan.name
                ))
            })?;
            preset
                .build(s, ex.lipschitz, ex.recipe.n)
                .map_err(|e| CliError::Config(format!("optimizer {:?}: {e}", plan.name)))
        }
        PlanKind::Explicit {
            estimator,
            schedule,
        } => Ok((estimator.clone(), schedule.clone())),
    }
}

fn assemble(
    ex: &Experiment,
    plan: &OptimizerPlan,
    estimator: EstimatorSpec,
    schedule: StepSchedule,
    seed: u64,
) -> RunConfig {
    let (epochs, ifo_budget) = epochs_for(
        &ex.budget,
        &estimator,
        plan.epoch_gradient,
        plan.inner_length,
        ex.recipe.n,
    );
    let mut cfg = RunConfig::new(
        estimator,
        schedule,
        epochs,
        plan.inner_length,
        seed,
        ex.x0.clone(),
    );
    cfg.epsilon = plan.epsilon;
    cfg.ifo_budget = ifo_budget;
    cfg.output_policy = plan.output_policy;
    cfg.epoch_gradient = plan.epoch_gradient;
    cfg
}

/// The full run configuration for one cell (preset scalars already
/// resolved).
pub fn build_run_config(
    ex: &Experiment,
    plan: &OptimizerPlan,
    scalar: Option<f64>,
    seed: u64,
) -> Result<RunConfig, CliError> {
    let (estimator, schedule) = materialize(ex, plan, scalar)?;
    Ok(assemble(ex, plan, estimator, schedule, seed))
}

// ---------------------------------------------------------------------------
// Scalar tuning.
// ---------------------------------------------------------------------------

/// How one optimizer's free scalar was settled.
#[derive(Debug, Clone)]
pub struct ScalarChoice {
    pub optimizer: String,
    /// What the scalar controls (`None` for explicit entries, which have no
    /// free scalar).
    pub parameter: Option<&'static str>,
    pub value: Option<f64>,
    /// True when grid search chose the value (false: pinned or explicit).
    pub tuned: bool,
    /// `(candidate, budget-final squared gradient norm)` per grid value;
    /// infinite score marks a diverged candidate. Empty unless tuned.
    pub scores: Vec<(f64, f64)>,
}

/// Settle one entry's scalar: explicit entries have none, pinned presets
/// keep theirs, and unpinned presets grid-search on the held-out tuning
/// seed, minimizing the budget-final squared gradient norm (first grid
/// value wins ties).
pub fn scalar_choice(
    ex: &Experiment,
    plan: &OptimizerPlan,
    pool: &rayon::ThreadPool,
) -> Result<ScalarChoice, CliError> {
    match &plan.kind {
        PlanKind::Explicit { .. } => Ok(ScalarChoice {
            optimizer: plan.name.clone(),
            parameter: None,
            value: None,
            tuned: false,
            scores: Vec::new(),
        }),
        PlanKind::Preset {
            preset,
            scalar: Some(s),
        } => Ok(ScalarChoice {
            optimizer: plan.name.clone(),
            parameter: Some(preset.scalar_name()),
            value: Some(*s),
            tuned: false,
            scores: Vec::new(),
        }),
        PlanKind::Preset {
            preset,
            scalar: None,
        } => {
            let configs = ex
                .tuning_grid
                .iter()
                .map(|s| build_run_config(ex, plan, Some(*s), ex.tuning_seed))
                .collect::<Result<Vec<_>, CliError>>()?;
            let results = pool.install(|| {
                configs
                    .par_iter()
                    .map(|cfg| run_classified(&ex.problem, cfg, &plan.name))
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            let scores: Vec<(f64, f64)> = ex
                .tuning_grid
                .iter()
                .zip(&results)
                .map(|(cand, res)| {
                    let score = match res {
                        Ok(out) => final_grad_sq(&ex.budget, &out.trace),
                        Err(_) => f64::INFINITY,
                    };
                    (*cand, score)
                })
                .collect();
            let mut best: Option<(f64, f64)> = None;
            for (cand, score) in &scores {
                let better = score.is_finite()
                    && best.map_or(true, |(_, incumbent)| *score < incumbent);
                if better {
                    best = Some((*cand, *score));
                }
            }
            match best {
                Some((cand, _)) => Ok(ScalarChoice {
                    optimizer: plan.name.clone(),
                    parameter: Some(preset.scalar_name()),
                    value: Some(cand),
                    tuned: true,
                    scores,
                }),
                None => Err(CliError::Numeric(format!(
                    "tuning optimizer {:?}: every grid candidate diverged on the held-out seed",
                    plan.name
                ))),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommand engines.
// ---------------------------------------------------------------------------

/// Everything a comparison produced.
pub struct CompareOutcome {
    pub scalars: Vec<ScalarChoice>,
    pub cells: Vec<CellResult>,
    /// The oracle count summaries are matched at (the budget, or under an
    /// epoch budget the smallest completed total).
    pub reference_budget: u64,
    pub checkpoints: Vec<u64>,
    pub rows: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub json_path: Option<PathBuf>,
}

/// Tune, run the full (optimizer × seed) cross product, write one trace per
/// cell plus the matched-checkpoint summary.
pub fn execute_compare(ex: &Experiment) -> Result<CompareOutcome, CliError> {
    std::fs::create_dir_all(&ex.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", ex.out_dir.display())))?;
    let pool = worker_pool()?;
    let scalars = ex
        .plans
        .iter()
        .map(|plan| scalar_choice(ex, plan, &pool))
        .collect::<Result<Vec<_>, CliError>>()?;

    let jobs: Vec<(usize, u64)> = (0..ex.plans.len())
        .flat_map(|pi| ex.seeds.iter().map(move |s| (pi, *s)))
        .collect();
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|(pi, seed)| -> Result<CellResult, CliError> {
                let plan = &ex.plans[*pi];
                let cfg = build_run_config(ex, plan, scalars[*pi].value, *seed)?;
                let outcome = run_classified(&ex.problem, &cfg, &plan.name)?;
                let trace = match &outcome {
                    Ok(out) => &out.trace,
                    Err(d) => &d.trace,
                };
                let path = ex.out_dir.join(trace_file_name(&plan.name, *seed));
                write_text(&path, &trace_csv(trace))?;
                Ok(CellResult {
                    plan_index: *pi,
                    optimizer: plan.name.clone(),
                    seed: *seed,
                    outcome,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let fully_diverged: Vec<String> = ex
        .plans
        .iter()
        .enumerate()
        .filter(|(pi, _)| {
            cells
                .iter()
                .filter(|c| c.plan_index == *pi)
                .all(|c| c.outcome.is_err())
        })
        .map(|(_, plan)| plan.name.clone())
        .collect();
    if !fully_diverged.is_empty() {
        return Err(CliError::Numeric(format!(
            "every seed diverged for optimizer(s): {}",
            fully_diverged.join(", ")
        )));
    }

    let reference_budget = match ex.budget {
        Budget::Ifo(b) => b,
        Budget::Epochs(_) => cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok())
            .map(|o| o.trace.last().expect("non-empty trace").cumulative_ifo)
            .min()
            .expect("at least one cell succeeded"),
    };
    let checkpoints = checkpoint_grid(reference_budget, ex.checkpoint_count);

    let mut rows = Vec::with_capacity(checkpoints.len() * ex.plans.len());
    for &q in &checkpoints {
        for (pi, plan) in ex.plans.iter().enumerate() {
            let values: Vec<f64> = cells
                .iter()
                .filter(|c| c.plan_index == pi)
                .filter_map(|c| c.outcome.as_ref().ok())
                .map(|o| grad_sq_at(&o.trace, q))
                .collect();
            rows.push(SummaryRow {
                checkpoint_ifo: q,
                optimizer: plan.name.clone(),
                median_grad_sq: median(&values),
                min_grad_sq: values.iter().copied().fold(f64::INFINITY, f64::min),
                max_grad_sq: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: values.len(),
            });
        }
    }

    let summary_path = ex.out_dir.join("summary.csv");
    write_text(&summary_path, &summary_csv(&rows))?;
    let json_path = if ex.json_summary {
        let path = ex.out_dir.join("summary.json");
        write_text(&path, &summary_json(&rows))?;
        Some(path)
    } else {
        None
    };

    Ok(CompareOutcome {
        scalars,
        cells,
        reference_budget,
        checkpoints,
        rows,
        summary_path,
        json_path,
    })
}

/// Everything a single-cell run produced.
pub struct SingleOutcome {
    pub scalar: ScalarChoice,
    pub trace_path: PathBuf,
    pub outcome: RunOutcome,
    pub final_grad_sq: f64,
}

/// Run one (optimizer, seed) cell and write its trace. Divergence writes
/// the partial trace and lands in the numeric-failure bucket.
pub fn execute_single(
    ex: &Experiment,
    plan_index: usize,
    seed: u64,
) -> Result<SingleOutcome, CliError> {
    std::fs::create_dir_all(&ex.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", ex.out_dir.display())))?;
    let pool = worker_pool()?;
    let plan = &ex.plans[plan_index];
    let scalar = scalar_choice(ex, plan, &pool)?;
    let cfg = build_run_config(ex, plan, scalar.value, seed)?;
    let path = ex.out_dir.join(trace_file_name(&plan.name, seed));
    match run_classified(&ex.problem, &cfg, &plan.name)? {
        Ok(outcome) => {
            write_text(&path, &trace_csv(&outcome.trace))?;
            let final_grad_sq = final_grad_sq(&ex.budget, &outcome.trace);
            Ok(SingleOutcome {
                scalar,
                trace_path: path,
                outcome,
                final_grad_sq,
            })
        }
        Err(d) => {
            write_text(&path, &trace_csv(&d.trace))?;
            Err(CliError::Numeric(format!(
                "optimizer {:?} seed {seed} diverged at epoch {}; partial trace written to {}",
                plan.name,
                d.epoch,
                path.display()
            )))
        }
    }
}

/// Which single-λ family a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFamily {
    Unbiased,
    Biased,
}

/// Everything a λ sweep produced.
pub struct SweepOutcome {
    pub scalar: ScalarChoice,
    pub family: SweepFamily,
    pub rows: Vec<SweepRow>,
    pub table_path: PathBuf,
    pub total_cells: usize,
    pub diverged_cells: usize,
}

/// Repeat one optimizer entry across a λ grid (all seeds per λ) and write
/// the λ → budget-final squared-gradient-norm table.
///
/// The entry must use a single-λ estimator: the `msvrg` preset or an
/// explicit weighted-unbiased/biased configuration. A preset's scalar is
/// settled once, at its base λ, then held fixed so the sweep isolates λ.
pub fn execute_sweep(
    ex: &Experiment,
    plan_index: usize,
    lambdas: &[f64],
) -> Result<SweepOutcome, CliError> {
    if lambdas.is_empty() {
        return Err(CliError::Config("sweep-lambda: empty λ grid".into()));
    }
    for l in lambdas {
        if !(l.is_finite() && (0.0..=1.0).contains(l)) {
            return Err(CliError::Config(format!(
                "sweep-lambda: λ must lie in [0, 1], got {l}"
            )));
        }
    }
    std::fs::create_dir_all(&ex.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", ex.out_dir.display())))?;
    let pool = worker_pool()?;
    let plan = &ex.plans[plan_index];
    let scalar = scalar_choice(ex, plan, &pool)?;
    let (base_estimator, schedule) = materialize(ex, plan, scalar.value)?;
    let family = match base_estimator.kind() {
        EstimatorKind::WeightedUnbiased { .. } => SweepFamily::Unbiased,
        EstimatorKind::Biased { .. } => SweepFamily::Biased,
        other => {
            return Err(CliError::Config(format!(
                "sweep-lambda: optimizer {:?} must use a weighted-unbiased or biased \
                 estimator, got {other:?}",
                plan.name
            )))
        }
    };

    let jobs: Vec<(usize, u64)> = (0..lambdas.len())
        .flat_map(|li| ex.seeds.iter().map(move |s| (li, *s)))
        .collect();
    let outcomes = pool.install(|| {
        jobs.par_iter()
            .map(
                |(li, seed)| -> Result<(usize, Result<RunOutcome, Divergence>), CliError> {
                    let lambda = lambdas[*li];
                    let estimator = match family {
                        SweepFamily::Unbiased => EstimatorSpec::weighted_unbiased(lambda),
                        SweepFamily::Biased => EstimatorSpec::biased(lambda),
                    }
                    .map_err(|e| CliError::Config(format!("sweep-lambda: {e}")))?;
                    let cfg = assemble(ex, plan, estimator, schedule.clone(), *seed);
                    let outcome = run_classified(&ex.problem, &cfg, &plan.name)?;
                    Ok((*li, outcome))
                },
            )
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let total_cells = outcomes.len();
    let diverged_cells = outcomes.iter().filter(|(_, o)| o.is_err()).count();
    if diverged_cells == total_cells {
        return Err(CliError::Numeric(
            "sweep-lambda: every (λ, seed) cell diverged".into(),
        ));
    }

    let mut rows = Vec::with_capacity(lambdas.len());
    for (li, lambda) in lambdas.iter().enumerate() {
        let finals: Vec<f64> = outcomes
            .iter()
            .filter(|(i, _)| *i == li)
            .filter_map(|(_, o)| o.as_ref().ok())
            .map(|out| final_grad_sq(&ex.budget, &out.trace))
            .collect();
        let row = if finals.is_empty() {
            SweepRow {
                lambda: *lambda,
                median_final_grad_sq: f64::NAN,
                min_final_grad_sq: f64::NAN,
                max_final_grad_sq: f64::NAN,
                seeds: 0,
            }
        } else {
            SweepRow {
                lambda: *lambda,
                median_final_grad_sq: median(&finals),
                min_final_grad_sq: finals.iter().copied().fold(f64::INFINITY, f64::min),
                max_final_grad_sq: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seeds: finals.len(),
            }
        };
        rows.push(row);
    }

    let table_path = ex.out_dir.join(format!("sweep_{}.csv", plan.name));
    write_text(&table_path, &sweep_csv(&rows))?;

    Ok(SweepOutcome {
        scalar,
        family,
        rows,
        table_path,
        total_cells,
        diverged_cells,
    })
}
