//! Strict experiment-file schema (JSON) and its translation into library
//! configuration.
//!
//! The document has top-level keys `problem`, `optimizers`, `seeds`,
//! `budget`, `output`, and optionally `tuning`. Unknown keys anywhere in the
//! document are errors: a typo silently changing an experiment is worse than
//! a parse failure, so every section rejects fields it does not know.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use isvrg::{
    estimate_lipschitz, make_problem, BuiltinProblem, EpochGradientMode, EstimatorSpec,
    FiniteSumProblem, OutputPolicy, ParamVector, ProblemFamily, ProblemRecipe, StepSchedule,
};

use crate::presets::{Preset, PRESET_NAMES};
use crate::CliError;

/// Grid searched for each preset's free scalar when the entry does not pin
/// one.
pub const DEFAULT_TUNING_GRID: [f64; 3] = [0.01, 0.1, 1.0];

/// Number of matched-budget checkpoint intervals in comparison summaries.
pub const DEFAULT_CHECKPOINTS: usize = 20;

/// Exponent pair shared by every built-in schedule: the fixed step reads
/// `1/(3·L·n^{A_EXPONENT·ALPHA_EXPONENT})`.
pub const A_EXPONENT: f64 = 1.0;
/// See [`A_EXPONENT`].
pub const ALPHA_EXPONENT: f64 = 0.2;

/// Offset deriving the default starting-point seed from the problem seed,
/// so data generation and the starting draw are decoupled but both
/// reproducible from one declared seed.
const X0_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;
/// Offset deriving the curvature-estimation seed from the problem seed.
const LIPSCHITZ_SEED_OFFSET: u64 = 0x517C_C1B7_2722_0A95;
/// Secant pairs drawn when the problem does not know its own curvature.
const LIPSCHITZ_PAIRS: usize = 1000;
/// Sampling radius for those secant pairs.
const LIPSCHITZ_RADIUS: f64 = 1.0;

// ---------------------------------------------------------------------------
// Raw document schema.
// ---------------------------------------------------------------------------

/// A parsed-but-unresolved experiment document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub problem: ProblemSection,
    pub optimizers: Vec<OptimizerSection>,
    pub seeds: Vec<u64>,
    pub budget: BudgetSection,
    pub output: OutputSection,
    #[serde(default)]
    pub tuning: Option<TuningSection>,
}

/// The `problem` section: a recipe plus the shared starting point.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Family name (`quadratic-sum`, `sigmoid-regression`,
    /// `nonconvex-regularized-logistic`, `tiny-mlp`; each also accepts a
    /// short alias).
    pub family: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub data_scale: Option<f64>,
    pub lipschitz_target: Option<f64>,
    pub reg_weight: Option<f64>,
    pub hidden_width: Option<usize>,
    /// Scale of the shared starting draw (default 1).
    pub x0_scale: Option<f64>,
    /// Seed of the shared starting draw (default derived from `seed`).
    pub x0_seed: Option<u64>,
}

/// One optimizer entry: either a named preset (with an optional pinned
/// scalar) or an explicit estimator + schedule pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// Label used in file names and summaries.
    pub name: String,
    /// One of `sgd`, `svrg`, `msvrg`, `isvrg+`.
    pub preset: Option<String>,
    pub estimator: Option<EstimatorSection>,
    pub schedule: Option<ScheduleSection>,
    /// Pins the preset's free scalar; omitting it requests tuning.
    pub scalar: Option<f64>,
    /// Inner steps per epoch (default: one pass, m = n).
    pub inner_length: Option<usize>,
    /// Early-stop target for the measured squared gradient norm.
    pub epsilon: Option<f64>,
    pub output_policy: Option<OutputPolicy>,
    pub epoch_gradient: Option<EpochGradientMode>,
}

/// Estimator description mirroring the library constructors.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSection {
    PlainSgd,
    ScaledSvrg,
    WeightedUnbiased {
        lambda: f64,
    },
    Biased {
        lambda: f64,
    },
    HybridSwitch {
        lambda_biased: Option<f64>,
        lambda_unbiased: Option<f64>,
    },
}

/// Schedule description. `n` always comes from the problem; the smoothness
/// constant defaults to the experiment's estimate when omitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSection {
    Decayed {
        c: f64,
    },
    Fixed {
        lipschitz: Option<f64>,
        a: Option<f64>,
        alpha: Option<f64>,
    },
    HybridMax {
        c: f64,
        lipschitz: Option<f64>,
        a: Option<f64>,
        alpha: Option<f64>,
    },
    Practical {
        eta0: f64,
        lipschitz: Option<f64>,
    },
    PracticalDecay {
        eta0: f64,
    },
}

/// Exactly one of the three caps must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    /// Cap on cumulative optimization-channel oracle calls.
    pub ifo: Option<u64>,
    /// Same cap expressed in effective data passes (`passes·n` calls).
    pub passes: Option<u64>,
    /// Cap on epochs instead of oracle calls.
    pub epochs: Option<usize>,
}

/// Output location and formats.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Subset of {"csv", "json"}; must contain "csv" (traces and summaries
    /// are CSV); "json" additionally writes `summary.json`.
    pub formats: Option<Vec<String>>,
    /// Checkpoint intervals in the summary grid (default 20).
    pub checkpoints: Option<usize>,
}

/// Scalar-tuning settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    /// Candidate scalars (default {0.01, 0.1, 1.0}).
    pub grid: Option<Vec<f64>>,
    /// Held-out seed (default: largest comparison seed + 1).
    pub seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Resolved experiment.
// ---------------------------------------------------------------------------

/// Uniform stopping rule for every cell of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Stop at the first epoch record at or past this many
    /// optimization-channel oracle calls.
    Ifo(u64),
    /// Run exactly this many epochs.
    Epochs(usize),
}

/// How an optimizer entry builds its estimator and schedule.
#[derive(Debug, Clone)]
pub enum PlanKind {
    /// A named preset; `scalar` is `None` when tuning should choose it.
    Preset { preset: Preset, scalar: Option<f64> },
    /// Fully explicit configuration; never tuned.
    Explicit {
        estimator: EstimatorSpec,
        schedule: StepSchedule,
    },
}

/// One resolved optimizer entry.
#[derive(Debug, Clone)]
pub struct OptimizerPlan {
    pub name: String,
    pub kind: PlanKind,
    pub inner_length: usize,
    pub epsilon: f64,
    pub output_policy: OutputPolicy,
    pub epoch_gradient: EpochGradientMode,
}

/// A fully resolved experiment: problem built, curvature known, starting
/// point drawn, every entry validated.
pub struct Experiment {
    pub recipe: ProblemRecipe,
    pub problem: BuiltinProblem,
    /// Exact smoothness constant when the problem knows one, else a secant
    /// estimate from 1000 random pairs at radius 1.
    pub lipschitz: f64,
    /// Starting point shared by every cell (fair comparison).
    pub x0: ParamVector,
    pub plans: Vec<OptimizerPlan>,
    pub seeds: Vec<u64>,
    pub budget: Budget,
    pub out_dir: PathBuf,
    /// Also write `summary.json` next to `summary.csv`.
    pub json_summary: bool,
    pub checkpoint_count: usize,
    pub tuning_grid: Vec<f64>,
    pub tuning_seed: u64,
}

/// Map a family name or its short alias onto the library enum.
pub fn parse_family(name: &str) -> Option<ProblemFamily> {
    match name {
        "quadratic" | "quadratic-sum" => Some(ProblemFamily::QuadraticSum),
        "sigmoid" | "sigmoid-regression" => Some(ProblemFamily::SigmoidRegression),
        "logistic" | "nonconvex-regularized-logistic" => {
            Some(ProblemFamily::NonconvexRegularizedLogistic)
        }
        "mlp" | "tiny-mlp" => Some(ProblemFamily::TinyMlp),
        _ => None,
    }
}

fn config_err<T>(message: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(message.into()))
}

impl ExperimentFile {
    /// Read and parse an experiment document. Missing or unreadable files
    /// are I/O errors; malformed or unknown-key documents are configuration
    /// errors.
    pub fn load(path: &Path) -> Result<ExperimentFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))
    }

    /// Validate every section and build the problem, starting point, and
    /// per-optimizer plans.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let recipe = self.problem.to_recipe()?;
        let problem =
            make_problem(&recipe).map_err(|e| CliError::Config(format!("problem: {e}")))?;
        let lipschitz = match problem.lipschitz_constant() {
            Some(l) => l,
            None => estimate_lipschitz(
                &problem,
                LIPSCHITZ_PAIRS,
                LIPSCHITZ_RADIUS,
                recipe.seed ^ LIPSCHITZ_SEED_OFFSET,
            ),
        };
        let x0_scale = self.problem.x0_scale.unwrap_or(1.0);
        if !(x0_scale.is_finite() && x0_scale >= 0.0) {
            return config_err(format!("problem.x0_scale must be >= 0, got {x0_scale}"));
        }
        let x0_seed = self.problem.x0_seed.unwrap_or(recipe.seed ^ X0_SEED_OFFSET);
        let x0 = ParamVector::seeded_normal(problem.dim(), x0_scale, x0_seed);

        if self.seeds.is_empty() {
            return config_err("seeds: at least one seed is required");
        }
        let budget = self.budget.resolve(recipe.n)?;

        if self.optimizers.is_empty() {
            return config_err("optimizers: at least one entry is required");
        }
        let mut names = BTreeSet::new();
        let mut plans = Vec::with_capacity(self.optimizers.len());
        for entry in &self.optimizers {
            let plan = entry.resolve(recipe.n, lipschitz)?;
            if !names.insert(plan.name.clone()) {
                return config_err(format!("optimizers: duplicate name {:?}", plan.name));
            }
            plans.push(plan);
        }

        let (out_dir, json_summary, checkpoint_count) = self.output.resolve()?;
        let (tuning_grid, tuning_seed) = self.resolve_tuning()?;

        Ok(Experiment {
            recipe,
            problem,
            lipschitz,
            x0,
            plans,
            seeds: self.seeds.clone(),
            budget,
            out_dir,
            json_summary,
            checkpoint_count,
            tuning_grid,
            tuning_seed,
        })
    }

    fn resolve_tuning(&self) -> Result<(Vec<f64>, u64), CliError> {
        let grid = self
            .tuning
            .as_ref()
            .and_then(|t| t.grid.clone())
            .unwrap_or_else(|| DEFAULT_TUNING_GRID.to_vec());
        if grid.is_empty() {
            return config_err("tuning.grid: at least one candidate is required");
        }
        if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return config_err(format!("tuning.grid: candidates must be positive, got {bad}"));
        }
        let default_seed = self.seeds.iter().copied().max().unwrap_or(0).wrapping_add(1);
        let seed = self
            .tuning
            .as_ref()
            .and_then(|t| t.seed)
            .unwrap_or(default_seed);
        if self.seeds.contains(&seed) {
            return config_err(format!(
                "tuning.seed {seed} also appears in seeds; the tuning seed must be held out"
            ));
        }
        Ok((grid, seed))
    }
}

impl ProblemSection {
    fn to_recipe(&self) -> Result<ProblemRecipe, CliError> {
        let family = match parse_family(&self.family) {
            Some(f) => f,
            None => {
                return config_err(format!(
                    "problem.family: unknown family {:?} (expected quadratic-sum, \
                     sigmoid-regression, nonconvex-regularized-logistic, or tiny-mlp)",
                    self.family
                ))
            }
        };
        let mut recipe = ProblemRecipe::new(family, self.n, self.d, self.seed);
        if let Some(v) = self.data_scale {
            recipe.data_scale = v;
        }
        if let Some(v) = self.lipschitz_target {
            recipe.lipschitz_target = v;
        }
        if let Some(v) = self.reg_weight {
            recipe.reg_weight = v;
        }
        if let Some(v) = self.hidden_width {
            recipe.hidden_width = v;
        }
        Ok(recipe)
    }
}

impl OptimizerSection {
    fn resolve(&self, n: usize, lipschitz: f64) -> Result<OptimizerPlan, CliError> {
        if self.name.is_empty() {
            return config_err("optimizers: name must be non-empty");
        }
        let name_ok = self
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+' | '.'));
        if !name_ok {
            return config_err(format!(
                "optimizers: name {:?} may only use letters, digits, '_', '-', '+', '.'",
                self.name
            ));
        }
        let kind = match (&self.preset, &self.estimator, &self.schedule) {
            (Some(preset), None, None) => {
                if let Some(s) = self.scalar {
                    if !(s.is_finite() && s > 0.0) {
                        return config_err(format!(
                            "optimizer {:?}: scalar must be positive, got {s}",
                            self.name
                        ));
                    }
                }
                match Preset::parse(preset) {
                    Some(p) => PlanKind::Preset {
                        preset: p,
                        scalar: self.scalar,
                    },
                    None => {
                        return config_err(format!(
                            "optimizer {:?}: unknown preset {preset:?} (expected {PRESET_NAMES})",
                            self.name
                        ))
                    }
                }
            }
            (None, Some(estimator), Some(schedule)) => {
                if self.scalar.is_some() {
                    return config_err(format!(
                        "optimizer {:?}: scalar only applies to presets",
                        self.name
                    ));
                }
                PlanKind::Explicit {
                    estimator: estimator.build().map_err(|e| {
                        CliError::Config(format!("optimizer {:?}: {e}", self.name))
                    })?,
                    schedule: schedule.build(n, lipschitz).map_err(|e| {
                        CliError::Config(format!("optimizer {:?}: {e}", self.name))
                    })?,
                }
            }
            _ => {
                return config_err(format!(
                    "optimizer {:?}: give either preset, or estimator and schedule",
                    self.name
                ))
            }
        };
        let inner_length = self.inner_length.unwrap_or(n);
        if inner_length == 0 {
            return config_err(format!(
                "optimizer {:?}: inner_length must be at least 1",
                self.name
            ));
        }
        let epsilon = self.epsilon.unwrap_or(0.0);
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return config_err(format!(
                "optimizer {:?}: epsilon must be finite and >= 0, got {epsilon}",
                self.name
            ));
        }
        Ok(OptimizerPlan {
            name: self.name.clone(),
            kind,
            inner_length,
            epsilon,
            output_policy: self.output_policy.unwrap_or(OutputPolicy::LastSnapshot),
            epoch_gradient: self.epoch_gradient.unwrap_or(EpochGradientMode::Auto),
        })
    }
}

impl EstimatorSection {
    fn build(&self) -> Result<EstimatorSpec, CliError> {
        let spec = match self {
            EstimatorSection::PlainSgd => Ok(EstimatorSpec::plain_sgd()),
            EstimatorSection::ScaledSvrg => Ok(EstimatorSpec::scaled_svrg()),
            EstimatorSection::WeightedUnbiased { lambda } => {
                EstimatorSpec::weighted_unbiased(*lambda)
            }
            EstimatorSection::Biased { lambda } => EstimatorSpec::biased(*lambda),
            EstimatorSection::HybridSwitch {
                lambda_biased,
                lambda_unbiased,
            } => match (lambda_biased, lambda_unbiased) {
                (None, None) => Ok(EstimatorSpec::hybrid_default()),
                (lb, lu) => {
                    let defaults = EstimatorSpec::hybrid_default();
                    let (db, du) = match defaults.kind() {
                        isvrg::EstimatorKind::HybridSwitch {
                            lambda_biased,
                            lambda_unbiased,
                        } => (lambda_biased, lambda_unbiased),
                        _ => unreachable!("hybrid_default builds a hybrid kind"),
                    };
                    EstimatorSpec::hybrid(lb.unwrap_or(db), lu.unwrap_or(du))
                }
            },
        };
        spec.map_err(|e| CliError::Config(format!("estimator: {e}")))
    }
}

impl ScheduleSection {
    fn build(&self, n: usize, default_lipschitz: f64) -> Result<StepSchedule, CliError> {
        let built = match self {
            ScheduleSection::Decayed { c } => StepSchedule::decayed(*c),
            ScheduleSection::Fixed { lipschitz, a, alpha } => StepSchedule::fixed(
                lipschitz.unwrap_or(default_lipschitz),
                n,
                a.unwrap_or(A_EXPONENT),
                alpha.unwrap_or(ALPHA_EXPONENT),
            ),
            ScheduleSection::HybridMax {
                c,
                lipschitz,
                a,
                alpha,
            } => StepSchedule::hybrid_max(
                *c,
                lipschitz.unwrap_or(default_lipschitz),
                n,
                a.unwrap_or(A_EXPONENT),
                alpha.unwrap_or(ALPHA_EXPONENT),
            ),
            ScheduleSection::Practical { eta0, lipschitz } => {
                StepSchedule::practical(*eta0, lipschitz.unwrap_or(default_lipschitz), n)
            }
            ScheduleSection::PracticalDecay { eta0 } => StepSchedule::practical_decay(*eta0),
        };
        built.map_err(|e| CliError::Config(format!("schedule: {e}")))
    }
}

impl BudgetSection {
    fn resolve(&self, n: usize) -> Result<Budget, CliError> {
        match (self.ifo, self.passes, self.epochs) {
            (Some(b), None, None) => {
                if b == 0 {
                    config_err("budget.ifo must be positive")
                } else {
                    Ok(Budget::Ifo(b))
                }
            }
            (None, Some(p), None) => {
                if p == 0 {
                    config_err("budget.passes must be positive")
                } else {
                    Ok(Budget::Ifo(p * n as u64))
                }
            }
            (None, None, Some(e)) => {
                if e == 0 {
                    config_err("budget.epochs must be positive")
                } else {
                    Ok(Budget::Epochs(e))
                }
            }
            _ => config_err("budget: give exactly one of ifo, passes, epochs"),
        }
    }
}

impl OutputSection {
    fn resolve(&self) -> Result<(PathBuf, bool, usize), CliError> {
        let formats = self
            .formats
            .clone()
            .unwrap_or_else(|| vec!["csv".to_string()]);
        let mut json = false;
        let mut csv = false;
        for f in &formats {
            match f.as_str() {
                "csv" => csv = true,
                "json" => json = true,
                other => {
                    return config_err(format!(
                        "output.formats: unknown format {other:?} (expected csv or json)"
                    ))
                }
            }
        }
        if !csv {
            return config_err("output.formats must include \"csv\" (traces are CSV)");
        }
        let checkpoints = self.checkpoints.unwrap_or(DEFAULT_CHECKPOINTS);
        if checkpoints == 0 {
            return config_err("output.checkpoints must be at least 1");
        }
        Ok((self.dir.clone(), json, checkpoints))
    }
}
