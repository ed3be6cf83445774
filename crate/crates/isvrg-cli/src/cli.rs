//! Command-line surface: argument definitions and the mapping from parsed
//! invocations onto the runner, with exit codes 0 (success), 1
//! (configuration error), 2 (numeric failure), 3 (I/O error).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use isvrg::{
    finite_diff_check, make_problem, FiniteSumProblem, ParamVector, ProblemFamily, ProblemRecipe,
    TheoryInputs, TheoryReport,
};

use crate::config::{parse_family, Experiment, ExperimentFile};
use crate::runner::{execute_compare, execute_single, execute_sweep, ScalarChoice};
use crate::CliError;

/// The `isvrg` binary.
#[derive(Debug, Parser)]
#[command(
    name = "isvrg",
    version,
    about = "Finite-sum optimizer benchmark harness and bound calculator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Execute one (optimizer, seed) cell of an experiment and write its
    /// trace file.
    Run(RunArgs),
    /// Tune free scalars, run every (optimizer, seed) cell, and write one
    /// trace per cell plus a matched-budget comparison summary.
    Compare(CompareArgs),
    /// Repeat one optimizer across a λ grid and write a λ table of
    /// budget-final squared gradient norms.
    SweepLambda(SweepArgs),
    /// Evaluate step constants, potential recursions, admissible λ
    /// intervals, and bounds for given problem parameters.
    Theory(TheoryArgs),
    /// Check analytic component gradients against central finite
    /// differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file (strict JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Optimizer entry to run (default: the first entry).
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Seed to run (default: the first declared seed).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment file (strict JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment file (strict JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Optimizer entry to sweep (default: the first entry). Must use a
    /// weighted-unbiased or biased estimator (the `msvrg` preset
    /// qualifies).
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Comma-separated λ grid (default 0, 0.1, …, 0.9 plus 2/3).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Component count n.
    #[arg(long)]
    pub n: usize,
    /// Smoothness constant L.
    #[arg(long = "L")]
    pub lipschitz: f64,
    /// Component gradient-norm scale σ.
    #[arg(long)]
    pub sigma: f64,
    /// Objective gap f(x⁰) − f* at the start.
    #[arg(long)]
    pub gap: f64,
    /// Total inner steps T.
    #[arg(long = "T")]
    pub total_steps: u64,
    /// Estimator weight λ (must lie in [0, 1)).
    #[arg(long)]
    pub lambda: f64,
    /// Step exponent a in n^{a·α} (default 1).
    #[arg(long)]
    pub a: Option<f64>,
    /// Companion exponent b in n^{b·α} (default 2).
    #[arg(long)]
    pub b: Option<f64>,
    /// Exponent α (default 0.2).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Recursion growth-rate override (default L/n^{b·α}).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Margin constant of the plain control-variate fixed-step bound
    /// (default 1).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Margin constant of the biased fixed-step bound (default 1).
    #[arg(long)]
    pub nu1: Option<f64>,
    /// Margin constant of the switching fixed branch (default 1).
    #[arg(long)]
    pub nu2: Option<f64>,
    /// Leading constant of the switching bound (default 1).
    #[arg(long)]
    pub nu_tilde: Option<f64>,
    /// Target accuracy for the oracle-complexity section.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Problem family: quadratic-sum, sigmoid-regression,
    /// nonconvex-regularized-logistic, or tiny-mlp (short aliases
    /// quadratic, sigmoid, logistic, mlp).
    #[arg(long)]
    pub family: String,
    /// Component count n.
    #[arg(long)]
    pub n: usize,
    /// Data dimension d.
    #[arg(long)]
    pub d: usize,
    /// Data-generation seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of random evaluation points.
    #[arg(long, default_value_t = 5)]
    pub points: usize,
    /// Central-difference half-width.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Pass threshold (default 1e-9 for the quadratic family, else 1e-5).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Scale of generated features and inputs.
    #[arg(long)]
    pub data_scale: Option<f64>,
    /// Curvature ceiling (quadratic family).
    #[arg(long)]
    pub lipschitz_target: Option<f64>,
    /// Regularizer weight (logistic family).
    #[arg(long)]
    pub reg_weight: Option<f64>,
    /// Hidden-layer width (network family).
    #[arg(long)]
    pub hidden_width: Option<usize>,
}

/// Parse arguments, dispatch, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Cmd::Run(a) => do_run(a),
        Cmd::Compare(a) => do_compare(a),
        Cmd::SweepLambda(a) => do_sweep(a),
        Cmd::Theory(a) => do_theory(a),
        Cmd::Gradcheck(a) => do_gradcheck(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_experiment(config: &PathBuf) -> Result<Experiment, CliError> {
    ExperimentFile::load(config)?.resolve()
}

fn select_plan(ex: &Experiment, name: Option<&str>) -> Result<usize, CliError> {
    match name {
        None => Ok(0),
        Some(wanted) => ex
            .plans
            .iter()
            .position(|p| p.name == wanted)
            .ok_or_else(|| {
                let names: Vec<&str> = ex.plans.iter().map(|p| p.name.as_str()).collect();
                CliError::Config(format!(
                    "no optimizer named {wanted:?} (have: {})",
                    names.join(", ")
                ))
            }),
    }
}

fn print_scalar_choice(choice: &ScalarChoice) {
    if let (Some(parameter), Some(value)) = (choice.parameter, choice.value) {
        let how = if choice.tuned { "tuned" } else { "pinned" };
        println!("{}: {parameter} = {value} ({how})", choice.optimizer);
        for (candidate, score) in &choice.scores {
            if score.is_finite() {
                println!("  candidate {candidate}: final grad_sq {score:.6e}");
            } else {
                println!("  candidate {candidate}: diverged");
            }
        }
    }
}

fn do_run(args: &RunArgs) -> Result<(), CliError> {
    let ex = load_experiment(&args.config)?;
    let plan_index = select_plan(&ex, args.optimizer.as_deref())?;
    let seed = args.seed.unwrap_or(ex.seeds[0]);
    let single = execute_single(&ex, plan_index, seed)?;
    print_scalar_choice(&single.scalar);
    let last = single.outcome.trace.last().expect("non-empty trace");
    println!("wrote {}", single.trace_path.display());
    println!(
        "epochs {}, cumulative optimization oracle calls {}, budget-final grad_sq {:.6e}",
        single.outcome.epochs_completed, last.cumulative_ifo, single.final_grad_sq
    );
    Ok(())
}

fn do_compare(args: &CompareArgs) -> Result<(), CliError> {
    let ex = load_experiment(&args.config)?;
    let outcome = execute_compare(&ex)?;
    for choice in &outcome.scalars {
        print_scalar_choice(choice);
    }
    for cell in &outcome.cells {
        if let Err(d) = &cell.outcome {
            eprintln!(
                "warning: optimizer {:?} seed {} diverged at epoch {} (excluded from the summary)",
                cell.optimizer, cell.seed, d.epoch
            );
        }
    }
    let final_q = *outcome
        .checkpoints
        .last()
        .expect("checkpoint grid is non-empty");
    println!(
        "matched budget: {} optimization oracle calls, {} checkpoints",
        outcome.reference_budget,
        outcome.checkpoints.len()
    );
    println!("grad_sq at the final checkpoint (cum_ifo = {final_q}):");
    println!(
        "{:<16} {:>13} {:>13} {:>13} {:>6}",
        "optimizer", "median", "min", "max", "seeds"
    );
    for row in outcome.rows.iter().filter(|r| r.checkpoint_ifo == final_q) {
        println!(
            "{:<16} {:>13.6e} {:>13.6e} {:>13.6e} {:>6}",
            row.optimizer, row.median_grad_sq, row.min_grad_sq, row.max_grad_sq, row.seeds
        );
    }
    println!("wrote {}", outcome.summary_path.display());
    if let Some(path) = &outcome.json_path {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// The default sweep grid: every tenth plus the biased-side optimum 2/3.
fn default_lambda_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=9).map(|k| k as f64 / 10.0).collect();
    grid.push(2.0 / 3.0);
    grid.sort_by(f64::total_cmp);
    grid
}

fn do_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let ex = load_experiment(&args.config)?;
    let plan_index = select_plan(&ex, args.optimizer.as_deref())?;
    let lambdas = args.lambdas.clone().unwrap_or_else(default_lambda_grid);
    let outcome = execute_sweep(&ex, plan_index, &lambdas)?;
    print_scalar_choice(&outcome.scalar);
    println!(
        "{:<10} {:>13} {:>13} {:>13} {:>6}",
        "lambda", "median", "min", "max", "seeds"
    );
    for row in &outcome.rows {
        if row.seeds == 0 {
            println!("{:<10.4} {:>47}", row.lambda, "all seeds diverged");
        } else {
            println!(
                "{:<10.4} {:>13.6e} {:>13.6e} {:>13.6e} {:>6}",
                row.lambda,
                row.median_final_grad_sq,
                row.min_final_grad_sq,
                row.max_final_grad_sq,
                row.seeds
            );
        }
    }
    if outcome.diverged_cells > 0 {
        eprintln!(
            "warning: {} of {} (λ, seed) cells diverged",
            outcome.diverged_cells, outcome.total_cells
        );
    }
    println!("wrote {}", outcome.table_path.display());
    Ok(())
}

fn do_theory(args: &TheoryArgs) -> Result<(), CliError> {
    let mut inputs = TheoryInputs::new(
        args.n,
        args.lipschitz,
        args.sigma,
        args.gap,
        args.total_steps,
        args.lambda,
    );
    if let Some(a) = args.a {
        inputs.a = a;
    }
    if let Some(b) = args.b {
        inputs.b = b;
    }
    if let Some(alpha) = args.alpha {
        inputs.alpha = alpha;
    }
    inputs.beta = args.beta;
    if let Some(nu) = args.nu {
        inputs.nu.nu = nu;
    }
    if let Some(nu1) = args.nu1 {
        inputs.nu.nu1 = nu1;
    }
    if let Some(nu2) = args.nu2 {
        inputs.nu.nu2 = nu2;
    }
    if let Some(nu_tilde) = args.nu_tilde {
        inputs.nu.nu_tilde = nu_tilde;
    }
    let report = TheoryReport::evaluate(&inputs, args.epsilon)
        .map_err(|e| CliError::Config(format!("theory: {e}")))?;
    if args.json {
        let mut text =
            serde_json::to_string_pretty(&report).expect("the report always serializes");
        text.push('\n');
        print!("{text}");
    } else {
        let text = report.render_text();
        print!("{text}");
        if !text.ends_with('\n') {
            println!();
        }
    }
    Ok(())
}

fn do_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let family = parse_family(&args.family).ok_or_else(|| {
        CliError::Config(format!(
            "unknown family {:?} (expected quadratic-sum, sigmoid-regression, \
             nonconvex-regularized-logistic, or tiny-mlp)",
            args.family
        ))
    })?;
    if args.points == 0 {
        return Err(CliError::Config("points must be at least 1".into()));
    }
    if !(args.h.is_finite() && args.h > 0.0) {
        return Err(CliError::Config(format!(
            "h must be positive and finite, got {}",
            args.h
        )));
    }
    let mut recipe = ProblemRecipe::new(family, args.n, args.d, args.seed);
    if let Some(v) = args.data_scale {
        recipe.data_scale = v;
    }
    if let Some(v) = args.lipschitz_target {
        recipe.lipschitz_target = v;
    }
    if let Some(v) = args.reg_weight {
        recipe.reg_weight = v;
    }
    if let Some(v) = args.hidden_width {
        recipe.hidden_width = v;
    }
    let problem = make_problem(&recipe).map_err(|e| CliError::Config(format!("problem: {e}")))?;
    let tolerance = args.tolerance.unwrap_or(match family {
        ProblemFamily::QuadraticSum => 1e-9,
        _ => 1e-5,
    });
    let mut worst = 0.0f64;
    for k in 0..args.points {
        let x = ParamVector::seeded_normal(
            problem.dim(),
            1.0,
            args.seed.wrapping_add(k as u64 + 1),
        );
        let err = finite_diff_check(&problem, &x, args.h);
        println!("point {k}: max relative error {err:.3e}");
        worst = worst.max(err);
    }
    println!(
        "worst over {} points: {worst:.3e} (tolerance {tolerance:.1e})",
        args.points
    );
    if worst <= tolerance {
        println!("gradcheck passed");
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradcheck failed: max relative error {worst:.3e} exceeds tolerance {tolerance:.1e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommand_names_are_kebab_case() {
        let cli = Cli::try_parse_from([
            "isvrg", "theory", "--n", "32", "--L", "1", "--sigma", "1", "--gap", "2", "--T",
            "100", "--lambda", "0.6667",
        ])
        .unwrap();
        match cli.command {
            Cmd::Theory(args) => {
                assert_eq!(args.n, 32);
                assert_eq!(args.lipschitz, 1.0);
                assert_eq!(args.total_steps, 100);
                assert_eq!(args.lambda, 0.6667);
                assert!(!args.json);
            }
            _ => panic!("expected the theory subcommand"),
        }
        assert!(Cli::try_parse_from(["isvrg", "sweep-lambda", "--config", "x.json"]).is_ok());
        assert!(Cli::try_parse_from(["isvrg", "frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["isvrg", "run", "--config", "x", "--bogus"]).is_err());
    }

    #[test]
    fn lambda_grids_parse_comma_separated() {
        let cli = Cli::try_parse_from([
            "isvrg",
            "sweep-lambda",
            "--config",
            "x.json",
            "--lambdas",
            "0,0.25,0.5",
        ])
        .unwrap();
        match cli.command {
            Cmd::SweepLambda(args) => {
                assert_eq!(args.lambdas, Some(vec![0.0, 0.25, 0.5]));
            }
            _ => panic!("expected sweep-lambda"),
        }
    }

    #[test]
    fn default_sweep_grid_is_sorted_and_contains_two_thirds() {
        let grid = default_lambda_grid();
        assert_eq!(grid.len(), 11);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid.contains(&(2.0 / 3.0)));
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 0.9);
    }
}
