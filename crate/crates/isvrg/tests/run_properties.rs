//! Property tests for the optimizer loop: exact oracle accounting, the
//! λ = 0 ≡ plain-SGD equivalence, the branch law under the hybrid schedule,
//! and full-gradient linearity on the built-in problems.

use isvrg::{
    full_gradient, make_problem, run, EpochGradientMode, EstimatorSpec, FiniteSumProblem,
    IfoLedger, LedgerChannel, ParamVector, ProblemFamily, ProblemRecipe, RunConfig, StepSchedule,
};
use proptest::prelude::*;

fn quadratic(n: usize, d: usize, seed: u64) -> isvrg::BuiltinProblem {
    make_problem(&ProblemRecipe::new(ProblemFamily::QuadraticSum, n, d, seed)).expect("valid")
}

fn two_oracle_estimator() -> impl Strategy<Value = EstimatorSpec> {
    prop_oneof![
        Just(EstimatorSpec::scaled_svrg()),
        (0.01f64..0.99).prop_map(|l| EstimatorSpec::weighted_unbiased(l).unwrap()),
        (0.01f64..0.99).prop_map(|l| EstimatorSpec::biased(l).unwrap()),
        Just(EstimatorSpec::hybrid_default()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Oracle accounting for estimators that fetch both per-component
    /// gradients: exactly S·(n + 2m) optimization calls, and 2n evaluation
    /// calls per trace record.
    #[test]
    fn two_oracle_ledger_law(
        estimator in two_oracle_estimator(),
        n in 1usize..=12,
        d in 1usize..=3,
        epochs in 1usize..=4,
        m in 1usize..=9,
        seed in any::<u64>(),
    ) {
        let problem = quadratic(n, d, seed);
        let schedule = StepSchedule::hybrid_max(0.05, 1.0, n, 1.0, 0.2).unwrap();
        let config = RunConfig::new(
            estimator,
            schedule,
            epochs,
            m,
            seed ^ 0x5eed,
            ParamVector::zeros(d),
        );
        let outcome = run(&problem, &config).unwrap();
        let (s, n, m) = (epochs as u64, n as u64, m as u64);
        prop_assert_eq!(outcome.ledger.optimization_ifo(), s * (n + 2 * m));
        prop_assert_eq!(outcome.ledger.evaluation_ifo(), 2 * n * (s + 1));
        prop_assert_eq!(outcome.trace.len(), epochs + 1);
        prop_assert!(!outcome.truncated);
    }

    /// Plain SGD skips the snapshot oracle entirely: S·m optimization calls
    /// when the epoch gradient is off (auto), S·(n + m) when forced on.
    #[test]
    fn plain_sgd_ledger_law(
        n in 1usize..=12,
        d in 1usize..=3,
        epochs in 1usize..=4,
        m in 1usize..=9,
        seed in any::<u64>(),
    ) {
        let problem = quadratic(n, d, seed);
        let schedule = StepSchedule::decayed(0.05).unwrap();
        let mut config = RunConfig::new(
            EstimatorSpec::plain_sgd(),
            schedule,
            epochs,
            m,
            seed ^ 0x5eed,
            ParamVector::zeros(d),
        );
        let lean = run(&problem, &config).unwrap();
        prop_assert_eq!(
            lean.ledger.optimization_ifo(),
            (epochs * m) as u64
        );
        config.epoch_gradient = EpochGradientMode::Always;
        let classic = run(&problem, &config).unwrap();
        prop_assert_eq!(
            classic.ledger.optimization_ifo(),
            (epochs * (n + m)) as u64
        );
        // The extra full gradients change accounting only, not iterates.
        prop_assert_eq!(lean.output, classic.output);
    }

    /// λ = 0 with the weighted-unbiased estimator reproduces plain SGD
    /// bit for bit — same iterates, same diagnostics, same oracle counts —
    /// because skipped fetches consume neither randomness nor budget.
    #[test]
    fn lambda_zero_run_equals_plain_sgd(
        n in 1usize..=12,
        d in 1usize..=3,
        epochs in 1usize..=4,
        m in 1usize..=9,
        seed in any::<u64>(),
        fixed in any::<bool>(),
    ) {
        let problem = quadratic(n, d, seed);
        let schedule = if fixed {
            StepSchedule::fixed(1.0, n, 1.0, 0.2).unwrap()
        } else {
            StepSchedule::decayed(0.05).unwrap()
        };
        let wu0 = RunConfig::new(
            EstimatorSpec::weighted_unbiased(0.0).unwrap(),
            schedule.clone(),
            epochs,
            m,
            seed ^ 0xabc,
            ParamVector::seeded_normal(d, 0.3, seed ^ 0xdef),
        );
        let sgd = RunConfig {
            estimator: EstimatorSpec::plain_sgd(),
            ..wu0.clone()
        };
        let a = run(&problem, &wu0).unwrap();
        let b = run(&problem, &sgd).unwrap();
        prop_assert_eq!(&a.trace, &b.trace);
        prop_assert_eq!(&a.snapshots, &b.snapshots);
        prop_assert_eq!(a.output, b.output);
        prop_assert_eq!(a.ledger, b.ledger);
    }

    /// The branch recorded at each epoch equals the schedule's own signal at
    /// that epoch's last inner step, and under hybrid-max it never flips back
    /// from fixed to decayed.
    #[test]
    fn recorded_branches_follow_the_schedule(
        n in 1usize..=12,
        epochs in 1usize..=6,
        m in 1usize..=9,
        c in 0.01f64..1.0,
        seed in any::<u64>(),
    ) {
        let problem = quadratic(n, 2, seed);
        let schedule = StepSchedule::hybrid_max(c, 1.0, n, 1.0, 0.2).unwrap();
        let config = RunConfig::new(
            EstimatorSpec::hybrid_default(),
            schedule.clone(),
            epochs,
            m,
            seed ^ 0x5eed,
            ParamVector::zeros(2),
        );
        let outcome = run(&problem, &config).unwrap();
        let mut fixed_seen = false;
        for record in &outcome.trace[1..] {
            let s = record.epoch;
            let last_delta = (s * m - 1) as u64;
            let expected = schedule.step_at(last_delta, m, s).1;
            prop_assert_eq!(record.branch_last, expected);
            match record.branch_last {
                isvrg::Branch::Fixed => fixed_seen = true,
                isvrg::Branch::Decayed => prop_assert!(!fixed_seen, "branch reverted"),
            }
        }
    }

    /// Full-gradient linearity: the helper agrees with the naive mean of all
    /// component gradients to 1e-12 relative error on every family.
    #[test]
    fn full_gradient_is_the_component_mean(
        family_idx in 0usize..4,
        n in 1usize..=24,
        d in 1usize..=4,
        seed in any::<u64>(),
        x_seed in any::<u64>(),
    ) {
        let family = [
            ProblemFamily::QuadraticSum,
            ProblemFamily::SigmoidRegression,
            ProblemFamily::NonconvexRegularizedLogistic,
            ProblemFamily::TinyMlp,
        ][family_idx];
        let recipe = ProblemRecipe {
            hidden_width: 2,
            ..ProblemRecipe::new(family, n, d, seed)
        };
        let problem = make_problem(&recipe).unwrap();
        let dim = problem.dim();
        let x = ParamVector::seeded_normal(dim, 0.5, x_seed);
        let mut ledger = IfoLedger::new();
        let helper = full_gradient(&problem, &x, &mut ledger, LedgerChannel::Evaluation).unwrap();
        let mut mean = vec![0.0f64; dim];
        for i in 0..n {
            let g = problem.component_gradient(i, &x);
            for (slot, v) in mean.iter_mut().zip(g.as_slice()) {
                *slot += v / n as f64;
            }
        }
        let mut diff = helper.clone();
        diff.axpy(-1.0, &ParamVector::new(mean));
        prop_assert!(
            diff.norm() <= 1e-12 * (1.0 + helper.norm()),
            "deviation {}",
            diff.norm()
        );
        prop_assert_eq!(ledger.evaluation_ifo(), n as u64);
    }
}
