//! Property tests for the estimator direction formulas and their exact
//! enumeration oracles, on randomly generated built-in problems.

use isvrg::{
    direction, exact_bias, exact_mean, exact_second_moment, full_gradient, make_problem,
    EstimatorSpec, FiniteSumProblem, IfoLedger, LedgerChannel, ParamVector, ProblemFamily,
    ProblemRecipe,
};
use isvrg::schedules::Branch;
use proptest::prelude::*;

fn family_strategy() -> impl Strategy<Value = ProblemFamily> {
    prop_oneof![
        Just(ProblemFamily::QuadraticSum),
        Just(ProblemFamily::SigmoidRegression),
        Just(ProblemFamily::NonconvexRegularizedLogistic),
        Just(ProblemFamily::TinyMlp),
    ]
}

/// A small random problem (n ≤ 64) plus two evaluation points.
fn problem_and_points() -> impl Strategy<
    Value = (
        isvrg::BuiltinProblem,
        ParamVector,
        ParamVector,
    ),
> {
    (
        family_strategy(),
        1usize..=64,
        1usize..=4,
        any::<u64>(),
        any::<u64>(),
        any::<u64>(),
    )
        .prop_map(|(family, n, d, seed, x_seed, snap_seed)| {
            let recipe = ProblemRecipe {
                hidden_width: 2,
                ..ProblemRecipe::new(family, n, d, seed)
            };
            let problem = make_problem(&recipe).expect("valid recipe");
            let dim = problem.dim();
            let x = ParamVector::seeded_normal(dim, 0.5, x_seed);
            let snapshot = ParamVector::seeded_normal(dim, 0.5, snap_seed);
            (problem, x, snapshot)
        })
}

fn gradient_at(problem: &dyn FiniteSumProblem, x: &ParamVector) -> ParamVector {
    let mut scratch = IfoLedger::new();
    full_gradient(problem, x, &mut scratch, LedgerChannel::Evaluation).expect("finite")
}

/// Largest component-gradient norm over the two points: the empirical stand-in
/// for the uniform gradient bound.
fn max_component_norm(
    problem: &dyn FiniteSumProblem,
    x: &ParamVector,
    snapshot: &ParamVector,
) -> f64 {
    let mut best = 0.0f64;
    for i in 0..problem.num_components() {
        best = best.max(problem.component_gradient(i, x).norm());
        best = best.max(problem.component_gradient(i, snapshot).norm());
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The weighted-unbiased estimator's exact mean is (1−λ)·∇f(x): unbiased
    /// up to a known positive scale for λ < 1.
    #[test]
    fn unbiased_mean_is_scaled_gradient(
        (problem, x, snapshot) in problem_and_points(),
        lambda in 0.0f64..=1.0,
    ) {
        let spec = EstimatorSpec::weighted_unbiased(lambda).unwrap();
        let mean = exact_mean(&problem, spec.weights(Branch::Fixed), &x, &snapshot).unwrap();
        let mut expected = gradient_at(&problem, &x);
        expected.scale(1.0 - lambda);
        let mut diff = mean;
        diff.axpy(-1.0, &expected);
        prop_assert!(
            diff.norm() <= 1e-12 * (1.0 + expected.norm()),
            "deviation {} for lambda {}",
            diff.norm(),
            lambda
        );
    }

    /// The biased estimator's exact bias is −λ∇f(x) + (2λ−1)∇f(x̃); at λ = ½
    /// it matches the rescaled-svrg expectation.
    #[test]
    fn biased_bias_law(
        (problem, x, snapshot) in problem_and_points(),
        lambda in 0.0f64..=1.0,
    ) {
        let spec = EstimatorSpec::biased(lambda).unwrap();
        let bias = exact_bias(&problem, spec.weights(Branch::Decayed), &x, &snapshot).unwrap();
        let grad_x = gradient_at(&problem, &x);
        let grad_snap = gradient_at(&problem, &snapshot);
        let mut expected = ParamVector::zeros(grad_x.dim());
        expected.axpy(-lambda, &grad_x);
        expected.axpy(2.0 * lambda - 1.0, &grad_snap);
        let mut diff = bias;
        diff.axpy(-1.0, &expected);
        prop_assert!(
            diff.norm() <= 1e-12 * (1.0 + expected.norm()),
            "deviation {} for lambda {}",
            diff.norm(),
            lambda
        );
    }

    /// At λ = ½ the weighted-unbiased, biased, and rescaled-svrg formulas are
    /// the same function of the three gradients, bit for bit.
    #[test]
    fn half_lambda_directions_coincide(
        gc in prop::collection::vec(-1e3f64..1e3, 1..6),
        gs in prop::collection::vec(-1e3f64..1e3, 1..6),
        gf in prop::collection::vec(-1e3f64..1e3, 1..6),
    ) {
        let dim = gc.len().min(gs.len()).min(gf.len());
        let gc = ParamVector::new(gc[..dim].to_vec());
        let gs = ParamVector::new(gs[..dim].to_vec());
        let gf = ParamVector::new(gf[..dim].to_vec());
        for branch in [Branch::Decayed, Branch::Fixed] {
            let unbiased = direction(
                EstimatorSpec::weighted_unbiased(0.5).unwrap().weights(branch),
                &gc, &gs, &gf,
            ).unwrap();
            let biased = direction(
                EstimatorSpec::biased(0.5).unwrap().weights(branch),
                &gc, &gs, &gf,
            ).unwrap();
            let svrg = direction(
                EstimatorSpec::scaled_svrg().weights(branch),
                &gc, &gs, &gf,
            ).unwrap();
            prop_assert_eq!(&unbiased, &biased);
            prop_assert_eq!(&unbiased, &svrg);
        }
    }

    /// Second-moment gate for the biased family: for λ ≤ 2/3 the exact second
    /// moment never exceeds 4(1−λ)²·σ̂², with σ̂ the largest component
    /// gradient norm over the two evaluation points.
    #[test]
    fn biased_second_moment_gate(
        (problem, x, snapshot) in problem_and_points(),
        lambda in 0.0f64..=(2.0 / 3.0),
    ) {
        let spec = EstimatorSpec::biased(lambda).unwrap();
        let second = exact_second_moment(&problem, spec.weights(Branch::Decayed), &x, &snapshot)
            .unwrap();
        let sigma_hat = max_component_norm(&problem, &x, &snapshot);
        let gate = 4.0 * (1.0 - lambda) * (1.0 - lambda) * sigma_hat * sigma_hat;
        prop_assert!(
            second <= gate * (1.0 + 1e-12) + 1e-15,
            "second moment {second} exceeds gate {gate} at lambda {lambda}"
        );
    }

    /// With the iterate sitting on the snapshot, the biased direction
    /// collapses to λ∇f(x̃) for every sampled component, so the second moment
    /// equals ‖λ∇f(x̃)‖².
    #[test]
    fn snapshot_collapse(
        (problem, _x, snapshot) in problem_and_points(),
        lambda in 0.0f64..=1.0,
    ) {
        let spec = EstimatorSpec::biased(lambda).unwrap();
        let second =
            exact_second_moment(&problem, spec.weights(Branch::Decayed), &snapshot, &snapshot)
                .unwrap();
        let mut scaled = gradient_at(&problem, &snapshot);
        scaled.scale(lambda);
        prop_assert!(
            (second - scaled.norm_sq()).abs() <= 1e-15,
            "collapse residual {}",
            (second - scaled.norm_sq()).abs()
        );
    }

    /// λ = 0 turns the weighted-unbiased weights into the plain-SGD weights
    /// exactly, so the directions agree bitwise.
    #[test]
    fn lambda_zero_is_plain_sgd(
        gc in prop::collection::vec(-1e3f64..1e3, 1..6),
    ) {
        let gc = ParamVector::new(gc);
        let junk = ParamVector::new(vec![1e308; gc.dim()]);
        let wu0 = direction(
            EstimatorSpec::weighted_unbiased(0.0).unwrap().weights(Branch::Fixed),
            &gc, &junk, &junk,
        ).unwrap();
        let sgd = direction(
            EstimatorSpec::plain_sgd().weights(Branch::Fixed),
            &gc, &junk, &junk,
        ).unwrap();
        prop_assert_eq!(&wu0, &gc);
        prop_assert_eq!(&wu0, &sgd);
    }
}
