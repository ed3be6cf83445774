//! Built-in optimizer presets and the meaning of each one's free scalar.

use isvrg::{EstimatorSpec, ScheduleError, StepSchedule};

use crate::config::{A_EXPONENT, ALPHA_EXPONENT};

/// The four ready-made optimizer configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Plain stochastic gradient with the decay-only schedule `η₀/(t·s)`.
    Sgd,
    /// Half-weighted control variate with the fixed step.
    Svrg,
    /// λ=½ unbiased weighting with the floored `η₀/(t·s)` schedule.
    Msvrg,
    /// Branch-switching estimator with the max-of-decayed-and-fixed
    /// schedule.
    IsvrgPlus,
}

/// Accepted preset names, for error messages.
pub const PRESET_NAMES: &str = "sgd, svrg, msvrg, isvrg+";

impl Preset {
    /// Parse a preset name as written in configs.
    pub fn parse(name: &str) -> Option<Preset> {
        match name {
            "sgd" => Some(Preset::Sgd),
            "svrg" => Some(Preset::Svrg),
            "msvrg" => Some(Preset::Msvrg),
            "isvrg+" => Some(Preset::IsvrgPlus),
            _ => None,
        }
    }

    /// The config-file name of the preset.
    pub fn name(self) -> &'static str {
        match self {
            Preset::Sgd => "sgd",
            Preset::Svrg => "svrg",
            Preset::Msvrg => "msvrg",
            Preset::IsvrgPlus => "isvrg+",
        }
    }

    /// What the free scalar controls, for logs and tables.
    pub fn scalar_name(self) -> &'static str {
        match self {
            Preset::Sgd | Preset::Msvrg => "eta0",
            Preset::Svrg => "step-multiplier",
            Preset::IsvrgPlus => "c",
        }
    }

    /// Build the estimator and schedule for a scalar value.
    ///
    /// The scalar is η₀ for `sgd` and `msvrg`, the decay scale c for
    /// `isvrg+`, and a multiplier on the prescribed fixed step for `svrg`
    /// (folded in as `lipschitz/scalar`, since the step is inversely
    /// proportional to the smoothness constant).
    pub fn build(
        self,
        scalar: f64,
        lipschitz: f64,
        n: usize,
    ) -> Result<(EstimatorSpec, StepSchedule), ScheduleError> {
        Ok(match self {
            Preset::Sgd => (
                EstimatorSpec::plain_sgd(),
                StepSchedule::practical_decay(scalar)?,
            ),
            Preset::Svrg => (
                EstimatorSpec::scaled_svrg(),
                StepSchedule::fixed(lipschitz / scalar, n, A_EXPONENT, ALPHA_EXPONENT)?,
            ),
            Preset::Msvrg => (
                EstimatorSpec::weighted_unbiased(0.5).expect("0.5 is a valid weight"),
                StepSchedule::practical(scalar, lipschitz, n)?,
            ),
            Preset::IsvrgPlus => (
                EstimatorSpec::hybrid_default(),
                StepSchedule::hybrid_max(scalar, lipschitz, n, A_EXPONENT, ALPHA_EXPONENT)?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use isvrg::{fixed_step, Branch, EstimatorKind, ScheduleKind};

    #[test]
    fn parse_round_trips_the_names() {
        for preset in [Preset::Sgd, Preset::Svrg, Preset::Msvrg, Preset::IsvrgPlus] {
            assert_eq!(Preset::parse(preset.name()), Some(preset));
        }
        assert_eq!(Preset::parse("adam"), None);
    }

    #[test]
    fn sgd_is_plain_gradient_with_pure_decay() {
        let (est, sched) = Preset::Sgd.build(0.3, 2.0, 10).unwrap();
        assert_eq!(est.kind(), EstimatorKind::PlainSgd);
        assert_eq!(sched.kind, ScheduleKind::PracticalDecay);
        assert_eq!(sched.step_at(0, 1, 1), (0.3, Branch::Decayed));
        let (late, branch) = sched.step_at(9, 2, 5);
        assert_eq!(branch, Branch::Decayed);
        assert!((late - 0.03).abs() <= 1e-15);
    }

    #[test]
    fn svrg_scalar_multiplies_the_fixed_step() {
        let (est, sched) = Preset::Svrg.build(0.5, 2.0, 32).unwrap();
        assert_eq!(est.kind(), EstimatorKind::ScaledSvrg);
        assert_eq!(sched.kind, ScheduleKind::Fixed);
        assert_eq!(sched.eta_fixed(), fixed_step(4.0, 32, 1.0, 0.2));
        let base = Preset::Svrg.build(1.0, 2.0, 32).unwrap().1.eta_fixed();
        let scaled = sched.eta_fixed();
        assert!((scaled - 0.5 * base).abs() <= 1e-15 * base);
    }

    #[test]
    fn msvrg_is_half_weighted_with_floored_decay() {
        let (est, sched) = Preset::Msvrg.build(0.2, 1.0, 16).unwrap();
        assert_eq!(est.kind(), EstimatorKind::WeightedUnbiased { lambda: 0.5 });
        assert_eq!(sched.kind, ScheduleKind::Practical);
        assert_eq!(sched.eta_fixed(), fixed_step(1.0, 16, 1.0, 0.2));
    }

    #[test]
    fn isvrg_plus_switches_with_the_max_schedule() {
        let (est, sched) = Preset::IsvrgPlus.build(0.7, 1.0, 16).unwrap();
        assert!(matches!(est.kind(), EstimatorKind::HybridSwitch { .. }));
        assert_eq!(sched.kind, ScheduleKind::HybridMax);
        assert_eq!(sched.c, 0.7);
    }

    #[test]
    fn non_positive_scalars_are_rejected() {
        assert!(Preset::Sgd.build(0.0, 1.0, 8).is_err());
        assert!(Preset::Svrg.build(-1.0, 1.0, 8).is_err());
        assert!(Preset::IsvrgPlus.build(f64::NAN, 1.0, 8).is_err());
    }
}
