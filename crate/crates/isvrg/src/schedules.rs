//! Step-size schedules and the branch signal that drives estimator switching.
//!
//! Two base step laws are provided:
//!
//! * decayed: `η_Δ = c / √(Δ+1)` where `Δ` is the global inner-iteration
//!   counter,
//! * fixed: `η = 1 / (3·L·n^{a·α})`.
//!
//! The hybrid-max schedule takes the pointwise maximum of the two and labels
//! each step with the branch that produced it; the practical schedule does the
//! same with the per-epoch decay `η₀/(t·s)` in place of `c/√(Δ+1)`. A
//! decay-only practical variant exists for plain-SGD baselines.

use serde::{Deserialize, Serialize};

/// Which of the two step laws produced a hybrid step. Estimator switching
/// keys off this signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Decayed,
    Fixed,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Decayed => f.write_str("decayed"),
            Branch::Fixed => f.write_str("fixed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `c / √(Δ+1)`, always on the decayed branch.
    Decayed,
    /// `1 / (3·L·n^{a·α})`, always on the fixed branch.
    Fixed,
    /// `max{c/√(Δ+1), fixed}`; decayed branch only while strictly larger.
    HybridMax,
    /// `max{η₀/(t·s), fixed}` with 1-based inner index `t` and epoch `s`.
    Practical,
    /// `η₀/(t·s)` with no fixed floor, always decayed. Plain-SGD baseline.
    PracticalDecay,
}

/// Errors from schedule construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("schedule needs at least one component, got n = 0")]
    EmptyProblem,
    #[error("exponent a must lie in [0, 1], got {0}")]
    BadA(f64),
    #[error("exponent alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
}

/// A step-size schedule. Fields not used by `kind` are carried but ignored.
///
/// `eta_fixed` is never stored: it is recomputed from `(lipschitz, n, a,
/// alpha)` on every call, so mutating those fields can never leave a stale
/// cached step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    /// Decay scale of `c/√(Δ+1)`.
    pub c: f64,
    /// Decay scale of `η₀/(t·s)`.
    pub eta0: f64,
    /// Smoothness constant L in the fixed step.
    pub lipschitz: f64,
    /// Number of components n in the fixed step.
    pub n: usize,
    /// Exponent a in `n^{a·α}` (a ∈ [0, 1]).
    pub a: f64,
    /// Exponent α in `n^{a·α}` (α ∈ (0, 1]).
    pub alpha: f64,
    /// Companion exponent b (carried for reporting; b > 0).
    pub b: f64,
}

/// Decayed step `c / √(Δ+1)` for the global inner counter `Δ` (0-based).
pub fn decayed_step(c: f64, delta: u64) -> f64 {
    c / ((delta as f64) + 1.0).sqrt()
}

/// Fixed step `1 / (3·L·n^{a·α})`.
pub fn fixed_step(lipschitz: f64, n: usize, a: f64, alpha: f64) -> f64 {
    1.0 / (3.0 * lipschitz * (n as f64).powf(a * alpha))
}

/// Smallest `Δ` with `c/√(Δ+1) ≤ eta_fixed`; 0 when `c ≤ eta_fixed`.
///
/// Equals `⌈(c/eta_fixed)² − 1⌉` in exact arithmetic. The closed form is used
/// as a starting point and then corrected against the predicate itself, so
/// the returned index is exact with respect to floating-point `decayed_step`
/// (the closed form alone can be off by one when `(c/eta_fixed)²` lands on a
/// rounding boundary).
pub fn crossover_index(c: f64, eta_fixed: f64) -> u64 {
    let below = |delta: u64| decayed_step(c, delta) <= eta_fixed;
    if below(0) {
        return 0;
    }
    let ratio = c / eta_fixed;
    let mut k = (ratio * ratio - 1.0).ceil().max(0.0) as u64;
    while k > 0 && below(k - 1) {
        k -= 1;
    }
    while !below(k) {
        k += 1;
    }
    k
}

/// Default decay scale when the problem constants are known:
/// `c = √(3·(f(x⁰) − f*) / (4·L·σ²))`.
pub fn hybrid_c_from_constants(gap: f64, lipschitz: f64, sigma: f64) -> f64 {
    (3.0 * gap / (4.0 * lipschitz * sigma * sigma)).sqrt()
}

impl StepSchedule {
    fn base(kind: ScheduleKind) -> StepSchedule {
        StepSchedule {
            kind,
            c: 1.0,
            eta0: 1.0,
            lipschitz: 1.0,
            n: 1,
            a: 1.0,
            alpha: 0.2,
            b: 2.0,
        }
    }

    pub fn decayed(c: f64) -> Result<StepSchedule, ScheduleError> {
        let mut s = Self::base(ScheduleKind::Decayed);
        s.c = c;
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(lipschitz: f64, n: usize, a: f64, alpha: f64) -> Result<StepSchedule, ScheduleError> {
        let mut s = Self::base(ScheduleKind::Fixed);
        s.lipschitz = lipschitz;
        s.n = n;
        s.a = a;
        s.alpha = alpha;
        s.validate()?;
        Ok(s)
    }

    pub fn hybrid_max(
        c: f64,
        lipschitz: f64,
        n: usize,
        a: f64,
        alpha: f64,
    ) -> Result<StepSchedule, ScheduleError> {
        let mut s = Self::base(ScheduleKind::HybridMax);
        s.c = c;
        s.lipschitz = lipschitz;
        s.n = n;
        s.a = a;
        s.alpha = alpha;
        s.validate()?;
        Ok(s)
    }

    /// The practical hybrid: `max{η₀/(t·s), fixed}` with a = 1, α = 1/5.
    pub fn practical(eta0: f64, lipschitz: f64, n: usize) -> Result<StepSchedule, ScheduleError> {
        let mut s = Self::base(ScheduleKind::Practical);
        s.eta0 = eta0;
        s.lipschitz = lipschitz;
        s.n = n;
        s.validate()?;
        Ok(s)
    }

    /// Decay-only practical schedule `η₀/(t·s)` (no fixed floor).
    pub fn practical_decay(eta0: f64) -> Result<StepSchedule, ScheduleError> {
        let mut s = Self::base(ScheduleKind::PracticalDecay);
        s.eta0 = eta0;
        s.validate()?;
        Ok(s)
    }

    /// Check that every parameter the kind reads is usable. Guarantees that
    /// `step_at` only ever emits strictly positive, finite steps.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let positive = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ScheduleError::NonPositive { name, value })
            }
        };
        let uses_decay_c = matches!(self.kind, ScheduleKind::Decayed | ScheduleKind::HybridMax);
        let uses_eta0 = matches!(
            self.kind,
            ScheduleKind::Practical | ScheduleKind::PracticalDecay
        );
        let uses_fixed = matches!(
            self.kind,
            ScheduleKind::Fixed | ScheduleKind::HybridMax | ScheduleKind::Practical
        );
        if uses_decay_c {
            positive("c", self.c)?;
        }
        if uses_eta0 {
            positive("eta0", self.eta0)?;
        }
        if uses_fixed {
            positive("lipschitz", self.lipschitz)?;
            if self.n == 0 {
                return Err(ScheduleError::EmptyProblem);
            }
            if !(0.0..=1.0).contains(&self.a) {
                return Err(ScheduleError::BadA(self.a));
            }
            if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                return Err(ScheduleError::BadAlpha(self.alpha));
            }
        }
        positive("b", self.b)?;
        Ok(())
    }

    /// The fixed step `1/(3·L·n^{a·α})`, recomputed from current fields.
    pub fn eta_fixed(&self) -> f64 {
        fixed_step(self.lipschitz, self.n, self.a, self.alpha)
    }

    /// Step size and branch at global inner counter `delta` (0-based), inner
    /// index `t` and epoch `s` (both 1-based, used by the practical kinds).
    ///
    /// Ties between the two hybrid candidates resolve to the fixed branch.
    pub fn step_at(&self, delta: u64, t: usize, s: usize) -> (f64, Branch) {
        match self.kind {
            ScheduleKind::Decayed => (decayed_step(self.c, delta), Branch::Decayed),
            ScheduleKind::Fixed => (self.eta_fixed(), Branch::Fixed),
            ScheduleKind::HybridMax => {
                Self::pick(decayed_step(self.c, delta), self.eta_fixed())
            }
            ScheduleKind::Practical => {
                Self::pick(self.eta0 / ((t * s) as f64), self.eta_fixed())
            }
            ScheduleKind::PracticalDecay => (self.eta0 / ((t * s) as f64), Branch::Decayed),
        }
    }

    fn pick(decayed: f64, fixed: f64) -> (f64, Branch) {
        if decayed > fixed {
            (decayed, Branch::Decayed)
        } else {
            (fixed, Branch::Fixed)
        }
    }
}
