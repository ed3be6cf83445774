//! Closed-form evaluation of the convergence machinery behind the estimator
//! families: decayed-step constants, guaranteed-rate factors, the backward
//! Lyapunov recursions and their γ margins, closed-form γ lower bounds,
//! fixed-step bounds, admissible λ intervals with their optima, the hybrid
//! two-term bound, and the oracle-complexity figure.
//!
//! Universal constants that the guarantees leave unspecified (ν, ν₁, ν₂, ν̃)
//! default to 1 and are carried explicitly so no bound is silently
//! tightened. Two scaled-svrg quantities (the fixed-regime growth rate β and
//! the γ lower bound) are reconstructed by specializing, at λ = ½, the
//! pattern shared by the λ-weighted variants, and they are flagged as
//! reconstructed wherever they are reported.

use crate::optimizer::{default_inner_length, InnerLengthRule};
use crate::schedules::{fixed_step, hybrid_c_from_constants, Branch};
use serde::{Deserialize, Serialize};

/// Errors from domain restrictions on the closed forms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be at least 1")]
    ZeroCount { name: &'static str },
    #[error("lambda = {value} is outside {domain} for {context}")]
    LambdaDomain {
        context: &'static str,
        domain: &'static str,
        value: f64,
    },
}

fn require_positive(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TheoryError::NotPositive { name, value })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(TheoryError::Negative { name, value })
    }
}

/// The unspecified universal constants, each defaulting to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuConstants {
    /// Scales the scaled-svrg and weighted-unbiased γ bounds.
    pub nu: f64,
    /// Scales the biased γ bound.
    pub nu1: f64,
    /// Scales the fixed-style term of the hybrid bound.
    pub nu2: f64,
    /// Scales the whole hybrid bound.
    pub nu_tilde: f64,
}

impl Default for NuConstants {
    fn default() -> Self {
        NuConstants {
            nu: 1.0,
            nu1: 1.0,
            nu2: 1.0,
            nu_tilde: 1.0,
        }
    }
}

/// Problem and run constants every calculator consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    /// Number of components n.
    pub n: usize,
    /// Smoothness constant L.
    pub lipschitz: f64,
    /// Component gradient-norm bound σ.
    pub sigma: f64,
    /// Initial optimality gap f(x⁰) − f*.
    pub gap: f64,
    /// Total inner-step count T.
    pub total_steps: u64,
    /// λ for the λ-weighted families (must lie in [0, 1) for a full report).
    pub lambda: f64,
    /// Exponent a ∈ [0, 1].
    pub a: f64,
    /// Exponent b > 0.
    pub b: f64,
    /// Exponent α ∈ (0, 1].
    pub alpha: f64,
    /// Lyapunov parameter β; `None` means the prescribed `L/n^{b·α}`.
    pub beta: Option<f64>,
    pub nu: NuConstants,
}

impl TheoryInputs {
    /// Inputs with the headline exponents a = 1, b = 2, α = 1/5, the
    /// prescribed β, and unit universal constants.
    pub fn new(n: usize, lipschitz: f64, sigma: f64, gap: f64, total_steps: u64, lambda: f64) -> TheoryInputs {
        TheoryInputs {
            n,
            lipschitz,
            sigma,
            gap,
            total_steps,
            lambda,
            a: 1.0,
            b: 2.0,
            alpha: 0.2,
            beta: None,
            nu: NuConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.n == 0 {
            return Err(TheoryError::ZeroCount { name: "n" });
        }
        if self.total_steps == 0 {
            return Err(TheoryError::ZeroCount { name: "total_steps" });
        }
        require_positive("lipschitz", self.lipschitz)?;
        require_positive("sigma", self.sigma)?;
        require_non_negative("gap", self.gap)?;
        if !(self.lambda.is_finite() && (0.0..1.0).contains(&self.lambda)) {
            return Err(TheoryError::LambdaDomain {
                context: "the full report",
                domain: "[0, 1)",
                value: self.lambda,
            });
        }
        if !(0.0..=1.0).contains(&self.a) {
            return Err(TheoryError::Negative {
                name: "a",
                value: self.a,
            });
        }
        require_positive("b", self.b)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(TheoryError::NotPositive {
                name: "alpha",
                value: self.alpha,
            });
        }
        if let Some(beta) = self.beta {
            require_positive("beta", beta)?;
        }
        for (name, value) in [
            ("nu", self.nu.nu),
            ("nu1", self.nu.nu1),
            ("nu2", self.nu.nu2),
            ("nu_tilde", self.nu.nu_tilde),
        ] {
            require_positive(name, value)?;
        }
        Ok(())
    }

    /// β to use in recursions: the explicit value, else `L/n^{b·α}`.
    pub fn effective_beta(&self) -> f64 {
        self.beta
            .unwrap_or(self.lipschitz / (self.n as f64).powf(self.b * self.alpha))
    }
}

/// `n^{(2a−b)·α}`, the scale that separates the fixed-regime bounds.
pub fn sample_scale(n: usize, a: f64, b: f64, alpha: f64) -> f64 {
    (n as f64).powf((2.0 * a - b) * alpha)
}

// ---------------------------------------------------------------------------
// Decayed-step constants and bounds
// ---------------------------------------------------------------------------

/// Decay scale of the scaled-svrg estimator: `√(gap / (2Lσ²))`.
pub fn decayed_c_scaled_svrg(gap: f64, lipschitz: f64, sigma: f64) -> Result<f64, TheoryError> {
    require_non_negative("gap", gap)?;
    require_positive("lipschitz", lipschitz)?;
    require_positive("sigma", sigma)?;
    Ok((gap / (2.0 * lipschitz * sigma * sigma)).sqrt())
}

/// Decay scale of the weighted-unbiased estimator:
/// `√(gap / ((2λ² − 2λ + 1)·Lσ²))`. Defined for all λ (the quadratic is
/// positive everywhere).
pub fn decayed_c_weighted_unbiased(
    gap: f64,
    lipschitz: f64,
    sigma: f64,
    lambda: f64,
) -> Result<f64, TheoryError> {
    require_non_negative("gap", gap)?;
    require_positive("lipschitz", lipschitz)?;
    require_positive("sigma", sigma)?;
    if !lambda.is_finite() {
        return Err(TheoryError::LambdaDomain {
            context: "the weighted-unbiased decay scale",
            domain: "finite values",
            value: lambda,
        });
    }
    let q = 2.0 * lambda * lambda - 2.0 * lambda + 1.0;
    Ok((gap / (q * lipschitz * sigma * sigma)).sqrt())
}

/// Decay scale of the biased estimator: `√(gap / (2λLσ²))`, λ > 0.
pub fn decayed_c_biased(
    gap: f64,
    lipschitz: f64,
    sigma: f64,
    lambda: f64,
) -> Result<f64, TheoryError> {
    require_non_negative("gap", gap)?;
    require_positive("lipschitz", lipschitz)?;
    require_positive("sigma", sigma)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(TheoryError::LambdaDomain {
            context: "the biased decay scale",
            domain: "(0, 1]",
            value: lambda,
        });
    }
    Ok((gap / (2.0 * lambda * lipschitz * sigma * sigma)).sqrt())
}

/// Shared base rate of every decayed-step bound: `√(2·gap·L/T)·σ`.
pub fn decayed_bound_base(gap: f64, lipschitz: f64, sigma: f64, total_steps: u64) -> f64 {
    (2.0 * gap * lipschitz / total_steps as f64).sqrt() * sigma
}

/// Rate factor of scaled svrg under decayed steps: `√2`.
pub fn decayed_factor_scaled_svrg() -> f64 {
    2.0f64.sqrt()
}

/// Rate factor of the weighted-unbiased estimator under decayed steps:
/// `√(2λ² − 2λ + 1)/(1 − λ)`, λ ∈ [0, 1).
pub fn decayed_factor_weighted_unbiased(lambda: f64) -> Result<f64, TheoryError> {
    if !(lambda.is_finite() && (0.0..1.0).contains(&lambda)) {
        return Err(TheoryError::LambdaDomain {
            context: "the weighted-unbiased rate factor",
            domain: "[0, 1)",
            value: lambda,
        });
    }
    Ok((2.0 * lambda * lambda - 2.0 * lambda + 1.0).sqrt() / (1.0 - lambda))
}

/// Rate factor of the biased estimator under decayed steps:
/// `2(1 − λ)/√λ`, λ ∈ (0, 1].
pub fn decayed_factor_biased(lambda: f64) -> Result<f64, TheoryError> {
    if !(lambda.is_finite() && lambda > 0.0 && lambda <= 1.0) {
        return Err(TheoryError::LambdaDomain {
            context: "the biased rate factor",
            domain: "(0, 1]",
            value: lambda,
        });
    }
    Ok(2.0 * (1.0 - lambda) / lambda.sqrt())
}

// ---------------------------------------------------------------------------
// Lyapunov recursions
// ---------------------------------------------------------------------------

/// Which family's recursion coefficients to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecursionFamily {
    ScaledSvrg,
    WeightedUnbiased,
    Biased,
}

/// Output of a backward Lyapunov recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionTable {
    /// Coefficients c_0..c_m (c_m = 0 boundary).
    pub c: Vec<f64>,
    /// Margins Ω_0..Ω_{m−1}.
    pub omega: Vec<f64>,
    /// γ = min_t Ω_t.
    pub gamma: f64,
    /// Whether γ > 0 (the standing assumption of every fixed-step bound).
    pub positive: bool,
}

/// Run the backward recursion from `c_m = 0` and return the c-table, the
/// Ω-margins, and γ = min Ω. A non-positive γ is reported, never raised.
///
/// Per family, with `μ = 1 − λ`:
///
/// * scaled svrg: `c_t = c_{t+1}(1 + ηβ + 2η²L²) + L³η²`,
///   `Ω_t = η − c_{t+1}η/β − Lη² − 2c_{t+1}η²` (λ ignored);
/// * weighted-unbiased: `c_t = c_{t+1}(1 + μηβ + 2μ²η²L²) + L³η²`,
///   `Ω_t = η − μc_{t+1}η/β − μ²Lη² − 2μ⁴c_{t+1}η²`;
/// * biased: `c_t = c_{t+1}(1 + ηβ + 2μ²η²L²) + L³η²μ²`,
///   `Ω_t = η − c_{t+1}η/β − λ²Lη² − 2λ²c_{t+1}η²`.
pub fn lyapunov_recursion(
    family: RecursionFamily,
    eta: f64,
    beta: f64,
    lipschitz: f64,
    lambda: f64,
    m: usize,
) -> Result<RecursionTable, TheoryError> {
    require_positive("eta", eta)?;
    require_positive("beta", beta)?;
    require_positive("lipschitz", lipschitz)?;
    if m == 0 {
        return Err(TheoryError::ZeroCount { name: "m" });
    }
    if family != RecursionFamily::ScaledSvrg && !(lambda.is_finite() && (0.0..=1.0).contains(&lambda)) {
        return Err(TheoryError::LambdaDomain {
            context: "the Lyapunov recursion",
            domain: "[0, 1]",
            value: lambda,
        });
    }
    let l = lipschitz;
    let mu = 1.0 - lambda;
    let (growth, increment) = match family {
        RecursionFamily::ScaledSvrg => (
            1.0 + eta * beta + 2.0 * eta * eta * l * l,
            l * l * l * eta * eta,
        ),
        RecursionFamily::WeightedUnbiased => (
            1.0 + mu * eta * beta + 2.0 * mu * mu * eta * eta * l * l,
            l * l * l * eta * eta,
        ),
        RecursionFamily::Biased => (
            1.0 + eta * beta + 2.0 * mu * mu * eta * eta * l * l,
            l * l * l * eta * eta * mu * mu,
        ),
    };
    let omega_at = |c_next: f64| -> f64 {
        match family {
            RecursionFamily::ScaledSvrg => {
                eta - c_next * eta / beta - l * eta * eta - 2.0 * c_next * eta * eta
            }
            RecursionFamily::WeightedUnbiased => {
                eta - mu * c_next * eta / beta
                    - mu * mu * l * eta * eta
                    - 2.0 * mu * mu * mu * mu * c_next * eta * eta
            }
            RecursionFamily::Biased => {
                eta - c_next * eta / beta
                    - lambda * lambda * l * eta * eta
                    - 2.0 * lambda * lambda * c_next * eta * eta
            }
        }
    };

    let mut c = vec![0.0; m + 1];
    let mut omega = vec![0.0; m];
    for t in (0..m).rev() {
        omega[t] = omega_at(c[t + 1]);
        c[t] = c[t + 1] * growth + increment;
    }
    let gamma = omega.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RecursionTable {
        c,
        omega,
        gamma,
        positive: gamma > 0.0,
    })
}

// ---------------------------------------------------------------------------
// γ lower bounds and fixed-step bounds
// ---------------------------------------------------------------------------

/// Closed-form lower bound on the recursion's γ:
///
/// * scaled svrg: `ν/(18·L·n^α)` — reconstructed by specializing the
///   λ-weighted pattern at λ = ½; carried with a reconstruction flag in
///   reports;
/// * weighted-unbiased: `(1 − λ)·ν/(9·n^{(2a−b)α}·L)`;
/// * biased: `(1 − λ)·λ·ν₁/(9·L·n^{(2a−b)α})`.
pub fn gamma_lower_bound(
    family: RecursionFamily,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
    lipschitz: f64,
    lambda: f64,
    nu: &NuConstants,
) -> f64 {
    let nf = n as f64;
    match family {
        RecursionFamily::ScaledSvrg => nu.nu / (18.0 * lipschitz * nf.powf(alpha)),
        RecursionFamily::WeightedUnbiased => {
            (1.0 - lambda) * nu.nu / (9.0 * sample_scale(n, a, b, alpha) * lipschitz)
        }
        RecursionFamily::Biased => {
            (1.0 - lambda) * lambda * nu.nu1 / (9.0 * lipschitz * sample_scale(n, a, b, alpha))
        }
    }
}

/// Generic fixed-step bound `gap/(T·γ)`; `None` when γ ≤ 0 (no finite
/// guarantee).
pub fn fixed_bound_from_gamma(gap: f64, total_steps: u64, gamma: f64) -> Option<f64> {
    if gamma > 0.0 {
        Some(gap / (total_steps as f64 * gamma))
    } else {
        None
    }
}

/// Closed-form fixed-step bound for scaled svrg: `18·L·n^α·gap/(T·ν)`.
pub fn fixed_bound_closed_scaled_svrg(
    gap: f64,
    total_steps: u64,
    n: usize,
    alpha: f64,
    lipschitz: f64,
    nu: &NuConstants,
) -> f64 {
    18.0 * lipschitz * (n as f64).powf(alpha) * gap / (total_steps as f64 * nu.nu)
}

/// Closed-form fixed-step bound for the weighted-unbiased family:
/// `9·n^{(2a−b)α}·L·gap/((1 − λ)·T·ν)`, λ ∈ [0, 1).
pub fn fixed_bound_closed_weighted_unbiased(
    gap: f64,
    total_steps: u64,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
    lipschitz: f64,
    lambda: f64,
    nu: &NuConstants,
) -> Result<f64, TheoryError> {
    if !(lambda.is_finite() && (0.0..1.0).contains(&lambda)) {
        return Err(TheoryError::LambdaDomain {
            context: "the weighted-unbiased fixed-step bound",
            domain: "[0, 1)",
            value: lambda,
        });
    }
    Ok(9.0 * sample_scale(n, a, b, alpha) * lipschitz * gap
        / ((1.0 - lambda) * total_steps as f64 * nu.nu))
}

/// Closed-form fixed-step bound for the biased family:
/// `9·L·n^{(2a−b)α}·gap/(λ(1 − λ)·T·ν₁)`, λ ∈ (0, 1).
pub fn fixed_bound_closed_biased(
    gap: f64,
    total_steps: u64,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
    lipschitz: f64,
    lambda: f64,
    nu: &NuConstants,
) -> Result<f64, TheoryError> {
    if !(lambda.is_finite() && lambda > 0.0 && lambda < 1.0) {
        return Err(TheoryError::LambdaDomain {
            context: "the biased fixed-step bound",
            domain: "(0, 1)",
            value: lambda,
        });
    }
    Ok(9.0 * lipschitz * sample_scale(n, a, b, alpha) * gap
        / (lambda * (1.0 - lambda) * total_steps as f64 * nu.nu1))
}

// ---------------------------------------------------------------------------
// Admissible λ
// ---------------------------------------------------------------------------

/// A λ interval with explicit endpoint openness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl LambdaInterval {
    pub fn contains(&self, lambda: f64) -> bool {
        let above = if self.lo_closed {
            lambda >= self.lo
        } else {
            lambda > self.lo
        };
        let below = if self.hi_closed {
            lambda <= self.hi
        } else {
            lambda < self.hi
        };
        above && below
    }
}

/// The best λ of an admissible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaOptimum {
    /// The optimum lies inside the interval.
    Attained(f64),
    /// The optimum is a limit the interval never reaches.
    InfimumOnly(f64),
}

/// Admissible λ range and optimum; both absent when the range is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleLambda {
    pub interval: Option<LambdaInterval>,
    pub optimum: Option<LambdaOptimum>,
}

/// Which λ-weighted family an admissibility query concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightedFamily {
    Unbiased,
    Biased,
}

/// Admissible λ range for a family under a step regime:
///
/// * unbiased, decayed: `[0, ½)`, optimum 0 (attained);
/// * unbiased, fixed: `(0, 1 − n^{(2a−b)α}/2)` open, optimum 0 as an
///   unattained infimum;
/// * biased, decayed: `(½, 2/3]`, optimum 2/3 (attained);
/// * biased, fixed: the open interval between the roots
///   `(1 ∓ √(1 − 4n^{(2a−b)α}))/2`, optimum ½ (attained); empty whenever
///   `4·n^{(2a−b)α} > 1` — in particular at a = 1, b = 2.
pub fn admissible_lambda(
    family: WeightedFamily,
    regime: Branch,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
) -> AdmissibleLambda {
    let empty = AdmissibleLambda {
        interval: None,
        optimum: None,
    };
    let q = sample_scale(n, a, b, alpha);
    match (family, regime) {
        (WeightedFamily::Unbiased, Branch::Decayed) => AdmissibleLambda {
            interval: Some(LambdaInterval {
                lo: 0.0,
                hi: 0.5,
                lo_closed: true,
                hi_closed: false,
            }),
            optimum: Some(LambdaOptimum::Attained(0.0)),
        },
        (WeightedFamily::Unbiased, Branch::Fixed) => {
            let hi = 1.0 - q / 2.0;
            if hi <= 0.0 {
                return empty;
            }
            AdmissibleLambda {
                interval: Some(LambdaInterval {
                    lo: 0.0,
                    hi,
                    lo_closed: false,
                    hi_closed: false,
                }),
                optimum: Some(LambdaOptimum::InfimumOnly(0.0)),
            }
        }
        (WeightedFamily::Biased, Branch::Decayed) => AdmissibleLambda {
            interval: Some(LambdaInterval {
                lo: 0.5,
                hi: 2.0 / 3.0,
                lo_closed: false,
                hi_closed: true,
            }),
            optimum: Some(LambdaOptimum::Attained(2.0 / 3.0)),
        },
        (WeightedFamily::Biased, Branch::Fixed) => {
            let discriminant = 1.0 - 4.0 * q;
            if discriminant <= 0.0 {
                return empty;
            }
            let root = discriminant.sqrt();
            AdmissibleLambda {
                interval: Some(LambdaInterval {
                    lo: (1.0 - root) / 2.0,
                    hi: (1.0 + root) / 2.0,
                    lo_closed: false,
                    hi_closed: false,
                }),
                optimum: Some(LambdaOptimum::Attained(0.5)),
            }
        }
    }
}

/// Grid verification (step 1e-4, interval endpoints included exactly) of the
/// two rate-factor minimizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorOptima {
    /// Argmin of `√(2λ²−2λ+1)/(1−λ)` over `[0, ½)`.
    pub unbiased_argmin: f64,
    pub unbiased_min: f64,
    /// Argmin of `2(1−λ)/√λ` over `(½, 2/3]`.
    pub biased_argmin: f64,
    pub biased_min: f64,
}

/// Minimize both decayed rate factors over their admissible intervals on a
/// 1e-4 grid. The unbiased factor bottoms out at λ = 0 with value 1; the
/// biased factor decreases across its interval and bottoms out at λ = 2/3
/// with value √(2/3) ≈ 0.8165.
pub fn lambda_factor_optima() -> FactorOptima {
    let step = 1e-4;
    let mut unbiased_argmin = 0.0;
    let mut unbiased_min = f64::INFINITY;
    let mut k = 0u64;
    loop {
        let lambda = k as f64 * step;
        if lambda >= 0.5 {
            break;
        }
        let value = decayed_factor_weighted_unbiased(lambda).expect("in domain");
        if value < unbiased_min {
            unbiased_min = value;
            unbiased_argmin = lambda;
        }
        k += 1;
    }

    let mut biased_argmin = f64::NAN;
    let mut biased_min = f64::INFINITY;
    let mut k = 1u64;
    loop {
        let lambda = 0.5 + k as f64 * step;
        if lambda >= 2.0 / 3.0 {
            break;
        }
        let value = decayed_factor_biased(lambda).expect("in domain");
        if value < biased_min {
            biased_min = value;
            biased_argmin = lambda;
        }
        k += 1;
    }
    // The closed right endpoint belongs to the interval: include it exactly.
    let end = 2.0 / 3.0;
    let value = decayed_factor_biased(end).expect("in domain");
    if value < biased_min {
        biased_min = value;
        biased_argmin = end;
    }

    FactorOptima {
        unbiased_argmin,
        unbiased_min,
        biased_argmin,
        biased_min,
    }
}

// ---------------------------------------------------------------------------
// Hybrid bound and oracle complexity
// ---------------------------------------------------------------------------

/// The hybrid two-term bound:
/// `ν̃·min{√3·√(gap·L/T)·σ, 9·n^{(2a−b)α}·L·gap/(T·ν₂)}`.
pub fn hybrid_bound(
    gap: f64,
    lipschitz: f64,
    sigma: f64,
    total_steps: u64,
    n: usize,
    a: f64,
    b: f64,
    alpha: f64,
    nu: &NuConstants,
) -> f64 {
    let t = total_steps as f64;
    let decayed_term = 3.0f64.sqrt() * (gap * lipschitz / t).sqrt() * sigma;
    let fixed_term = 9.0 * sample_scale(n, a, b, alpha) * lipschitz * gap / (t * nu.nu2);
    nu.nu_tilde * decayed_term.min(fixed_term)
}

/// Which term attains the oracle-complexity minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IfoRegime {
    /// `1/ε²` is strictly smaller.
    EpsilonSquared,
    /// `n^{1/5}/ε` is strictly smaller.
    SampleScaled,
    /// Both terms are equal (ε = n^{−1/5}).
    Boundary,
}

/// Oracle-complexity figure `min(1/ε², n^{1/5}/ε)` with its regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfoComplexity {
    pub value: f64,
    pub regime: IfoRegime,
}

/// Evaluate `min(1/ε², n^{1/5}/ε)` and report which side attains it. The
/// regime boundary sits at ε = n^{−1/5}.
pub fn ifo_complexity(n: usize, epsilon: f64) -> Result<IfoComplexity, TheoryError> {
    if n == 0 {
        return Err(TheoryError::ZeroCount { name: "n" });
    }
    require_positive("epsilon", epsilon)?;
    let a = 1.0 / (epsilon * epsilon);
    let b = (n as f64).powf(0.2) / epsilon;
    let regime = if a < b {
        IfoRegime::EpsilonSquared
    } else if b < a {
        IfoRegime::SampleScaled
    } else {
        IfoRegime::Boundary
    };
    Ok(IfoComplexity {
        value: a.min(b),
        regime,
    })
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Decayed-regime numbers for one family at the report's λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayedFamilyReport {
    /// Decay scale c; `None` when λ is outside the constant's domain.
    pub c: Option<f64>,
    /// Rate factor; `None` when λ is outside the factor's domain.
    pub factor: Option<f64>,
    /// base·factor; `None` alongside `factor`.
    pub bound: Option<f64>,
}

/// Fixed-regime numbers for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedFamilyReport {
    /// Prescribed step 1/(3·L·n^{a·α}) (exponent α directly for scaled svrg).
    pub eta: f64,
    /// β used by the recursion.
    pub beta: f64,
    /// Recommended inner length for the family.
    pub inner_length: usize,
    pub recursion: RecursionTable,
    pub gamma_lower_bound: f64,
    /// `gap/(T·γ)` from the recursion γ; `None` when γ ≤ 0.
    pub bound_from_gamma: Option<f64>,
    /// The family's printed closed-form bound; `None` when λ makes it
    /// undefined.
    pub closed_form_bound: Option<f64>,
    /// True when parts of this family's formulas are reconstructions.
    pub reconstructed: bool,
}

/// Admissibility results for the four (family, regime) combinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleTable {
    pub unbiased_decayed: AdmissibleLambda,
    pub unbiased_fixed: AdmissibleLambda,
    pub biased_decayed: AdmissibleLambda,
    pub biased_fixed: AdmissibleLambda,
}

/// Every calculator output for one set of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub inputs: TheoryInputs,
    pub epsilon: Option<f64>,
    /// Shared decayed-bound base `√(2·gap·L/T)·σ`.
    pub decayed_base: f64,
    pub scaled_svrg_decayed: DecayedFamilyReport,
    pub weighted_unbiased_decayed: DecayedFamilyReport,
    pub biased_decayed: DecayedFamilyReport,
    pub scaled_svrg_fixed: FixedFamilyReport,
    pub weighted_unbiased_fixed: FixedFamilyReport,
    pub biased_fixed: FixedFamilyReport,
    /// Default hybrid decay scale `√(3·gap/(4·L·σ²))`; coincides with the
    /// biased decay scale at λ = 2/3.
    pub hybrid_c: f64,
    pub hybrid_bound: f64,
    pub admissible: AdmissibleTable,
    pub factor_optima: FactorOptima,
    pub ifo: Option<IfoComplexity>,
    pub notes: Vec<String>,
}

impl TheoryReport {
    /// Evaluate every calculator for the given inputs; `epsilon` adds the
    /// oracle-complexity figure.
    pub fn evaluate(inputs: &TheoryInputs, epsilon: Option<f64>) -> Result<TheoryReport, TheoryError> {
        inputs.validate()?;
        let TheoryInputs {
            n,
            lipschitz,
            sigma,
            gap,
            total_steps,
            lambda,
            a,
            b,
            alpha,
            ..
        } = *inputs;
        let nu = &inputs.nu;
        let beta = inputs.effective_beta();

        let base = decayed_bound_base(gap, lipschitz, sigma, total_steps);
        let decayed = |c: Option<f64>, factor: Option<f64>| DecayedFamilyReport {
            c,
            factor,
            bound: factor.map(|f| base * f),
        };
        let scaled_svrg_decayed = decayed(
            Some(decayed_c_scaled_svrg(gap, lipschitz, sigma)?),
            Some(decayed_factor_scaled_svrg()),
        );
        let weighted_unbiased_decayed = decayed(
            Some(decayed_c_weighted_unbiased(gap, lipschitz, sigma, lambda)?),
            Some(decayed_factor_weighted_unbiased(lambda)?),
        );
        let biased_decayed = decayed(
            decayed_c_biased(gap, lipschitz, sigma, lambda).ok(),
            decayed_factor_biased(lambda).ok(),
        );

        // The scaled-svrg fixed-step forms use exponent α directly, the
        // λ-weighted families use a·α.
        let eta_svrg = 1.0 / (3.0 * lipschitz * (n as f64).powf(alpha));
        let eta_weighted = fixed_step(lipschitz, n, a, alpha);
        let length = |rule: InnerLengthRule, lam: f64| {
            default_inner_length(rule, n, a, b, alpha, lam).map_err(|_| {
                TheoryError::LambdaDomain {
                    context: "the recommended inner length",
                    domain: "[0, 1)",
                    value: lam,
                }
            })
        };

        let m_svrg = length(InnerLengthRule::Svrg, 0.0)?;
        let scaled_svrg_fixed = FixedFamilyReport {
            eta: eta_svrg,
            beta,
            inner_length: m_svrg,
            recursion: lyapunov_recursion(
                RecursionFamily::ScaledSvrg,
                eta_svrg,
                beta,
                lipschitz,
                0.0,
                m_svrg,
            )?,
            gamma_lower_bound: gamma_lower_bound(
                RecursionFamily::ScaledSvrg,
                n,
                a,
                b,
                alpha,
                lipschitz,
                0.0,
                nu,
            ),
            bound_from_gamma: None,
            closed_form_bound: Some(fixed_bound_closed_scaled_svrg(
                gap,
                total_steps,
                n,
                alpha,
                lipschitz,
                nu,
            )),
            reconstructed: true,
        };

        let m_unbiased = length(InnerLengthRule::Unbiased, lambda)?;
        let weighted_unbiased_fixed = FixedFamilyReport {
            eta: eta_weighted,
            beta,
            inner_length: m_unbiased,
            recursion: lyapunov_recursion(
                RecursionFamily::WeightedUnbiased,
                eta_weighted,
                beta,
                lipschitz,
                lambda,
                m_unbiased,
            )?,
            gamma_lower_bound: gamma_lower_bound(
                RecursionFamily::WeightedUnbiased,
                n,
                a,
                b,
                alpha,
                lipschitz,
                lambda,
                nu,
            ),
            bound_from_gamma: None,
            closed_form_bound: fixed_bound_closed_weighted_unbiased(
                gap,
                total_steps,
                n,
                a,
                b,
                alpha,
                lipschitz,
                lambda,
                nu,
            )
            .ok(),
            reconstructed: false,
        };

        let m_biased = length(InnerLengthRule::Biased, lambda)?;
        let biased_fixed = FixedFamilyReport {
            eta: eta_weighted,
            beta,
            inner_length: m_biased,
            recursion: lyapunov_recursion(
                RecursionFamily::Biased,
                eta_weighted,
                beta,
                lipschitz,
                lambda,
                m_biased,
            )?,
            gamma_lower_bound: gamma_lower_bound(
                RecursionFamily::Biased,
                n,
                a,
                b,
                alpha,
                lipschitz,
                lambda,
                nu,
            ),
            bound_from_gamma: None,
            closed_form_bound: fixed_bound_closed_biased(
                gap,
                total_steps,
                n,
                a,
                b,
                alpha,
                lipschitz,
                lambda,
                nu,
            )
            .ok(),
            reconstructed: false,
        };

        let finish = |mut report: FixedFamilyReport| {
            report.bound_from_gamma =
                fixed_bound_from_gamma(gap, total_steps, report.recursion.gamma);
            report
        };

        let mut notes = vec![
            "universal constants nu, nu1, nu2, nu_tilde are unspecified; they default to 1 and scale their bounds linearly".to_string(),
            "scaled-svrg fixed-regime beta and gamma lower bound are reconstructed by specializing the lambda-weighted family pattern at lambda = 1/2; figures derived from them carry the reconstructed marker".to_string(),
            "the biased fixed-regime admissible interval is empty whenever 4*n^((2a-b)*alpha) >= 1, which includes a = 1, b = 2".to_string(),
        ];
        if inputs.beta.is_some() {
            notes.push(format!(
                "beta = {beta} was supplied explicitly and overrides the prescribed L/n^(b*alpha)"
            ));
        }

        Ok(TheoryReport {
            inputs: inputs.clone(),
            epsilon,
            decayed_base: base,
            scaled_svrg_decayed,
            weighted_unbiased_decayed,
            biased_decayed,
            scaled_svrg_fixed: finish(scaled_svrg_fixed),
            weighted_unbiased_fixed: finish(weighted_unbiased_fixed),
            biased_fixed: finish(biased_fixed),
            hybrid_c: hybrid_c_from_constants(gap, lipschitz, sigma),
            hybrid_bound: hybrid_bound(gap, lipschitz, sigma, total_steps, n, a, b, alpha, nu),
            admissible: AdmissibleTable {
                unbiased_decayed: admissible_lambda(
                    WeightedFamily::Unbiased,
                    Branch::Decayed,
                    n,
                    a,
                    b,
                    alpha,
                ),
                unbiased_fixed: admissible_lambda(
                    WeightedFamily::Unbiased,
                    Branch::Fixed,
                    n,
                    a,
                    b,
                    alpha,
                ),
                biased_decayed: admissible_lambda(
                    WeightedFamily::Biased,
                    Branch::Decayed,
                    n,
                    a,
                    b,
                    alpha,
                ),
                biased_fixed: admissible_lambda(
                    WeightedFamily::Biased,
                    Branch::Fixed,
                    n,
                    a,
                    b,
                    alpha,
                ),
            },
            factor_optima: lambda_factor_optima(),
            ifo: match epsilon {
                Some(eps) => Some(ifo_complexity(n, eps)?),
                None => None,
            },
            notes,
        })
    }

    /// Render the report as plain text.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let i = &self.inputs;
        let _ = writeln!(out, "theory report");
        let _ = writeln!(out, "=============");
        let _ = writeln!(
            out,
            "inputs: n = {}, L = {}, sigma = {}, gap = {}, T = {}, lambda = {}",
            i.n, i.lipschitz, i.sigma, i.gap, i.total_steps, i.lambda
        );
        let _ = writeln!(
            out,
            "        a = {}, b = {}, alpha = {}, beta = {:.6e}",
            i.a,
            i.b,
            i.alpha,
            i.effective_beta()
        );
        let _ = writeln!(
            out,
            "        nu = {}, nu1 = {}, nu2 = {}, nu_tilde = {}",
            i.nu.nu, i.nu.nu1, i.nu.nu2, i.nu.nu_tilde
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "decayed-step regime");
        let _ = writeln!(out, "  base rate sqrt(2*gap*L/T)*sigma = {:.6e}", self.decayed_base);
        let opt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.6e}"),
            None => "undefined".to_string(),
        };
        for (name, fam) in [
            ("scaled-svrg      ", &self.scaled_svrg_decayed),
            ("weighted-unbiased", &self.weighted_unbiased_decayed),
            ("biased           ", &self.biased_decayed),
        ] {
            let _ = writeln!(
                out,
                "  {name}: c = {}, factor = {}, bound = {}",
                opt(fam.c),
                opt(fam.factor),
                opt(fam.bound)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "fixed-step regime");
        for (name, fam) in [
            ("scaled-svrg      ", &self.scaled_svrg_fixed),
            ("weighted-unbiased", &self.weighted_unbiased_fixed),
            ("biased           ", &self.biased_fixed),
        ] {
            let flag = if fam.reconstructed {
                " [reconstructed]"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  {name}: eta = {:.6e}, beta = {:.6e}, m = {}",
                fam.eta, fam.beta, fam.inner_length
            );
            let _ = writeln!(
                out,
                "    recursion gamma = {:.6e} (positive: {})",
                fam.recursion.gamma, fam.recursion.positive
            );
            let _ = writeln!(
                out,
                "    gamma lower bound{flag} = {:.6e}",
                fam.gamma_lower_bound
            );
            let _ = writeln!(
                out,
                "    bound from gamma = {}, closed-form bound{flag} = {}",
                opt(fam.bound_from_gamma),
                opt(fam.closed_form_bound)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "hybrid switch");
        let _ = writeln!(out, "  default decay scale c = {:.6e}", self.hybrid_c);
        let _ = writeln!(out, "  two-term bound = {:.6e}", self.hybrid_bound);
        let _ = writeln!(out);
        let _ = writeln!(out, "admissible lambda");
        let show = |label: &str, adm: &AdmissibleLambda, out: &mut String| {
            let text = match (&adm.interval, &adm.optimum) {
                (Some(interval), Some(optimum)) => {
                    let lo_bracket = if interval.lo_closed { "[" } else { "(" };
                    let hi_bracket = if interval.hi_closed { "]" } else { ")" };
                    let opt_text = match optimum {
                        LambdaOptimum::Attained(v) => format!("optimum {v:.6} (attained)"),
                        LambdaOptimum::InfimumOnly(v) => {
                            format!("optimum {v:.6} (infimum, not attained)")
                        }
                    };
                    format!(
                        "{lo_bracket}{:.6}, {:.6}{hi_bracket}, {opt_text}",
                        interval.lo, interval.hi
                    )
                }
                _ => "empty".to_string(),
            };
            let _ = writeln!(out, "  {label}: {text}");
        };
        show("weighted-unbiased, decayed steps", &self.admissible.unbiased_decayed, &mut out);
        show("weighted-unbiased, fixed steps  ", &self.admissible.unbiased_fixed, &mut out);
        show("biased, decayed steps           ", &self.admissible.biased_decayed, &mut out);
        show("biased, fixed steps             ", &self.admissible.biased_fixed, &mut out);
        let fo = &self.factor_optima;
        let _ = writeln!(
            out,
            "  factor minima on a 1e-4 grid: weighted-unbiased {:.6} at lambda = {:.6}, biased {:.6} at lambda = {:.6}",
            fo.unbiased_min, fo.unbiased_argmin, fo.biased_min, fo.biased_argmin
        );
        if let Some(ifo) = &self.ifo {
            let _ = writeln!(out);
            let regime = match ifo.regime {
                IfoRegime::EpsilonSquared => "1/eps^2",
                IfoRegime::SampleScaled => "n^(1/5)/eps",
                IfoRegime::Boundary => "boundary (both terms equal)",
            };
            let _ = writeln!(
                out,
                "oracle complexity at eps = {}: min(1/eps^2, n^(1/5)/eps) = {:.6e} via {regime}",
                self.epsilon.expect("ifo implies epsilon"),
                ifo.value
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "notes");
        for note in &self.notes {
            let _ = writeln!(out, "  - {note}");
        }
        out
    }
}
