//! Built-in finite-sum test problems, empirical smoothness/gradient-bound
//! estimation, and a finite-difference gradient checker.
//!
//! Four families are provided:
//!
//! * [`QuadraticSum`] — averages of shifted quadratics with known curvature,
//!   minimizer, and optimal value (the convex sanity case),
//! * sigmoid regression — squared error on logistic outputs, nonconvex,
//! * logistic loss with a nonconvex bounded regularizer,
//! * a one-hidden-layer tanh network with squared error on synthetic data.
//!
//! Data generation is a pure function of the [`ProblemRecipe`]: identical
//! recipes produce bit-identical problems. Stochastic families plant a known
//! parameter vector, generate features from a seeded normal, and derive
//! labels/targets from the planted vector (plus label noise), so experiments
//! can report distance-to-plant.

use crate::oracle::FiniteSumProblem;
use crate::vector::ParamVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Which built-in family a recipe describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemFamily {
    QuadraticSum,
    SigmoidRegression,
    NonconvexRegularizedLogistic,
    TinyMlp,
}

/// A deterministic description of a built-in problem instance.
///
/// Family-specific fields are ignored by the other families:
/// `lipschitz_target` shapes the quadratic curvature, `reg_weight` scales the
/// logistic family's nonconvex regularizer, and `hidden_width` sizes the
/// network. `data_scale` multiplies all generated features, shifts, and
/// network inputs. For `TinyMlp`, `d` is the *input* dimension; the
/// optimization dimension is `hidden_width·(d + 2) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecipe {
    pub family: ProblemFamily,
    /// Number of components n.
    pub n: usize,
    /// Data dimension d (input dimension for the network family).
    pub d: usize,
    /// Seed for all generation randomness.
    pub seed: u64,
    /// Scale applied to generated features / shifts / inputs.
    #[serde(default = "default_data_scale")]
    pub data_scale: f64,
    /// Curvature ceiling for the quadratic family (its exact smoothness).
    #[serde(default = "default_lipschitz_target")]
    pub lipschitz_target: f64,
    /// Weight of the bounded nonconvex regularizer (logistic family).
    #[serde(default = "default_reg_weight")]
    pub reg_weight: f64,
    /// Hidden-layer width (network family).
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
}

fn default_data_scale() -> f64 {
    1.0
}
fn default_lipschitz_target() -> f64 {
    1.0
}
fn default_reg_weight() -> f64 {
    0.1
}
fn default_hidden_width() -> usize {
    8
}

impl ProblemRecipe {
    /// A recipe with the default family-specific parameters.
    pub fn new(family: ProblemFamily, n: usize, d: usize, seed: u64) -> ProblemRecipe {
        ProblemRecipe {
            family,
            n,
            d,
            seed,
            data_scale: default_data_scale(),
            lipschitz_target: default_lipschitz_target(),
            reg_weight: default_reg_weight(),
            hidden_width: default_hidden_width(),
        }
    }
}

/// Errors from recipe validation and explicit construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecipeError {
    #[error("{name} must be at least 1")]
    ZeroCount { name: &'static str },
    #[error("{name} must be positive and finite, got {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("component {index} has dimension {actual}, expected {expected}")]
    ShapeMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("curvature entries must be non-negative and finite")]
    BadCurvature,
}

// ---------------------------------------------------------------------------
// QuadraticSum
// ---------------------------------------------------------------------------

/// `f_i(x) = ½ (x − b_i)ᵀ A_i (x − b_i)` with diagonal positive semi-definite
/// `A_i`. Curvature, minimizer, and optimal value are known in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSum {
    /// Diagonal of `A_i`, one row per component.
    curvature: Vec<Vec<f64>>,
    /// Shift `b_i`, one row per component.
    shift: Vec<Vec<f64>>,
    lipschitz: f64,
    minimizer: ParamVector,
    optimal_value: f64,
}

impl QuadraticSum {
    /// Build from explicit diagonals and shifts. The smoothness constant is
    /// the largest curvature entry.
    pub fn from_components(
        curvature: Vec<Vec<f64>>,
        shift: Vec<Vec<f64>>,
    ) -> Result<QuadraticSum, RecipeError> {
        if curvature.is_empty() || curvature.len() != shift.len() {
            return Err(RecipeError::ZeroCount { name: "n" });
        }
        let d = curvature[0].len();
        if d == 0 {
            return Err(RecipeError::ZeroCount { name: "d" });
        }
        for (index, (a, b)) in curvature.iter().zip(&shift).enumerate() {
            for got in [a.len(), b.len()] {
                if got != d {
                    return Err(RecipeError::ShapeMismatch {
                        index,
                        expected: d,
                        actual: got,
                    });
                }
            }
            if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(RecipeError::BadCurvature);
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(RecipeError::BadParameter {
                    name: "shift",
                    value: f64::NAN,
                });
            }
        }
        let lipschitz = curvature
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(0.0f64, f64::max);
        let (minimizer, optimal_value) = Self::solve(&curvature, &shift);
        Ok(QuadraticSum {
            curvature,
            shift,
            lipschitz,
            minimizer,
            optimal_value,
        })
    }

    /// Per-coordinate weighted mean of the shifts: `Σ_i a_ij·b_ij / Σ_i a_ij`
    /// (a coordinate with zero total curvature is flat; its minimizer entry
    /// is 0).
    fn solve(curvature: &[Vec<f64>], shift: &[Vec<f64>]) -> (ParamVector, f64) {
        let n = curvature.len();
        let d = curvature[0].len();
        let mut point = vec![0.0; d];
        for j in 0..d {
            let total: f64 = (0..n).map(|i| curvature[i][j]).sum();
            if total > 0.0 {
                let weighted: f64 = (0..n).map(|i| curvature[i][j] * shift[i][j]).sum();
                point[j] = weighted / total;
            }
        }
        let mut value = 0.0;
        for i in 0..n {
            let mut fi = 0.0;
            for j in 0..d {
                let r = point[j] - shift[i][j];
                fi += 0.5 * curvature[i][j] * r * r;
            }
            value += fi;
        }
        (ParamVector::new(point), value / n as f64)
    }

    fn generate(recipe: &ProblemRecipe) -> Result<QuadraticSum, RecipeError> {
        let l = recipe.lipschitz_target;
        if !(l.is_finite() && l > 0.0) {
            return Err(RecipeError::BadParameter {
                name: "lipschitz_target",
                value: l,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
        let mut curvature = Vec::with_capacity(recipe.n);
        let mut shift = Vec::with_capacity(recipe.n);
        for _ in 0..recipe.n {
            let a: Vec<f64> = (0..recipe.d).map(|_| rng.gen_range(0.5 * l..=l)).collect();
            let b: Vec<f64> = (0..recipe.d)
                .map(|_| recipe.data_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            curvature.push(a);
            shift.push(b);
        }
        // Pin the largest curvature so the smoothness constant is exactly the
        // requested target.
        curvature[0][0] = l;
        Self::from_components(curvature, shift)
    }
}

impl FiniteSumProblem for QuadraticSum {
    fn num_components(&self) -> usize {
        self.curvature.len()
    }

    fn dim(&self) -> usize {
        self.curvature[0].len()
    }

    fn component_value(&self, index: usize, x: &ParamVector) -> f64 {
        let mut v = 0.0;
        for j in 0..self.dim() {
            let r = x[j] - self.shift[index][j];
            v += 0.5 * self.curvature[index][j] * r * r;
        }
        v
    }

    fn component_gradient(&self, index: usize, x: &ParamVector) -> ParamVector {
        let mut g = vec![0.0; self.dim()];
        for (j, out) in g.iter_mut().enumerate() {
            *out = self.curvature[index][j] * (x[j] - self.shift[index][j]);
        }
        ParamVector::new(g)
    }

    fn lipschitz_constant(&self) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimal_value)
    }

    fn minimizer(&self) -> Option<ParamVector> {
        Some(self.minimizer.clone())
    }
}

// ---------------------------------------------------------------------------
// SigmoidRegression
// ---------------------------------------------------------------------------

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eᵘ)` without overflow for large `u`.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `f_i(x) = (s(a_iᵀx) − y_i)²` with logistic `s` and labels `y_i ∈ {0, 1}`
/// drawn from a planted parameter vector. Nonconvex; gradients are globally
/// bounded by `max_i ‖a_i‖ / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidRegression {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    planted: ParamVector,
    grad_bound: f64,
}

impl SigmoidRegression {
    fn generate(recipe: &ProblemRecipe) -> SigmoidRegression {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
        let scale = 1.0 / (recipe.d as f64).sqrt();
        let planted = ParamVector::new(
            (0..recipe.d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let mut features = Vec::with_capacity(recipe.n);
        let mut labels = Vec::with_capacity(recipe.n);
        for _ in 0..recipe.n {
            let a: Vec<f64> = (0..recipe.d)
                .map(|_| recipe.data_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let z: f64 = a.iter().zip(planted.as_slice()).map(|(u, v)| u * v).sum();
            let y = if rng.gen::<f64>() < sigmoid(z) { 1.0 } else { 0.0 };
            features.push(a);
            labels.push(y);
        }
        let grad_bound = features
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt() / 2.0)
            .fold(0.0f64, f64::max);
        SigmoidRegression {
            features,
            labels,
            planted,
            grad_bound,
        }
    }

    pub fn planted_parameter(&self) -> &ParamVector {
        &self.planted
    }
}

impl FiniteSumProblem for SigmoidRegression {
    fn num_components(&self) -> usize {
        self.features.len()
    }

    fn dim(&self) -> usize {
        self.planted.dim()
    }

    fn component_value(&self, index: usize, x: &ParamVector) -> f64 {
        let z: f64 = self.features[index]
            .iter()
            .zip(x.as_slice())
            .map(|(a, v)| a * v)
            .sum();
        let r = sigmoid(z) - self.labels[index];
        r * r
    }

    fn component_gradient(&self, index: usize, x: &ParamVector) -> ParamVector {
        let z: f64 = self.features[index]
            .iter()
            .zip(x.as_slice())
            .map(|(a, v)| a * v)
            .sum();
        let s = sigmoid(z);
        let factor = 2.0 * (s - self.labels[index]) * s * (1.0 - s);
        ParamVector::new(self.features[index].iter().map(|a| factor * a).collect())
    }

    fn gradient_norm_bound(&self) -> Option<f64> {
        Some(self.grad_bound)
    }
}

// ---------------------------------------------------------------------------
// NonconvexRegularizedLogistic
// ---------------------------------------------------------------------------

/// `f_i(x) = ln(1 + exp(−ỹ_i·a_iᵀx)) + α·Σ_j x_j²/(1 + x_j²)` with labels
/// `ỹ_i ∈ {−1, +1}`. The regularizer is bounded and nonconvex; the whole
/// component is smooth with globally bounded gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexRegularizedLogistic {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    reg_weight: f64,
    planted: ParamVector,
    grad_bound: f64,
}

impl NonconvexRegularizedLogistic {
    fn generate(recipe: &ProblemRecipe) -> Result<NonconvexRegularizedLogistic, RecipeError> {
        if !(recipe.reg_weight.is_finite() && recipe.reg_weight >= 0.0) {
            return Err(RecipeError::NegativeParameter {
                name: "reg_weight",
                value: recipe.reg_weight,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
        let scale = 1.0 / (recipe.d as f64).sqrt();
        let planted = ParamVector::new(
            (0..recipe.d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let mut features = Vec::with_capacity(recipe.n);
        let mut labels = Vec::with_capacity(recipe.n);
        for _ in 0..recipe.n {
            let a: Vec<f64> = (0..recipe.d)
                .map(|_| recipe.data_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let z: f64 = a.iter().zip(planted.as_slice()).map(|(u, v)| u * v).sum();
            let y = if rng.gen::<f64>() < sigmoid(z) { 1.0 } else { -1.0 };
            features.push(a);
            labels.push(y);
        }
        // ‖∇ loss_i‖ ≤ ‖a_i‖; each regularizer coordinate slope is at most
        // 9/(8√3), attained at x_j = 1/√3.
        let reg_slope = 9.0 / (8.0 * 3.0f64.sqrt());
        let grad_bound = features
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max)
            + recipe.reg_weight * reg_slope * (recipe.d as f64).sqrt();
        Ok(NonconvexRegularizedLogistic {
            features,
            labels,
            reg_weight: recipe.reg_weight,
            planted,
            grad_bound,
        })
    }

    pub fn planted_parameter(&self) -> &ParamVector {
        &self.planted
    }
}

impl FiniteSumProblem for NonconvexRegularizedLogistic {
    fn num_components(&self) -> usize {
        self.features.len()
    }

    fn dim(&self) -> usize {
        self.planted.dim()
    }

    fn component_value(&self, index: usize, x: &ParamVector) -> f64 {
        let z: f64 = self.features[index]
            .iter()
            .zip(x.as_slice())
            .map(|(a, v)| a * v)
            .sum();
        let loss = softplus(-self.labels[index] * z);
        let reg: f64 = x
            .as_slice()
            .iter()
            .map(|&v| v * v / (1.0 + v * v))
            .sum();
        loss + self.reg_weight * reg
    }

    fn component_gradient(&self, index: usize, x: &ParamVector) -> ParamVector {
        let y = self.labels[index];
        let z: f64 = self.features[index]
            .iter()
            .zip(x.as_slice())
            .map(|(a, v)| a * v)
            .sum();
        let loss_slope = -y * sigmoid(-y * z);
        let g: Vec<f64> = self.features[index]
            .iter()
            .zip(x.as_slice())
            .map(|(a, &v)| {
                let q = 1.0 + v * v;
                loss_slope * a + self.reg_weight * 2.0 * v / (q * q)
            })
            .collect();
        ParamVector::new(g)
    }

    fn gradient_norm_bound(&self) -> Option<f64> {
        Some(self.grad_bound)
    }
}

// ---------------------------------------------------------------------------
// TinyMlp
// ---------------------------------------------------------------------------

/// One hidden tanh layer with a scalar output and squared error per sample.
///
/// The optimization variable packs `[W₁ row-major, b₁, w₂, b₂]`, so its
/// dimension is `h·(d + 2) + 1` for input dimension `d` and width `h`.
/// Targets come from a planted network of the same shape plus noise of
/// standard deviation 0.05.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlp {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    input_dim: usize,
    hidden_width: usize,
    planted: ParamVector,
}

impl TinyMlp {
    fn generate(recipe: &ProblemRecipe) -> Result<TinyMlp, RecipeError> {
        if recipe.hidden_width == 0 {
            return Err(RecipeError::ZeroCount {
                name: "hidden_width",
            });
        }
        let (d, h) = (recipe.d, recipe.hidden_width);
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
        let param_dim = h * (d + 2) + 1;
        let mut planted = Vec::with_capacity(param_dim);
        let w1_scale = 1.0 / (d as f64).sqrt();
        let w2_scale = 1.0 / (h as f64).sqrt();
        for _ in 0..h * d {
            planted.push(w1_scale * rng.sample::<f64, _>(StandardNormal));
        }
        for _ in 0..h {
            planted.push(0.1 * rng.sample::<f64, _>(StandardNormal));
        }
        for _ in 0..h {
            planted.push(w2_scale * rng.sample::<f64, _>(StandardNormal));
        }
        planted.push(0.1 * rng.sample::<f64, _>(StandardNormal));
        let planted = ParamVector::new(planted);

        let mut inputs = Vec::with_capacity(recipe.n);
        let mut targets = Vec::with_capacity(recipe.n);
        for _ in 0..recipe.n {
            let u: Vec<f64> = (0..d)
                .map(|_| recipe.data_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let clean = Self::forward(planted.as_slice(), &u, d, h).0;
            let noise: f64 = rng.sample(StandardNormal);
            inputs.push(u);
            targets.push(clean + 0.05 * noise);
        }
        Ok(TinyMlp {
            inputs,
            targets,
            input_dim: d,
            hidden_width: h,
            planted,
        })
    }

    /// Network output and hidden activations for parameters `theta`.
    fn forward(theta: &[f64], input: &[f64], d: usize, h: usize) -> (f64, Vec<f64>) {
        let (w1, rest) = theta.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let mut hidden = Vec::with_capacity(h);
        for k in 0..h {
            let z: f64 = w1[k * d..(k + 1) * d]
                .iter()
                .zip(input)
                .map(|(w, u)| w * u)
                .sum::<f64>()
                + b1[k];
            hidden.push(z.tanh());
        }
        let out: f64 = hidden.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>() + b2[0];
        (out, hidden)
    }

    pub fn planted_parameter(&self) -> &ParamVector {
        &self.planted
    }
}

impl FiniteSumProblem for TinyMlp {
    fn num_components(&self) -> usize {
        self.inputs.len()
    }

    fn dim(&self) -> usize {
        self.hidden_width * (self.input_dim + 2) + 1
    }

    fn component_value(&self, index: usize, x: &ParamVector) -> f64 {
        let (out, _) = Self::forward(
            x.as_slice(),
            &self.inputs[index],
            self.input_dim,
            self.hidden_width,
        );
        let r = out - self.targets[index];
        r * r
    }

    fn component_gradient(&self, index: usize, x: &ParamVector) -> ParamVector {
        let (d, h) = (self.input_dim, self.hidden_width);
        let input = &self.inputs[index];
        let (out, hidden) = Self::forward(x.as_slice(), input, d, h);
        let theta = x.as_slice();
        let w2 = &theta[h * d + h..h * d + 2 * h];

        let dout = 2.0 * (out - self.targets[index]);
        let mut g = vec![0.0; self.dim()];
        let (gw1, rest) = g.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        gb2[0] = dout;
        for k in 0..h {
            gw2[k] = dout * hidden[k];
            let dz = dout * w2[k] * (1.0 - hidden[k] * hidden[k]);
            gb1[k] = dz;
            for (slot, u) in gw1[k * d..(k + 1) * d].iter_mut().zip(input) {
                *slot = dz * u;
            }
        }
        ParamVector::new(g)
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// A constructed built-in problem.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinProblem {
    Quadratic(QuadraticSum),
    Sigmoid(SigmoidRegression),
    Logistic(NonconvexRegularizedLogistic),
    Mlp(TinyMlp),
}

impl BuiltinProblem {
    fn inner(&self) -> &dyn FiniteSumProblem {
        match self {
            BuiltinProblem::Quadratic(p) => p,
            BuiltinProblem::Sigmoid(p) => p,
            BuiltinProblem::Logistic(p) => p,
            BuiltinProblem::Mlp(p) => p,
        }
    }

    /// The planted parameter vector, for the families that have one.
    pub fn planted_parameter(&self) -> Option<&ParamVector> {
        match self {
            BuiltinProblem::Quadratic(_) => None,
            BuiltinProblem::Sigmoid(p) => Some(p.planted_parameter()),
            BuiltinProblem::Logistic(p) => Some(p.planted_parameter()),
            BuiltinProblem::Mlp(p) => Some(p.planted_parameter()),
        }
    }
}

impl FiniteSumProblem for BuiltinProblem {
    fn num_components(&self) -> usize {
        self.inner().num_components()
    }
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn component_value(&self, index: usize, x: &ParamVector) -> f64 {
        self.inner().component_value(index, x)
    }
    fn component_gradient(&self, index: usize, x: &ParamVector) -> ParamVector {
        self.inner().component_gradient(index, x)
    }
    fn lipschitz_constant(&self) -> Option<f64> {
        self.inner().lipschitz_constant()
    }
    fn gradient_norm_bound(&self) -> Option<f64> {
        self.inner().gradient_norm_bound()
    }
    fn optimal_value(&self) -> Option<f64> {
        self.inner().optimal_value()
    }
    fn minimizer(&self) -> Option<ParamVector> {
        self.inner().minimizer()
    }
}

/// Construct the problem a recipe describes. Pure in the recipe: identical
/// recipes give bit-identical problems.
pub fn make_problem(recipe: &ProblemRecipe) -> Result<BuiltinProblem, RecipeError> {
    if recipe.n == 0 {
        return Err(RecipeError::ZeroCount { name: "n" });
    }
    if recipe.d == 0 {
        return Err(RecipeError::ZeroCount { name: "d" });
    }
    if !(recipe.data_scale.is_finite() && recipe.data_scale > 0.0) {
        return Err(RecipeError::BadParameter {
            name: "data_scale",
            value: recipe.data_scale,
        });
    }
    Ok(match recipe.family {
        ProblemFamily::QuadraticSum => BuiltinProblem::Quadratic(QuadraticSum::generate(recipe)?),
        ProblemFamily::SigmoidRegression => {
            BuiltinProblem::Sigmoid(SigmoidRegression::generate(recipe))
        }
        ProblemFamily::NonconvexRegularizedLogistic => {
            BuiltinProblem::Logistic(NonconvexRegularizedLogistic::generate(recipe)?)
        }
        ProblemFamily::TinyMlp => BuiltinProblem::Mlp(TinyMlp::generate(recipe)?),
    })
}

// ---------------------------------------------------------------------------
// Empirical estimation and gradient checking
// ---------------------------------------------------------------------------

/// A point drawn uniformly from the ball of the given radius.
fn ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> ParamVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
            return ParamVector::new(v.into_iter().map(|x| x * r / norm).collect());
        }
    }
}

/// Empirical smoothness estimate: the largest secant slope
/// `‖∇f_i(x) − ∇f_i(y)‖ / ‖x − y‖` over `num_pairs` sampled
/// (component, point-pair) triples, with both points drawn from the ball of
/// the given radius. A lower estimate of the true constant; non-decreasing
/// in `num_pairs` for a fixed seed because pairs are drawn from one stream
/// in order.
///
/// Panics if `num_pairs` is zero or `radius` is not positive.
pub fn estimate_lipschitz<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    num_pairs: usize,
    radius: f64,
    seed: u64,
) -> f64 {
    assert!(num_pairs >= 1, "num_pairs must be at least 1");
    assert!(
        radius.is_finite() && radius > 0.0,
        "radius must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = problem.dim();
    let n = problem.num_components();
    let mut best = 0.0f64;
    for _ in 0..num_pairs {
        let (i, x, y, dist) = loop {
            let i = rng.gen_range(0..n);
            let x = ball_point(&mut rng, dim, radius);
            let y = ball_point(&mut rng, dim, radius);
            let mut diff = x.clone();
            diff.axpy(-1.0, &y);
            let dist = diff.norm();
            if dist > 0.0 {
                break (i, x, y, dist);
            }
        };
        let gx = problem.component_gradient(i, &x);
        let mut gy = problem.component_gradient(i, &y);
        gy.axpy(-1.0, &gx);
        best = best.max(gy.norm() / dist);
    }
    best
}

/// Empirical gradient-norm bound: the largest `‖∇f_i(x)‖` over all
/// components and the given evaluation points.
///
/// Panics if `points` is empty.
pub fn estimate_sigma<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    points: &[ParamVector],
) -> f64 {
    assert!(!points.is_empty(), "points must be non-empty");
    let mut best = 0.0f64;
    for x in points {
        for i in 0..problem.num_components() {
            best = best.max(problem.component_gradient(i, x).norm());
        }
    }
    best
}

/// Largest relative error, over components and coordinates, between the
/// analytic gradient and the central difference with stencil width `h`.
/// Relative error is measured against `max(1, |analytic|)`.
///
/// Panics if `h` is not positive.
pub fn finite_diff_check<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &ParamVector,
    h: f64,
) -> f64 {
    assert!(h.is_finite() && h > 0.0, "h must be positive");
    let dim = problem.dim();
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..problem.num_components() {
        let g = problem.component_gradient(i, x);
        for j in 0..dim {
            let original = probe[j];
            probe[j] = original + h;
            let plus = problem.component_value(i, &probe);
            probe[j] = original - h;
            let minus = problem.component_value(i, &probe);
            probe[j] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (numeric - g[j]).abs() / g[j].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{IfoLedger, LedgerChannel};
    use crate::oracle::{grad_sq_norm, objective_value};

    fn all_family_recipes() -> Vec<ProblemRecipe> {
        vec![
            ProblemRecipe::new(ProblemFamily::QuadraticSum, 6, 3, 11),
            ProblemRecipe::new(ProblemFamily::SigmoidRegression, 6, 3, 12),
            ProblemRecipe::new(ProblemFamily::NonconvexRegularizedLogistic, 6, 3, 13),
            ProblemRecipe {
                hidden_width: 3,
                ..ProblemRecipe::new(ProblemFamily::TinyMlp, 5, 4, 14)
            },
        ]
    }

    #[test]
    fn two_shifted_parabolas_have_known_solution() {
        let p = QuadraticSum::from_components(
            vec![vec![1.0], vec![1.0]],
            vec![vec![-1.0], vec![1.0]],
        )
        .unwrap();
        assert_eq!(p.lipschitz_constant(), Some(1.0));
        let m = p.minimizer().unwrap();
        assert_eq!(m[0], 0.0);
        assert_eq!(p.optimal_value(), Some(0.5));
        let mut ledger = IfoLedger::new();
        let gsq = grad_sq_norm(&p, &m, &mut ledger).unwrap();
        assert!(gsq <= 1e-18);
    }

    #[test]
    fn generated_quadratic_exposes_exact_metadata() {
        let recipe = ProblemRecipe {
            lipschitz_target: 5.0,
            ..ProblemRecipe::new(ProblemFamily::QuadraticSum, 8, 3, 42)
        };
        let p = make_problem(&recipe).unwrap();
        assert_eq!(p.lipschitz_constant(), Some(5.0));
        let m = p.minimizer().unwrap();
        let mut ledger = IfoLedger::new();
        assert!(grad_sq_norm(&p, &m, &mut ledger).unwrap() <= 1e-18);
        // The optimal value is a true lower bound nearby.
        let f_star = p.optimal_value().unwrap();
        for shift in [0.01, -0.02, 0.1] {
            let mut x = m.clone();
            x[0] += shift;
            assert!(objective_value(&p, &x, &mut ledger, LedgerChannel::Evaluation).unwrap() >= f_star);
        }
    }

    #[test]
    fn quadratic_secant_estimate_stays_within_curvature_bounds() {
        let recipe = ProblemRecipe::new(ProblemFamily::QuadraticSum, 10, 4, 3);
        let p = make_problem(&recipe).unwrap();
        let est = estimate_lipschitz(&p, 400, 1.0, 7);
        // Diagonal entries live in [L/2, L], so every secant slope does too.
        assert!(est >= 0.5 && est <= 1.0 + 1e-9, "estimate {est}");
    }

    #[test]
    fn sigmoid_objective_at_origin_is_one_quarter() {
        for seed in [0, 1, 99] {
            let recipe = ProblemRecipe::new(ProblemFamily::SigmoidRegression, 17, 5, seed);
            let p = make_problem(&recipe).unwrap();
            let mut ledger = IfoLedger::new();
            let f0 = objective_value(&p, &ParamVector::zeros(5), &mut ledger, LedgerChannel::Evaluation).unwrap();
            assert_eq!(f0, 0.25);
        }
    }

    #[test]
    fn identical_recipes_are_bit_identical() {
        for recipe in all_family_recipes() {
            let p1 = make_problem(&recipe).unwrap();
            let p2 = make_problem(&recipe).unwrap();
            let dim = p1.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed ^ 0xabcd);
            let mut ledger = IfoLedger::new();
            for _ in 0..100 {
                let x = ParamVector::new(
                    (0..dim)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
                let v1 = objective_value(&p1, &x, &mut ledger, LedgerChannel::Evaluation).unwrap();
                let v2 = objective_value(&p2, &x, &mut ledger, LedgerChannel::Evaluation).unwrap();
                assert!(v1 == v2, "family {:?}", recipe.family);
            }
        }
    }

    #[test]
    fn all_families_pass_the_gradient_check() {
        for recipe in all_family_recipes() {
            let p = make_problem(&recipe).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..5 {
                let x = ParamVector::new(
                    (0..p.dim())
                        .map(|_| 0.7 * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
                let err = finite_diff_check(&p, &x, 1e-5);
                assert!(err <= 1e-5, "family {:?}: err {err}", recipe.family);
            }
        }
    }

    #[test]
    fn gradient_check_is_near_exact_for_quadratics() {
        let recipe = ProblemRecipe::new(ProblemFamily::QuadraticSum, 4, 3, 5);
        let p = make_problem(&recipe).unwrap();
        let x = ParamVector::new(vec![0.3, -0.7, 1.1]);
        assert!(finite_diff_check(&p, &x, 1e-4) <= 1e-9);
    }

    #[test]
    fn gradient_check_is_exact_for_linear_components() {
        struct Linear;
        impl FiniteSumProblem for Linear {
            fn num_components(&self) -> usize {
                2
            }
            fn dim(&self) -> usize {
                2
            }
            fn component_value(&self, i: usize, x: &ParamVector) -> f64 {
                (i as f64 + 1.0) * (x[0] - 2.0 * x[1])
            }
            fn component_gradient(
                &self,
                i: usize,
                _x: &ParamVector,
            ) -> ParamVector {
                let c = i as f64 + 1.0;
                ParamVector::new(vec![c, -2.0 * c])
            }
        }
        let x = ParamVector::new(vec![0.25, -0.5]);
        assert!(finite_diff_check(&Linear, &x, 1e-3) <= 1e-12);
    }

    #[test]
    fn sigma_estimate_on_the_toy_pair() {
        let p = crate::oracle::test_support::ToyQuadratics;
        let points = [ParamVector::new(vec![1.0]), ParamVector::new(vec![2.0])];
        // max(|2·1|, |4·1|, |2·2|, |4·2|) = 8.
        assert_eq!(estimate_sigma(&p, &points), 8.0);
        // A superset of points can only grow the estimate.
        let more = [
            points[0].clone(),
            points[1].clone(),
            ParamVector::new(vec![-3.0]),
        ];
        assert!(estimate_sigma(&p, &more) >= 8.0);
        // At the common stationary point every component gradient vanishes.
        let origin = [ParamVector::zeros(1)];
        assert_eq!(estimate_sigma(&p, &origin), 0.0);
    }

    #[test]
    fn constant_components_have_zero_slope() {
        struct Constant;
        impl FiniteSumProblem for Constant {
            fn num_components(&self) -> usize {
                3
            }
            fn dim(&self) -> usize {
                2
            }
            fn component_value(&self, _: usize, _: &ParamVector) -> f64 {
                4.0
            }
            fn component_gradient(
                &self,
                _: usize,
                _: &ParamVector,
            ) -> ParamVector {
                ParamVector::zeros(2)
            }
        }
        assert_eq!(estimate_lipschitz(&Constant, 20, 1.0, 1), 0.0);
    }

    #[test]
    fn lipschitz_estimate_grows_with_more_pairs() {
        let recipe = ProblemRecipe::new(ProblemFamily::SigmoidRegression, 8, 3, 2);
        let p = make_problem(&recipe).unwrap();
        let few = estimate_lipschitz(&p, 10, 1.0, 9);
        let some = estimate_lipschitz(&p, 50, 1.0, 9);
        let many = estimate_lipschitz(&p, 250, 1.0, 9);
        assert!(few <= some && some <= many);
    }

    #[test]
    fn network_parameter_dimension() {
        let recipe = ProblemRecipe {
            hidden_width: 3,
            ..ProblemRecipe::new(ProblemFamily::TinyMlp, 5, 4, 1)
        };
        let p = make_problem(&recipe).unwrap();
        // h·(d + 2) + 1 = 3·6 + 1.
        assert_eq!(p.dim(), 19);
        assert_eq!(p.num_components(), 5);
        assert_eq!(p.planted_parameter().unwrap().dim(), 19);
    }

    #[test]
    fn recipes_reject_bad_parameters() {
        let base = ProblemRecipe::new(ProblemFamily::QuadraticSum, 4, 2, 0);
        assert!(make_problem(&ProblemRecipe { n: 0, ..base.clone() }).is_err());
        assert!(make_problem(&ProblemRecipe { d: 0, ..base.clone() }).is_err());
        assert!(make_problem(&ProblemRecipe {
            data_scale: 0.0,
            ..base.clone()
        })
        .is_err());
        assert!(make_problem(&ProblemRecipe {
            lipschitz_target: -1.0,
            ..base
        })
        .is_err());
        let mlp = ProblemRecipe::new(ProblemFamily::TinyMlp, 4, 2, 0);
        assert!(make_problem(&ProblemRecipe {
            hidden_width: 0,
            ..mlp
        })
        .is_err());
        let logi = ProblemRecipe::new(ProblemFamily::NonconvexRegularizedLogistic, 4, 2, 0);
        assert!(make_problem(&ProblemRecipe {
            reg_weight: -0.5,
            ..logi
        })
        .is_err());
    }

    #[test]
    fn gradient_norm_bounds_hold_empirically() {
        for recipe in [
            ProblemRecipe::new(ProblemFamily::SigmoidRegression, 6, 3, 21),
            ProblemRecipe::new(ProblemFamily::NonconvexRegularizedLogistic, 6, 3, 22),
        ] {
            let p = make_problem(&recipe).unwrap();
            let bound = p.gradient_norm_bound().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let points: Vec<ParamVector> = (0..20)
                .map(|_| {
                    ParamVector::new(
                        (0..p.dim())
                            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    )
                })
                .collect();
            let observed = estimate_sigma(&p, &points);
            assert!(
                observed <= bound + 1e-12,
                "family {:?}: {observed} > {bound}",
                recipe.family
            );
        }
    }
}
