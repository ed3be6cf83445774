//! Dense `f64` parameter vectors.
//!
//! Iterates, gradients, and estimator directions are all [`ParamVector`]s.
//! Vectors are expected to hold only finite coordinates at rest; operations
//! that can produce non-finite values (oracle sums, optimizer updates) check
//! and report instead of propagating NaNs silently.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A dense parameter vector with `f64` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Self {
        ParamVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    /// Standard-normal coordinates scaled by `scale`, from a dedicated
    /// counter-based stream. Useful as a named initializer.
    pub fn seeded_normal(dim: usize, scale: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        ParamVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += factor * other`, in place.
    pub fn axpy(&mut self, factor: f64, other: &ParamVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.0 {
            *a *= factor;
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }

    /// Largest absolute coordinate difference against `other`.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// Compensated (Kahan) scalar accumulator. Keeps long sums accurate to a few
/// ulps independent of length, which the oracle helpers rely on for
/// reproducible full gradients at large n.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Coordinate-wise compensated accumulator for averaging many vectors.
#[derive(Debug, Clone)]
pub(crate) struct KahanVector {
    sums: Vec<KahanSum>,
}

impl KahanVector {
    pub fn zeros(dim: usize) -> Self {
        KahanVector {
            sums: vec![KahanSum::new(); dim],
        }
    }

    pub fn add(&mut self, v: &ParamVector) {
        debug_assert_eq!(self.sums.len(), v.dim());
        for (acc, x) in self.sums.iter_mut().zip(v.as_slice()) {
            acc.add(*x);
        }
    }

    /// Finish the accumulation as `(Σ v) / divisor`.
    pub fn mean(&self, divisor: f64) -> ParamVector {
        ParamVector(self.sums.iter().map(|s| s.value() / divisor).collect())
    }
}
