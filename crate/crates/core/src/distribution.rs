use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability vector over an indexed finite set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteDistribution<T = f64> {
    weights: Vec<T>,
}

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("f64 constant representable in the scalar type")
}

/// Default sum tolerance for the scalar type: 1e-12 for f64, scaled up for
/// narrower types.
pub fn sum_tolerance<T: Float>(len: usize) -> T {
    let eps = T::epsilon() * cast::<T>(4.0 * len.max(1) as f64);
    eps.max(cast(1e-12))
}

impl<T: Float> FiniteDistribution<T> {
    /// Validates nonnegativity and that the weights sum to one within the default
    /// tolerance.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        let tol = sum_tolerance::<T>(weights.len());
        Self::with_tolerance(weights, tol)
    }

    pub fn with_tolerance(weights: Vec<T>, tol: T) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < T::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "weight {i} is {}",
                    w.to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        let s = weights.iter().fold(T::zero(), |a, &b| a + b);
        if (s - T::one()).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {}",
                s.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { weights })
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalized(mut weights: Vec<T>) -> Result<Self> {
        let s = weights.iter().fold(T::zero(), |a, &b| a + b);
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidDistribution("weights do not have a positive sum".into()));
        }
        for w in &mut weights {
            *w = *w / s;
        }
        Self::new(weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty set");
        let w = T::one() / cast(n as f64);
        Self { weights: vec![w; n] }
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        assert!(i < n, "point mass index {i} out of range {n}");
        let mut weights = vec![T::zero(); n];
        weights[i] = T::one();
        Self { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.weights[i]
    }

    /// E[x] under this distribution.
    pub fn expect(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights
            .iter()
            .zip(x)
            .fold(T::zero(), |a, (&w, &v)| if w > T::zero() { a + w * v } else { a })
    }

    /// Mass of the indices where `pred` holds.
    pub fn mass_where(&self, mut pred: impl FnMut(usize) -> bool) -> T {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(*i))
            .fold(T::zero(), |a, (_, &w)| a + w)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, _)| i)
    }

    /// Inverse-CDF draw for a uniform variate `u` in [0, 1). Zero-weight entries are
    /// never returned.
    pub fn sample_index(&self, u: T) -> usize {
        Self::sample_slice(&self.weights, u)
    }

    /// [`Self::sample_index`] on a raw weight slice.
    pub fn sample_slice(weights: &[T], u: T) -> usize {
        let mut acc = T::zero();
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= T::zero() {
                continue;
            }
            acc = acc + w;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub fn mix(&self, other: &Self, lambda: T) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(&a, &b)| (T::one() - lambda) * a + lambda * b)
            .collect();
        Self { weights }
    }
}
