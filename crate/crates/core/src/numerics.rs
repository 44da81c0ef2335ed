//! Score arithmetic: softmax, distances of the top score to the edges of the
//! probability range, the uncertainty score and argmax.
//!
//! The uncertainty of a probability vector `p` with top entry `m` is
//! `min(m, 1 - m)`. It lies in `[0, 0.5]`; 0.5 is the most unconfident value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Allowed deviation of a probability vector's sum from one.
///
/// Fixed at 1e-9, widened only when the scalar's own round-off over `len`
/// terms cannot meet it (f32).
pub fn sum_tolerance<T: Scalar>(len: usize) -> T {
    let round_off = T::epsilon() * T::of(4.0 * len as f64);
    T::of(1e-9).max(round_off)
}

/// Raw classifier output, one finite value per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector<T>(Vec<T>);

impl<T: Scalar> LogitVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("logit {i} is not finite")));
        }
        Ok(LogitVector(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax_slice(&self.0)
    }
}

/// Normalized per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T>(Vec<T>);

impl<T: Scalar> ProbabilityVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "probability vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::invalid(format!("probability {i} = {v} outside [0, 1]")));
            }
        }
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > sum_tolerance::<T>(values.len()) {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::zero(), T::max)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// Uncertainty of a prediction, always within `[0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UncertaintyScore<T>(T);

impl<T: Scalar> UncertaintyScore<T> {
    /// Uncertainty of a top-class probability `p`.
    pub fn from_top_probability(p: T) -> Self {
        UncertaintyScore(p.min(T::one() - p))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// A single member's answer for one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub class_index: usize,
    pub top_probability: T,
    pub uncertainty: UncertaintyScore<T>,
}

impl<T: Scalar> Prediction<T> {
    pub fn from_probabilities(p: &ProbabilityVector<T>) -> Self {
        let class_index = argmax_class(p);
        let top_probability = p.values()[class_index];
        Prediction {
            class_index,
            top_probability,
            uncertainty: UncertaintyScore::from_top_probability(top_probability),
        }
    }

    pub fn from_logits(logits: &LogitVector<T>) -> Self {
        Self::from_probabilities(&softmax(logits))
    }
}

/// Numerically stable softmax: logits are shifted by their maximum first.
pub fn softmax<T: Scalar>(logits: &LogitVector<T>) -> ProbabilityVector<T> {
    let values = logits.values();
    let shift = values.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = values.iter().map(|&v| (v - shift).exp()).collect();
    // The max entry contributes exp(0) = 1, so the sum is at least one.
    let total: T = exps.iter().copied().sum();
    ProbabilityVector(exps.into_iter().map(|e| e / total).collect())
}

/// Softmax of unchecked raw values.
pub fn softmax_slice<T: Scalar>(values: &[T]) -> Result<ProbabilityVector<T>> {
    Ok(softmax(&LogitVector::new(values.to_vec())?))
}

/// Distance of the top score from zero: the top score itself.
pub fn distance_to_zero<T: Scalar>(p: &ProbabilityVector<T>) -> T {
    p.max()
}

/// Distance of the top score from one.
pub fn distance_to_one<T: Scalar>(p: &ProbabilityVector<T>) -> T {
    T::one() - p.max()
}

pub fn uncertainty<T: Scalar>(p: &ProbabilityVector<T>) -> UncertaintyScore<T> {
    UncertaintyScore(distance_to_zero(p).min(distance_to_one(p)))
}

/// Most probable class; the lowest index wins ties.
pub fn argmax_class<T: Scalar>(p: &ProbabilityVector<T>) -> usize {
    argmax_slice(p.values())
}

pub(crate) fn argmax_slice<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
