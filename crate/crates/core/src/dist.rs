//! Probability vectors on a finite alphabet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries at or below this value count as zero when computing supports.
pub const ZERO_TOL: f64 = 1e-14;

/// Tolerance on the total mass of a user-supplied probability vector.
pub const SUM_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn is_zero(v: f64) -> bool {
    v <= ZERO_TOL
}

/// A probability vector. Entries are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates `probs` as a probability vector (mass within 1e-12 of one)
    /// and renormalizes away the residual.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(v) = probs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad entry {v}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("mass {s} differs from 1")));
        }
        Ok(Self(probs.into_iter().map(|v| v / s).collect()))
    }

    /// Normalizes non-negative weights with positive total mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(v) = weights.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad weight {v}")));
        }
        let s: f64 = weights.iter().sum();
        if weights.is_empty() || s <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        Ok(Self(weights.into_iter().map(|v| v / s).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// Point mass at `i` on an alphabet of size `k`.
    pub fn point(k: usize, i: usize) -> Self {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        Self(v)
    }

    /// Unchecked constructor for vectors produced by internal normalization.
    pub(crate) fn from_raw(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Indices carrying non-zero mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| !is_zero(self.0[i])).collect()
    }

    pub fn in_support(&self, i: usize) -> bool {
        !is_zero(self.0[i])
    }

    /// Mass of a set of indices.
    pub fn mass_of(&self, idx: impl IntoIterator<Item = usize>) -> f64 {
        idx.into_iter().map(|i| self.0[i]).sum()
    }

    /// Absolute continuity `self << other`.
    pub fn is_dominated_by(&self, other: &Distribution) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(&a, &b)| is_zero(a) || !is_zero(b))
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Numerically stable `log(sum(exp(v)))`; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(v: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
