//! Statistical primitives shared by every analysis in the crate.
//!
//! Everything here is a pure function of its inputs. Results are
//! bit-for-bit deterministic for a given input order.

mod alpha;
mod correlation;
mod special;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alpha::{krippendorff_alpha, DifferenceMetric};
pub use correlation::{average_ranks, pearson_r, spearman_rho};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_cdf};
pub use ttest::{two_sample_t_test, TTestVariant, TestResult};

/// A non-empty sequence of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleVector(Vec<f64>);

impl SampleVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(SampleVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        mean(&self.0)
    }

    /// Sample standard deviation (n - 1 denominator); `None` for a single value.
    pub fn stdev(&self) -> Option<f64> {
        sample_stdev(&self.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<f64>> for SampleVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        SampleVector::new(values)
    }
}

impl From<SampleVector> for Vec<f64> {
    fn from(v: SampleVector) -> Self {
        v.0
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-pass sample variance.
pub(crate) fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(ss / (values.len() - 1) as f64)
}

pub(crate) fn sample_stdev(values: &[f64]) -> Option<f64> {
    sample_variance(values).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Absent when the sample holds a single value.
    pub stdev: Option<f64>,
}

pub fn summary_stats(x: &SampleVector) -> Summary {
    let values = x.values();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Summary {
        min,
        max,
        mean: x.mean(),
        stdev: x.stdev(),
    }
}

/// Linear-interpolation quantile of already sorted data, `q` in [0, 1].
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
