use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-difference function used by Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceMetric {
    #[default]
    Interval,
    Ordinal,
    Nominal,
}

impl FromStr for DifferenceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interval" => Ok(DifferenceMetric::Interval),
            "ordinal" => Ok(DifferenceMetric::Ordinal),
            "nominal" => Ok(DifferenceMetric::Nominal),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

impl fmt::Display for DifferenceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifferenceMetric::Interval => "interval",
            DifferenceMetric::Ordinal => "ordinal",
            DifferenceMetric::Nominal => "nominal",
        })
    }
}

/// Krippendorff's alpha over `units` (one row per rated item, one optional
/// value per rater). Units with fewer than two values are not pairable and
/// are skipped.
///
/// Returns 1.0 when observed disagreement is zero, including the case where
/// every pairable value is identical.
pub fn krippendorff_alpha(units: &[Vec<Option<f64>>], metric: DifferenceMetric) -> Result<f64> {
    let pairable: Vec<Vec<f64>> = units
        .iter()
        .map(|u| u.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|u: &Vec<f64>| u.len() >= 2)
        .collect();
    if pairable.is_empty() {
        return Err(Error::InsufficientData(
            "no item has two or more ratings".into(),
        ));
    }
    if let Some(bad) = pairable.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(format!("non-finite rating {bad}")));
    }

    let (observed, expected) = match metric {
        DifferenceMetric::Interval => interval_disagreement(&pairable),
        _ => coincidence_disagreement(&pairable, metric),
    };
    if observed == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

/// Closed form for squared differences: the sum over ordered pairs of
/// (a - b)^2 within a group of m values equals 2 m SS, SS the sum of squared
/// deviations from the group mean.
fn interval_disagreement(units: &[Vec<f64>]) -> (f64, f64) {
    let n: usize = units.iter().map(Vec::len).sum();
    let n = n as f64;

    let mut observed = 0.0;
    for u in units {
        let m = u.len() as f64;
        let mean = u.iter().sum::<f64>() / m;
        let ss: f64 = u.iter().map(|v| (v - mean) * (v - mean)).sum();
        observed += 2.0 * m * ss / (m - 1.0);
    }
    observed /= n;

    let grand = units.iter().flatten().sum::<f64>() / n;
    let ss_all: f64 = units
        .iter()
        .flatten()
        .map(|v| (v - grand) * (v - grand))
        .sum();
    let expected = 2.0 * n * ss_all / (n * (n - 1.0));
    (observed, expected)
}

fn coincidence_disagreement(units: &[Vec<f64>], metric: DifferenceMetric) -> (f64, f64) {
    let mut values: Vec<f64> = units.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let k = values.len();
    let index = |v: f64| {
        values
            .binary_search_by(|p| p.total_cmp(&v))
            .expect("value present")
    };

    // coincidences o[c][d]: each ordered pair within a unit weighs 1 / (m - 1)
    let mut o = vec![0.0; k * k];
    let mut counts = vec![0usize; k];
    for u in units {
        let m = u.len() as f64;
        counts.iter_mut().for_each(|c| *c = 0);
        let mut present = Vec::new();
        for &v in u {
            let i = index(v);
            if counts[i] == 0 {
                present.push(i);
            }
            counts[i] += 1;
        }
        for &c in &present {
            for &d in &present {
                let pairs = if c == d {
                    counts[c] * (counts[c] - 1)
                } else {
                    counts[c] * counts[d]
                };
                o[c * k + d] += pairs as f64 / (m - 1.0);
            }
        }
    }

    let marginals: Vec<f64> = (0..k).map(|c| o[c * k..(c + 1) * k].iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    let delta2 = |c: usize, d: usize| -> f64 {
        match metric {
            DifferenceMetric::Nominal => (c != d) as u8 as f64,
            DifferenceMetric::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let span: f64 = marginals[lo..=hi].iter().sum();
                let x = span - (marginals[lo] + marginals[hi]) / 2.0;
                x * x
            }
            DifferenceMetric::Interval => {
                let x = values[c] - values[d];
                x * x
            }
        }
    };

    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..k {
        for d in 0..k {
            let w = delta2(c, d);
            observed += o[c * k + d] * w;
            expected += marginals[c] * marginals[d] * w;
        }
    }
    (observed / n, expected / (n * (n - 1.0)))
}
