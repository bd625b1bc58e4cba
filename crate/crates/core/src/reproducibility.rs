//! Run-vs-run comparison of two collections of the same instrument.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{AnnotationMatrix, ItemId};
use crate::precision::{per_item_stats, repeatability};
use crate::stats::{self, pearson_r, spearman_rho, SampleVector};

pub const DEFAULT_TOP_MOVERS: usize = 10;
const MIN_SHARED: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDelta {
    pub item: ItemId,
    pub mean_a: f64,
    pub mean_b: f64,
    pub stdev_a: Option<f64>,
    pub stdev_b: Option<f64>,
}

impl ItemDelta {
    /// mean_b - mean_a
    pub fn delta_mean(&self) -> f64 {
        self.mean_b - self.mean_a
    }

    /// stdev_b - stdev_a, when both runs have two or more votes on the item.
    pub fn delta_stdev(&self) -> Option<f64> {
        Some(self.stdev_b? - self.stdev_a?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub run_a: String,
    pub run_b: String,
    /// Spearman correlation of item means over the shared items.
    pub rho_of_means: f64,
    /// Pearson correlation of item stdevs over shared items with a stdev in
    /// both runs; `None` when fewer than three such items exist or the
    /// stdevs are constant.
    pub pearson_of_stdevs: Option<f64>,
    pub mean_stdev_a: Option<f64>,
    pub mean_stdev_b: Option<f64>,
    pub alpha_a: Option<f64>,
    pub alpha_b: Option<f64>,
    /// Shared items in run a's order.
    pub per_item_deltas: Vec<ItemDelta>,
    /// Largest |delta mean| first.
    pub top_mean_movers: Vec<ItemDelta>,
    /// Largest |delta stdev| first.
    pub top_stdev_movers: Vec<ItemDelta>,
    pub only_in_a: Vec<ItemId>,
    pub only_in_b: Vec<ItemId>,
}

fn check_scales(a: &AnnotationMatrix, b: &AnnotationMatrix) -> Result<()> {
    if a.scale() != b.scale() {
        return Err(Error::ScaleMismatch {
            a_min: a.scale().min,
            a_max: a.scale().max,
            b_min: b.scale().min,
            b_max: b.scale().max,
        });
    }
    Ok(())
}

/// Indices (in a, in b) of the items both runs share, in a's order.
fn shared_indices(a: &AnnotationMatrix, b: &AnnotationMatrix) -> Vec<(usize, usize)> {
    a.items()
        .iter()
        .enumerate()
        .filter_map(|(i, it)| b.index_of(it).map(|j| (i, j)))
        .collect()
}

fn rho_over(a_vals: Vec<f64>, b_vals: Vec<f64>) -> Result<f64> {
    spearman_rho(&SampleVector::new(a_vals)?, &SampleVector::new(b_vals)?)
}

/// Compares run `b` against run `a`. Item means use every available vote in
/// each run.
pub fn compare_runs(
    a: &AnnotationMatrix,
    b: &AnnotationMatrix,
    top_n: usize,
) -> Result<RunComparison> {
    check_scales(a, b)?;
    let shared = shared_indices(a, b);
    if shared.len() < MIN_SHARED {
        return Err(Error::InsufficientOverlap {
            shared: shared.len(),
            needed: MIN_SHARED,
        });
    }

    let stats_a = per_item_stats(a);
    let stats_b = per_item_stats(b);
    let per_item_deltas: Vec<ItemDelta> = shared
        .iter()
        .map(|&(i, j)| ItemDelta {
            item: a.items()[i].clone(),
            mean_a: stats_a[i].mean,
            mean_b: stats_b[j].mean,
            stdev_a: stats_a[i].stdev,
            stdev_b: stats_b[j].stdev,
        })
        .collect();

    let rho_of_means = rho_over(
        per_item_deltas.iter().map(|d| d.mean_a).collect(),
        per_item_deltas.iter().map(|d| d.mean_b).collect(),
    )?;

    let (sd_a, sd_b): (Vec<f64>, Vec<f64>) = per_item_deltas
        .iter()
        .filter_map(|d| Some((d.stdev_a?, d.stdev_b?)))
        .unzip();
    let pearson_of_stdevs = if sd_a.len() >= MIN_SHARED {
        match pearson_r(&SampleVector::new(sd_a)?, &SampleVector::new(sd_b)?) {
            Ok(r) => Some(r),
            Err(Error::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let mean_stdev = |s: &[crate::precision::ItemStats]| {
        let sds: Vec<f64> = s.iter().filter_map(|x| x.stdev).collect();
        (!sds.is_empty()).then(|| stats::mean(&sds))
    };

    let mut top_mean_movers = per_item_deltas.clone();
    top_mean_movers.sort_by(|x, y| y.delta_mean().abs().total_cmp(&x.delta_mean().abs()));
    top_mean_movers.truncate(top_n);

    let mut top_stdev_movers: Vec<ItemDelta> = per_item_deltas
        .iter()
        .filter(|d| d.delta_stdev().is_some())
        .cloned()
        .collect();
    top_stdev_movers.sort_by(|x, y| {
        let dx = x.delta_stdev().unwrap_or(0.0).abs();
        let dy = y.delta_stdev().unwrap_or(0.0).abs();
        dy.total_cmp(&dx)
    });
    top_stdev_movers.truncate(top_n);

    let in_a: HashSet<&ItemId> = a.items().iter().collect();
    let only_in_a = a
        .items()
        .iter()
        .filter(|it| b.index_of(it).is_none())
        .cloned()
        .collect();
    let only_in_b = b
        .items()
        .iter()
        .filter(|it| !in_a.contains(it))
        .cloned()
        .collect();

    Ok(RunComparison {
        run_a: a.name().to_string(),
        run_b: b.name().to_string(),
        rho_of_means,
        pearson_of_stdevs,
        mean_stdev_a: mean_stdev(&stats_a),
        mean_stdev_b: mean_stdev(&stats_b),
        alpha_a: repeatability(a).ok(),
        alpha_b: repeatability(b).ok(),
        per_item_deltas,
        top_mean_movers,
        top_stdev_movers,
        only_in_a,
        only_in_b,
    })
}

/// Square matrix of Spearman correlations between run item means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn cross_run_correlations(runs: &[AnnotationMatrix]) -> Result<CorrelationMatrix> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} run(s) given; need at least 2",
            runs.len()
        )));
    }
    let n = runs.len();
    let means: Vec<Vec<f64>> = runs.iter().map(AnnotationMatrix::item_means).collect();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            check_scales(&runs[i], &runs[j])?;
            let shared = shared_indices(&runs[i], &runs[j]);
            if shared.len() < MIN_SHARED {
                return Err(Error::InsufficientOverlap {
                    shared: shared.len(),
                    needed: MIN_SHARED,
                });
            }
            let rho = rho_over(
                shared.iter().map(|&(x, _)| means[i][x]).collect(),
                shared.iter().map(|&(_, y)| means[j][y]).collect(),
            )?;
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(CorrelationMatrix {
        labels: runs.iter().map(|r| r.name().to_string()).collect(),
        values,
    })
}
