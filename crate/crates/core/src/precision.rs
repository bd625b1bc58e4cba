//! Precision profile (per-item dispersion) and repeatability (inter-rater
//! reliability) of an instrument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{AnnotationMatrix, ItemId, Scale};
use crate::stats::{self, krippendorff_alpha, DifferenceMetric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item: ItemId,
    pub n_votes: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for single-vote items.
    pub stdev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionProfile {
    pub per_item: Vec<ItemStats>,
    /// Mean of the per-item stdevs over items with two or more votes.
    pub mean_stdev: f64,
    pub stdev_of_stdev: f64,
    /// Empirical interval holding the central two thirds of per-item stdevs.
    pub central_band: (f64, f64),
    /// Highest-stdev item, controls excluded.
    pub highest_variance: Option<ItemId>,
    /// Lowest-stdev item, controls excluded.
    pub lowest_variance: Option<ItemId>,
    /// Items left out of the aggregates because they carry a single vote.
    pub single_vote_items: Vec<ItemId>,
}

impl PrecisionProfile {
    pub fn stdevs(&self) -> Vec<f64> {
        self.per_item.iter().filter_map(|s| s.stdev).collect()
    }
}

/// One (mean, stdev) point per item with at least two votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub item: ItemId,
    pub mean: f64,
    pub stdev: f64,
}

const CENTRAL_SHARE: f64 = 2.0 / 3.0;

pub fn per_item_stats(m: &AnnotationMatrix) -> Vec<ItemStats> {
    (0..m.n_items())
        .map(|i| {
            let votes = m.votes(i);
            ItemStats {
                item: m.items()[i].clone(),
                n_votes: votes.len(),
                mean: stats::mean(&votes),
                stdev: stats::sample_stdev(&votes),
            }
        })
        .collect()
}

pub fn precision_profile(m: &AnnotationMatrix) -> Result<PrecisionProfile> {
    let per_item = per_item_stats(m);
    let stdevs: Vec<f64> = per_item.iter().filter_map(|s| s.stdev).collect();
    if stdevs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} item(s) with two or more votes; need at least 2",
            stdevs.len()
        )));
    }
    let mean_stdev = stats::mean(&stdevs);
    let stdev_of_stdev = stats::sample_stdev(&stdevs).expect("two or more values");

    let mut sorted = stdevs.clone();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - CENTRAL_SHARE) / 2.0;
    let central_band = (
        stats::quantile_sorted(&sorted, tail),
        stats::quantile_sorted(&sorted, 1.0 - tail),
    );

    let candidates = || {
        per_item
            .iter()
            .enumerate()
            .filter(|(i, _)| !m.is_control(*i))
            .filter_map(|(_, s)| s.stdev.map(|sd| (sd, &s.item)))
    };
    // first item wins ties
    let highest_variance = candidates()
        .fold(None::<(f64, &ItemId)>, |best, (sd, it)| match best {
            Some((b, _)) if b >= sd => best,
            _ => Some((sd, it)),
        })
        .map(|(_, it)| it.clone());
    let lowest_variance = candidates()
        .fold(None::<(f64, &ItemId)>, |best, (sd, it)| match best {
            Some((b, _)) if b <= sd => best,
            _ => Some((sd, it)),
        })
        .map(|(_, it)| it.clone());

    let single_vote_items = per_item
        .iter()
        .filter(|s| s.stdev.is_none())
        .map(|s| s.item.clone())
        .collect();

    Ok(PrecisionProfile {
        per_item,
        mean_stdev,
        stdev_of_stdev,
        central_band,
        highest_variance,
        lowest_variance,
        single_vote_items,
    })
}

/// Krippendorff's alpha (interval metric) over every vote, missing cells included.
pub fn repeatability(m: &AnnotationMatrix) -> Result<f64> {
    krippendorff_alpha(m.rows(), DifferenceMetric::Interval)
}

pub fn precision_scatter(m: &AnnotationMatrix) -> Vec<ScatterPoint> {
    per_item_stats(m)
        .into_iter()
        .filter_map(|s| {
            s.stdev.map(|stdev| ScatterPoint {
                item: s.item,
                mean: s.mean,
                stdev,
            })
        })
        .collect()
}

/// Largest possible sample stdev of `n` votes on `scale`: half the votes at
/// each end of the scale.
pub fn max_item_stdev(scale: Scale, n: usize) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let k = (n / 2) as f64;
    let n = n as f64;
    let r = scale.range();
    Some((k * (n - k) * r * r / (n * (n - 1.0))).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<(&str, &str, Vec<Option<f64>>)>) -> AnnotationMatrix {
        let width = rows[0].2.len();
        let items = rows
            .iter()
            .map(|(l, r, _)| ItemId::new(l, r).unwrap())
            .collect();
        let scores = rows.into_iter().map(|(_, _, s)| s).collect();
        AnnotationMatrix::new(
            "t",
            items,
            (0..width).map(|i| format!("r{i}")).collect(),
            scores,
            Scale::default(),
        )
        .unwrap()
    }

    #[test]
    fn per_item_values() {
        let m = matrix(vec![
            ("tiger", "tiger", vec![Some(10.0), Some(10.0), Some(10.0)]),
            ("a", "b", vec![Some(2.0), Some(4.0), Some(6.0)]),
            ("c", "d", vec![Some(3.0), None, None]),
        ]);
        let s = per_item_stats(&m);
        assert_eq!((s[0].mean, s[0].stdev), (10.0, Some(0.0)));
        assert_eq!((s[1].mean, s[1].stdev), (4.0, Some(2.0)));
        assert_eq!((s[2].n_votes, s[2].stdev), (1, None));
    }

    #[test]
    fn profile_aggregates_and_extremes() {
        let m = matrix(vec![
            ("tiger", "tiger", vec![Some(10.0), Some(10.0), Some(10.0)]),
            ("a", "b", vec![Some(2.0), Some(4.0), Some(6.0)]),
            ("king", "cabbage", vec![Some(0.0), Some(0.0), Some(1.0)]),
            ("e", "f", vec![Some(0.0), Some(5.0), Some(10.0)]),
            ("c", "d", vec![Some(3.0), None, None]),
        ]);
        let p = precision_profile(&m).unwrap();
        let sds: [f64; 4] = [0.0, 2.0, 1.0 / 3.0f64.sqrt(), 5.0];
        let want_mean = sds.iter().sum::<f64>() / 4.0;
        assert!((p.mean_stdev - want_mean).abs() < 1e-12);
        assert_eq!(p.highest_variance, Some(ItemId::new("e", "f").unwrap()));
        assert_eq!(
            p.lowest_variance,
            Some(ItemId::new("king", "cabbage").unwrap())
        );
        assert_eq!(p.single_vote_items, vec![ItemId::new("c", "d").unwrap()]);
        let recomputed = stats::mean(&p.stdevs());
        assert!((recomputed - p.mean_stdev).abs() < 1e-12);
        assert!(p.central_band.0 <= p.central_band.1);
    }

    #[test]
    fn identical_votes_everywhere() {
        let m = matrix(vec![
            ("a", "b", vec![Some(3.0), Some(3.0)]),
            ("c", "d", vec![Some(7.0), Some(7.0)]),
        ]);
        let p = precision_profile(&m).unwrap();
        assert_eq!((p.mean_stdev, p.stdev_of_stdev), (0.0, 0.0));
        assert_eq!(repeatability(&m).unwrap(), 1.0);
    }

    #[test]
    fn insufficient_items() {
        let m = matrix(vec![("a", "b", vec![Some(3.0), Some(4.0)])]);
        assert!(matches!(
            precision_profile(&m),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn scatter_single_item() {
        let m = matrix(vec![("a", "b", vec![Some(10.0), Some(10.0)])]);
        let pts = precision_scatter(&m);
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].mean, pts[0].stdev), (10.0, 0.0));
    }

    #[test]
    fn stdev_bound() {
        // 2 votes at 0 and 10: stdev = sqrt(50)
        assert!((max_item_stdev(Scale::default(), 2).unwrap() - 50f64.sqrt()).abs() < 1e-12);
        // 3 votes 0,0,10: mean 10/3, SS = 2*(100/9) + 400/9 = 600/9, var = 300/9
        let want = (300.0f64 / 9.0).sqrt();
        assert!((max_item_stdev(Scale::default(), 3).unwrap() - want).abs() < 1e-12);
        assert_eq!(max_item_stdev(Scale::default(), 1), None);
    }
}
