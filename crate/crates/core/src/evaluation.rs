//! Evaluation of system predictions against an instrument: indication,
//! per-rater spread, significance of system differences and
//! resolution-filtered correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{
    exclude_items, AnnotationMatrix, Coverage, Exclusion, ItemId, PredictionSet,
};
use crate::resolution::{distance_matrix, THRESHOLD_EPS};
use crate::stats::{
    pearson_r, spearman_rho, summary_stats, two_sample_t_test, SampleVector, Summary, TTestVariant,
    TestResult,
};

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;
pub const DEFAULT_RESOLUTIONS: [f64; 5] = [0.0, 0.9, 1.8, 2.7, 3.6];

/// Spearman correlation between predictions and item means over the items
/// the predictions cover.
pub fn indication_rho(p: &PredictionSet, m: &AnnotationMatrix, min_coverage: f64) -> Result<f64> {
    p.coverage(m).require(min_coverage)?;
    let (pred, means): (Vec<f64>, Vec<f64>) = m
        .items()
        .iter()
        .enumerate()
        .filter_map(|(i, it)| Some((p.score(it)?, m.item_mean(i))))
        .unzip();
    spearman_rho(&SampleVector::new(pred)?, &SampleVector::new(means)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerRater {
    pub raters: Vec<String>,
    pub values: SampleVector,
    pub summary: Summary,
}

/// One Spearman correlation per rater who scored at least `rater_coverage`
/// of the predicted items, computed over that rater's scored items.
pub fn per_rater_rho(
    p: &PredictionSet,
    m: &AnnotationMatrix,
    rater_coverage: f64,
) -> Result<PerRater> {
    if !(rater_coverage > 0.0 && rater_coverage <= 1.0) {
        return Err(Error::Config(format!(
            "rater coverage must be in (0, 1], got {rater_coverage}"
        )));
    }
    let predicted: Vec<(usize, f64)> = m
        .items()
        .iter()
        .enumerate()
        .filter_map(|(i, it)| Some((i, p.score(it)?)))
        .collect();
    if predicted.is_empty() {
        return Err(Error::NoEligibleRaters { eligible: 0 });
    }

    let mut raters = Vec::new();
    let mut values = Vec::new();
    for (r, label) in m.raters().iter().enumerate() {
        let (pred, votes): (Vec<f64>, Vec<f64>) = predicted
            .iter()
            .filter_map(|&(i, s)| Some((s, m.score(i, r)?)))
            .unzip();
        if (votes.len() as f64) < rater_coverage * predicted.len() as f64 {
            continue;
        }
        raters.push(label.clone());
        values.push(spearman_rho(
            &SampleVector::new(pred)?,
            &SampleVector::new(votes)?,
        )?);
    }
    if raters.len() < 2 {
        return Err(Error::NoEligibleRaters {
            eligible: raters.len(),
        });
    }
    let values = SampleVector::new(values)?;
    let summary = summary_stats(&values);
    Ok(PerRater {
        raters,
        values,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCorrelation {
    pub resolution: f64,
    /// `None` when fewer than three pairs survive or one side is constant.
    pub pearson_r: Option<f64>,
    pub n_pairs: usize,
}

fn l2_normalized(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

pub(crate) fn distance_correlation(
    base: &[f64],
    pred: &[f64],
    normalize: bool,
) -> Result<Option<f64>> {
    let (base, pred) = if normalize {
        match (l2_normalized(base), l2_normalized(pred)) {
            (Some(b), Some(p)) => (b, p),
            _ => return Ok(None),
        }
    } else {
        (base.to_vec(), pred.to_vec())
    };
    if base.is_empty() {
        return Ok(None);
    }
    match pearson_r(&SampleVector::new(base)?, &SampleVector::new(pred)?) {
        Ok(r) => Ok(Some(r)),
        Err(Error::TooFewValues { .. } | Error::DegenerateInput(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Pearson correlation between base-instrument and prediction-space
/// distances over the item pairs whose base distance reaches each
/// resolution. Predictions must cover every item of `m`.
pub fn resolution_filtered_correlation(
    p: &PredictionSet,
    m: &AnnotationMatrix,
    resolutions: &[f64],
) -> Result<Vec<ResolutionCorrelation>> {
    p.coverage(m).require(1.0)?;
    let preds: Vec<f64> = m
        .items()
        .iter()
        .map(|it| p.score(it).expect("coverage checked"))
        .collect();
    let dm = distance_matrix(m);
    resolutions
        .iter()
        .map(|&r| {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Config(format!("resolution must be >= 0, got {r}")));
            }
            let (base, pred): (Vec<f64>, Vec<f64>) = dm
                .iter()
                .filter(|d| d.delta >= r - THRESHOLD_EPS)
                .map(|d| (d.delta, (preds[d.i] - preds[d.j]).abs()))
                .unzip();
            Ok(ResolutionCorrelation {
                resolution: r,
                pearson_r: distance_correlation(&base, &pred, true)?,
                n_pairs: base.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRho {
    pub instrument: String,
    pub rho: f64,
}

/// Indication of one prediction set on each of several runs.
pub fn multi_instrument_eval(
    p: &PredictionSet,
    runs: &[AnnotationMatrix],
    min_coverage: f64,
) -> Result<Vec<InstrumentRho>> {
    runs.iter()
        .map(|m| {
            Ok(InstrumentRho {
                instrument: m.name().to_string(),
                rho: indication_rho(p, m, min_coverage)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Minimum share of instrument items the predictions must cover.
    pub min_coverage: f64,
    /// Minimum share of predicted items a rater must have scored.
    pub rater_coverage: f64,
    pub resolutions: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            min_coverage: crate::instrument::DEFAULT_MIN_COVERAGE,
            rater_coverage: 1.0,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub system_name: String,
    pub coverage: Coverage,
    pub indication_rho: f64,
    /// Absent when fewer than two raters qualify, e.g. for means-only data.
    pub per_rater: Option<PerRater>,
    pub resolution_correlations: Vec<ResolutionCorrelation>,
    /// Items without a prediction, left out of the distance analysis.
    pub distance_exclusions: Vec<ItemId>,
    pub per_instrument_rho: Vec<InstrumentRho>,
}

/// Runs every analysis for one system. `m` is the base instrument; `runs`
/// are further collections scored alongside it.
pub fn evaluate_system(
    p: &PredictionSet,
    m: &AnnotationMatrix,
    runs: &[AnnotationMatrix],
    opts: &EvalOptions,
) -> Result<EvaluationResult> {
    let coverage = p.coverage(m);
    let indication = indication_rho(p, m, opts.min_coverage)?;
    let per_rater = match per_rater_rho(p, m, opts.rater_coverage) {
        Ok(pr) => Some(pr),
        Err(Error::NoEligibleRaters { .. }) => None,
        Err(e) => return Err(e),
    };
    let covered = exclude_items(m, &Exclusion::Items(coverage.missing.clone()))?;
    let resolution_correlations = resolution_filtered_correlation(p, &covered, &opts.resolutions)?;

    let mut per_instrument_rho = vec![InstrumentRho {
        instrument: m.name().to_string(),
        rho: indication,
    }];
    per_instrument_rho.extend(multi_instrument_eval(p, runs, opts.min_coverage)?);

    Ok(EvaluationResult {
        system_name: p.system_name().to_string(),
        distance_exclusions: coverage.missing.clone(),
        coverage,
        indication_rho: indication,
        per_rater,
        resolution_correlations,
        per_instrument_rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distinguishability {
    Distinguishable,
    NotDistinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemComparison {
    pub system_a: String,
    pub system_b: String,
    pub test: TestResult,
    pub level: f64,
    pub verdict: Distinguishability,
}

/// Two-tailed two-sample t-test between the per-rater correlations of two
/// systems scored against the same raters.
pub fn compare_systems(
    a: &EvaluationResult,
    b: &EvaluationResult,
    level: f64,
    variant: TTestVariant,
) -> Result<SystemComparison> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let (pa, pb) = match (&a.per_rater, &b.per_rater) {
        (Some(pa), Some(pb)) => (pa, pb),
        _ => return Err(Error::NoEligibleRaters { eligible: 0 }),
    };
    if pa.raters != pb.raters {
        return Err(Error::MismatchedRaters);
    }
    let test = two_sample_t_test(&pa.values, &pb.values, variant)?;
    let verdict = if test.p_value < level {
        Distinguishability::Distinguishable
    } else {
        Distinguishability::NotDistinguishable
    };
    Ok(SystemComparison {
        system_a: a.system_name.clone(),
        system_b: b.system_name.clone(),
        test,
        level,
        verdict,
    })
}

/// For each instrument, system names ordered by decreasing indication.
pub fn rank_systems(results: &[EvaluationResult]) -> Vec<(String, Vec<String>)> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    first
        .per_instrument_rho
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let mut scored: Vec<(&str, f64)> = results
                .iter()
                .filter_map(|r| {
                    r.per_instrument_rho
                        .get(k)
                        .map(|x| (r.system_name.as_str(), x.rho))
                })
                .collect();
            scored.sort_by(|x, y| y.1.total_cmp(&x.1));
            (
                inst.instrument.clone(),
                scored.into_iter().map(|(s, _)| s.to_string()).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::Scale;
    use proptest::prelude::*;

    fn item(i: usize) -> ItemId {
        ItemId::new(&format!("w{i}"), "x").unwrap()
    }

    fn instrument(rows: &[&[Option<f64>]]) -> AnnotationMatrix {
        AnnotationMatrix::new(
            "inst",
            (0..rows.len()).map(item).collect(),
            (0..rows[0].len()).map(|r| format!("r{r}")).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            Scale::default(),
        )
        .unwrap()
    }

    fn toy() -> AnnotationMatrix {
        instrument(&[
            &[Some(1.0), Some(2.0), Some(0.0)],
            &[Some(3.0), Some(3.0), Some(5.0)],
            &[Some(6.0), Some(4.0), Some(5.0)],
            &[Some(9.0), Some(8.0), None],
        ])
    }

    fn preds(name: &str, v: &[f64]) -> PredictionSet {
        PredictionSet::new(name, v.iter().enumerate().map(|(i, &s)| (item(i), s))).unwrap()
    }

    #[test]
    fn indication_of_means_is_one() {
        let m = toy();
        let p = preds("means", &m.item_means());
        assert_eq!(indication_rho(&p, &m, 0.9).unwrap(), 1.0);
        let partial = preds("p", &[1.0, 2.0, 3.0]);
        assert!(matches!(
            indication_rho(&partial, &m, 0.9),
            Err(Error::CoverageTooLow { .. })
        ));
        assert_eq!(indication_rho(&partial, &m, 0.75).unwrap(), 1.0);
    }

    #[test]
    fn per_rater_selects_complete_raters() {
        let m = toy();
        // rater r0's own scores
        let p = preds("r0", &[1.0, 3.0, 6.0, 9.0]);
        let pr = per_rater_rho(&p, &m, 1.0).unwrap();
        assert_eq!(pr.raters, vec!["r0".to_string(), "r1".to_string()]);
        assert_eq!(pr.values.values()[0], 1.0);
        assert!(pr.summary.min <= pr.summary.mean && pr.summary.mean <= pr.summary.max);
        let all = per_rater_rho(&p, &m, 0.75).unwrap();
        assert_eq!(all.raters.len(), 3);

        let one_rater = instrument(&[&[Some(1.0)], &[Some(2.0)], &[Some(3.0)]]);
        assert!(matches!(
            per_rater_rho(&preds("p", &[1.0, 2.0, 3.0]), &one_rater, 1.0),
            Err(Error::NoEligibleRaters { eligible: 1 })
        ));
    }

    #[test]
    fn filtered_correlation_hand_computed() {
        // means 0, 1, 3, 6 -> distances (0,1)=1 (0,2)=3 (0,3)=6 (1,2)=2 (1,3)=5 (2,3)=3
        // predictions 0, 2, 3, 4 -> 2, 3, 4, 1, 2, 1
        let m = instrument(&[&[Some(0.0)], &[Some(1.0)], &[Some(3.0)], &[Some(6.0)]]);
        let p = preds("p", &[0.0, 2.0, 3.0, 4.0]);
        let rows = resolution_filtered_correlation(&p, &m, &[0.0, 2.5, 5.5, 7.0]).unwrap();
        // x = [1,3,6,2,5,3] mean 10/3; y = [2,3,4,1,2,1] mean 13/6
        // sxy = 50 - 130/3 = 20/3, sxx = 84 - 200/3 = 52/3, syy = 35 - 169/6 = 41/6
        let want = (20.0 / 3.0) / (52.0f64 / 3.0 * 41.0 / 6.0).sqrt();
        assert_eq!(rows[0].n_pairs, 6);
        assert!((rows[0].pearson_r.unwrap() - want).abs() < 1e-12);
        // delta >= 2.5: (0,2)=3 (0,3)=6 (1,3)=5 (2,3)=3 vs 3, 4, 2, 1
        // sxy = 46 - 42.5, sxx = 79 - 72.25, syy = 30 - 25
        let want = 3.5 / (6.75f64 * 5.0).sqrt();
        assert_eq!(rows[1].n_pairs, 4);
        assert!((rows[1].pearson_r.unwrap() - want).abs() < 1e-12);
        assert_eq!((rows[2].n_pairs, rows[2].pearson_r), (1, None));
        assert_eq!((rows[3].n_pairs, rows[3].pearson_r), (0, None));
    }

    #[test]
    fn filtered_correlation_of_affine_predictions() {
        let m = toy();
        let p = preds(
            "affine",
            &m.item_means()
                .iter()
                .map(|x| 3.0 * x - 7.0)
                .collect::<Vec<_>>(),
        );
        for row in resolution_filtered_correlation(&p, &m, &[0.0, 1.0, 2.0]).unwrap() {
            assert!((row.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        }
        let partial = preds("p", &[1.0, 2.0, 3.0]);
        assert!(resolution_filtered_correlation(&partial, &m, &[0.0]).is_err());
    }

    #[test]
    fn system_comparison() {
        let m = instrument(&[
            &[Some(1.0), Some(2.0), Some(0.0), Some(4.0)],
            &[Some(3.0), Some(1.0), Some(5.0), Some(2.0)],
            &[Some(6.0), Some(4.0), Some(3.0), Some(5.0)],
            &[Some(9.0), Some(8.0), Some(7.0), Some(1.0)],
        ]);
        let opts = EvalOptions::default();
        let a = evaluate_system(&preds("a", &[1.0, 3.0, 6.0, 9.0]), &m, &[], &opts).unwrap();
        let b = evaluate_system(&preds("b", &[1.0, 5.0, 4.0, 9.0]), &m, &[], &opts).unwrap();
        let same = compare_systems(&a, &a, DEFAULT_SIGNIFICANCE, TTestVariant::Pooled).unwrap();
        assert_eq!((same.test.statistic, same.test.p_value), (0.0, 1.0));
        assert_eq!(same.verdict, Distinguishability::NotDistinguishable);
        let ab = compare_systems(&a, &b, 0.05, TTestVariant::Pooled).unwrap();
        let ba = compare_systems(&b, &a, 0.05, TTestVariant::Pooled).unwrap();
        assert_eq!(ab.test.statistic, -ba.test.statistic);
        assert_eq!(ab.test.p_value, ba.test.p_value);

        let mut c = b.clone();
        c.per_rater.as_mut().unwrap().raters[0] = "other".into();
        assert!(matches!(
            compare_systems(&a, &c, 0.05, TTestVariant::Pooled),
            Err(Error::MismatchedRaters)
        ));
    }

    #[test]
    fn multi_instrument_and_ranking() {
        let m = toy();
        let p = preds("means", &m.item_means());
        let out = multi_instrument_eval(&p, std::slice::from_ref(&m), 0.9).unwrap();
        assert_eq!(
            out,
            vec![InstrumentRho {
                instrument: "inst".into(),
                rho: 1.0
            }]
        );

        let opts = EvalOptions::default();
        let good = evaluate_system(&p, &m, &[], &opts).unwrap();
        let bad = evaluate_system(&preds("bad", &[9.0, 1.0, 6.0, 3.0]), &m, &[], &opts).unwrap();
        let ranks = rank_systems(&[bad, good]);
        assert_eq!(
            ranks,
            vec![("inst".into(), vec!["means".into(), "bad".into()])]
        );
    }

    proptest! {
        #[test]
        fn normalization_does_not_change_correlation(
            pairs in prop::collection::vec((0.0f64..10.0, -50.0f64..50.0), 3..40)
        ) {
            let (base, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let with = distance_correlation(&base, &pred, true).unwrap();
            let without = distance_correlation(&base, &pred, false).unwrap();
            match (with, without) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
            }
        }
    }
}
