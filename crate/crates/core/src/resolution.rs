//! Resolution of an instrument: the smallest difference in item means that a
//! pairs-of-pairs comparison confirms at a chosen agreement level.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{
    AnnotationMatrix, ItemId, PairComparison, PairComparisonSet, Scale, Votes,
};

/// Absolute tolerance when comparing a mean difference against a threshold,
/// so that a grid point such as 0.3 still includes a delta of exactly 0.3.
pub const THRESHOLD_EPS: f64 = 1e-9;
pub const DEFAULT_GRID_STEP: f64 = 0.1;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    AMore,
    BMore,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseDirection {
    AMore,
    BMore,
    Tie,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::AMore => "A_more",
            Verdict::BMore => "B_more",
            Verdict::Equal => "Equal",
        })
    }
}

impl fmt::Display for BaseDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseDirection::AMore => "A_more",
            BaseDirection::BMore => "B_more",
            BaseDirection::Tie => "Tie",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub comparison: PairComparison,
    pub verdict: Verdict,
    /// Share of votes behind the plurality.
    pub weight: f64,
    pub base_delta: f64,
    pub base_direction: BaseDirection,
    /// Two or more options shared the top vote count; the verdict fell back
    /// to Equal.
    pub vote_tie: bool,
}

impl ComparisonVerdict {
    /// Whether the human verdict confirms the base instrument's ordering.
    pub fn agrees(&self) -> bool {
        matches!(
            (self.verdict, self.base_direction),
            (Verdict::AMore, BaseDirection::AMore)
                | (Verdict::BMore, BaseDirection::BMore)
                | (Verdict::Equal, BaseDirection::Tie)
        )
    }
}

fn plurality(v: Votes) -> (Verdict, u32, bool) {
    let options = [
        (Verdict::AMore, v.a_more),
        (Verdict::BMore, v.b_more),
        (Verdict::Equal, v.equal),
    ];
    let top = options.iter().map(|o| o.1).max().unwrap_or(0);
    let leaders: Vec<Verdict> = options.iter().filter(|o| o.1 == top).map(|o| o.0).collect();
    if leaders.len() > 1 {
        (Verdict::Equal, top, true)
    } else {
        (leaders[0], top, false)
    }
}

/// Plurality verdict per comparison, with the base instrument's view of the
/// same two items.
pub fn judge(set: &PairComparisonSet, m: &AnnotationMatrix) -> Result<Vec<ComparisonVerdict>> {
    set.comparisons()
        .iter()
        .map(|c| {
            let mean_of = |it: &ItemId| {
                m.index_of(it)
                    .map(|i| m.item_mean(i))
                    .ok_or_else(|| Error::UnknownItem(it.clone()))
            };
            let (ma, mb) = (mean_of(&c.pair_a)?, mean_of(&c.pair_b)?);
            let (verdict, top, vote_tie) = plurality(c.votes);
            let base_direction = if ma > mb {
                BaseDirection::AMore
            } else if mb > ma {
                BaseDirection::BMore
            } else {
                BaseDirection::Tie
            };
            Ok(ComparisonVerdict {
                comparison: c.clone(),
                verdict,
                weight: f64::from(top) / f64::from(c.votes.total()),
                base_delta: (ma - mb).abs(),
                base_direction,
                vote_tie,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Each verdict counts in proportion to its plurality share.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// `None` when no verdict reaches the threshold.
    pub agreement: Option<f64>,
    pub n_included: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCurve {
    pub weighting: Weighting,
    pub points: Vec<CurvePoint>,
}

/// Thresholds 0, step, 2*step, ... up to `max` inclusive, rounded to
/// nine decimals so that decimal steps land on their nominal values.
pub fn threshold_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && max >= 0.0 && max.is_finite()) {
        return Err(Error::InvalidGrid);
    }
    let n = (max / step + THRESHOLD_EPS).floor() as usize;
    Ok((0..=n)
        .map(|i| (i as f64 * step * 1e9).round() / 1e9)
        .collect())
}

pub fn default_grid(scale: Scale) -> Vec<f64> {
    threshold_grid(scale.range(), DEFAULT_GRID_STEP).expect("scale range is positive")
}

fn included(delta: f64, threshold: f64) -> bool {
    delta >= threshold - THRESHOLD_EPS
}

/// Agreement between human verdicts and the base instrument at each
/// threshold, counting only verdicts whose base delta reaches it.
pub fn agreement_curve(
    verdicts: &[ComparisonVerdict],
    grid: &[f64],
    weighting: Weighting,
) -> Result<AgreementCurve> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid);
    }
    if verdicts.is_empty() {
        return Err(Error::InsufficientData("no verdicts".into()));
    }
    let points = grid
        .iter()
        .map(|&t| {
            let (mut hit, mut total, mut n) = (0.0, 0.0, 0);
            for v in verdicts.iter().filter(|v| included(v.base_delta, t)) {
                let w = match weighting {
                    Weighting::Unweighted => 1.0,
                    Weighting::Weighted => v.weight,
                };
                total += w;
                if v.agrees() {
                    hit += w;
                }
                n += 1;
            }
            CurvePoint {
                threshold: t,
                agreement: (n > 0).then(|| hit / total),
                n_included: n,
            }
        })
        .collect();
    Ok(AgreementCurve { weighting, points })
}

/// Smallest threshold whose agreement reaches `level`.
pub fn resolution_at(curve: &AgreementCurve, level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if curve.points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    curve
        .points
        .iter()
        .find(|p| p.n_included > 0 && p.agreement.is_some_and(|a| a >= level))
        .map(|p| p.threshold)
        .ok_or(Error::LevelNeverReached { level })
}

/// One cell of the upper triangle of the item distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    /// Row indices into the matrix the distances were computed from.
    pub i: usize,
    pub j: usize,
    pub a: ItemId,
    pub b: ItemId,
    pub delta: f64,
}

/// All n(n-1)/2 absolute differences of item means, row-major.
pub fn distance_matrix(m: &AnnotationMatrix) -> Vec<Distance> {
    let means = m.item_means();
    let n = means.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(Distance {
                i,
                j,
                a: m.items()[i].clone(),
                b: m.items()[j].clone(),
                delta: (means[i] - means[j]).abs(),
            });
        }
    }
    out
}

/// Entries whose delta reaches `resolution`.
pub fn filter_by_resolution(dm: &[Distance], resolution: f64) -> Vec<Distance> {
    dm.iter()
        .filter(|d| included(d.delta, resolution))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub pairs: Vec<(ItemId, ItemId)>,
    pub base_deltas: Vec<f64>,
    /// Draws per delta bin, lowest bin first.
    pub bin_counts: Vec<usize>,
    /// Bins that held fewer pairs than their share; their deficit was drawn
    /// from the other bins.
    pub underfilled_bins: Vec<usize>,
}

/// Draws `n` item pairs stratified over `bins` equal-width bins of mean
/// difference, so that the sample is roughly uniform in difference.
pub fn sample_pair_of_pairs(
    m: &AnnotationMatrix,
    n: usize,
    seed: u64,
    bins: usize,
) -> Result<PairSample> {
    if m.n_items() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} item(s); need at least 2",
            m.n_items()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidGrid);
    }
    let dm = distance_matrix(m);
    if n > dm.len() {
        return Err(Error::NotEnoughPairs {
            requested: n,
            available: dm.len(),
        });
    }
    let max = dm.iter().map(|d| d.delta).fold(0.0, f64::max);
    let width = max / bins as f64;
    let mut pool: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (k, d) in dm.iter().enumerate() {
        let b = if width > 0.0 {
            ((d.delta / width) as usize).min(bins - 1)
        } else {
            0
        };
        pool[b].push(k);
    }

    let quotas = bin_quotas(&pool.iter().map(Vec::len).collect::<Vec<_>>(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n);
    for (members, &(q, _)) in pool.iter_mut().zip(&quotas) {
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..q]);
    }
    chosen.sort_unstable();

    Ok(PairSample {
        pairs: chosen
            .iter()
            .map(|&k| (dm[k].a.clone(), dm[k].b.clone()))
            .collect(),
        base_deltas: chosen.iter().map(|&k| dm[k].delta).collect(),
        bin_counts: quotas.iter().map(|q| q.0).collect(),
        underfilled_bins: quotas
            .iter()
            .enumerate()
            .filter(|(_, q)| q.1)
            .map(|(b, _)| b)
            .collect(),
    })
}

/// Per-bin draw counts (and whether the bin fell short of its share). The
/// remainder of n / bins goes to the most populated bins; deficits of small
/// bins move one at a time to bins with the most spare pairs.
fn bin_quotas(sizes: &[usize], n: usize) -> Vec<(usize, bool)> {
    let bins = sizes.len();
    let by_size = |spare: &dyn Fn(usize) -> usize| {
        let mut order: Vec<usize> = (0..bins).collect();
        order.sort_by(|&x, &y| spare(y).cmp(&spare(x)).then(x.cmp(&y)));
        order
    };
    let mut want = vec![n / bins; bins];
    for &b in by_size(&|b| sizes[b]).iter().take(n % bins) {
        want[b] += 1;
    }
    let mut quota: Vec<usize> = want.iter().zip(sizes).map(|(&w, &s)| w.min(s)).collect();
    let short: Vec<bool> = want.iter().zip(sizes).map(|(&w, &s)| w > s).collect();
    let mut deficit = n - quota.iter().sum::<usize>();
    while deficit > 0 {
        let order = by_size(&|b| sizes[b] - quota[b]);
        let mut moved = false;
        for b in order {
            if deficit == 0 || sizes[b] == quota[b] {
                break;
            }
            quota[b] += 1;
            deficit -= 1;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    quota.into_iter().zip(short).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::Scale;

    fn item(l: &str, r: &str) -> ItemId {
        ItemId::new(l, r).unwrap()
    }

    fn means(values: &[f64]) -> AnnotationMatrix {
        AnnotationMatrix::new(
            "means",
            (0..values.len())
                .map(|i| item(&format!("w{i}"), "x"))
                .collect(),
            vec!["mean".into()],
            values.iter().map(|&v| vec![Some(v)]).collect(),
            Scale::default(),
        )
        .unwrap()
    }

    fn cmp(a: &str, b: &str, votes: (u32, u32, u32)) -> PairComparison {
        PairComparison::new(
            item(a, "x"),
            item(b, "x"),
            Votes {
                a_more: votes.0,
                b_more: votes.1,
                equal: votes.2,
            },
        )
        .unwrap()
    }

    /// Two items 0.4 apart judged Equal by 80% of raters, and two items 3.09
    /// apart judged in the base instrument's direction by 92%.
    fn worked_examples() -> (AnnotationMatrix, Vec<ComparisonVerdict>) {
        let m = means(&[7.62, 7.22, 7.88, 4.79]);
        let set = PairComparisonSet::new(
            "means",
            vec![cmp("w0", "w1", (1, 1, 8)), cmp("w2", "w3", (23, 1, 1))],
        )
        .unwrap();
        let v = judge(&set, &m).unwrap();
        (m, v)
    }

    #[test]
    fn judge_worked_examples() {
        let (_, v) = worked_examples();
        assert_eq!(v[0].verdict, Verdict::Equal);
        assert!((v[0].weight - 0.8).abs() < 1e-12);
        assert!((v[0].base_delta - 0.4).abs() < 1e-12);
        assert!(!v[0].agrees());
        assert_eq!(v[1].verdict, Verdict::AMore);
        assert!((v[1].weight - 0.92).abs() < 1e-12);
        assert!((v[1].base_delta - 3.09).abs() < 1e-12);
        assert!(v[1].agrees());
    }

    #[test]
    fn unanimous_and_tied_votes() {
        let m = means(&[5.0, 3.0, 5.0]);
        let set = PairComparisonSet::new(
            "means",
            vec![
                cmp("w0", "w1", (13, 0, 0)),
                cmp("w1", "w2", (4, 4, 2)),
                cmp("w0", "w2", (0, 0, 3)),
            ],
        )
        .unwrap();
        let v = judge(&set, &m).unwrap();
        assert_eq!(
            (v[0].verdict, v[0].weight, v[0].vote_tie),
            (Verdict::AMore, 1.0, false)
        );
        assert_eq!(
            (v[1].verdict, v[1].weight, v[1].vote_tie),
            (Verdict::Equal, 0.4, true)
        );
        assert_eq!(v[2].base_direction, BaseDirection::Tie);
        assert!(v[2].agrees());

        let unknown = PairComparisonSet::new("means", vec![cmp("w0", "zz", (1, 0, 0))]).unwrap();
        assert!(matches!(judge(&unknown, &m), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn single_verdict_curves() {
        let (_, v) = worked_examples();
        let grid = threshold_grid(10.0, 0.1).unwrap();
        let equal = agreement_curve(&v[..1], &grid, Weighting::Unweighted).unwrap();
        for p in &equal.points {
            if p.threshold <= 0.4 {
                assert_eq!(
                    (p.agreement, p.n_included),
                    (Some(0.0), 1),
                    "t={}",
                    p.threshold
                );
            } else {
                assert_eq!((p.agreement, p.n_included), (None, 0), "t={}", p.threshold);
            }
        }
        let far = agreement_curve(&v[1..], &grid, Weighting::Weighted).unwrap();
        for p in &far.points {
            if p.threshold <= 3.09 {
                assert_eq!(p.agreement, Some(1.0));
            } else {
                assert_eq!(p.n_included, 0);
            }
        }
    }

    #[test]
    fn weighted_agreement() {
        let (_, v) = worked_examples();
        let c = agreement_curve(&v, &[0.0, 1.0], Weighting::Weighted).unwrap();
        // 0.92 / (0.8 + 0.92)
        assert!((c.points[0].agreement.unwrap() - 0.92 / 1.72).abs() < 1e-12);
        assert_eq!(c.points[1].agreement, Some(1.0));
        let u = agreement_curve(&v, &[0.0], Weighting::Unweighted).unwrap();
        assert_eq!(u.points[0].agreement, Some(0.5));
    }

    #[test]
    fn curve_and_resolution_errors() {
        let (_, v) = worked_examples();
        assert!(matches!(
            agreement_curve(&v, &[], Weighting::Unweighted),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            agreement_curve(&v, &[0.5, 0.5], Weighting::Unweighted),
            Err(Error::InvalidGrid)
        ));
        let c = agreement_curve(&v, &[0.0, 1.0, 5.0], Weighting::Unweighted).unwrap();
        assert_eq!(resolution_at(&c, 0.95).unwrap(), 1.0);
        assert_eq!(resolution_at(&c, 0.5).unwrap(), 0.0);
        assert!(matches!(
            resolution_at(&c, 0.0),
            Err(Error::InvalidLevel(_))
        ));
        let bad = agreement_curve(&v[..1], &[0.0], Weighting::Unweighted).unwrap();
        assert!(matches!(
            resolution_at(&bad, 0.5),
            Err(Error::LevelNeverReached { .. })
        ));
    }

    #[test]
    fn grid_values() {
        let g = default_grid(Scale::default());
        assert_eq!(g.len(), 101);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[18], 1.8);
        assert_eq!(*g.last().unwrap(), 10.0);
    }

    #[test]
    fn distances() {
        let dm = distance_matrix(&means(&[3.0, 5.0]));
        assert_eq!(dm.len(), 1);
        assert_eq!(dm[0].delta, 2.0);
        let dm = distance_matrix(&means(&[0.0, 1.0, 2.5, 4.0, 9.0]));
        assert_eq!(dm.len(), 10);
        assert_eq!(filter_by_resolution(&dm, 0.0).len(), 10);
        assert_eq!(filter_by_resolution(&dm, 1.5).len(), 9);
        assert_eq!(filter_by_resolution(&dm, 1.6).len(), 7);
        assert!(filter_by_resolution(&dm, 9.5).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_exhaustive() {
        let m = means(&[0.0, 1.0, 2.5, 4.0, 9.0]);
        let a = sample_pair_of_pairs(&m, 4, 7, DEFAULT_BINS).unwrap();
        let b = sample_pair_of_pairs(&m, 4, 7, DEFAULT_BINS).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 4);
        let all = sample_pair_of_pairs(&m, 10, 99, DEFAULT_BINS).unwrap();
        assert_eq!(all.pairs.len(), 10);
        let dm = distance_matrix(&m);
        let expected: Vec<_> = dm.iter().map(|d| (d.a.clone(), d.b.clone())).collect();
        assert_eq!(all.pairs, expected);
        assert!(matches!(
            sample_pair_of_pairs(&m, 11, 0, DEFAULT_BINS),
            Err(Error::NotEnoughPairs {
                requested: 11,
                available: 10
            })
        ));
    }

    #[test]
    fn quotas_flat_when_bins_are_full() {
        let q = bin_quotas(&[50, 40, 30, 30], 10);
        assert_eq!(q.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
        let q = bin_quotas(&[50, 0, 1, 30], 12);
        assert_eq!(q.iter().map(|x| x.0).sum::<usize>(), 12);
        assert_eq!(q[1], (0, true));
        assert_eq!(q[2], (1, true));
    }
}
