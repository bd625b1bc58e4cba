//! Instrument data model: rated items, the annotation grid, system
//! predictions and pairs-of-pairs comparison votes.

mod io;
mod manifest;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_annotation_matrix, load_pair_comparisons, load_predictions, read_annotation_matrix,
    read_pair_comparisons, read_predictions, write_annotation_matrix, DEFAULT_MIN_COVERAGE,
};
pub use manifest::{load_manifest, InstrumentManifest, Provenance};

/// A rated word pair.
///
/// Tokens are trimmed and lowercased. Identity ignores token order, so
/// `(cash, money)` and `(money, cash)` name the same item. `occurrence`
/// distinguishes deliberate repeats of a pair within one instrument
/// (0 for the first appearance).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemId {
    left: String,
    right: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    occurrence: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl ItemId {
    pub fn new(left: &str, right: &str) -> Result<Self> {
        let left = left.trim().to_lowercase();
        let right = right.trim().to_lowercase();
        if left.is_empty() || right.is_empty() {
            return Err(Error::Config(format!(
                "item tokens must be non-empty, got ({left:?}, {right:?})"
            )));
        }
        Ok(ItemId {
            left,
            right,
            occurrence: 0,
        })
    }

    pub fn with_occurrence(mut self, occurrence: u32) -> Self {
        self.occurrence = occurrence;
        self
    }

    /// Parses `left,right`, optionally suffixed with `#k` to address the
    /// k-th (1-based) appearance of a repeated pair.
    pub fn parse(s: &str) -> Result<Self> {
        let (pair, occurrence) =
            match s.rsplit_once('#') {
                Some((pair, k)) => {
                    let k: u32 =
                        k.trim().parse().ok().filter(|&k| k >= 1).ok_or_else(|| {
                            Error::Config(format!("bad occurrence suffix in `{s}`"))
                        })?;
                    (pair, k - 1)
                }
                None => (s, 0),
            };
        let (left, right) = pair
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("expected `left,right`, got `{s}`")))?;
        Ok(ItemId::new(left, right)?.with_occurrence(occurrence))
    }

    pub fn left(&self) -> &str {
        &self.left
    }

    pub fn right(&self) -> &str {
        &self.right
    }

    pub fn occurrence(&self) -> u32 {
        self.occurrence
    }

    /// Both tokens are the same word.
    pub fn is_identical_pair(&self) -> bool {
        self.left == self.right
    }

    /// Order-free token key shared by every occurrence of the pair.
    pub fn pair_key(&self) -> (&str, &str) {
        if self.left <= self.right {
            (&self.left, &self.right)
        } else {
            (&self.right, &self.left)
        }
    }

    fn identity(&self) -> ((&str, &str), u32) {
        (self.pair_key(), self.occurrence)
    }
}

impl PartialEq for ItemId {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for ItemId {}

impl Hash for ItemId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state);
    }
}

impl PartialOrd for ItemId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ItemId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.identity().cmp(&other.identity())
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.left, self.right)?;
        if self.occurrence > 0 {
            write!(f, "#{}", self.occurrence + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Manifest(format!(
                "scale must satisfy min < max, got [{min}, {max}]"
            )));
        }
        Ok(Scale { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale {
            min: 0.0,
            max: 10.0,
        }
    }
}

/// Items x raters grid of optional scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix {
    name: String,
    items: Vec<ItemId>,
    raters: Vec<String>,
    scores: Vec<Vec<Option<f64>>>,
    scale: Scale,
    controls: Vec<bool>,
    index: HashMap<ItemId, usize>,
}

impl AnnotationMatrix {
    /// Validates and assembles a matrix. Items whose two tokens are the same
    /// word are flagged as controls; see [`AnnotationMatrix::with_controls`]
    /// for other calibration items.
    pub fn new(
        name: impl Into<String>,
        items: Vec<ItemId>,
        raters: Vec<String>,
        scores: Vec<Vec<Option<f64>>>,
        scale: Scale,
    ) -> Result<Self> {
        if scores.len() != items.len() {
            return Err(Error::LengthMismatch {
                left: items.len(),
                right: scores.len(),
            });
        }
        let mut seen = HashSet::new();
        for r in &raters {
            if !seen.insert(r.as_str()) {
                return Err(Error::DuplicateRater(r.clone()));
            }
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, (item, row)) in items.iter().zip(&scores).enumerate() {
            if index.insert(item.clone(), i).is_some() {
                return Err(Error::DuplicateItem(item.clone()));
            }
            if row.len() != raters.len() {
                return Err(Error::LengthMismatch {
                    left: raters.len(),
                    right: row.len(),
                });
            }
            for (r, cell) in row.iter().enumerate() {
                if let Some(v) = *cell {
                    if !v.is_finite() || !scale.contains(v) {
                        return Err(Error::ScaleViolation {
                            item: item.clone(),
                            rater: raters[r].clone(),
                            value: v,
                            min: scale.min,
                            max: scale.max,
                        });
                    }
                }
            }
            if row.iter().all(Option::is_none) {
                return Err(Error::EmptyItem(item.clone()));
            }
        }
        let controls = items.iter().map(ItemId::is_identical_pair).collect();
        Ok(AnnotationMatrix {
            name: name.into(),
            items,
            raters,
            scores,
            scale,
            controls,
            index,
        })
    }

    /// Additionally flags `items` as controls.
    pub fn with_controls(mut self, items: &[ItemId]) -> Result<Self> {
        for it in items {
            let i = self
                .index_of(it)
                .ok_or_else(|| Error::UnknownItem(it.clone()))?;
            self.controls[i] = true;
        }
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    /// Rows in item order, one optional score per rater.
    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.scores
    }

    pub fn score(&self, item: usize, rater: usize) -> Option<f64> {
        self.scores[item][rater]
    }

    pub fn index_of(&self, item: &ItemId) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Present scores of one item, in rater order.
    pub fn votes(&self, item: usize) -> Vec<f64> {
        self.scores[item].iter().flatten().copied().collect()
    }

    pub fn item_mean(&self, item: usize) -> f64 {
        let votes = self.votes(item);
        votes.iter().sum::<f64>() / votes.len() as f64
    }

    pub fn item_means(&self) -> Vec<f64> {
        (0..self.items.len()).map(|i| self.item_mean(i)).collect()
    }

    pub fn is_control(&self, item: usize) -> bool {
        self.controls[item]
    }

    pub fn control_items(&self) -> Vec<ItemId> {
        self.items
            .iter()
            .zip(&self.controls)
            .filter(|(_, &c)| c)
            .map(|(it, _)| it.clone())
            .collect()
    }

    /// Number of present scores in a rater column.
    pub fn rater_count(&self, rater: usize) -> usize {
        self.scores
            .iter()
            .filter(|row| row[rater].is_some())
            .count()
    }

    /// Raters with a score for every item.
    pub fn complete_raters(&self) -> Vec<usize> {
        (0..self.raters.len())
            .filter(|&r| self.rater_count(r) == self.items.len())
            .collect()
    }

    fn select(&self, keep: &[usize]) -> AnnotationMatrix {
        let items: Vec<ItemId> = keep.iter().map(|&i| self.items[i].clone()).collect();
        let index = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.clone(), i))
            .collect();
        AnnotationMatrix {
            name: self.name.clone(),
            items,
            raters: self.raters.clone(),
            scores: keep.iter().map(|&i| self.scores[i].clone()).collect(),
            scale: self.scale,
            controls: keep.iter().map(|&i| self.controls[i]).collect(),
            index,
        }
    }
}

/// Which items [`exclude_items`] removes.
#[derive(Debug, Clone, PartialEq)]
pub enum Exclusion {
    Controls,
    Items(Vec<ItemId>),
}

/// Returns a copy of `m` without the selected items; `m` is untouched.
pub fn exclude_items(m: &AnnotationMatrix, which: &Exclusion) -> Result<AnnotationMatrix> {
    let drop: HashSet<usize> = match which {
        Exclusion::Controls => (0..m.n_items()).filter(|&i| m.is_control(i)).collect(),
        Exclusion::Items(list) => list
            .iter()
            .map(|it| m.index_of(it).ok_or_else(|| Error::UnknownItem(it.clone())))
            .collect::<Result<_>>()?,
    };
    let keep: Vec<usize> = (0..m.n_items()).filter(|i| !drop.contains(i)).collect();
    Ok(m.select(&keep))
}

/// Coverage of an instrument's items by a prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
    pub missing: Vec<ItemId>,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }

    pub fn require(&self, min_fraction: f64) -> Result<()> {
        if self.covered == 0 || self.fraction() < min_fraction {
            return Err(Error::CoverageTooLow {
                covered: self.covered,
                total: self.total,
                required: min_fraction * 100.0,
                missing: self.missing.clone(),
            });
        }
        Ok(())
    }
}

/// Per-item scores produced by a system under test, keyed by word pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    system_name: String,
    scores: BTreeMap<(String, String), f64>,
}

impl PredictionSet {
    pub fn new(
        system_name: impl Into<String>,
        entries: impl IntoIterator<Item = (ItemId, f64)>,
    ) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (item, score) in entries {
            if !score.is_finite() {
                return Err(Error::DegenerateInput(format!(
                    "prediction for {item} is not finite"
                )));
            }
            let (l, r) = item.pair_key();
            if scores
                .insert((l.to_string(), r.to_string()), score)
                .is_some()
            {
                return Err(Error::DuplicateItem(item));
            }
        }
        Ok(PredictionSet {
            system_name: system_name.into(),
            scores,
        })
    }

    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Prediction for an item; repeated occurrences share one prediction.
    pub fn score(&self, item: &ItemId) -> Option<f64> {
        let (l, r) = item.pair_key();
        self.scores.get(&(l.to_string(), r.to_string())).copied()
    }

    pub fn coverage(&self, m: &AnnotationMatrix) -> Coverage {
        let missing: Vec<ItemId> = m
            .items()
            .iter()
            .filter(|it| self.score(it).is_none())
            .cloned()
            .collect();
        Coverage {
            covered: m.n_items() - missing.len(),
            total: m.n_items(),
            missing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub a_more: u32,
    pub b_more: u32,
    pub equal: u32,
}

impl Votes {
    pub fn total(&self) -> u32 {
        self.a_more + self.b_more + self.equal
    }
}

/// A pairs-of-pairs judgment: which of two items is more internally similar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub pair_a: ItemId,
    pub pair_b: ItemId,
    pub votes: Votes,
}

impl PairComparison {
    pub fn new(pair_a: ItemId, pair_b: ItemId, votes: Votes) -> Result<Self> {
        if pair_a == pair_b {
            return Err(Error::InvalidComparison {
                a: Box::new(pair_a),
                b: Box::new(pair_b),
                reason: "an item cannot be compared with itself".into(),
            });
        }
        if votes.total() == 0 {
            return Err(Error::InvalidComparison {
                a: Box::new(pair_a),
                b: Box::new(pair_b),
                reason: "no votes".into(),
            });
        }
        Ok(PairComparison {
            pair_a,
            pair_b,
            votes,
        })
    }

    /// Same judgment with the A/B labels exchanged.
    pub fn swapped(&self) -> PairComparison {
        PairComparison {
            pair_a: self.pair_b.clone(),
            pair_b: self.pair_a.clone(),
            votes: Votes {
                a_more: self.votes.b_more,
                b_more: self.votes.a_more,
                equal: self.votes.equal,
            },
        }
    }

    fn key(&self) -> (ItemId, ItemId) {
        if self.pair_a <= self.pair_b {
            (self.pair_a.clone(), self.pair_b.clone())
        } else {
            (self.pair_b.clone(), self.pair_a.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairComparisonSet {
    base_instrument: String,
    comparisons: Vec<PairComparison>,
}

impl PairComparisonSet {
    pub fn new(
        base_instrument: impl Into<String>,
        comparisons: Vec<PairComparison>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &comparisons {
            let key = c.key();
            if !seen.insert(key.clone()) {
                return Err(Error::DuplicateComparison(key.0, key.1));
            }
        }
        Ok(PairComparisonSet {
            base_instrument: base_instrument.into(),
            comparisons,
        })
    }

    pub fn base_instrument(&self) -> &str {
        &self.base_instrument
    }

    pub fn comparisons(&self) -> &[PairComparison] {
        &self.comparisons
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }
}
