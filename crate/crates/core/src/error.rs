use std::path::PathBuf;

use thiserror::Error;

use crate::instrument::ItemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} values")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("sample contains a non-finite value at position {0}")]
    NonFinite(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown difference metric `{0}` (expected interval, ordinal or nominal)")]
    UnknownMetric(String),

    #[error("invalid degrees of freedom {0}; must be > 0")]
    InvalidDegreesOfFreedom(f64),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("score {value} for item {item}, rater `{rater}` lies outside scale [{min}, {max}]")]
    ScaleViolation {
        item: ItemId,
        rater: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("duplicate item {0}")]
    DuplicateItem(ItemId),

    #[error("duplicate rater label `{0}`")]
    DuplicateRater(String),

    #[error("item {0} has no ratings")]
    EmptyItem(ItemId),

    #[error("unknown item {0}")]
    UnknownItem(ItemId),

    #[error(
        "prediction coverage {covered}/{total} is below the required {required:.0}%; missing: {}",
        format_items(.missing)
    )]
    CoverageTooLow {
        covered: usize,
        total: usize,
        required: f64,
        missing: Vec<ItemId>,
    },

    #[error("duplicate comparison {0} vs {1}")]
    DuplicateComparison(ItemId, ItemId),

    #[error("invalid comparison {a} vs {b}: {reason}")]
    InvalidComparison {
        a: Box<ItemId>,
        b: Box<ItemId>,
        reason: String,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("runs use different scales: [{a_min}, {a_max}] vs [{b_min}, {b_max}]")]
    ScaleMismatch {
        a_min: f64,
        a_max: f64,
        b_min: f64,
        b_max: f64,
    },

    #[error("runs share only {shared} items; at least {needed} required")]
    InsufficientOverlap { shared: usize, needed: usize },

    #[error("cannot draw {requested} pairs of pairs; only {available} item pairs exist")]
    NotEnoughPairs { requested: usize, available: usize },

    #[error("threshold grid is empty")]
    EmptyGrid,

    #[error("threshold grid must be strictly increasing and finite")]
    InvalidGrid,

    #[error("agreement level {0} must lie in (0, 1]")]
    InvalidLevel(f64),

    #[error("agreement never reaches {level} on the threshold grid")]
    LevelNeverReached { level: f64 },

    #[error("fewer than two raters are eligible for per-rater analysis ({eligible} found)")]
    NoEligibleRaters { eligible: usize },

    #[error("systems were scored against different rater selections")]
    MismatchedRaters,

    #[error("report has no {0} data")]
    MissingFragment(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_items(items: &[ItemId]) -> String {
    const SHOWN: usize = 20;
    let mut out = items
        .iter()
        .take(SHOWN)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if items.len() > SHOWN {
        out.push_str(&format!(", ... ({} more)", items.len() - SHOWN));
    }
    out
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
