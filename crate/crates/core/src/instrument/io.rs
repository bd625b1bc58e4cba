//! CSV ingestion and serialization.
//!
//! All files are UTF-8, comma-separated, with a header row:
//!
//! * annotations: `word1,word2,<rater>,...` with empty fields for missing ratings
//! * predictions: `word1,word2,score`
//! * comparisons: `a1,a2,b1,b2,votes_a,votes_b,votes_equal`

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    AnnotationMatrix, InstrumentManifest, ItemId, PairComparison, PairComparisonSet, PredictionSet,
    Votes,
};
use crate::error::{Error, Result};

/// Minimum share of instrument items a prediction file must cover.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.9;

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(rdr)
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: source.to_string(),
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn parse_error(source: &str, record: &csv::StringRecord, column: usize, message: String) -> Error {
    Error::Parse {
        path: source.to_string(),
        line: record.position().map(|p| p.line()).unwrap_or(0),
        column,
        message,
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn item_at(source: &str, record: &csv::StringRecord, col: usize) -> Result<ItemId> {
    ItemId::new(&record[col], &record[col + 1])
        .map_err(|e| parse_error(source, record, col + 1, e.to_string()))
}

pub fn load_annotation_matrix(
    path: impl AsRef<Path>,
    manifest: &InstrumentManifest,
) -> Result<AnnotationMatrix> {
    let path = path.as_ref();
    read_annotation_matrix(open(path)?, &path.display().to_string(), manifest)
}

/// Reads an annotation grid. Item and rater order follow the file. A pair may
/// repeat only if the manifest declares it as a control or repeated item;
/// later appearances get increasing occurrence numbers, and those of a
/// declared control are flagged as controls.
pub fn read_annotation_matrix<R: Read>(
    rdr: R,
    source: &str,
    manifest: &InstrumentManifest,
) -> Result<AnnotationMatrix> {
    let mut rdr = csv_reader(rdr);
    let header = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if header.len() < 3 {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 1,
            column: header.len(),
            message: "header needs word1, word2 and at least one rater column".into(),
        });
    }
    let raters: Vec<String> = header.iter().skip(2).map(str::to_string).collect();

    let mut items = Vec::new();
    let mut scores = Vec::new();
    let mut seen: HashMap<(String, String), u32> = HashMap::new();
    let mut repeat_controls = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let mut item = item_at(source, &record, 0)?;
        let (l, r) = item.pair_key();
        let count = seen.entry((l.to_string(), r.to_string())).or_insert(0);
        if *count > 0 {
            if !manifest.allows_repeat(&item) {
                return Err(Error::DuplicateItem(item));
            }
            item = item.with_occurrence(*count);
            if manifest.is_declared_control(&item) {
                repeat_controls.push(item.clone());
            }
        }
        *count += 1;

        let row = record
            .iter()
            .enumerate()
            .skip(2)
            .map(|(col, field)| {
                if field.is_empty() {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|_| {
                        parse_error(source, &record, col + 1, format!("invalid score `{field}`"))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        items.push(item);
        scores.push(row);
    }
    AnnotationMatrix::new(manifest.name.clone(), items, raters, scores, manifest.scale)?
        .with_controls(&repeat_controls)
}

/// Writes `m` in the annotation dialect; floats use the shortest
/// representation that parses back to the same value.
pub fn write_annotation_matrix<W: Write>(m: &AnnotationMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<annotation output>", std::io::Error::other(e));
    let mut header = vec!["word1".to_string(), "word2".to_string()];
    header.extend(m.raters().iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (item, row) in m.items().iter().zip(m.rows()) {
        let mut rec = vec![item.left().to_string(), item.right().to_string()];
        rec.extend(
            row.iter()
                .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<annotation output>", e))?;
    Ok(())
}

pub fn load_predictions(
    path: impl AsRef<Path>,
    instrument: &AnnotationMatrix,
    min_coverage: f64,
) -> Result<PredictionSet> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".to_string());
    read_predictions(
        open(path)?,
        &path.display().to_string(),
        &name,
        instrument,
        min_coverage,
    )
}

/// Reads `word1,word2,score` rows. Every row must name an instrument item,
/// and the rows must cover at least `min_coverage` of the instrument.
pub fn read_predictions<R: Read>(
    rdr: R,
    source: &str,
    system_name: &str,
    instrument: &AnnotationMatrix,
    min_coverage: f64,
) -> Result<PredictionSet> {
    let known: HashSet<(&str, &str)> = instrument.items().iter().map(ItemId::pair_key).collect();
    let mut rdr = csv_reader(rdr);
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        if record.len() != 3 {
            return Err(parse_error(
                source,
                &record,
                record.len(),
                "expected word1,word2,score".into(),
            ));
        }
        let item = item_at(source, &record, 0)?;
        if !known.contains(&item.pair_key()) {
            return Err(parse_error(
                source,
                &record,
                1,
                format!(
                    "item {item} is not part of instrument `{}`",
                    instrument.name()
                ),
            ));
        }
        if !seen.insert(item.clone()) {
            return Err(parse_error(
                source,
                &record,
                1,
                format!("duplicate prediction for {item}"),
            ));
        }
        let score: f64 = record[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                parse_error(
                    source,
                    &record,
                    3,
                    format!("invalid score `{}`", &record[2]),
                )
            })?;
        entries.push((item, score));
    }
    let set = PredictionSet::new(system_name, entries)?;
    set.coverage(instrument).require(min_coverage)?;
    Ok(set)
}

pub fn load_pair_comparisons(
    path: impl AsRef<Path>,
    base_instrument: &str,
) -> Result<PairComparisonSet> {
    let path = path.as_ref();
    read_pair_comparisons(open(path)?, &path.display().to_string(), base_instrument)
}

pub fn read_pair_comparisons<R: Read>(
    rdr: R,
    source: &str,
    base_instrument: &str,
) -> Result<PairComparisonSet> {
    let mut rdr = csv_reader(rdr);
    let mut comparisons = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        if record.len() != 7 {
            return Err(parse_error(
                source,
                &record,
                record.len(),
                "expected a1,a2,b1,b2,votes_a,votes_b,votes_equal".into(),
            ));
        }
        let a = item_at(source, &record, 0)?;
        let b = item_at(source, &record, 2)?;
        let count = |col: usize| -> Result<u32> {
            record[col].parse::<u32>().map_err(|_| {
                parse_error(
                    source,
                    &record,
                    col + 1,
                    format!(
                        "vote count `{}` is not a non-negative integer",
                        &record[col]
                    ),
                )
            })
        };
        let votes = Votes {
            a_more: count(4)?,
            b_more: count(5)?,
            equal: count(6)?,
        };
        let cmp = PairComparison::new(a, b, votes)
            .map_err(|e| parse_error(source, &record, 5, e.to_string()))?;
        comparisons.push(cmp);
    }
    PairComparisonSet::new(base_instrument, comparisons)
}
