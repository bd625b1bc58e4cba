//! Characterization report: assembly, JSON/markdown rendering and the CSV
//! tables and plot data behind it.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{EvaluationResult, SystemComparison};
use crate::instrument::{AnnotationMatrix, InstrumentManifest, ItemId};
use crate::precision::{precision_profile, repeatability, PrecisionProfile};
use crate::reproducibility::RunComparison;
use crate::resolution::{AgreementCurve, ComparisonVerdict, CurvePoint, Weighting};

pub const TRUE_VALUE_CAVEAT: &str = "The true similarity of an item is unknowable. Every figure \
in this report describes the instrument (its raters, guidelines and procedure), not a ground \
truth, and holds only for the conditions recorded in the manifest.";

pub const COMPARISON_CAVEAT: &str = "Significance tests between systems are reported without \
correction for multiple comparisons.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSummary {
    pub name: String,
    pub n_items: usize,
    pub n_raters: usize,
    pub n_complete_raters: usize,
    pub n_votes: usize,
    pub control_items: Vec<ItemId>,
    /// Items removed before analysis.
    pub excluded_items: Vec<ItemId>,
}

impl InstrumentSummary {
    pub fn of(m: &AnnotationMatrix, excluded_items: Vec<ItemId>) -> Self {
        InstrumentSummary {
            name: m.name().to_string(),
            n_items: m.n_items(),
            n_raters: m.n_raters(),
            n_complete_raters: m.complete_raters().len(),
            n_votes: (0..m.n_items()).map(|i| m.votes(i).len()).sum(),
            control_items: m.control_items(),
            excluded_items,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSection {
    pub verdicts: Vec<ComparisonVerdict>,
    pub curve: AgreementCurve,
    pub level: f64,
    /// Smallest grid threshold reaching `level`, if any.
    pub resolution: Option<f64>,
    pub statement: String,
}

impl ResolutionSection {
    pub fn new(
        verdicts: Vec<ComparisonVerdict>,
        curve: AgreementCurve,
        level: f64,
    ) -> Result<Self> {
        let resolution = match crate::resolution::resolution_at(&curve, level) {
            Ok(r) => Some(r),
            Err(Error::LevelNeverReached { .. }) => None,
            Err(e) => return Err(e),
        };
        let statement = match resolution {
            Some(r) => format!("{} at {}", fmt3(r), fmt3(level)),
            None => format!("agreement never reaches {} on the grid", fmt3(level)),
        };
        Ok(ResolutionSection {
            verdicts,
            curve,
            level,
            resolution,
            statement,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSection {
    pub significance_level: f64,
    pub results: Vec<EvaluationResult>,
    pub comparisons: Vec<SystemComparison>,
    /// Per instrument, systems by decreasing indication.
    pub rankings: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub manifest: InstrumentManifest,
    pub instrument: InstrumentSummary,
    pub precision: Option<PrecisionProfile>,
    pub repeatability_alpha: Option<f64>,
    pub run_comparison: Option<RunComparison>,
    pub resolution: Option<ResolutionSection>,
    pub evaluation: Option<EvaluationSection>,
    /// Why an optional section is missing, and similar remarks.
    pub notes: Vec<String>,
    pub caveats: Vec<String>,
}

impl CharacterizationReport {
    /// Precision and repeatability of `m`. Sections that the data cannot
    /// support (e.g. single-vote items only) are left empty with a note.
    pub fn characterize(
        manifest: &InstrumentManifest,
        m: &AnnotationMatrix,
        excluded: Vec<ItemId>,
    ) -> Self {
        let mut notes = Vec::new();
        let precision = precision_profile(m)
            .map_err(|e| notes.push(format!("precision profile unavailable: {e}")))
            .ok();
        let repeatability_alpha = repeatability(m)
            .map_err(|e| notes.push(format!("repeatability unavailable: {e}")))
            .ok();
        CharacterizationReport {
            manifest: manifest.clone(),
            instrument: InstrumentSummary::of(m, excluded),
            precision,
            repeatability_alpha,
            run_comparison: None,
            resolution: None,
            evaluation: None,
            notes,
            caveats: vec![TRUE_VALUE_CAVEAT.to_string()],
        }
    }

    pub fn with_evaluation(mut self, section: EvaluationSection) -> Self {
        if !section.comparisons.is_empty() {
            self.caveats.push(COMPARISON_CAVEAT.to_string());
        }
        self.evaluation = Some(section);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let w = &mut md;
        let m = &self.manifest;
        let inst = &self.instrument;
        line(w, format!("# Instrument report: {}", m.name));
        line(w, "");
        line(w, "## Instrument");
        line(w, "");
        line(w, format!("- scale: [{}, {}]", m.scale.min, m.scale.max));
        line(w, format!("- items: {}", inst.n_items));
        line(
            w,
            format!(
                "- raters: {} ({} complete)",
                inst.n_raters, inst.n_complete_raters
            ),
        );
        line(w, format!("- votes: {}", inst.n_votes));
        line(
            w,
            format!("- control items: {}", item_list(&inst.control_items)),
        );
        if !inst.excluded_items.is_empty() {
            line(
                w,
                format!(
                    "- excluded before analysis: {}",
                    item_list(&inst.excluded_items)
                ),
            );
        }
        if !m.provenance.source_uri.is_empty() {
            line(w, format!("- source: {}", m.provenance.source_uri));
        }
        if !m.provenance.collection_date.is_empty() {
            line(w, format!("- collected: {}", m.provenance.collection_date));
        }
        for (title, text) in [
            ("Guidelines", &m.guidelines),
            ("Procedure", &m.procedure_notes),
            ("Principle", &m.principle_notes),
        ] {
            if !text.trim().is_empty() {
                line(w, "");
                line(w, format!("### {title}"));
                line(w, "");
                line(w, text.trim());
            }
        }

        line(w, "");
        line(w, "## Precision and repeatability");
        line(w, "");
        line(
            w,
            format!(
                "- Krippendorff's alpha (interval): {}",
                opt3(self.repeatability_alpha)
            ),
        );
        if let Some(p) = &self.precision {
            line(w, format!("- mean per-item stdev: {}", fmt3(p.mean_stdev)));
            line(
                w,
                format!("- stdev of per-item stdevs: {}", fmt3(p.stdev_of_stdev)),
            );
            line(
                w,
                format!(
                    "- central two thirds of per-item stdevs: [{}, {}]",
                    fmt3(p.central_band.0),
                    fmt3(p.central_band.1)
                ),
            );
            for (label, item) in [
                ("highest", &p.highest_variance),
                ("lowest", &p.lowest_variance),
            ] {
                if let Some(it) = item {
                    let s = p
                        .per_item
                        .iter()
                        .find(|s| &s.item == it)
                        .expect("item in profile");
                    line(
                        w,
                        format!(
                            "- {label} variance: {it} (mean {}, stdev {})",
                            fmt3(s.mean),
                            opt3(s.stdev)
                        ),
                    );
                }
            }
            if !p.single_vote_items.is_empty() {
                line(
                    w,
                    format!("- single-vote items: {}", p.single_vote_items.len()),
                );
            }
        }

        if let Some(c) = &self.run_comparison {
            line(w, "");
            line(w, format!("## Reproducibility: {} vs {}", c.run_a, c.run_b));
            line(w, "");
            line(w, format!("- shared items: {}", c.per_item_deltas.len()));
            line(
                w,
                format!("- Spearman rho of item means: {}", fmt3(c.rho_of_means)),
            );
            line(
                w,
                format!("- Pearson r of item stdevs: {}", opt3(c.pearson_of_stdevs)),
            );
            line(
                w,
                format!(
                    "- mean stdev: {} vs {}",
                    opt3(c.mean_stdev_a),
                    opt3(c.mean_stdev_b)
                ),
            );
            line(
                w,
                format!("- alpha: {} vs {}", opt3(c.alpha_a), opt3(c.alpha_b)),
            );
            line(w, format!("- only in {}: {}", c.run_a, c.only_in_a.len()));
            line(w, format!("- only in {}: {}", c.run_b, c.only_in_b.len()));
            line(w, "");
            line(w, "| item | mean a | mean b | stdev a | stdev b |");
            line(w, "|---|---|---|---|---|");
            for d in &c.top_mean_movers {
                line(
                    w,
                    format!(
                        "| {} | {} | {} | {} | {} |",
                        d.item,
                        fmt3(d.mean_a),
                        fmt3(d.mean_b),
                        opt3(d.stdev_a),
                        opt3(d.stdev_b)
                    ),
                );
            }
            if !c.top_stdev_movers.is_empty() {
                line(w, "");
                line(w, "Largest stdev changes:");
                line(w, "");
                for d in &c.top_stdev_movers {
                    line(
                        w,
                        format!("- {}: {} -> {}", d.item, opt3(d.stdev_a), opt3(d.stdev_b)),
                    );
                }
            }
        }

        if let Some(r) = &self.resolution {
            line(w, "");
            line(w, "## Resolution");
            line(w, "");
            line(w, format!("- resolution: {}", r.statement));
            line(w, format!("- verdicts: {}", r.verdicts.len()));
            line(
                w,
                format!(
                    "- tied votes: {}",
                    r.verdicts.iter().filter(|v| v.vote_tie).count()
                ),
            );
            let mode = match r.curve.weighting {
                Weighting::Unweighted => "unweighted",
                Weighting::Weighted => "weighted by plurality share",
            };
            line(w, format!("- agreement: {mode}"));
        }

        if let Some(e) = &self.evaluation {
            line(w, "");
            line(w, "## System evaluation");
            line(w, "");
            line(
                w,
                "| system | coverage | indication rho | per-rater min | max | mean | stdev |",
            );
            line(w, "|---|---|---|---|---|---|---|");
            for r in &e.results {
                let pr = r.per_rater.as_ref().map(|p| p.summary);
                line(
                    w,
                    format!(
                        "| {} | {}/{} | {} | {} | {} | {} | {} |",
                        r.system_name,
                        r.coverage.covered,
                        r.coverage.total,
                        fmt3(r.indication_rho),
                        opt3(pr.map(|s| s.min)),
                        opt3(pr.map(|s| s.max)),
                        opt3(pr.map(|s| s.mean)),
                        opt3(pr.and_then(|s| s.stdev)),
                    ),
                );
            }
            if !e.comparisons.is_empty() {
                line(w, "");
                line(
                    w,
                    format!("Per-rater t-tests (level {}):", fmt3(e.significance_level)),
                );
                line(w, "");
                line(w, "| system a | system b | t | p | verdict |");
                line(w, "|---|---|---|---|---|");
                for c in &e.comparisons {
                    line(
                        w,
                        format!(
                            "| {} | {} | {} | {} | {:?} |",
                            c.system_a,
                            c.system_b,
                            fmt3(c.test.statistic),
                            fmt3(c.test.p_value),
                            c.verdict
                        ),
                    );
                }
            }
            if let Some(first) = e.results.first() {
                if !first.resolution_correlations.is_empty() {
                    line(w, "");
                    line(
                        w,
                        "Distance correlation by resolution (pairs in parentheses):",
                    );
                    line(w, "");
                    let mut header = "| system |".to_string();
                    let mut rule = "|---|".to_string();
                    for rc in &first.resolution_correlations {
                        let _ = write!(header, " {} |", fmt3(rc.resolution));
                        rule.push_str("---|");
                    }
                    line(w, header);
                    line(w, rule);
                    for r in &e.results {
                        let mut row = format!("| {} |", r.system_name);
                        for rc in &r.resolution_correlations {
                            let _ = write!(row, " {} ({}) |", opt3(rc.pearson_r), rc.n_pairs);
                        }
                        line(w, row);
                    }
                }
            }
            for (inst, order) in &e.rankings {
                line(w, "");
                line(w, format!("Ranking on {inst}: {}", order.join(" > ")));
            }
        }

        if !self.notes.is_empty() {
            line(w, "");
            line(w, "## Notes");
            line(w, "");
            for n in &self.notes {
                line(w, format!("- {n}"));
            }
        }
        line(w, "");
        line(w, "## Caveats");
        line(w, "");
        for c in &self.caveats {
            line(w, format!("- {c}"));
        }
        md
    }
}

fn line(out: &mut String, text: impl AsRef<str>) {
    out.push_str(text.as_ref());
    out.push('\n');
}

pub fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

fn opt3(x: Option<f64>) -> String {
    x.map(fmt3).unwrap_or_else(|| "n/a".into())
}

fn item_list(items: &[ItemId]) -> String {
    if items.is_empty() {
        return "none".into();
    }
    items
        .iter()
        .map(ItemId::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// Writes a CSV with `header` and string rows.
fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Per-item stdev against mean.
    PrecisionScatter,
    /// Agreement against threshold.
    AgreementCurve,
}

pub const PRECISION_SCATTER_FILE: &str = "precision_scatter.csv";
pub const AGREEMENT_CURVE_FILE: &str = "agreement_curve.csv";

/// Writes one CSV per figure the report has data for. Figures listed in
/// `required` but absent from the report raise `MissingFragment`.
pub fn emit_plot_data(
    report: &CharacterizationReport,
    out: &Path,
    required: &[Figure],
) -> Result<Vec<PathBuf>> {
    for fig in required {
        match fig {
            Figure::PrecisionScatter if report.precision.is_none() => {
                return Err(Error::MissingFragment("precision"))
            }
            Figure::AgreementCurve if report.resolution.is_none() => {
                return Err(Error::MissingFragment("resolution"))
            }
            _ => {}
        }
    }
    let mut written = Vec::new();
    if let Some(p) = &report.precision {
        let path = out.join(PRECISION_SCATTER_FILE);
        write_table(
            &path,
            &["word1", "word2", "mean", "stdev"],
            p.per_item.iter().filter_map(|s| {
                Some(vec![
                    s.item.left().to_string(),
                    s.item.right().to_string(),
                    s.mean.to_string(),
                    s.stdev?.to_string(),
                ])
            }),
        )?;
        written.push(path);
    }
    if let Some(r) = &report.resolution {
        let path = out.join(AGREEMENT_CURVE_FILE);
        write_agreement_curve(&r.curve, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_agreement_curve(curve: &AgreementCurve, path: &Path) -> Result<()> {
    write_table(
        path,
        &["threshold", "agreement", "n_included"],
        curve.points.iter().map(|p| {
            vec![
                p.threshold.to_string(),
                opt(p.agreement),
                p.n_included.to_string(),
            ]
        }),
    )
}

/// Parses the agreement-curve CSV written by [`emit_plot_data`]. An empty
/// agreement field means no verdict was included at that threshold.
pub fn read_agreement_curve<R: Read>(rdr: R, weighting: Weighting) -> Result<AgreementCurve> {
    let mut rdr = csv::Reader::from_reader(rdr);
    let mut points = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: AGREEMENT_CURVE_FILE.into(),
            line,
            column: 0,
            message: e.to_string(),
        })?;
        let field = |col: usize| -> Result<&str> {
            rec.get(col).ok_or_else(|| Error::Parse {
                path: AGREEMENT_CURVE_FILE.into(),
                line,
                column: col + 1,
                message: "missing field".into(),
            })
        };
        let bad = |col: usize, v: &str| Error::Parse {
            path: AGREEMENT_CURVE_FILE.into(),
            line,
            column: col + 1,
            message: format!("invalid value `{v}`"),
        };
        let t = field(0)?;
        let a = field(1)?;
        let n = field(2)?;
        points.push(CurvePoint {
            threshold: t.parse().map_err(|_| bad(0, t))?,
            agreement: if a.is_empty() {
                None
            } else {
                Some(a.parse().map_err(|_| bad(1, a))?)
            },
            n_included: n.parse().map_err(|_| bad(2, n))?,
        });
    }
    Ok(AgreementCurve { weighting, points })
}

/// CSV tables backing the report's sections.
pub fn write_tables(report: &CharacterizationReport, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(c) = &report.run_comparison {
        let path = out.join("run_deltas.csv");
        write_table(
            &path,
            &["word1", "word2", "mean_a", "mean_b", "stdev_a", "stdev_b"],
            c.per_item_deltas.iter().map(|d| {
                vec![
                    d.item.left().to_string(),
                    d.item.right().to_string(),
                    d.mean_a.to_string(),
                    d.mean_b.to_string(),
                    opt(d.stdev_a),
                    opt(d.stdev_b),
                ]
            }),
        )?;
        written.push(path);
    }
    if let Some(r) = &report.resolution {
        let path = out.join("verdicts.csv");
        write_table(
            &path,
            &[
                "a1",
                "a2",
                "b1",
                "b2",
                "verdict",
                "weight",
                "base_delta",
                "base_direction",
                "vote_tie",
            ],
            r.verdicts.iter().map(|v| {
                let c = &v.comparison;
                vec![
                    c.pair_a.left().to_string(),
                    c.pair_a.right().to_string(),
                    c.pair_b.left().to_string(),
                    c.pair_b.right().to_string(),
                    v.verdict.to_string(),
                    v.weight.to_string(),
                    v.base_delta.to_string(),
                    v.base_direction.to_string(),
                    v.vote_tie.to_string(),
                ]
            }),
        )?;
        written.push(path);
    }
    if let Some(e) = &report.evaluation {
        let path = out.join("evaluation.csv");
        write_table(
            &path,
            &[
                "system",
                "covered",
                "total",
                "indication_rho",
                "per_rater_n",
                "per_rater_min",
                "per_rater_max",
                "per_rater_mean",
                "per_rater_stdev",
            ],
            e.results.iter().map(|r| {
                let pr = r.per_rater.as_ref();
                let s = pr.map(|p| p.summary);
                vec![
                    r.system_name.clone(),
                    r.coverage.covered.to_string(),
                    r.coverage.total.to_string(),
                    r.indication_rho.to_string(),
                    pr.map(|p| p.raters.len().to_string()).unwrap_or_default(),
                    opt(s.map(|s| s.min)),
                    opt(s.map(|s| s.max)),
                    opt(s.map(|s| s.mean)),
                    opt(s.and_then(|s| s.stdev)),
                ]
            }),
        )?;
        written.push(path);

        let path = out.join("per_rater_rho.csv");
        write_table(
            &path,
            &["system", "rater", "rho"],
            e.results.iter().flat_map(|r| {
                r.per_rater.iter().flat_map(move |p| {
                    p.raters
                        .iter()
                        .zip(p.values.iter())
                        .map(move |(rater, rho)| {
                            vec![r.system_name.clone(), rater.clone(), rho.to_string()]
                        })
                })
            }),
        )?;
        written.push(path);

        let path = out.join("resolution_correlations.csv");
        write_table(
            &path,
            &["system", "resolution", "pearson_r", "n_pairs"],
            e.results.iter().flat_map(|r| {
                r.resolution_correlations.iter().map(move |rc| {
                    vec![
                        r.system_name.clone(),
                        rc.resolution.to_string(),
                        opt(rc.pearson_r),
                        rc.n_pairs.to_string(),
                    ]
                })
            }),
        )?;
        written.push(path);

        let path = out.join("per_instrument_rho.csv");
        write_table(
            &path,
            &["system", "instrument", "rho"],
            e.results.iter().flat_map(|r| {
                r.per_instrument_rho.iter().map(move |x| {
                    vec![
                        r.system_name.clone(),
                        x.instrument.clone(),
                        x.rho.to_string(),
                    ]
                })
            }),
        )?;
        written.push(path);

        let path = out.join("system_comparisons.csv");
        write_table(
            &path,
            &[
                "system_a", "system_b", "t", "df", "p_value", "level", "verdict",
            ],
            e.comparisons.iter().map(|c| {
                vec![
                    c.system_a.clone(),
                    c.system_b.clone(),
                    c.test.statistic.to_string(),
                    c.test.df.to_string(),
                    c.test.p_value.to_string(),
                    c.level.to_string(),
                    format!("{:?}", c.verdict),
                ]
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
