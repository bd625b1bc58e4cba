//! Command-line surface. Parsed arguments become a [`RunConfig`], which is
//! validated and then executed by [`run`].

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evaluation::{
    compare_systems, evaluate_system, rank_systems, EvalOptions, DEFAULT_RESOLUTIONS,
    DEFAULT_SIGNIFICANCE,
};
use crate::instrument::{
    exclude_items, load_annotation_matrix, load_manifest, load_pair_comparisons, load_predictions,
    AnnotationMatrix, Exclusion, InstrumentManifest, ItemId, Scale, DEFAULT_MIN_COVERAGE,
};
use crate::report::{
    emit_plot_data, write_tables, write_text, CharacterizationReport, EvaluationSection,
    ResolutionSection,
};
use crate::reproducibility::{compare_runs, DEFAULT_TOP_MOVERS};
use crate::resolution::{
    agreement_curve, judge, sample_pair_of_pairs, threshold_grid, Weighting, DEFAULT_BINS,
    DEFAULT_GRID_STEP, DEFAULT_LEVEL,
};
use crate::stats::TTestVariant;

pub const DEFAULT_SEED: u64 = 353;
pub const DEFAULT_SAMPLE_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Characterize,
    CompareRuns,
    Resolution,
    SamplePairs,
    Evaluate,
    Report,
}

#[derive(Debug, Parser)]
#[command(
    name = "crowd-metrology",
    version,
    about = "Characterize a crowd-annotated dataset as a measurement instrument"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Precision profile and repeatability of one instrument.
    Characterize(CommonArgs),
    /// Compare two collection runs of the same instrument.
    CompareRuns {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        runs: RunArgs,
    },
    /// Agreement curve and resolution from pairs-of-pairs votes.
    Resolution {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Draw a stratified sample of item pairs for a comparison task.
    SamplePairs {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Score system predictions against the instrument.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        runs: RunArgs,
        /// Significance level for the per-rater t-tests.
        #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
        level: f64,
    },
    /// Full report: every section the given inputs support.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        runs: RunArgs,
        #[command(flatten)]
        res: ResolutionArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Significance level for the per-rater t-tests.
        #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
        significance: f64,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Annotation CSV: word1,word2,<rater>...
    #[arg(long)]
    pub instrument: PathBuf,
    /// Instrument manifest (TOML). Without one, the scale is [0, 10].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Drop control items before analysis.
    #[arg(long)]
    pub exclude_controls: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "json,markdown,csv")]
    pub format: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Further collection runs of the instrument (same manifest unless
    /// --manifest-b is given).
    #[arg(long = "run-b")]
    pub run_b: Vec<PathBuf>,
    #[arg(long)]
    pub manifest_b: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOP_MOVERS)]
    pub top_movers: usize,
}

#[derive(Debug, Args)]
pub struct ResolutionArgs {
    /// Pairs-of-pairs vote CSV: a1,a2,b1,b2,votes_a,votes_b,votes_equal
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
    /// Agreement level the resolution is stated at.
    #[arg(long = "level", visible_alias = "agreement-level", default_value_t = DEFAULT_LEVEL)]
    pub agreement_level: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    /// Weight each verdict by its plurality share.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction CSVs: word1,word2,score. The file stem names the system.
    #[arg(long, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RESOLUTIONS)]
    pub resolutions: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_COVERAGE)]
    pub min_coverage: f64,
    /// Minimum share of predicted items a rater must have scored to enter
    /// the per-rater analysis.
    #[arg(long, default_value_t = 1.0)]
    pub rater_coverage: f64,
    #[arg(long)]
    pub welch: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub instrument: PathBuf,
    pub manifest: Option<PathBuf>,
    pub manifest_b: Option<PathBuf>,
    pub predictions: Vec<PathBuf>,
    pub run_b: Vec<PathBuf>,
    pub comparisons: Option<PathBuf>,
    pub resolutions: Vec<f64>,
    pub agreement_level: f64,
    pub significance: f64,
    pub grid_step: f64,
    pub weighting: Weighting,
    pub seed: u64,
    pub sample_size: usize,
    pub bins: usize,
    pub exclude_controls: bool,
    pub min_coverage: f64,
    pub rater_coverage: f64,
    pub t_test: TTestVariant,
    pub top_movers: usize,
    pub out: PathBuf,
    pub formats: BTreeSet<Format>,
}

impl RunConfig {
    pub fn new(command: Command, instrument: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            instrument: instrument.into(),
            manifest: None,
            manifest_b: None,
            predictions: Vec::new(),
            run_b: Vec::new(),
            comparisons: None,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            agreement_level: DEFAULT_LEVEL,
            significance: DEFAULT_SIGNIFICANCE,
            grid_step: DEFAULT_GRID_STEP,
            weighting: Weighting::Unweighted,
            seed: DEFAULT_SEED,
            sample_size: DEFAULT_SAMPLE_SIZE,
            bins: DEFAULT_BINS,
            exclude_controls: false,
            min_coverage: DEFAULT_MIN_COVERAGE,
            rater_coverage: 1.0,
            t_test: TTestVariant::Pooled,
            top_movers: DEFAULT_TOP_MOVERS,
            out: out.into(),
            formats: [Format::Json, Format::Markdown, Format::Csv].into(),
        }
    }

    fn apply_common(&mut self, c: CommonArgs) {
        self.manifest = c.manifest;
        self.exclude_controls = c.exclude_controls;
        self.formats = c.format.into_iter().collect();
    }

    fn apply_runs(&mut self, r: RunArgs) {
        self.run_b = r.run_b;
        self.manifest_b = r.manifest_b;
        self.top_movers = r.top_movers;
    }

    fn apply_resolution(&mut self, r: ResolutionArgs) {
        self.comparisons = r.comparisons;
        self.agreement_level = r.agreement_level;
        self.grid_step = r.grid_step;
        self.weighting = if r.weighted {
            Weighting::Weighted
        } else {
            Weighting::Unweighted
        };
    }

    fn apply_eval(&mut self, e: EvalArgs) {
        self.predictions = e.predictions;
        self.resolutions = e.resolutions;
        self.min_coverage = e.min_coverage;
        self.rater_coverage = e.rater_coverage;
        self.t_test = if e.welch {
            TTestVariant::Welch
        } else {
            TTestVariant::Pooled
        };
    }

    pub fn from_cli(cli: Cli) -> Self {
        let base = |command, c: &CommonArgs| RunConfig::new(command, &c.instrument, &c.out);
        match cli.command {
            CliCommand::Characterize(c) => {
                let mut cfg = base(Command::Characterize, &c);
                cfg.apply_common(c);
                cfg
            }
            CliCommand::CompareRuns { common, runs } => {
                let mut cfg = base(Command::CompareRuns, &common);
                cfg.apply_common(common);
                cfg.apply_runs(runs);
                cfg
            }
            CliCommand::Resolution { common, res } => {
                let mut cfg = base(Command::Resolution, &common);
                cfg.apply_common(common);
                cfg.apply_resolution(res);
                cfg
            }
            CliCommand::SamplePairs { common, sample } => {
                let mut cfg = base(Command::SamplePairs, &common);
                cfg.apply_common(common);
                cfg.sample_size = sample.n;
                cfg.seed = sample.seed;
                cfg.bins = sample.bins;
                cfg
            }
            CliCommand::Evaluate {
                common,
                eval,
                runs,
                level,
            } => {
                let mut cfg = base(Command::Evaluate, &common);
                cfg.apply_common(common);
                cfg.apply_eval(eval);
                cfg.apply_runs(runs);
                cfg.significance = level;
                cfg
            }
            CliCommand::Report {
                common,
                runs,
                res,
                eval,
                significance,
            } => {
                let mut cfg = base(Command::Report, &common);
                cfg.apply_common(common);
                cfg.apply_runs(runs);
                cfg.apply_resolution(res);
                cfg.apply_eval(eval);
                cfg.significance = significance;
                cfg
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut inputs: Vec<&Path> = vec![&self.instrument];
        inputs.extend(self.manifest.as_deref());
        inputs.extend(self.manifest_b.as_deref());
        inputs.extend(self.comparisons.as_deref());
        inputs.extend(self.predictions.iter().map(PathBuf::as_path));
        inputs.extend(self.run_b.iter().map(PathBuf::as_path));
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        match self.command {
            Command::CompareRuns if self.run_b.is_empty() => {
                return Err(Error::Config("compare-runs needs --run-b".into()))
            }
            Command::Resolution if self.comparisons.is_none() => {
                return Err(Error::Config("resolution needs --comparisons".into()))
            }
            Command::Evaluate if self.predictions.is_empty() => {
                return Err(Error::Config(
                    "evaluate needs at least one --predictions file".into(),
                ))
            }
            _ => {}
        }
        if self.formats.is_empty() {
            return Err(Error::Config("no output format selected".into()));
        }
        if !(self.agreement_level > 0.0 && self.agreement_level <= 1.0) {
            return Err(Error::InvalidLevel(self.agreement_level));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidLevel(self.significance));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::Config(format!(
                "--min-coverage must be in (0, 1], got {}",
                self.min_coverage
            )));
        }
        Ok(())
    }
}

fn manifest_for(path: Option<&Path>, data: &Path) -> Result<InstrumentManifest> {
    match path {
        Some(p) => load_manifest(p),
        None => {
            let stem = data
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instrument".into());
            InstrumentManifest::new(stem, Scale::default())
        }
    }
}

struct Loaded {
    /// As read from disk.
    full: AnnotationMatrix,
    /// After the configured exclusions.
    analysed: AnnotationMatrix,
    excluded: Vec<ItemId>,
}

fn load(path: &Path, manifest: &InstrumentManifest, exclude_controls: bool) -> Result<Loaded> {
    let full = load_annotation_matrix(path, manifest)?;
    let (analysed, excluded) = if exclude_controls {
        (
            exclude_items(&full, &Exclusion::Controls)?,
            full.control_items(),
        )
    } else {
        (full.clone(), Vec::new())
    };
    Ok(Loaded {
        full,
        analysed,
        excluded,
    })
}

/// Executes `config` and returns the files written, in write order.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;

    let manifest = manifest_for(config.manifest.as_deref(), &config.instrument)?;
    let Loaded {
        full,
        analysed: m,
        excluded,
    } = load(&config.instrument, &manifest, config.exclude_controls)?;

    if config.command == Command::SamplePairs {
        return sample_pairs(config, &m);
    }

    let mut report = CharacterizationReport::characterize(&manifest, &m, excluded);

    let wants_runs = matches!(
        config.command,
        Command::CompareRuns | Command::Evaluate | Command::Report
    );
    let mut runs = Vec::new();
    if wants_runs {
        let manifest_b = match &config.manifest_b {
            Some(p) => load_manifest(p)?,
            None => manifest.clone(),
        };
        for path in &config.run_b {
            let mut r = load(path, &manifest_b, config.exclude_controls)?.analysed;
            if r.name() == m.name() || runs.iter().any(|x: &AnnotationMatrix| x.name() == r.name())
            {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                r = r.with_name(stem.unwrap_or_else(|| "run_b".into()));
            }
            runs.push(r);
        }
    }

    if matches!(config.command, Command::CompareRuns | Command::Report) {
        if let Some(b) = runs.first() {
            report.run_comparison = Some(compare_runs(&m, b, config.top_movers)?);
        }
    }

    if matches!(config.command, Command::Resolution | Command::Report) {
        if let Some(path) = &config.comparisons {
            let set = load_pair_comparisons(path, m.name())?;
            let verdicts = judge(&set, &m)?;
            let grid = threshold_grid(m.scale().range(), config.grid_step)?;
            let curve = agreement_curve(&verdicts, &grid, config.weighting)?;
            report.resolution = Some(ResolutionSection::new(
                verdicts,
                curve,
                config.agreement_level,
            )?);
        }
    }

    if matches!(config.command, Command::Evaluate | Command::Report)
        && !config.predictions.is_empty()
    {
        let opts = EvalOptions {
            min_coverage: config.min_coverage,
            rater_coverage: config.rater_coverage,
            resolutions: config.resolutions.clone(),
        };
        let mut results = Vec::new();
        for path in &config.predictions {
            // resolve against every item on file so that predictions for
            // excluded controls are not rejected as unknown
            let p = load_predictions(path, &full, config.min_coverage)?;
            results.push(evaluate_system(&p, &m, &runs, &opts)?);
        }
        let mut comparisons = Vec::new();
        for i in 0..results.len() {
            for j in i + 1..results.len() {
                if results[i].per_rater.is_some() && results[j].per_rater.is_some() {
                    comparisons.push(compare_systems(
                        &results[i],
                        &results[j],
                        config.significance,
                        config.t_test,
                    )?);
                }
            }
        }
        if results.iter().any(|r| r.per_rater.is_none()) {
            report.notes.push(
                "per-rater analysis skipped: fewer than two raters meet the coverage requirement"
                    .into(),
            );
        }
        let rankings = if results.len() > 1 {
            rank_systems(&results)
        } else {
            Vec::new()
        };
        report = report.with_evaluation(EvaluationSection {
            significance_level: config.significance,
            results,
            comparisons,
            rankings,
        });
    }

    write_report(config, &report)
}

fn write_report(config: &RunConfig, report: &CharacterizationReport) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if config.formats.contains(&Format::Json) {
        let path = config.out.join("report.json");
        write_text(&path, &report.to_json()?)?;
        written.push(path);
    }
    if config.formats.contains(&Format::Markdown) {
        let path = config.out.join("report.md");
        write_text(&path, &report.to_markdown())?;
        written.push(path);
    }
    written.extend(emit_plot_data(report, &config.out, &[])?);
    if config.formats.contains(&Format::Csv) {
        written.extend(write_tables(report, &config.out)?);
    }
    Ok(written)
}

fn sample_pairs(config: &RunConfig, m: &AnnotationMatrix) -> Result<Vec<PathBuf>> {
    let sample = sample_pair_of_pairs(m, config.sample_size, config.seed, config.bins)?;
    let path = config.out.join("sample_pairs.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
    w.write_record(["a1", "a2", "b1", "b2", "base_delta"])
        .map_err(err)?;
    for ((a, b), d) in sample.pairs.iter().zip(&sample.base_deltas) {
        w.write_record([a.left(), a.right(), b.left(), b.right(), &d.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut written = vec![path];
    if config.formats.contains(&Format::Json) {
        let path = config.out.join("sample_pairs.json");
        let mut text = serde_json::to_string_pretty(&sample)?;
        text.push('\n');
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
