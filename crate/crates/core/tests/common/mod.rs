//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crowd_metrology::instrument::{AnnotationMatrix, ItemId, Scale};
use crowd_metrology::stats::{
    krippendorff_alpha, pearson_r, spearman_rho, student_t_cdf, two_sample_t_test,
    DifferenceMetric, SampleVector, TTestVariant,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowd-metrology"))
}

pub fn toy(f: &str) -> String {
    fixture(&format!("toy/{f}")).display().to_string()
}

/// Arguments exercising `cmd` on the toy fixtures.
pub fn args_for(cmd: &str) -> Vec<String> {
    let mut a: Vec<String> = vec![
        cmd.into(),
        "--instrument".into(),
        toy("votes.csv"),
        "--manifest".into(),
        toy("manifest.toml"),
    ];
    let extra: Vec<String> = match cmd {
        "compare-runs" => vec!["--run-b".into(), toy("votes_b.csv")],
        "resolution" => vec!["--comparisons".into(), toy("comparisons.csv")],
        "sample-pairs" => vec!["--n".into(), "40".into()],
        "evaluate" => vec![
            "--predictions".into(),
            toy("sys_a.csv"),
            toy("sys_b.csv"),
            "--min-coverage".into(),
            "0.9".into(),
        ],
        "report" => vec![
            "--run-b".into(),
            toy("votes_b.csv"),
            "--comparisons".into(),
            toy("comparisons.csv"),
            "--predictions".into(),
            toy("sys_a.csv"),
            toy("sys_b.csv"),
        ],
        _ => vec![],
    };
    a.extend(extra);
    a
}

pub fn run(args: &[String], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

/// File name to contents for every file in `dir`.
pub fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

pub fn item(i: usize) -> ItemId {
    ItemId::new(&format!("w{i}"), &format!("v{i}")).unwrap()
}

/// Matrix with items w{i}/v{i} and raters r{j}.
pub fn matrix(name: &str, rows: Vec<Vec<Option<f64>>>, scale: Scale) -> AnnotationMatrix {
    let width = rows.first().map_or(0, Vec::len);
    AnnotationMatrix::new(
        name,
        (0..rows.len()).map(item).collect(),
        (0..width).map(|r| format!("r{r}")).collect(),
        rows,
        scale,
    )
    .unwrap()
}

pub fn sv(v: &[f64]) -> SampleVector {
    SampleVector::new(v.to_vec()).unwrap()
}

fn non_constant(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

/// Equal-length pair of vectors, 3 to 40 entries.
pub fn paired(lo: f64, hi: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..40).prop_flat_map(move |n| {
        (
            prop::collection::vec(lo..hi, n),
            prop::collection::vec(lo..hi, n),
        )
    })
}

pub fn check_spearman_monotone((x, y): (Vec<f64>, Vec<f64>)) -> Result<(), TestCaseError> {
    prop_assume!(non_constant(&x) && non_constant(&y));
    let base = spearman_rho(&sv(&x), &sv(&y)).unwrap();
    let exp: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
    prop_assert_eq!(spearman_rho(&sv(&x), &sv(&exp)).unwrap(), base);
    prop_assert_eq!(spearman_rho(&sv(&cube), &sv(&y)).unwrap(), base);
    prop_assert_eq!(spearman_rho(&sv(&x), &sv(&x)).unwrap(), 1.0);
    Ok(())
}

pub fn affine_case() -> impl Strategy<Value = ((Vec<f64>, Vec<f64>), [f64; 4])> {
    (
        paired(-10.0, 10.0),
        [
            0.01f64..100.0,
            -100.0f64..100.0,
            0.01f64..100.0,
            -100.0f64..100.0,
        ],
    )
}

pub fn check_pearson_affine(
    ((x, y), [a, b, c, d]): ((Vec<f64>, Vec<f64>), [f64; 4]),
) -> Result<(), TestCaseError> {
    let spread = |v: &[f64]| sv(v).stdev().unwrap_or(0.0);
    prop_assume!(spread(&x) > 0.5 && spread(&y) > 0.5);
    let base = pearson_r(&sv(&x), &sv(&y)).unwrap();
    let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
    let ty: Vec<f64> = y.iter().map(|v| c * v + d).collect();
    let moved = pearson_r(&sv(&tx), &sv(&ty)).unwrap();
    prop_assert!((moved - base).abs() < 1e-12, "{} vs {}", moved, base);
    Ok(())
}

pub fn two_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, bool)> {
    (
        prop::collection::vec(-5.0f64..5.0, 2..30),
        prop::collection::vec(-5.0f64..5.0, 2..30),
        any::<bool>(),
    )
}

pub fn check_t_antisymmetry(
    (a, b, welch): (Vec<f64>, Vec<f64>, bool),
) -> Result<(), TestCaseError> {
    prop_assume!(non_constant(&a) || non_constant(&b));
    let variant = if welch {
        TTestVariant::Welch
    } else {
        TTestVariant::Pooled
    };
    let ab = two_sample_t_test(&sv(&a), &sv(&b), variant).unwrap();
    let ba = two_sample_t_test(&sv(&b), &sv(&a), variant).unwrap();
    prop_assert_eq!(ab.statistic, -ba.statistic);
    prop_assert_eq!(ab.p_value, ba.p_value);
    prop_assert!((0.0..=1.0).contains(&ab.p_value));
    Ok(())
}

pub fn t_and_df() -> impl Strategy<Value = (f64, f64)> {
    (-50.0f64..50.0, 0.1f64..1000.0)
}

pub fn check_cdf_symmetry((t, df): (f64, f64)) -> Result<(), TestCaseError> {
    let s = student_t_cdf(t, df).unwrap() + student_t_cdf(-t, df).unwrap();
    prop_assert!((s - 1.0).abs() < 1e-9, "t={} df={} sum={}", t, df, s);
    Ok(())
}

/// Units where every present vote equals the unit's value.
pub fn agreeing_units() -> impl Strategy<Value = (Vec<Vec<Option<f64>>>, u8)> {
    (
        prop::collection::vec((0u8..=10, prop::collection::vec(any::<bool>(), 6)), 2..30),
        0u8..3,
    )
        .prop_map(|(units, metric)| {
            let rows = units
                .into_iter()
                .map(|(v, mask)| {
                    let mut row: Vec<Option<f64>> =
                        mask.iter().map(|&m| m.then_some(f64::from(v))).collect();
                    // at least two votes so the unit is pairable
                    row[0] = Some(f64::from(v));
                    row[1] = Some(f64::from(v));
                    row
                })
                .collect();
            (rows, metric)
        })
}

pub fn metric(k: u8) -> DifferenceMetric {
    match k {
        0 => DifferenceMetric::Interval,
        1 => DifferenceMetric::Ordinal,
        _ => DifferenceMetric::Nominal,
    }
}

pub fn check_alpha_perfect((rows, k): (Vec<Vec<Option<f64>>>, u8)) -> Result<(), TestCaseError> {
    prop_assert_eq!(krippendorff_alpha(&rows, metric(k)).unwrap(), 1.0);
    Ok(())
}

/// 100 units x 6 raters filled with a random permutation of a fixed multiset
/// of scores.
pub fn permuted_units() -> impl Strategy<Value = Vec<Vec<Option<f64>>>> {
    let pool: Vec<f64> = (0..600).map(|i| f64::from(i % 11)).collect();
    Just(pool).prop_shuffle().prop_map(|vals| {
        vals.chunks(6)
            .map(|c| c.iter().map(|&v| Some(v)).collect())
            .collect()
    })
}

pub fn check_alpha_permuted(rows: Vec<Vec<Option<f64>>>) -> Result<(), TestCaseError> {
    let a = krippendorff_alpha(&rows, DifferenceMetric::Interval).unwrap();
    prop_assert!(a > -0.2 && a < 0.2, "alpha = {}", a);
    Ok(())
}
