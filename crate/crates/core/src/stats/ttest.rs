use serde::{Deserialize, Serialize};

use super::special::student_t_two_tailed;
use super::{mean, sample_variance, SampleVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    /// Student's test with a pooled variance estimate.
    #[default]
    Pooled,
    /// Welch's unequal-variance test with Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Two-tailed.
    pub p_value: f64,
    pub df: f64,
}

/// Two-tailed, unpaired two-sample t-test of `mean(a) == mean(b)`.
pub fn two_sample_t_test(
    a: &SampleVector,
    b: &SampleVector,
    variant: TTestVariant,
) -> Result<TestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::TooFewValues {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a.values()), mean(b.values()));
    let va = sample_variance(a.values()).expect("len checked");
    let vb = sample_variance(b.values()).expect("len checked");
    if va == 0.0 && vb == 0.0 {
        return Err(Error::DegenerateInput(
            "both samples have zero variance".into(),
        ));
    }

    let (se, df) = match variant {
        TTestVariant::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        TTestVariant::Welch => {
            let qa = va / na;
            let qb = vb / nb;
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
    };

    let statistic = (ma - mb) / se;
    let p_value = student_t_two_tailed(statistic, df)?;
    Ok(TestResult {
        statistic,
        p_value,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> SampleVector {
        SampleVector::new(v.to_vec()).unwrap()
    }

    /// t density integrated with the composite trapezoid rule from 0 to |t|.
    fn quadrature_two_tail(t: f64, df: f64) -> f64 {
        let c = (super::super::ln_gamma((df + 1.0) / 2.0) - super::super::ln_gamma(df / 2.0)).exp()
            / (df * std::f64::consts::PI).sqrt();
        let density = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let steps = 200_000;
        let h = t.abs() / steps as f64;
        let mut area = 0.5 * (density(0.0) + density(t.abs()));
        for i in 1..steps {
            area += density(i as f64 * h);
        }
        area *= h;
        1.0 - 2.0 * area
    }

    #[test]
    fn identical_samples() {
        let a = sv(&[0.3, 0.5, 0.4, 0.6]);
        let r = two_sample_t_test(&a, &a, TTestVariant::Pooled).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn pooled_hand_computation_and_quadrature() {
        // means 2.5 and 3.5, both variances 5/3, pooled 5/3, se = sqrt(5/6)
        let r = two_sample_t_test(
            &sv(&[1.0, 2.0, 3.0, 4.0]),
            &sv(&[2.0, 3.0, 4.0, 5.0]),
            TTestVariant::Pooled,
        )
        .unwrap();
        let t = -1.0 / (5.0f64 / 6.0).sqrt();
        assert!((r.statistic - t).abs() < 1e-12);
        assert_eq!(r.df, 6.0);
        let p = quadrature_two_tail(t, 6.0);
        assert!((r.p_value - p).abs() < 1e-8, "{} vs {p}", r.p_value);
    }

    #[test]
    fn welch_equals_pooled_for_equal_sizes_and_variances() {
        let a = sv(&[1.0, 2.0, 3.0, 4.0]);
        let b = sv(&[2.0, 3.0, 4.0, 5.0]);
        let p = two_sample_t_test(&a, &b, TTestVariant::Pooled).unwrap();
        let w = two_sample_t_test(&a, &b, TTestVariant::Welch).unwrap();
        assert!((p.statistic - w.statistic).abs() < 1e-12);
        assert!((p.df - w.df).abs() < 1e-12);
    }

    #[test]
    fn welch_df_hand_computation() {
        // va = 1, vb = 25 (n = 3 each): qa = 1/3, qb = 25/3
        // df = (26/3)^2 / ((1/9)/2 + (625/9)/2) = 676/9 / (626/18) = 1352/626
        let r = two_sample_t_test(
            &sv(&[1.0, 2.0, 3.0]),
            &sv(&[5.0, 10.0, 15.0]),
            TTestVariant::Welch,
        )
        .unwrap();
        assert!((r.df - 1352.0 / 626.0).abs() < 1e-12);
        assert!((r.statistic - (-8.0 / (26.0f64 / 3.0).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            two_sample_t_test(&sv(&[1.0, 1.0]), &sv(&[2.0, 2.0]), TTestVariant::Pooled),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            two_sample_t_test(&sv(&[1.0]), &sv(&[2.0, 3.0]), TTestVariant::Pooled),
            Err(Error::TooFewValues { .. })
        ));
        // one constant sample is fine
        assert!(
            two_sample_t_test(&sv(&[1.0, 1.0]), &sv(&[2.0, 3.0]), TTestVariant::Pooled).is_ok()
        );
    }
}
