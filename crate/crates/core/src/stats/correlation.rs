use std::cmp::Ordering;

use super::SampleVector;
use crate::error::{Error, Result};

const MIN_LEN: usize = 3;

/// Fractional ranks (1-based); tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < MIN_LEN {
        return Err(Error::TooFewValues {
            needed: MIN_LEN,
            got: x.len(),
        });
    }
    Ok(())
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "constant vector; correlation is undefined".into(),
        ));
    }
    // sqrt(s * s) == s exactly, so identical rank vectors give exactly 1
    let mut denom = (sxx * syy).sqrt();
    if !denom.is_finite() || denom == 0.0 {
        denom = sxx.sqrt() * syy.sqrt();
    }
    Ok((sxy / denom).clamp(-1.0, 1.0))
}

pub fn pearson_r(x: &SampleVector, y: &SampleVector) -> Result<f64> {
    check_pair(x.values(), y.values())?;
    product_moment(x.values(), y.values())
}

/// Pearson correlation of the fractional ranks of `x` and `y`.
pub fn spearman_rho(x: &SampleVector, y: &SampleVector) -> Result<f64> {
    check_pair(x.values(), y.values())?;
    product_moment(&average_ranks(x.values()), &average_ranks(y.values()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> SampleVector {
        SampleVector::new(v.to_vec()).unwrap()
    }

    /// Counting-based rank: 1 + #smaller + (#equal - 1) / 2.
    fn counting_rank(values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let smaller = values.iter().filter(|&&w| w < v).count() as f64;
                let equal = values.iter().filter(|&&w| w == v).count() as f64;
                1.0 + smaller + (equal - 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn ranks_match_counting_oracle() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        assert_eq!(average_ranks(&v), counting_rank(&v));
    }

    #[test]
    fn spearman_trivial_orderings() {
        let x = sv(&[1.0, 2.0, 3.0]);
        assert_eq!(spearman_rho(&x, &sv(&[10.0, 20.0, 30.0])).unwrap(), 1.0);
        assert_eq!(spearman_rho(&x, &sv(&[30.0, 20.0, 10.0])).unwrap(), -1.0);
    }

    #[test]
    fn spearman_with_ties_matches_hand_computation() {
        // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4]
        // cov = 4.5, sxx = 4.5, syy = 5 -> 4.5 / sqrt(22.5) = 3 / sqrt(10)
        let rho = spearman_rho(&sv(&[1.0, 2.0, 2.0, 4.0]), &sv(&[1.0, 3.0, 2.0, 4.0])).unwrap();
        assert!((rho - 3.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pearson_trivial_and_hand_computed() {
        let x = sv(&[0.0, 1.0, 2.0]);
        assert!((pearson_r(&x, &sv(&[5.0, 7.0, 9.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &sv(&[9.0, 7.0, 5.0])).unwrap() + 1.0).abs() < 1e-15);
        // cov = 5, sxx = 8.75, syy = 4 -> 5 / sqrt(35)
        let r = pearson_r(&sv(&[1.0, 2.0, 3.0, 5.0]), &sv(&[2.0, 2.0, 4.0, 4.0])).unwrap();
        assert!((r - 5.0 / 35f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            spearman_rho(&sv(&[1.0, 2.0, 3.0]), &sv(&[1.0, 2.0])),
            Err(Error::LengthMismatch { left: 3, right: 2 })
        ));
        assert!(matches!(
            pearson_r(&sv(&[1.0, 1.0, 1.0]), &sv(&[1.0, 2.0, 3.0])),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            spearman_rho(&sv(&[1.0, 2.0]), &sv(&[1.0, 2.0])),
            Err(Error::TooFewValues { .. })
        ));
    }
}
