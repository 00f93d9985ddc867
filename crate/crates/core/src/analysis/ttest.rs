use serde::{Deserialize, Serialize};

use super::special::student_t_two_tailed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-tailed.
    pub p_value: f64,
}

fn mean_and_ss(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss)
}

/// Unpaired two-sample Student's t-test with pooled variance.
pub fn t_test_two_tailed(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "t-test needs at least two samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Degenerate(
            "t-test input contains non-finite samples".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let pooled = (ssa + ssb) / df;
    let diff = ma - mb;
    if pooled == 0.0 {
        if diff == 0.0 {
            return Ok(TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
            });
        }
        return Err(Error::Degenerate(format!(
            "both groups are constant ({ma} vs {mb}); the t statistic is unbounded"
        )));
    }
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_tailed(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = t_test_two_tailed(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.t_statistic + 3.674234614174767).abs() < 1e-12);
        assert_eq!(r.degrees_of_freedom, 4.0);
        assert!(
            (r.p_value - 0.021311641128756727).abs() < 1e-9,
            "{}",
            r.p_value
        );
    }

    #[test]
    fn identical_groups() {
        let a = [0.5, 0.7, 0.9];
        let r = t_test_two_tailed(&a, &a).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        let c = [2.0, 2.0];
        assert_eq!(t_test_two_tailed(&c, &c).unwrap().p_value, 1.0);
        assert!(matches!(
            t_test_two_tailed(&c, &[3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(t_test_two_tailed(&[1.0], &[1.0, 2.0]).is_err());
    }
}
