//! Session statistics: window averages, Student's t-test, polynomial trends
//! and log-linear regression.

mod polyfit;
mod special;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use polyfit::{horner, polyfit, PolyFit, DEFAULT_ORDER};
pub use special::{incomplete_beta, ln_gamma, student_t_two_tailed, BETA_TOLERANCE};
pub use ttest::{t_test_two_tailed, TTestResult};

/// Time-ordered readings from one optode under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub optode_id: u8,
    pub label: String,
    /// (t seconds, volts), strictly increasing in t.
    samples: Vec<(f64, f64)>,
}

impl SampleSeries {
    pub fn new(optode_id: u8, label: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(w) = samples.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain(format!(
                "timestamps must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(SampleSeries {
            optode_id,
            label: label.into(),
            samples,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn values_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .filter(move |(t, _)| *t >= t0 && *t <= t1)
            .map(|(_, v)| *v)
    }
}

/// Mean of the readings with t in [t0, t1].
pub fn window_mean(series: &SampleSeries, t0: f64, t1: f64) -> Result<f64> {
    let (n, sum) = series
        .values_in(t0, t1)
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    Ok(sum / n as f64)
}

/// Ordinary least-squares line with the slope's two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_error: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "line fit needs at least three paired points, got {} x and {} y",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = n - 2.0;
    let se = (sse / df / sxx).sqrt();
    let (t, p) = if se > 0.0 {
        let t = slope / se;
        (t, student_t_two_tailed(t, df))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (slope.signum() * f64::INFINITY, 0.0)
    };
    Ok(LinearFit {
        intercept,
        slope,
        slope_std_error: se,
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        n: xs.len(),
    })
}

/// Fits ln(y) against x. Every y must be positive.
pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if let Some(y) = ys.iter().find(|y| !(**y > 0.0)) {
        return Err(Error::Domain(format!(
            "log-linear fit needs positive values, got {y}"
        )));
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(xs, &logs)
}
