use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 5;

/// Least-squares polynomial. `coefficients` are in ascending degree in the
/// caller's x coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
}

impl PolyFit {
    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }
}

pub fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Householder QR least squares on an `m x n` column-major matrix. Returns
/// the solution, or the index of the first column found dependent.
fn qr_solve(mut a: Vec<Vec<f64>>, mut y: Vec<f64>) -> std::result::Result<Vec<f64>, usize> {
    let n = a.len();
    let m = y.len();
    let scale: f64 = a.iter().flatten().fold(0.0, |s, v| s.max(v.abs()));
    for k in 0..n {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale * (m as f64).sqrt() {
            return Err(k);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for col in a.iter_mut().skip(k) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&y[k..]).map(|(p, q)| p * q).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in y[k..].iter_mut().zip(&v) {
            *c -= f * vi;
        }
    }
    let mut beta = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[j][k] * beta[j]).sum();
        beta[k] = (y[k] - s) / a[k][k];
    }
    Ok(beta)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares polynomial of the given order. The fit is carried out on
/// x mapped to [-1, 1] and converted back afterwards.
pub fn polyfit(xs: &[f64], ys: &[f64], order: usize) -> Result<PolyFit> {
    if xs.len() != ys.len() {
        return Err(Error::Degenerate(format!(
            "polyfit needs paired data, got {} x and {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(
            "polyfit input contains non-finite values".into(),
        ));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < order + 1 {
        return Err(Error::RankDeficient(format!(
            "order {order} needs {} distinct x values, got {} ({} duplicates among {} points)",
            order + 1,
            distinct.len(),
            xs.len() - distinct.len(),
            xs.len()
        )));
    }
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let center = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let us: Vec<f64> = xs.iter().map(|x| (x - center) / half).collect();
    let columns: Vec<Vec<f64>> = (0..=order)
        .map(|k| us.iter().map(|u| u.powi(k as i32)).collect())
        .collect();
    let scaled = qr_solve(columns, ys.to_vec()).map_err(|k| {
        Error::RankDeficient(format!(
            "basis column of degree {k} is numerically dependent"
        ))
    })?;
    let sq: f64 = us
        .iter()
        .zip(ys)
        .map(|(u, y)| {
            let r = y - horner(&scaled, *u);
            r * r
        })
        .sum();
    // p(x) = sum_k b_k ((x - c) / h)^k, expanded binomially.
    let mut coefficients = vec![0.0; order + 1];
    for (k, b) in scaled.iter().enumerate() {
        let bk = b / half.powi(k as i32);
        for (j, c) in coefficients.iter_mut().enumerate().take(k + 1) {
            *c += bk * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    Ok(PolyFit {
        order,
        coefficients,
        rms_residual: (sq / xs.len() as f64).sqrt(),
    })
}
