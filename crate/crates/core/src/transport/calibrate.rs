//! Single-factor scattering calibration against the reference attenuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tissue::{build_abdomen_scene, AbdomenConfig, MediaLibrary};

use super::probe::ProbeLayout;
use super::simulate::{simulate, Estimator, TransportConfig};

/// Fraction of emitted light reaching the detector at 4 cm in the abdomen model.
pub const REFERENCE_DETECTED_FRACTION: f64 = 5.4e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub target_fraction: f64,
    pub sd_cm: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Coarse grid points (log-spaced) before bisection.
    pub grid_points: usize,
    pub bisection_steps: usize,
    pub photons_per_eval: u64,
    pub seed: u64,
    pub estimator: Estimator,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            target_fraction: REFERENCE_DETECTED_FRACTION,
            sd_cm: 4.0,
            min_factor: 0.5,
            max_factor: 5.0,
            grid_points: 4,
            bisection_steps: 4,
            photons_per_eval: 500_000,
            seed: 7,
            estimator: Estimator::Azimuthal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub factor: f64,
    pub fraction: f64,
    pub target_fraction: f64,
    /// Every `(factor, detected fraction)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    /// False when the target lies outside the range reachable in
    /// `[min_factor, max_factor]`; `factor` is then the closest end.
    pub bracketed: bool,
}

/// Detected fraction at the calibration detector with all `mu_s` scaled by `factor`.
pub fn fraction_at(lib: &MediaLibrary, cfg: &CalibrationConfig, factor: f64) -> Result<f64> {
    let lib = lib.clone().with_mu_s_scale(factor);
    let scene = build_abdomen_scene(&AbdomenConfig::default(), &lib)?;
    let probe = ProbeLayout::single_pair(cfg.sd_cm, scene.wavelength_nm);
    let t = TransportConfig {
        estimator: cfg.estimator,
        ..TransportConfig::new(cfg.photons_per_eval, cfg.seed)
    };
    Ok(simulate(&scene, &probe, &t)?.detectors[0].detected_fraction)
}

/// Searches the scattering scale so the abdomen detected fraction lands on
/// the target. All evaluations share one seed so the search sees smooth
/// differences rather than independent noise.
pub fn calibrate_mu_s(lib: &MediaLibrary, cfg: &CalibrationConfig) -> Result<Calibration> {
    if !(cfg.min_factor > 0.0 && cfg.max_factor > cfg.min_factor && cfg.grid_points >= 2) {
        return Err(Error::Config("calibration range or grid is invalid".into()));
    }
    let mut evals = Vec::new();
    let (lo, hi) = (cfg.min_factor.ln(), cfg.max_factor.ln());
    for i in 0..cfg.grid_points {
        let f = (lo + (hi - lo) * i as f64 / (cfg.grid_points - 1) as f64).exp();
        evals.push((f, fraction_at(lib, cfg, f)?));
    }
    let miss = |v: f64| (v / cfg.target_fraction).ln();
    let bracket = evals
        .windows(2)
        .find(|w| miss(w[0].1).signum() != miss(w[1].1).signum() && w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| (w[0], w[1]));
    let Some((mut a, mut b)) = bracket else {
        let best = evals
            .iter()
            .filter(|e| e.1 > 0.0)
            .min_by(|x, y| miss(x.1).abs().total_cmp(&miss(y.1).abs()))
            .copied()
            .unwrap_or(evals[0]);
        return Ok(Calibration {
            factor: best.0,
            fraction: best.1,
            target_fraction: cfg.target_fraction,
            evaluations: evals,
            bracketed: false,
        });
    };
    for _ in 0..cfg.bisection_steps {
        // Secant step in (ln factor, ln fraction), kept inside the bracket.
        let (xa, ya) = (a.0.ln(), miss(a.1));
        let (xb, yb) = (b.0.ln(), miss(b.1));
        let mut x = xa - ya * (xb - xa) / (yb - ya);
        let margin = 0.1 * (xb - xa);
        x = x.clamp(xa + margin, xb - margin);
        let f = x.exp();
        let v = fraction_at(lib, cfg, f)?;
        evals.push((f, v));
        if v <= 0.0 {
            break;
        }
        if miss(v).signum() == ya.signum() {
            a = (f, v);
        } else {
            b = (f, v);
        }
    }
    let best = evals
        .iter()
        .filter(|e| e.1 > 0.0)
        .min_by(|x, y| miss(x.1).abs().total_cmp(&miss(y.1).abs()))
        .copied()
        .unwrap_or(evals[0]);
    Ok(Calibration {
        factor: best.0,
        fraction: best.1,
        target_fraction: cfg.target_fraction,
        evaluations: evals,
        bracketed: true,
    })
}
