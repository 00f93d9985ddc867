//! Modified Beer-Lambert law: `A = Σ εᵢ cᵢ · D · L + G`, base-10 absorbance.
//!
//! Chromophore terms are stored as absorption-equivalents `εᵢ cᵢ` in cm⁻¹.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the measurement: source-detector distance `l_cm`,
/// differential path-length factor `d` and scattering offset `g`.
/// The caller always supplies these; there are no defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub l_cm: f64,
    pub d: f64,
    pub g: f64,
}

impl PathParams {
    pub fn new(l_cm: f64, d: f64, g: f64) -> Result<Self> {
        if !(l_cm > 0.0) {
            return Err(Error::Domain(format!(
                "path length L = {l_cm} cm must be positive"
            )));
        }
        if !(d >= 1.0) {
            return Err(Error::Domain(format!(
                "path-length factor D = {d} must be at least 1"
            )));
        }
        if !(g >= 0.0) {
            return Err(Error::Domain(format!(
                "scattering offset G = {g} must be non-negative"
            )));
        }
        Ok(PathParams { l_cm, d, g })
    }

    /// Effective optical path `D · L`, cm.
    pub fn effective_path_cm(&self) -> f64 {
        self.d * self.l_cm
    }
}

/// One chromophore's contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromophore {
    pub name: String,
    /// `ε · c`, cm⁻¹.
    pub mu_a: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChromophoreConc {
    pub terms: Vec<Chromophore>,
}

impl ChromophoreConc {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term from molar extinction (cm⁻¹ per mol/L) and concentration (mol/L).
    pub fn with_molar(mut self, name: &str, epsilon: f64, c: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && c >= 0.0) {
            return Err(Error::Domain(format!(
                "{name}: extinction {epsilon} and concentration {c} must be non-negative"
            )));
        }
        self.terms.push(Chromophore {
            name: name.to_owned(),
            mu_a: epsilon * c,
        });
        Ok(self)
    }

    /// Adds a term given directly as an absorption coefficient, cm⁻¹.
    pub fn with_mu_a(mut self, name: &str, mu_a: f64) -> Result<Self> {
        if !(mu_a >= 0.0) {
            return Err(Error::Domain(format!(
                "{name}: mu_a {mu_a} must be non-negative"
            )));
        }
        self.terms.push(Chromophore {
            name: name.to_owned(),
            mu_a,
        });
        Ok(self)
    }

    pub fn total_mu_a(&self) -> f64 {
        self.terms.iter().map(|t| t.mu_a).sum()
    }
}

/// `log10(i0 / i)`.
pub fn attenuation(i0: f64, i: f64) -> Result<f64> {
    if !(i0 > 0.0 && i > 0.0) {
        return Err(Error::Domain(format!(
            "intensities must be positive (i0 = {i0}, i = {i})"
        )));
    }
    Ok((i0 / i).log10())
}

pub fn predicted_attenuation(concs: &ChromophoreConc, path: &PathParams) -> f64 {
    concs.total_mu_a() * path.d * path.l_cm + path.g
}

/// Concentration change explaining an attenuation change; `G` cancels.
pub fn delta_concentration(
    a_before: f64,
    a_after: f64,
    epsilon: f64,
    path: &PathParams,
) -> Result<f64> {
    let denom = epsilon * path.d * path.l_cm;
    if !(epsilon > 0.0) || denom == 0.0 || !denom.is_finite() {
        return Err(Error::Domain(format!(
            "epsilon * D * L = {denom} must be positive and finite"
        )));
    }
    Ok((a_after - a_before) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attenuation_examples() {
        assert_eq!(attenuation(1.0, 1.0).unwrap(), 0.0);
        assert!((attenuation(1.0, 0.1).unwrap() - 1.0).abs() < 1e-15);
        assert!((attenuation(1.0, 5.4e-6).unwrap() - 5.267_606_240_177_03).abs() < 1e-12);
        assert!(attenuation(0.0, 1.0).is_err());
        assert!(attenuation(1.0, -1.0).is_err());
    }

    #[test]
    fn predicted_examples() {
        let p = PathParams::new(4.0, 1.0, 0.0).unwrap();
        assert_eq!(predicted_attenuation(&ChromophoreConc::new(), &p), 0.0);
        let water = ChromophoreConc::new().with_mu_a("water", 0.481).unwrap();
        assert!((predicted_attenuation(&water, &p) - 1.924).abs() < 1e-12);
        let g = PathParams::new(4.0, 1.0, 2.5).unwrap();
        assert_eq!(predicted_attenuation(&ChromophoreConc::new(), &g), 2.5);
    }

    #[test]
    fn delta_examples() {
        let p = PathParams::new(4.0, 1.0, 0.0).unwrap();
        assert_eq!(delta_concentration(1.3, 1.3, 1.0, &p).unwrap(), 0.0);
        assert!((delta_concentration(1.0, 1.5, 1.0, &p).unwrap() - 0.125).abs() < 1e-15);
        assert!(delta_concentration(1.0, 1.5, 0.0, &p).is_err());
    }

    #[test]
    fn path_invariants() {
        assert!(PathParams::new(0.0, 1.0, 0.0).is_err());
        assert!(PathParams::new(1.0, 0.5, 0.0).is_err());
        assert!(PathParams::new(1.0, 1.0, -0.1).is_err());
    }
}
