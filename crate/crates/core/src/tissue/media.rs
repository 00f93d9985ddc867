//! Optical media, chromophore absorption tables and the versioned defaults file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::sha256_hex;

/// Environment variable naming a media-defaults file that replaces the
/// built-in one.
pub const DEFAULTS_ENV: &str = "NIRSIM_MEDIA_DEFAULTS";

const BUILTIN_DEFAULTS: &str = include_str!("../../data/media_defaults.toml");

/// Optical properties of one medium at one wavelength.
///
/// `mu_a` and `mu_s` are in 1/cm; `g` is the scattering anisotropy and `n`
/// the refractive index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalMedium {
    pub label: String,
    pub mu_a: f64,
    pub mu_s: f64,
    pub g: f64,
    pub n: f64,
}

impl OpticalMedium {
    pub fn new(label: impl Into<String>, mu_a: f64, mu_s: f64, g: f64, n: f64) -> Result<Self> {
        let m = OpticalMedium {
            label: label.into(),
            mu_a,
            mu_s,
            g,
            n,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn air() -> Self {
        OpticalMedium {
            label: "air".into(),
            mu_a: 0.0,
            mu_s: 0.0,
            g: 0.0,
            n: 1.0,
        }
    }

    pub fn is_air(&self) -> bool {
        self.mu_a == 0.0 && self.mu_s == 0.0 && self.n == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("medium '{}': {msg}", self.label)));
        if !(self.mu_a >= 0.0 && self.mu_a.is_finite()) {
            return bad("mu_a must be finite and >= 0");
        }
        if !(self.mu_s >= 0.0 && self.mu_s.is_finite()) {
            return bad("mu_s must be finite and >= 0");
        }
        if !(-1.0..=1.0).contains(&self.g) {
            return bad("g must lie in [-1, 1]");
        }
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return bad("n must be >= 1");
        }
        if self.label != "air" && !self.is_air() && self.mu_a + self.mu_s <= 0.0 {
            return bad("mu_a + mu_s must be positive for a non-air medium");
        }
        Ok(())
    }
}

/// Piecewise-linear absorption spectrum of one chromophore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRepr", into = "SpectrumRepr")]
pub struct AbsorptionSpectrum {
    points: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRepr {
    points: Vec<[f64; 2]>,
}

impl TryFrom<SpectrumRepr> for AbsorptionSpectrum {
    type Error = Error;
    fn try_from(r: SpectrumRepr) -> Result<Self> {
        AbsorptionSpectrum::new(r.points.into_iter().map(|[w, a]| (w, a)).collect())
    }
}

impl From<AbsorptionSpectrum> for SpectrumRepr {
    fn from(s: AbsorptionSpectrum) -> Self {
        SpectrumRepr {
            points: s.points.into_iter().map(|(w, a)| [w, a]).collect(),
        }
    }
}

impl AbsorptionSpectrum {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("absorption spectrum has no points".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "absorption spectrum wavelengths must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|&(_, a)| !(a >= 0.0)) {
            return Err(Error::Config("absorption coefficients must be >= 0".into()));
        }
        Ok(AbsorptionSpectrum { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Absorption at `wavelength_nm`, exact at anchors and linear between them.
    pub fn mu_a_at(&self, wavelength_nm: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return Err(Error::Range {
                what: "wavelength_nm",
                value: wavelength_nm,
                min: lo,
                max: hi,
            });
        }
        let i = self.points.partition_point(|&(w, _)| w < wavelength_nm);
        let (w1, a1) = self.points[i];
        if w1 == wavelength_nm || i == 0 {
            return Ok(a1);
        }
        let (w0, a0) = self.points[i - 1];
        let f = (wavelength_nm - w0) / (w1 - w0);
        Ok(a0 + f * (a1 - a0))
    }
}

/// Absorption spectra keyed by chromophore name. Water is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, AbsorptionSpectrum>")]
#[serde(into = "BTreeMap<String, AbsorptionSpectrum>")]
pub struct ChromophoreTable {
    spectra: BTreeMap<String, AbsorptionSpectrum>,
}

impl TryFrom<BTreeMap<String, AbsorptionSpectrum>> for ChromophoreTable {
    type Error = Error;
    fn try_from(spectra: BTreeMap<String, AbsorptionSpectrum>) -> Result<Self> {
        if !spectra.contains_key("water") {
            return Err(Error::Config(
                "chromophore table must contain 'water'".into(),
            ));
        }
        Ok(ChromophoreTable { spectra })
    }
}

impl From<ChromophoreTable> for BTreeMap<String, AbsorptionSpectrum> {
    fn from(t: ChromophoreTable) -> Self {
        t.spectra
    }
}

impl ChromophoreTable {
    pub fn water(&self) -> &AbsorptionSpectrum {
        &self.spectra["water"]
    }

    pub fn get(&self, name: &str) -> Option<&AbsorptionSpectrum> {
        self.spectra.get(name)
    }
}

/// Water absorption (1/cm) from the built-in table: 0.058 at 890 nm,
/// 0.481 at 970 nm and 32.778 at 1450 nm, linear in between.
pub fn water_mu_a(wavelength_nm: f64) -> Result<f64> {
    builtin_water().mu_a_at(wavelength_nm)
}

fn builtin_water() -> &'static AbsorptionSpectrum {
    use std::sync::OnceLock;
    static WATER: OnceLock<AbsorptionSpectrum> = OnceLock::new();
    WATER.get_or_init(|| {
        AbsorptionSpectrum::new(vec![(890.0, 0.058), (970.0, 0.481), (1450.0, 32.778)])
            .expect("built-in water table is valid")
    })
}

/// Wavelength-independent description of a medium from the defaults file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    /// Pinned absorption; when absent it is built from the water fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<f64>,
    pub mu_s: f64,
    pub g: f64,
    pub n: f64,
    #[serde(default)]
    pub water_fraction: f64,
    #[serde(default)]
    pub baseline_mu_a: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsFile {
    version: String,
    chromophores: ChromophoreTable,
    media: BTreeMap<String, MediumSpec>,
}

/// The media defaults in force for a run, plus the scattering scale found by
/// calibration.
#[derive(Debug, Clone)]
pub struct MediaLibrary {
    version: String,
    source_text: String,
    chromophores: ChromophoreTable,
    specs: BTreeMap<String, MediumSpec>,
    mu_s_scale: f64,
}

impl MediaLibrary {
    /// The defaults compiled into the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_DEFAULTS).expect("built-in defaults parse")
    }

    /// Built-in defaults, or the file named by `NIRSIM_MEDIA_DEFAULTS`.
    pub fn load_default() -> Result<Self> {
        match std::env::var_os(DEFAULTS_ENV) {
            Some(path) => Self::from_path(Path::new(&path)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DefaultsFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("media defaults: {e}")))?;
        let lib = MediaLibrary {
            version: file.version,
            source_text: text.to_owned(),
            chromophores: file.chromophores,
            specs: file.media,
            mu_s_scale: 1.0,
        };
        for label in lib.specs.keys() {
            let (lo, _) = lib.chromophores.water().range();
            lib.resolve(label, lo)?;
        }
        Ok(lib)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// SHA-256 of the defaults text, recorded in every result file.
    pub fn source_hash(&self) -> String {
        sha256_hex(self.source_text.as_bytes())
    }

    pub fn chromophores(&self) -> &ChromophoreTable {
        &self.chromophores
    }

    pub fn mu_s_scale(&self) -> f64 {
        self.mu_s_scale
    }

    /// Multiplies every medium's scattering coefficient by `scale`.
    pub fn with_mu_s_scale(mut self, scale: f64) -> Self {
        self.mu_s_scale = scale;
        self
    }

    pub fn with_override(mut self, label: impl Into<String>, spec: MediumSpec) -> Self {
        self.specs.insert(label.into(), spec);
        self
    }

    pub fn spec(&self, label: &str) -> Option<&MediumSpec> {
        self.specs.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }

    /// Optical properties of `label` at `wavelength_nm`.
    pub fn resolve(&self, label: &str, wavelength_nm: f64) -> Result<OpticalMedium> {
        let spec = self
            .specs
            .get(label)
            .ok_or_else(|| Error::Config(format!("unknown medium '{label}'")))?;
        let mu_a = match spec.mu_a {
            Some(a) => a,
            None => {
                let water = if spec.water_fraction > 0.0 {
                    spec.water_fraction * self.chromophores.water().mu_a_at(wavelength_nm)?
                } else {
                    0.0
                };
                water + spec.baseline_mu_a
            }
        };
        OpticalMedium::new(label, mu_a, spec.mu_s * self.mu_s_scale, spec.g, spec.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn water_anchor_values() {
        assert_eq!(water_mu_a(890.0).unwrap(), 0.058);
        assert_eq!(water_mu_a(970.0).unwrap(), 0.481);
        assert_eq!(water_mu_a(1450.0).unwrap(), 32.778);
    }

    #[test]
    fn water_interpolates_linearly() {
        let mid = water_mu_a(930.0).unwrap();
        assert!((mid - (0.058 + 0.481) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn water_out_of_range_names_interval() {
        let err = water_mu_a(850.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("890") && msg.contains("1450"), "{msg}");
        assert!(water_mu_a(1451.0).is_err());
        assert!(water_mu_a(f64::NAN).is_err());
    }

    #[test]
    fn spectrum_rejects_unsorted() {
        assert!(AbsorptionSpectrum::new(vec![(900.0, 1.0), (900.0, 2.0)]).is_err());
        assert!(AbsorptionSpectrum::new(vec![(900.0, -1.0)]).is_err());
    }

    #[test]
    fn builtin_tissue_absorption_follows_water_fraction() {
        let lib = MediaLibrary::builtin();
        let muscle = lib.resolve("muscle", 970.0).unwrap();
        assert!((muscle.mu_a - (0.75 * 0.481 + 0.05)).abs() < 1e-12);
        assert_eq!(muscle.mu_s, 8.0);
        let air = lib.resolve("air", 970.0).unwrap();
        assert!(air.is_air());
        let scaled = lib
            .clone()
            .with_mu_s_scale(1.5)
            .resolve("dermis", 970.0)
            .unwrap();
        assert!((scaled.mu_s - 18.0).abs() < 1e-12);
    }

    #[test]
    fn medium_invariants() {
        assert!(OpticalMedium::new("x", -1.0, 1.0, 0.9, 1.4).is_err());
        assert!(OpticalMedium::new("x", 1.0, 1.0, 1.5, 1.4).is_err());
        assert!(OpticalMedium::new("x", 1.0, 1.0, 0.9, 0.9).is_err());
        assert!(OpticalMedium::new("x", 0.0, 0.0, 0.9, 1.4).is_err());
        assert!(OpticalMedium::new("x", 0.1, 1.0, 0.9, 1.4).is_ok());
    }

    #[test]
    fn defaults_require_water() {
        let text = r#"
version = "t"
[chromophores.lipid]
points = [[900.0, 0.1]]
[media.air]
mu_a = 0.0
mu_s = 0.0
g = 0.0
n = 1.0
"#;
        assert!(MediaLibrary::from_toml_str(text).is_err());
    }
}
