//! Optode placement on the scene's top surface.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tissue::TissueScene;

pub const DEFAULT_CONE_HALF_ANGLE_DEG: f64 = 10.0;
pub const DEFAULT_ACCEPTANCE_HALF_ANGLE_DEG: f64 = 60.0;
pub const DEFAULT_ACTIVE_AREA_MM2: f64 = 6.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emitter {
    /// (x, y) on the top surface, mm.
    pub position_mm: [f64; 2],
    #[serde(default = "default_cone")]
    pub cone_half_angle_deg: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detector {
    pub id: u32,
    pub position_mm: [f64; 2],
    /// Square patch centred on `position_mm`.
    #[serde(default = "default_area")]
    pub active_area_mm2: f64,
    #[serde(default = "default_acceptance")]
    pub acceptance_half_angle_deg: f64,
}

fn default_cone() -> f64 {
    DEFAULT_CONE_HALF_ANGLE_DEG
}

fn default_area() -> f64 {
    DEFAULT_ACTIVE_AREA_MM2
}

fn default_acceptance() -> f64 {
    DEFAULT_ACCEPTANCE_HALF_ANGLE_DEG
}

impl Detector {
    pub fn new(id: u32, x_mm: f64, y_mm: f64) -> Self {
        Detector {
            id,
            position_mm: [x_mm, y_mm],
            active_area_mm2: DEFAULT_ACTIVE_AREA_MM2,
            acceptance_half_angle_deg: DEFAULT_ACCEPTANCE_HALF_ANGLE_DEG,
        }
    }

    pub fn half_side_mm(&self) -> f64 {
        self.active_area_mm2.sqrt() / 2.0
    }

    pub fn covers(&self, x: f64, y: f64) -> bool {
        let h = self.half_side_mm();
        (x - self.position_mm[0]).abs() <= h && (y - self.position_mm[1]).abs() <= h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeLayout {
    pub emitters: Vec<Emitter>,
    pub detectors: Vec<Detector>,
    #[serde(default)]
    pub pair_spacing_cm: f64,
    #[serde(default)]
    pub sd_distance_cm: f64,
}

impl ProbeLayout {
    /// One LED and one PD `sd_cm` apart, centred on the origin along x.
    pub fn single_pair(sd_cm: f64, wavelength_nm: f64) -> Self {
        let half = sd_cm * 5.0;
        ProbeLayout {
            emitters: vec![Emitter {
                position_mm: [-half, 0.0],
                cone_half_angle_deg: DEFAULT_CONE_HALF_ANGLE_DEG,
                wavelength_nm,
            }],
            detectors: vec![Detector::new(1, half, 0.0)],
            pair_spacing_cm: 0.0,
            sd_distance_cm: sd_cm,
        }
    }

    /// One LED at `emitter_x_mm` and a PD at each distance (cm) along +x.
    pub fn sd_sweep(emitter_x_mm: f64, distances_cm: &[f64], wavelength_nm: f64) -> Self {
        ProbeLayout {
            emitters: vec![Emitter {
                position_mm: [emitter_x_mm, 0.0],
                cone_half_angle_deg: DEFAULT_CONE_HALF_ANGLE_DEG,
                wavelength_nm,
            }],
            detectors: distances_cm
                .iter()
                .enumerate()
                .map(|(i, d)| Detector::new(i as u32 + 1, emitter_x_mm + d * 10.0, 0.0))
                .collect(),
            pair_spacing_cm: 0.0,
            sd_distance_cm: distances_cm.first().copied().unwrap_or(0.0),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("probe config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Emitter-to-detector distance in cm, measured from the first emitter.
    pub fn sd_cm(&self, detector: usize) -> f64 {
        let e = self.emitters[0].position_mm;
        let d = self.detectors[detector].position_mm;
        ((d[0] - e[0]).hypot(d[1] - e[1])) / 10.0
    }

    pub fn validate(&self, scene: &TissueScene) -> Result<()> {
        if self.emitters.is_empty() {
            return Err(Error::Config("probe has no emitters".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("probe has no detectors".into()));
        }
        let angle_ok = |a: f64| a > 0.0 && a <= 90.0;
        for e in &self.emitters {
            // A zero cone is a collimated pencil beam.
            if !(angle_ok(e.cone_half_angle_deg) || e.cone_half_angle_deg == 0.0) {
                return Err(Error::Config(format!(
                    "emitter cone half-angle {} deg is outside [0, 90]",
                    e.cone_half_angle_deg
                )));
            }
            if !scene.on_top_surface(e.position_mm[0], e.position_mm[1]) {
                return Err(Error::Config(format!(
                    "emitter at {:?} mm is off the scene surface",
                    e.position_mm
                )));
            }
        }
        for d in &self.detectors {
            if !(d.active_area_mm2 > 0.0) {
                return Err(Error::Config(format!(
                    "detector {} has no active area",
                    d.id
                )));
            }
            if !angle_ok(d.acceptance_half_angle_deg) {
                return Err(Error::Config(format!(
                    "detector {} acceptance half-angle {} deg is outside (0, 90]",
                    d.id, d.acceptance_half_angle_deg
                )));
            }
            let h = d.half_side_mm();
            let [x, y] = d.position_mm;
            if !(scene.on_top_surface(x - h, y - h) && scene.on_top_surface(x + h, y + h)) {
                return Err(Error::Config(format!(
                    "detector {} at {:?} mm is off the scene surface",
                    d.id, d.position_mm
                )));
            }
        }
        Ok(())
    }
}
