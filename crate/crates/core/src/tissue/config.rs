//! Scene configuration files (TOML).
//!
//! ```toml
//! preset = "abdomen"
//! wavelength_nm = 970.0
//! voxel_resolution_mm = 1.0
//! layers = [[10.0, "air"], [2.0, "dermis"], [10.0, "fat"], [128.0, "muscle"]]
//!
//! [media.muscle]
//! mu_a = 0.41
//! mu_s = 8.0
//! g = 0.9
//! n = 1.37
//!
//! [inclusion]
//! shape = "ellipsoid"
//! volume_ml = 300.0
//! center_depth_mm = 70.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

use super::builders::{
    build_abdomen_scene, build_absorber_scene, build_phantom_scene, build_porcine_scene,
    AbdomenConfig, BladderSpec, PhantomConfig, PorcineConfig,
};
use super::media::{MediaLibrary, MediumSpec};
use super::scene::{Fill, Inclusion, Layer, MediumId, Shape, TissueScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenePreset {
    Abdomen,
    Phantom,
    Porcine,
    Absorber,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionConfig {
    /// "ellipsoid" or "box".
    pub shape: String,
    pub volume_ml: f64,
    #[serde(default)]
    pub center_depth_mm: Option<f64>,
    #[serde(default)]
    pub aspect: Option<[f64; 3]>,
    #[serde(default)]
    pub medium: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

/// Parsed scene file. Media overrides replace the defaults for this scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub preset: ScenePreset,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "default_resolution")]
    pub voxel_resolution_mm: f64,
    #[serde(default)]
    pub volume_ml: Option<f64>,
    #[serde(default)]
    pub mu_s_scale: Option<f64>,
    #[serde(default)]
    pub layers: Option<Vec<(f64, String)>>,
    #[serde(default)]
    pub bounds_mm: Option<BoundsConfig>,
    #[serde(default)]
    pub media: BTreeMap<String, MediumSpec>,
    #[serde(default)]
    pub inclusion: Option<InclusionConfig>,
}

fn default_wavelength() -> f64 {
    970.0
}

fn default_resolution() -> f64 {
    1.0
}

impl SceneConfig {
    pub fn preset(preset: ScenePreset) -> Self {
        SceneConfig {
            preset,
            wavelength_nm: default_wavelength(),
            voxel_resolution_mm: default_resolution(),
            volume_ml: None,
            mu_s_scale: None,
            layers: None,
            bounds_mm: None,
            media: BTreeMap::new(),
            inclusion: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scene config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The media library with this file's overrides and scattering scale applied.
    pub fn library(&self, base: &MediaLibrary) -> MediaLibrary {
        let mut lib = base.clone();
        for (label, spec) in &self.media {
            lib = lib.with_override(label.clone(), spec.clone());
        }
        if let Some(s) = self.mu_s_scale {
            lib = lib.with_mu_s_scale(s);
        }
        lib
    }

    pub fn build(&self, base: &MediaLibrary) -> Result<TissueScene> {
        let lib = self.library(base);
        match self.preset {
            ScenePreset::Abdomen => {
                let mut cfg = AbdomenConfig {
                    wavelength_nm: self.wavelength_nm,
                    voxel_resolution_mm: self.voxel_resolution_mm,
                    ..AbdomenConfig::default()
                };
                if let Some(layers) = &self.layers {
                    cfg.layers = layers.clone();
                }
                if let Some(inc) = &self.inclusion {
                    if inc.shape != "ellipsoid" {
                        return Err(Error::Config(
                            "abdomen inclusions must be ellipsoids".into(),
                        ));
                    }
                    cfg.bladder = Some(BladderSpec {
                        volume_ml: inc.volume_ml,
                        center_depth_mm: inc.center_depth_mm.ok_or_else(|| {
                            Error::Config("inclusion.center_depth_mm is required".into())
                        })?,
                        aspect: inc.aspect.unwrap_or([1.3, 1.0, 0.8]),
                        medium: inc.medium.clone().unwrap_or_else(|| "water".into()),
                    });
                }
                build_abdomen_scene(&cfg, &lib)
            }
            ScenePreset::Phantom => {
                let cfg = PhantomConfig {
                    wavelength_nm: self.wavelength_nm,
                    voxel_resolution_mm: self.voxel_resolution_mm,
                    ..PhantomConfig::default()
                };
                let v = self
                    .volume_ml
                    .ok_or_else(|| Error::Config("phantom scenes need volume_ml".into()))?;
                build_phantom_scene(v, &cfg, &lib)
            }
            ScenePreset::Porcine => {
                let mut cfg = PorcineConfig::default();
                cfg.phantom.wavelength_nm = self.wavelength_nm;
                cfg.phantom.voxel_resolution_mm = self.voxel_resolution_mm;
                if let Some(v) = self.volume_ml {
                    cfg.volume_ml = v;
                }
                build_porcine_scene(&cfg, &lib)
            }
            ScenePreset::Absorber => build_absorber_scene(self.wavelength_nm, &lib),
            ScenePreset::Custom => self.build_custom(&lib),
        }
    }

    fn build_custom(&self, lib: &MediaLibrary) -> Result<TissueScene> {
        let layers = self
            .layers
            .as_ref()
            .ok_or_else(|| Error::Config("custom scenes need layers".into()))?;
        let b = self
            .bounds_mm
            .as_ref()
            .ok_or_else(|| Error::Config("custom scenes need bounds_mm".into()))?;
        let depth: f64 = layers.iter().map(|(t, _)| t).sum();
        let bounds = Aabb::new(
            Vec3::new(b.x[0], b.y[0], 0.0),
            Vec3::new(b.x[1], b.y[1], depth),
        );
        let mut media = Vec::new();
        let mut id = |label: &str| -> Result<MediumId> {
            if let Some(i) = media
                .iter()
                .position(|m: &super::OpticalMedium| m.label == label)
            {
                return Ok(i as MediumId);
            }
            media.push(lib.resolve(label, self.wavelength_nm)?);
            Ok((media.len() - 1) as MediumId)
        };
        let layers = layers
            .iter()
            .map(|(t, m)| {
                Ok(Layer {
                    thickness_mm: *t,
                    medium: id(m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut inclusions = Vec::new();
        if let Some(inc) = &self.inclusion {
            let medium = id(inc.medium.as_deref().unwrap_or("water"))?;
            let depth_c = inc
                .center_depth_mm
                .ok_or_else(|| Error::Config("inclusion.center_depth_mm is required".into()))?;
            let center = Vec3::new((b.x[0] + b.x[1]) / 2.0, (b.y[0] + b.y[1]) / 2.0, depth_c);
            let shape = match inc.shape.as_str() {
                "ellipsoid" => Shape::Ellipsoid {
                    center,
                    semi_axes: BladderSpec {
                        volume_ml: inc.volume_ml,
                        center_depth_mm: depth_c,
                        aspect: inc.aspect.unwrap_or([1.3, 1.0, 0.8]),
                        medium: String::new(),
                    }
                    .semi_axes(),
                },
                "box" => {
                    let [a, b2, c] = inc.aspect.unwrap_or([1.0, 1.0, 1.0]);
                    let k = (inc.volume_ml * 1000.0 / (a * b2 * c)).cbrt();
                    let half = Vec3::new(a * k / 2.0, b2 * k / 2.0, c * k / 2.0);
                    Shape::Box {
                        aabb: Aabb::new(center - half, center + half),
                    }
                }
                other => return Err(Error::Config(format!("unknown inclusion shape '{other}'"))),
            };
            inclusions.push(Inclusion {
                label: "bladder".into(),
                shape,
                fill: Fill::Full { medium },
                volume_ml: Some(inc.volume_ml),
            });
        }
        TissueScene::new(
            "custom",
            self.wavelength_nm,
            bounds,
            layers,
            inclusions,
            media,
            self.voxel_resolution_mm,
            lib,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abdomen_file_with_override() {
        let text = r#"
preset = "abdomen"
[media.muscle]
mu_a = 0.3
mu_s = 9.0
g = 0.85
n = 1.37
"#;
        let cfg = SceneConfig::from_toml_str(text).unwrap();
        let scene = cfg.build(&MediaLibrary::builtin()).unwrap();
        let m = scene.medium_at(Vec3::new(0.0, 0.0, 100.0)).unwrap();
        assert_eq!((m.mu_a, m.mu_s, m.g), (0.3, 9.0, 0.85));
    }

    #[test]
    fn bad_layers_fail_construction() {
        let text = r#"
preset = "abdomen"
layers = [[10.0, "air"], [2.0, "dermis"], [10.0, "fat"], [100.0, "muscle"]]
"#;
        let cfg = SceneConfig::from_toml_str(text).unwrap();
        assert!(matches!(
            cfg.build(&MediaLibrary::builtin()),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn custom_scene_with_box_inclusion() {
        let text = r#"
preset = "custom"
layers = [[20.0, "muscle"], [40.0, "fat"]]
bounds_mm = { x = [-50.0, 50.0], y = [-50.0, 50.0] }
[inclusion]
shape = "box"
volume_ml = 8.0
center_depth_mm = 30.0
"#;
        let scene = SceneConfig::from_toml_str(text)
            .unwrap()
            .build(&MediaLibrary::builtin())
            .unwrap();
        assert_eq!(
            scene.medium_at(Vec3::new(0.0, 0.0, 30.0)).unwrap().label,
            "water"
        );
        assert_eq!(
            scene.medium_at(Vec3::new(0.0, 0.0, 10.0)).unwrap().label,
            "muscle"
        );
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(SceneConfig::from_toml_str("preset = \"abdomen\"\nbogus = 1\n").is_err());
    }
}
