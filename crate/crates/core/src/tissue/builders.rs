//! Scene presets: the layered abdomen model, the water-container phantom and
//! its porcine-bladder variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

use super::media::{MediaLibrary, OpticalMedium};
use super::scene::{Fill, Inclusion, Layer, MediumId, Shape, TissueScene};

/// Collects the distinct media a builder uses, in first-use order.
struct Palette<'a> {
    lib: &'a MediaLibrary,
    wavelength_nm: f64,
    media: Vec<OpticalMedium>,
}

impl<'a> Palette<'a> {
    fn new(lib: &'a MediaLibrary, wavelength_nm: f64) -> Self {
        Palette {
            lib,
            wavelength_nm,
            media: Vec::new(),
        }
    }

    fn id(&mut self, label: &str) -> Result<MediumId> {
        if let Some(i) = self.media.iter().position(|m| m.label == label) {
            return Ok(i as MediumId);
        }
        self.media
            .push(self.lib.resolve(label, self.wavelength_nm)?);
        Ok((self.media.len() - 1) as MediumId)
    }
}

/// Ellipsoidal bladder placed inside a layered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BladderSpec {
    pub volume_ml: f64,
    /// Depth of the ellipsoid centre below the top surface.
    pub center_depth_mm: f64,
    /// Relative semi-axis lengths (x, y, z); scaled to hit `volume_ml`.
    #[serde(default = "default_aspect")]
    pub aspect: [f64; 3],
    #[serde(default = "default_bladder_medium")]
    pub medium: String,
}

fn default_aspect() -> [f64; 3] {
    [1.3, 1.0, 0.8]
}

fn default_bladder_medium() -> String {
    "water".into()
}

impl BladderSpec {
    pub fn semi_axes(&self) -> Vec3 {
        let [a, b, c] = self.aspect;
        let unit = 4.0 / 3.0 * std::f64::consts::PI * a * b * c;
        let k = (self.volume_ml * 1000.0 / unit).cbrt();
        Vec3::new(a * k, b * k, c * k)
    }
}

/// The layered abdomen model: a cube of side 150 mm with air, dermis,
/// subcutaneous fat and muscle stacked along depth. `side_mm` sets the
/// lateral extent and `depth_mm` the depth, which the layers must fill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbdomenConfig {
    pub side_mm: f64,
    pub depth_mm: f64,
    pub layers: Vec<(f64, String)>,
    pub wavelength_nm: f64,
    pub voxel_resolution_mm: f64,
    pub bladder: Option<BladderSpec>,
}

impl Default for AbdomenConfig {
    fn default() -> Self {
        AbdomenConfig {
            side_mm: 150.0,
            depth_mm: 150.0,
            layers: vec![
                (10.0, "air".into()),
                (2.0, "dermis".into()),
                (10.0, "fat".into()),
                (128.0, "muscle".into()),
            ],
            wavelength_nm: 970.0,
            voxel_resolution_mm: 1.0,
            bladder: None,
        }
    }
}

pub fn build_abdomen_scene(cfg: &AbdomenConfig, lib: &MediaLibrary) -> Result<TissueScene> {
    let half = cfg.side_mm / 2.0;
    let bounds = Aabb::new(
        Vec3::new(-half, -half, 0.0),
        Vec3::new(half, half, cfg.depth_mm),
    );
    let mut pal = Palette::new(lib, cfg.wavelength_nm);
    let layers = cfg
        .layers
        .iter()
        .map(|(t, m)| {
            Ok(Layer {
                thickness_mm: *t,
                medium: pal.id(m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut inclusions = Vec::new();
    if let Some(b) = &cfg.bladder {
        if !(b.volume_ml > 0.0) {
            return Err(Error::Construction(
                "bladder volume must be positive".into(),
            ));
        }
        inclusions.push(Inclusion {
            label: "bladder".into(),
            shape: Shape::Ellipsoid {
                center: Vec3::new(0.0, 0.0, b.center_depth_mm),
                semi_axes: b.semi_axes(),
            },
            fill: Fill::Full {
                medium: pal.id(&b.medium)?,
            },
            volume_ml: Some(b.volume_ml),
        });
    }
    TissueScene::new(
        "abdomen",
        cfg.wavelength_nm,
        bounds,
        layers,
        inclusions,
        pal.media,
        cfg.voxel_resolution_mm,
        lib,
    )
}

/// Geometry of the water-container phantom.
///
/// The phantom runs along x from 0 to `length_mm`; an air margin on both
/// sides lets the probe sit off the phantom. The container sits centred on
/// the phantom directly above the `slab_mm` tissue slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub length_mm: f64,
    pub width_mm: f64,
    pub slab_mm: f64,
    /// Container inner size (x, y, height).
    pub container_mm: [f64; 3],
    pub margin_mm: f64,
    pub wavelength_nm: f64,
    pub voxel_resolution_mm: f64,
    pub tissue_medium: String,
    pub liquid_medium: String,
    /// Which side of the container the liquid settles against.
    pub liquid_side: LiquidSide,
    /// Tissue covering the far side of the container, mm.
    pub cover_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiquidSide {
    /// Against the slab, nearest the probe.
    Probe,
    /// Against the far wall, with the headspace next to the slab.
    Far,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            length_mm: 220.0,
            width_mm: 100.0,
            slab_mm: 20.0,
            container_mm: [80.0, 80.0, 80.0],
            margin_mm: 60.0,
            wavelength_nm: 970.0,
            voxel_resolution_mm: 1.0,
            tissue_medium: "phantom_tissue".into(),
            liquid_medium: "water".into(),
            liquid_side: LiquidSide::Probe,
            cover_mm: 0.0,
        }
    }
}

impl PhantomConfig {
    pub fn capacity_ml(&self) -> f64 {
        let [x, y, z] = self.container_mm;
        x * y * z / 1000.0
    }

    /// Water column height in cm for `volume_ml`.
    pub fn fill_height_cm(&self, volume_ml: f64) -> f64 {
        let [x, y, _] = self.container_mm;
        volume_ml / (x * y / 100.0)
    }

    pub fn container_box(&self) -> Aabb {
        let [cx, cy, cz] = self.container_mm;
        let x0 = (self.length_mm - cx) / 2.0;
        Aabb::new(
            Vec3::new(x0, -cy / 2.0, self.slab_mm),
            Vec3::new(x0 + cx, cy / 2.0, self.slab_mm + cz),
        )
    }

    fn depth_mm(&self) -> f64 {
        self.slab_mm + self.container_mm[2] + self.cover_mm
    }

    fn base(&self, pal: &mut Palette<'_>) -> Result<(Aabb, Vec<Layer>, Vec<Inclusion>)> {
        let depth = self.depth_mm();
        let bounds = Aabb::new(
            Vec3::new(-self.margin_mm, -self.width_mm / 2.0, 0.0),
            Vec3::new(self.length_mm + self.margin_mm, self.width_mm / 2.0, depth),
        );
        let tissue = pal.id(&self.tissue_medium)?;
        let mut layers = vec![
            Layer {
                thickness_mm: self.slab_mm,
                medium: tissue,
            },
            Layer {
                thickness_mm: self.container_mm[2],
                medium: tissue,
            },
        ];
        if self.cover_mm > 0.0 {
            layers.push(Layer {
                thickness_mm: self.cover_mm,
                medium: tissue,
            });
        }
        let air = pal.id("air")?;
        let margins = vec![
            Inclusion {
                label: "margin_left".into(),
                shape: Shape::Box {
                    aabb: Aabb::new(bounds.min, Vec3::new(0.0, bounds.max.y, depth)),
                },
                fill: Fill::Full { medium: air },
                volume_ml: None,
            },
            Inclusion {
                label: "margin_right".into(),
                shape: Shape::Box {
                    aabb: Aabb::new(Vec3::new(self.length_mm, bounds.min.y, 0.0), bounds.max),
                },
                fill: Fill::Full { medium: air },
                volume_ml: None,
            },
        ];
        Ok((bounds, layers, margins))
    }

    /// True when phantom x-coordinate `x_mm` lies over the phantom body.
    pub fn covers(&self, x_mm: f64) -> bool {
        (0.0..=self.length_mm).contains(&x_mm)
    }
}

/// Water-container phantom holding `volume_ml` of water.
pub fn build_phantom_scene(
    volume_ml: f64,
    cfg: &PhantomConfig,
    lib: &MediaLibrary,
) -> Result<TissueScene> {
    let capacity = cfg.capacity_ml();
    if !(0.0..=capacity).contains(&volume_ml) {
        return Err(Error::Range {
            what: "volume_ml",
            value: volume_ml,
            min: 0.0,
            max: capacity,
        });
    }
    let mut pal = Palette::new(lib, cfg.wavelength_nm);
    let (bounds, layers, margins) = cfg.base(&mut pal)?;
    let container = cfg.container_box();
    let liquid = pal.id(&cfg.liquid_medium)?;
    let air = pal.id("air")?;
    let fill = if volume_ml == 0.0 {
        Fill::Full { medium: air }
    } else {
        let h = cfg.fill_height_cm(volume_ml) * 10.0;
        match cfg.liquid_side {
            LiquidSide::Probe => Fill::Level {
                near: liquid,
                far: air,
                level_z: container.min.z + h,
            },
            LiquidSide::Far => Fill::Level {
                near: air,
                far: liquid,
                level_z: container.max.z - h,
            },
        }
    };
    let mut inclusions = vec![Inclusion {
        label: "container".into(),
        shape: Shape::Box { aabb: container },
        fill,
        volume_ml: Some(volume_ml),
    }];
    inclusions.extend(margins);
    TissueScene::new(
        "phantom",
        cfg.wavelength_nm,
        bounds,
        layers,
        inclusions,
        pal.media,
        cfg.voxel_resolution_mm,
        lib,
    )
}

/// The ex-vivo variant: a water-filled ellipsoidal bladder bedded in
/// intestine, in place of the container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PorcineConfig {
    pub phantom: PhantomConfig,
    pub volume_ml: f64,
    pub aspect: [f64; 3],
    pub intestine_medium: String,
}

impl Default for PorcineConfig {
    fn default() -> Self {
        PorcineConfig {
            phantom: PhantomConfig::default(),
            volume_ml: 200.0,
            aspect: default_aspect(),
            intestine_medium: "intestine".into(),
        }
    }
}

pub fn build_porcine_scene(cfg: &PorcineConfig, lib: &MediaLibrary) -> Result<TissueScene> {
    let p = &cfg.phantom;
    let mut pal = Palette::new(lib, p.wavelength_nm);
    let (bounds, layers, margins) = p.base(&mut pal)?;
    let bed = Aabb::new(
        Vec3::new(p.length_mm * 0.2, bounds.min.y, p.slab_mm),
        Vec3::new(p.length_mm * 0.8, bounds.max.y, bounds.max.z),
    );
    let spec = BladderSpec {
        volume_ml: cfg.volume_ml,
        center_depth_mm: 0.0,
        aspect: cfg.aspect,
        medium: p.liquid_medium.clone(),
    };
    let semi = spec.semi_axes();
    let center = Vec3::new(p.length_mm / 2.0, 0.0, p.slab_mm + semi.z);
    let bladder = Inclusion {
        label: "bladder".into(),
        shape: Shape::Ellipsoid {
            center,
            semi_axes: semi,
        },
        fill: Fill::Full {
            medium: pal.id(&p.liquid_medium)?,
        },
        volume_ml: Some(cfg.volume_ml),
    };
    let intestine = Inclusion {
        label: "intestine".into(),
        shape: Shape::Box { aabb: bed },
        fill: Fill::Full {
            medium: pal.id(&cfg.intestine_medium)?,
        },
        volume_ml: None,
    };
    let mut inclusions = vec![bladder, intestine];
    inclusions.extend(margins);
    TissueScene::new(
        "porcine",
        p.wavelength_nm,
        bounds,
        layers,
        inclusions,
        pal.media,
        p.voxel_resolution_mm,
        lib,
    )
}

/// Homogeneous absorber block used for the lateral-leakage measurement.
pub fn build_absorber_scene(wavelength_nm: f64, lib: &MediaLibrary) -> Result<TissueScene> {
    let mut pal = Palette::new(lib, wavelength_nm);
    let foam = pal.id("black_foam")?;
    TissueScene::new(
        "absorber",
        wavelength_nm,
        Aabb::new(Vec3::new(-75.0, -75.0, 0.0), Vec3::new(75.0, 75.0, 50.0)),
        vec![Layer {
            thickness_mm: 50.0,
            medium: foam,
        }],
        vec![],
        pal.media,
        1.0,
        lib,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abdomen_layer_boundaries() {
        let s = build_abdomen_scene(&AbdomenConfig::default(), &MediaLibrary::builtin()).unwrap();
        assert_eq!(s.layer_boundaries(), &[10.0, 12.0, 22.0, 150.0]);
        assert!(s.bladder().is_none());
        assert_eq!(s.tissue_surface_z(), 10.0);
        assert_eq!(s.medium_at(Vec3::new(0.0, 0.0, 5.0)).unwrap().label, "air");
        assert_eq!(
            s.medium_at(Vec3::new(0.0, 0.0, 11.0)).unwrap().label,
            "dermis"
        );
        assert_eq!(s.medium_at(Vec3::new(0.0, 0.0, 15.0)).unwrap().label, "fat");
        assert_eq!(
            s.medium_at(Vec3::new(0.0, 0.0, 100.0)).unwrap().label,
            "muscle"
        );
    }

    #[test]
    fn abdomen_rejects_bad_layer_sum() {
        let cfg = AbdomenConfig {
            layers: vec![
                (10.0, "air".into()),
                (2.0, "dermis".into()),
                (10.0, "fat".into()),
                (100.0, "muscle".into()),
            ],
            ..AbdomenConfig::default()
        };
        let err = build_abdomen_scene(&cfg, &MediaLibrary::builtin()).unwrap_err();
        assert!(matches!(err, Error::Construction(_)), "{err}");
        assert!(err.to_string().contains("122"));
    }

    #[test]
    fn abdomen_with_bladder_inclusion() {
        let cfg = AbdomenConfig {
            bladder: Some(BladderSpec {
                volume_ml: 300.0,
                center_depth_mm: 70.0,
                aspect: default_aspect(),
                medium: "water".into(),
            }),
            ..AbdomenConfig::default()
        };
        let s = build_abdomen_scene(&cfg, &MediaLibrary::builtin()).unwrap();
        let b = s.bladder().unwrap();
        assert!((b.shape.volume_mm3() - 300_000.0).abs() < 1e-6);
        assert_eq!(
            s.medium_at(Vec3::new(0.0, 0.0, 70.0)).unwrap().label,
            "water"
        );
    }

    #[test]
    fn phantom_fill_heights() {
        let cfg = PhantomConfig::default();
        assert!((cfg.fill_height_cm(300.0) - 4.6875).abs() < 1e-12);
        assert!((cfg.fill_height_cm(500.0) - 7.8125).abs() < 1e-12);
        assert_eq!(cfg.capacity_ml(), 512.0);
    }

    #[test]
    fn phantom_media_by_region() {
        let lib = MediaLibrary::builtin();
        let cfg = PhantomConfig::default();
        let s = build_phantom_scene(300.0, &cfg, &lib).unwrap();
        assert_eq!(
            s.medium_at(Vec3::new(110.0, 0.0, 30.0)).unwrap().label,
            "water"
        );
        assert_eq!(
            s.medium_at(Vec3::new(110.0, 0.0, 66.0)).unwrap().label,
            "water"
        );
        assert_eq!(
            s.medium_at(Vec3::new(110.0, 0.0, 67.5)).unwrap().label,
            "air"
        );
        assert_eq!(
            s.medium_at(Vec3::new(110.0, 0.0, 10.0)).unwrap().label,
            "phantom_tissue"
        );
        assert_eq!(
            s.medium_at(Vec3::new(30.0, 0.0, 50.0)).unwrap().label,
            "phantom_tissue"
        );
        assert_eq!(s.medium_at(Vec3::new(-5.0, 0.0, 5.0)).unwrap().label, "air");

        let empty = build_phantom_scene(0.0, &cfg, &lib).unwrap();
        assert_eq!(
            empty.medium_at(Vec3::new(110.0, 0.0, 21.0)).unwrap().label,
            "air"
        );
    }

    #[test]
    fn phantom_rejects_overfill() {
        let err = build_phantom_scene(600.0, &PhantomConfig::default(), &MediaLibrary::builtin())
            .unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
        assert!(
            build_phantom_scene(-1.0, &PhantomConfig::default(), &MediaLibrary::builtin()).is_err()
        );
    }

    #[test]
    fn porcine_bladder_volume() {
        let s = build_porcine_scene(&PorcineConfig::default(), &MediaLibrary::builtin()).unwrap();
        let b = s.bladder().unwrap();
        assert!((b.shape.volume_mm3() - 200_000.0).abs() < 1e-6);
        let c = match b.shape {
            Shape::Ellipsoid { center, .. } => center,
            _ => unreachable!(),
        };
        assert_eq!(s.medium_at(c).unwrap().label, "water");
        assert_eq!(
            s.medium_at(Vec3::new(50.0, 0.0, 90.0)).unwrap().label,
            "intestine"
        );
    }
}
