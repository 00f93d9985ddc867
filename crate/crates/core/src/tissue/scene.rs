//! Layered scene geometry with optional inclusions.
//!
//! Coordinates are millimetres. `z` is depth, increasing into the tissue from
//! the top surface at `bounds.min.z`; optodes sit on that surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::provenance::sha256_hex;

use super::media::{MediaLibrary, OpticalMedium};

/// Index into [`TissueScene::media`].
pub type MediumId = u8;

/// Upper bound on distinct media per scene; photon path tallies are sized by it.
pub const MAX_MEDIA: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness_mm: f64,
    pub medium: MediumId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { aabb: Aabb },
    Ellipsoid { center: Vec3, semi_axes: Vec3 },
}

impl Shape {
    pub fn contains(&self, p: Vec3) -> bool {
        match *self {
            Shape::Box { aabb } => aabb.contains(p),
            Shape::Ellipsoid { center, semi_axes } => {
                let q = p - center;
                let (a, b, c) = (q.x / semi_axes.x, q.y / semi_axes.y, q.z / semi_axes.z);
                a * a + b * b + c * c <= 1.0
            }
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match *self {
            Shape::Box { aabb } => aabb,
            Shape::Ellipsoid { center, semi_axes } => {
                Aabb::new(center - semi_axes, center + semi_axes)
            }
        }
    }

    pub fn volume_mm3(&self) -> f64 {
        match *self {
            Shape::Box { aabb } => {
                let e = aabb.extent();
                e.x * e.y * e.z
            }
            Shape::Ellipsoid { semi_axes: s, .. } => {
                4.0 / 3.0 * std::f64::consts::PI * s.x * s.y * s.z
            }
        }
    }

    fn translated(&self, d: Vec3) -> Shape {
        match *self {
            Shape::Box { aabb } => Shape::Box {
                aabb: aabb.translated(d),
            },
            Shape::Ellipsoid { center, semi_axes } => Shape::Ellipsoid {
                center: center + d,
                semi_axes,
            },
        }
    }

    /// Nearest surface crossing ahead of `p` along `dir`, with the surface normal.
    #[inline]
    fn next_surface(&self, p: Vec3, dir: Vec3, eps: f64) -> Option<(f64, Vec3)> {
        match *self {
            Shape::Box { aabb } => aabb.next_face(p, dir, eps),
            Shape::Ellipsoid {
                center,
                semi_axes: s,
            } => {
                let q = p - center;
                let q = Vec3::new(q.x / s.x, q.y / s.y, q.z / s.z);
                let d = Vec3::new(dir.x / s.x, dir.y / s.y, dir.z / s.z);
                let a = d.dot(d);
                let b = 2.0 * q.dot(d);
                let c = q.dot(q) - 1.0;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t1 = (-b - sq) / (2.0 * a);
                let t2 = (-b + sq) / (2.0 * a);
                let t = if t1 > eps {
                    t1
                } else if t2 > eps {
                    t2
                } else {
                    return None;
                };
                let h = p + dir * t - center;
                let n = Vec3::new(h.x / (s.x * s.x), h.y / (s.y * s.y), h.z / (s.z * s.z));
                Some((t, n.normalized()))
            }
        }
    }
}

/// How an inclusion's interior is filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fill {
    Full {
        medium: MediumId,
    },
    /// Split by the horizontal plane `level_z`: `near` on the probe side
    /// (`z <= level_z`), `far` beyond it.
    Level {
        near: MediumId,
        far: MediumId,
        level_z: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub label: String,
    pub shape: Shape,
    pub fill: Fill,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_ml: Option<f64>,
}

impl Inclusion {
    #[inline]
    fn medium_at(&self, p: Vec3) -> MediumId {
        match self.fill {
            Fill::Full { medium } => medium,
            Fill::Level { near, far, level_z } => {
                if p.z <= level_z {
                    near
                } else {
                    far
                }
            }
        }
    }

    #[inline]
    fn safety(&self, p: Vec3) -> f64 {
        match self.shape {
            Shape::Box { aabb } => {
                let gap = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi);
                let g = gap(p.x, aabb.min.x, aabb.max.x)
                    .max(gap(p.y, aabb.min.y, aabb.max.y))
                    .max(gap(p.z, aabb.min.z, aabb.max.z));
                let mut d = g.abs();
                if let Fill::Level { level_z, .. } = self.fill {
                    if g <= 0.0 {
                        d = d.min((p.z - level_z).abs());
                    }
                }
                d
            }
            Shape::Ellipsoid {
                center,
                semi_axes: s,
            } => {
                let q = p - center;
                let r = ((q.x / s.x).powi(2) + (q.y / s.y).powi(2) + (q.z / s.z).powi(2)).sqrt();
                (r - 1.0).abs() * s.x.min(s.y).min(s.z)
            }
        }
    }

    fn translated(&self, d: Vec3) -> Inclusion {
        let mut out = self.clone();
        out.shape = self.shape.translated(d);
        if let Fill::Level { level_z, .. } = &mut out.fill {
            *level_z += d.z;
        }
        out
    }
}

/// Which surface a ray reaches next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// The top face of the scene, where the probe sits.
    Top,
    /// Any other face of the scene bounds.
    OtherFace,
    /// A layer plane, inclusion wall or fill level inside the scene.
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub distance: f64,
    pub normal: Vec3,
    pub surface: Surface,
}

/// Lateral displacement of the probe relative to the scene origin, in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneOffset(pub f64);

impl SceneOffset {
    pub fn mm(self) -> f64 {
        self.0 * 10.0
    }
}

/// Immutable description of the tissue under the probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueScene {
    pub name: String,
    pub wavelength_nm: f64,
    pub bounds: Aabb,
    pub layers: Vec<Layer>,
    /// Inclusions in precedence order; the first containing a point wins.
    pub inclusions: Vec<Inclusion>,
    pub media: Vec<OpticalMedium>,
    pub voxel_resolution_mm: f64,
    /// Refractive index outside the scene.
    pub outside_n: f64,
    pub defaults_version: String,
    pub mu_s_scale: f64,
    #[serde(skip)]
    layer_bottoms: Vec<f64>,
}

const EPS: f64 = 1e-9;

impl TissueScene {
    /// Validates and assembles a scene. Layer thicknesses must sum to the
    /// bounds depth and every inclusion must fit inside the bounds.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        wavelength_nm: f64,
        bounds: Aabb,
        layers: Vec<Layer>,
        inclusions: Vec<Inclusion>,
        media: Vec<OpticalMedium>,
        voxel_resolution_mm: f64,
        lib: &MediaLibrary,
    ) -> Result<Self> {
        if media.is_empty() || media.len() > MAX_MEDIA {
            return Err(Error::Construction(format!(
                "scene must use between 1 and {MAX_MEDIA} media, got {}",
                media.len()
            )));
        }
        let ext = bounds.extent();
        if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
            return Err(Error::Construction(
                "bounds must have positive extent".into(),
            ));
        }
        if layers.is_empty() {
            return Err(Error::Construction("scene needs at least one layer".into()));
        }
        let total: f64 = layers.iter().map(|l| l.thickness_mm).sum();
        if (total - ext.z).abs() > 1e-9 * ext.z.max(1.0) {
            return Err(Error::Construction(format!(
                "layer thicknesses sum to {total} mm but the scene depth is {} mm",
                ext.z
            )));
        }
        if layers.iter().any(|l| !(l.thickness_mm > 0.0)) {
            return Err(Error::Construction(
                "layer thickness must be positive".into(),
            ));
        }
        let n_media = media.len() as MediumId;
        let check_id = |id: MediumId| {
            if id < n_media {
                Ok(())
            } else {
                Err(Error::Construction(format!(
                    "medium index {id} out of range"
                )))
            }
        };
        for l in &layers {
            check_id(l.medium)?;
        }
        for inc in &inclusions {
            match inc.fill {
                Fill::Full { medium } => check_id(medium)?,
                Fill::Level { near, far, .. } => {
                    check_id(near)?;
                    check_id(far)?;
                }
            }
            let bb = inc.shape.bounding_box();
            if !bounds.contains_box(&bb) {
                return Err(Error::Construction(format!(
                    "inclusion '{}' extends outside the scene bounds",
                    inc.label
                )));
            }
        }
        if !(voxel_resolution_mm > 0.0) {
            return Err(Error::Construction(
                "voxel resolution must be positive".into(),
            ));
        }
        let mut scene = TissueScene {
            name: name.into(),
            wavelength_nm,
            bounds,
            layers,
            inclusions,
            media,
            voxel_resolution_mm,
            outside_n: 1.0,
            defaults_version: lib.version().to_owned(),
            mu_s_scale: lib.mu_s_scale(),
            layer_bottoms: Vec::new(),
        };
        scene.rebuild_index();
        Ok(scene)
    }

    fn rebuild_index(&mut self) {
        let mut z = self.bounds.min.z;
        self.layer_bottoms = self
            .layers
            .iter()
            .map(|l| {
                z += l.thickness_mm;
                z
            })
            .collect();
        if let Some(last) = self.layer_bottoms.last_mut() {
            *last = self.bounds.max.z;
        }
    }

    /// Depths (absolute z, mm) of the bottom of each layer.
    pub fn layer_boundaries(&self) -> &[f64] {
        &self.layer_bottoms
    }

    pub fn top_z(&self) -> f64 {
        self.bounds.min.z
    }

    /// Depth of the first layer that interacts with light; max-depth tallies
    /// are measured from here.
    pub fn tissue_surface_z(&self) -> f64 {
        let mut z = self.bounds.min.z;
        for l in &self.layers {
            if !self.media[l.medium as usize].is_air() {
                return z;
            }
            z += l.thickness_mm;
        }
        self.bounds.min.z
    }

    pub fn medium(&self, id: MediumId) -> &OpticalMedium {
        &self.media[id as usize]
    }

    pub fn medium_id(&self, label: &str) -> Option<MediumId> {
        self.media
            .iter()
            .position(|m| m.label == label)
            .map(|i| i as MediumId)
    }

    /// The bladder or container inclusion, if any.
    pub fn bladder(&self) -> Option<&Inclusion> {
        self.inclusions
            .iter()
            .find(|i| i.label == "bladder" || i.label == "container")
    }

    /// Medium index at `p`, or `None` outside the bounds. Inclusions take
    /// precedence over layers.
    #[inline]
    pub fn medium_index_at(&self, p: Vec3) -> Option<MediumId> {
        if !self.bounds.contains(p) {
            return None;
        }
        for inc in &self.inclusions {
            if inc.shape.contains(p) {
                return Some(inc.medium_at(p));
            }
        }
        let i = self.layer_bottoms.partition_point(|&b| b <= p.z);
        let i = i.min(self.layers.len() - 1);
        Some(self.layers[i].medium)
    }

    pub fn medium_at(&self, p: Vec3) -> Result<&OpticalMedium> {
        self.medium_index_at(p)
            .map(|id| self.medium(id))
            .ok_or(Error::OutOfBounds {
                x: p.x,
                y: p.y,
                z: p.z,
            })
    }

    /// Lower bound on the distance from `p` (inside the bounds) to any
    /// surface in any direction.
    #[inline]
    pub fn safety(&self, p: Vec3) -> f64 {
        let b = &self.bounds;
        let mut d = (p.x - b.min.x)
            .min(b.max.x - p.x)
            .min(p.y - b.min.y)
            .min(b.max.y - p.y)
            .min(p.z - b.min.z)
            .min(b.max.z - p.z);
        for &z in &self.layer_bottoms[..self.layer_bottoms.len() - 1] {
            d = d.min((p.z - z).abs());
        }
        for inc in &self.inclusions {
            d = d.min(inc.safety(p));
        }
        d.max(0.0)
    }

    /// Nearest surface of any kind ahead of `p` (which must be inside).
    #[inline]
    pub fn next_crossing(&self, p: Vec3, dir: Vec3) -> Crossing {
        let (mut best_t, mut best_n) = self.bounds.exit_from_inside(p, dir);
        let mut surface = if best_n.z < 0.0 {
            Surface::Top
        } else {
            Surface::OtherFace
        };
        let bottoms = &self.layer_bottoms[..self.layer_bottoms.len() - 1];
        if dir.z > 0.0 {
            let i = bottoms.partition_point(|&b| b <= p.z + EPS);
            if let Some(&b) = bottoms.get(i) {
                let t = (b - p.z) / dir.z;
                if t < best_t {
                    best_t = t;
                    best_n = Vec3::Z;
                    surface = Surface::Internal;
                }
            }
        } else if dir.z < 0.0 {
            let i = bottoms.partition_point(|&b| b < p.z - EPS);
            if i > 0 {
                let t = (bottoms[i - 1] - p.z) / dir.z;
                if t < best_t {
                    best_t = t;
                    best_n = Vec3::Z;
                    surface = Surface::Internal;
                }
            }
        }
        for inc in &self.inclusions {
            if let Some((t, n)) = inc.shape.next_surface(p, dir, EPS) {
                if t < best_t {
                    best_t = t;
                    best_n = n;
                    surface = Surface::Internal;
                }
            }
            if let (Fill::Level { level_z, .. }, Shape::Box { aabb }) = (inc.fill, inc.shape) {
                if dir.z != 0.0 && level_z > aabb.min.z && level_z < aabb.max.z {
                    let t = (level_z - p.z) / dir.z;
                    if t > EPS && t < best_t {
                        let h = p + dir * t;
                        if h.x >= aabb.min.x
                            && h.x <= aabb.max.x
                            && h.y >= aabb.min.y
                            && h.y <= aabb.max.y
                        {
                            best_t = t;
                            best_n = Vec3::Z;
                            surface = Surface::Internal;
                        }
                    }
                }
            }
        }
        Crossing {
            distance: best_t,
            normal: best_n,
            surface,
        }
    }

    /// The same scene with the probe displaced by `offset` along x. The
    /// geometry moves by `-offset` so probe coordinates stay fixed.
    pub fn translated(&self, offset: SceneOffset) -> TissueScene {
        let d = Vec3::new(-offset.mm(), 0.0, 0.0);
        let mut out = self.clone();
        out.bounds = self.bounds.translated(d);
        out.inclusions = self.inclusions.iter().map(|i| i.translated(d)).collect();
        out.rebuild_index();
        out
    }

    /// True when `(x, y)` lies on the top surface.
    pub fn on_top_surface(&self, x: f64, y: f64) -> bool {
        x >= self.bounds.min.x
            && x <= self.bounds.max.x
            && y >= self.bounds.min.y
            && y <= self.bounds.max.y
    }

    /// Content hash of the scene, recorded in result provenance.
    pub fn content_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("scene serializes"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Reads a scene written by [`TissueScene::to_json`]. Use this rather
    /// than deserializing directly; it restores the derived layer index.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut scene: TissueScene =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("scene: {e}")))?;
        scene.rebuild_index();
        Ok(scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> MediaLibrary {
        MediaLibrary::builtin()
    }

    fn two_layer() -> TissueScene {
        let lib = lib();
        TissueScene::new(
            "t",
            970.0,
            Aabb::new(Vec3::new(-10.0, -10.0, 0.0), Vec3::new(10.0, 10.0, 20.0)),
            vec![
                Layer {
                    thickness_mm: 5.0,
                    medium: 0,
                },
                Layer {
                    thickness_mm: 15.0,
                    medium: 1,
                },
            ],
            vec![],
            vec![
                lib.resolve("air", 970.0).unwrap(),
                lib.resolve("muscle", 970.0).unwrap(),
            ],
            1.0,
            &lib,
        )
        .unwrap()
    }

    #[test]
    fn layer_lookup_and_bounds() {
        let s = two_layer();
        assert_eq!(s.medium_at(Vec3::new(0.0, 0.0, 2.0)).unwrap().label, "air");
        assert_eq!(
            s.medium_at(Vec3::new(0.0, 0.0, 5.0)).unwrap().label,
            "muscle"
        );
        assert_eq!(
            s.medium_at(Vec3::new(0.0, 0.0, 20.0)).unwrap().label,
            "muscle"
        );
        assert!(matches!(
            s.medium_at(Vec3::new(0.0, 0.0, 20.5)),
            Err(Error::OutOfBounds { .. })
        ));
        assert_eq!(s.tissue_surface_z(), 5.0);
    }

    #[test]
    fn crossing_hits_layer_plane_then_bottom() {
        let s = two_layer();
        let c = s.next_crossing(Vec3::new(0.0, 0.0, 1.0), Vec3::Z);
        assert_eq!(c.surface, Surface::Internal);
        assert!((c.distance - 4.0).abs() < 1e-12);
        let c = s.next_crossing(Vec3::new(0.0, 0.0, 6.0), Vec3::Z);
        assert_eq!(c.surface, Surface::OtherFace);
        assert!((c.distance - 14.0).abs() < 1e-12);
        let c = s.next_crossing(Vec3::new(0.0, 0.0, 6.0), -Vec3::Z);
        assert_eq!(c.surface, Surface::Internal);
        assert!((c.distance - 1.0).abs() < 1e-12);
        let c = s.next_crossing(Vec3::new(0.0, 0.0, 4.0), -Vec3::Z);
        assert_eq!(c.surface, Surface::Top);
        assert!((c.distance - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_thickness_is_rejected() {
        let lib = lib();
        let err = TissueScene::new(
            "t",
            970.0,
            Aabb::new(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 20.0)),
            vec![Layer {
                thickness_mm: 5.0,
                medium: 0,
            }],
            vec![],
            vec![OpticalMedium::air()],
            1.0,
            &lib,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn ellipsoid_crossing_and_normal() {
        let shape = Shape::Ellipsoid {
            center: Vec3::new(0.0, 0.0, 10.0),
            semi_axes: Vec3::new(4.0, 2.0, 2.0),
        };
        let (t, n) = shape
            .next_surface(Vec3::new(0.0, 0.0, 0.0), Vec3::Z, 1e-9)
            .unwrap();
        assert!((t - 8.0).abs() < 1e-12);
        assert!((n.z + 1.0).abs() < 1e-12);
        let (t, _) = shape
            .next_surface(Vec3::new(0.0, 0.0, 10.0), Vec3::new(1.0, 0.0, 0.0), 1e-9)
            .unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert!((shape.volume_mm3() - 4.0 / 3.0 * std::f64::consts::PI * 16.0).abs() < 1e-9);
    }
}
