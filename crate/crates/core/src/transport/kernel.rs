//! Single-photon random walk: launch, stepping, boundary handling and
//! detection.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::tissue::{MediumId, Surface, TissueScene, MAX_MEDIA};

use super::probe::{Detector, Emitter, ProbeLayout};

/// Optical coefficients are in cm⁻¹, lengths in mm.
const PER_CM_TO_PER_MM: f64 = 0.1;

/// Offset used to probe which medium lies across a surface.
const SIDE_PROBE_MM: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    pub position: Vec3,
    pub direction: Vec3,
    pub weight: f64,
    /// Path length travelled in each scene medium, mm.
    pub partial_path: [f64; MAX_MEDIA],
    /// Deepest point reached below the tissue surface, mm.
    pub max_depth: f64,
    pub medium: MediumId,
    /// Remaining optical depth to the next scattering event.
    pub tau: f64,
    /// Weight removed by absorption and roulette so far.
    pub deposited: f64,
    pub interactions: u32,
    /// Lower bound on the distance to any surface; steps shorter than this
    /// skip the surface search.
    pub safety: f64,
}

impl PhotonState {
    pub fn total_path(&self) -> f64 {
        self.partial_path.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Weight fully deposited (roulette loss or interaction cap).
    Absorbed,
    /// Left through a non-top face, or reflected off the surface at entry.
    Escaped,
    /// Crossed the top surface outward; `direction` is after refraction.
    ExitTop { direction: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Continue,
    Terminated(Termination),
}

/// Per-run constants of the random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub roulette_threshold: f64,
    pub roulette_survival: f64,
    pub max_interactions: u32,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            roulette_threshold: 1e-4,
            roulette_survival: 0.1,
            max_interactions: 1_000_000,
        }
    }
}

/// Optical depth to the next scattering event.
#[inline]
fn free_path<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Direction uniform over the solid-angle cone of `half_angle_deg` about +z.
pub fn sample_cone<R: Rng + ?Sized>(half_angle_deg: f64, rng: &mut R) -> Vec3 {
    let cos_max = half_angle_deg.to_radians().cos();
    let cos_t = 1.0 - rng.gen::<f64>() * (1.0 - cos_max);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let (cp, sp) = azimuth(rng);
    Vec3::new(sin_t * cp, sin_t * sp, cos_t)
}

/// Launches a unit-weight photon at `emitter`, heading into the scene.
pub fn launch<R: Rng + ?Sized>(emitter: &Emitter, scene: &TissueScene, rng: &mut R) -> PhotonState {
    let position = Vec3::new(
        emitter.position_mm[0],
        emitter.position_mm[1],
        scene.top_z(),
    );
    let direction = sample_cone(emitter.cone_half_angle_deg, rng);
    let medium = scene
        .medium_index_at(position + Vec3::Z * SIDE_PROBE_MM)
        .unwrap_or(0);
    PhotonState {
        position,
        direction,
        weight: 1.0,
        partial_path: [0.0; MAX_MEDIA],
        max_depth: 0.0,
        medium,
        tau: free_path(rng),
        deposited: 0.0,
        interactions: 0,
        safety: 0.0,
    }
}

/// Cosine of the Henyey-Greenstein deflection angle.
#[inline]
pub fn hg_cos_theta<R: Rng + ?Sized>(g: f64, rng: &mut R) -> f64 {
    let xi = rng.gen::<f64>();
    if g.abs() < 1e-6 {
        return 2.0 * xi - 1.0;
    }
    let f = (1.0 - g * g) / (1.0 - g + 2.0 * g * xi);
    ((1.0 + g * g - f * f) / (2.0 * g)).clamp(-1.0, 1.0)
}

/// `(cos φ, sin φ)` for a uniform azimuth, without trigonometric calls.
#[inline]
pub fn azimuth<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    const SCALE: f64 = 2.0 / 4_294_967_296.0;
    loop {
        // Two 32-bit coordinates from one draw; ample for an angle.
        let bits = rng.next_u64();
        let u = (bits >> 32) as f64 * SCALE - 1.0;
        let v = (bits & 0xffff_ffff) as f64 * SCALE - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s <= 1.0 {
            return ((u * u - v * v) / s, 2.0 * u * v / s);
        }
    }
}

/// Rotates `dir` by polar angle `acos(cos_t)` and the azimuth given as
/// `(cos φ, sin φ)`.
#[inline]
pub fn deflect(dir: Vec3, cos_t: f64, (cp, sp): (f64, f64)) -> Vec3 {
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let out = if dir.z.abs() > 0.99999 {
        Vec3::new(sin_t * cp, sin_t * sp, cos_t * dir.z.signum())
    } else {
        let tmp = (1.0 - dir.z * dir.z).sqrt();
        Vec3::new(
            sin_t * (dir.x * dir.z * cp - dir.y * sp) / tmp + dir.x * cos_t,
            sin_t * (dir.y * dir.z * cp + dir.x * sp) / tmp + dir.y * cos_t,
            -sin_t * cp * tmp + dir.z * cos_t,
        )
    };
    // First-order renormalization keeps rounding drift from accumulating
    // without a square root.
    out * (1.5 - 0.5 * out.dot(out))
}

/// Unpolarized Fresnel reflectance for incidence cosine `cos_i` going from
/// index `n1` into `n2`. Returns 1 under total internal reflection.
#[inline]
pub fn fresnel_reflectance(n1: f64, n2: f64, cos_i: f64) -> f64 {
    let cos_i = cos_i.abs().min(1.0);
    if n1 == n2 {
        return 0.0;
    }
    let sin_i = (1.0 - cos_i * cos_i).max(0.0).sqrt();
    let sin_t = n1 / n2 * sin_i;
    if sin_t >= 1.0 {
        return 1.0;
    }
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    let rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t);
    let rp = (n1 * cos_t - n2 * cos_i) / (n1 * cos_t + n2 * cos_i);
    0.5 * (rs * rs + rp * rp)
}

/// Refracts `dir` through a surface whose normal `n` points along the
/// direction of travel (`dir · n > 0`). Assumes no total internal reflection.
#[inline]
pub fn refract(dir: Vec3, n: Vec3, n1: f64, n2: f64) -> Vec3 {
    let eta = n1 / n2;
    let cos_i = dir.dot(n);
    let sin_t2 = eta * eta * (1.0 - cos_i * cos_i);
    let cos_t = (1.0 - sin_t2).max(0.0).sqrt();
    (dir * eta + n * (cos_t - eta * cos_i)).normalized()
}

#[inline]
fn reflect(dir: Vec3, n: Vec3) -> Vec3 {
    dir - n * (2.0 * dir.dot(n))
}

/// Reflects or transmits at a surface with normal `n` along travel.
/// Returns the new direction and whether the photon crossed.
#[inline]
fn interface<R: Rng + ?Sized>(dir: Vec3, n: Vec3, n1: f64, n2: f64, rng: &mut R) -> (Vec3, bool) {
    if n1 == n2 {
        return (dir, true);
    }
    let r = fresnel_reflectance(n1, n2, dir.dot(n));
    if r >= 1.0 || rng.gen::<f64>() < r {
        (reflect(dir, n), false)
    } else {
        (refract(dir, n, n1, n2), true)
    }
}

fn fault(state: &PhotonState, what: &str) -> Error {
    Error::SimulationFault(format!(
        "{what}: position ({}, {}, {}), direction ({}, {}, {}), weight {}, medium {}, interactions {}",
        state.position.x,
        state.position.y,
        state.position.z,
        state.direction.x,
        state.direction.y,
        state.direction.z,
        state.weight,
        state.medium,
        state.interactions
    ))
}

/// Handles entry through the top surface right after launch. Photons
/// reflected here never enter the tissue.
pub fn enter<R: Rng + ?Sized>(state: &mut PhotonState, scene: &TissueScene, rng: &mut R) -> Step {
    let n2 = scene.medium(state.medium).n;
    let (dir, crossed) = interface(state.direction, Vec3::Z, scene.outside_n, n2, rng);
    if !crossed {
        return Step::Terminated(Termination::Escaped);
    }
    state.direction = dir;
    Step::Continue
}

/// One transport step: either to the next scattering site (then scatter and
/// play roulette) or to the next surface (then reflect or cross).
pub fn propagate<R: Rng + ?Sized>(
    state: &mut PhotonState,
    scene: &TissueScene,
    params: &WalkParams,
    tissue_surface_z: f64,
    rng: &mut R,
) -> Result<Step> {
    if !(state.position.is_finite() && state.direction.is_finite() && state.weight.is_finite()) {
        return Err(fault(state, "non-finite photon state"));
    }
    let m = scene.medium(state.medium);
    let mu_s = m.mu_s * PER_CM_TO_PER_MM;
    let mu_a = m.mu_a * PER_CM_TO_PER_MM;
    let to_scatter = if mu_s > 0.0 {
        state.tau / mu_s
    } else {
        f64::INFINITY
    };
    if to_scatter >= state.safety {
        state.safety = scene.safety(state.position);
    }
    let crossing = if to_scatter < state.safety {
        None
    } else {
        Some(scene.next_crossing(state.position, state.direction))
    };
    let scatters = match crossing {
        Some(c) => to_scatter < c.distance,
        None => true,
    };
    let len = if scatters {
        to_scatter
    } else {
        crossing.map_or(0.0, |c| c.distance)
    };
    state.safety -= len;

    state.position += state.direction * len;
    state.partial_path[state.medium as usize] += len;
    if mu_a > 0.0 {
        let w = state.weight * (-mu_a * len).exp();
        state.deposited += state.weight - w;
        state.weight = w;
    }
    let depth = state.position.z - tissue_surface_z;
    if depth > state.max_depth {
        state.max_depth = depth;
    }
    state.interactions += 1;
    if state.interactions > params.max_interactions {
        state.deposited += state.weight;
        state.weight = 0.0;
        return Ok(Step::Terminated(Termination::Absorbed));
    }

    if scatters {
        state.tau = free_path(rng);
        let cos_t = hg_cos_theta(m.g, rng);
        state.direction = deflect(state.direction, cos_t, azimuth(rng));
        if state.weight < params.roulette_threshold {
            if rng.gen::<f64>() < params.roulette_survival {
                let boosted = state.weight / params.roulette_survival;
                state.deposited -= boosted - state.weight;
                state.weight = boosted;
            } else {
                state.deposited += state.weight;
                state.weight = 0.0;
                return Ok(Step::Terminated(Termination::Absorbed));
            }
        }
        return Ok(Step::Continue);
    }

    if mu_s > 0.0 {
        state.tau = (state.tau - mu_s * len).max(0.0);
    }
    state.safety = 0.0;
    let crossing = crossing.expect("surface reached");
    match crossing.surface {
        Surface::OtherFace => Ok(Step::Terminated(Termination::Escaped)),
        Surface::Top => {
            let out = Vec3::new(0.0, 0.0, -1.0);
            let (dir, crossed) = interface(state.direction, out, m.n, scene.outside_n, rng);
            if crossed {
                Ok(Step::Terminated(Termination::ExitTop { direction: dir }))
            } else {
                state.direction = dir;
                Ok(Step::Continue)
            }
        }
        Surface::Internal => {
            let n = if crossing.normal.dot(state.direction) >= 0.0 {
                crossing.normal
            } else {
                -crossing.normal
            };
            let Some(next) = scene.medium_index_at(state.position + n * SIDE_PROBE_MM) else {
                return Ok(Step::Terminated(Termination::Escaped));
            };
            if next == state.medium {
                return Ok(Step::Continue);
            }
            let n2 = scene.medium(next).n;
            let (dir, crossed) = interface(state.direction, n, m.n, n2, rng);
            state.direction = dir;
            if crossed {
                state.medium = next;
            }
            Ok(Step::Continue)
        }
    }
}

/// Index of the detector that accepts a photon leaving at `position` with
/// exit direction `direction`, if any.
pub fn detect(position: Vec3, direction: Vec3, probe: &ProbeLayout) -> Option<usize> {
    let cos_exit = -direction.z;
    probe.detectors.iter().position(|d: &Detector| {
        d.covers(position.x, position.y)
            && cos_exit >= d.acceptance_half_angle_deg.to_radians().cos() - 1e-12
    })
}

/// Fraction of the circle of radius `rho` about `(ex, ey)` that lies on
/// the detector patch.
pub fn ring_share(ex: f64, ey: f64, rho: f64, det: &Detector) -> f64 {
    let h = det.half_side_mm();
    let (cx, cy) = (det.position_mm[0], det.position_mm[1]);
    if rho <= 0.0 {
        return if det.covers(ex, ey) { 1.0 } else { 0.0 };
    }
    let (dx, dy) = (cx - ex, cy - ey);
    let nearest = (dx.abs() - h).max(0.0).hypot((dy.abs() - h).max(0.0));
    let farthest = (dx.abs() + h).hypot(dy.abs() + h);
    if rho < nearest || rho > farthest {
        return 0.0;
    }
    let tau = std::f64::consts::TAU;
    let mut cuts = vec![0.0, tau];
    for (off, along_x) in [
        (dx - h, true),
        (dx + h, true),
        (dy - h, false),
        (dy + h, false),
    ] {
        let c = off / rho;
        if c.abs() <= 1.0 {
            let a = if along_x { c.acos() } else { c.asin() };
            let pair = if along_x {
                [a, tau - a]
            } else {
                [a, std::f64::consts::PI - a]
            };
            cuts.extend(pair.iter().map(|t| t.rem_euclid(tau)));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut inside = 0.0;
    for w in cuts.windows(2) {
        let span = w[1] - w[0];
        if span <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (x, y) = (ex + rho * mid.cos(), ey + rho * mid.sin());
        if (x - cx).abs() <= h && (y - cy).abs() <= h {
            inside += span;
        }
    }
    inside / tau
}

/// Runs one photon to termination.
pub fn trace<R: Rng + ?Sized>(
    state: &mut PhotonState,
    scene: &TissueScene,
    params: &WalkParams,
    tissue_surface_z: f64,
    rng: &mut R,
) -> Result<Termination> {
    if let Step::Terminated(t) = enter(state, scene, rng) {
        return Ok(t);
    }
    loop {
        if let Step::Terminated(t) = propagate(state, scene, params, tissue_surface_z, rng)? {
            return Ok(t);
        }
    }
}
