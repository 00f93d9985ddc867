//! Batched, worker-count-independent Monte Carlo runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::sha256_hex;
use crate::tissue::{TissueScene, MAX_MEDIA};

use super::kernel::{detect, launch, ring_share, trace, PhotonState, Termination, WalkParams};
use super::probe::ProbeLayout;

/// Width of the max-depth histogram bins, mm.
pub const DEPTH_BIN_MM: f64 = 1.0;

/// How exiting photons are scored against detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `Azimuthal` for laterally uniform scenes, `Analog` otherwise.
    #[default]
    Auto,
    /// A photon counts when it leaves through a detector patch.
    Analog,
    /// Every accepted exit is spread over the ring of equal source distance
    /// and each detector scores the share of the ring it covers. Valid only
    /// for laterally uniform scenes (no inclusions); far lower variance for
    /// distant detectors.
    Azimuthal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    pub n_photons: u64,
    pub seed: u64,
    pub roulette_threshold: f64,
    pub roulette_survival: f64,
    pub batch_size: u64,
    pub max_interactions: u32,
    pub estimator: Estimator,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            n_photons: 1_000_000,
            seed: 1,
            roulette_threshold: 1e-4,
            roulette_survival: 0.1,
            batch_size: 10_000,
            max_interactions: 1_000_000,
            estimator: Estimator::Auto,
        }
    }
}

impl TransportConfig {
    pub fn new(n_photons: u64, seed: u64) -> Self {
        TransportConfig {
            n_photons,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_photons == 0 {
            return Err(Error::Config("n_photons must be positive".into()));
        }
        if !(self.roulette_survival > 0.0 && self.roulette_survival < 1.0) {
            return Err(Error::Config(format!(
                "roulette_survival {} must lie in (0, 1)",
                self.roulette_survival
            )));
        }
        if !(self.roulette_threshold > 0.0 && self.roulette_threshold < 1.0) {
            return Err(Error::Config(format!(
                "roulette_threshold {} must lie in (0, 1)",
                self.roulette_threshold
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// The estimator actually used on `scene`.
    pub fn resolved_estimator(&self, scene: &TissueScene) -> Estimator {
        match self.estimator {
            Estimator::Auto if scene.inclusions.is_empty() => Estimator::Azimuthal,
            Estimator::Auto => Estimator::Analog,
            e => e,
        }
    }

    fn walk(&self) -> WalkParams {
        WalkParams {
            roulette_threshold: self.roulette_threshold,
            roulette_survival: self.roulette_survival,
            max_interactions: self.max_interactions,
        }
    }
}

/// Stream for photon `index` under `seed`. Streams are independent of how
/// photons are split across workers.
pub fn photon_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
struct DetectorTally {
    weight: f64,
    weight_sq: f64,
    hits: u64,
    weighted_depth: f64,
    weighted_path: f64,
    weighted_partial: [f64; MAX_MEDIA],
    histogram: Vec<f64>,
}

impl DetectorTally {
    fn new(bins: usize) -> Self {
        DetectorTally {
            weight: 0.0,
            weight_sq: 0.0,
            hits: 0,
            weighted_depth: 0.0,
            weighted_path: 0.0,
            weighted_partial: [0.0; MAX_MEDIA],
            histogram: vec![0.0; bins],
        }
    }

    fn score(&mut self, state: &PhotonState, w: f64, bins: usize) {
        self.weight += w;
        self.weight_sq += w * w;
        self.hits += 1;
        self.weighted_depth += w * state.max_depth;
        self.weighted_path += w * state.total_path();
        for (a, p) in self.weighted_partial.iter_mut().zip(&state.partial_path) {
            *a += w * p;
        }
        let bin = ((state.max_depth / DEPTH_BIN_MM) as usize).min(bins - 1);
        self.histogram[bin] += w;
    }

    fn merge(&mut self, o: &DetectorTally) {
        self.weight += o.weight;
        self.weight_sq += o.weight_sq;
        self.hits += o.hits;
        self.weighted_depth += o.weighted_depth;
        self.weighted_path += o.weighted_path;
        for (a, b) in self.weighted_partial.iter_mut().zip(&o.weighted_partial) {
            *a += b;
        }
        for (a, b) in self.histogram.iter_mut().zip(&o.histogram) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Tally {
    detectors: Vec<DetectorTally>,
    absorbed: f64,
    escaped: f64,
    truncated: u64,
}

impl Tally {
    fn new(n_detectors: usize, bins: usize) -> Self {
        Tally {
            detectors: vec![DetectorTally::new(bins); n_detectors],
            absorbed: 0.0,
            escaped: 0.0,
            truncated: 0,
        }
    }

    fn merge(&mut self, o: &Tally) {
        for (a, b) in self.detectors.iter_mut().zip(&o.detectors) {
            a.merge(b);
        }
        self.absorbed += o.absorbed;
        self.escaped += o.escaped;
        self.truncated += o.truncated;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorResult {
    pub id: u32,
    pub sd_cm: f64,
    pub detected_weight_sum: f64,
    pub detected_weight_sq_sum: f64,
    pub hit_count: u64,
    pub detected_fraction: f64,
    /// Monte Carlo standard error of `detected_fraction`.
    pub fraction_std_error: f64,
    pub mean_max_depth_mm: f64,
    pub median_max_depth_mm: f64,
    pub p90_max_depth_mm: f64,
    pub mean_path_mm: f64,
    /// Weighted mean path per medium label, mm.
    pub mean_partial_path_mm: Vec<(String, f64)>,
    /// Detected weight per 1 mm max-depth bin, normalised per launched photon.
    pub depth_histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportProvenance {
    pub seed: u64,
    pub n_photons: u64,
    pub batch_size: u64,
    /// Estimator actually used (never `auto`).
    pub estimator: Estimator,
    pub config_hash: String,
    pub scene_hash: String,
    pub defaults_version: String,
    pub mu_s_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub scene: String,
    pub wavelength_nm: f64,
    pub depth_bin_mm: f64,
    pub detectors: Vec<DetectorResult>,
    pub absorbed_fraction: f64,
    pub escaped_fraction: f64,
    /// Photons stopped by the interaction cap (their weight counts as absorbed).
    pub truncated_photons: u64,
    pub provenance: TransportProvenance,
}

impl TransportResult {
    pub fn detected_total(&self) -> f64 {
        self.detectors.iter().map(|d| d.detected_fraction).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("transport result: {e}")))
    }
}

fn weighted_quantile(hist: &[f64], q: f64) -> f64 {
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let target = q * total;
    let mut acc = 0.0;
    for (i, &w) in hist.iter().enumerate() {
        if acc + w >= target && w > 0.0 {
            let frac = (target - acc) / w;
            return (i as f64 + frac) * DEPTH_BIN_MM;
        }
        acc += w;
    }
    hist.len() as f64 * DEPTH_BIN_MM
}

fn run_batch(
    scene: &TissueScene,
    probe: &ProbeLayout,
    cfg: &TransportConfig,
    estimator: Estimator,
    surface_z: f64,
    bins: usize,
    range: std::ops::Range<u64>,
) -> Result<Tally> {
    let walk = cfg.walk();
    let mut tally = Tally::new(probe.detectors.len(), bins);
    for index in range {
        let mut rng = photon_rng(cfg.seed, index);
        let emitter = &probe.emitters[(index % probe.emitters.len() as u64) as usize];
        let mut state = launch(emitter, scene, &mut rng);
        let end = trace(&mut state, scene, &walk, surface_z, &mut rng)?;
        tally.absorbed += state.deposited;
        if state.interactions > walk.max_interactions {
            tally.truncated += 1;
        }
        match end {
            Termination::Absorbed => {}
            Termination::Escaped => tally.escaped += state.weight,
            Termination::ExitTop { direction } => match estimator {
                Estimator::Analog | Estimator::Auto => {
                    match detect(state.position, direction, probe) {
                        None => tally.escaped += state.weight,
                        Some(i) => tally.detectors[i].score(&state, state.weight, bins),
                    }
                }
                Estimator::Azimuthal => {
                    let [ex, ey] = emitter.position_mm;
                    let rho = (state.position.x - ex).hypot(state.position.y - ey);
                    let cos_exit = -direction.z;
                    let mut scored = 0.0;
                    for (d, tally_d) in probe.detectors.iter().zip(tally.detectors.iter_mut()) {
                        if cos_exit < d.acceptance_half_angle_deg.to_radians().cos() - 1e-12 {
                            continue;
                        }
                        let share = ring_share(ex, ey, rho, d);
                        if share > 0.0 {
                            let w = state.weight * share;
                            tally_d.score(&state, w, bins);
                            scored += w;
                        }
                    }
                    tally.escaped += state.weight - scored;
                }
            },
        }
    }
    Ok(tally)
}

/// Runs the simulation on the global thread pool.
pub fn simulate(
    scene: &TissueScene,
    probe: &ProbeLayout,
    cfg: &TransportConfig,
) -> Result<TransportResult> {
    simulate_with_workers(scene, probe, cfg, None)
}

/// Runs the simulation on `workers` threads (or the global pool for
/// `None`). The output does not depend on the worker count.
pub fn simulate_with_workers(
    scene: &TissueScene,
    probe: &ProbeLayout,
    cfg: &TransportConfig,
    workers: Option<usize>,
) -> Result<TransportResult> {
    cfg.validate()?;
    probe.validate(scene)?;
    let estimator = cfg.resolved_estimator(scene);
    if estimator == Estimator::Azimuthal && !scene.inclusions.is_empty() {
        return Err(Error::Config(format!(
            "azimuthal estimator needs a laterally uniform scene; {} has inclusions",
            scene.name
        )));
    }
    let surface_z = scene.tissue_surface_z();
    let bins = (((scene.bounds.max.z - surface_z) / DEPTH_BIN_MM).ceil() as usize).max(1);
    let n_batches = cfg.n_photons.div_ceil(cfg.batch_size);
    let batch = |b: u64| {
        let start = b * cfg.batch_size;
        let end = (start + cfg.batch_size).min(cfg.n_photons);
        run_batch(scene, probe, cfg, estimator, surface_z, bins, start..end)
    };
    let partials: Vec<Result<Tally>> = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::SimulationFault(format!("thread pool: {e}")))?;
            pool.install(|| (0..n_batches).into_par_iter().map(batch).collect())
        }
        None => (0..n_batches).into_par_iter().map(batch).collect(),
    };
    let mut total = Tally::new(probe.detectors.len(), bins);
    for p in partials {
        total.merge(&p?);
    }
    Ok(finish(scene, probe, cfg, total))
}

fn finish(
    scene: &TissueScene,
    probe: &ProbeLayout,
    cfg: &TransportConfig,
    t: Tally,
) -> TransportResult {
    let n = cfg.n_photons as f64;
    let detectors = t
        .detectors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mean = d.weight / n;
            let var = (d.weight_sq / n - mean * mean).max(0.0);
            let per_w = |x: f64| if d.weight > 0.0 { x / d.weight } else { 0.0 };
            DetectorResult {
                id: probe.detectors[i].id,
                sd_cm: probe.sd_cm(i),
                detected_weight_sum: d.weight,
                detected_weight_sq_sum: d.weight_sq,
                hit_count: d.hits,
                detected_fraction: mean,
                fraction_std_error: (var / n).sqrt(),
                mean_max_depth_mm: per_w(d.weighted_depth),
                median_max_depth_mm: weighted_quantile(&d.histogram, 0.5),
                p90_max_depth_mm: weighted_quantile(&d.histogram, 0.9),
                mean_path_mm: per_w(d.weighted_path),
                mean_partial_path_mm: scene
                    .media
                    .iter()
                    .zip(&d.weighted_partial)
                    .map(|(m, p)| (m.label.clone(), per_w(*p)))
                    .collect(),
                depth_histogram: d.histogram.iter().map(|w| w / n).collect(),
            }
        })
        .collect();
    TransportResult {
        scene: scene.name.clone(),
        wavelength_nm: scene.wavelength_nm,
        depth_bin_mm: DEPTH_BIN_MM,
        detectors,
        absorbed_fraction: t.absorbed / n,
        escaped_fraction: t.escaped / n,
        truncated_photons: t.truncated,
        provenance: TransportProvenance {
            seed: cfg.seed,
            n_photons: cfg.n_photons,
            batch_size: cfg.batch_size,
            estimator: cfg.resolved_estimator(scene),
            config_hash: cfg.hash(),
            scene_hash: scene.content_hash(),
            defaults_version: scene.defaults_version.clone(),
            mu_s_scale: scene.mu_s_scale,
        },
    }
}

/// Sensing depth from the reflection-mode rule of thumb: half the
/// source-detector distance. Both in cm.
pub fn penetration_depth_estimate(sd_distance_cm: f64) -> Result<f64> {
    if !(sd_distance_cm >= 0.0) {
        return Err(Error::Range {
            what: "sd_distance_cm",
            value: sd_distance_cm,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(sd_distance_cm / 2.0)
}
