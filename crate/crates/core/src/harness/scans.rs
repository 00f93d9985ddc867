use serde::{Deserialize, Serialize};

use crate::analysis::{log_linear_fit, LinearFit};
use crate::chain::{compose_frame, leakage_for_ratio, noise_floor_v, ChainConfig, ChainTrace};
use crate::error::{Error, Result};
use crate::tissue::{
    build_abdomen_scene, build_absorber_scene, build_phantom_scene, build_porcine_scene,
    AbdomenConfig, BladderSpec, MediaLibrary, PhantomConfig, PorcineConfig, SceneOffset,
    TissueScene,
};
use crate::transport::{simulate_with_workers, ProbeLayout, TransportConfig, TransportResult};

use super::{signals, DetectorSignal, ScanAxis, ScanResult, ScanRow};

/// Scattering scale found by calibrating the abdomen model against the
/// reference detected fraction at 4 cm (see `nirsim calibrate`).
pub const ABDOMEN_MU_S_SCALE: f64 = 2.68;

/// The bench measurement: 0.0048 V on the black absorber against 0.035 V
/// on the abdomen.
pub const LATERAL_ANCHOR_RATIO: f64 = 0.0048 / 0.035;

/// LED 1 to PD 1..8 distances of the eight-detector probe, cm.
pub const PROBE_SD_DISTANCES_CM: [f64; 8] = [4.0, 4.5, 5.7, 7.2, 8.9, 10.8, 12.6, 14.6];

/// Shared inputs of every runner.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub lib: MediaLibrary,
    pub chain: ChainConfig,
    pub transport: TransportConfig,
    pub workers: Option<usize>,
}

impl RunContext {
    pub fn new(lib: MediaLibrary, transport: TransportConfig) -> Self {
        RunContext {
            lib,
            chain: ChainConfig::default(),
            transport,
            workers: None,
        }
    }

    fn simulate(
        &self,
        scene: &TissueScene,
        probe: &ProbeLayout,
        seed_offset: u64,
    ) -> Result<TransportResult> {
        let t = TransportConfig {
            seed: self.transport.seed.wrapping_add(seed_offset),
            ..self.transport.clone()
        };
        simulate_with_workers(scene, probe, &t, self.workers)
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "mu_s_scale {scale} must be positive"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomScanConfig {
    pub volume_ml: f64,
    pub wavelength_nm: f64,
    /// Defaults to 200 mA, or 670 mA for the porcine body.
    pub led_current_ma: Option<f64>,
    pub sd_cm: f64,
    /// Scan positions, cm. The probe midpoint sits at `offset - 0.5` cm
    /// along the phantom, so 1..=22 lie over the 22 cm body and 0 and 23
    /// hang over open air.
    pub offsets_cm: Vec<f64>,
    /// LED power reaching the detector through open air when the probe
    /// hangs off the phantom.
    pub open_air_coupling: f64,
    /// Porcine bladder bedded in intestine instead of the water container.
    pub porcine: bool,
    pub mu_s_scale: f64,
    pub phantom: PhantomConfig,
}

impl Default for PhantomScanConfig {
    fn default() -> Self {
        PhantomScanConfig {
            volume_ml: 300.0,
            wavelength_nm: 970.0,
            led_current_ma: None,
            sd_cm: 4.0,
            offsets_cm: (0..=23).map(f64::from).collect(),
            open_air_coupling: 1e-4,
            porcine: false,
            mu_s_scale: 1.0,
            phantom: PhantomConfig::default(),
        }
    }
}

impl PhantomScanConfig {
    pub fn led_ma(&self) -> f64 {
        self.led_current_ma
            .unwrap_or(if self.porcine { 670.0 } else { 200.0 })
    }

    /// Probe midpoint along the phantom, mm.
    pub fn midpoint_mm(&self, offset_cm: f64) -> f64 {
        (offset_cm - 0.5) * 10.0
    }

    pub fn is_off_phantom(&self, offset_cm: f64) -> bool {
        !self.phantom.covers(self.midpoint_mm(offset_cm))
    }

    /// Both optodes above the container (or bladder).
    pub fn is_over_bladder(&self, offset_cm: f64) -> bool {
        let c = self.phantom.container_box();
        let (mid, h) = (self.midpoint_mm(offset_cm), self.sd_cm * 5.0);
        mid - h >= c.min.x && mid + h <= c.max.x
    }

    /// Both optodes on the phantom and clear of the container.
    pub fn is_tissue_only(&self, offset_cm: f64) -> bool {
        let c = self.phantom.container_box();
        let (mid, h) = (self.midpoint_mm(offset_cm), self.sd_cm * 5.0);
        let (lo, hi) = (mid - h, mid + h);
        (lo >= 0.0 && hi <= c.min.x) || (lo >= c.max.x && hi <= self.phantom.length_mm)
    }

    fn scene(&self, lib: &MediaLibrary) -> Result<TissueScene> {
        check_scale(self.mu_s_scale)?;
        let lib = lib.clone().with_mu_s_scale(self.mu_s_scale);
        let phantom = PhantomConfig {
            wavelength_nm: self.wavelength_nm,
            ..self.phantom.clone()
        };
        if self.porcine {
            build_porcine_scene(
                &PorcineConfig {
                    phantom,
                    volume_ml: self.volume_ml,
                    ..PorcineConfig::default()
                },
                &lib,
            )
        } else {
            build_phantom_scene(self.volume_ml, &phantom, &lib)
        }
    }
}

/// Slides the probe across the phantom and digitizes every position.
pub fn run_phantom_scan(cfg: &PhantomScanConfig, ctx: &RunContext) -> Result<ScanResult> {
    let base = cfg.scene(&ctx.lib)?;
    let probe = ProbeLayout::single_pair(cfg.sd_cm, cfg.wavelength_nm);
    let led = cfg.led_ma();
    let mut rows = Vec::with_capacity(cfg.offsets_cm.len());
    for (i, &k) in cfg.offsets_cm.iter().enumerate() {
        let scene = base.translated(SceneOffset(cfg.midpoint_mm(k) / 10.0));
        let result = ctx.simulate(&scene, &probe, i as u64)?;
        let mut chain = ctx.chain.clone();
        if cfg.is_off_phantom(k) {
            chain.leakage_fraction += cfg.open_air_coupling;
        }
        rows.push(ScanRow {
            x: k,
            signals: signals(&result.detectors, led, &chain, i as f64)?,
        });
    }
    let kind = if cfg.porcine { "porcine" } else { "phantom" };
    ScanResult::new(
        format!("{kind} {} ml at {} nm", cfg.volume_ml, cfg.wavelength_nm),
        ScanAxis::OffsetCm,
        rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WavelengthSweepConfig {
    pub wavelengths_nm: Vec<f64>,
    /// Template scan; its wavelength is replaced per sweep point.
    pub scan: PhantomScanConfig,
}

impl Default for WavelengthSweepConfig {
    fn default() -> Self {
        WavelengthSweepConfig {
            wavelengths_nm: vec![890.0, 970.0, 1450.0],
            scan: PhantomScanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipSummary {
    pub wavelength_nm: f64,
    /// Highest cancelled signal with the probe on the phantom, V.
    pub max_on_phantom_v: f64,
    /// Lowest cancelled signal with the probe over the bladder, V.
    pub min_over_bladder_v: f64,
    pub mean_over_bladder_v: f64,
    /// Largest Monte Carlo error among the over-bladder positions, V.
    pub over_bladder_std_error_v: f64,
    pub dip_depth_v: f64,
    pub noise_floor_v: f64,
    /// Every over-bladder reading lies within the noise floor.
    pub over_bladder_in_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthSweepResult {
    pub scans: Vec<ScanResult>,
    pub dips: Vec<DipSummary>,
}

impl WavelengthSweepResult {
    /// Wavelength with the deepest dip.
    pub fn deepest(&self) -> Option<f64> {
        self.dips
            .iter()
            .max_by(|a, b| a.dip_depth_v.total_cmp(&b.dip_depth_v))
            .map(|d| d.wavelength_nm)
    }
}

pub fn dip_summary(
    scan: &ScanResult,
    cfg: &PhantomScanConfig,
    chain: &ChainConfig,
) -> Result<DipSummary> {
    let on: Vec<&DetectorSignal> = scan
        .rows
        .iter()
        .filter(|r| !cfg.is_off_phantom(r.x))
        .filter_map(|r| r.signals.first())
        .collect();
    let over: Vec<&DetectorSignal> = scan
        .rows
        .iter()
        .filter(|r| cfg.is_over_bladder(r.x))
        .filter_map(|r| r.signals.first())
        .collect();
    if on.is_empty() || over.is_empty() {
        return Err(Error::Config(
            "dip depth needs on-phantom and over-bladder scan positions".into(),
        ));
    }
    let max_on = on
        .iter()
        .map(|s| s.v_cancelled)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_over = over
        .iter()
        .map(|s| s.v_cancelled)
        .fold(f64::INFINITY, f64::min);
    let mean_over = over.iter().map(|s| s.v_cancelled).sum::<f64>() / over.len() as f64;
    let floor = noise_floor_v(&chain.afe);
    Ok(DipSummary {
        wavelength_nm: cfg.wavelength_nm,
        max_on_phantom_v: max_on,
        min_over_bladder_v: min_over,
        mean_over_bladder_v: mean_over,
        over_bladder_std_error_v: over.iter().map(|s| s.v_std_error).fold(0.0, f64::max),
        dip_depth_v: max_on - min_over,
        noise_floor_v: floor,
        over_bladder_in_noise: over.iter().all(|s| s.v_cancelled <= floor),
    })
}

/// Phantom scans at each LED wavelength with the per-wavelength dip.
pub fn run_wavelength_sweep(
    cfg: &WavelengthSweepConfig,
    ctx: &RunContext,
) -> Result<WavelengthSweepResult> {
    let mut scans = Vec::new();
    let mut dips = Vec::new();
    for &wl in &cfg.wavelengths_nm {
        let scan_cfg = PhantomScanConfig {
            wavelength_nm: wl,
            ..cfg.scan.clone()
        };
        let scan = run_phantom_scan(&scan_cfg, ctx)?;
        dips.push(dip_summary(&scan, &scan_cfg, &ctx.chain)?);
        scans.push(scan);
    }
    Ok(WavelengthSweepResult { scans, dips })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdSweepConfig {
    pub distances_cm: Vec<f64>,
    pub led_current_ma: f64,
    pub wavelength_nm: f64,
    pub mu_s_scale: f64,
    /// Lateral size of the abdomen block; wide enough that the farthest
    /// detector sits well inside it with the LED at the centre.
    pub side_mm: f64,
}

impl Default for SdSweepConfig {
    fn default() -> Self {
        SdSweepConfig {
            distances_cm: PROBE_SD_DISTANCES_CM.to_vec(),
            led_current_ma: 800.0,
            wavelength_nm: 970.0,
            mu_s_scale: ABDOMEN_MU_S_SCALE,
            side_mm: 320.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdSweepResult {
    pub scan: ScanResult,
    /// ln(cancelled volts) against SD over the detectors with a positive
    /// cancelled signal; `None` with fewer than three.
    pub regression: Option<LinearFit>,
    pub no_signal_ids: Vec<u8>,
}

/// One LED, one row per detector distance.
pub fn run_sd_sweep(cfg: &SdSweepConfig, ctx: &RunContext) -> Result<SdSweepResult> {
    check_scale(cfg.mu_s_scale)?;
    let lib = ctx.lib.clone().with_mu_s_scale(cfg.mu_s_scale);
    let scene = build_abdomen_scene(
        &AbdomenConfig {
            side_mm: cfg.side_mm,
            wavelength_nm: cfg.wavelength_nm,
            ..AbdomenConfig::default()
        },
        &lib,
    )?;
    let probe = ProbeLayout::sd_sweep(0.0, &cfg.distances_cm, cfg.wavelength_nm);
    let result = ctx.simulate(&scene, &probe, 0)?;
    let sig = signals(&result.detectors, cfg.led_current_ma, &ctx.chain, 0.0)?;
    let no_signal_ids = sig
        .iter()
        .filter(|s| s.no_signal)
        .map(|s| s.optode_id)
        .collect();
    let rows: Vec<ScanRow> = cfg
        .distances_cm
        .iter()
        .zip(sig)
        .map(|(&x, s)| ScanRow {
            x,
            signals: vec![s],
        })
        .collect();
    let scan = ScanResult::new("sd sweep", ScanAxis::SdCm, rows)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = scan
        .series(0)
        .into_iter()
        .filter(|(_, v, _)| *v > 0.0)
        .map(|(x, v, _)| (x, v))
        .unzip();
    let regression = if xs.len() >= 3 {
        Some(log_linear_fit(&xs, &ys)?)
    } else {
        None
    };
    Ok(SdSweepResult {
        scan,
        regression,
        no_signal_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Leakage {
    /// No path around the tissue.
    Off,
    /// A fixed fraction of LED power reaching the detector directly.
    Fixed { fraction: f64 },
    /// Solve the fraction that reproduces `ratio` on this run's signals.
    Calibrated { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LateralConfig {
    pub sd_cm: f64,
    pub led_current_ma: f64,
    pub wavelength_nm: f64,
    pub mu_s_scale: f64,
    pub leakage: Leakage,
}

impl Default for LateralConfig {
    fn default() -> Self {
        LateralConfig {
            sd_cm: 4.0,
            led_current_ma: 800.0,
            wavelength_nm: 970.0,
            mu_s_scale: ABDOMEN_MU_S_SCALE,
            leakage: Leakage::Calibrated {
                ratio: LATERAL_ANCHOR_RATIO,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralResult {
    pub black_fraction: f64,
    pub reference_fraction: f64,
    pub leakage_fraction: f64,
    /// Cancelled volts on the absorber.
    pub v_black: f64,
    /// Cancelled volts on the empty-bladder abdomen.
    pub v_reference: f64,
    pub ratio: f64,
    pub anchor_ratio: f64,
}

/// Signal on a black absorber relative to the empty abdomen, with light
/// that bypasses the tissue modelled as a direct leakage fraction.
pub fn run_lateral_study(cfg: &LateralConfig, ctx: &RunContext) -> Result<LateralResult> {
    check_scale(cfg.mu_s_scale)?;
    let lib = ctx.lib.clone().with_mu_s_scale(cfg.mu_s_scale);
    let probe = ProbeLayout::single_pair(cfg.sd_cm, cfg.wavelength_nm);
    let black_scene = build_absorber_scene(cfg.wavelength_nm, &lib)?;
    let reference_scene = build_abdomen_scene(
        &AbdomenConfig {
            wavelength_nm: cfg.wavelength_nm,
            ..AbdomenConfig::default()
        },
        &lib,
    )?;
    let black = ctx.simulate(&black_scene, &probe, 0)?.detectors[0].detected_fraction;
    let reference = ctx.simulate(&reference_scene, &probe, 0)?.detectors[0].detected_fraction;
    let leakage = match cfg.leakage {
        Leakage::Off => 0.0,
        Leakage::Fixed { fraction } => fraction,
        Leakage::Calibrated { ratio } => leakage_for_ratio(ratio, reference, black)?,
    };
    let chain = ChainConfig {
        leakage_fraction: ctx.chain.leakage_fraction + leakage,
        ..ctx.chain.clone()
    };
    chain.validate()?;
    let v = |f: f64| -> Result<f64> {
        Ok(compose_frame(f, cfg.led_current_ma, &chain, 1, 0.0)?
            .frame
            .v_cancelled())
    };
    let (v_black, v_reference) = (v(black)?, v(reference)?);
    if v_reference <= 0.0 {
        return Err(Error::Domain("reference scene produced no signal".into()));
    }
    Ok(LateralResult {
        black_fraction: black,
        reference_fraction: reference,
        leakage_fraction: leakage,
        v_black,
        v_reference,
        ratio: v_black / v_reference,
        anchor_ratio: LATERAL_ANCHOR_RATIO,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbdomenChainConfig {
    pub sd_cm: f64,
    pub led_current_ma: f64,
    pub wavelength_nm: f64,
    pub mu_s_scale: f64,
    pub bladder: Option<BladderSpec>,
}

impl Default for AbdomenChainConfig {
    fn default() -> Self {
        AbdomenChainConfig {
            sd_cm: 4.0,
            led_current_ma: 800.0,
            wavelength_nm: 970.0,
            mu_s_scale: ABDOMEN_MU_S_SCALE,
            bladder: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbdomenChainResult {
    pub transport: TransportResult,
    pub trace: ChainTrace,
}

/// Abdomen transport for one LED-PD pair.
pub fn abdomen_transport(cfg: &AbdomenChainConfig, ctx: &RunContext) -> Result<TransportResult> {
    check_scale(cfg.mu_s_scale)?;
    let lib = ctx.lib.clone().with_mu_s_scale(cfg.mu_s_scale);
    let scene = build_abdomen_scene(
        &AbdomenConfig {
            wavelength_nm: cfg.wavelength_nm,
            bladder: cfg.bladder.clone(),
            ..AbdomenConfig::default()
        },
        &lib,
    )?;
    let probe = ProbeLayout::single_pair(cfg.sd_cm, cfg.wavelength_nm);
    ctx.simulate(&scene, &probe, 0)
}

/// LED drive through the abdomen to the ADC.
pub fn run_abdomen_chain(cfg: &AbdomenChainConfig, ctx: &RunContext) -> Result<AbdomenChainResult> {
    ctx.chain.validate()?;
    let transport = abdomen_transport(cfg, ctx)?;
    let trace = compose_frame(
        transport.detectors[0].detected_fraction,
        cfg.led_current_ma,
        &ctx.chain,
        1,
        0.0,
    )?;
    Ok(AbdomenChainResult { transport, trace })
}
