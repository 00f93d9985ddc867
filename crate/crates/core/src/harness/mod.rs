//! Scenario runners that reproduce the bench experiments end to end, the
//! session analysis, and the run manifest used for reruns.

mod scans;
mod scenario;
mod session;
pub mod svg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain::{
    compose_frame, led_power, pd_current, transimpedance_gain, ChainConfig, ChainTrace, SampleFrame,
};
use crate::error::{Error, Result};
use crate::transport::DetectorResult;

pub use scans::{
    abdomen_transport, dip_summary, run_abdomen_chain, run_lateral_study, run_phantom_scan,
    run_sd_sweep, run_wavelength_sweep, AbdomenChainConfig, AbdomenChainResult, DipSummary,
    LateralConfig, LateralResult, Leakage, PhantomScanConfig, RunContext, SdSweepConfig,
    SdSweepResult, WavelengthSweepConfig, WavelengthSweepResult, ABDOMEN_MU_S_SCALE,
    LATERAL_ANCHOR_RATIO, PROBE_SD_DISTANCES_CM,
};
pub use scenario::{rerun, run_scenario, Experiment, Rerun, Scenario};
pub use session::{
    analyze_frames, analyze_session, synth_session, AnalyzeConfig, OptodeReport, SessionReport,
    SynthConfig, Window,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    OffsetCm,
    SdCm,
    WavelengthNm,
}

impl ScanAxis {
    pub fn column(self) -> &'static str {
        match self {
            ScanAxis::OffsetCm => "offset_cm",
            ScanAxis::SdCm => "sd_cm",
            ScanAxis::WavelengthNm => "wavelength_nm",
        }
    }
}

/// One detector's reading at one scan position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSignal {
    pub optode_id: u8,
    pub detected_fraction: f64,
    pub fraction_std_error: f64,
    pub hits: u64,
    pub mean_max_depth_mm: f64,
    pub v_led_on: f64,
    pub v_ambient: f64,
    pub v_cancelled: f64,
    /// Monte Carlo standard error carried through the chain, V.
    pub v_std_error: f64,
    /// LED-on reading no higher than the ambient reading.
    pub no_signal: bool,
    /// Cancelled signal at or below the ambient level.
    pub below_ambient: bool,
    pub frame: SampleFrame,
}

impl DetectorSignal {
    pub fn from_trace(
        trace: &ChainTrace,
        detector: &DetectorResult,
        led_current_ma: f64,
        chain: &ChainConfig,
    ) -> Result<Self> {
        let f = &trace.frame;
        Ok(DetectorSignal {
            optode_id: f.optode_id,
            detected_fraction: detector.detected_fraction,
            fraction_std_error: detector.fraction_std_error,
            hits: detector.hit_count,
            mean_max_depth_mm: detector.mean_max_depth_mm,
            v_led_on: f.v_led_on,
            v_ambient: f.v_ambient,
            v_cancelled: f.v_cancelled(),
            v_std_error: detector.fraction_std_error * volts_per_fraction(led_current_ma, chain)?,
            no_signal: f.is_no_signal(),
            below_ambient: f.v_cancelled() <= f.v_ambient,
            frame: f.clone(),
        })
    }
}

/// Cancelled volts per unit detected fraction at the given drive.
pub fn volts_per_fraction(led_current_ma: f64, chain: &ChainConfig) -> Result<f64> {
    let watts = led_power(led_current_ma, &chain.led)? * 1e-3;
    Ok(pd_current(watts, &chain.pd)? * transimpedance_gain(&chain.afe))
}

/// Full chain for every detector of a transport result.
pub fn signals(
    detectors: &[DetectorResult],
    led_current_ma: f64,
    chain: &ChainConfig,
    t_s: f64,
) -> Result<Vec<DetectorSignal>> {
    detectors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let id = (i % 8) as u8 + 1;
            let trace = compose_frame(d.detected_fraction, led_current_ma, chain, id, t_s)?;
            DetectorSignal::from_trace(&trace, d, led_current_ma, chain)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Offset (cm), SD distance (cm) or wavelength (nm), per the scan axis.
    pub x: f64,
    pub signals: Vec<DetectorSignal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub name: String,
    pub axis: ScanAxis,
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn new(name: impl Into<String>, axis: ScanAxis, rows: Vec<ScanRow>) -> Result<Self> {
        if let Some(w) = rows.windows(2).find(|w| !(w[1].x > w[0].x)) {
            return Err(Error::Config(format!(
                "scan positions must increase strictly ({} then {})",
                w[0].x, w[1].x
            )));
        }
        Ok(ScanResult {
            name: name.into(),
            axis,
            rows,
        })
    }

    /// `(x, cancelled volts, standard error)` for detector `index`.
    pub fn series(&self, index: usize) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| {
                r.signals
                    .get(index)
                    .map(|s| (r.x, s.v_cancelled, s.v_std_error))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},optode_id,detected_fraction,fraction_std_error,hits,mean_max_depth_mm,v_on,v_ambient,v_cancelled,v_std_error,no_signal\n",
            self.axis.column()
        );
        for r in &self.rows {
            for s in &r.signals {
                let _ = writeln!(
                    out,
                    "{},{},{:.6e},{:.6e},{},{:.4},{:.5e},{:.5e},{:.5e},{:.3e},{}",
                    r.x,
                    s.optode_id,
                    s.detected_fraction,
                    s.fraction_std_error,
                    s.hits,
                    s.mean_max_depth_mm,
                    s.v_led_on,
                    s.v_ambient,
                    s.v_cancelled,
                    s.v_std_error,
                    s.no_signal
                );
            }
        }
        out
    }

    /// The digitized frames in session order, one time step per row.
    pub fn frames(&self) -> Vec<SampleFrame> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.signals.iter().map(move |s| SampleFrame {
                    t_s: i as f64,
                    ..s.frame.clone()
                })
            })
            .collect()
    }
}
