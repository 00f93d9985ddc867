//! Digitized frames and the full optical-to-digital composition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tissue::TissueScene;
use crate::transport::{simulate_with_workers, ProbeLayout, TransportConfig, TransportResult};

use super::models::{
    adc_quantize, code_to_volts, led_power, pd_current, tia_voltage, AfeConfig, LedModel, PdModel,
};

/// Optode ids on the eight-pair probe.
pub const OPTODE_IDS: std::ops::RangeInclusive<u8> = 1..=8;

/// One LED-on / ambient reading pair from one optode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFrame {
    pub t_s: f64,
    pub optode_id: u8,
    pub adc_code_on: u32,
    pub adc_code_ambient: u32,
    pub v_led_on: f64,
    pub v_ambient: f64,
}

impl SampleFrame {
    /// Builds a frame from codes; voltages follow as `code × LSB`.
    pub fn from_codes(
        t_s: f64,
        optode_id: u8,
        code_on: u32,
        code_ambient: u32,
        afe: &AfeConfig,
    ) -> Result<Self> {
        if !OPTODE_IDS.contains(&optode_id) {
            return Err(Error::Schema(format!("optode id {optode_id} outside 1-8")));
        }
        let max = afe.max_code();
        if code_on > max || code_ambient > max {
            return Err(Error::Schema(format!("ADC code above {max}")));
        }
        Ok(SampleFrame {
            t_s,
            optode_id,
            adc_code_on: code_on,
            adc_code_ambient: code_ambient,
            v_led_on: code_to_volts(code_on, afe),
            v_ambient: code_to_volts(code_ambient, afe),
        })
    }

    pub fn v_cancelled(&self) -> f64 {
        ambient_cancel(self)
    }

    /// LED-on reading no higher than ambient: nothing from the LED arrives.
    pub fn is_no_signal(&self) -> bool {
        self.v_led_on <= self.v_ambient
    }
}

/// `max(v_on − v_ambient, 0)`.
pub fn ambient_cancel(frame: &SampleFrame) -> f64 {
    (frame.v_led_on - frame.v_ambient).max(0.0)
}

/// Everything between the LED driver and the ADC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub led: LedModel,
    pub pd: PdModel,
    pub afe: AfeConfig,
    /// Ambient light as an equivalent photocurrent, A.
    pub ambient_current_a: f64,
    /// Fraction of LED power reaching each detector without entering tissue.
    pub leakage_fraction: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            led: LedModel::default(),
            pd: PdModel::default(),
            afe: AfeConfig::default(),
            ambient_current_a: 0.2e-6,
            leakage_fraction: 0.0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.led.validate()?;
        self.afe.validate()?;
        if !(self.pd.active_area_cm2 > 0.0 && self.pd.responsivity_a_per_w > 0.0) {
            return Err(Error::Config(
                "photodiode area and responsivity must be positive".into(),
            ));
        }
        if !(self.ambient_current_a >= 0.0) {
            return Err(Error::Config("ambient current must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.leakage_fraction) {
            return Err(Error::Config("leakage fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Intermediate values of one composition, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub led_power_mw: f64,
    pub detected_fraction: f64,
    pub pd_power_w: f64,
    pub pd_current_a: f64,
    pub v_led_on: f64,
    pub v_ambient: f64,
    pub frame: SampleFrame,
}

/// Detected optical fraction to digitized frame through each stage.
pub fn compose_frame(
    detected_fraction: f64,
    led_current_ma: f64,
    chain: &ChainConfig,
    optode_id: u8,
    t_s: f64,
) -> Result<ChainTrace> {
    if !(detected_fraction >= 0.0) {
        return Err(Error::Domain(format!(
            "detected fraction {detected_fraction} must be non-negative"
        )));
    }
    let led_power_mw = led_power(led_current_ma, &chain.led)?;
    let pd_power_w = led_power_mw * 1e-3 * (detected_fraction + chain.leakage_fraction);
    let pd_current_a = pd_current(pd_power_w, &chain.pd)?;
    let v_led_on = tia_voltage(pd_current_a, chain.ambient_current_a, &chain.afe);
    let v_ambient = tia_voltage(0.0, chain.ambient_current_a, &chain.afe);
    let frame = SampleFrame::from_codes(
        t_s,
        optode_id,
        adc_quantize(v_led_on, &chain.afe),
        adc_quantize(v_ambient, &chain.afe),
        &chain.afe,
    )?;
    Ok(ChainTrace {
        led_power_mw,
        detected_fraction,
        pd_power_w,
        pd_current_a,
        v_led_on,
        v_ambient,
        frame,
    })
}

/// Simulates the scene and digitizes one frame per detector. Detector
/// `k` reports as optode `k + 1`.
pub fn end_to_end(
    scene: &TissueScene,
    probe: &ProbeLayout,
    led_current_ma: f64,
    chain: &ChainConfig,
    transport: &TransportConfig,
    workers: Option<usize>,
) -> Result<(TransportResult, Vec<ChainTrace>)> {
    chain.validate()?;
    // Fail on the LED before spending time on transport.
    led_power(led_current_ma, &chain.led)?;
    let result = simulate_with_workers(scene, probe, transport, workers)?;
    let traces = result
        .detectors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            compose_frame(
                d.detected_fraction,
                led_current_ma,
                chain,
                (i % 8) as u8 + 1,
                0.0,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((result, traces))
}
