//! Device models and the stage equations of the analog front end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radiant output versus forward current, piecewise linear through anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LedModel {
    /// `(current mA, power mW)`, currents strictly increasing, first at 0 mA.
    pub anchors: Vec<(f64, f64)>,
    pub wavelength_nm: f64,
    pub max_safe_ma: f64,
}

impl Default for LedModel {
    fn default() -> Self {
        LedModel {
            anchors: vec![(0.0, 0.0), (800.0, 586.0)],
            wavelength_nm: 970.0,
            max_safe_ma: 800.0,
        }
    }
}

impl LedModel {
    pub fn validate(&self) -> Result<()> {
        let a = &self.anchors;
        if a.len() < 2 || a[0] != (0.0, 0.0) {
            return Err(Error::Config(
                "LED anchors must start at (0 mA, 0 mW) and have two or more points".into(),
            ));
        }
        for w in a.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::Config(
                    "LED anchors need increasing current and non-decreasing power".into(),
                ));
            }
        }
        if !(self.max_safe_ma > 0.0) {
            return Err(Error::Config("LED safety cap must be positive".into()));
        }
        Ok(())
    }
}

/// Radiant power in mW at `current_ma`. Beyond the last anchor the last
/// segment is extended, up to the safety cap.
pub fn led_power(current_ma: f64, model: &LedModel) -> Result<f64> {
    if current_ma > model.max_safe_ma {
        return Err(Error::Safety {
            current_ma,
            cap_ma: model.max_safe_ma,
        });
    }
    if !(current_ma >= 0.0) {
        return Err(Error::Domain(format!(
            "LED current {current_ma} mA must be non-negative"
        )));
    }
    let a = &model.anchors;
    let i = a
        .partition_point(|&(c, _)| c <= current_ma)
        .clamp(1, a.len() - 1);
    let (c0, p0) = a[i - 1];
    let (c1, p1) = a[i];
    Ok(p0 + (p1 - p0) * (current_ma - c0) / (c1 - c0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdModel {
    pub active_area_cm2: f64,
    pub responsivity_a_per_w: f64,
}

impl Default for PdModel {
    fn default() -> Self {
        PdModel {
            active_area_cm2: 0.0625,
            responsivity_a_per_w: 0.56,
        }
    }
}

/// Photocurrent in A for incident optical power in W.
pub fn pd_current(optical_power_w: f64, model: &PdModel) -> Result<f64> {
    if !(optical_power_w >= 0.0) {
        return Err(Error::Domain(format!(
            "optical power {optical_power_w} W must be non-negative"
        )));
    }
    Ok(model.responsivity_a_per_w * optical_power_w)
}

/// Front-end settings. Resistances in ohms, currents in amperes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AfeConfig {
    pub r_f: f64,
    pub r_g: f64,
    pub i_cancel: f64,
    pub duty_cycle: f64,
    pub adc_bits: u32,
    pub volts_per_lsb: f64,
    /// Input voltage at which the converter saturates.
    pub full_scale_v: f64,
    /// Input-referred RMS noise current.
    pub i_noise: f64,
}

impl Default for AfeConfig {
    fn default() -> Self {
        AfeConfig {
            r_f: 10e3,
            r_g: 100e3,
            i_cancel: 0.0,
            duty_cycle: 0.25,
            adc_bits: 22,
            volts_per_lsb: 238.42e-9,
            full_scale_v: 1.0,
            i_noise: 10e-12,
        }
    }
}

/// Reference resistance in the first-stage gain term.
const R_REF: f64 = 100e3;

impl AfeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_f > 0.0 && self.r_g > 0.0) {
            return Err(Error::Config("gain resistors must be positive".into()));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::Config(format!(
                "duty cycle {} must lie in (0, 1]",
                self.duty_cycle
            )));
        }
        if self.adc_bits != 22 {
            return Err(Error::Config(format!(
                "ADC must be 22-bit, got {}",
                self.adc_bits
            )));
        }
        if !(self.volts_per_lsb > 0.0 && self.full_scale_v > 0.0 && self.i_noise > 0.0) {
            return Err(Error::Config(
                "LSB size, full scale and noise current must be positive".into(),
            ));
        }
        if !(self.i_cancel >= 0.0) {
            return Err(Error::Config(
                "cancellation current must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }
}

/// Differential output of the two-stage amplifier:
/// `2·R_G·(I_pleth·R_F/100k + I_amb·R_F/100k − I_cancel)`.
pub fn tia_voltage(i_pleth: f64, i_ambient: f64, cfg: &AfeConfig) -> f64 {
    2.0 * cfg.r_g * (i_pleth * cfg.r_f / R_REF + i_ambient * cfg.r_f / R_REF - cfg.i_cancel)
}

/// Volts per ampere of photocurrent through both amplifier stages.
pub fn transimpedance_gain(cfg: &AfeConfig) -> f64 {
    2.0 * cfg.r_g * cfg.r_f / R_REF
}

/// Smallest resolvable cancelled voltage: the peak-to-peak noise
/// (6.6 sigma of the input noise current) or one LSB, whichever is larger.
pub fn noise_floor_v(cfg: &AfeConfig) -> f64 {
    (6.6 * cfg.i_noise * transimpedance_gain(cfg)).max(cfg.volts_per_lsb)
}

/// ADC code for input `v`. Inputs at or above full scale saturate at the
/// top code; negative inputs read 0. A relative slack of 1e-9 LSB keeps
/// voltages rebuilt from codes on their own code.
pub fn adc_quantize(v: f64, cfg: &AfeConfig) -> u32 {
    let max = cfg.max_code();
    if v >= cfg.full_scale_v {
        return max;
    }
    if !(v > 0.0) {
        return 0;
    }
    let code = (v / cfg.volts_per_lsb + 1e-9).floor();
    if code >= max as f64 {
        max
    } else {
        code as u32
    }
}

pub fn code_to_volts(code: u32, cfg: &AfeConfig) -> f64 {
    code as f64 * cfg.volts_per_lsb
}

/// `log2(I_pd / (6.6·I_noise))`.
pub fn noise_free_bits(i_photodiode: f64, i_noise: f64) -> Result<f64> {
    if !(i_photodiode > 0.0 && i_noise > 0.0) {
        return Err(Error::Domain(format!(
            "photodiode current {i_photodiode} A and noise current {i_noise} A must be positive"
        )));
    }
    Ok((i_photodiode / (6.6 * i_noise)).log2())
}

/// Noise amplitude implied by `n_fb` noise-free bits: one LSB scaled by
/// `2^(bits − n_fb)`.
pub fn noise_voltage(n_fb: f64, cfg: &AfeConfig) -> Result<f64> {
    let bits = cfg.adc_bits as f64;
    if !(0.0..=bits).contains(&n_fb) {
        return Err(Error::Domain(format!(
            "noise-free bits {n_fb} outside [0, {bits}]"
        )));
    }
    Ok(cfg.volts_per_lsb * (bits - n_fb).exp2())
}

pub fn snr_db(v_diff: f64, v_noise: f64) -> Result<f64> {
    if !(v_diff > 0.0 && v_noise > 0.0) {
        return Err(Error::Domain(format!(
            "signal {v_diff} V and noise {v_noise} V must be positive"
        )));
    }
    Ok(20.0 * (v_diff / v_noise).log10())
}
