//! The opto-electronic chain: LED drive, photodiode, transimpedance front
//! end, ADC, ambient cancellation, noise and SNR.

pub mod frame;
pub mod models;
pub mod session;

pub use frame::{
    ambient_cancel, compose_frame, end_to_end, ChainConfig, ChainTrace, SampleFrame, OPTODE_IDS,
};
pub use models::{
    adc_quantize, code_to_volts, led_power, noise_floor_v, noise_free_bits, noise_voltage,
    pd_current, snr_db, tia_voltage, transimpedance_gain, AfeConfig, LedModel, PdModel,
};
pub use session::{parse_session, parse_session_str, write_session, SESSION_HEADER};

/// Leakage fraction that makes `(black + f) / (reference + f)` equal
/// `ratio`, for detected fractions measured on the absorber and reference
/// scenes.
pub fn leakage_for_ratio(
    ratio: f64,
    reference_fraction: f64,
    black_fraction: f64,
) -> crate::Result<f64> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(crate::Error::Domain(format!(
            "target ratio {ratio} must lie in (0, 1)"
        )));
    }
    let f = (ratio * reference_fraction - black_fraction) / (1.0 - ratio);
    if f < 0.0 {
        return Err(crate::Error::Domain(format!(
            "absorber signal already exceeds {ratio} of the reference; no leakage fits"
        )));
    }
    Ok(f)
}
