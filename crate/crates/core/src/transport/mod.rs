//! Monte Carlo photon transport through a [`TissueScene`](crate::tissue::TissueScene).

pub mod calibrate;
pub mod kernel;
pub mod probe;
pub mod simulate;

pub use calibrate::{calibrate_mu_s, Calibration, CalibrationConfig, REFERENCE_DETECTED_FRACTION};
pub use kernel::{
    detect, fresnel_reflectance, hg_cos_theta, launch, propagate, ring_share, sample_cone,
    PhotonState, Step, Termination, WalkParams,
};
pub use probe::{Detector, Emitter, ProbeLayout};
pub use simulate::{
    penetration_depth_estimate, photon_rng, simulate, simulate_with_workers, DetectorResult,
    Estimator, TransportConfig, TransportResult,
};
