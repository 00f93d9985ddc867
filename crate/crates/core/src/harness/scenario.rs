use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::{parse_session_str, write_session, ChainConfig, SampleFrame};
use crate::error::{Error, Result};
use crate::provenance::{sha256_hex, Manifest, OutputDir, Provenance};
use crate::tissue::{MediaLibrary, SceneConfig};
use crate::transport::{
    calibrate_mu_s, simulate_with_workers, CalibrationConfig, ProbeLayout, TransportConfig,
    TransportResult,
};

use super::scans::{
    dip_summary, run_abdomen_chain, run_lateral_study, run_phantom_scan, run_sd_sweep,
    run_wavelength_sweep, AbdomenChainConfig, LateralConfig, PhantomScanConfig, RunContext,
    SdSweepConfig, WavelengthSweepConfig,
};
use super::session::{analyze_frames, synth_session, AnalyzeConfig, SynthConfig};
use super::svg::{line_plot, Series};
use super::ScanResult;

/// One experiment and its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        scene: SceneConfig,
        probe: ProbeLayout,
    },
    PhantomScan(PhantomScanConfig),
    WavelengthSweep(WavelengthSweepConfig),
    SdSweep(SdSweepConfig),
    Lateral(LateralConfig),
    AbdomenChain(AbdomenChainConfig),
    Calibrate(CalibrationConfig),
    AnalyzeSession {
        session: PathBuf,
        /// Hash of the session file; checked on reruns.
        #[serde(default)]
        session_sha256: Option<String>,
        #[serde(default)]
        analysis: AnalyzeConfig,
        #[serde(default)]
        svg: bool,
    },
    SynthSession(SynthConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::PhantomScan(_) => "phantom-scan",
            Experiment::WavelengthSweep(_) => "wavelength-sweep",
            Experiment::SdSweep(_) => "sd-sweep",
            Experiment::Lateral(_) => "lateral",
            Experiment::AbdomenChain(_) => "abdomen-chain",
            Experiment::Calibrate(_) => "calibrate",
            Experiment::AnalyzeSession { .. } => "analyze-session",
            Experiment::SynthSession(_) => "synth-session",
        }
    }
}

/// A complete, self-describing run: the experiment plus the transport and
/// chain settings it runs under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub chain: ChainConfig,
}

impl Scenario {
    pub fn new(experiment: Experiment) -> Self {
        Scenario {
            experiment,
            transport: TransportConfig::default(),
            chain: ChainConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.transport.validate()?;
        self.chain.validate()
    }

    /// Seed that drives the run's randomness.
    pub fn seed(&self) -> u64 {
        match &self.experiment {
            Experiment::Calibrate(c) => c.seed,
            Experiment::SynthSession(c) => c.seed,
            _ => self.transport.seed,
        }
    }

    fn to_value(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self)
            .map_err(|e| Error::SimulationFault(format!("serializing scenario: {e}")))
    }
}

fn session_bytes(frames: &[SampleFrame]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_session(&mut buf, frames)?;
    Ok(buf)
}

fn scan_plot(scans: &[&ScanResult], title: &str) -> String {
    let x_label = scans.first().map_or("x", |s| s.axis.column());
    let series: Vec<Series> = scans
        .iter()
        .map(|s| {
            Series::new(
                s.name.clone(),
                s.series(0).into_iter().map(|(x, v, _)| (x, v)).collect(),
            )
        })
        .collect();
    line_plot(title, x_label, "cancelled signal (V)", &series)
}

fn write_scan(out: &mut OutputDir, stem: &str, scan: &ScanResult) -> Result<()> {
    out.write(&format!("{stem}.csv"), scan.to_csv().as_bytes())?;
    out.write(
        &format!("{stem}_frames.csv"),
        &session_bytes(&scan.frames())?,
    )?;
    Ok(())
}

fn transport_csv(result: &TransportResult) -> String {
    let mut s = String::from(
        "detector_id,sd_cm,detected_fraction,fraction_std_error,hits,mean_max_depth_mm,median_max_depth_mm,p90_max_depth_mm,mean_path_mm\n",
    );
    for d in &result.detectors {
        let _ = writeln!(
            s,
            "{},{},{:.6e},{:.6e},{},{:.4},{:.4},{:.4},{:.4}",
            d.id,
            d.sd_cm,
            d.detected_fraction,
            d.fraction_std_error,
            d.hit_count,
            d.mean_max_depth_mm,
            d.median_max_depth_mm,
            d.p90_max_depth_mm,
            d.mean_path_mm
        );
    }
    s
}

/// Runs `scenario`, writes its outputs and a manifest under `out_dir`, and
/// returns the manifest. Output bytes do not depend on `workers`.
pub fn run_scenario(
    scenario: &Scenario,
    lib: &MediaLibrary,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Manifest> {
    scenario.validate()?;
    let ctx = RunContext {
        lib: lib.clone(),
        chain: scenario.chain.clone(),
        transport: scenario.transport.clone(),
        workers,
    };
    let mut out = OutputDir::create(out_dir)?;
    let mut provenance = Provenance::new(lib, scenario.seed())
        .with("experiment", scenario.experiment.name())
        .with("transport_config_sha256", scenario.transport.hash())
        .with(
            "chain_config_sha256",
            sha256_hex(&serde_json::to_vec(&scenario.chain).expect("chain config serializes")),
        );
    let mut recorded = scenario.clone();

    match &scenario.experiment {
        Experiment::Simulate { scene, probe } => {
            let built = scene.build(lib)?;
            let result = simulate_with_workers(&built, probe, &scenario.transport, workers)?;
            provenance = provenance.with("scene_sha256", built.content_hash());
            out.write("transport.json", result.to_json().as_bytes())?;
            out.write("detectors.csv", transport_csv(&result).as_bytes())?;
        }
        Experiment::PhantomScan(cfg) => {
            let scan = run_phantom_scan(cfg, &ctx)?;
            write_scan(&mut out, "scan", &scan)?;
            out.write_json("scan.json", &scan)?;
            if scan.rows.iter().any(|r| cfg.is_over_bladder(r.x)) {
                out.write_json("dip.json", &dip_summary(&scan, cfg, &ctx.chain)?)?;
            }
            out.write("scan.svg", scan_plot(&[&scan], "Phantom scan").as_bytes())?;
        }
        Experiment::WavelengthSweep(cfg) => {
            let sweep = run_wavelength_sweep(cfg, &ctx)?;
            for (scan, dip) in sweep.scans.iter().zip(&sweep.dips) {
                write_scan(&mut out, &format!("scan_{}nm", dip.wavelength_nm), scan)?;
            }
            let mut dips = String::from(
                "wavelength_nm,max_on_phantom_v,min_over_bladder_v,mean_over_bladder_v,over_bladder_std_error_v,dip_depth_v,noise_floor_v,over_bladder_in_noise\n",
            );
            for d in &sweep.dips {
                let _ = writeln!(
                    dips,
                    "{},{:.5e},{:.5e},{:.5e},{:.3e},{:.5e},{:.3e},{}",
                    d.wavelength_nm,
                    d.max_on_phantom_v,
                    d.min_over_bladder_v,
                    d.mean_over_bladder_v,
                    d.over_bladder_std_error_v,
                    d.dip_depth_v,
                    d.noise_floor_v,
                    d.over_bladder_in_noise
                );
            }
            out.write("dips.csv", dips.as_bytes())?;
            out.write_json("sweep.json", &sweep)?;
            let refs: Vec<&ScanResult> = sweep.scans.iter().collect();
            out.write("sweep.svg", scan_plot(&refs, "Wavelength sweep").as_bytes())?;
        }
        Experiment::SdSweep(cfg) => {
            let sweep = run_sd_sweep(cfg, &ctx)?;
            write_scan(&mut out, "sd_sweep", &sweep.scan)?;
            out.write_json("sd_sweep.json", &sweep)?;
            out.write(
                "sd_sweep.svg",
                scan_plot(&[&sweep.scan], "Signal against SD distance").as_bytes(),
            )?;
        }
        Experiment::Lateral(cfg) => {
            let r = run_lateral_study(cfg, &ctx)?;
            out.write_json("lateral.json", &r)?;
            let text = format!(
                "black absorber: {:.5e} V (fraction {:.4e})\nempty abdomen:  {:.5e} V (fraction {:.4e})\nleakage fraction: {:.4e}\nratio: {:.4} (anchor {:.4})\n",
                r.v_black, r.black_fraction, r.v_reference, r.reference_fraction, r.leakage_fraction, r.ratio, r.anchor_ratio
            );
            out.write("lateral.txt", text.as_bytes())?;
        }
        Experiment::AbdomenChain(cfg) => {
            let r = run_abdomen_chain(cfg, &ctx)?;
            out.write("transport.json", r.transport.to_json().as_bytes())?;
            out.write_json("chain.json", &r.trace)?;
            out.write(
                "frames.csv",
                &session_bytes(std::slice::from_ref(&r.trace.frame))?,
            )?;
        }
        Experiment::Calibrate(cfg) => {
            let c = calibrate_mu_s(lib, cfg)?;
            out.write_json("calibration.json", &c)?;
            let mut csv = String::from("factor,detected_fraction\n");
            for (f, v) in &c.evaluations {
                let _ = writeln!(csv, "{f},{v:.6e}");
            }
            out.write("evaluations.csv", csv.as_bytes())?;
        }
        Experiment::AnalyzeSession {
            session,
            session_sha256,
            analysis,
            svg,
        } => {
            let bytes = std::fs::read(session).map_err(|e| Error::io(session, e))?;
            let hash = sha256_hex(&bytes);
            if let Some(expected) = session_sha256 {
                if *expected != hash {
                    return Err(Error::Schema(format!(
                        "{}: contents changed since the recorded run (sha256 {hash}, expected {expected})",
                        session.display()
                    )));
                }
            }
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Schema(format!("{}: not UTF-8 text", session.display())))?;
            let origin = session.display().to_string();
            let frames = parse_session_str(&text, &origin, &analysis.afe)?;
            let report = analyze_frames(&frames, &origin, analysis)?;
            out.write("report.txt", report.to_text().as_bytes())?;
            out.write_json("report.json", &report)?;
            if *svg {
                let mut series: Vec<Series> = Vec::new();
                for f in &frames {
                    let name = format!("PD{}", f.optode_id);
                    match series.iter_mut().find(|s| s.name == name) {
                        Some(s) => s.points.push((f.t_s, f.v_cancelled())),
                        None => series.push(Series::new(name, vec![(f.t_s, f.v_cancelled())])),
                    }
                }
                series.sort_by(|a, b| a.name.cmp(&b.name));
                out.write(
                    "session.svg",
                    line_plot("Session", "time (s)", "cancelled signal (V)", &series).as_bytes(),
                )?;
            }
            provenance = provenance.with("session_sha256", &hash);
            if let Experiment::AnalyzeSession { session_sha256, .. } = &mut recorded.experiment {
                *session_sha256 = Some(hash);
            }
        }
        Experiment::SynthSession(cfg) => {
            let frames = synth_session(cfg)?;
            out.write("session.csv", &session_bytes(&frames)?)?;
            out.write_json("windows.json", &cfg.windows())?;
        }
    }
    out.finish(recorded.to_value()?, provenance)
}

/// Outcome of re-running a recorded scenario.
#[derive(Debug, Clone)]
pub struct Rerun {
    pub manifest: Manifest,
    /// Output files whose bytes differ from the recorded run.
    pub differences: Vec<String>,
}

/// Re-runs the scenario recorded in a manifest with the media defaults
/// embedded in it, and compares every output's hash.
pub fn rerun(manifest_path: &Path, out_dir: &Path, workers: Option<usize>) -> Result<Rerun> {
    let recorded = Manifest::read(manifest_path)?;
    let scenario: Scenario = serde_json::from_value(recorded.scenario.clone())
        .map_err(|e| Error::Schema(format!("{}: scenario: {e}", manifest_path.display())))?;
    let p = &recorded.provenance;
    let lib = MediaLibrary::from_toml_str(&p.defaults_toml)?.with_mu_s_scale(p.mu_s_scale);
    if lib.source_hash() != p.defaults_sha256 {
        return Err(Error::Schema(
            "embedded defaults do not match their recorded hash".into(),
        ));
    }
    let manifest = run_scenario(&scenario, &lib, out_dir, workers)?;
    let differences = recorded.differences(&manifest);
    Ok(Rerun {
        manifest,
        differences,
    })
}
