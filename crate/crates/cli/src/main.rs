//! `nirsim`: runs the bench experiments in simulation and analyses
//! recorded sessions. Every run writes its outputs and a `manifest.json`
//! under `--out`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input-data error,
//! 4 internal simulation fault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nirsim_core::harness::{
    rerun, run_scenario, AbdomenChainConfig, AnalyzeConfig, Experiment, LateralConfig, Leakage,
    PhantomScanConfig, Scenario, SdSweepConfig, SynthConfig, WavelengthSweepConfig, Window,
    LATERAL_ANCHOR_RATIO,
};
use nirsim_core::provenance::{Manifest, MANIFEST_FILE};
use nirsim_core::tissue::{BladderSpec, SceneConfig};
use nirsim_core::transport::{CalibrationConfig, ProbeLayout};
use nirsim_core::{Error, MediaLibrary, Result};

#[derive(Parser, Debug)]
#[command(
    name = "nirsim",
    version,
    about = "NIRS bladder-sensing chain simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "nirsim-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Photon packets per transport run.
    #[arg(long)]
    photons: Option<u64>,
    /// Transport worker threads (outputs do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// Scattering scale applied to every medium.
    #[arg(long)]
    mu_s_scale: Option<f64>,
    /// Media defaults file; overrides NIRSIM_MEDIA_DEFAULTS.
    #[arg(long)]
    defaults: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Photon transport for a scene file and a probe file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Slide one LED-PD pair across the phantom.
    PhantomScan {
        #[arg(long, default_value_t = 300.0)]
        volume_ml: f64,
        #[arg(long, default_value_t = 970.0)]
        wavelength: f64,
        #[arg(long, default_value_t = 4.0)]
        sd_cm: f64,
        /// LED drive; 200 mA by default, 670 mA with --porcine.
        #[arg(long)]
        led_ma: Option<f64>,
        /// Porcine bladder bedded in intestine.
        #[arg(long)]
        porcine: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Phantom scans at 890, 970 and 1450 nm.
    WavelengthSweep {
        #[arg(long, default_value_t = 300.0)]
        volume_ml: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [890.0, 970.0, 1450.0])]
        wavelengths: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// One LED, eight detectors at increasing distance on the abdomen.
    SdSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Black absorber against the empty abdomen.
    Lateral {
        #[arg(long, value_enum, default_value_t = LeakageMode::Calibrated)]
        leakage: LeakageMode,
        /// Fraction for `--leakage fixed`, or target ratio for `calibrated`.
        #[arg(long)]
        value: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// LED through the abdomen to the ADC for one pair.
    AbdomenChain {
        #[arg(long, default_value_t = 4.0)]
        sd_cm: f64,
        #[arg(long, default_value_t = 800.0)]
        led_ma: f64,
        #[arg(long, default_value_t = 970.0)]
        wavelength: f64,
        /// Add a water-filled bladder of this volume.
        #[arg(long)]
        bladder_ml: Option<f64>,
        #[arg(long, default_value_t = 70.0)]
        bladder_depth_mm: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Find the scattering scale that matches the reference detected fraction.
    Calibrate {
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Window means, t-tests, trend fits and SNR of a session CSV.
    Analyze {
        #[arg(long)]
        session: PathBuf,
        /// Analysis window, LABEL:T0:T1 in seconds. Repeatable.
        #[arg(long = "window")]
        windows: Vec<Window>,
        /// Windows to compare, A,B (default: the first two).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        compare: Option<Vec<String>>,
        #[arg(long, default_value_t = 5)]
        fit_order: usize,
        /// Also plot every optode over time.
        #[arg(long)]
        svg: bool,
        #[arg(long, default_value = "nirsim-out")]
        out: PathBuf,
    },
    /// Write a synthetic empty/full session.
    SynthSession {
        #[arg(long, default_value_t = 10.0)]
        gap_sigma: f64,
        #[arg(long, default_value_t = 60.0)]
        window_s: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario file (TOML).
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the scenario recorded in a manifest and compare outputs.
    Rerun {
        /// A manifest.json or the directory holding it.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "nirsim-rerun")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum LeakageMode {
    Off,
    Fixed,
    Calibrated,
}

fn library(common: &Common) -> Result<MediaLibrary> {
    match &common.defaults {
        Some(p) => MediaLibrary::from_path(p),
        None => MediaLibrary::load_default(),
    }
}

fn scenario(experiment: Experiment, common: &Common) -> Scenario {
    let mut s = Scenario::new(experiment);
    if let Some(seed) = common.seed {
        s.transport.seed = seed;
    }
    if let Some(n) = common.photons {
        s.transport.n_photons = n;
    }
    s
}

fn execute(scenario: &Scenario, common: &Common) -> Result<Manifest> {
    let lib = library(common)?;
    run_scenario(scenario, &lib, &common.out, common.workers)
}

fn report(manifest: &Manifest, out: &Path) {
    println!(
        "{} -> {}",
        manifest
            .provenance
            .extra
            .get("experiment")
            .map_or("run", String::as_str),
        out.display()
    );
    for e in &manifest.outputs {
        println!("  {:<28} {:>9} bytes  {}", e.file, e.bytes, &e.sha256[..16]);
    }
    println!("  {MANIFEST_FILE}");
}

fn print_file(out: &Path, name: &str) {
    if let Ok(text) = std::fs::read_to_string(out.join(name)) {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scene,
            probe,
            common,
        } => {
            let mut scene = SceneConfig::from_path(&scene)?;
            if let Some(s) = common.mu_s_scale {
                scene.mu_s_scale = Some(s);
            }
            let probe = ProbeLayout::from_path(&probe)?;
            let s = scenario(Experiment::Simulate { scene, probe }, &common);
            let m = execute(&s, &common)?;
            print_file(&common.out, "detectors.csv");
            report(&m, &common.out);
        }
        Command::PhantomScan {
            volume_ml,
            wavelength,
            sd_cm,
            led_ma,
            porcine,
            common,
        } => {
            let mut cfg = PhantomScanConfig {
                volume_ml,
                wavelength_nm: wavelength,
                sd_cm,
                led_current_ma: led_ma,
                porcine,
                ..PhantomScanConfig::default()
            };
            if let Some(s) = common.mu_s_scale {
                cfg.mu_s_scale = s;
            }
            let m = execute(&scenario(Experiment::PhantomScan(cfg), &common), &common)?;
            report(&m, &common.out);
        }
        Command::WavelengthSweep {
            volume_ml,
            wavelengths,
            common,
        } => {
            let mut cfg = WavelengthSweepConfig {
                wavelengths_nm: wavelengths,
                ..WavelengthSweepConfig::default()
            };
            cfg.scan.volume_ml = volume_ml;
            if let Some(s) = common.mu_s_scale {
                cfg.scan.mu_s_scale = s;
            }
            let m = execute(
                &scenario(Experiment::WavelengthSweep(cfg), &common),
                &common,
            )?;
            print_file(&common.out, "dips.csv");
            report(&m, &common.out);
        }
        Command::SdSweep { common } => {
            let mut cfg = SdSweepConfig::default();
            if let Some(s) = common.mu_s_scale {
                cfg.mu_s_scale = s;
            }
            let m = execute(&scenario(Experiment::SdSweep(cfg), &common), &common)?;
            print_file(&common.out, "sd_sweep.csv");
            report(&m, &common.out);
        }
        Command::Lateral {
            leakage,
            value,
            common,
        } => {
            let leakage = match leakage {
                LeakageMode::Off => Leakage::Off,
                LeakageMode::Fixed => Leakage::Fixed {
                    fraction: value
                        .ok_or_else(|| Error::Config("--leakage fixed needs --value".into()))?,
                },
                LeakageMode::Calibrated => Leakage::Calibrated {
                    ratio: value.unwrap_or(LATERAL_ANCHOR_RATIO),
                },
            };
            let mut cfg = LateralConfig {
                leakage,
                ..LateralConfig::default()
            };
            if let Some(s) = common.mu_s_scale {
                cfg.mu_s_scale = s;
            }
            let m = execute(&scenario(Experiment::Lateral(cfg), &common), &common)?;
            print_file(&common.out, "lateral.txt");
            report(&m, &common.out);
        }
        Command::AbdomenChain {
            sd_cm,
            led_ma,
            wavelength,
            bladder_ml,
            bladder_depth_mm,
            common,
        } => {
            let mut cfg = AbdomenChainConfig {
                sd_cm,
                led_current_ma: led_ma,
                wavelength_nm: wavelength,
                bladder: bladder_ml.map(|volume_ml| BladderSpec {
                    volume_ml,
                    center_depth_mm: bladder_depth_mm,
                    aspect: [1.3, 1.0, 0.8],
                    medium: "water".into(),
                }),
                ..AbdomenChainConfig::default()
            };
            if let Some(s) = common.mu_s_scale {
                cfg.mu_s_scale = s;
            }
            let m = execute(&scenario(Experiment::AbdomenChain(cfg), &common), &common)?;
            print_file(&common.out, "chain.json");
            report(&m, &common.out);
        }
        Command::Calibrate { target, common } => {
            let mut cfg = CalibrationConfig::default();
            if let Some(t) = target {
                cfg.target_fraction = t;
            }
            if let Some(n) = common.photons {
                cfg.photons_per_eval = n;
            }
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let m = execute(&scenario(Experiment::Calibrate(cfg), &common), &common)?;
            print_file(&common.out, "calibration.json");
            report(&m, &common.out);
        }
        Command::Analyze {
            session,
            windows,
            compare,
            fit_order,
            svg,
            out,
        } => {
            let analysis = AnalyzeConfig {
                windows,
                compare: compare.map(|v| (v[0].clone(), v[1].clone())),
                fit_order,
                ..AnalyzeConfig::default()
            };
            let s = Scenario::new(Experiment::AnalyzeSession {
                session,
                session_sha256: None,
                analysis,
                svg,
            });
            let lib = MediaLibrary::load_default()?;
            let m = run_scenario(&s, &lib, &out, None)?;
            print_file(&out, "report.txt");
            report(&m, &out);
        }
        Command::SynthSession {
            gap_sigma,
            window_s,
            common,
        } => {
            let cfg = SynthConfig {
                gap_sigma,
                window_s,
                seed: common.seed.unwrap_or(1),
                ..SynthConfig::default()
            };
            let m = execute(&scenario(Experiment::SynthSession(cfg), &common), &common)?;
            report(&m, &common.out);
        }
        Command::Run {
            scenario: path,
            common,
        } => {
            let mut s = Scenario::from_path(&path)?;
            if let Some(seed) = common.seed {
                s.transport.seed = seed;
            }
            if let Some(n) = common.photons {
                s.transport.n_photons = n;
            }
            let m = execute(&s, &common)?;
            report(&m, &common.out);
        }
        Command::Rerun {
            manifest,
            out,
            workers,
        } => {
            let path = if manifest.is_dir() {
                manifest.join(MANIFEST_FILE)
            } else {
                manifest
            };
            let r = rerun(&path, &out, workers)?;
            report(&r.manifest, &out);
            if r.differences.is_empty() {
                println!("all outputs identical to {}", path.display());
            } else {
                for f in &r.differences {
                    println!("differs: {f}");
                }
                return Err(Error::SimulationFault(format!(
                    "{} output(s) differ from the recorded run",
                    r.differences.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nirsim: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
