use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    polyfit, t_test_two_tailed, window_mean, PolyFit, SampleSeries, TTestResult, DEFAULT_ORDER,
};
use crate::chain::{
    adc_quantize, noise_free_bits, parse_session, snr_db, transimpedance_gain, AfeConfig,
    SampleFrame, OPTODE_IDS,
};
use crate::error::{Error, Result};

/// A labelled time window, written `LABEL:T0:T1` on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub label: String,
    pub t0: f64,
    pub t1: f64,
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("window `{s}` must look like LABEL:T0:T1"));
        let [label, t0, t1] = parts[..] else {
            return Err(bad());
        };
        let t0: f64 = t0.trim().parse().map_err(|_| bad())?;
        let t1: f64 = t1.trim().parse().map_err(|_| bad())?;
        if label.is_empty() || !(t1 >= t0) {
            return Err(bad());
        }
        Ok(Window {
            label: label.to_owned(),
            t0,
            t1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub windows: Vec<Window>,
    /// Labels of the two windows to compare; the first two windows when unset.
    pub compare: Option<(String, String)>,
    pub fit_order: usize,
    pub afe: AfeConfig,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            windows: Vec::new(),
            compare: None,
            fit_order: DEFAULT_ORDER,
            afe: AfeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptodeReport {
    pub optode_id: u8,
    pub samples: usize,
    pub mean_v: f64,
    pub std_v: f64,
    pub window_means: Vec<(String, f64)>,
    pub t_test: Option<TTestResult>,
    /// Trend of the cancelled signal over the session; absent when there
    /// are too few distinct timestamps.
    pub fit: Option<PolyFit>,
    /// Mean over standard deviation of the cancelled signal, dB.
    pub snr_db: Option<f64>,
    /// Noise-free bits of the mean photocurrent against the AFE noise.
    pub noise_free_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub source: String,
    pub frames: usize,
    pub duration_s: f64,
    /// Median per-optode sample rate.
    pub effective_rate_hz: f64,
    pub comparison: Option<(String, String)>,
    pub optodes: Vec<OptodeReport>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Parses a session file and analyses it.
pub fn analyze_session(path: &Path, cfg: &AnalyzeConfig) -> Result<SessionReport> {
    let frames = parse_session(path, &cfg.afe)?;
    analyze_frames(&frames, &path.display().to_string(), cfg)
}

/// Per-optode window means, the window comparison, trend fits and SNR.
pub fn analyze_frames(
    frames: &[SampleFrame],
    source: &str,
    cfg: &AnalyzeConfig,
) -> Result<SessionReport> {
    if frames.is_empty() {
        return Err(Error::Schema(format!("{source}: session has no frames")));
    }
    let comparison = match (&cfg.compare, cfg.windows.as_slice()) {
        (Some(pair), _) => Some(pair.clone()),
        (None, [a, b, ..]) => Some((a.label.clone(), b.label.clone())),
        _ => None,
    };
    let window = |label: &str| -> Result<&Window> {
        cfg.windows
            .iter()
            .find(|w| w.label == label)
            .ok_or_else(|| Error::Config(format!("no window labelled `{label}`")))
    };
    let mut by_optode: BTreeMap<u8, Vec<(f64, f64)>> = BTreeMap::new();
    for f in frames {
        by_optode
            .entry(f.optode_id)
            .or_default()
            .push((f.t_s, f.v_cancelled()));
    }
    let gain = transimpedance_gain(&cfg.afe);
    let mut optodes = Vec::new();
    let mut rates = Vec::new();
    for (&id, samples) in &by_optode {
        let series = SampleSeries::new(id, "session", samples.clone())
            .map_err(|e| Error::Schema(format!("{source}: optode {id}: {e}")))?;
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let (mean_v, std_v) = mean_std(&values);
        if samples.len() > 1 {
            let span = times[times.len() - 1] - times[0];
            rates.push((samples.len() - 1) as f64 / span);
        }
        let window_means = cfg
            .windows
            .iter()
            .map(|w| Ok((w.label.clone(), window_mean(&series, w.t0, w.t1)?)))
            .collect::<Result<Vec<_>>>()?;
        let t_test = match &comparison {
            Some((a, b)) => {
                let (wa, wb) = (window(a)?, window(b)?);
                let xa: Vec<f64> = series.values_in(wa.t0, wa.t1).collect();
                let xb: Vec<f64> = series.values_in(wb.t0, wb.t1).collect();
                Some(t_test_two_tailed(&xa, &xb)?)
            }
            None => None,
        };
        let fit = match polyfit(&times, &values, cfg.fit_order) {
            Ok(f) => Some(f),
            Err(Error::RankDeficient(_)) => None,
            Err(e) => return Err(e),
        };
        optodes.push(OptodeReport {
            optode_id: id,
            samples: samples.len(),
            mean_v,
            std_v,
            window_means,
            t_test,
            fit,
            snr_db: snr_db(mean_v, std_v).ok(),
            noise_free_bits: noise_free_bits(mean_v / gain, cfg.afe.i_noise).ok(),
        });
    }
    rates.sort_by(f64::total_cmp);
    let t_min = frames.iter().map(|f| f.t_s).fold(f64::INFINITY, f64::min);
    let t_max = frames
        .iter()
        .map(|f| f.t_s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SessionReport {
        source: source.to_owned(),
        frames: frames.len(),
        duration_s: t_max - t_min,
        effective_rate_hz: rates.get(rates.len() / 2).copied().unwrap_or(0.0),
        comparison,
        optodes,
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.prec$}"))
}

impl SessionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "session: {}", self.source);
        let _ = writeln!(
            s,
            "frames: {}  duration: {:.1} s  effective rate: {:.3} Hz per optode",
            self.frames, self.duration_s, self.effective_rate_hz
        );
        let ids: String = self
            .optodes
            .iter()
            .map(|o| format!("{:>12}", format!("PD{}", o.optode_id)))
            .collect();

        let _ = writeln!(s, "\nwindow means (cancelled V)");
        let _ = writeln!(s, "{:<12}{ids}", "window");
        let labels: Vec<&str> = self
            .optodes
            .first()
            .map(|o| o.window_means.iter().map(|w| w.0.as_str()).collect())
            .unwrap_or_default();
        for (i, label) in labels.iter().enumerate() {
            let row: String = self
                .optodes
                .iter()
                .map(|o| format!("{:>12.4e}", o.window_means[i].1))
                .collect();
            let _ = writeln!(s, "{label:<12}{row}");
        }

        if let Some((a, b)) = &self.comparison {
            let _ = writeln!(s, "\ntwo-tailed Student's t-test, {a} vs {b}");
            let _ = writeln!(s, "{:<12}{ids}", "");
            let t: String = self
                .optodes
                .iter()
                .map(|o| format!("{:>12}", opt(o.t_test.map(|r| r.t_statistic), 3)))
                .collect();
            let p: String = self
                .optodes
                .iter()
                .map(|o| {
                    format!(
                        "{:>12}",
                        o.t_test
                            .map_or("-".into(), |r| format!("{:.3e}", r.p_value))
                    )
                })
                .collect();
            let _ = writeln!(s, "{:<12}{t}", "t");
            let _ = writeln!(s, "{:<12}{p}", "p");
        }

        let _ = writeln!(s, "\nnoise and SNR");
        let _ = writeln!(s, "{:<12}{ids}", "");
        let mean: String = self
            .optodes
            .iter()
            .map(|o| format!("{:>12.4e}", o.mean_v))
            .collect();
        let std: String = self
            .optodes
            .iter()
            .map(|o| format!("{:>12.3e}", o.std_v))
            .collect();
        let nfb: String = self
            .optodes
            .iter()
            .map(|o| format!("{:>12}", opt(o.noise_free_bits, 2)))
            .collect();
        let snr: String = self
            .optodes
            .iter()
            .map(|o| format!("{:>12}", opt(o.snr_db, 2)))
            .collect();
        let _ = writeln!(s, "{:<12}{mean}", "mean V");
        let _ = writeln!(s, "{:<12}{std}", "std V");
        let _ = writeln!(s, "{:<12}{nfb}", "noise-free");
        let _ = writeln!(s, "{:<12}{snr}", "SNR dB");

        let _ = writeln!(s, "\npolynomial trend (ascending coefficients)");
        for o in &self.optodes {
            match &o.fit {
                Some(f) => {
                    let c: Vec<String> =
                        f.coefficients.iter().map(|c| format!("{c:.6e}")).collect();
                    let _ = writeln!(
                        s,
                        "PD{} order {} rms {:.3e}: {}",
                        o.optode_id,
                        f.order,
                        f.rms_residual,
                        c.join(" ")
                    );
                }
                None => {
                    let _ = writeln!(s, "PD{}: too few distinct samples to fit", o.optode_id);
                }
            }
        }
        s
    }
}

/// Parameters of a synthetic two-condition session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub rate_hz: f64,
    /// Length of each condition, s.
    pub window_s: f64,
    /// Cancelled signal of optode 1 with the bladder empty, V; later
    /// optodes sit progressively lower.
    pub empty_v: f64,
    /// Drop from empty to full, in noise standard deviations.
    pub gap_sigma: f64,
    pub noise_v: f64,
    pub ambient_v: f64,
    pub afe: AfeConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            rate_hz: 1.0,
            window_s: 60.0,
            empty_v: 0.035,
            gap_sigma: 10.0,
            noise_v: 2e-4,
            ambient_v: 4e-3,
            afe: AfeConfig::default(),
        }
    }
}

impl SynthConfig {
    /// The `empty` and `full` windows the session is laid out in.
    pub fn windows(&self) -> Vec<Window> {
        let dt = 1.0 / self.rate_hz;
        vec![
            Window {
                label: "empty".into(),
                t0: 0.0,
                t1: self.window_s - dt,
            },
            Window {
                label: "full".into(),
                t0: self.window_s,
                t1: 2.0 * self.window_s - dt,
            },
        ]
    }
}

/// An `empty` then `full` recording from all eight optodes with Gaussian
/// noise, digitized through the ADC.
pub fn synth_session(cfg: &SynthConfig) -> Result<Vec<SampleFrame>> {
    if !(cfg.rate_hz > 0.0 && cfg.window_s > 0.0 && cfg.noise_v >= 0.0) {
        return Err(Error::Config(
            "synthetic session needs positive rate and window".into(),
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_v).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = (cfg.window_s * cfg.rate_hz).round() as usize;
    let mut frames = Vec::with_capacity(2 * n * OPTODE_IDS.len());
    let code_amb = adc_quantize(cfg.ambient_v, &cfg.afe);
    for i in 0..2 * n {
        let t = i as f64 / cfg.rate_hz;
        let full = i >= n;
        for id in OPTODE_IDS {
            let base = cfg.empty_v * (1.0 - 0.08 * f64::from(id - 1));
            let level = if full {
                base - cfg.gap_sigma * cfg.noise_v
            } else {
                base
            };
            let v = cfg.ambient_v + level + noise.sample(&mut rng);
            frames.push(SampleFrame::from_codes(
                t,
                id,
                adc_quantize(v, &cfg.afe),
                code_amb,
                &cfg.afe,
            )?);
        }
    }
    Ok(frames)
}
