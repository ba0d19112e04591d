//! Scenario execution and artifact persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use selfcal_core::array::ImpairmentEnsemble;
use selfcal_core::calibration::{calibrate_array, fir_response, onestage_array, ChannelCalibration, CompensationMode};
use selfcal_core::experiment::{evaluate, log_space, noise_sweep, spearman, Scenario, SweepRow};
use selfcal_core::nullform::{beampattern, nullform_vector, Beampattern, EqualizedResponse, NullformReport};
use selfcal_core::signal::Spectrum;
use selfcal_core::sim::{simulate_selfcal, CaptureSet};
use selfcal_core::Error as CoreError;

use crate::capture::{self, CaptureError};
use crate::config::{CheckSection, ConfigError, ScenarioConfig};
use crate::export::{self, FilterExport, Scores, Summary, RATIO_NOTE};
use crate::io::write_atomic;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("capture error: {0}")]
    Capture(#[from] CaptureError),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },
    #[error("{0}")]
    Data(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{failed} acceptance threshold(s) not met")]
    Check { failed: usize },
}

impl HarnessError {
    /// Process exit code: 2 config, 3 data, 4 numerical, 5 acceptance.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Capture(_) | HarnessError::Data(_) | HarnessError::Io { .. } => 3,
            HarnessError::Check { .. } => 5,
            HarnessError::Stage { source, .. } => match source.root() {
                CoreError::InvalidArgument(_) | CoreError::DegenerateProjection => 2,
                CoreError::EstimationFailed(_) => 3,
                _ => 4,
            },
        }
    }
}

fn stage(name: &'static str) -> impl Fn(CoreError) -> HarnessError {
    move |source| HarnessError::Stage { stage: name, source }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_csv(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(io_err(path))?;
    write_file(path, &buf)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Ground truth and captures for a configured scenario.
pub fn simulate(cfg: &ScenarioConfig) -> Result<(Scenario, ImpairmentEnsemble, CaptureSet), HarnessError> {
    let scenario = cfg.scenario()?;
    let run = || -> selfcal_core::Result<_> {
        let ensemble = scenario.ensemble()?;
        let pilot = scenario.pilot()?;
        let captures = simulate_selfcal(&pilot, &ensemble, None, &scenario.noise()?, scenario.repetitions)?;
        Ok((ensemble, captures))
    };
    let (ensemble, captures) = run().map_err(stage("simulate"))?;
    Ok((scenario, ensemble, captures))
}

/// Writes ensemble and capture artifacts of a simulation into `dir`.
pub fn write_simulation(
    dir: &Path,
    cfg: &ScenarioConfig,
    ensemble: &ImpairmentEnsemble,
    captures: &CaptureSet,
    csv: bool,
) -> Result<(), HarnessError> {
    write_file(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    write_json(&dir.join("ensemble.json"), ensemble)?;
    capture::write_capture(captures, &dir.join("capture.acal"))?;
    if csv {
        write_csv(&dir.join("capture.csv"), |b| capture::write_csv(captures, b))?;
    }
    Ok(())
}

/// Calibration results of a capture.
#[derive(Debug, Clone)]
pub struct FileCalibration {
    pub calibrations: Vec<ChannelCalibration>,
    pub export: FilterExport,
}

/// Runs the calibration pipeline on an in-memory capture set.
pub fn calibrate_captures(cfg: &ScenarioConfig, captures: &CaptureSet) -> Result<FileCalibration, HarnessError> {
    let scenario = cfg.scenario()?;
    if captures.num_channels() != scenario.m {
        return Err(HarnessError::Data(format!(
            "capture has {} channels, config expects {}",
            captures.num_channels(),
            scenario.m
        )));
    }
    if captures.len() != scenario.n {
        return Err(HarnessError::Data(format!(
            "capture has {} samples per channel, config expects n = {}",
            captures.len(),
            scenario.n
        )));
    }
    let pilot = scenario.pilot().map_err(stage("pilot"))?;
    let calibrations = calibrate_array(captures, &pilot, &scenario.calibration).map_err(stage("calibrate"))?;
    let export = FilterExport::new(&calibrations, scenario.n, &scenario.calibration);
    Ok(FileCalibration { calibrations, export })
}

pub fn calibrate_from_file(capture_path: &Path, cfg: &ScenarioConfig) -> Result<FileCalibration, HarnessError> {
    let captures = capture::read_capture(capture_path)?;
    calibrate_captures(cfg, &captures)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub pre: NullformReport,
    pub post: NullformReport,
}

/// Scores exported filters against a ground-truth ensemble.
pub fn evaluate_filters(
    cfg: &ScenarioConfig,
    ensemble: &ImpairmentEnsemble,
    filters: &FilterExport,
) -> Result<Evaluation, HarnessError> {
    let scenario = cfg.scenario()?;
    if ensemble.num_channels() != scenario.m || filters.channels.len() != scenario.m {
        return Err(HarnessError::Data(format!(
            "config expects {} channels, ensemble has {} and filters {}",
            scenario.m,
            ensemble.num_channels(),
            filters.channels.len()
        )));
    }
    if ensemble.dft_size() != scenario.n || filters.n != scenario.n {
        return Err(HarnessError::Data(format!(
            "config expects n = {}, ensemble has {} and filters {}",
            scenario.n,
            ensemble.dft_size(),
            filters.n
        )));
    }
    let score = || -> selfcal_core::Result<Evaluation> {
        let channels = ensemble.responses()?;
        let responses = filters.responses()?;
        let pilot = scenario.pilot()?;
        let bins = scenario.eval_bins.resolve(scenario.n, pilot.spec.active_bins())?;
        let geom = scenario.geometry()?;
        let (t0, t1) = (scenario.theta0_deg, scenario.theta1_deg);
        Ok(Evaluation {
            pre: evaluate(None, &channels, geom, t0, t1, &bins)?,
            post: evaluate(Some(&responses), &channels, geom, t0, t1, &bins)?,
        })
    };
    score().map_err(stage("evaluate"))
}

/// Everything produced by [`run_scenario`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: Summary,
    pub calibrations: Vec<ChannelCalibration>,
    pub pre: NullformReport,
    pub post: NullformReport,
    pub onestage: Option<NullformReport>,
}

#[derive(Serialize)]
struct Reports<'a> {
    note: &'static str,
    pre: &'a NullformReport,
    post: &'a NullformReport,
    onestage: Option<&'a NullformReport>,
}

#[derive(Serialize)]
struct EstimateRecord {
    channel: usize,
    ell: i64,
    eps: f64,
    tau: f64,
    phi: f64,
    peak_magnitude: f64,
    kappa_step: f64,
}

fn angle_grid(step: f64) -> Vec<f64> {
    let count = (180.0 / step).round() as usize;
    (0..=count).map(|i| (-90.0 + i as f64 * step).min(90.0)).collect()
}

fn patterns(
    b: &[selfcal_core::C64],
    resp: &EqualizedResponse,
    bins: &[usize],
    grid: &[f64],
) -> selfcal_core::Result<Vec<Beampattern>> {
    bins.iter().map(|&k| beampattern(b, resp, k, grid)).collect()
}

struct Log(String);

impl Log {
    fn line(&mut self, text: impl AsRef<str>) {
        self.0.push_str(text.as_ref());
        self.0.push('\n');
    }
}

/// Simulate, calibrate and evaluate one scenario, persisting every artifact
/// in `dir`. An `INCOMPLETE` marker stays behind if any stage fails.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutput, HarnessError> {
    let scenario = cfg.scenario()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write_file(&marker, b"run in progress\n")?;
    let mut log = Log(String::new());
    match run_stages(cfg, &scenario, dir, &mut log) {
        Ok(out) => {
            log.line("status: complete");
            write_file(&dir.join("run.log"), log.0.as_bytes())?;
            fs::remove_file(&marker).map_err(io_err(&marker))?;
            Ok(out)
        }
        Err(e) => {
            log.line(format!("status: failed: {e}"));
            let _ = write_atomic(&dir.join("run.log"), log.0.as_bytes());
            let _ = write_atomic(&marker, format!("{e}\n").as_bytes());
            Err(e)
        }
    }
}

fn run_stages(cfg: &ScenarioConfig, scenario: &Scenario, dir: &Path, log: &mut Log) -> Result<RunOutput, HarnessError> {
    log.line(format!(
        "scenario {}: N={} M={} mode={:?} sigma2={:e} seeds pilot={} impairments={} noise={}",
        cfg.name.as_deref().unwrap_or("unnamed"),
        scenario.n,
        scenario.m,
        scenario.calibration.mode,
        scenario.sigma2,
        scenario.pilot_seed,
        scenario.impairment_seed,
        scenario.noise_seed
    ));

    let (_, ensemble, captures) = simulate(cfg)?;
    write_simulation(dir, cfg, &ensemble, &captures, false)?;
    log.line(format!("simulate: {} channels x {} samples", captures.num_channels(), captures.len()));

    let FileCalibration { calibrations, export } = calibrate_captures(cfg, &captures)?;
    let estimates: Vec<EstimateRecord> = calibrations
        .iter()
        .enumerate()
        .map(|(m, c)| EstimateRecord {
            channel: m,
            ell: c.estimate.ell,
            eps: c.estimate.eps,
            tau: c.estimate.tau,
            phi: c.estimate.phi,
            peak_magnitude: c.estimate.peak_magnitude,
            kappa_step: c.estimate.kappa_step,
        })
        .collect();
    write_json(&dir.join("estimates.json"), &estimates)?;
    write_json(&dir.join("filters.json"), &export)?;
    for (e, truth) in estimates.iter().zip(&ensemble.channels) {
        log.line(format!(
            "calibrate: channel {} tau_hat={:.4} (true {:.4}) phi_hat={:.4} (true {:.4})",
            e.channel, e.tau, truth.tau, e.phi, truth.phi
        ));
    }

    let pilot = scenario.pilot().map_err(stage("pilot"))?;
    let onestage_responses = if scenario.onestage && scenario.calibration.mode == CompensationMode::Fir {
        let eqs = onestage_array(&captures, &pilot, &scenario.calibration).map_err(stage("onestage"))?;
        let resp = eqs
            .iter()
            .map(|q| fir_response(&q.taps, scenario.n))
            .collect::<selfcal_core::Result<Vec<_>>>()
            .map_err(stage("onestage"))?;
        Some(resp)
    } else {
        None
    };

    let evaluated = || -> selfcal_core::Result<_> {
        let channels = ensemble.responses()?;
        let bins = scenario.eval_bins.resolve(scenario.n, pilot.spec.active_bins())?;
        let geom = scenario.geometry()?;
        let (t0, t1) = (scenario.theta0_deg, scenario.theta1_deg);
        let post_f: Vec<Spectrum> = calibrations.iter().map(|c| c.response.clone()).collect();
        let pre = evaluate(None, &channels, geom, t0, t1, &bins)?;
        let post = evaluate(Some(&post_f), &channels, geom, t0, t1, &bins)?;
        let onestage = onestage_responses
            .as_deref()
            .map(|f| evaluate(Some(f), &channels, geom, t0, t1, &bins))
            .transpose()?;

        let b = nullform_vector(&geom, t0, t1)?;
        let grid = angle_grid(cfg.evaluation.angle_step_deg);
        let pb = &cfg.evaluation.beampattern_bins;
        let pre_bp = patterns(&b, &EqualizedResponse::uncalibrated(&channels, geom)?, pb, &grid)?;
        let post_bp = patterns(&b, &EqualizedResponse::from_parts(&post_f, &channels, geom)?, pb, &grid)?;
        let onestage_bp = match &onestage_responses {
            Some(f) => patterns(&b, &EqualizedResponse::from_parts(f, &channels, geom)?, pb, &grid)?,
            None => Vec::new(),
        };
        Ok((pre, post, onestage, [pre_bp, post_bp, onestage_bp]))
    };
    let (pre, post, onestage, bps) = evaluated().map_err(stage("evaluate"))?;

    write_json(
        &dir.join("report.json"),
        &Reports {
            note: RATIO_NOTE,
            pre: &pre,
            post: &post,
            onestage: onestage.as_ref(),
        },
    )?;
    write_csv(&dir.join("q_per_bin.csv"), |b| {
        export::write_per_bin_csv(b, &pre, &post, onestage.as_ref())
    })?;
    for (label, bp) in ["pre", "post", "onestage"].iter().zip(&bps) {
        if !bp.is_empty() {
            write_csv(&dir.join(format!("beampattern_{label}.csv")), |b| export::write_beampattern_csv(b, bp))?;
        }
    }

    let summary = Summary {
        name: cfg.name.clone(),
        n: scenario.n,
        m: scenario.m,
        mode: scenario.calibration.mode,
        pilot_seed: scenario.pilot_seed,
        impairment_seed: scenario.impairment_seed,
        noise_seed: scenario.noise_seed,
        sigma2: scenario.sigma2,
        theta0_deg: scenario.theta0_deg,
        theta1_deg: scenario.theta1_deg,
        bins_evaluated: pre.bins.len(),
        pre: Scores::from(&pre),
        post: Scores::from(&post),
        onestage: onestage.as_ref().map(Scores::from),
        note: RATIO_NOTE.into(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    let mut line = format!(
        "evaluate: {} bins, Q_pre {:.2} dB, Q_post {:.2} dB",
        summary.bins_evaluated, summary.pre.q_avg_db, summary.post.q_avg_db
    );
    if let Some(o) = &summary.onestage {
        let _ = write!(line, ", Q_onestage {:.2} dB", o.q_avg_db);
    }
    log.line(line);

    Ok(RunOutput {
        dir: dir.to_path_buf(),
        summary,
        calibrations,
        pre,
        post,
        onestage,
    })
}

/// Seven logarithmically spaced noise powers from 1e-8 to 1e-2.
pub fn default_sweep() -> Vec<f64> {
    log_space(1e-8, 1e-2, 7).expect("valid range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Rank correlation of post-calibration `Q̄` with `σ²`.
    pub spearman_post: f64,
}

pub fn run_noise_sweep(cfg: &ScenarioConfig, sigma2_list: &[f64], dir: Option<&Path>) -> Result<SweepOutput, HarnessError> {
    let scenario = cfg.scenario()?;
    if let Some(bad) = sigma2_list.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(ConfigError::Field {
            field: "sigma2",
            message: format!("{bad} is not a finite value >= 0"),
        }
        .into());
    }
    let rows = noise_sweep(&scenario, sigma2_list).map_err(stage("sweep"))?;
    let spearman_post = if rows.len() >= 2 {
        let s: Vec<f64> = rows.iter().map(|r| r.sigma2).collect();
        let q: Vec<f64> = rows.iter().map(|r| r.q_post_db).collect();
        spearman(&s, &q).map_err(stage("sweep"))?
    } else {
        0.0
    };
    if let Some(dir) = dir {
        write_file(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
        write_csv(&dir.join("sweep.csv"), |b| export::write_sweep_csv(b, &rows))?;
    }
    Ok(SweepOutput { rows, spearman_post })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Evaluates the configured thresholds against a run summary.
pub fn check_summary(summary: &Summary, check: &CheckSection) -> Vec<CheckLine> {
    let mut out = Vec::new();
    let mut push = |name, value: f64, threshold, passed: bool| {
        out.push(CheckLine {
            name,
            value,
            threshold,
            passed,
        })
    };
    if let Some(t) = check.max_post_db {
        push("post_q_avg_db <= threshold", summary.post.q_avg_db, t, summary.post.q_avg_db <= t);
    }
    if let Some(t) = check.min_pre_db {
        push("pre_q_avg_db >= threshold", summary.pre.q_avg_db, t, summary.pre.q_avg_db >= t);
    }
    if let Some(t) = check.min_improvement_db {
        let v = summary.pre.q_avg_db - summary.post.q_avg_db;
        push("pre - post >= threshold", v, t, v >= t);
    }
    if let Some(t) = check.min_onestage_gap_db {
        let v = summary.onestage.map_or(f64::NAN, |o| o.q_avg_db - summary.post.q_avg_db);
        push("onestage - post >= threshold", v, t, v >= t);
    }
    if let Some(t) = check.min_std_reduction_db {
        let v = summary.pre.q_std_db - summary.post.q_std_db;
        push("std_pre - std_post >= threshold", v, t, v >= t);
    }
    out
}
