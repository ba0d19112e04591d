//! Scenario configuration files.
//!
//! TOML with one table per concern. Unknown keys are rejected, dB-valued
//! fields carry a `_db` suffix and the target gain is given either as
//! linear `g0` or as `g0_db`, never both.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use selfcal_core::array::Severity;
use selfcal_core::calibration::{CalibrationConfig, CompensationMode, SearchWindow, WindowKind};
use selfcal_core::experiment::{BandMode, EvalBins, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
    #[error("unknown preset {0:?} (available: paper-sim, paper-experiment, ideal)")]
    UnknownPreset(String),
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub channels: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            channels: 8,
            spacing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Full,
    Experimental,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotSection {
    pub n: usize,
    pub band: BandKind,
    /// Active bins when `band = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<Vec<usize>>,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self {
            n: 1024,
            band: BandKind::Full,
            bins: None,
            seed: 1,
            repetitions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpairmentSection {
    pub severity: Severity,
    pub seed: u64,
}

impl Default for ImpairmentSection {
    fn default() -> Self {
        Self {
            severity: Severity::Default,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma2: 1e-6, seed: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub fd_taps: usize,
    pub eq_taps: usize,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0_db: Option<f64>,
    pub kappa_step: f64,
    pub window: WindowKind,
    pub mode: CompensationMode,
    /// Equalizer target delay; defaults to `(eq_taps - 1) / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq_delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_start: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_end: Option<i64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            fd_taps: 81,
            eq_taps: 33,
            lambda: 1e-3,
            g0: None,
            g0_db: None,
            kappa_step: 0.01,
            window: WindowKind::Hamming,
            mode: CompensationMode::Fir,
            eq_delay: None,
            search_start: None,
            search_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Active,
    Central,
    List,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub theta0_deg: f64,
    pub theta1_deg: f64,
    pub bins: EvalKind,
    /// Fraction of the band kept when `bins = "central"`.
    pub central_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_list: Option<Vec<usize>>,
    pub onestage: bool,
    /// Bins for which beampatterns are exported.
    pub beampattern_bins: Vec<usize>,
    pub angle_step_deg: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            theta0_deg: 25.0,
            theta1_deg: 0.0,
            bins: EvalKind::Active,
            central_fraction: 0.8,
            bin_list: None,
            onestage: true,
            beampattern_bins: Vec::new(),
            angle_step_deg: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Thresholds enforced by `check`. Absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_post_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_pre_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_improvement_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_onestage_gap_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_std_reduction_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub array: ArraySection,
    pub pilot: PilotSection,
    pub impairments: ImpairmentSection,
    pub noise: NoiseSection,
    pub calibration: CalibrationSection,
    pub evaluation: EvaluationSection,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSection>,
}

const PRESETS: [(&str, &str); 3] = [
    ("paper-sim", include_str!("../presets/paper-sim.toml")),
    ("paper-experiment", include_str!("../presets/paper-experiment.toml")),
    ("ideal", include_str!("../presets/ideal.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::UnknownPreset(name.into()))?;
        Self::parse(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Linear target gain.
    pub fn g0(&self) -> f64 {
        match (self.calibration.g0, self.calibration.g0_db) {
            (Some(g), _) => g,
            (None, Some(db)) => 10f64.powf(db / 20.0),
            (None, None) => 1.0,
        }
    }

    pub fn eq_delay(&self) -> f64 {
        self.calibration
            .eq_delay
            .unwrap_or((self.calibration.eq_taps.saturating_sub(1) / 2) as f64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.array;
        if a.channels < 2 {
            return Err(field_err("array.channels", "null forming needs at least 2 channels"));
        }
        if a.channels > u16::MAX as usize {
            return Err(field_err("array.channels", "at most 65535 channels"));
        }
        if !(a.spacing > 0.0 && a.spacing.is_finite()) {
            return Err(field_err("array.spacing", "must be positive"));
        }

        let p = &self.pilot;
        if p.n < 16 || p.n > 1 << 16 {
            return Err(field_err("pilot.n", format!("{} outside [16, 65536]", p.n)));
        }
        if p.repetitions == 0 {
            return Err(field_err("pilot.repetitions", "must be at least 1"));
        }
        match (p.band, &p.bins) {
            (BandKind::Custom, None) => {
                return Err(field_err("pilot.bins", "required when band = \"custom\""));
            }
            (BandKind::Custom, Some(bins)) => {
                if bins.is_empty() {
                    return Err(field_err("pilot.bins", "must not be empty"));
                }
                if let Some(k) = bins.iter().find(|&&k| k >= p.n) {
                    return Err(field_err("pilot.bins", format!("bin {k} not below n = {}", p.n)));
                }
            }
            (_, Some(_)) => {
                return Err(field_err("pilot.bins", "only allowed when band = \"custom\""));
            }
            _ => {}
        }

        if !(self.noise.sigma2 >= 0.0 && self.noise.sigma2.is_finite()) {
            return Err(field_err("noise.sigma2", "must be a finite value >= 0"));
        }

        let c = &self.calibration;
        if c.fd_taps < 3 || c.fd_taps.is_multiple_of(2) {
            return Err(field_err("calibration.fd_taps", format!("{} must be odd and >= 3", c.fd_taps)));
        }
        if c.eq_taps == 0 {
            return Err(field_err("calibration.eq_taps", "must be at least 1"));
        }
        if !(c.lambda >= 0.0 && c.lambda.is_finite()) {
            return Err(field_err("calibration.lambda", "must be a finite value >= 0"));
        }
        match (c.g0, c.g0_db) {
            (Some(_), Some(_)) => {
                return Err(field_err("calibration.g0", "give either g0 (linear) or g0_db, not both"));
            }
            (Some(g), None) if !(g > 0.0 && g.is_finite()) => {
                return Err(field_err("calibration.g0", "linear target gain must be positive"));
            }
            (None, Some(db)) if !db.is_finite() => {
                return Err(field_err("calibration.g0_db", "must be finite"));
            }
            _ => {}
        }
        if !(c.kappa_step > 0.0 && c.kappa_step <= 0.5) {
            return Err(field_err("calibration.kappa_step", "must lie in (0, 0.5]"));
        }
        if let Some(d) = c.eq_delay {
            if !d.is_finite() {
                return Err(field_err("calibration.eq_delay", "must be finite"));
            }
        }
        match (c.search_start, c.search_end) {
            (Some(s), Some(e)) if e <= s => {
                return Err(field_err("calibration.search_end", "must exceed search_start"));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(field_err("calibration.search_start", "give both search_start and search_end"));
            }
            _ => {}
        }

        let e = &self.evaluation;
        for (name, t) in [("evaluation.theta0_deg", e.theta0_deg), ("evaluation.theta1_deg", e.theta1_deg)] {
            if !(-90.0..=90.0).contains(&t) {
                return Err(field_err(name, format!("{t} outside [-90, 90]")));
            }
        }
        if e.theta0_deg == e.theta1_deg {
            return Err(field_err("evaluation.theta1_deg", "null direction equals the steering direction"));
        }
        if !(e.central_fraction > 0.0 && e.central_fraction <= 1.0) {
            return Err(field_err("evaluation.central_fraction", "must lie in (0, 1]"));
        }
        match (e.bins, &e.bin_list) {
            (EvalKind::List, None) => {
                return Err(field_err("evaluation.bin_list", "required when bins = \"list\""));
            }
            (EvalKind::List, Some(list)) if list.is_empty() || list.iter().any(|&k| k >= p.n) => {
                return Err(field_err("evaluation.bin_list", format!("must be non-empty with bins below {}", p.n)));
            }
            (EvalKind::Active | EvalKind::Central, Some(_)) => {
                return Err(field_err("evaluation.bin_list", "only allowed when bins = \"list\""));
            }
            _ => {}
        }
        if let Some(k) = e.beampattern_bins.iter().find(|&&k| k >= p.n) {
            return Err(field_err("evaluation.beampattern_bins", format!("bin {k} not below n = {}", p.n)));
        }
        if !(e.angle_step_deg > 0.0 && e.angle_step_deg <= 10.0) {
            return Err(field_err("evaluation.angle_step_deg", "must lie in (0, 10]"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let band = match self.pilot.band {
            BandKind::Full => BandMode::Full,
            BandKind::Experimental => BandMode::Experimental,
            BandKind::Custom => BandMode::Custom(self.pilot.bins.clone().unwrap_or_default()),
        };
        let eval_bins = match self.evaluation.bins {
            EvalKind::Active => EvalBins::Active,
            EvalKind::Central => EvalBins::Central(self.evaluation.central_fraction),
            EvalKind::List => EvalBins::List(self.evaluation.bin_list.clone().unwrap_or_default()),
        };
        let c = &self.calibration;
        let search = match (c.search_start, c.search_end) {
            (Some(start), Some(end)) => Some(SearchWindow { start, end }),
            _ => None,
        };
        Ok(Scenario {
            n: self.pilot.n,
            m: self.array.channels,
            spacing: self.array.spacing,
            band,
            pilot_seed: self.pilot.seed,
            severity: self.impairments.severity,
            impairment_seed: self.impairments.seed,
            sigma2: self.noise.sigma2,
            noise_seed: self.noise.seed,
            repetitions: self.pilot.repetitions,
            theta0_deg: self.evaluation.theta0_deg,
            theta1_deg: self.evaluation.theta1_deg,
            eval_bins,
            calibration: CalibrationConfig {
                fd_taps: c.fd_taps,
                eq_taps: c.eq_taps,
                lambda: c.lambda,
                g0: self.g0(),
                kappa_step: c.kappa_step,
                window: c.window,
                search,
                mode: c.mode,
                eq_delay: self.eq_delay(),
            },
            onestage: self.evaluation.onestage,
        })
    }
}
