//! End-to-end simulated scenarios: impair, observe, calibrate, evaluate.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::{sample_ensemble, ArrayGeometry, ImpairmentEnsemble, Severity};
use crate::calibration::{
    calibrate_array, fir_response, onestage_array, CalibrationConfig, ChannelCalibration, CompensationMode, Equalizer,
};
use crate::nullform::{nulling_ratio, nullform_vector, EqualizedResponse, NullformReport};
use crate::pilot::{experimental_mask, generate_pilot, Pilot, PilotSpec};
use crate::signal::{signed_bin, Spectrum};
use crate::sim::{simulate_selfcal, CaptureSet, NoiseSpec};
use crate::{Error, Result};

/// Which bins carry the pilot.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BandMode {
    #[default]
    Full,
    /// Two 100-bin blocks around `N/2` (scaled for other `N`).
    Experimental,
    Custom(Vec<usize>),
}

impl BandMode {
    pub fn bins(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            BandMode::Full => Ok((0..n).collect()),
            BandMode::Experimental => experimental_mask(n),
            BandMode::Custom(bins) => Ok(bins.clone()),
        }
    }
}

/// Which bins enter the nulling statistics.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvalBins {
    /// Every pilot bin.
    #[default]
    Active,
    /// Pilot bins with `|k̃| <= fraction·N/2`.
    Central(f64),
    List(Vec<usize>),
}

impl EvalBins {
    pub fn resolve(&self, n: usize, active: &[usize]) -> Result<Vec<usize>> {
        let bins: Vec<usize> = match self {
            EvalBins::Active => active.to_vec(),
            EvalBins::Central(fraction) => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::invalid(format!("central fraction {fraction} outside (0, 1]")));
                }
                let limit = fraction * n as f64 / 2.0;
                active.iter().copied().filter(|&k| signed_bin(k, n).abs() <= limit).collect()
            }
            EvalBins::List(bins) => {
                if let Some(k) = bins.iter().find(|&&k| k >= n) {
                    return Err(Error::invalid(format!("evaluation bin {k} out of range for N = {n}")));
                }
                bins.clone()
            }
        };
        if bins.is_empty() {
            return Err(Error::invalid("no evaluation bins selected"));
        }
        Ok(bins)
    }
}

/// Complete description of one simulated run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    pub spacing: f64,
    pub band: BandMode,
    pub pilot_seed: u64,
    pub severity: Severity,
    pub impairment_seed: u64,
    pub sigma2: f64,
    pub noise_seed: u64,
    pub repetitions: usize,
    pub theta0_deg: f64,
    pub theta1_deg: f64,
    pub eval_bins: EvalBins,
    pub calibration: CalibrationConfig,
    /// Also design and score the single-stage baseline.
    pub onestage: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 1024,
            m: 8,
            spacing: 0.5,
            band: BandMode::Full,
            pilot_seed: 1,
            severity: Severity::Default,
            impairment_seed: 1,
            sigma2: 1e-6,
            noise_seed: 2,
            repetitions: 4,
            theta0_deg: 25.0,
            theta1_deg: 0.0,
            eval_bins: EvalBins::Active,
            calibration: CalibrationConfig::default(),
            onestage: true,
        }
    }
}

impl Scenario {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m, self.spacing)
    }

    pub fn pilot(&self) -> Result<Pilot> {
        generate_pilot(&PilotSpec::new(self.n, self.band.bins(self.n)?, self.pilot_seed)?)
    }

    pub fn ensemble(&self) -> Result<ImpairmentEnsemble> {
        sample_ensemble(self.m, self.n, self.impairment_seed, self.severity)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.sigma2, self.noise_seed)
    }
}

/// Artifacts and scores of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub ensemble: ImpairmentEnsemble,
    pub pilot: Pilot,
    pub captures: CaptureSet,
    pub calibrations: Vec<ChannelCalibration>,
    pub onestage: Option<Vec<Equalizer>>,
    pub eval_bins: Vec<usize>,
    pub pre: NullformReport,
    pub post: NullformReport,
    pub onestage_report: Option<NullformReport>,
}

/// Scores compensator responses against the true channels.
pub fn evaluate(
    compensators: Option<&[Spectrum]>,
    channels: &[Spectrum],
    geometry: ArrayGeometry,
    theta0_deg: f64,
    theta1_deg: f64,
    bins: &[usize],
) -> Result<NullformReport> {
    let resp = match compensators {
        Some(f) => EqualizedResponse::from_parts(f, channels, geometry)?,
        None => EqualizedResponse::uncalibrated(channels, geometry)?,
    };
    let b = nullform_vector(&geometry, theta0_deg, theta1_deg)?;
    nulling_ratio(&b, &resp, theta0_deg, theta1_deg, bins)
}

/// Calibrates pre-recorded captures of a known ensemble and scores them.
pub fn run_with_captures(
    scenario: &Scenario,
    ensemble: ImpairmentEnsemble,
    pilot: Pilot,
    captures: CaptureSet,
) -> Result<Outcome> {
    let geometry = scenario.geometry()?;
    if ensemble.num_channels() != scenario.m || captures.num_channels() != scenario.m {
        return Err(Error::invalid(format!(
            "scenario has {} channels, ensemble {} and captures {}",
            scenario.m,
            ensemble.num_channels(),
            captures.num_channels()
        )));
    }
    let channels = ensemble.responses()?;
    let eval_bins = scenario.eval_bins.resolve(scenario.n, pilot.spec.active_bins())?;
    let (t0, t1) = (scenario.theta0_deg, scenario.theta1_deg);

    let calibrations = calibrate_array(&captures, &pilot, &scenario.calibration)?;
    let responses: Vec<Spectrum> = calibrations.iter().map(|c| c.response.clone()).collect();
    let pre = evaluate(None, &channels, geometry, t0, t1, &eval_bins)?;
    let post = evaluate(Some(&responses), &channels, geometry, t0, t1, &eval_bins)?;

    let (onestage, onestage_report) = if scenario.onestage && scenario.calibration.mode == CompensationMode::Fir {
        let eqs = onestage_array(&captures, &pilot, &scenario.calibration)?;
        let resp = eqs
            .iter()
            .map(|q| fir_response(&q.taps, scenario.n))
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(Some(&resp), &channels, geometry, t0, t1, &eval_bins)?;
        (Some(eqs), Some(report))
    } else {
        (None, None)
    };

    Ok(Outcome {
        ensemble,
        pilot,
        captures,
        calibrations,
        onestage,
        eval_bins,
        pre,
        post,
        onestage_report,
    })
}

pub fn run(scenario: &Scenario) -> Result<Outcome> {
    let ensemble = scenario.ensemble()?;
    let pilot = scenario.pilot()?;
    let captures = simulate_selfcal(&pilot, &ensemble, None, &scenario.noise()?, scenario.repetitions)?;
    run_with_captures(scenario, ensemble, pilot, captures)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub sigma2: f64,
    pub q_pre_db: f64,
    pub q_post_db: f64,
    pub q_onestage_db: Option<f64>,
    pub std_pre_db: f64,
    pub std_post_db: f64,
    pub std_onestage_db: Option<f64>,
}

/// One full run per noise power, rows sorted by ascending `σ²`.
pub fn noise_sweep(scenario: &Scenario, sigma2_list: &[f64]) -> Result<Vec<SweepRow>> {
    if sigma2_list.is_empty() {
        return Err(Error::invalid("empty noise-power list"));
    }
    let mut sorted = sigma2_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|sigma2| {
            let s = Scenario {
                sigma2,
                ..scenario.clone()
            };
            let out = run(&s)?;
            Ok(SweepRow {
                sigma2,
                q_pre_db: out.pre.q_avg_db,
                q_post_db: out.post.q_avg_db,
                q_onestage_db: out.onestage_report.as_ref().map(|r| r.q_avg_db),
                std_pre_db: out.pre.q_std_db,
                std_post_db: out.post.q_std_db,
                std_onestage_db: out.onestage_report.as_ref().map(|r| r.q_std_db),
            })
        })
        .collect()
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(Error::invalid("log_space needs 0 < lo <= hi and count >= 1"));
    }
    if count == 1 {
        return Ok(alloc::vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length series of at least 2 points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}
