//! JSON and CSV artifacts.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use selfcal_core::calibration::{fir_response, CalibrationConfig, ChannelCalibration, CompensationMode};
use selfcal_core::experiment::SweepRow;
use selfcal_core::nullform::{Beampattern, NullformReport};
use selfcal_core::signal::Spectrum;
use selfcal_core::{Result as CoreResult, C64};

pub const FILTER_FORMAT: &str = "selfcal-filters";
pub const FILTER_VERSION: u32 = 1;

/// Per-channel compensation record for loading into external radios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecord {
    pub channel: usize,
    pub tau: f64,
    /// Radians.
    pub phi: f64,
    pub ell: i64,
    pub eps: f64,
    pub peak_magnitude: f64,
    /// Composed FIR taps `f` as `[re, im]` pairs (FIR mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<[f64; 2]>>,
    /// Per-bin compensation over all `n` bins (direct-frequency mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterExport {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub mode: CompensationMode,
    pub fd_taps: usize,
    pub eq_taps: usize,
    pub g0: f64,
    pub lambda: f64,
    /// Fixed latency in samples shared by all channels.
    pub latency: f64,
    pub channels: Vec<ChannelRecord>,
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl FilterExport {
    pub fn new(cals: &[ChannelCalibration], n: usize, cfg: &CalibrationConfig) -> Self {
        let channels = cals
            .iter()
            .enumerate()
            .map(|(m, c)| ChannelRecord {
                channel: m,
                tau: c.estimate.tau,
                phi: c.estimate.phi,
                ell: c.estimate.ell,
                eps: c.estimate.eps,
                peak_magnitude: c.estimate.peak_magnitude,
                taps: c.filter.as_ref().map(|f| pairs(&f.f_taps)),
                response: c.filter.is_none().then(|| pairs(&c.response)),
            })
            .collect();
        Self {
            format: FILTER_FORMAT.into(),
            version: FILTER_VERSION,
            n,
            mode: cfg.mode,
            fd_taps: cfg.fd_taps,
            eq_taps: cfg.eq_taps,
            g0: cfg.g0,
            lambda: cfg.lambda,
            latency: cfg.latency(),
            channels,
        }
    }

    /// Compensator frequency responses on the `n`-bin grid.
    pub fn responses(&self) -> CoreResult<Vec<Spectrum>> {
        self.channels
            .iter()
            .map(|r| match (&r.taps, &r.response) {
                (Some(t), _) => fir_response(&complex(t), self.n),
                (None, Some(resp)) => Spectrum::new(complex(resp)),
                (None, None) => Err(selfcal_core::Error::InvalidArgument(format!(
                    "filter record {} has neither taps nor response",
                    r.channel
                ))),
            })
            .collect()
    }
}

/// Scalar scores of one report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub q_avg_db: f64,
    pub q_std_db: f64,
}

impl From<&NullformReport> for Scores {
    fn from(r: &NullformReport) -> Self {
        Self {
            q_avg_db: r.q_avg_db,
            q_std_db: r.q_std_db,
        }
    }
}

/// Machine-readable run summary. Contains nothing time-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: Option<String>,
    pub n: usize,
    pub m: usize,
    pub mode: CompensationMode,
    pub pilot_seed: u64,
    pub impairment_seed: u64,
    pub noise_seed: u64,
    pub sigma2: f64,
    pub theta0_deg: f64,
    pub theta1_deg: f64,
    pub bins_evaluated: usize,
    pub pre: Scores,
    pub post: Scores,
    pub onestage: Option<Scores>,
    /// Ratios are null power over desired power: lower is better.
    pub note: String,
}

pub const RATIO_NOTE: &str = "Q = null-direction power / desired-direction power; more negative dB is better";

/// `bin, q_pre_db, q_post_db[, q_onestage_db]`.
pub fn write_per_bin_csv<W: Write>(
    mut out: W,
    pre: &NullformReport,
    post: &NullformReport,
    onestage: Option<&NullformReport>,
) -> io::Result<()> {
    write!(out, "bin,q_pre_db,q_post_db")?;
    if onestage.is_some() {
        write!(out, ",q_onestage_db")?;
    }
    writeln!(out)?;
    for (i, k) in pre.bins.iter().enumerate() {
        write!(out, "{k},{},{}", pre.q_per_bin_db[i], post.q_per_bin_db[i])?;
        if let Some(o) = onestage {
            write!(out, ",{}", o.q_per_bin_db[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `theta_deg` followed by normalized dB and raw power columns per bin.
pub fn write_beampattern_csv<W: Write>(mut out: W, patterns: &[Beampattern]) -> io::Result<()> {
    let Some(first) = patterns.first() else {
        return Ok(());
    };
    write!(out, "theta_deg")?;
    for p in patterns {
        write!(out, ",k{}_db", p.bin)?;
    }
    for p in patterns {
        write!(out, ",k{}_power", p.bin)?;
    }
    writeln!(out)?;
    for (i, t) in first.theta_deg.iter().enumerate() {
        write!(out, "{t}")?;
        for p in patterns {
            write!(out, ",{}", p.normalized_db[i])?;
        }
        for p in patterns {
            write!(out, ",{}", p.power[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(
        out,
        "sigma2,q_pre_db,q_post_db,q_onestage_db,std_pre_db,std_post_db,std_onestage_db"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.sigma2,
            r.q_pre_db,
            r.q_post_db,
            opt(r.q_onestage_db),
            r.std_pre_db,
            r.std_post_db,
            opt(r.std_onestage_db)
        )?;
    }
    Ok(())
}
