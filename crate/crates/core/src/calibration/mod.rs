//! Offset estimation, compensator design and per-array orchestration.
//!
//! The two-stage compensator first removes the estimated timing and phase
//! offset with a fractional-delay FIR `d`, then flattens what remains with a
//! least-squares equalizer `q` designed on `Ĝ = D·Ĥ`. The composed filter
//! is `f = q * d`. Alternatively the same estimates can be applied directly
//! in the frequency domain, which suits masked-band pilots.

mod equalizer;
mod estimate;
mod fir;

use alloc::vec::Vec;

pub use equalizer::{
    design_equalizer, design_onestage_baseline, equalizer_cost, Equalizer, EqualizerConfig, MAX_CONDITION,
};
pub use estimate::{estimate_offsets, kappa_grid, matched_filter, OffsetEstimate, SearchWindow};
pub use fir::{
    apply_filter, compose_filter, design_fractional_delay, fir_response, CalibrationFilter, FractionalDelay,
    WindowKind,
};

use crate::pilot::Pilot;
use crate::signal::{delay_phasor, Spectrum};
use crate::sim::CaptureSet;
use crate::{Error, Result, C64};

/// Smallest `|Ĝ[k]|` the direct-frequency path divides by.
pub const DIVISION_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CompensationMode {
    /// Time-domain two-stage FIR `f = q * d`.
    #[default]
    Fir,
    /// Per-bin correction `D[k]·G0/Ĝ[k]` on the active bins.
    DirectFrequency,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationConfig {
    /// Fractional-delay length `L_d` (odd).
    pub fd_taps: usize,
    /// Equalizer length `L_q`.
    pub eq_taps: usize,
    pub lambda: f64,
    /// Linear target gain.
    pub g0: f64,
    pub kappa_step: f64,
    pub window: WindowKind,
    /// Peak search range; `None` selects [`SearchWindow::centered`].
    pub search: Option<SearchWindow>,
    pub mode: CompensationMode,
    /// Target delay of the equalizer stage in samples.
    pub eq_delay: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            fd_taps: 81,
            eq_taps: 33,
            lambda: 1e-3,
            g0: 1.0,
            kappa_step: 0.01,
            window: WindowKind::Hamming,
            search: None,
            mode: CompensationMode::Fir,
            eq_delay: 16.0,
        }
    }
}

impl CalibrationConfig {
    fn equalizer(&self, pilot: &Pilot) -> EqualizerConfig {
        EqualizerConfig {
            taps: self.eq_taps,
            lambda: self.lambda,
            g0: self.g0,
            active_bins: pilot.spec.active_bins().to_vec(),
            delay: self.eq_delay,
        }
    }

    /// Latency added by the composed compensator, identical for all channels.
    pub fn latency(&self) -> f64 {
        match self.mode {
            CompensationMode::Fir => ((self.fd_taps - 1) / 2) as f64 + self.eq_delay,
            CompensationMode::DirectFrequency => 0.0,
        }
    }
}

/// Everything derived for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCalibration {
    pub estimate: OffsetEstimate,
    /// Raw channel estimate `Ĥ = Y·X*`.
    pub h_hat: Spectrum,
    /// Residual response after offset removal, `Ĝ = D·Ĥ`.
    pub g_hat: Spectrum,
    /// Time-domain compensator; `None` in direct-frequency mode.
    pub filter: Option<CalibrationFilter>,
    /// Compensator frequency response `F[k]` on all `N` bins.
    pub response: Spectrum,
}

/// `Ĥ[k] = Y[k]·X*[k]`, zero off the pilot bins.
pub fn channel_estimate(y: &Spectrum, pilot: &Pilot) -> Result<Spectrum> {
    if y.len() != pilot.spectrum.len() {
        return Err(Error::invalid("observation and pilot sizes differ"));
    }
    Spectrum::new(y.iter().zip(pilot.spectrum.iter()).map(|(a, x)| a * x.conj()).collect())
}

/// Ideal offset correction `exp(+j2πk̃τ̂/N)·exp(−jφ̂)`.
fn ideal_correction(k: usize, n: usize, est: &OffsetEstimate) -> C64 {
    delay_phasor(k, n, -est.tau) * C64::from_polar(1.0, -est.phi)
}

/// Per-bin compensation `F[k] = D[k]·G0/Ĝ[k]` on `active`, zero elsewhere.
pub fn direct_response(est: &OffsetEstimate, g_hat: &Spectrum, g0: f64, active: &[usize]) -> Result<Spectrum> {
    let n = g_hat.len();
    let mut f = alloc::vec![C64::new(0.0, 0.0); n];
    for &k in active {
        if k >= n {
            return Err(Error::invalid("active bin out of range"));
        }
        let mag = g_hat[k].norm();
        if mag.is_nan() || mag < DIVISION_GUARD {
            return Err(Error::DivisionGuard { bin: k, magnitude: mag });
        }
        f[k] = ideal_correction(k, n, est) * g0 / g_hat[k];
    }
    Spectrum::new(f)
}

/// `Ỹ[k] = Y[k]·exp(+j2πk̃τ̂/N)·exp(−jφ̂)·G0/Ĝ[k]` on the active bins.
pub fn direct_frequency_compensation(
    y: &Spectrum,
    est: &OffsetEstimate,
    g_hat: &Spectrum,
    g0: f64,
    active: &[usize],
) -> Result<Spectrum> {
    if y.len() != g_hat.len() {
        return Err(Error::invalid("observation and gain estimate sizes differ"));
    }
    let f = direct_response(est, g_hat, g0, active)?;
    Spectrum::new(y.iter().zip(f.iter()).map(|(a, b)| a * b).collect())
}

pub fn calibrate_channel(y: &Spectrum, pilot: &Pilot, cfg: &CalibrationConfig) -> Result<ChannelCalibration> {
    let n = y.len();
    let h_hat = channel_estimate(y, pilot)?;
    let window = cfg.search.unwrap_or_else(|| SearchWindow::centered(n));
    let estimate = estimate_offsets(y, &pilot.spectrum, cfg.kappa_step, window)?;
    if !(cfg.g0 > 0.0 && cfg.g0.is_finite()) {
        return Err(Error::invalid("target gain must be positive"));
    }

    match cfg.mode {
        CompensationMode::Fir => {
            let d = design_fractional_delay(&estimate, cfg.fd_taps, cfg.window)?;
            let dr = fir_response(&d.taps, n)?;
            // Strip the center-tap latency so Ĝ carries only the residual.
            let g_hat = Spectrum::new(
                (0..n)
                    .map(|k| dr[k] * h_hat[k] * delay_phasor(k, n, -(d.latency as f64)))
                    .collect(),
            )?;
            let q = design_equalizer(&g_hat, &cfg.equalizer(pilot))?;
            let filter = compose_filter(&d, &q, cfg.g0)?;
            let response = fir_response(&filter.f_taps, n)?;
            Ok(ChannelCalibration {
                estimate,
                h_hat,
                g_hat,
                filter: Some(filter),
                response,
            })
        }
        CompensationMode::DirectFrequency => {
            let g_hat =
                Spectrum::new((0..n).map(|k| ideal_correction(k, n, &estimate) * h_hat[k]).collect())?;
            let response = direct_response(&estimate, &g_hat, cfg.g0, pilot.spec.active_bins())?;
            Ok(ChannelCalibration {
                estimate,
                h_hat,
                g_hat,
                filter: None,
                response,
            })
        }
    }
}

fn check_captures(captures: &CaptureSet, pilot: &Pilot) -> Result<Vec<Spectrum>> {
    if captures.len() != pilot.spec.n() {
        return Err(Error::invalid(alloc::format!(
            "captures have {} samples per channel, pilot has N = {}",
            captures.len(),
            pilot.spec.n()
        )));
    }
    captures.spectra()
}

/// Calibrates every channel independently. Failures carry the channel index.
pub fn calibrate_array(captures: &CaptureSet, pilot: &Pilot, cfg: &CalibrationConfig) -> Result<Vec<ChannelCalibration>> {
    check_captures(captures, pilot)?
        .iter()
        .enumerate()
        .map(|(m, y)| calibrate_channel(y, pilot, cfg).map_err(|e| e.in_channel(m)))
        .collect()
}

/// Single-stage baseline of length `L_d + L_q − 1` designed on the raw
/// estimate `Ĥ` with a zero-delay target.
pub fn onestage_array(captures: &CaptureSet, pilot: &Pilot, cfg: &CalibrationConfig) -> Result<Vec<Equalizer>> {
    let eq = EqualizerConfig {
        delay: 0.0,
        ..cfg.equalizer(pilot)
    };
    let length = cfg.fd_taps + cfg.eq_taps - 1;
    check_captures(captures, pilot)?
        .iter()
        .enumerate()
        .map(|(m, y)| {
            channel_estimate(y, pilot)
                .and_then(|h| design_onestage_baseline(&h, length, &eq))
                .map_err(|e| e.in_channel(m))
        })
        .collect()
}
