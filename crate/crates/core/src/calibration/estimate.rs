//! Timing and phase offset estimation by fractional-shift matched filtering.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::wrap_phase;
use crate::signal::{delay_phasor, ComplexSequence, DftPlan, Spectrum};
use crate::{Error, Result, C64};

/// Estimated offsets of one channel. `tau == ell + eps` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OffsetEstimate {
    /// Integer part of the timing offset, as a signed lag.
    pub ell: i64,
    /// Fractional part in `[-0.5, 0.5]`.
    pub eps: f64,
    pub tau: f64,
    /// Phase offset in `(-π, π]`.
    pub phi: f64,
    pub peak_magnitude: f64,
    pub kappa_step: f64,
}

impl OffsetEstimate {
    /// A zero offset estimate, useful as an identity compensator.
    pub fn zero() -> Self {
        Self {
            ell: 0,
            eps: 0.0,
            tau: 0.0,
            phi: 0.0,
            peak_magnitude: 1.0,
            kappa_step: 0.0,
        }
    }

    /// Builds an estimate from a timing offset by rounding to the nearest
    /// integer lag.
    pub fn from_tau_phi(tau: f64, phi: f64) -> Self {
        let ell = tau.round();
        Self {
            ell: ell as i64,
            eps: tau - ell,
            tau,
            phi: wrap_phase(phi),
            peak_magnitude: 1.0,
            kappa_step: 0.0,
        }
    }
}

/// Half-open range of signed lags `[start, end)` searched for the peak.
/// Lag `l` reads matched-filter sample `l mod N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchWindow {
    pub start: i64,
    pub end: i64,
}

impl SearchWindow {
    /// `[-N/4, N/4)`: unambiguous for `|τ| < N/4`.
    pub fn centered(n: usize) -> Self {
        let q = (n / 4) as i64;
        Self { start: -q, end: q.max(1) }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.end <= self.start || (self.end - self.start) as u128 > n as u128 {
            return Err(Error::invalid(format!(
                "search window [{}, {}) must be non-empty and span at most N = {n} lags",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

fn check_pilot_bins(x: &Spectrum) -> Result<()> {
    for (k, v) in x.iter().enumerate() {
        let mag = v.norm();
        if mag > 1e-9 && (mag - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("pilot bin {k} has magnitude {mag}, expected 0 or 1")));
        }
    }
    Ok(())
}

fn check_sizes(y: &Spectrum, x: &Spectrum) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::invalid(format!(
            "observation has {} bins, pilot has {}",
            y.len(),
            x.len()
        )));
    }
    Ok(())
}

fn shifted_correlation(yx: &[C64], kappa: f64, plan: &DftPlan, out: &mut Vec<C64>) {
    let n = yx.len();
    out.clear();
    out.extend(
        yx.iter()
            .enumerate()
            .map(|(k, v)| v * delay_phasor(k, n, kappa)),
    );
    plan.inverse(out);
}

/// `c[n] = (1/N) Σ_k Y[k]·exp(-j2πk̃κ/N)·X*[k]·exp(j2πkn/N)`.
pub fn matched_filter(y: &Spectrum, x: &Spectrum, kappa: f64) -> Result<ComplexSequence> {
    check_sizes(y, x)?;
    check_pilot_bins(x)?;
    let yx: Vec<C64> = y.iter().zip(x.iter()).map(|(a, b)| a * b.conj()).collect();
    let plan = DftPlan::new(yx.len())?;
    let mut out = Vec::with_capacity(yx.len());
    shifted_correlation(&yx, kappa, &plan, &mut out);
    ComplexSequence::new(out)
}

/// Grid of fractional-shift hypotheses `{j·step : |j·step| <= 0.5}`.
pub fn kappa_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::invalid(format!("kappa step {step} outside (0, 0.5]")));
    }
    let half = (0.5 / step + 1e-9).floor() as i64;
    Ok((-half..=half).map(|j| j as f64 * step).collect())
}

/// Exhaustive search over `(lag, κ)` for the largest matched-filter peak.
///
/// Returns `ℓ̂` = winning lag, `ε̂ = -κ`, and `φ̂` = phase of the winning
/// peak. Equal peaks (within 1e-12 relative) resolve to the smallest `|lag|`
/// and then the smallest `|κ|`.
pub fn estimate_offsets(
    y: &Spectrum,
    x: &Spectrum,
    kappa_step: f64,
    window: SearchWindow,
) -> Result<OffsetEstimate> {
    check_sizes(y, x)?;
    check_pilot_bins(x)?;
    let n = y.len();
    window.validate(n)?;
    let grid = kappa_grid(kappa_step)?;

    let yx: Vec<C64> = y.iter().zip(x.iter()).map(|(a, b)| a * b.conj()).collect();
    if yx.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::EstimationFailed(
            "observation has no energy on the pilot bins".into(),
        ));
    }

    let plan = DftPlan::new(n)?;
    let mut buf = Vec::with_capacity(n);
    // (magnitude, lag, kappa, peak value)
    let mut best: Option<(f64, i64, f64, C64)> = None;
    for &kappa in &grid {
        shifted_correlation(&yx, kappa, &plan, &mut buf);
        for lag in window.start..window.end {
            let v = buf[lag.rem_euclid(n as i64) as usize];
            let mag = v.norm();
            let better = match best {
                None => true,
                Some((bm, bl, bk, _)) => {
                    let tol = 1e-12 * bm;
                    if mag > bm + tol {
                        true
                    } else if mag >= bm - tol {
                        (lag.abs(), kappa.abs()) < (bl.abs(), bk.abs())
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((mag, lag, kappa, v));
            }
        }
    }

    let (mag, ell, kappa, peak) = best.expect("non-empty grid and window");
    if mag.is_nan() || mag <= 0.0 {
        return Err(Error::EstimationFailed("matched filter has no peak".into()));
    }
    let eps = -kappa;
    Ok(OffsetEstimate {
        ell,
        eps,
        tau: ell as f64 + eps,
        phi: wrap_phase(peak.arg()),
        peak_magnitude: mag,
        kappa_step,
    })
}
