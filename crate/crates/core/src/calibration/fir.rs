//! Fractional-delay compensator, filter composition and application.

use alloc::format;
use alloc::vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::equalizer::Equalizer;
use super::estimate::OffsetEstimate;
use crate::signal::{convolve, dft, hamming_at, ComplexSequence, ConvolutionMode, Spectrum};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WindowKind {
    #[default]
    Hamming,
    Rectangular,
}

impl WindowKind {
    fn at(self, x: f64, len: usize) -> f64 {
        match self {
            WindowKind::Hamming => hamming_at(x, len),
            WindowKind::Rectangular => {
                if (0.0..=(len - 1) as f64).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Timing/phase compensation stage `d[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalDelay {
    pub taps: ComplexSequence,
    /// Fixed latency `(L_d - 1)/2` added by the center-tap shift.
    pub latency: usize,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc compensator approximating `exp(+j2πk̃τ̂/N)·exp(-jφ̂)` up to
/// the fixed latency `c = (L_d - 1)/2`.
///
/// `d[n] = exp(-jφ̂)·sinc(n - c + τ̂)·w(n + ℓ̂)`: the sinc peak sits at
/// `c - τ̂` and the window follows the integer part so that an integer
/// estimate yields an exact shifted impulse.
pub fn design_fractional_delay(est: &OffsetEstimate, len: usize, window: WindowKind) -> Result<FractionalDelay> {
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::invalid(format!("fractional-delay length must be odd and >= 3, got {len}")));
    }
    let center = (len - 1) / 2;
    if est.ell.unsigned_abs() as usize + 1 >= center || !est.tau.is_finite() {
        return Err(Error::invalid(format!(
            "timing estimate {} does not fit a {len}-tap compensator",
            est.tau
        )));
    }
    let rot = C64::from_polar(1.0, -est.phi);
    let taps = (0..len)
        .map(|n| {
            let x = n as f64 - center as f64 + est.tau;
            rot * (sinc(x) * window.at(n as f64 + est.ell as f64, len))
        })
        .collect();
    Ok(FractionalDelay {
        taps: ComplexSequence::new(taps)?,
        latency: center,
    })
}

/// Samples the DTFT of `taps` on the `n` DFT bins. Taps beyond `n` fold
/// back modulo `n`, which leaves the bin values exact.
pub fn fir_response(taps: &[C64], n: usize) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::invalid("response size must be positive"));
    }
    let mut folded = vec![C64::new(0.0, 0.0); n];
    for (i, t) in taps.iter().enumerate() {
        folded[i % n] += t;
    }
    dft(&folded)
}

/// Complete per-channel compensator `f = q * d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationFilter {
    pub d_taps: ComplexSequence,
    pub q_taps: ComplexSequence,
    pub f_taps: ComplexSequence,
    pub g0: f64,
    /// Total fixed latency in samples shared by every channel.
    pub latency: f64,
}

pub fn compose_filter(d: &FractionalDelay, q: &Equalizer, g0: f64) -> Result<CalibrationFilter> {
    let f = convolve(&q.taps, &d.taps, ConvolutionMode::Linear)?;
    Ok(CalibrationFilter {
        d_taps: d.taps.clone(),
        q_taps: q.taps.clone(),
        f_taps: f,
        g0,
        latency: d.latency as f64 + q.delay,
    })
}

/// `ỹ = f * y`. Circular mode suits frame-synchronous pilot processing,
/// linear mode streaming data.
pub fn apply_filter(taps: &[C64], y: &[C64], mode: ConvolutionMode) -> Result<ComplexSequence> {
    convolve(y, taps, mode)
}
