//! Regularized least-squares FIR equalizer.
//!
//! Minimizes `‖g0 − diag(Ĝ)·A·q‖² + λ‖A·q‖²` over the active bins, where
//! `[A]_{k,n} = exp(−j2πkn/N)`. The normal matrix
//! `B = Aᴴ·diag(|Ĝ|² + λ)·A` is Hermitian Toeplitz, so it is built from
//! `2L − 1` weighted sums and solved with a Cholesky factorization.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{solve_hpd, Matrix};
use crate::signal::{delay_phasor, ComplexSequence, Spectrum};
use crate::{Error, Result, C64};

/// Systems with a larger condition estimate are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EqualizerConfig {
    /// Number of taps `L_q`.
    pub taps: usize,
    /// Regularization weight `λ >= 0`.
    pub lambda: f64,
    /// Linear target gain `G0 > 0`.
    pub g0: f64,
    /// Bins included in the cost; the rest are unobservable and ignored.
    pub active_bins: Vec<usize>,
    /// Bulk delay of the target response in samples. Zero targets the flat
    /// `G0` exactly; a centered delay lets a causal filter realize a
    /// two-sided inverse.
    pub delay: f64,
}

impl EqualizerConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::invalid("equalizer needs at least one tap"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.g0 > 0.0 && self.g0.is_finite()) {
            return Err(Error::invalid(format!("target gain must be > 0, got {}", self.g0)));
        }
        if !self.delay.is_finite() {
            return Err(Error::invalid("non-finite target delay"));
        }
        if self.active_bins.is_empty() {
            return Err(Error::invalid("equalizer has no active bins"));
        }
        if let Some(&k) = self.active_bins.iter().find(|&&k| k >= n) {
            return Err(Error::invalid(format!("active bin {k} out of range for N = {n}")));
        }
        if self.taps > self.active_bins.len() {
            return Err(Error::invalid(format!(
                "{} taps exceed the {} active bins",
                self.taps,
                self.active_bins.len()
            )));
        }
        Ok(())
    }

    /// Target response `G0·exp(−j2πk̃·delay/N)` at bin `k`.
    pub fn target(&self, k: usize, n: usize) -> C64 {
        delay_phasor(k, n, self.delay) * self.g0
    }
}

/// Equalizer taps with the target delay they were designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer {
    pub taps: ComplexSequence,
    pub delay: f64,
    pub condition: f64,
}

impl Equalizer {
    /// Single unit tap, zero delay.
    pub fn identity() -> Self {
        Self {
            taps: ComplexSequence::impulse(1, 0).expect("length 1"),
            delay: 0.0,
            condition: 1.0,
        }
    }
}

/// `exp(+j2π·m/N)` with `m` reduced modulo `N` first.
fn unit(m: i64, n: usize) -> C64 {
    let r = m.rem_euclid(n as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

pub fn design_equalizer(g_hat: &Spectrum, cfg: &EqualizerConfig) -> Result<Equalizer> {
    let n = g_hat.len();
    cfg.validate(n)?;
    let taps = cfg.taps as i64;

    // B[i][j] = t[i − j], t[d] = Σ_k (|Ĝ_k|² + λ)·exp(+j2πkd/N).
    let toeplitz: Vec<C64> = (-(taps - 1)..taps)
        .map(|d| {
            cfg.active_bins
                .iter()
                .map(|&k| unit(k as i64 * d, n) * (g_hat[k].norm_sqr() + cfg.lambda))
                .sum()
        })
        .collect();
    let offset = (taps - 1) as usize;
    let b = Matrix::from_fn(cfg.taps, |i, j| toeplitz[offset + i - j]);

    // rhs[i] = Σ_k exp(+j2πki/N)·conj(Ĝ_k)·g0_k
    let rhs: Vec<C64> = (0..taps)
        .map(|i| {
            cfg.active_bins
                .iter()
                .map(|&k| unit(k as i64 * i, n) * g_hat[k].conj() * cfg.target(k, n))
                .sum()
        })
        .collect();

    let sol = solve_hpd(&b, &rhs, MAX_CONDITION)?;
    Ok(Equalizer {
        taps: ComplexSequence::new(sol.x)?,
        delay: cfg.delay,
        condition: sol.condition,
    })
}

/// The least-squares cost the equalizer minimizes, evaluated for `taps`.
pub fn equalizer_cost(g_hat: &Spectrum, cfg: &EqualizerConfig, taps: &[C64]) -> f64 {
    let n = g_hat.len();
    cfg.active_bins
        .iter()
        .map(|&k| {
            let aq: C64 = taps
                .iter()
                .enumerate()
                .map(|(i, q)| q * unit(-((k * i) as i64), n))
                .sum();
            (cfg.target(k, n) - g_hat[k] * aq).norm_sqr() + cfg.lambda * aq.norm_sqr()
        })
        .sum()
}

/// Single-stage baseline: the same least-squares design applied to the raw
/// channel estimate, with no timing or phase pre-compensation.
pub fn design_onestage_baseline(h: &Spectrum, length: usize, cfg: &EqualizerConfig) -> Result<Equalizer> {
    let cfg = EqualizerConfig {
        taps: length,
        ..cfg.clone()
    };
    design_equalizer(h, &cfg)
}
