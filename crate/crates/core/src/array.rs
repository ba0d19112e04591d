//! Uniform linear array geometry and per-channel hardware impairments.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::{delay_phasor, Spectrum};
use crate::{Error, Result, C64};

/// Uniform linear array with the phase reference at the first element.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArrayGeometry {
    num_channels: usize,
    /// Element spacing in carrier wavelengths.
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_channels: usize, spacing: f64) -> Result<Self> {
        if num_channels == 0 {
            return Err(Error::invalid("array needs at least one channel"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("element spacing must be positive, got {spacing}")));
        }
        Ok(Self {
            num_channels,
            spacing,
        })
    }

    /// Half-wavelength ULA.
    pub fn half_wavelength(num_channels: usize) -> Result<Self> {
        Self::new(num_channels, 0.5)
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `a_m(θ) = exp(-j2π·d·m·sin θ)` for `m = 0..M`, with `θ` in degrees
    /// from broadside.
    pub fn steering_vector(&self, theta_deg: f64) -> Result<Vec<C64>> {
        if !(-90.0..=90.0).contains(&theta_deg) {
            return Err(Error::invalid(format!("steering angle {theta_deg} deg outside [-90, 90]")));
        }
        let phase_step = -2.0 * PI * self.spacing * (theta_deg * PI / 180.0).sin();
        Ok((0..self.num_channels)
            .map(|m| C64::from_polar(1.0, phase_step * m as f64))
            .collect())
    }
}

/// Ground-truth timing, phase and gain-curve offsets of one receive chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelImpairment {
    /// Timing offset in samples, may be fractional.
    pub tau: f64,
    /// Phase offset in radians, in `(-π, π]`.
    pub phi: f64,
    /// Real positive gain per DFT bin.
    pub gain_curve: Vec<f64>,
}

impl ChannelImpairment {
    pub fn new(tau: f64, phi: f64, gain_curve: Vec<f64>) -> Result<Self> {
        let imp = Self {
            tau,
            phi: wrap_phase(phi),
            gain_curve,
        };
        imp.validate()?;
        Ok(imp)
    }

    /// No delay, no phase rotation, unit gain on every bin.
    pub fn ideal(n: usize) -> Self {
        Self {
            tau: 0.0,
            phi: 0.0,
            gain_curve: alloc::vec![1.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gain_curve.len();
        if n == 0 {
            return Err(Error::invalid("empty gain curve"));
        }
        if let Some(k) = self.gain_curve.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::invalid(format!("gain curve must be finite and positive (bin {k})")));
        }
        if !self.tau.is_finite() || self.tau.abs() * 4.0 >= n as f64 {
            return Err(Error::invalid(format!(
                "timing offset {} must satisfy |tau| < N/4 = {}",
                self.tau,
                n as f64 / 4.0
            )));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("non-finite phase offset"));
        }
        Ok(())
    }

    /// `H[k] = G[k]·exp(-j2πk̃τ/N)·exp(jφ)`.
    pub fn response(&self, n: usize) -> Result<Spectrum> {
        if self.gain_curve.len() != n {
            return Err(Error::invalid(format!(
                "gain curve has {} bins, expected {n}",
                self.gain_curve.len()
            )));
        }
        let rot = C64::from_polar(1.0, self.phi);
        let bins = self
            .gain_curve
            .iter()
            .enumerate()
            .map(|(k, &g)| delay_phasor(k, n, self.tau) * rot * g)
            .collect();
        Spectrum::new(bins)
    }
}

/// Maps an angle onto `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Impairment generation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Severity {
    /// Every channel ideal.
    None,
    /// `τ ~ U[-2, 2]`, `φ ~ U(-π, π]`, gain offset `U[-1.5, 1.5]` dB and a
    /// three-harmonic cosine ripple of at most 3 dB peak-to-peak.
    #[default]
    Default,
}

/// Per-channel impairments of a whole array, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpairmentEnsemble {
    pub channels: Vec<ChannelImpairment>,
    pub seed: u64,
    pub severity: Severity,
}

impl ImpairmentEnsemble {
    pub fn ideal(m: usize, n: usize) -> Self {
        Self {
            channels: (0..m).map(|_| ChannelImpairment::ideal(n)).collect(),
            seed: 0,
            severity: Severity::None,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// DFT size implied by the gain curves.
    pub fn dft_size(&self) -> usize {
        self.channels.first().map_or(0, |c| c.gain_curve.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::invalid("ensemble has no channels"));
        }
        let n = self.dft_size();
        for (m, ch) in self.channels.iter().enumerate() {
            if ch.gain_curve.len() != n {
                return Err(Error::invalid("gain curves differ in length").in_channel(m));
            }
            ch.validate().map_err(|e| e.in_channel(m))?;
        }
        Ok(())
    }

    pub fn responses(&self) -> Result<Vec<Spectrum>> {
        let n = self.dft_size();
        self.channels
            .iter()
            .enumerate()
            .map(|(m, ch)| ch.response(n).map_err(|e| e.in_channel(m)))
            .collect()
    }
}

const MAX_RIPPLE_DB: f64 = 3.0;
const MIN_RIPPLE_DB: f64 = 0.5;
const TAU_RANGE: f64 = 2.0;
const GAIN_OFFSET_DB: f64 = 1.5;

/// Draws an ensemble of `m` channels over an `n`-bin DFT.
pub fn sample_ensemble(m: usize, n: usize, seed: u64, severity: Severity) -> Result<ImpairmentEnsemble> {
    if m == 0 {
        return Err(Error::invalid("ensemble needs at least one channel"));
    }
    if n < 8 {
        return Err(Error::invalid(format!("DFT size {n} below minimum of 8")));
    }
    if severity == Severity::None {
        let mut ens = ImpairmentEnsemble::ideal(m, n);
        ens.seed = seed;
        return Ok(ens);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Keeps |tau| < N/4 for the smallest DFT sizes.
    let tau_max = TAU_RANGE.min(n as f64 / 4.0 - 1e-6);
    let channels = (0..m)
        .map(|_| {
            let tau = rng.gen_range(-tau_max..=tau_max);
            let phi = wrap_phase(rng.gen_range(-PI..PI));
            let offset_db = rng.gen_range(-GAIN_OFFSET_DB..=GAIN_OFFSET_DB);
            let amps: [f64; 3] = core::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let phases: [f64; 3] = core::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
            let target_db = rng.gen_range(MIN_RIPPLE_DB..MAX_RIPPLE_DB);
            let shape: Vec<f64> = (0..n)
                .map(|k| {
                    (0..3)
                        .map(|p| {
                            let harmonic = (p + 1) as f64;
                            amps[p] * (2.0 * PI * harmonic * k as f64 / n as f64 + phases[p]).cos()
                        })
                        .sum()
                })
                .collect();
            let scale = ripple_scale(&shape, target_db);
            let g0 = 10f64.powf(offset_db / 20.0);
            let gain_curve = shape.iter().map(|s| g0 * (1.0 + scale * s)).collect();
            ChannelImpairment {
                tau,
                phi,
                gain_curve,
            }
        })
        .collect();
    let ens = ImpairmentEnsemble {
        channels,
        seed,
        severity,
    };
    ens.validate()?;
    Ok(ens)
}

fn ripple_db(shape: &[f64], scale: f64) -> f64 {
    let (lo, hi) = shape.iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| {
        let g = 1.0 + scale * s;
        (lo.min(g), hi.max(g))
    });
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        20.0 * (hi / lo).log10()
    }
}

/// Largest scale whose ripple `1 + scale·shape` stays within `target_db`
/// peak-to-peak. Ripple grows monotonically with scale, so bisection works.
fn ripple_scale(shape: &[f64], target_db: f64) -> f64 {
    let peak = shape.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 0.999 / peak);
    if ripple_db(shape, hi) <= target_db {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ripple_db(shape, mid) <= target_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
