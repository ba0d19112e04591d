//! Frequency-domain QPSK calibration pilot.
//!
//! The pilot is defined bin by bin: every active bin carries a unit-modulus
//! QPSK symbol and every other bin is zero. The time-domain waveform is the
//! IDFT of that spectrum, so `Y[k]·X*[k]` isolates the channel response on
//! active bins exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::{idft, ComplexSequence, Spectrum};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PilotSpec {
    n: usize,
    active_bins: Vec<usize>,
    seed: u64,
}

impl PilotSpec {
    /// Active bins are sorted and de-duplicated.
    pub fn new(n: usize, mut active_bins: Vec<usize>, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("pilot DFT size must be positive"));
        }
        active_bins.sort_unstable();
        active_bins.dedup();
        if active_bins.is_empty() {
            return Err(Error::invalid("pilot has no active bins"));
        }
        if let Some(&k) = active_bins.last().filter(|&&k| k >= n) {
            return Err(Error::invalid(format!("active bin {k} out of range for N = {n}")));
        }
        Ok(Self { n, active_bins, seed })
    }

    /// Every bin active.
    pub fn full_band(n: usize, seed: u64) -> Result<Self> {
        Self::new(n, (0..n).collect(), seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn active_bins(&self) -> &[usize] {
        &self.active_bins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Pilot waveform in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    pub spec: PilotSpec,
    pub time: ComplexSequence,
    pub spectrum: Spectrum,
}

impl Pilot {
    /// Boolean activity mask over all `N` bins.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.spec.n];
        for &k in &self.spec.active_bins {
            mask[k] = true;
        }
        mask
    }
}

/// Draws one QPSK symbol `exp(jπ(2q+1)/4)` per active bin, in ascending bin
/// order, from a ChaCha8 stream seeded with the pilot seed.
pub fn generate_pilot(spec: &PilotSpec) -> Result<Pilot> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut bins = vec![C64::new(0.0, 0.0); spec.n];
    for &k in &spec.active_bins {
        let q: u32 = rng.gen_range(0..4);
        bins[k] = C64::from_polar(1.0, FRAC_PI_4 * (2 * q + 1) as f64);
    }
    let spectrum = Spectrum::new(bins)?;
    let time = idft(&spectrum)?;
    Ok(Pilot {
        spec: spec.clone(),
        time,
        spectrum,
    })
}

/// Two equal blocks of active bins on either side of `N/2`, excluding `N/2`
/// itself. For `N = 1024` this is `[412, 511] ∪ [513, 612]`; other sizes scale
/// the 100-bin block width proportionally.
pub fn experimental_mask(n: usize) -> Result<Vec<usize>> {
    if n < 16 {
        return Err(Error::invalid(format!("experimental mask needs N >= 16, got {n}")));
    }
    let width = ((100 * n + 512) / 1024).max(1);
    let center = n / 2;
    let mut bins: Vec<usize> = (center - width..center).collect();
    bins.extend(center + 1..=center + width);
    Ok(bins)
}
