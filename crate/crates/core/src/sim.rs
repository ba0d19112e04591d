//! Synthetic receive-chain observations.
//!
//! Channels are modelled as circular convolutions: the pilot is transmitted
//! repeatedly, so a steady-state frame sees each channel as a multiplication
//! by `H_m[k]` in the DFT domain. Output samples are rounded to `f32`
//! precision, the resolution of the capture file format, so that a capture
//! survives a write/read cycle bit for bit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::array::{ArrayGeometry, ImpairmentEnsemble};
use crate::pilot::Pilot;
use crate::signal::{dft, idft, ComplexSequence, Spectrum};
use crate::{Error, Result, C64};

/// Additive white complex Gaussian noise with per-sample power `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("noise power must be >= 0, got {sigma2}")));
        }
        Ok(Self { sigma2, seed })
    }

    pub fn noiseless() -> Self {
        Self { sigma2: 0.0, seed: 0 }
    }

    /// One frame of noise for `(channel, frame)`.
    ///
    /// Each pair owns an independent ChaCha8 stream (stream id
    /// `channel << 32 | frame`) under the noise seed. Samples are drawn real
    /// part first, then imaginary part, in time order.
    pub fn frame(&self, channel: usize, frame: usize, len: usize) -> Vec<C64> {
        if self.sigma2 == 0.0 {
            return vec![C64::new(0.0, 0.0); len];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((channel as u64) << 32) | frame as u64);
        let normal = Normal::new(0.0, (self.sigma2 / 2.0).sqrt()).expect("finite std");
        (0..len)
            .map(|_| {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                C64::new(re, im)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Origin {
    Simulated,
    File,
}

/// Equal-length observations from every receive channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSet {
    channels: Vec<ComplexSequence>,
    /// Hz; metadata only.
    pub sample_rate: f64,
    pub origin: Origin,
    pub seed: u64,
}

impl CaptureSet {
    pub fn new(channels: Vec<ComplexSequence>, sample_rate: f64, origin: Origin, seed: u64) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(Error::invalid("capture set has no channels"));
        };
        let len = first.len();
        if let Some(m) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::invalid(format!(
                "channel {m} has {} samples, channel 0 has {len}",
                channels[m].len()
            )));
        }
        Ok(Self {
            channels,
            sample_rate,
            origin,
            seed,
        })
    }

    pub fn channels(&self) -> &[ComplexSequence] {
        &self.channels
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectra(&self) -> Result<Vec<Spectrum>> {
        self.channels.iter().map(|c| dft(c)).collect()
    }

    pub fn into_channels(self) -> Vec<ComplexSequence> {
        self.channels
    }
}

fn quantize(v: C64) -> C64 {
    C64::new(v.re as f32 as f64, v.im as f32 as f64)
}

/// Self-calibration loopback: `Y_m[k] = H_m[k]·H'[k]·X[k]` plus noise,
/// coherently averaged over `repetitions` frames.
pub fn simulate_selfcal(
    pilot: &Pilot,
    ensemble: &ImpairmentEnsemble,
    common_path: Option<&Spectrum>,
    noise: &NoiseSpec,
    repetitions: usize,
) -> Result<CaptureSet> {
    let n = pilot.spec.n();
    ensemble.validate()?;
    if ensemble.dft_size() != n {
        return Err(Error::invalid(format!(
            "ensemble gain curves have {} bins, pilot has N = {n}",
            ensemble.dft_size()
        )));
    }
    if let Some(h) = common_path {
        if h.len() != n {
            return Err(Error::invalid(format!("common path has {} bins, expected {n}", h.len())));
        }
    }
    if repetitions == 0 {
        return Err(Error::invalid("repetition count must be at least 1"));
    }

    let mut channels = Vec::with_capacity(ensemble.num_channels());
    for (m, h) in ensemble.responses()?.iter().enumerate() {
        let observed: Vec<C64> = pilot
            .spectrum
            .iter()
            .zip(h.iter())
            .enumerate()
            .map(|(k, (x, hk))| {
                let common = common_path.map_or(C64::new(1.0, 0.0), |c| c[k]);
                x * hk * common
            })
            .collect();
        let mut samples = idft(&observed)?.into_vec();
        if noise.sigma2 > 0.0 {
            let mut acc = vec![C64::new(0.0, 0.0); n];
            for r in 0..repetitions {
                for (a, w) in acc.iter_mut().zip(noise.frame(m, r, n)) {
                    *a += w;
                }
            }
            let scale = 1.0 / repetitions as f64;
            for (s, a) in samples.iter_mut().zip(acc) {
                *s += a * scale;
            }
        }
        channels.push(ComplexSequence::new(samples.into_iter().map(quantize).collect())?);
    }
    CaptureSet::new(channels, 1.0, Origin::Simulated, noise.seed)
}

/// Operational reception of a plane wave from `theta_deg`:
/// `r_m = a_m(θ)·(h_m ⊛ u) + w_m`.
pub fn simulate_planewave(
    theta_deg: f64,
    waveform: &ComplexSequence,
    ensemble: &ImpairmentEnsemble,
    geometry: &ArrayGeometry,
    noise: &NoiseSpec,
) -> Result<CaptureSet> {
    ensemble.validate()?;
    let n = waveform.len();
    if ensemble.dft_size() != n {
        return Err(Error::invalid(format!(
            "ensemble gain curves have {} bins, waveform has {n} samples",
            ensemble.dft_size()
        )));
    }
    if ensemble.num_channels() != geometry.num_channels() {
        return Err(Error::invalid(format!(
            "ensemble has {} channels, geometry has {}",
            ensemble.num_channels(),
            geometry.num_channels()
        )));
    }
    let steering = geometry.steering_vector(theta_deg)?;
    let u = dft(waveform)?;
    let mut channels = Vec::with_capacity(steering.len());
    for (m, (h, a)) in ensemble.responses()?.iter().zip(&steering).enumerate() {
        let spec: Vec<C64> = u.iter().zip(h.iter()).map(|(x, hk)| x * hk).collect();
        let w = noise.frame(m, 0, n);
        let samples = idft(&spec)?
            .iter()
            .zip(w)
            .map(|(s, w)| quantize(a * s + w))
            .collect();
        channels.push(ComplexSequence::new(samples)?);
    }
    CaptureSet::new(channels, 1.0, Origin::Simulated, noise.seed)
}
