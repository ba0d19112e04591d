//! Single-null projection beamformer and nulling-ratio statistics.
//!
//! Ratios are power at the nulled direction over power at the desired
//! direction, so more negative dB means a deeper null.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::ArrayGeometry;
use crate::signal::Spectrum;
use crate::{Error, Result, C64};

/// Floor applied before converting powers to dB.
pub const DB_FLOOR: f64 = 1e-40;

pub fn to_db(power: f64) -> f64 {
    10.0 * power.max(DB_FLOOR).log10()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `b = a(θ0) − (a(θ1)ᴴa(θ0) / ‖a(θ1)‖²)·a(θ1)`, so that `bᴴa(θ1) = 0`.
pub fn nullform_vector(geom: &ArrayGeometry, theta0_deg: f64, theta1_deg: f64) -> Result<Vec<C64>> {
    let a0 = geom.steering_vector(theta0_deg)?;
    let a1 = geom.steering_vector(theta1_deg)?;
    let coef = inner(&a1, &a0) / inner(&a1, &a1).re;
    let b: Vec<C64> = a0.iter().zip(&a1).map(|(x, y)| x - coef * y).collect();
    let norm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if theta0_deg == theta1_deg || norm < 1e-9 * (geom.num_channels() as f64).sqrt() {
        return Err(Error::DegenerateProjection);
    }
    Ok(b)
}

/// Per-channel equalized responses `F_m[k]·H_m[k]` on a common bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedResponse {
    eta: Vec<Spectrum>,
    geometry: ArrayGeometry,
}

impl EqualizedResponse {
    pub fn new(eta: Vec<Spectrum>, geometry: ArrayGeometry) -> Result<Self> {
        if eta.len() != geometry.num_channels() {
            return Err(Error::invalid(format!(
                "{} responses for a {}-element array",
                eta.len(),
                geometry.num_channels()
            )));
        }
        let n = eta[0].len();
        if eta.iter().any(|e| e.len() != n) {
            return Err(Error::invalid("equalized responses differ in length"));
        }
        Ok(Self { eta, geometry })
    }

    /// `F_m[k]·H_m[k]` from compensator and channel responses.
    pub fn from_parts(compensators: &[Spectrum], channels: &[Spectrum], geometry: ArrayGeometry) -> Result<Self> {
        if compensators.len() != channels.len() {
            return Err(Error::invalid("compensator and channel counts differ"));
        }
        let eta = compensators
            .iter()
            .zip(channels)
            .map(|(f, h)| {
                if f.len() != h.len() {
                    return Err(Error::invalid("compensator and channel sizes differ"));
                }
                Spectrum::new(f.iter().zip(h.iter()).map(|(a, b)| a * b).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(eta, geometry)
    }

    /// Uncompensated array: `F ≡ 1`.
    pub fn uncalibrated(channels: &[Spectrum], geometry: ArrayGeometry) -> Result<Self> {
        Self::new(channels.to_vec(), geometry)
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn num_bins(&self) -> usize {
        self.eta[0].len()
    }

    pub fn channel(&self, m: usize) -> &Spectrum {
        &self.eta[m]
    }

    /// `η(θ, k)` with components `F_m[k]·H_m[k]·a_m(θ)`.
    pub fn eta(&self, theta_deg: f64, k: usize) -> Result<Vec<C64>> {
        if k >= self.num_bins() {
            return Err(Error::invalid(format!("bin {k} outside the response")));
        }
        let a = self.geometry.steering_vector(theta_deg)?;
        Ok(self.eta.iter().zip(a).map(|(e, am)| e[k] * am).collect())
    }

    /// Array output power `|bᴴ·η(θ, k)|²`.
    pub fn power(&self, b: &[C64], theta_deg: f64, k: usize) -> Result<f64> {
        if b.len() != self.eta.len() {
            return Err(Error::invalid("beamformer length differs from channel count"));
        }
        Ok(inner(b, &self.eta(theta_deg, k)?).norm_sqr())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Beampattern {
    pub bin: usize,
    pub theta_deg: Vec<f64>,
    pub power: Vec<f64>,
    /// Power relative to the pattern's own maximum.
    pub normalized_db: Vec<f64>,
}

pub fn beampattern(b: &[C64], resp: &EqualizedResponse, k: usize, theta_grid: &[f64]) -> Result<Beampattern> {
    if theta_grid.is_empty() {
        return Err(Error::invalid("empty angle grid"));
    }
    let power = theta_grid
        .iter()
        .map(|&t| resp.power(b, t, k))
        .collect::<Result<Vec<_>>>()?;
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let normalized_db = power
        .iter()
        .map(|p| if peak > 0.0 { to_db(p / peak) } else { to_db(0.0) })
        .collect();
    Ok(Beampattern {
        bin: k,
        theta_deg: theta_grid.to_vec(),
        power,
        normalized_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NullformReport {
    pub theta0_deg: f64,
    pub theta1_deg: f64,
    pub bins: Vec<usize>,
    /// Linear `Q` per evaluated bin.
    pub q_linear: Vec<f64>,
    pub q_per_bin_db: Vec<f64>,
    /// Linear-domain mean of `Q`, in dB.
    pub q_avg_db: f64,
    /// Standard deviation of linear `Q` across bins, in dB.
    pub q_std_db: f64,
}

/// `Q(θ0, θ1, k) = |bᴴη(θ1, k)|² / |bᴴη(θ0, k)|²` over `bins`.
pub fn nulling_ratio(
    b: &[C64],
    resp: &EqualizedResponse,
    theta0_deg: f64,
    theta1_deg: f64,
    bins: &[usize],
) -> Result<NullformReport> {
    if bins.is_empty() {
        return Err(Error::invalid("no bins to evaluate"));
    }
    let mut q_linear = Vec::with_capacity(bins.len());
    for &k in bins {
        let desired = resp.power(b, theta0_deg, k)?;
        if desired.is_nan() || desired <= 0.0 {
            return Err(Error::ZeroDenominator { bin: k });
        }
        q_linear.push(resp.power(b, theta1_deg, k)? / desired);
    }
    let count = q_linear.len() as f64;
    let mean = q_linear.iter().sum::<f64>() / count;
    let var = q_linear.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / count;
    Ok(NullformReport {
        theta0_deg,
        theta1_deg,
        bins: bins.to_vec(),
        q_per_bin_db: q_linear.iter().map(|&q| to_db(q)).collect(),
        q_avg_db: to_db(mean),
        q_std_db: to_db(var.sqrt()),
        q_linear,
    })
}
