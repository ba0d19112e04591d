//! Complex sequences and spectra, DFT/IDFT, convolution and windows.
//!
//! The forward transform is unnormalized and the inverse carries the `1/N`
//! factor. Any positive length is accepted: powers of two use an in-place
//! radix-2 FFT, other lengths go through Bluestein's chirp-z algorithm.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Deref;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

macro_rules! finite_complex_vec {
    ($(#[$meta:meta])* $name:ident, $field:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        #[cfg_attr(feature = "serde", serde(try_from = "Vec<C64>", into = "Vec<C64>"))]
        pub struct $name {
            $field: Vec<C64>,
        }

        impl $name {
            /// Wraps `values`, rejecting empty input and non-finite entries.
            pub fn new(values: Vec<C64>) -> Result<Self> {
                if values.is_empty() {
                    return Err(Error::invalid(concat!("empty ", $what)));
                }
                if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
                    return Err(Error::invalid(format!(concat!("non-finite value in ", $what, " at index {}"), i)));
                }
                Ok(Self { $field: values })
            }

            pub fn zeros(len: usize) -> Result<Self> {
                Self::new(vec![C64::new(0.0, 0.0); len])
            }

            pub fn len(&self) -> usize {
                self.$field.len()
            }

            /// Always false; kept for API symmetry with slices.
            pub fn is_empty(&self) -> bool {
                false
            }

            pub fn as_slice(&self) -> &[C64] {
                &self.$field
            }

            pub fn into_vec(self) -> Vec<C64> {
                self.$field
            }

            /// Sum of squared magnitudes.
            pub fn energy(&self) -> f64 {
                self.$field.iter().map(|v| v.norm_sqr()).sum()
            }
        }

        impl Deref for $name {
            type Target = [C64];
            fn deref(&self) -> &[C64] {
                &self.$field
            }
        }

        impl TryFrom<Vec<C64>> for $name {
            type Error = Error;
            fn try_from(values: Vec<C64>) -> Result<Self> {
                Self::new(values)
            }
        }

        impl From<$name> for Vec<C64> {
            fn from(value: $name) -> Vec<C64> {
                value.$field
            }
        }
    };
}

finite_complex_vec!(
    /// Time-domain complex baseband samples. Never empty, always finite.
    ComplexSequence,
    samples,
    "sequence"
);

finite_complex_vec!(
    /// Frequency-domain bins `k = 0..N`. Never empty, always finite.
    Spectrum,
    bins,
    "spectrum"
);

impl ComplexSequence {
    /// Unit impulse of length `len` at index `at`.
    pub fn impulse(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::invalid(format!("impulse position {at} outside length {len}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); len];
        v[at] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    /// Copy zero-padded (or truncated) to `len` samples.
    pub fn padded(&self, len: usize) -> Result<Self> {
        let mut v = self.samples.clone();
        v.resize(len, C64::new(0.0, 0.0));
        Self::new(v)
    }
}

impl Spectrum {
    /// Spectrum with every bin equal to one.
    pub fn ones(len: usize) -> Result<Self> {
        Self::new(vec![C64::new(1.0, 0.0); len])
    }
}

/// Signed frequency of bin `k` in an `n`-point DFT: `k` when `2k < n`,
/// otherwise `k - n`. The Nyquist bin of an even-length DFT maps to `-n/2`.
pub fn signed_bin(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// `exp(-j 2π k̃ τ / n)`: the response of a delay of `tau` samples at bin `k`.
pub fn delay_phasor(k: usize, n: usize, tau: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * signed_bin(k, n) * tau / n as f64)
}

/// A reusable transform of fixed length.
#[derive(Debug, Clone)]
pub struct DftPlan {
    n: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Single,
    Radix2 {
        twiddles: Vec<C64>,
        bitrev: Vec<usize>,
    },
    Bluestein {
        inner: Box<DftPlan>,
        chirp: Vec<C64>,
        kernel_fft: Vec<C64>,
    },
}

impl DftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("transform length must be positive"));
        }
        let kind = if n == 1 {
            PlanKind::Single
        } else if n.is_power_of_two() {
            let twiddles = (0..n / 2)
                .map(|k| C64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            let bits = n.trailing_zeros();
            let bitrev = (0..n)
                .map(|i| i.reverse_bits() >> (usize::BITS - bits))
                .collect();
            PlanKind::Radix2 { twiddles, bitrev }
        } else {
            let m = (2 * n - 1).next_power_of_two();
            let inner = DftPlan::new(m)?;
            // exp(-jπ k²/n); k² is reduced mod 2n to keep the angle small.
            let two_n = 2 * n as u128;
            let chirp: Vec<C64> = (0..n)
                .map(|k| {
                    let sq = ((k as u128 * k as u128) % two_n) as f64;
                    C64::from_polar(1.0, -PI * sq / n as f64)
                })
                .collect();
            let mut kernel = vec![C64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for k in 1..n {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            PlanKind::Bluestein {
                inner: Box::new(inner),
                chirp,
                kernel_fft: kernel,
            }
        };
        Ok(Self { n, kind })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place unnormalized forward transform.
    ///
    /// Panics if `data.len()` differs from the plan length.
    pub fn forward(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n, "buffer length does not match plan");
        match &self.kind {
            PlanKind::Single => {}
            PlanKind::Radix2 { twiddles, bitrev } => radix2(data, twiddles, bitrev),
            PlanKind::Bluestein {
                inner,
                chirp,
                kernel_fft,
            } => {
                let m = inner.len();
                let mut work = vec![C64::new(0.0, 0.0); m];
                for (w, (x, c)) in work.iter_mut().zip(data.iter().zip(chirp)) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_fft) {
                    *w *= k;
                }
                inner.inverse(&mut work);
                for (x, (w, c)) in data.iter_mut().zip(work.iter().zip(chirp)) {
                    *x = w * c;
                }
            }
        }
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        for v in data.iter_mut() {
            *v = v.conj();
        }
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn radix2(data: &mut [C64], twiddles: &[C64], bitrev: &[usize]) {
    let n = data.len();
    for (i, &j) in bitrev.iter().enumerate().take(n) {
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let w = twiddles[j * stride];
                let u = data[start + j];
                let v = data[start + j + half] * w;
                data[start + j] = u + v;
                data[start + j + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// `X[k] = Σ_n x[n] exp(-j2πkn/N)`.
pub fn dft(x: &[C64]) -> Result<Spectrum> {
    if x.is_empty() {
        return Err(Error::invalid("dft of empty input"));
    }
    let plan = DftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.forward(&mut buf);
    Spectrum::new(buf)
}

/// `x[n] = (1/N) Σ_k X[k] exp(+j2πkn/N)`.
pub fn idft(x: &[C64]) -> Result<ComplexSequence> {
    if x.is_empty() {
        return Err(Error::invalid("idft of empty input"));
    }
    let plan = DftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.inverse(&mut buf);
    ComplexSequence::new(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConvolutionMode {
    /// Full linear convolution, output length `|a| + |b| - 1`.
    Linear,
    /// Circular convolution over `|a|` samples; `b` is zero-padded to `|a|`.
    Circular,
}

pub fn convolve(a: &[C64], b: &[C64], mode: ConvolutionMode) -> Result<ComplexSequence> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("convolution of empty input"));
    }
    let out = match mode {
        ConvolutionMode::Linear => {
            let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
            for (i, &av) in a.iter().enumerate() {
                for (j, &bv) in b.iter().enumerate() {
                    out[i + j] += av * bv;
                }
            }
            out
        }
        ConvolutionMode::Circular => {
            let n = a.len();
            if b.len() > n {
                return Err(Error::invalid(format!(
                    "circular convolution kernel ({}) longer than signal ({n})",
                    b.len()
                )));
            }
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (j, &bv) in b.iter().enumerate() {
                if bv == C64::new(0.0, 0.0) {
                    continue;
                }
                for (i, &av) in a.iter().enumerate() {
                    out[(i + j) % n] += av * bv;
                }
            }
            out
        }
    };
    ComplexSequence::new(out)
}

/// Classic Hamming window `0.54 - 0.46 cos(2πn/(L-1))`. `L = 1` yields `[1.0]`.
pub fn hamming_window(len: usize) -> Result<Vec<f64>> {
    match len {
        0 => Err(Error::invalid("window length must be positive")),
        1 => Ok(vec![1.0]),
        _ => Ok((0..len).map(|n| hamming_at(n as f64, len)).collect()),
    }
}

/// Hamming window evaluated at a real position; zero outside `[0, L-1]`.
pub(crate) fn hamming_at(x: f64, len: usize) -> f64 {
    if len == 1 {
        return if x == 0.0 { 1.0 } else { 0.0 };
    }
    let span = (len - 1) as f64;
    if !(0.0..=span).contains(&x) {
        return 0.0;
    }
    0.54 - 0.46 * (2.0 * PI * x / span).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(len: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn direct_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let ang = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                        v * C64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    fn max_err(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn impulse_transforms_to_ones() {
        let x = ComplexSequence::impulse(8, 0).unwrap();
        let spec = dft(&x).unwrap();
        assert!(spec.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        let back = idft(&spec).unwrap();
        assert!(max_err(&back, &x) < 1e-15);
    }

    #[test]
    fn dc_sequence() {
        let x = vec![C64::new(1.0, 0.0); 4];
        let spec = dft(&x).unwrap();
        let want = [4.0, 0.0, 0.0, 0.0].map(|r| C64::new(r, 0.0));
        assert!(max_err(&spec, &want) < 1e-15);
        let back = idft(&want).unwrap();
        assert!(max_err(&back, &x) < 1e-15);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(dft(&[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(idft(&[]), Err(Error::InvalidArgument(_))));
        assert!(convolve(&[], &[C64::new(1.0, 0.0)], ConvolutionMode::Linear).is_err());
        assert!(hamming_window(0).is_err());
        assert!(ComplexSequence::new(Vec::new()).is_err());
        assert!(Spectrum::new(vec![C64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn matches_direct_sum_for_many_lengths() {
        for (i, n) in [1usize, 2, 3, 5, 7, 12, 16, 17, 100, 128, 243, 1000].into_iter().enumerate() {
            let x = random_seq(n, i as u64);
            let fast = dft(&x).unwrap();
            let slow = direct_dft(&x);
            let scale = (n as f64).sqrt();
            assert!(max_err(&fast, &slow) < 1e-12 * scale.max(1.0) * 10.0, "n={n}");
        }
    }

    #[test]
    fn random_length_16_against_oracle() {
        let x = random_seq(16, 99);
        assert!(max_err(&dft(&x).unwrap(), &direct_dft(&x)) < 1e-12);
    }

    #[test]
    fn linear_convolution_examples() {
        let one = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let out = convolve(&one, &one, ConvolutionMode::Linear).unwrap();
        let want = [1.0, 2.0, 1.0].map(|r| C64::new(r, 0.0));
        assert_eq!(out.as_slice(), &want);

        let a = random_seq(9, 3);
        let delta = [C64::new(1.0, 0.0)];
        let lin = convolve(&a, &delta, ConvolutionMode::Linear).unwrap();
        assert_eq!(lin.as_slice(), a.as_slice());
        let circ = convolve(&a, &delta, ConvolutionMode::Circular).unwrap();
        assert_eq!(circ.as_slice(), a.as_slice());
    }

    #[test]
    fn circular_kernel_longer_than_signal_rejected() {
        let a = random_seq(4, 1);
        let b = random_seq(5, 2);
        assert!(convolve(&a, &b, ConvolutionMode::Circular).is_err());
    }

    #[test]
    fn hamming_values() {
        assert_eq!(hamming_window(1).unwrap(), vec![1.0]);
        let w = hamming_window(3).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[1] - 1.0).abs() < 1e-15);
        assert!((w[2] - 0.08).abs() < 1e-15);
        for len in 2..40 {
            let w = hamming_window(len).unwrap();
            for n in 0..len {
                assert!((w[n] - w[len - 1 - n]).abs() < 1e-15);
            }
            let max = w.iter().cloned().fold(f64::MIN, f64::max);
            assert!((w[(len - 1) / 2] - max).abs() < 1e-2 || (w[len / 2] - max).abs() < 1e-2);
        }
    }

    #[test]
    fn signed_bins() {
        assert_eq!(signed_bin(0, 8), 0.0);
        assert_eq!(signed_bin(3, 8), 3.0);
        assert_eq!(signed_bin(4, 8), -4.0);
        assert_eq!(signed_bin(7, 8), -1.0);
        assert_eq!(signed_bin(2, 5), 2.0);
        assert_eq!(signed_bin(3, 5), -2.0);
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..300, seed in any::<u64>()) {
            let x = random_seq(n, seed);
            let back = idft(&dft(&x).unwrap()).unwrap();
            prop_assert!(max_err(&back, &x) < 1e-12);
        }

        #[test]
        fn linearity(n in 1usize..200, seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let a = random_seq(n, seed);
            let b = random_seq(n, seed ^ 0x5555);
            let (alpha, beta) = (C64::new(alpha, 0.5), C64::new(-0.25, beta));
            let mix: Vec<C64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = dft(&mix).unwrap();
            let fa = dft(&a).unwrap();
            let fb = dft(&b).unwrap();
            let rhs: Vec<C64> = fa.iter().zip(fb.iter()).map(|(x, y)| alpha * x + beta * y).collect();
            prop_assert!(max_err(&lhs, &rhs) < 1e-12 * (n as f64).max(1.0));
        }

        #[test]
        fn circular_convolution_theorem(n in 1usize..128, m in 1usize..128, seed in any::<u64>()) {
            let m = m.min(n);
            let a = random_seq(n, seed);
            let b = random_seq(m, seed.wrapping_add(7));
            let conv = convolve(&a, &b, ConvolutionMode::Circular).unwrap();
            let mut bp = b.clone();
            bp.resize(n, C64::new(0.0, 0.0));
            let prod: Vec<C64> = dft(&a).unwrap().iter().zip(dft(&bp).unwrap().iter()).map(|(x, y)| x * y).collect();
            let via = idft(&prod).unwrap();
            prop_assert!(max_err(&conv, &via) < 1e-10);
        }
    }
}
