//! Dense Hermitian positive-definite solves for the equalizer normal equations.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Row-major square complex matrix.
#[derive(Debug, Clone)]
pub(crate) struct Matrix {
    n: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub(crate) fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Lower-triangular Cholesky factor `A = L·Lᴴ`.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<C64>,
}

impl Cholesky {
    /// Returns `None` when `a` is not numerically positive definite.
    pub(crate) fn factor(a: &Matrix) -> Option<Self> {
        let n = a.n;
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = a.at(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d.is_nan() || d <= 0.0 || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a.at(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Self { n, l })
    }

    pub(crate) fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: C64 = y[i] - row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum::<C64>();
            y[i] = s / self.l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let s: C64 = y[i]
                - (i + 1..n)
                    .zip(&y[i + 1..])
                    .map(|(k, v)| self.l[k * n + i].conj() * v)
                    .sum::<C64>();
            y[i] = s / self.l[i * n + i].re;
        }
        y
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn start_vector(n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.37 * i as f64, 0.5 - 0.11 * (i % 7) as f64))
        .collect();
    normalize(&mut v);
    v
}

const CONDITION_ITERS: usize = 60;

/// 2-norm condition estimate from power iteration on `A` and inverse
/// iteration through its Cholesky factor.
pub(crate) fn condition_estimate(a: &Matrix, chol: &Cholesky) -> f64 {
    let mut v = start_vector(a.n);
    let mut lambda_max = 0.0;
    for _ in 0..CONDITION_ITERS {
        let mut w = a.mul_vec(&v);
        lambda_max = normalize(&mut w);
        v = w;
    }
    let mut v = start_vector(a.n);
    let mut inv_max = 0.0;
    for _ in 0..CONDITION_ITERS {
        let mut w = chol.solve(&v);
        inv_max = normalize(&mut w);
        v = w;
    }
    lambda_max * inv_max
}

#[derive(Debug)]
pub(crate) struct Solution {
    pub x: Vec<C64>,
    pub condition: f64,
}

/// Solves `A·x = b` for Hermitian positive-definite `A`, refusing systems
/// whose condition estimate exceeds `max_condition`.
pub(crate) fn solve_hpd(a: &Matrix, b: &[C64], max_condition: f64) -> Result<Solution> {
    let chol = Cholesky::factor(a).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let condition = condition_estimate(a, &chol);
    if condition.is_nan() || condition > max_condition {
        return Err(Error::IllConditioned { condition });
    }
    let x = chol.solve(b);
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(Solution { x, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_hermitian_system() {
        let a = Matrix::from_fn(3, |i, j| match (i, j) {
            (0, 0) => C64::new(4.0, 0.0),
            (1, 1) => C64::new(5.0, 0.0),
            (2, 2) => C64::new(6.0, 0.0),
            (0, 1) => C64::new(1.0, 1.0),
            (1, 0) => C64::new(1.0, -1.0),
            (1, 2) => C64::new(0.0, 2.0),
            (2, 1) => C64::new(0.0, -2.0),
            _ => C64::new(0.0, 0.0),
        });
        let x_true = [C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.25, -1.0)];
        let b = a.mul_vec(&x_true);
        let sol = solve_hpd(&a, &b, 1e12).unwrap();
        for (x, t) in sol.x.iter().zip(&x_true) {
            assert!((x - t).norm() < 1e-12);
        }
        assert!(sol.condition >= 1.0 && sol.condition < 10.0);
    }

    #[test]
    fn diagonal_condition_is_exact() {
        let a = Matrix::from_fn(4, |i, j| if i == j { C64::new(10f64.powi(i as i32), 0.0) } else { C64::new(0.0, 0.0) });
        let chol = Cholesky::factor(&a).unwrap();
        let c = condition_estimate(&a, &chol);
        assert!((c - 1000.0).abs() / 1000.0 < 1e-6, "{c}");
    }

    #[test]
    fn refuses_singular_and_ill_conditioned() {
        let singular = Matrix::from_fn(2, |_, _| C64::new(1.0, 0.0));
        assert!(matches!(
            solve_hpd(&singular, &[C64::new(1.0, 0.0); 2], 1e12),
            Err(Error::IllConditioned { .. })
        ));
        let skinny = Matrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => C64::new(1.0, 0.0),
            (1, 1) => C64::new(1e-14, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        match solve_hpd(&skinny, &[C64::new(1.0, 0.0); 2], 1e12) {
            Err(Error::IllConditioned { condition }) => assert!(condition > 1e12),
            other => panic!("expected ill-conditioned, got {other:?}"),
        }
    }
}
