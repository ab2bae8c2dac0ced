#![allow(dead_code)]

use cram::nalgebra::DMatrix;
use cram::smoothing::SmootherMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// One-sided Jacobi SVD: `a = u * diag(s) * v^T` with `u` n x q (columns
/// orthonormal where `s > 0`), `v` q x q orthogonal.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (n, q) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(q, q);
    for _ in 0..100 {
        let mut off = 0.0f64;
        for i in 0..q {
            for j in (i + 1)..q {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..n {
                    alpha += u[(r, i)] * u[(r, i)];
                    beta += u[(r, j)] * u[(r, j)];
                    gamma += u[(r, i)] * u[(r, j)];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let (x, y) = (u[(r, i)], u[(r, j)]);
                    u[(r, i)] = c * x - s * y;
                    u[(r, j)] = s * x + c * y;
                }
                for r in 0..q {
                    let (x, y) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * x - s * y;
                    v[(r, j)] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s = vec![0.0; q];
    for k in 0..q {
        let norm = u.column(k).norm();
        s[k] = norm;
        if norm > 0.0 {
            let col = u.column(k) / norm;
            u.set_column(k, &col);
        }
    }
    (u, s, v)
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s = jacobi_svd(a).1;
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    jacobi_svd(a).1.iter().sum()
}

/// Singular-value soft-thresholding at level `tau` (unnormalized).
pub fn svt(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for k in 0..s.len() {
        let shrunk = (s[k] - tau).max(0.0);
        if shrunk > 0.0 {
            out += u.column(k) * v.column(k).transpose() * shrunk;
        }
    }
    out
}

/// `(1/2n)||P - M||_F^2 + (lambda/sqrt n)||M||_*`
pub fn prox_objective(p: &DMatrix<f64>, m: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = p.nrows() as f64;
    (p - m).norm_squared() / (2.0 * n) + lambda / n.sqrt() * nuclear_norm(m)
}

/// Proximal gradient on the matrix variable, step n/2, started from zero.
pub fn prox_gradient(p: &DMatrix<f64>, lambda: f64, steps: usize) -> DMatrix<f64> {
    let n = p.nrows() as f64;
    let t = n / 2.0;
    let mut m = DMatrix::zeros(p.nrows(), p.ncols());
    for _ in 0..steps {
        let grad = (&m - p) / n;
        m = svt(&(&m - grad * t), t * lambda / n.sqrt());
    }
    m
}

/// Plain Gauss-Seidel backfitting with centering, no thresholding.
pub fn plain_backfit(
    y: &DMatrix<f64>,
    smoothers: &[SmootherMatrix],
    sweeps: usize,
) -> Vec<DMatrix<f64>> {
    let (n, q) = y.shape();
    let mut m = vec![DMatrix::<f64>::zeros(n, q); smoothers.len()];
    for _ in 0..sweeps {
        for j in 0..smoothers.len() {
            let mut r = y.clone();
            for (k, mk) in m.iter().enumerate() {
                if k != j {
                    r -= mk;
                }
            }
            let mut next = &smoothers[j].weights * r;
            for c in 0..q {
                let mean = next.column(c).mean();
                next.column_mut(c).add_scalar_mut(-mean);
            }
            m[j] = next;
        }
    }
    m
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
