//! Dense linear-algebra kit: PSD eigendecomposition, matrix square roots,
//! scaled nuclear/spectral norms and the singular-value shrinkage used by
//! both backfitting algorithms.
//!
//! Matrices of function values are stored sample-major: an `n x q` matrix has
//! one row per observation and one column per response coordinate. The
//! second-moment matrix of such a block is the `q x q` Gram `(1/n) F^T F`, and
//! all shrinkage is computed from its eigensystem so nothing of size `n x n`
//! is ever decomposed.

use nalgebra::{DMatrix, DVector};

use crate::error::{CramError, Result};

/// Relative tolerance below which eigenvalues / singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Absolute tolerance (relative to `max(1, max|a_ij|)`) for symmetry and for
/// clamping slightly negative eigenvalues.
const PSD_TOL: f64 = 1e-10;

/// Eigensystem of a symmetric PSD matrix, sorted by decreasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    /// `q x r`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Nonincreasing, nonnegative.
    pub values: DVector<f64>,
}

impl SingularSystem {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `basis * diag(f(values)) * basis^T`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(self.values.iter()) {
            col *= f(v);
        }
        scaled * self.basis.transpose()
    }
}

fn entry_scale(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Eigendecomposition of a symmetric positive semidefinite matrix.
pub fn psd_eig(a: &DMatrix<f64>) -> Result<SingularSystem> {
    if !a.is_square() {
        return Err(CramError::shape(
            "psd_eig",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CramError::InvalidArgument(
            "psd_eig: non-finite matrix entry".into(),
        ));
    }
    let q = a.nrows();
    if q == 0 {
        return Ok(SingularSystem {
            basis: DMatrix::zeros(0, 0),
            values: DVector::zeros(0),
        });
    }
    let scale = entry_scale(a);
    let asymmetry = (a - a.transpose()).amax();
    if asymmetry > PSD_TOL * scale {
        return Err(CramError::NotSymmetric { asymmetry });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    // eigenvalues at roundoff level are indistinguishable from zero
    let noise = 8.0 * q as f64 * f64::EPSILON * eig.eigenvalues.amax();
    let mut basis = DMatrix::zeros(q, q);
    let mut values = DVector::zeros(q);
    for (dst, &src) in order.iter().enumerate() {
        let v = eig.eigenvalues[src];
        if v < -PSD_TOL * scale {
            return Err(CramError::NotPsd { eigenvalue: v });
        }
        values[dst] = if v <= noise { 0.0 } else { v };
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SingularSystem { basis, values })
}

/// Symmetric PSD square root `A^{1/2}`.
pub fn matrix_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sys = psd_eig(a)?;
    Ok(sys.reassemble(f64::sqrt))
}

/// Pseudo-inverse of the square root, `(A^{1/2})^+`, keeping only eigenvalues
/// above `rank_tol * max eigenvalue`.
pub fn sqrt_pinv(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    if !(rank_tol > 0.0) {
        return Err(CramError::InvalidArgument(format!(
            "rank_tol must be positive, got {rank_tol}"
        )));
    }
    let sys = psd_eig(a)?;
    let floor = sys.values.iter().copied().fold(0.0, f64::max) * rank_tol;
    Ok(sys.reassemble(|v| {
        if v > floor && v > 0.0 {
            1.0 / v.sqrt()
        } else {
            0.0
        }
    }))
}

/// `(1/n) F^T F` for a sample-major block with `n` observations.
pub fn gram(f: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut g = f.tr_mul(f);
    g /= n as f64;
    g
}

/// Shrinkage operator `U diag([1 - lambda/sqrt(tau)]_+) U^T` built from the
/// eigensystem of a second-moment matrix.
///
/// Directions with `tau <= rank_tol * tau_max` get factor 0 (the limit of the
/// shrinkage factor as `tau -> 0` for positive `lambda`). At `lambda = 0` the
/// operator is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Shrinkage {
    pub system: SingularSystem,
    pub lambda: f64,
    pub rank_tol: f64,
}

impl Shrinkage {
    pub fn from_gram(gram: &DMatrix<f64>, lambda: f64, rank_tol: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CramError::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Shrinkage {
            system: psd_eig(gram)?,
            lambda,
            rank_tol,
        })
    }

    pub fn factor(&self, tau: f64) -> f64 {
        if self.lambda == 0.0 {
            return 1.0;
        }
        let tau_max = self.system.values.iter().copied().fold(0.0, f64::max);
        if tau <= self.rank_tol * tau_max || tau <= 0.0 {
            return 0.0;
        }
        (1.0 - self.lambda / tau.sqrt()).max(0.0)
    }

    pub fn factors(&self) -> Vec<f64> {
        self.system.values.iter().map(|&t| self.factor(t)).collect()
    }

    /// Number of directions that survive the threshold.
    pub fn retained_rank(&self) -> usize {
        self.factors().iter().filter(|&&f| f > 0.0).count()
    }

    /// The `q x q` matrix applied on the right of a sample-major block.
    pub fn transform(&self) -> DMatrix<f64> {
        let q = self.system.dim();
        if self.lambda == 0.0 {
            return DMatrix::identity(q, q);
        }
        let factors = self.factors();
        let mut scaled = self.system.basis.clone();
        for (mut col, f) in scaled.column_iter_mut().zip(factors) {
            col *= f;
        }
        scaled * self.system.basis.transpose()
    }

    /// Applies the shrinkage to a block; exact identity at `lambda = 0`.
    pub fn apply(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        if self.lambda == 0.0 {
            p.clone()
        } else {
            p * self.transform()
        }
    }
}

/// Singular-value soft thresholding of `P` in the normalization
/// `argmin_M (1/2n)||P - M||_F^2 + (lambda/sqrt(n)) ||M||_*`.
pub fn soft_threshold_svd(p: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    soft_threshold_svd_with_tol(p, lambda, DEFAULT_RANK_TOL)
}

pub fn soft_threshold_svd_with_tol(
    p: &DMatrix<f64>,
    lambda: f64,
    rank_tol: f64,
) -> Result<DMatrix<f64>> {
    if p.nrows() == 0 || p.ncols() == 0 {
        return Err(CramError::shape(
            "soft_threshold_svd",
            "n >= 1 and q >= 1",
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    let shrink = Shrinkage::from_gram(&gram(p, p.nrows()), lambda, rank_tol)?;
    Ok(shrink.apply(p))
}

pub fn singular_values(f: &DMatrix<f64>) -> DVector<f64> {
    if f.is_empty() {
        return DVector::zeros(0);
    }
    f.clone().svd(false, false).singular_values
}

/// `||((1/n) F^T F)^{1/2}||_* = ||F||_* / sqrt(n)`.
pub fn scaled_nuclear_norm(f: &DMatrix<f64>) -> f64 {
    if f.nrows() == 0 {
        return 0.0;
    }
    singular_values(f).sum() / (f.nrows() as f64).sqrt()
}

/// `||F||_2 / sqrt(n)`.
pub fn scaled_spectral_norm(f: &DMatrix<f64>) -> f64 {
    if f.nrows() == 0 {
        return 0.0;
    }
    singular_values(f).iter().copied().fold(0.0, f64::max) / (f.nrows() as f64).sqrt()
}

/// Count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(f: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(f);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn eig_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let sys = psd_eig(&a).unwrap();
        assert_eq!(sys.values.as_slice(), &[4.0, 1.0]);
        assert_relative_eq!(sys.basis[(1, 0)].abs(), 1.0);
        assert_relative_eq!(sys.basis[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn eig_of_identity() {
        let sys = psd_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(sys.values.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_reconstructs_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random(&mut rng, 4, 4);
        let a = &g * g.transpose();
        let sys = psd_eig(&a).unwrap();
        let back = sys.reassemble(|v| v);
        assert!((back - &a).norm() < 1e-8);
        let gram = sys.basis.tr_mul(&sys.basis);
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-10);
        assert!(sys.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_asymmetric_and_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_eig(&a), Err(CramError::NotSymmetric { .. })));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_eig(&b), Err(CramError::NotPsd { .. })));
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        assert_eq!(psd_eig(&c).unwrap().values[1], 0.0);
    }

    #[test]
    fn sqrt_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = matrix_sqrt(&a).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-12);
        assert_eq!(
            matrix_sqrt(&DMatrix::zeros(3, 3)).unwrap(),
            DMatrix::zeros(3, 3)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random(&mut rng, 5, 5);
        let a = &g * g.transpose();
        let r = matrix_sqrt(&a).unwrap();
        assert!((&r * &r - &a).norm() < 1e-8);
        assert!(psd_eig(&r).is_ok());
    }

    #[test]
    fn sqrt_pinv_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let r = sqrt_pinv(&a, 1e-8).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]))).amax() < 1e-12);
        let i = sqrt_pinv(&DMatrix::identity(3, 3), 1e-8).unwrap();
        assert!((i - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn sqrt_pinv_gives_range_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random(&mut rng, 4, 2);
        let a = &g * g.transpose();
        let proj = sqrt_pinv(&a, 1e-8).unwrap() * matrix_sqrt(&a).unwrap();
        // oracle: orthogonal projector onto span(g) = G (G^T G)^{-1} G^T
        let oracle = &g * (g.tr_mul(&g)).try_inverse().unwrap() * g.transpose();
        assert!((proj - oracle).amax() < 1e-8);
    }

    #[test]
    fn sqrt_of_projector_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = random(&mut rng, 5, 2);
            let pi = &g * (g.tr_mul(&g)).try_inverse().unwrap() * g.transpose();
            let pi = (&pi + pi.transpose()) * 0.5;
            assert!((matrix_sqrt(&pi).unwrap() - &pi).amax() < 1e-10);
        }
    }

    #[test]
    fn threshold_identity_at_zero_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random(&mut rng, 7, 3);
        assert_eq!(soft_threshold_svd(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn threshold_full_and_isotropic_cases() {
        // (1/n) P^T P = diag(4, 1) with n = 2
        let s2 = 2.0_f64.sqrt();
        let p = DMatrix::from_row_slice(2, 2, &[2.0 * s2, 0.0, 0.0, s2]);
        let m = soft_threshold_svd(&p, 3.0).unwrap();
        assert!(m.amax() < 1e-14);

        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let m = soft_threshold_svd(&p, s2 / 2.0).unwrap();
        assert!((m - &p * 0.5).amax() < 1e-14);
    }

    #[test]
    fn threshold_rejects_empty() {
        assert!(matches!(
            soft_threshold_svd(&DMatrix::zeros(0, 3), 1.0),
            Err(CramError::Shape { .. })
        ));
    }

    #[test]
    fn norms_examples() {
        assert_eq!(scaled_nuclear_norm(&DMatrix::zeros(4, 2)), 0.0);
        assert_eq!(scaled_spectral_norm(&DMatrix::zeros(4, 2)), 0.0);
        let ones = DMatrix::from_element(4, 1, 1.0);
        assert_relative_eq!(scaled_nuclear_norm(&ones), 1.0, epsilon = 1e-14);
        assert_relative_eq!(scaled_spectral_norm(&ones), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-6), 3);
        assert_eq!(numerical_rank(&DMatrix::zeros(5, 4), 1e-6), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random(&mut rng, 6, 1);
        let v = random(&mut rng, 4, 1);
        let noise = random(&mut rng, 6, 4) * 1e-12;
        assert_eq!(numerical_rank(&(u * v.transpose() + noise), 1e-6), 1);
    }

    #[test]
    fn rank_is_monotone_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let p = random(&mut rng, 12, 4);
            let mut last = usize::MAX;
            for k in 0..40 {
                let lambda = k as f64 * 0.05;
                let r = numerical_rank(&soft_threshold_svd(&p, lambda).unwrap(), DEFAULT_RANK_TOL);
                assert!(r <= last);
                last = r;
            }
        }
    }

    #[test]
    fn duality_is_attained() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.gen_range(3..15);
            let q = rng.gen_range(1..5);
            let f = random(&mut rng, n, q);
            let g = &f * sqrt_pinv(&gram(&f, n), 1e-10).unwrap();
            let inner = g.dot(&f) / n as f64;
            assert_relative_eq!(inner, scaled_nuclear_norm(&f), epsilon = 1e-8);
            assert!(scaled_spectral_norm(&g) <= 1.0 + 1e-8);
        }
    }
}
