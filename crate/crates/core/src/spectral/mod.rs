//! Operator norms and the level-matrix reduction.
//!
//! Three norm paths are provided. [`dense_norm`] forms the Gram matrix and
//! solves it exactly (the oracle). [`power_norm`] iterates Gram-vector
//! products and never materializes the matrix. [`lanczos_norm`] builds a
//! small Krylov basis and converges in far fewer products on maps whose
//! leading eigenvalues are close together.

pub mod level;
pub mod sqrt2;
pub mod two_branch;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, normalize, symmetric_largest_eigenpair, DenseMatrix, SymTridiagonal};
use crate::truncation::TwhMatrix;

pub use level::{
    build_level_matrix, eigenvector_recursion, left_half_image, level_eigen, level_lift,
    LeftHalfImage, LevelMatrix, LevelVector,
};
pub use sqrt2::{coefficient_polynomials, CoefficientTable, Sqrt2Number};
pub use two_branch::{two_branch_level_matrix, validate_two_branch_level, TwoBranchLevel};

/// Largest matrix dimension accepted by [`dense_norm`].
pub const DENSE_DIM_CAP: usize = 1024;

/// A real matrix that can be applied and transposed-applied.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;

    /// `A^T A x`.
    fn gram_apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_transpose(&self.apply(x))
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.matvec_transpose(y)
    }
}

impl LinearOperator for TwhMatrix {
    fn nrows(&self) -> usize {
        self.size()
    }
    fn ncols(&self) -> usize {
        self.size()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        TwhMatrix::apply(self, x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        TwhMatrix::apply_transpose(self, y)
    }
}

/// Largest singular value with its right singular vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub norm: f64,
    /// Unit right singular vector (norm eigenvector of the Gram matrix).
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖G v − norm² v‖`.
    pub residual: f64,
}

impl SpectralResult {
    pub const CSV_HEADER: &'static str = "label,N,K,norm,residual,iterations";

    /// A `label,N,K,norm,residual,iterations` row; a missing `K` is written
    /// as `-1`.
    pub fn csv_row(&self, label: &str, level: u32, secondary: Option<u32>) -> String {
        format!(
            "{label},{level},{},{:?},{:e},{}",
            secondary.map_or(-1, i64::from),
            self.norm,
            self.residual,
            self.iterations
        )
    }
}

fn gram_residual<A: LinearOperator + ?Sized>(a: &A, v: &[f64]) -> (f64, f64) {
    let g = a.gram_apply(v);
    let lambda = dot(v, &g);
    let r = g
        .iter()
        .zip(v)
        .map(|(gi, vi)| (gi - lambda * vi).powi(2))
        .sum::<f64>()
        .sqrt();
    (lambda, r)
}

fn sign_normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    let flip = if s != 0.0 {
        s < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Exact path: Householder tridiagonalization of the Gram matrix, Sturm
/// bisection for its top eigenvalue and inverse iteration for the vector.
pub fn dense_norm(m: &DenseMatrix) -> Result<SpectralResult> {
    let dim = m.cols().max(m.rows());
    if dim > DENSE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: DENSE_DIM_CAP,
        });
    }
    let g = m.gram();
    let (_, mut v) = symmetric_largest_eigenpair(&g);
    sign_normalize(&mut v);
    let gv = g.matvec(&v);
    let lambda = dot(&v, &gv);
    let residual = norm2(&gv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
    if residual.is_nan() || residual > 1e-11 * lambda.max(1.0) {
        return Err(Error::NoConvergence {
            method: "dense",
            iterations: 1,
            residual,
        });
    }
    Ok(SpectralResult {
        norm: lambda.max(0.0).sqrt(),
        vector: v,
        iterations: 1,
        residual,
    })
}

/// Settings for [`power_norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    /// Required residual `‖G v − λ v‖`.
    pub tol: f64,
    /// Required relative change of the eigenvalue estimate.
    pub rel_change: f64,
    pub max_iter: usize,
    /// Seed of the restart vector used when convergence stalls.
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            rel_change: 1e-13,
            max_iter: 200_000,
            seed: 0x5eed,
        }
    }
}

/// Power iteration on `A^T A` from the all-ones vector.
///
/// If the residual has not improved by a factor of two over the last
/// `stall` iterations the iteration restarts once from a seeded random
/// vector, which covers starts that are (nearly) orthogonal to the top
/// eigenvector.
pub fn power_norm<A: LinearOperator + ?Sized>(a: &A, opts: PowerOptions) -> Result<SpectralResult> {
    let n = a.ncols();
    let stall = 20_000.min(opts.max_iter / 4).max(100);
    let mut v = vec![1.0; n];
    normalize(&mut v);
    let mut lambda_prev = f64::NAN;
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut restarted = false;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut w = a.gram_apply(&v);
        let lambda = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let change = (lambda - lambda_prev).abs();
        if residual <= opts.tol && change <= opts.rel_change * lambda.abs().max(f64::MIN_POSITIVE) {
            sign_normalize(&mut v);
            return Ok(SpectralResult {
                norm: lambda.max(0.0).sqrt(),
                vector: v,
                iterations: it,
                residual,
            });
        }
        if residual < 0.5 * best {
            best = residual;
            best_at = it;
        }
        lambda_prev = lambda;
        if normalize(&mut w) == 0.0 || (!restarted && it - best_at > stall) {
            restarted = true;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            w = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            normalize(&mut w);
            best = f64::INFINITY;
            best_at = it;
            lambda_prev = f64::NAN;
        }
        v = w;
    }
    Err(Error::NoConvergence {
        method: "power",
        iterations: opts.max_iter,
        residual,
    })
}

/// Restarted Lanczos with full reorthogonalization on `A^T A`.
///
/// Each cycle builds a Krylov basis of at most `basis` vectors, takes the
/// top Ritz pair and restarts from the Ritz vector until the Gram residual
/// is at most `tol`. `iterations` counts Gram-vector products.
pub fn lanczos_norm<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    seed: u64,
) -> Result<SpectralResult> {
    const BASIS: usize = 60;
    const CYCLES: usize = 100;
    let n = a.ncols();
    let basis = BASIS.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut start);
    let mut products = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..CYCLES {
        let mut q: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(basis);
        let mut beta: Vec<f64> = Vec::with_capacity(basis);
        for j in 0..basis {
            let mut w = a.gram_apply(&q[j]);
            products += 1;
            alpha.push(dot(&w, &q[j]));
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for qi in &q {
                    let c = dot(&w, qi);
                    w.iter_mut().zip(qi).for_each(|(wk, qk)| *wk -= c * qk);
                }
            }
            let b = norm2(&w);
            if j + 1 == basis || b <= 1e-14 * alpha[0].abs().max(f64::MIN_POSITIVE) {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            q.push(w);
        }
        let k = alpha.len();
        let t = SymTridiagonal::new(alpha, beta[..k - 1].to_vec());
        let theta = t.largest_eigenvalue();
        let y = t.eigenvector(theta);
        let mut v = vec![0.0; n];
        for (qi, yi) in q.iter().zip(&y) {
            v.iter_mut().zip(qi).for_each(|(vk, qk)| *vk += yi * qk);
        }
        normalize(&mut v);
        let (lambda, r) = gram_residual(a, &v);
        products += 1;
        residual = r;
        if r <= tol * lambda.abs().max(1.0) {
            sign_normalize(&mut v);
            return Ok(SpectralResult {
                norm: lambda.max(0.0).sqrt(),
                vector: v,
                iterations: products,
                residual: r,
            });
        }
        start = v;
    }
    Err(Error::NoConvergence {
        method: "lanczos",
        iterations: products,
        residual,
    })
}

/// `T_A = 1^T A^T A 1 = ‖A 1‖²`, computed matrix-free.
pub fn total_correlation(m: &TwhMatrix) -> f64 {
    let y = m.apply(&vec![1.0; m.size()]);
    dot(&y, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::{standard_truncation, trim, two_branch, TruncationMap};
    use crate::walsh::build_wh;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dense_examples() {
        let r = dense_norm(&DenseMatrix::identity(7)).unwrap();
        assert_abs_diff_eq!(r.norm, 1.0, epsilon = 1e-12);
        for level in 1..=8 {
            let r = dense_norm(build_wh(level).unwrap().as_dense()).unwrap();
            assert_abs_diff_eq!(r.norm, 1.0, epsilon = 1e-11);
        }
        let r = dense_norm(&standard_truncation(4).unwrap().to_dense(12).unwrap()).unwrap();
        assert!((r.norm - 1.366).abs() < 1e-3);
        assert!(matches!(
            dense_norm(&DenseMatrix::zeros(1025, 2)),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn power_and_lanczos_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for level in 1..=7 {
            for _ in 0..4 {
                let m = TwhMatrix::new(TruncationMap::random_dyadic(level, &mut rng).unwrap());
                let d = dense_norm(&m.to_dense(12).unwrap()).unwrap().norm;
                let p = power_norm(&m, PowerOptions::default()).unwrap();
                let l = lanczos_norm(&m, 1e-12, 1).unwrap();
                assert_abs_diff_eq!(p.norm, d, epsilon = 1e-9);
                assert_abs_diff_eq!(l.norm, d, epsilon = 1e-9);
                assert_abs_diff_eq!(norm2(&p.vector), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn power_handles_trimmed_matrix() {
        let t = trim(&two_branch(5, Some(4)).unwrap());
        let d = dense_norm(&t.to_dense(12).unwrap()).unwrap().norm;
        let p = power_norm(&t, PowerOptions::default()).unwrap();
        assert_abs_diff_eq!(p.norm, d, epsilon = 1e-9);
    }

    #[test]
    fn total_correlation_is_gram_sum() {
        for m in [
            standard_truncation(5).unwrap(),
            two_branch(5, Some(2)).unwrap(),
            trim(&two_branch(5, Some(4)).unwrap()),
        ] {
            let g = m.to_dense(12).unwrap().gram();
            let s: f64 = g.as_slice().iter().sum();
            assert_abs_diff_eq!(total_correlation(&m), s, epsilon = 1e-9 * s);
        }
    }

    #[test]
    fn csv_row_format() {
        let r = SpectralResult {
            norm: 1.5,
            vector: vec![1.0],
            iterations: 3,
            residual: 1e-13,
        };
        assert_eq!(r.csv_row("opt", 4, None), "opt,4,-1,1.5,1e-13,3");
        assert_eq!(r.csv_row("b", 4, Some(2)), "b,4,2,1.5,1e-13,3");
    }
}
