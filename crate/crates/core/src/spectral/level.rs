//! The level matrix `M_N = 2^{-N/2} D_N^{1/2} C_N D_N^{1/2}`.
//!
//! `W_N^opt` maps vectors that are constant on each level (positions with
//! the same bit length) to vectors of the same kind, and on level coordinates
//! it acts as the `(N+1) x (N+1)` matrix `M_N`. Its largest eigenvalue is
//! `‖W_N^opt‖`.
//!
//! `M_N` is invertible and, in the index order `0, N, 1, N-1, 2, ...`, its
//! inverse is tridiagonal with entries from `{√2, -√2, 2}`. The norm
//! eigenvalue is the reciprocal of the smallest positive eigenvalue of that
//! tridiagonal matrix, which Sturm bisection finds in `O(N)` per step with
//! no scaling issues even at `N = 1000`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix, SymTridiagonal};
use crate::walsh::{check_dense, check_level};

/// Exponent `e_i` with `D_N^{1/2} = diag(2^{e_i})`.
fn half_log_weight(i: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        (i as f64 - 1.0) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelMatrix {
    level: u32,
    entries: DenseMatrix,
}

impl LevelMatrix {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.level as usize + 1
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `M_N v` in `O(N)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        apply_level(self.level, v)
    }
}

/// `M_N v` in `O(N)` without building the matrix.
pub fn apply_level(level: u32, v: &[f64]) -> Vec<f64> {
    let n = level as usize;
    assert_eq!(v.len(), n + 1, "level vector dimension mismatch");
    let half = level as f64 / 2.0;
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for (j, &vj) in v.iter().enumerate() {
        acc += half_log_weight(j).exp2() * vj;
        prefix.push(acc);
    }
    (0..=n)
        .map(|i| (half_log_weight(i) - half).exp2() * prefix[n - i])
        .collect()
}

pub fn build_level_matrix(level: u32) -> Result<LevelMatrix> {
    check_level(level)?;
    let n = level as usize;
    let half = level as f64 / 2.0;
    let entries = DenseMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i + j <= n {
            (half_log_weight(i) + half_log_weight(j) - half).exp2()
        } else {
            0.0
        }
    });
    Ok(LevelMatrix { level, entries })
}

/// `M_N^{-1}` in the order `0, N, 1, N-1, 2, ...`, together with that order.
pub fn inverse_tridiagonal(level: u32) -> (SymTridiagonal, Vec<usize>) {
    let n = level as usize;
    let mut order = Vec::with_capacity(n + 1);
    let (mut lo, mut hi) = (0usize, n);
    while lo <= hi {
        order.push(lo);
        if hi != lo {
            order.push(hi);
        }
        lo += 1;
        if hi == 0 {
            break;
        }
        hi -= 1;
    }
    let entry = |i: usize, j: usize| -> f64 {
        let s = i + j;
        if s == n {
            if i == 0 || j == 0 {
                SQRT_2
            } else {
                2.0
            }
        } else if s == n + 1 {
            -SQRT_2
        } else {
            0.0
        }
    };
    let diag = order.iter().map(|&i| entry(i, i)).collect();
    let off = order.windows(2).map(|w| entry(w[0], w[1])).collect();
    (SymTridiagonal::new(diag, off), order)
}

/// A vector of level coordinates with its eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelVector {
    pub c: Vec<f64>,
    pub lambda: f64,
}

impl LevelVector {
    pub fn level(&self) -> u32 {
        (self.c.len() - 1) as u32
    }

    /// `‖M_N c − λ c‖`.
    pub fn residual(&self) -> f64 {
        let mc = apply_level(self.level(), &self.c);
        mc.iter()
            .zip(&self.c)
            .map(|(a, b)| (a - self.lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// One `k,c_k` line per coordinate after a `k,c_k` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,c_k\n");
        for (k, c) in self.c.iter().enumerate() {
            s.push_str(&format!("{k},{c:?}\n"));
        }
        s
    }
}

/// The norm eigenpair of `M_N`, normalized with `c_0 > 0`.
pub fn level_eigen(level: u32) -> Result<LevelVector> {
    check_level(level)?;
    let (t, order) = inverse_tridiagonal(level);
    let negatives = t.count_below(0.0);
    let (_, hi) = t.gershgorin();
    let theta = t.bisect(0.0, hi + 1e-12, negatives);
    let y = t.eigenvector(theta);
    let mut c = vec![0.0; order.len()];
    for (&i, &v) in order.iter().zip(&y) {
        c[i] = v;
    }
    if c[0] < 0.0 {
        c.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = norm2(&c);
    c.iter_mut().for_each(|x| *x /= norm);
    let mut v = LevelVector {
        c,
        lambda: 1.0 / theta,
    };
    // Rayleigh quotient in the structured product sharpens the last bits.
    let mc = apply_level(level, &v.c);
    v.lambda = v.c.iter().zip(&mc).map(|(a, b)| a * b).sum();
    let residual = v.residual();
    if residual > 1e-10 {
        return Err(Error::NoConvergence {
            method: "level",
            iterations: 1,
            residual,
        });
    }
    Ok(v)
}

/// Block-constant vector of length `2^N`: entry 0 is `c_0`, positions
/// `[2^{j-1}, 2^j)` hold `2^{(1-j)/2} c_j`.
pub fn level_lift(c: &LevelVector, cap: u32) -> Result<Vec<f64>> {
    let level = c.level();
    check_level(level)?;
    check_dense(level, cap)?;
    let mut x = Vec::with_capacity(1 << level);
    x.push(c.c[0]);
    for j in 1..=level as usize {
        let v = (0.5 * (1.0 - j as f64)).exp2() * c.c[j];
        x.extend(std::iter::repeat_n(v, 1 << (j - 1)));
    }
    Ok(x)
}

/// Raw recursion `c_N = μ c_0`, `c_1 = c_0 − μ c_N`,
/// `c_{k+1} = √2 c_k − μ c_{N-k}`, `c_{N-k-1} = (c_{N-k} + μ c_{k+1})/√2`
/// with `μ = 1/(√2 λ)` and `c_0 = 1`, alternating between the low and the
/// high end. The recursion amplifies rounding errors geometrically and is
/// only accurate for modest `N` (about 30).
pub fn recursion_unnormalized(level: u32, lambda: f64) -> Vec<f64> {
    let n = level as usize;
    let mu = 1.0 / (SQRT_2 * lambda);
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    c[n] = mu;
    let (mut lo, mut hi) = (0usize, n);
    while lo + 1 < hi {
        c[lo + 1] = if lo == 0 {
            c[0] - mu * c[n]
        } else {
            SQRT_2 * c[lo] - mu * c[n - lo]
        };
        lo += 1;
        if lo + 1 < hi {
            c[hi - 1] = (c[hi] + mu * c[n + 1 - hi]) / SQRT_2;
            hi -= 1;
        }
    }
    c
}

/// [`recursion_unnormalized`] scaled to unit norm.
pub fn eigenvector_recursion(level: u32, lambda: f64) -> Result<LevelVector> {
    check_level(level)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let mut c = recursion_unnormalized(level, lambda);
    let norm = norm2(&c);
    c.iter_mut().for_each(|x| *x /= norm);
    Ok(LevelVector { c, lambda })
}

/// Image of the left part `c_L = (c_0, …, c_{N-1})` of the norm vector of
/// `M_N` under `M_{N-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeftHalfImage {
    /// `M_{N-1} c_L` from the closed form.
    pub d: Vec<f64>,
    /// `M_{N-1} c_L` by direct multiplication.
    pub d_direct: Vec<f64>,
    /// `‖c_L − c̃_L‖` with `c̃_0 = c_0` and `c̃_k = c_{N-k}` for `k ≥ 1`.
    pub symmetry_defect: f64,
    /// `‖d − (√2 λ − 1/√2) c_L‖`.
    pub residual: f64,
}

pub fn left_half_image(c: &LevelVector) -> Result<LeftHalfImage> {
    let level = c.level();
    if level < 2 {
        return Err(Error::InvalidLevel(level));
    }
    let n = level as usize;
    let lam = c.lambda;
    let cl = &c.c[..n];
    let d: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                SQRT_2 * lam * c.c[0] - c.c[0] / (SQRT_2 * lam)
            } else {
                SQRT_2 * lam * c.c[k] - c.c[n - k] / SQRT_2
            }
        })
        .collect();
    let d_direct = apply_level(level - 1, cl);
    let symmetry_defect = (1..n)
        .map(|k| (c.c[k] - c.c[n - k]).powi(2))
        .sum::<f64>()
        .sqrt();
    let shift = SQRT_2 * lam - 1.0 / SQRT_2;
    let residual = d
        .iter()
        .zip(cl)
        .map(|(a, b)| (a - shift * b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LeftHalfImage {
        d,
        d_direct,
        symmetry_defect,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::jacobi_eigen;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_tridiagonal_is_inverse() {
        for level in 1..=12u32 {
            let m = build_level_matrix(level).unwrap();
            let (t, order) = inverse_tridiagonal(level);
            let n = level as usize + 1;
            let mut dense = DenseMatrix::zeros(n, n);
            for (a, &i) in order.iter().enumerate() {
                dense[(i, i)] = t.diag[a];
                if a + 1 < n {
                    let j = order[a + 1];
                    dense[(i, j)] = t.off[a];
                    dense[(j, i)] = t.off[a];
                }
            }
            let p = m.as_dense().matmul(&dense);
            assert!(p.max_abs_diff(&DenseMatrix::identity(n)) < 1e-12, "level {level}");
        }
    }

    #[test]
    fn eigen_matches_jacobi() {
        for level in 1..=40u32 {
            let m = build_level_matrix(level).unwrap();
            let (vals, vecs) = jacobi_eigen(m.as_dense()).unwrap();
            let v = level_eigen(level).unwrap();
            assert_abs_diff_eq!(v.lambda, vals[0], epsilon = 1e-13);
            let s = if vecs[(0, 0)] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..=level as usize {
                assert_abs_diff_eq!(v.c[i], s * vecs[(i, 0)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn structured_apply_matches_dense() {
        let m = build_level_matrix(9).unwrap();
        let v: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let a = m.apply(&v);
        let b = m.as_dense().matvec(&v);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-13);
        }
        assert!(m.as_dense().is_symmetric(1e-14));
    }

    #[test]
    fn recursion_first_iterates() {
        let lambda = 1.6;
        let mu = 1.0 / (SQRT_2 * lambda);
        let c = recursion_unnormalized(10, lambda);
        assert_abs_diff_eq!(c[10], mu, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 1.0 - mu * mu, epsilon = 1e-15);
        assert_abs_diff_eq!(c[9], mu * (2.0 - mu * mu) / SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn recursion_reproduces_eigenvector() {
        for level in [3u32, 8, 15, 24] {
            let v = level_eigen(level).unwrap();
            let r = eigenvector_recursion(level, v.lambda).unwrap();
            for (a, b) in r.c.iter().zip(&v.c) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn lift_examples() {
        let e0 = LevelVector {
            c: vec![1.0, 0.0, 0.0, 0.0],
            lambda: 1.0,
        };
        let x = level_lift(&e0, 12).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let v = level_eigen(6).unwrap();
        let x = level_lift(&v, 12).unwrap();
        assert_abs_diff_eq!(norm2(&x), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn left_half_closed_form() {
        let v = level_eigen(24).unwrap();
        let h = left_half_image(&v).unwrap();
        for (a, b) in h.d.iter().zip(&h.d_direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
