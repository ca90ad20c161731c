//! Small dense and tridiagonal linear algebra used by the spectral code.
//!
//! Nothing here is general purpose: only what the norm computations need
//! (symmetric eigensolvers, the largest eigenpair of a symmetric matrix, and
//! Sturm-sequence bisection on symmetric tridiagonal matrices).

use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T * v`
    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "matvec_transpose dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Gram matrix `self^T * self`, computed column pair by column pair so
    /// that trailing zero blocks are skipped.
    pub fn gram(&self) -> DenseMatrix {
        let t = self.transpose();
        let support: Vec<usize> = (0..t.rows)
            .map(|j| {
                t.row(j)
                    .iter()
                    .rposition(|&x| x != 0.0)
                    .map_or(0, |p| p + 1)
            })
            .collect();
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let len = support[i].min(support[j]);
                let v = dot(&t.row(i)[..len], &t.row(j)[..len]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Row-major CSV using round-trip (shortest exact) float formatting.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = String::new();
        for i in 0..self.rows {
            line.clear();
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{x:?}");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Full eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Eigenvalues are returned in descending order; column `i` of the returned
/// matrix is the eigenvector for eigenvalue `i`.
pub fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    const MAX_SWEEPS: usize = 100;
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("jacobi_eigen needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let mut sweep = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].abs())
            .sum();
        if off == 0.0 {
            break;
        }
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                method: "jacobi",
                iterations: sweep,
                residual: off,
            });
        }
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let g = 100.0 * apq.abs();
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Off-diagonal entries below the rounding level of both
                // diagonal entries are dropped once the first sweeps are done.
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Symmetric tridiagonal matrix: `diag` has length n, `off` has length n-1.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must have length n-1"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `sigma` (Sturm count via the
    /// LDL^T pivots of `T - sigma I`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - sigma - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection on the
    /// Sturm count.
    pub fn eigenvalue_by_index(&self, index: usize) -> f64 {
        assert!(index < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs()).max(1.0));
        lo -= pad;
        hi += pad;
        self.bisect(lo, hi, index)
    }

    /// Bisection for the `index`-th smallest eigenvalue inside `[lo, hi]`,
    /// where `count_below(lo) <= index < count_below(hi)` is assumed.
    pub fn bisect(&self, mut lo: f64, mut hi: f64, index: usize) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalue_by_index(self.len() - 1)
    }

    /// Eigenvector for a (converged) eigenvalue `lambda` by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return vec![1.0];
        }
        let scale = self
            .diag
            .iter()
            .chain(&self.off)
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let shift = lambda + 4.0 * f64::EPSILON * scale;
        // Deterministic, non-degenerate start vector.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
            .collect();
        normalize(&mut x);
        let lu = TridiagLu::factor(self, shift, scale);
        for _ in 0..4 {
            x = lu.solve(&x);
            normalize(&mut x);
        }
        x
    }
}

/// LU factorization with partial pivoting of `T - shift I` for tridiagonal `T`.
/// U has two super-diagonals.
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &SymTridiagonal, shift: f64, scale: f64) -> Self {
        let n = t.len();
        let tiny = f64::EPSILON * scale;
        let mut d: Vec<f64> = t.diag.iter().map(|x| x - shift).collect();
        let mut du: Vec<f64> = t.off.clone();
        let dl: Vec<f64> = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < tiny {
                    d[i] = tiny.copysign(d[i]);
                }
                let m = dl[i] / d[i];
                mult[i] = m;
                d[i + 1] -= m * du[i];
            } else {
                swapped[i] = true;
                let m = d[i] / dl[i];
                mult[i] = m;
                d[i] = dl[i];
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - m * d[i + 1];
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -m;
                }
            }
        }
        if d[n - 1].abs() < tiny {
            d[n - 1] = tiny.copysign(d[n - 1]);
        }
        Self {
            u0: d,
            u1: du,
            u2: du2,
            mult,
            swapped,
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.u0.len();
        let mut y = b.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                y.swap(i, i + 1);
                y[i + 1] -= self.mult[i] * y[i];
            } else {
                y[i + 1] -= self.mult[i] * y[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
            // A nearly singular shift makes the solution grow quickly; the
            // direction is all that matters, so rescale as we go.
            if x[i].abs() > 1e100 {
                let m = x[i].abs();
                x[i..].iter_mut().for_each(|v| *v /= m);
                y[..i].iter_mut().for_each(|v| *v /= m);
            }
        }
        x
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// keeping the reflectors so eigenvectors can be mapped back.
pub struct Tridiagonalization {
    pub tridiagonal: SymTridiagonal,
    // reflector k acts on coordinates k+1..n: (v, beta) with H = I - beta v v^T
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl Tridiagonalization {
    pub fn new(a: &DenseMatrix) -> Self {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut m = a.clone();
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        // Columns below this size are left alone; reflecting them would
        // underflow and the entries are far below the rounding level anyway.
        let negligible = 1e-3 * f64::EPSILON * norm2(&a.data);
        for k in 0..n.saturating_sub(2) {
            let sub = n - k - 1;
            let mut v: Vec<f64> = (0..sub).map(|i| m[(k + 1 + i, k)]).collect();
            let alpha_norm = norm2(&v);
            if alpha_norm <= negligible {
                reflectors.push((vec![0.0; sub], 0.0));
                off[k] = v[0];
                continue;
            }
            let alpha = if v[0] >= 0.0 { -alpha_norm } else { alpha_norm };
            v[0] -= alpha;
            let vnorm2 = dot(&v, &v);
            let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
            off[k] = alpha;
            // p = beta * A_sub v
            let p: Vec<f64> = (0..sub)
                .map(|i| {
                    let row = &m.data[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                    beta * dot(row, &v)
                })
                .collect();
            let kcoef = 0.5 * beta * dot(&p, &v);
            let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kcoef * vi).collect();
            for i in 0..sub {
                let (vi, wi) = (v[i], w[i]);
                let row = &mut m.data[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                for j in 0..sub {
                    row[j] -= vi * w[j] + wi * v[j];
                }
            }
            reflectors.push((v, beta));
        }
        for i in 0..n {
            diag[i] = m[(i, i)];
        }
        if n >= 2 {
            off[n - 2] = m[(n - 1, n - 2)];
        }
        Self {
            tridiagonal: SymTridiagonal::new(diag, off),
            reflectors,
        }
    }

    /// Map an eigenvector of the tridiagonal matrix back to the original basis.
    pub fn back_transform(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let tail = &mut x[k + 1..];
            let s = beta * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
        x
    }
}

/// Largest eigenvalue and a unit eigenvector of a symmetric matrix
/// (Householder tridiagonalization, Sturm bisection, inverse iteration).
pub fn symmetric_largest_eigenpair(a: &DenseMatrix) -> (f64, Vec<f64>) {
    let n = a.rows();
    if n == 1 {
        return (a[(0, 0)], vec![1.0]);
    }
    let tri = Tridiagonalization::new(a);
    let lambda = tri.tridiagonal.largest_eigenvalue();
    let y = tri.tridiagonal.eigenvector(lambda);
    let mut x = tri.back_transform(&y);
    normalize(&mut x);
    (lambda, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = sample_symmetric(12, 7);
        let (vals, vecs) = jacobi_eigen(&a).unwrap();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for k in 0..12 {
            let v = vecs.column(k);
            let av = a.matvec(&v);
            for i in 0..12 {
                assert_abs_diff_eq!(av[i], vals[k] * v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_preserves_spectrum() {
        let a = sample_symmetric(20, 3);
        let (vals, _) = jacobi_eigen(&a).unwrap();
        let tri = Tridiagonalization::new(&a);
        for (i, v) in vals.iter().rev().enumerate() {
            assert_abs_diff_eq!(tri.tridiagonal.eigenvalue_by_index(i), *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn largest_eigenpair_matches_jacobi() {
        for seed in 0..5 {
            let a = sample_symmetric(30, seed);
            let (vals, _) = jacobi_eigen(&a).unwrap();
            let (lambda, x) = symmetric_largest_eigenpair(&a);
            assert_abs_diff_eq!(lambda, vals[0], epsilon = 1e-12);
            let ax = a.matvec(&x);
            let r: f64 = ax.iter().zip(&x).map(|(p, q)| (p - lambda * q).powi(2)).sum();
            assert!(r.sqrt() < 1e-11);
        }
    }

    #[test]
    fn count_below_on_diagonal_matrix() {
        let t = SymTridiagonal::new(vec![1.0, 2.0, 3.0], vec![0.0, 0.0]);
        assert_eq!(t.count_below(0.5), 0);
        assert_eq!(t.count_below(2.5), 2);
        assert_eq!(t.count_below(10.0), 3);
        let v = t.eigenvector(3.0);
        assert_abs_diff_eq!(v[2].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_matches_matmul() {
        let a = DenseMatrix::from_fn(5, 4, |i, j| if i <= j { (i + j) as f64 } else { 0.0 });
        let g = a.gram();
        let g2 = a.transpose().matmul(&a);
        assert!(g.max_abs_diff(&g2) < 1e-14);
    }
}
