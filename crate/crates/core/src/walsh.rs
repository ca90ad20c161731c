//! Walsh functions in the Paley ordering, Walsh-Hadamard matrices and
//! dyadic step functions.
//!
//! Matrices are stored with the Walsh index on rows and the sample position
//! on columns: entry `(n, k)` is `2^{-N/2} W_n(k / 2^N)`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Default largest level that may be materialized densely.
pub const DEFAULT_DENSE_CAP: u32 = 12;
/// Largest level a caller may raise the dense cap to.
pub const HARD_DENSE_CAP: u32 = 14;

/// The dyadic rational `numerator / 2^scale` in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    numerator: u64,
    scale: u32,
}

impl DyadicPoint {
    pub fn new(numerator: u64, scale: u32) -> Result<Self> {
        if scale >= 64 || numerator >= 1u64 << scale {
            return Err(Error::InvalidArgument(format!(
                "{numerator}/2^{scale} is not in [0, 1)"
            )));
        }
        Ok(Self { numerator, scale })
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn scale(self) -> u32 {
        self.scale
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (1u64 << self.scale) as f64
    }

    /// Binary digit `t_j` (1-based) of the expansion `t = 0.t_1 t_2 ...`.
    pub fn digit(self, j: u32) -> u64 {
        if j == 0 || j > self.scale {
            0
        } else {
            (self.numerator >> (self.scale - j)) & 1
        }
    }
}

/// Reverse the lowest `bits` bits of `k`.
#[inline]
pub fn bit_reverse(k: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        k.reverse_bits() >> (usize::BITS - bits)
    }
}

/// `W_n(t)` computed from the Rademacher product formula. Returns `±1`.
pub fn walsh_eval(n: u64, t: DyadicPoint) -> f64 {
    let rev = if t.scale == 0 {
        0
    } else {
        t.numerator.reverse_bits() >> (64 - t.scale)
    };
    if (n & rev).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sign of entry `(n, k)` of `WH_N`, i.e. `W_n(k / 2^N)`.
#[inline]
pub fn walsh_sign(level: u32, n: usize, k: usize) -> i8 {
    if (n & bit_reverse(k, level)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[inline]
pub fn entry_scale(level: u32) -> f64 {
    (-(level as f64) / 2.0).exp2()
}

pub(crate) fn check_level(level: u32) -> Result<()> {
    if level == 0 {
        Err(Error::InvalidLevel(level))
    } else {
        Ok(())
    }
}

pub(crate) fn check_dense(level: u32, cap: u32) -> Result<()> {
    let cap = cap.min(HARD_DENSE_CAP);
    if level > cap {
        Err(Error::SizeCap { level, cap })
    } else {
        Ok(())
    }
}

/// The `2^N x 2^N` Walsh-Hadamard matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WhMatrix {
    level: u32,
    entries: DenseMatrix,
}

impl WhMatrix {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn size(&self) -> usize {
        1 << self.level
    }

    pub fn entry(&self, n: usize, k: usize) -> f64 {
        self.entries[(n, k)]
    }

    pub fn sign(&self, n: usize, k: usize) -> i8 {
        walsh_sign(self.level, n, k)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.entries
    }
}

/// `WH_N` with the default dense cap.
pub fn build_wh(level: u32) -> Result<WhMatrix> {
    build_wh_with_cap(level, DEFAULT_DENSE_CAP)
}

/// `WH_N`, built by the block recursion
/// `[WH_{N-1} ⊗ [1,1]; WH_{N-1} ⊗ [1,-1]] / √2`.
pub fn build_wh_with_cap(level: u32, cap: u32) -> Result<WhMatrix> {
    check_level(level)?;
    check_dense(level, cap)?;
    let mut signs: Vec<i8> = vec![1, 1, 1, -1];
    for l in 2..=level {
        let half = 1usize << (l - 1);
        let size = 2 * half;
        let prev = signs;
        signs = Vec::with_capacity(size * size);
        for n in 0..size {
            let (src, flip) = if n < half { (n, 1) } else { (n - half, -1) };
            for k in 0..size {
                let s = prev[src * half + k / 2];
                signs.push(if k % 2 == 1 { s * flip } else { s });
            }
        }
    }
    let scale = entry_scale(level);
    let size = 1usize << level;
    let m = DenseMatrix::from_row_major(
        size,
        size,
        signs.into_iter().map(|s| f64::from(s) * scale).collect(),
    )?;
    Ok(WhMatrix { level, entries: m })
}

/// A dyadic step function `f = 2^{N/2} Σ c_k 1_{I_{N,k}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    level: u32,
    coeffs: Vec<f64>,
}

impl StepFunction {
    pub fn new(level: u32, coeffs: Vec<f64>) -> Result<Self> {
        if level >= usize::BITS || coeffs.len() != 1usize << level {
            return Err(Error::InvalidArgument(format!(
                "a level-{level} step function needs 2^{level} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { level, coeffs })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value of `f` on the interval `[k/2^N, (k+1)/2^N)`.
    pub fn value(&self, k: usize) -> f64 {
        (self.level as f64 / 2.0).exp2() * self.coeffs[k]
    }
}

/// Walsh coefficients `⟨f, W_n⟩`, `n < 2^N`.
pub fn analyze(f: &StepFunction) -> Vec<f64> {
    let level = f.level;
    let mut buf = vec![0.0; f.coeffs.len()];
    for (k, &c) in f.coeffs.iter().enumerate() {
        buf[bit_reverse(k, level)] = c;
    }
    fwht(&mut buf);
    let s = entry_scale(level);
    buf.iter_mut().for_each(|x| *x *= s);
    buf
}

/// Inverse of [`analyze`]: the step function with the given Walsh coefficients.
pub fn synthesize(level: u32, walsh_coeffs: &[f64]) -> Result<StepFunction> {
    if walsh_coeffs.len() != 1usize << level {
        return Err(Error::InvalidArgument(format!(
            "expected 2^{level} Walsh coefficients, got {}",
            walsh_coeffs.len()
        )));
    }
    let mut buf = walsh_coeffs.to_vec();
    fwht(&mut buf);
    let s = entry_scale(level);
    let coeffs = (0..buf.len())
        .map(|k| buf[bit_reverse(k, level)] * s)
        .collect();
    StepFunction::new(level, coeffs)
}

/// Unnormalized Hadamard transform in natural (Sylvester) order.
/// The length must be a power of two.
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two() || n == 0);
    let mut h = 1;
    while h < n {
        for chunk in buf.chunks_mut(2 * h) {
            let (a, b) = chunk.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn walsh_recursive(n: u64, num: u64, scale: u32) -> f64 {
        // W_n at t = num / 2^scale, following the two-scale recursion.
        if n == 0 {
            return 1.0;
        }
        if scale == 0 {
            // t = 0: every Rademacher factor is +1
            return 1.0;
        }
        let half = 1u64 << (scale - 1);
        let (inner, second) = if num < half {
            (num, false)
        } else {
            (num - half, true)
        };
        let v = walsh_recursive(n / 2, inner, scale - 1);
        if second && n % 2 == 1 {
            -v
        } else {
            v
        }
    }

    #[test]
    fn eval_examples() {
        let t = DyadicPoint::new(1, 1).unwrap();
        assert_eq!(walsh_eval(0, t), 1.0);
        assert_eq!(walsh_eval(1, t), -1.0);
        let t = DyadicPoint::new(3, 3).unwrap();
        assert_eq!(walsh_eval(5, t), walsh_recursive(5, 3, 3));
    }

    #[test]
    fn eval_matches_recursion() {
        for scale in 0..7 {
            for num in 0..(1u64 << scale) {
                let t = DyadicPoint::new(num, scale).unwrap();
                for n in 0..200 {
                    assert_eq!(walsh_eval(n, t), walsh_recursive(n, num, scale));
                }
            }
        }
    }

    #[test]
    fn haar_matrix() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let wh = build_wh(1).unwrap();
        assert_eq!(wh.as_dense().as_slice(), &[h, h, h, -h]);
    }

    #[test]
    fn entries_match_walsh_eval() {
        for level in 1..=8 {
            let wh = build_wh(level).unwrap();
            let s = entry_scale(level);
            for n in 0..wh.size() {
                for k in 0..wh.size() {
                    let t = DyadicPoint::new(k as u64, level).unwrap();
                    assert_eq!(wh.entry(n, k), s * walsh_eval(n as u64, t));
                    assert_eq!(wh.sign(n, k) as f64, walsh_eval(n as u64, t));
                }
            }
        }
    }

    #[test]
    fn size_cap_enforced() {
        assert!(matches!(build_wh(13), Err(Error::SizeCap { .. })));
        assert!(matches!(build_wh(0), Err(Error::InvalidLevel(0))));
        assert!(matches!(build_wh_with_cap(15, 20), Err(Error::SizeCap { cap: 14, .. })));
    }

    #[test]
    fn analyze_column_gives_unit_vector() {
        let wh = build_wh(4).unwrap();
        let c: Vec<f64> = (0..16).map(|k| wh.entry(3, k)).collect();
        let a = analyze(&StepFunction::new(4, c).unwrap());
        for (n, x) in a.iter().enumerate() {
            assert_abs_diff_eq!(*x, if n == 3 { 1.0 } else { 0.0 }, epsilon = 1e-14);
        }
    }

    #[test]
    fn analyze_matches_direct_sum() {
        let wh = build_wh(4).unwrap();
        let c: Vec<f64> = (0..16).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
        let a = analyze(&StepFunction::new(4, c.clone()).unwrap());
        for n in 0..16 {
            let direct: f64 = (0..16).map(|k| wh.entry(n, k) * c[k]).sum();
            assert_abs_diff_eq!(a[n], direct, epsilon = 1e-12);
        }
    }
}
