//! The linearized partial-sum operator
//! `(S_Φ f)(t) = Σ_{n < Φ(t)} ⟨f, W_n⟩ W_n(t)` on dyadic step functions.
//!
//! On `D_N`, sampled at the points `k/2^N`, `S_Φ` acts on the coefficient
//! vector `c` as `W_{N,Φ}^T (WH_N c)` (Walsh index on rows).

use crate::error::{Error, Result};
use crate::spectral::{dense_norm, power_norm, PowerOptions};
use crate::truncation::{TruncationMap, TwhMatrix};
use crate::walsh::{analyze, build_wh, walsh_eval, DyadicPoint, StepFunction};

/// `Φ_N` at level `N` from a map constant on the intervals of level `M ≤ N`:
/// every coarse value is repeated `2^{N-M}` times and capped at `2^N`.
pub fn localize_phi(coarse: &TruncationMap, level: u32) -> Result<TruncationMap> {
    let m = coarse.level();
    if m > level {
        return Err(Error::InvalidArgument(format!(
            "cannot localize a level-{m} map to the coarser level {level}"
        )));
    }
    let rep = 1usize << (level - m);
    let cap = 1usize << level;
    let lengths = coarse
        .lengths()
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l.min(cap), rep))
        .collect();
    TruncationMap::new(level, lengths)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedOperator {
    matrix: TwhMatrix,
}

impl LinearizedOperator {
    pub fn new(phi: TruncationMap) -> Self {
        Self {
            matrix: TwhMatrix::new(phi),
        }
    }

    pub fn level(&self) -> u32 {
        self.matrix.level()
    }

    pub fn phi(&self) -> &TruncationMap {
        self.matrix.phi()
    }

    pub fn matrix(&self) -> &TwhMatrix {
        &self.matrix
    }

    fn check(&self, f: &StepFunction) -> Result<()> {
        if f.level() != self.level() {
            return Err(Error::LevelMismatch {
                expected: self.level(),
                found: f.level(),
            });
        }
        Ok(())
    }

    /// `S_Φ f` through the matrix product `W_{N,Φ}^T WH_N c`.
    pub fn apply(&self, f: &StepFunction) -> Result<StepFunction> {
        self.check(f)?;
        let a = analyze(f);
        StepFunction::new(self.level(), self.matrix.apply_transpose(&a))
    }

    /// `S_Φ f` by summing the truncated Walsh series at every grid point.
    pub fn apply_direct(&self, f: &StepFunction) -> Result<StepFunction> {
        self.check(f)?;
        let level = self.level();
        let size = 1usize << level;
        let points: Vec<DyadicPoint> = (0..size)
            .map(|k| DyadicPoint::new(k as u64, level))
            .collect::<Result<_>>()?;
        // ⟨f, W_n⟩ = 2^{-N/2} Σ_k c_k W_n(k/2^N)
        let scale = (-(level as f64) / 2.0).exp2();
        let max_len = self.phi().lengths().iter().copied().max().unwrap_or(0);
        let inner: Vec<f64> = (0..max_len)
            .map(|n| {
                scale
                    * f.coeffs()
                        .iter()
                        .zip(&points)
                        .map(|(c, &t)| c * walsh_eval(n as u64, t))
                        .sum::<f64>()
            })
            .collect();
        let out = (0..size)
            .map(|k| {
                let value: f64 = (0..self.phi().get(k))
                    .map(|n| inner[n] * walsh_eval(n as u64, points[k]))
                    .sum();
                value * scale
            })
            .collect();
        StepFunction::new(level, out)
    }
}

/// `‖W_{N,Φ}‖`, which bounds `‖S_Φ‖` on `D_N`, and, where the dense cap
/// allows, the exact `‖S_Φ‖` as the top singular value of `W_{N,Φ}^T WH_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBound {
    pub bound: f64,
    pub exact: Option<f64>,
}

/// Levels up to which [`operator_norm_bound`] also computes the exact norm.
pub const EXACT_NORM_CAP: u32 = 10;

pub fn operator_norm_bound(op: &LinearizedOperator) -> Result<NormBound> {
    let bound = power_norm(&op.matrix, PowerOptions::default())?.norm;
    let exact = if op.level() <= EXACT_NORM_CAP {
        let w = op.matrix.to_dense(EXACT_NORM_CAP)?;
        let wh = build_wh(op.level())?;
        Some(dense_norm(&w.transpose().matmul(wh.as_dense()))?.norm)
    } else {
        None
    };
    Ok(NormBound { bound, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn localize_examples() {
        let phi = TruncationMap::new(2, vec![4, 4, 2, 1]).unwrap();
        assert_eq!(localize_phi(&phi, 2).unwrap(), phi);
        assert_eq!(
            localize_phi(&phi, 3).unwrap().lengths(),
            &[4, 4, 4, 4, 2, 2, 1, 1]
        );
        let phi = TruncationMap::new(1, vec![2, 1]).unwrap();
        assert_eq!(localize_phi(&phi, 2).unwrap().lengths(), &[2, 2, 1, 1]);
        assert!(localize_phi(&TruncationMap::standard(3).unwrap(), 2).is_err());
    }

    #[test]
    fn full_and_single_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = StepFunction::new(4, c.clone()).unwrap();
        let id = LinearizedOperator::new(TruncationMap::constant(4, 16).unwrap());
        for (a, b) in id.apply(&f).unwrap().coeffs().iter().zip(&c) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        let one = LinearizedOperator::new(TruncationMap::constant(4, 1).unwrap());
        let mean = c.iter().sum::<f64>() / 16.0;
        for v in one.apply(&f).unwrap().coeffs() {
            assert_abs_diff_eq!(*v, mean, epsilon = 1e-14);
        }
    }

    #[test]
    fn matrix_path_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for level in 1..=6 {
            let phi = TruncationMap::random_dyadic(level, &mut rng).unwrap();
            let op = LinearizedOperator::new(phi);
            let c: Vec<f64> = (0..1 << level).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = StepFunction::new(level, c).unwrap();
            let a = op.apply(&f).unwrap();
            let b = op.apply_direct(&f).unwrap();
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
        let op = LinearizedOperator::new(TruncationMap::standard(3).unwrap());
        let f = StepFunction::new(4, vec![0.0; 16]).unwrap();
        assert!(matches!(op.apply(&f), Err(Error::LevelMismatch { .. })));
    }

    #[test]
    fn bound_equals_exact() {
        let op = LinearizedOperator::new(TruncationMap::constant(5, 32).unwrap());
        let nb = operator_norm_bound(&op).unwrap();
        assert_abs_diff_eq!(nb.bound, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nb.exact.unwrap(), 1.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for level in 1..=6 {
            let op = LinearizedOperator::new(TruncationMap::random_dyadic(level, &mut rng).unwrap());
            let nb = operator_norm_bound(&op).unwrap();
            assert_abs_diff_eq!(nb.bound, nb.exact.unwrap(), epsilon = 1e-9);
        }
    }
}
