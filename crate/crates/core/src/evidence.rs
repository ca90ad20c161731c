//! Numerical evidence for the optimality conjectures.
//!
//! Nothing here asserts a conjecture. Each suite returns the numbers it saw
//! and the list of cases that contradict the conjectured inequality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::critical::k_sweep;
use crate::error::Result;
use crate::spectral::level::level_eigen;
use crate::spectral::{lanczos_norm, power_norm, total_correlation, PowerOptions};
use crate::truncation::{
    nodes, random_one_node, reduce_fully, standard_truncation, trim, two_branch, TruncationMap,
    TwhMatrix,
};

/// `1 + √2/2`, the conjectured limit of `‖W_N^opt‖`.
pub const LIMIT: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// Residual tolerance of the Lanczos norms used by the random searches.
pub const SEARCH_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub level: u32,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormCurve {
    pub points: Vec<CurvePoint>,
    /// Levels `N` with `λ(N) ≤ λ(N − 1)`.
    pub non_increasing: Vec<u32>,
    /// Levels with `λ(N) ≥ 1 + √2/2`.
    pub above_limit: Vec<u32>,
}

/// `λ(N) = ‖W_N^opt‖` for `N = 1..=n_max` from the level matrices.
pub fn norm_curve(n_max: u32) -> Result<NormCurve> {
    let points = crate::par::map_indexed(n_max as usize, |i| {
        let level = i as u32 + 1;
        level_eigen(level).map(|v| CurvePoint {
            level,
            norm: v.lambda,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let non_increasing = points
        .windows(2)
        .filter(|w| w[1].norm <= w[0].norm)
        .map(|w| w[1].level)
        .collect();
    let above_limit = points
        .iter()
        .filter(|p| p.norm >= LIMIT)
        .map(|p| p.level)
        .collect();
    Ok(NormCurve {
        points,
        non_increasing,
        above_limit,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimRow {
    pub label: &'static str,
    pub norm: f64,
    pub total_correlation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimComparison {
    pub level: u32,
    /// `W_N^opt`, `B_{N-1,N-1}`, `B_{N-1,N-1}^trim`, `W_{N+1}^opt`.
    pub rows: Vec<TrimRow>,
    /// `‖B^trim‖ > ‖W_N^opt‖`.
    pub crossover: bool,
    /// `‖W_{N+1}^opt‖ > ‖B^trim‖`.
    pub next_level_larger: bool,
}

/// Norms and total correlations of the matrices compared in the trimming
/// discussion, at level `N ≥ 2`.
pub fn trim_compare(level: u32) -> Result<TrimComparison> {
    let opt = standard_truncation(level)?;
    let b = two_branch(level, Some(level - 1))?;
    let bt = trim(&b);
    let next = standard_truncation(level + 1)?;
    let opts = PowerOptions::default();
    let mats: [(&'static str, &TwhMatrix); 4] = [
        ("W_opt_N", &opt),
        ("B_N-1_N-1", &b),
        ("B_trim_N-1_N-1", &bt),
        ("W_opt_N+1", &next),
    ];
    let rows = crate::par::map_indexed(4, |i| {
        let (label, m) = mats[i];
        power_norm(m, opts).map(|r| TrimRow {
            label,
            norm: r.norm,
            total_correlation: total_correlation(m),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(TrimComparison {
        level,
        crossover: rows[2].norm > rows[0].norm,
        next_level_larger: rows[3].norm > rows[2].norm,
        rows,
    })
}

/// A truncation map with the norm it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub trial: u64,
    pub norm: f64,
    pub phi: TruncationMap,
}

/// A node-reduction trial whose norm went down.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionDecrease {
    pub trial: u64,
    pub before: f64,
    pub after: f64,
    pub phi: TruncationMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HuntReport {
    pub level: u32,
    pub trials: u64,
    pub seed: u64,
    pub opt_norm: f64,
    /// Norm of the untruncated matrix (`Φ ≡ 2^N`); 1 up to rounding.
    pub full_norm: f64,
    pub max_sample: Sample,
    /// Random maps whose norm exceeds `‖W_N^opt‖ + tol`.
    pub exceeding: Vec<Sample>,
    /// One-node maps whose norm went down under node reduction by more than
    /// `tol`.
    pub reduction_decreases: Vec<ReductionDecrease>,
    /// Largest `before − after` seen over the reduction trials.
    pub worst_reduction_drop: f64,
    pub tol: f64,
}

impl HuntReport {
    pub fn violations(&self) -> usize {
        self.exceeding.len() + self.reduction_decreases.len()
    }
}

fn trial_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * trial + stream);
    rng
}

fn search_norm(m: &TwhMatrix, seed: u64) -> Result<f64> {
    Ok(lanczos_norm(m, SEARCH_TOL, seed)?.norm)
}

/// Norms of `trials` random dyadic maps at level `N`. Trial `i` draws from
/// its own ChaCha stream, so the result does not depend on the thread count.
pub fn random_search(level: u32, trials: u64, seed: u64) -> Result<Vec<Sample>> {
    crate::par::map_indexed(trials as usize, |i| -> Result<Sample> {
        let trial = i as u64;
        let phi = TruncationMap::random_dyadic(level, &mut trial_rng(seed, trial, 0))?;
        let norm = search_norm(&TwhMatrix::new(phi.clone()), seed ^ trial)?;
        Ok(Sample { trial, norm, phi })
    })
    .into_iter()
    .collect()
}

/// `before − after` for `trials` random one-node maps reduced until no node
/// is left, with the trials whose drop exceeds `tol`.
pub fn reduction_search(
    level: u32,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<(f64, Vec<ReductionDecrease>)> {
    let rows = crate::par::map_indexed(trials as usize, |i| -> Result<(f64, Option<ReductionDecrease>)> {
        let trial = i as u64;
        let m = random_one_node(level, &mut trial_rng(seed, trial, 1))?;
        let before = search_norm(&m, seed ^ trial)?;
        let (reduced, _) = reduce_fully(&m)?;
        debug_assert!(nodes(&reduced)?.is_empty());
        let after = search_norm(&reduced, seed ^ trial)?;
        let drop = before - after;
        let bad = (drop > tol).then(|| ReductionDecrease {
            trial,
            before,
            after,
            phi: m.phi().clone(),
        });
        Ok((drop, bad))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, rows.into_iter().filter_map(|r| r.1).collect()))
}

/// Random dyadic maps against `‖W_N^opt‖`, and random one-node maps against
/// their fully node-reduced version.
pub fn hunt(level: u32, trials: u64, seed: u64, tol: f64) -> Result<HuntReport> {
    let opt_norm = level_eigen(level)?.lambda;
    let full = TwhMatrix::new(TruncationMap::constant(level, 1 << level)?);
    let full_norm = search_norm(&full, seed)?;
    let random = random_search(level, trials, seed)?;
    let (worst_reduction_drop, reduction_decreases) = if level >= 2 {
        reduction_search(level, trials, seed, tol)?
    } else {
        (f64::NEG_INFINITY, Vec::new())
    };

    let max_sample = random
        .iter()
        .max_by(|a, b| a.norm.total_cmp(&b.norm).then(b.trial.cmp(&a.trial)))
        .cloned()
        .unwrap_or(Sample {
            trial: 0,
            norm: full_norm,
            phi: full.phi().clone(),
        });
    let exceeding = random
        .into_iter()
        .filter(|s| s.norm > opt_norm + tol)
        .collect();
    Ok(HuntReport {
        level,
        trials,
        seed,
        opt_norm,
        full_norm,
        max_sample,
        exceeding,
        reduction_decreases,
        worst_reduction_drop,
        tol,
    })
}

/// `K` values at which `‖B_{N-1,K}‖` fails to decrease, for every level
/// `2..=n_max`.
pub fn k_monotonicity(n_max: u32) -> Result<Vec<(u32, Vec<i64>)>> {
    (2..=n_max)
        .map(|n| k_sweep(n).map(|s| (n, s.norm_violations)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn curve_is_increasing() {
        let c = norm_curve(50).unwrap();
        assert!(c.non_increasing.is_empty());
        assert!(c.above_limit.is_empty());
        assert!((c.points[3].norm - 1.366).abs() < 1e-3);
    }

    #[test]
    fn trim_compare_small() {
        let t = trim_compare(4).unwrap();
        assert!((t.rows[1].norm - 1.31).abs() < 0.01);
        assert!((t.rows[2].norm - 1.361).abs() < 1e-3);
        assert!(!t.crossover);
        assert!(t.next_level_larger);
    }

    #[test]
    fn hunt_small_is_deterministic() {
        let a = hunt(4, 50, 7, 1e-9).unwrap();
        let b = hunt(4, 50, 7, 1e-9).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.full_norm, 1.0, epsilon = 1e-12);
        assert!(a.max_sample.norm <= a.opt_norm + 1e-9);
        assert_eq!(a.violations(), 0);
    }
}
