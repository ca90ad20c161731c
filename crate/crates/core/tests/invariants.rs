use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walsh_trunc::spectral::{dense_norm, power_norm, PowerOptions};
use walsh_trunc::truncation::{bit_length, nodes, random_one_node};
use walsh_trunc::{
    analyze, build_wh, column_inner, equivalence_transform, reduce_fully, standard_truncation,
    synthesize, trim, StepFunction, TruncationMap, TwhMatrix,
};

fn random_matrix(level: u32, seed: u64) -> TwhMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TwhMatrix::new(TruncationMap::random_dyadic(level, &mut rng).unwrap())
}

// Inner product of two columns summed entry by entry from the dense matrix.
fn dense_inner(m: &TwhMatrix, i: usize, j: usize) -> f64 {
    let d = m.to_dense(10).unwrap();
    (0..m.size()).map(|n| d[(n, i)] * d[(n, j)]).sum()
}

fn assert_dichotomy(m: &TwhMatrix) {
    for i in 0..m.size() {
        for j in 0..m.size() {
            assert!(pair_is_dichotomous(m, i, j), "columns {i}, {j}");
        }
    }
}

fn pair_is_dichotomous(m: &TwhMatrix, i: usize, j: usize) -> bool {
    let v = column_inner(m, i, j);
    let short = m.column_length(i).min(m.column_length(j)) as f64 / (1u64 << m.level()) as f64;
    v == 0.0 || v.abs() == short
}

#[test]
fn dichotomy_exhaustive_small() {
    // A column pair only sees its own two lengths, so running over every
    // pair of columns and every pair of dyadic lengths covers all maps.
    for level in 1..=4u32 {
        let size = 1usize << level;
        for i in 0..size {
            for j in 0..size {
                for a in 0..=level {
                    for b in 0..=level {
                        if i == j && a != b {
                            continue;
                        }
                        let mut lengths = vec![1; size];
                        lengths[i] = 1 << a;
                        lengths[j] = 1 << b;
                        let m = TwhMatrix::new(TruncationMap::new(level, lengths).unwrap());
                        assert!(pair_is_dichotomous(&m, i, j), "N={level} ({i},{j}) 2^{a} 2^{b}");
                    }
                }
            }
        }
    }
}

#[test]
fn column_inner_matches_dense_sum() {
    for seed in 0..20 {
        let m = random_matrix(4, seed);
        for i in 0..16 {
            for j in 0..16 {
                assert!((column_inner(&m, i, j) - dense_inner(&m, i, j)).abs() < 1e-15);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dichotomy_random(level in 5u32..=8, seed in any::<u64>()) {
        assert_dichotomy(&random_matrix(level, seed));
    }

    #[test]
    fn equivalence_preserves_gram(level in 1u32..=6, seed in any::<u64>(), h in any::<usize>()) {
        let m = random_matrix(level, seed);
        let h = h % m.size();
        let t = equivalence_transform(&m, h).unwrap();
        let g = m.to_dense(10).unwrap().gram();
        let gt = t.to_dense(10).unwrap().gram();
        prop_assert!(g.max_abs_diff(&gt) <= 1e-14);
        prop_assert_eq!(t.column_lengths(), m.column_lengths());
    }

    #[test]
    fn trim_is_idempotent_and_shortens(level in 1u32..=7, seed in any::<u64>()) {
        let m = random_matrix(level, seed);
        let t = trim(&m);
        prop_assert_eq!(trim(&t), t.clone());
        for (a, b) in t.column_lengths().iter().zip(m.column_lengths()) {
            prop_assert!(*a <= b);
            prop_assert!(*a >= 1);
        }
    }

    #[test]
    fn analyze_inverts_synthesize(level in 1u32..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..1usize << level)
            .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
            .collect();
        let f = synthesize(level, &coeffs).unwrap();
        for (a, b) in analyze(&f).iter().zip(&coeffs) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
        let g = StepFunction::new(level, coeffs.clone()).unwrap();
        let back = synthesize(level, &analyze(&g)).unwrap();
        for (a, b) in back.coeffs().iter().zip(&coeffs) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn fast_products_match_dense(level in 1u32..=7, seed in any::<u64>()) {
        let m = random_matrix(level, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u: Vec<f64> = (0..m.size()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let d = m.to_dense(10).unwrap();
        for (a, b) in m.apply(&u).iter().zip(d.matvec(&u)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in m.apply_transpose(&u).iter().zip(d.matvec_transpose(&u)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduction_terminates_without_nodes(level in 2u32..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_one_node(level, &mut rng).unwrap();
        let (r, passes) = reduce_fully(&m).unwrap();
        prop_assert!(passes <= level as usize);
        prop_assert!(nodes(&r).unwrap().is_empty());
    }

    #[test]
    fn power_norm_matches_dense(level in 1u32..=6, seed in any::<u64>()) {
        let m = random_matrix(level, seed);
        let p = power_norm(&m, PowerOptions::default()).unwrap().norm;
        let d = dense_norm(&m.to_dense(10).unwrap()).unwrap().norm;
        prop_assert!((p - d).abs() <= 1e-9);
    }
}

#[test]
fn standard_length_sum() {
    for level in 1..=16u32 {
        let phi = TruncationMap::standard(level).unwrap();
        let sum: usize = phi.lengths().iter().sum();
        assert_eq!(sum, (1 << level) + level as usize * (1 << (level - 1)));
        for (k, &l) in phi.lengths().iter().enumerate().skip(1) {
            assert_eq!(l, 1 << (level - bit_length(k)));
        }
    }
}

#[test]
fn standard_truncation_is_a_single_branch() {
    for level in 1..=10u32 {
        let m = standard_truncation(level).unwrap();
        let d = walsh_trunc::branch_decompose(&m).unwrap();
        assert_eq!(d.branches.len(), 1, "level {level}");
        assert!(d.nodes.is_empty());
    }
}

#[test]
fn wh_block_identity() {
    // WH_N = [WH_{N-1} ⊗ (1, 1); WH_{N-1} ⊗ (1, -1)] / √2
    for level in 2..=8u32 {
        let big = build_wh(level).unwrap();
        let small = build_wh(level - 1).unwrap();
        let half = 1usize << (level - 1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for n in 0..2 * half {
            for k in 0..2 * half {
                let (src, flip) = if n < half { (n, 1.0) } else { (n - half, -1.0) };
                let f = if k % 2 == 1 { flip } else { 1.0 };
                let expect = r * f * small.entry(src, k / 2);
                assert!((big.entry(n, k) - expect).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn wh_is_orthogonal() {
    for level in 1..=8u32 {
        let d = build_wh(level).unwrap().into_dense();
        let g = d.gram();
        let id = walsh_trunc::DenseMatrix::identity(d.rows());
        assert!(g.max_abs_diff(&id) < 1e-13);
    }
}
