//! Distance matrices and the sign-enumeration counting results.

mod common;

use approx::assert_relative_eq;
use common::{random_positive_matrix, rng};
use pcgeom::distance::{
    DistanceMatrix, MAX_SIGN_PAIRS, brute_force_consistent, consistent_matrices_sharing_k, distance_matrix_of,
    enumerate_pc_from_distance, enumerate_signed, same_matrix_sets, triangle_check,
};
use pcgeom::group::{GroupDescriptor, GroupElement};
use pcgeom::matrix::{PcMatrix, is_consistent};
use proptest::prelude::*;
use rand::Rng;
use rand::rngs::StdRng;

fn example_a() -> PcMatrix {
    PcMatrix::positive_reals(&[1.5, 3.0, 2.0]).unwrap()
}

/// Consistent matrix from log-weights whose pairwise gaps all exceed `1e−6`.
fn random_consistent(n: usize, r: &mut StdRng) -> PcMatrix {
    loop {
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let separated = (0..n).all(|i| (i + 1..n).all(|j| (mu[j] - mu[i]).abs() >= 1e-6));
        if separated {
            return PcMatrix::from_fn(GroupDescriptor::positive_reals(), n, |i, j| {
                GroupElement::PositiveReal((mu[j] - mu[i]).exp())
            })
            .unwrap();
        }
    }
}

/// Plain binary counting over the nonzero pairs, in lexicographic pair order.
fn binary_oracle(k: &DistanceMatrix) -> Vec<PcMatrix> {
    let n = k.size();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| k.get(i, j) > 1e-12)
        .collect();
    (0..1u64 << pairs.len())
        .map(|mask| {
            PcMatrix::from_fn(GroupDescriptor::positive_reals(), n, |i, j| {
                let s = match pairs.iter().position(|&p| p == (i, j)) {
                    Some(b) if mask >> b & 1 == 1 => -1.0,
                    Some(_) => 1.0,
                    None => 0.0,
                };
                GroupElement::PositiveReal((s * k.get(i, j)).exp())
            })
            .unwrap()
        })
        .collect()
}

fn is_transpose_pair(a: &PcMatrix, b: &PcMatrix) -> bool {
    a.transpose().max_entry_distance(b).unwrap() <= 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_counts_and_reproduces_k(n in 1usize..=5, seed in any::<u64>(), zeros in 0usize..4) {
        let mut r = rng(seed);
        let mut m = random_positive_matrix(n, &mut r, 2.0);
        // Knock out a few entries so N varies.
        for _ in 0..zeros.min(n * n.saturating_sub(1) / 2) {
            if n >= 2 {
                let i = r.random_range(0..n - 1);
                let j = r.random_range(i + 1..n);
                m.set(i, j, GroupElement::PositiveReal(1.0)).unwrap();
            }
        }
        let k = distance_matrix_of(&m).unwrap();
        let nonzero = k.nonzero_count();
        prop_assert_eq!(nonzero % 2, 0);
        let all = enumerate_pc_from_distance(&k).unwrap();
        prop_assert_eq!(all.len(), 1usize << (nonzero / 2));
        for a in &all {
            prop_assert!(a.validate().is_valid());
            prop_assert!(distance_matrix_of(a).unwrap().max_abs_diff(&k) <= 1e-12);
        }
        prop_assert!(same_matrix_sets(&all, &binary_oracle(&k), 0.0));
        prop_assert!(all.iter().any(|a| a.max_entry_distance(&m).unwrap() <= 1e-12));
    }

    #[test]
    fn transposition_keeps_k(n in 1usize..=6, seed in any::<u64>()) {
        let m = random_positive_matrix(n, &mut rng(seed), 2.0);
        let k = distance_matrix_of(&m).unwrap();
        prop_assert!(distance_matrix_of(&m.transpose()).unwrap().max_abs_diff(&k) <= 4.0 * f64::EPSILON);
        for i in 0..n {
            prop_assert_eq!(k.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
    }

    #[test]
    fn consistent_k_satisfies_the_triangle_inequality(n in 3usize..=6, seed in any::<u64>()) {
        let m = random_consistent(n, &mut rng(seed));
        prop_assert!(triangle_check(&distance_matrix_of(&m).unwrap()).holds);
    }

    #[test]
    fn csv_round_trip(n in 1usize..=6, seed in any::<u64>()) {
        let k = distance_matrix_of(&random_positive_matrix(n, &mut rng(seed), 2.0)).unwrap();
        prop_assert_eq!(DistanceMatrix::from_csv(&k.to_csv()).unwrap(), k);
    }
}

#[test]
fn example_distance_matrix() {
    let k = distance_matrix_of(&example_a()).unwrap();
    let expected = [
        [0.0, 1.5f64.ln(), 3f64.ln()],
        [1.5f64.ln(), 0.0, 2f64.ln()],
        [3f64.ln(), 2f64.ln(), 0.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert_relative_eq!(k.get(i, j), expected[i][j], epsilon = 1e-15);
        }
    }
    assert!(triangle_check(&k).holds);
    assert_eq!(enumerate_pc_from_distance(&k).unwrap().len(), 8);
    assert!(distance_matrix_of(&PcMatrix::identity(GroupDescriptor::positive_reals(), 3)).unwrap().is_zero());
}

#[test]
fn triangle_violation_is_reported() {
    let k = DistanceMatrix::from_rows(&[vec![0.0, 1.0, 10.0], vec![1.0, 0.0, 1.0], vec![10.0, 1.0, 0.0]]).unwrap();
    let report = triangle_check(&k);
    assert!(!report.holds);
    assert!(report.violations.contains(&[0, 1, 2]));
    assert!(triangle_check(&DistanceMatrix::zeros(4)).holds);
}

#[test]
fn zero_k_has_one_preimage() {
    let k = DistanceMatrix::zeros(4);
    let all = enumerate_pc_from_distance(&k).unwrap();
    assert_eq!(all, vec![PcMatrix::identity(GroupDescriptor::positive_reals(), 4)]);
    let sharing = consistent_matrices_sharing_k(&k).unwrap();
    assert_eq!(sharing.survivors, all);
}

#[test]
fn four_by_four_gives_sixty_four() {
    let m = random_consistent(4, &mut rng(2));
    let k = distance_matrix_of(&m).unwrap();
    assert_eq!(k.nonzero_count(), 12);
    let all = enumerate_signed(&k).unwrap();
    assert_eq!(all.len(), 64);
    for e in &all {
        assert_eq!(e.signs.len(), 6);
        assert!(distance_matrix_of(&e.matrix).unwrap().max_abs_diff(&k) <= 1e-12);
    }
    // Gray-code order: neighbours differ in exactly one sign.
    for w in all.windows(2) {
        let flips = w[0].signs.iter().zip(w[1].signs.iter()).filter(|(a, b)| a.1 != b.1).count();
        assert_eq!(flips, 1);
    }
}

#[test]
fn exactly_two_consistent_matrices_share_k() {
    let mut r = rng(1000);
    for trial in 0..1000 {
        let n = 2 + trial % 4;
        let m = random_consistent(n, &mut r);
        let k = distance_matrix_of(&m).unwrap();
        let sharing = consistent_matrices_sharing_k(&k).unwrap();
        assert_eq!(sharing.survivors.len(), 2, "trial {trial}");
        let (a, b) = (&sharing.survivors[0], &sharing.survivors[1]);
        assert!(is_transpose_pair(a, b));
        assert!(sharing.survivors.iter().any(|s| s.max_entry_distance(&m).unwrap() <= 1e-9));
    }
}

#[test]
fn five_by_five_stage_one_has_sixteen_candidates() {
    let mut r = rng(55);
    for _ in 0..5 {
        let m = random_consistent(5, &mut r);
        let k = distance_matrix_of(&m).unwrap();
        let sharing = consistent_matrices_sharing_k(&k).unwrap();
        assert_eq!(sharing.candidates.len(), 16);
        assert!(sharing.candidates.iter().all(|c| is_consistent(c, 1e-9)));
        let brute = brute_force_consistent(&k, 1e-9).unwrap();
        assert!(same_matrix_sets(&sharing.survivors, &brute, 1e-9));
        assert_eq!(brute.len(), 2);
    }
}

#[test]
fn example_matrix_shares_k_only_with_its_transpose() {
    let a = example_a();
    let sharing = consistent_matrices_sharing_k(&distance_matrix_of(&a).unwrap()).unwrap();
    assert!(same_matrix_sets(&sharing.survivors, &[a.clone(), a.transpose()], 1e-12));
}

#[test]
fn guard_rejects_large_enumerations() {
    let m = random_consistent(8, &mut rng(3));
    let k = distance_matrix_of(&m).unwrap();
    assert!(k.nonzero_count() / 2 > MAX_SIGN_PAIRS);
    let err = enumerate_pc_from_distance(&k).unwrap_err();
    assert!(err.to_string().contains("consistent-only"));
    // Stage one only signs the superdiagonal, so it still runs.
    assert_eq!(consistent_matrices_sharing_k(&k).unwrap().survivors.len(), 2);
}

#[test]
fn rejects_bad_distance_data() {
    assert!(DistanceMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
    assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
    assert!(DistanceMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
    assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
    let circle = PcMatrix::identity(GroupDescriptor::circle(), 3);
    assert!(distance_matrix_of(&circle).is_err());
}
