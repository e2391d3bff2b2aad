//! Consistency theorem in both directions, validation and index windows.

mod common;

use common::{all_groups, random_matrix, random_weights, rng};
use pcgeom::group::{GroupDescriptor, GroupElement};
use pcgeom::matrix::{
    IndexSet, PcMatrix, PcOracle, ViolationKind, WeightVector, from_weights, is_consistent, recover_weights,
    triad_holonomy, validate_table,
};
use proptest::prelude::*;

fn group() -> impl Strategy<Value = GroupDescriptor> {
    prop::sample::select(all_groups())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn weights_generate_consistent_matrices(g in group(), n in 3usize..=8, seed in any::<u64>()) {
        let w = random_weights(g, n, &mut rng(seed), 1.5);
        let m = from_weights(&w);
        prop_assert!(m.validate().is_valid());
        prop_assert!(m.consistency_residual() <= 1e-9);
    }

    #[test]
    fn consistent_matrices_come_from_their_weights(g in group(), n in 3usize..=8, seed in any::<u64>()) {
        let m = from_weights(&random_weights(g, n, &mut rng(seed), 1.5));
        let back = from_weights(&recover_weights(&m));
        prop_assert!(back.max_entry_distance(&m).unwrap() <= 1e-9);
    }

    #[test]
    fn recovered_weights_are_unique_up_to_the_base(g in group(), n in 2usize..=6, seed in any::<u64>()) {
        // λ and k·λ give the same matrix; recovery returns k·λ with λ_0 = 1.
        let w = random_weights(g, n, &mut rng(seed), 1.0);
        let lambda0_inv = g.inverse(&w.weights[0]).unwrap();
        let normalized: Vec<GroupElement> =
            w.weights.iter().map(|l| g.compose(&lambda0_inv, l).unwrap()).collect();
        let got = recover_weights(&from_weights(&w));
        for (a, b) in got.weights.iter().zip(&normalized) {
            prop_assert!(g.distance(a, b).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn random_matrices_are_valid_and_round_trip_tables(g in group(), n in 1usize..=6, seed in any::<u64>()) {
        let m = random_matrix(g, n, &mut rng(seed), 1.0);
        prop_assert!(m.validate().is_valid());
        let table = m.to_table();
        prop_assert!(validate_table(&g, &table).is_valid());
        prop_assert_eq!(PcMatrix::from_table(g, &table).unwrap(), m);
    }

    #[test]
    fn consistency_is_trivial_triad_holonomy(g in group(), n in 3usize..=6, seed in any::<u64>(), consistent in any::<bool>()) {
        let mut r = rng(seed);
        let m = if consistent {
            from_weights(&random_weights(g, n, &mut r, 1.0))
        } else {
            random_matrix(g, n, &mut r, 1.0)
        };
        let e = g.identity();
        let mut trivial = true;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && j != k && i != k {
                        trivial &= g.distance(&triad_holonomy(&m, i, j, k).unwrap(), &e).unwrap() <= 1e-9;
                    }
                }
            }
        }
        prop_assert_eq!(trivial, is_consistent(&m, 1e-9));
        prop_assert_eq!(consistent, is_consistent(&m, 1e-9));
    }

    #[test]
    fn transposition_is_an_involution(g in group(), n in 2usize..=6, seed in any::<u64>()) {
        let m = random_matrix(g, n, &mut rng(seed), 1.0);
        prop_assert!(m.transpose().transpose().max_entry_distance(&m).unwrap() <= 1e-12);
        for i in 0..n {
            for j in 0..n {
                // One side is a stored reciprocal, so agreement is to rounding.
                prop_assert!(g.distance(&m.transpose().get(i, j), &m.get(j, i)).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn windows_of_consistent_matrices_are_consistent(g in group(), seed in any::<u64>(), lo in 0usize..3, len in 1usize..4) {
        let m = from_weights(&random_weights(g, 6, &mut rng(seed), 1.0));
        let w = m.window(lo, lo + len).unwrap();
        prop_assert_eq!(w.size(), len + 1);
        prop_assert!(w.consistency_residual() <= 1e-9);
        prop_assert_eq!(w.get(0, 1), m.get(lo, lo + 1));
    }
}

#[test]
fn table_validation_reports_each_condition() {
    let g = GroupDescriptor::positive_reals();
    let p = GroupElement::PositiveReal;
    let bad_diag = vec![vec![p(2.0), p(2.0)], vec![p(0.5), p(1.0)]];
    assert_eq!(validate_table(&g, &bad_diag).first().unwrap().kind, ViolationKind::Diagonal);
    let bad_anti = vec![vec![p(1.0), p(2.0)], vec![p(0.4), p(1.0)]];
    let report = validate_table(&g, &bad_anti);
    assert_eq!(report.first().unwrap().kind, ViolationKind::Antisymmetry);
    assert_eq!((report.first().unwrap().i, report.first().unwrap().j), (1, 0));
    let bad_member = vec![vec![p(1.0), GroupElement::Angle(0.1)], vec![p(1.0), p(1.0)]];
    assert_eq!(validate_table(&g, &bad_member).first().unwrap().kind, ViolationKind::Membership);
    let ragged = vec![vec![p(1.0), p(2.0)], vec![p(0.5)]];
    assert_eq!(validate_table(&g, &ragged).first().unwrap().kind, ViolationKind::Shape);
}

#[test]
fn heisenberg_gauge_telescopes_to_weights() {
    let g = GroupDescriptor::heisenberg3();
    let mut r = rng(5);
    for n in 3..=6 {
        let mut w = random_weights(g, n, &mut r, 1.0);
        w.weights[0] = g.identity();
        let m = from_weights(&w);
        let gauge = pcgeom::holonomy::build_gauge(&m);
        for (s, l) in gauge.elements.iter().zip(&w.weights) {
            assert!(g.distance(s, l).unwrap() <= 1e-12);
        }
    }
}

#[test]
fn integer_oracle_windows_recover_weights_around_zero() {
    // a_ij = λ_i⁻¹λ_j with λ_i = 2^i on all of ℤ.
    let oracle = PcOracle::new(IndexSet::Integers, GroupDescriptor::positive_reals(), |i, j| {
        GroupElement::PositiveReal(2f64.powi((j - i) as i32))
    })
    .unwrap();
    for (lo, hi) in [(-3, 2), (-1, 4), (0, 3), (-5, -1)] {
        let m = oracle.window(lo, hi).unwrap();
        assert!(is_consistent(&m, 1e-12));
        let w = recover_weights(&m);
        assert_eq!(w.origin, lo);
        let expected: Vec<f64> = if lo <= 0 && hi >= 0 {
            (lo..=hi).map(|i| 2f64.powi(i as i32)).collect()
        } else {
            // No label 0 in the window: the first index is the base.
            (lo..=hi).map(|i| 2f64.powi((i - lo) as i32)).collect()
        };
        assert_eq!(w.as_f64().unwrap(), expected, "window [{lo}, {hi}]");
    }
}

#[test]
fn naturals_oracle_rejects_negative_windows() {
    let oracle = PcOracle::new(IndexSet::Naturals, GroupDescriptor::circle(), |i, j| {
        GroupElement::Angle((j - i) as f64 * 0.1)
    })
    .unwrap();
    assert!(oracle.window(-1, 2).is_err());
    let m = oracle.window(0, 4).unwrap();
    assert!(is_consistent(&m, 1e-12));
    assert!(PcOracle::new(IndexSet::Finite(3), GroupDescriptor::circle(), |_, _| GroupElement::Angle(0.0)).is_err());
}

#[test]
fn weight_vectors_check_membership() {
    let g = GroupDescriptor::positive_reals();
    assert!(WeightVector::new(g, vec![GroupElement::PositiveReal(1.0), GroupElement::Angle(0.2)]).is_err());
    assert!(WeightVector::positive_reals(&[1.0, -1.0]).is_err());
}
