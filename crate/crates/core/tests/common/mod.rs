#![allow(dead_code)]

use pcgeom::group::{GroupDescriptor, GroupElement};
use pcgeom::matrix::{PcMatrix, WeightVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// One representative of every supported kind.
pub fn all_groups() -> Vec<GroupDescriptor> {
    vec![
        GroupDescriptor::positive_reals(),
        GroupDescriptor::circle(),
        GroupDescriptor::positive_reals_power(3),
        GroupDescriptor::heisenberg3(),
        GroupDescriptor::upper_triangular_positive(3),
    ]
}

pub fn random_matrix(g: GroupDescriptor, n: usize, rng: &mut StdRng, spread: f64) -> PcMatrix {
    PcMatrix::from_fn(g, n, |_, _| g.random_element(rng, spread)).unwrap()
}

pub fn random_weights(g: GroupDescriptor, n: usize, rng: &mut StdRng, spread: f64) -> WeightVector {
    let weights = (0..n).map(|_| g.random_element(rng, spread)).collect();
    WeightVector::new(g, weights).unwrap()
}

/// Entries `e^u`, `u` uniform in `[−spread, spread]`.
pub fn random_positive_matrix(n: usize, rng: &mut StdRng, spread: f64) -> PcMatrix {
    PcMatrix::from_fn(GroupDescriptor::positive_reals(), n, |_, _| {
        GroupElement::PositiveReal(rng.random_range(-spread..=spread).exp())
    })
    .unwrap()
}

pub fn real(g: &GroupElement) -> f64 {
    g.as_positive_real().expect("positive real")
}
