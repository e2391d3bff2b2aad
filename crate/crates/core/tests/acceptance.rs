//! Acceptance gate: one line per primary criterion, nonzero exit if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{all_groups, random_matrix, random_positive_matrix, random_weights, rng};
use pcgeom::distance::{
    brute_force_consistent, consistent_matrices_sharing_k, distance_matrix_of, enumerate_pc_from_distance,
    same_matrix_sets,
};
use pcgeom::group::{GroupDescriptor, GroupElement};
use pcgeom::holonomy::{
    DEFAULT_STEPS, Quadrature, face_holonomies, flat_connection_from_consistent, roundtrip_residual,
};
use pcgeom::inconsistency::{matrix_ii_chain, matrix_ii_local, reduce, reduce_step, triad_ii, triad_ii_log_form};
use pcgeom::matrix::{PcMatrix, from_weights, is_consistent, recover_weights};
use rand::Rng;

/// Outcome of one criterion: a summary on success, the reasons on failure.
type Check = Result<String, Vec<String>>;

struct Criterion {
    number: usize,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn example_a() -> PcMatrix {
    PcMatrix::positive_reals(&[1.5, 3.0, 2.0]).unwrap()
}

fn noncoherent() -> PcMatrix {
    PcMatrix::positive_reals(&[2.0, 1.0 / 3.0, 2.0]).unwrap()
}

fn finish(failures: Vec<String>, summary: String) -> Check {
    if failures.is_empty() { Ok(summary) } else { Err(failures) }
}

fn worked_example() -> Check {
    let mut fail = Vec::new();
    let a = PcMatrix::from_table(
        GroupDescriptor::positive_reals(),
        &[
            vec![1.0, 1.5, 3.0],
            vec![2.0 / 3.0, 1.0, 2.0],
            vec![1.0 / 3.0, 0.5, 1.0],
        ]
        .iter()
        .map(|r| r.iter().map(|&x| GroupElement::PositiveReal(x)).collect())
        .collect::<Vec<_>>(),
    )
    .unwrap();
    if !is_consistent(&a, 1e-12) {
        fail.push("A is not consistent at 1e-12".into());
    }
    let w = recover_weights(&a).as_f64().unwrap();
    if w != [1.0, 1.5, 3.0] {
        fail.push(format!("weights {w:?}"));
    }
    let k = distance_matrix_of(&a).unwrap();
    for (i, j, v) in [(0, 1, 1.5f64.ln()), (1, 2, 2f64.ln()), (0, 2, 3f64.ln())] {
        if (k.get(i, j) - v).abs() > 1e-12 || (k.get(j, i) - v).abs() > 1e-12 {
            fail.push(format!("k[{i}][{j}] = {}", k.get(i, j)));
        }
    }
    let nc = noncoherent();
    let r = matrix_ii_local(&nc).unwrap();
    if (r.value - (1.0 - 1.0 / 12.0)).abs() > 1e-12 || r.worst_triad != Some([0, 1, 2]) {
        fail.push(format!("non-coherent ii {} at {:?}", r.value, r.worst_triad));
    }
    // The non-coherent matrix is stated to have the same distance matrix as A.
    let knc = distance_matrix_of(&nc).unwrap();
    let gap = knc.max_abs_diff(&k);
    if gap > 1e-12 {
        fail.push(format!(
            "non-coherent K differs from K(A): k01 = {:.6} vs {:.6}, k02 = {:.6} vs {:.6} (max |diff| {gap:.6})",
            knc.get(0, 1),
            k.get(0, 1),
            knc.get(0, 2),
            k.get(0, 2)
        ));
    }
    finish(fail, "A consistent, weights (1, 1.5, 3), K matches, ii = 1 - 1/12 at (0,1,2)".into())
}

fn consistency_theorem() -> Check {
    let mut fail = Vec::new();
    let mut r = rng(2024);
    let mut worst = (0.0f64, 0.0f64);
    for g in all_groups() {
        for t in 0..1000 {
            let n = 3 + t % 6;
            let m = from_weights(&random_weights(g, n, &mut r, 1.0));
            let residual = m.consistency_residual();
            let back = from_weights(&recover_weights(&m)).max_entry_distance(&m).unwrap();
            worst = (worst.0.max(residual), worst.1.max(back));
            if residual > 1e-9 {
                fail.push(format!("{g} n={n}: residual {residual:e}"));
            }
            if back > 1e-9 {
                fail.push(format!("{g} n={n}: regenerated entries off by {back:e}"));
            }
        }
    }
    fail.truncate(10);
    finish(
        fail,
        format!("5000 matrices; max residual {:.1e}, max regeneration error {:.1e}", worst.0, worst.1),
    )
}

fn ii_equivalence() -> Check {
    let mut fail = Vec::new();
    let mut r = rng(7);
    let mut max_gap = 0.0f64;
    for _ in 0..100_000 {
        let [x, y, z] = [0; 3].map(|_| r.random_range(-5.0f64..5.0).exp());
        let gap = (triad_ii(x, y, z).unwrap() - triad_ii_log_form(x, y, z).unwrap()).abs();
        max_gap = max_gap.max(gap);
        if gap > 1e-12 {
            fail.push(format!("triad ({x}, {y}, {z}): forms differ by {gap:e}"));
        }
    }
    let mut consistent = 0;
    for t in 0..10_000 {
        let n = 2 + t % 5;
        let m = if t % 2 == 0 {
            from_weights(&random_weights(GroupDescriptor::positive_reals(), n, &mut r, 1.5))
        } else {
            random_positive_matrix(n, &mut r, 1.5)
        };
        let local = matrix_ii_local(&m).unwrap().value <= 1e-9;
        let chain = matrix_ii_chain(&m).unwrap() <= 1e-9;
        let c = is_consistent(&m, 1e-9);
        consistent += usize::from(c);
        if local != chain || chain != c {
            fail.push(format!("n={n}: local {local}, chain {chain}, consistent {c}"));
        }
    }
    fail.truncate(10);
    finish(
        fail,
        format!("max triad-form gap {max_gap:.1e}; 10^4 matrices ({consistent} consistent) agree"),
    )
}

/// Consistent matrix with all pairwise log gaps at least `1e−6`.
fn separated_consistent(n: usize, r: &mut rand::rngs::StdRng) -> PcMatrix {
    loop {
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        if (0..n).all(|i| (i + 1..n).all(|j| (mu[j] - mu[i]).abs() >= 1e-6)) {
            return PcMatrix::from_fn(GroupDescriptor::positive_reals(), n, |i, j| {
                GroupElement::PositiveReal((mu[j] - mu[i]).exp())
            })
            .unwrap();
        }
    }
}

fn counting() -> Check {
    let mut fail = Vec::new();
    let a = example_a();
    let k = distance_matrix_of(&a).unwrap();
    let all = enumerate_pc_from_distance(&k).unwrap();
    if all.len() != 8 {
        fail.push(format!("K(A) enumerates {} matrices", all.len()));
    }
    let survivors = consistent_matrices_sharing_k(&k).unwrap().survivors;
    if !same_matrix_sets(&survivors, &[a.clone(), a.transpose()], 1e-12) {
        fail.push(format!("K(A) consistent filter returned {} matrices", survivors.len()));
    }
    let mut r = rng(404);
    for t in 0..200 {
        let n = 2 + t % 4;
        let m = separated_consistent(n, &mut r);
        let k = distance_matrix_of(&m).unwrap();
        let s = consistent_matrices_sharing_k(&k).unwrap().survivors;
        let brute = brute_force_consistent(&k, 1e-9).unwrap();
        let transposed = s.len() == 2 && s[0].transpose().max_entry_distance(&s[1]).unwrap() <= 1e-12;
        if !transposed {
            fail.push(format!("trial {t} (n={n}): {} survivors", s.len()));
        }
        if !same_matrix_sets(&s, &brute, 1e-9) {
            fail.push(format!("trial {t} (n={n}): brute force found {}", brute.len()));
        }
    }
    finish(fail, "K(A) gives 8 and {A, A^T}; 200 random cases give 2 transposed survivors".into())
}

fn holonomy_roundtrip() -> Check {
    let mut fail = Vec::new();
    let mut r = rng(77);
    let mut worst = (0.0f64, 0.0f64);
    let mut min_ratio = f64::INFINITY;
    for g in all_groups() {
        for t in 0..100 {
            let n = 2 + t % 4;
            let m = random_matrix(g, n, &mut r, 1.0);
            let exact = roundtrip_residual(&m, Quadrature::Exact).unwrap();
            let mid = roundtrip_residual(&m, Quadrature::Midpoint(DEFAULT_STEPS)).unwrap();
            worst = (worst.0.max(exact), worst.1.max(mid));
            if exact > 1e-8 || mid > 1e-8 {
                fail.push(format!("{g} n={n}: residual exact {exact:e}, midpoint {mid:e}"));
            }
            if t < 10 {
                let mut prev = roundtrip_residual(&m, Quadrature::Midpoint(4)).unwrap();
                let mut steps = 8;
                while steps <= 512 {
                    let cur = roundtrip_residual(&m, Quadrature::Midpoint(steps)).unwrap();
                    if cur <= 1e-12 {
                        break;
                    }
                    let ratio = prev / cur;
                    min_ratio = min_ratio.min(ratio);
                    if ratio < 4.0 {
                        fail.push(format!("{g} n={n}: halving to {steps} steps reduced {prev:e} -> {cur:e}"));
                    }
                    prev = cur;
                    steps *= 2;
                }
            }
        }
    }
    fail.truncate(10);
    finish(
        fail,
        format!(
            "500 matrices; max residual exact {:.1e}, midpoint {:.1e}; min halving ratio {min_ratio:.2}",
            worst.0, worst.1
        ),
    )
}

fn flatness() -> Check {
    let mut fail = Vec::new();
    let mut r = rng(500);
    let mut worst = (0.0f64, 0.0f64);
    for g in [GroupDescriptor::positive_reals(), GroupDescriptor::positive_reals_power(3)] {
        for t in 0..500 {
            let n = 3 + t % 4;
            let m = from_weights(&random_weights(g, n, &mut r, 1.5));
            let flat = flat_connection_from_consistent(&m, 1e-9).unwrap();
            for q in [Quadrature::Exact, Quadrature::Midpoint(DEFAULT_STEPS)] {
                for (ijk, h) in face_holonomies(&flat, q).unwrap() {
                    let d = g.distance(&h, &g.identity()).unwrap();
                    worst.0 = worst.0.max(d);
                    if d > 1e-9 {
                        fail.push(format!("{g} n={n}: face {ijk:?} holonomy off by {d:e}"));
                    }
                }
            }
            for (a, b) in flat.weights().weights.iter().zip(&recover_weights(&m).weights) {
                let d = g.distance(a, b).unwrap();
                worst.1 = worst.1.max(d);
                if d > 1e-12 {
                    fail.push(format!("{g} n={n}: e^f differs from recovered weight by {d:e}"));
                }
            }
        }
    }
    fail.truncate(10);
    finish(
        fail,
        format!("1000 matrices; max face holonomy {:.1e}, max weight gap {:.1e}", worst.0, worst.1),
    )
}

fn reduction() -> Check {
    let mut fail = Vec::new();
    let mut r = rng(9);
    let ln9 = 9f64.ln();
    for t in 0..10_000 {
        let m = random_positive_matrix(3, &mut r, ln9);
        let step = reduce_step(&m).unwrap();
        if step.ii_after > 1e-12 {
            fail.push(format!("n=3 trial {t}: ii {} after one step", step.ii_after));
        }
    }
    let trials = 500;
    let mut summary = vec!["n=3: 10^4 one-step".to_string()];
    for n in 3..=6 {
        let mut steps_needed = Vec::new();
        let mut misses = 0;
        for _ in 0..trials {
            let m = random_positive_matrix(n, &mut r, ln9);
            let (_, trace) = reduce(&m, 200).unwrap();
            match trace.iter().position(|s| s.ii_after < 0.01) {
                Some(p) => steps_needed.push(p + 1),
                None if matrix_ii_local(&m).unwrap().value < 0.01 => steps_needed.push(0),
                None => misses += 1,
            }
        }
        steps_needed.sort_unstable();
        let rate = steps_needed.len() as f64 / trials as f64;
        let q = |p: f64| steps_needed.get(((steps_needed.len() as f64 - 1.0) * p) as usize).copied().unwrap_or(0);
        summary.push(format!(
            "n={n}: {:.1}% (steps median {}, p90 {}, max {})",
            100.0 * rate,
            q(0.5),
            q(0.9),
            q(1.0)
        ));
        if rate < 0.99 {
            fail.push(format!("n={n}: only {:.1}% reached ii < 0.01 ({misses} misses)", 100.0 * rate));
        }
    }
    fail.truncate(10);
    finish(fail, summary.join("; "))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, title: "worked example", limit: Some(Duration::from_secs(1)), run: worked_example },
        Criterion { number: 2, title: "consistency theorem", limit: Some(Duration::from_secs(30)), run: consistency_theorem },
        Criterion { number: 3, title: "ii equivalence", limit: Some(Duration::from_secs(30)), run: ii_equivalence },
        Criterion { number: 4, title: "distance-matrix counting", limit: Some(Duration::from_secs(120)), run: counting },
        Criterion { number: 5, title: "holonomy round trip", limit: Some(Duration::from_secs(120)), run: holonomy_roundtrip },
        Criterion { number: 6, title: "flatness", limit: Some(Duration::from_secs(30)), run: flatness },
        Criterion { number: 7, title: "reduction", limit: None, run: reduction },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(vec![format!("took {elapsed:.2?}, limit {limit:?}")]),
            (o, _) => o,
        };
        match outcome {
            Ok(summary) => println!("[PASS] criterion {} {}: {summary} ({elapsed:.2?})", c.number, c.title),
            Err(reasons) => {
                failed += 1;
                println!("[FAIL] criterion {} {}: {} ({elapsed:.2?})", c.number, c.title, reasons.join("; "));
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
