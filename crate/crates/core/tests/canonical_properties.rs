mod common;

use beliefnet::canonical::{
    compile_to_cpt, diff_cpts, expand_leaky_noisy_or, expand_noisy_max, parameter_counts, CanonicalError, LeakConvention,
    MaxCause, NoisyMaxSpec, NoisyOrSpec,
};
use beliefnet::random::random_noisy_max;
use common::joint_draw_max;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &c in cards {
        out = out.into_iter().flat_map(|a| (0..c).map(move |l| [a.clone(), vec![l]].concat())).collect();
    }
    out
}

#[test]
fn noisy_max_matches_joint_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let parents = rng.gen_range(1..=4);
        let cards: Vec<usize> = (0..parents).map(|_| rng.gen_range(2..=4)).collect();
        let child = rng.gen_range(2..=4);
        let convention = if i % 2 == 0 { LeakConvention::Included } else { LeakConvention::Excluded };
        let (spec, pure) = random_noisy_max(&mut rng, &cards, child, i % 3 != 0, convention);
        for a in assignments(&cards) {
            let got = expand_noisy_max(&spec, &a).unwrap();
            let want = joint_draw_max(&pure, spec.leak.as_deref(), &a, child);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "spec {i} assignment {a:?}: {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn binary_noisy_max_reduces_to_noisy_or() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let leak = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.3) } else { 0.0 };
        let ps: Vec<f64> = (0..n).map(|_| rng.gen_range(leak..1.0)).collect();
        let or = NoisyOrSpec::leaky(ps.iter().enumerate().map(|(i, &p)| (format!("P{i}"), p)), leak);
        let max = NoisyMaxSpec::new(
            2,
            ps.iter().enumerate().map(|(i, &p)| MaxCause::new(format!("P{i}"), ["no", "yes"], vec![vec![1.0 - p, p]])).collect(),
            Some(vec![1.0 - leak, leak]),
        );
        let cards = vec![2; n];
        let a = compile_to_cpt(&or, &cards).unwrap();
        let b = compile_to_cpt(&max, &cards).unwrap();
        assert!(diff_cpts(&a, &b).unwrap().max_abs_diff < 1e-12);
    }
}

#[test]
fn noisy_max_is_monotone_in_each_cause() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let parents = rng.gen_range(1..=4);
        let cards: Vec<usize> = (0..parents).map(|_| rng.gen_range(2..=4)).collect();
        let child = rng.gen_range(2..=4);
        let leak = rng.gen_bool(0.5);
        let (spec, _) = random_noisy_max(&mut rng, &cards, child, leak, LeakConvention::Included);
        for a in assignments(&cards) {
            let base = expand_noisy_max(&spec, &a).unwrap();
            // switching on any extra cause can only shift mass upward
            for j in 0..parents {
                if a[j] != 0 {
                    continue;
                }
                for l in 1..cards[j] {
                    let mut b = a.clone();
                    b[j] = l;
                    let more = expand_noisy_max(&spec, &b).unwrap();
                    let (mut cb, mut cm) = (0.0, 0.0);
                    for k in 0..child {
                        cb += base[k];
                        cm += more[k];
                        assert!(cm <= cb + 1e-12, "P(child <= {k}) rose when {j} switched on");
                    }
                }
            }
        }
    }
}

#[test]
fn late_season_growth_table() {
    let spec = NoisyOrSpec::leaky([("LateFertilization", 0.8), ("LatePruning", 0.8), ("WarmFall", 0.6)], 0.1);
    let cpt = compile_to_cpt(&spec, &[2, 2, 2]).unwrap();
    let yes: Vec<f64> = cpt.rows().map(|r| r[1]).collect();
    let expected = [0.1, 0.6, 0.8, 0.9111, 0.8, 0.9111, 0.9556, 0.9802];
    for (y, e) in yes.iter().zip(expected) {
        assert!((y - e).abs() < 5e-5, "{yes:?}");
    }
}

#[test]
fn leak_conventions_differ_as_documented() {
    let included = NoisyOrSpec::leaky([("A", 0.5)], 0.2);
    let excluded = included.clone().with_convention(LeakConvention::Excluded);
    assert!((expand_leaky_noisy_or(&included, &[true]).unwrap() - 0.5).abs() < 1e-15);
    assert!((expand_leaky_noisy_or(&excluded, &[true]).unwrap() - 0.6).abs() < 1e-15);
    let below = NoisyOrSpec::leaky([("A", 0.1)], 0.2);
    assert!(matches!(expand_leaky_noisy_or(&below, &[true]), Err(CanonicalError::BelowLeak { .. })));
}

#[test]
fn incompatible_leak_is_rejected() {
    // the cause alone makes level 0 more likely than the leak alone does
    let spec = NoisyMaxSpec::new(
        3,
        vec![MaxCause::new("A", ["no", "yes"], vec![vec![0.9, 0.05, 0.05]])],
        Some(vec![0.5, 0.3, 0.2]),
    );
    assert!(matches!(spec.check(), Err(CanonicalError::IncompatibleWithLeak { .. })));
}

#[test]
fn parameter_count_examples() {
    let c = parameter_counts(&[2, 3, 3], 2, false).unwrap();
    assert_eq!((c.full, c.canonical), (18, 5));
    let c = parameter_counts(&[3, 3, 3], 4, false).unwrap();
    assert_eq!((c.full, c.canonical), (81, 18));
    assert_eq!(parameter_counts(&[2, 2, 2], 2, true).unwrap().canonical, 4);
}

proptest! {
    #[test]
    fn canonical_never_exceeds_full(cards in prop::collection::vec(2usize..5, 1..6), child in 2usize..5, leak: bool) {
        let c = parameter_counts(&cards, child, leak).unwrap();
        prop_assert!(c.canonical <= c.full + (child - 1));
        prop_assert_eq!(c.full, cards.iter().product::<usize>() * (child - 1));
    }

    #[test]
    fn compiled_rows_are_distributions(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cards: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(2..=4)).collect();
        let child = rng.gen_range(2..=4);
        let (spec, _) = random_noisy_max(&mut rng, &cards, child, true, LeakConvention::Included);
        let cpt = compile_to_cpt(&spec, &cards).unwrap();
        for row in cpt.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0 + 1e-15).contains(&p)));
        }
    }
}
