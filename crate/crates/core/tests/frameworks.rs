mod common;

use std::sync::Arc;
use std::time::Instant;

use cohist::frameworks::{
    are_compatible, enumerate_frameworks, single_framework_check, universal_truth_functional_exists,
    GridSlot, TruthOutcome, DEFAULT_ENUMERATION_BUDGET, DEFAULT_TRUTH_BUDGET,
};
use cohist::models::build_kochen_specker;
use cohist::{decoherence_matrix, probabilities, ConsistencyOptions, Execution, Family, History, Slot, Tolerances};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Another family on the same dynamics, initial state and time grid.
fn sibling(rng: &mut impl Rng, f: &Family) -> Family {
    let slots = f
        .slots()
        .iter()
        .enumerate()
        .map(|(k, s)| Slot::new(s.step, Arc::new(random_decomposition(rng, f.dim(), &format!("q{k}_")))))
        .collect();
    Family::new(slots, f.dynamics().clone(), f.initial().clone()).unwrap()
}

fn coarsened(rng: &mut impl Rng, f: &Family) -> Family {
    let mut g = f.clone();
    for k in 0..f.slots().len() {
        let d = &f.slots()[k].decomposition;
        g = g.with_slot(k, Arc::new(d.coarse_grain(&random_partition(rng, d.len())).unwrap())).unwrap();
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn compatibility_is_symmetric(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let f = consistent_family(&mut rng);
        let g = if rng.gen_bool(0.5) { sibling(&mut rng, &f) } else { coarsened(&mut rng, &f) };
        let (o, t) = (ConsistencyOptions::default(), Tolerances::default());
        let ab = are_compatible(&f, &g, &o, &t).unwrap();
        let ba = are_compatible(&g, &f, &o, &t).unwrap();
        prop_assert_eq!(ab.compatible, ba.compatible);
    }

    #[test]
    fn coarse_grainings_of_a_consistent_family_are_compatible(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let f = consistent_family(&mut rng);
        let g = coarsened(&mut rng, &f);
        let h = coarsened(&mut rng, &f);
        let (o, t) = (ConsistencyOptions::default(), Tolerances::default());
        prop_assert!(are_compatible(&g, &h, &o, &t).unwrap().compatible);
        prop_assert!(are_compatible(&f, &g, &o, &t).unwrap().compatible);
    }

    #[test]
    fn single_framework_accepts_pairs_from_one_consistent_family(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let f = consistent_family(&mut rng);
        let (o, t) = (ConsistencyOptions::default(), Tolerances::default());
        let a = f.history(rng.gen_range(0..f.len()));
        let b = f.history(rng.gen_range(0..f.len()));
        prop_assert!(single_framework_check(&[(a, &f), (b, &f)], &o, &t).unwrap().accepted);
    }

    #[test]
    fn enumeration_ignores_candidate_order(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dim = rng.gen_range(2..=4);
        let f = consistent_family_with(&mut rng, dim, 2);
        let mut grid: Vec<GridSlot> = f
            .slots()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut candidates = vec![(format!("c{k}"), s.decomposition.clone())];
                for j in 0..2 {
                    candidates.push((format!("r{k}{j}"), Arc::new(random_decomposition(&mut rng, dim, "r"))));
                }
                GridSlot { step: s.step, candidates }
            })
            .collect();
        let (o, t) = (ConsistencyOptions::default(), Tolerances::default());
        let run = |grid: &[GridSlot]| {
            let e = enumerate_frameworks(f.dynamics(), f.initial(), grid, &o, &t, DEFAULT_ENUMERATION_BUDGET, Execution::default()).unwrap();
            let mut ids: Vec<String> = e.frameworks.iter().map(|x| x.id()).collect();
            ids.sort();
            ids
        };
        let before = run(&grid);
        let expected = format!("c0@{}/c1@{}", grid[0].step, grid[1].step);
        prop_assert!(before.contains(&expected));
        for g in &mut grid {
            g.candidates.shuffle(&mut rng);
        }
        prop_assert_eq!(before, run(&grid));
    }

    #[test]
    fn truth_exists_for_one_consistent_family(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let f = consistent_family(&mut rng);
        let o = ConsistencyOptions::default();
        let r = universal_truth_functional_exists(&[&f], &o, &Tolerances::default(), DEFAULT_TRUTH_BUDGET).unwrap();
        let p = probabilities(&decoherence_matrix(&f).unwrap(), &o).unwrap();
        let best = p.iter().map(|x| x.probability).fold(0.0, f64::max);
        match r.outcome {
            TruthOutcome::Exists(a) => prop_assert_eq!(p[a[0]].probability, best),
            TruthOutcome::NoneExists => prop_assert!(false, "no assignment for a single family"),
        }
    }
}

#[test]
fn kochen_specker_families_admit_no_truth_functional() {
    let s = build_kochen_specker().unwrap();
    let families: Vec<&Family> = s.families().values().collect();
    let start = Instant::now();
    let r = universal_truth_functional_exists(&families, &s.consistency_options(), s.tolerances(), DEFAULT_TRUTH_BUDGET).unwrap();
    assert!(start.elapsed().as_secs_f64() < 30.0);
    assert_eq!(r.outcome, TruthOutcome::NoneExists);
    assert_eq!(r.search_space, 1 << 18);
    assert_eq!(r.covered, r.search_space);
    // 18 rays, each shared by two bases, give 36 directed containments.
    assert_eq!(r.containments, 36);
}

#[test]
fn dropping_one_basis_restores_a_truth_functional() {
    let s = build_kochen_specker().unwrap();
    let families: Vec<&Family> = s.families().values().skip(1).collect();
    let r = universal_truth_functional_exists(&families, &s.consistency_options(), s.tolerances(), DEFAULT_TRUTH_BUDGET).unwrap();
    assert!(r.exists());
}

#[test]
fn kochen_specker_bases_are_pairwise_compatible_only_with_themselves() {
    let s = build_kochen_specker().unwrap();
    let (o, t) = (s.consistency_options(), *s.tolerances());
    let fams: Vec<&Family> = s.families().values().collect();
    for (i, a) in fams.iter().enumerate() {
        for b in &fams[i + 1..] {
            assert!(!are_compatible(a, b, &o, &t).unwrap().compatible);
        }
    }
    let h = History::new(vec![0]);
    assert!(!single_framework_check(&[(h.clone(), fams[0]), (h, fams[1])], &o, &t).unwrap().accepted);
}
