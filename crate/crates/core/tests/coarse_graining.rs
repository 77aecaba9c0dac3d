mod common;

use std::sync::Arc;

use cohist::{decoherence_matrix, is_consistent, probabilities, ConsistencyOptions, Family};
use common::*;
use proptest::prelude::*;

fn probs(f: &Family) -> Vec<f64> {
    let d = decoherence_matrix(f).unwrap();
    probabilities(&d, &ConsistencyOptions::default())
        .unwrap()
        .iter()
        .map(|p| p.probability)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Coarse-graining any slot of a consistent family keeps it consistent,
    /// and each coarse history's probability is the sum over its fiber.
    #[test]
    fn coarse_graining_preserves_consistency(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let fine = consistent_family(&mut rng);
        let k = rand::Rng::gen_range(&mut rng, 0..fine.slots().len());
        let d = &fine.slots()[k].decomposition;
        let partition = random_partition(&mut rng, d.len());
        let coarse = fine.with_slot(k, Arc::new(d.coarse_grain(&partition).unwrap())).unwrap();

        let dc = decoherence_matrix(&coarse).unwrap();
        prop_assert!(is_consistent(&dc, &ConsistencyOptions::default()).consistent);

        let pf = probs(&fine);
        let pc = probs(&coarse);
        let mut sums = vec![0.0; coarse.len()];
        for (flat, p) in pf.iter().enumerate() {
            let mut h = fine.history(flat);
            h.indices[k] = partition.iter().position(|b| b.contains(&h.indices[k])).unwrap();
            sums[coarse.position(&h).unwrap()] += p;
        }
        for (a, b) in sums.iter().zip(&pc) {
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }
}
