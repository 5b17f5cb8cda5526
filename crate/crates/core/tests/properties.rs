//! Property-based invariants over random inputs.

mod common;

use ndarray::Array2;
use proptest::prelude::*;
use ssv_core::embedding::{load_embeddings_unchecked, save_embeddings, EmbeddingSet, RiskTier};
use ssv_core::numeric::euclidean;
use ssv_core::risk::{binary_metrics, macro_f1, nsr, CostMatrix, TernaryPrediction};
use ssv_core::sinkhorn::assign;
use ssv_core::ssv::{s_ambig, s_novel, RepresentativeSet, SurpriseVector};

fn tier_strategy() -> impl Strategy<Value = RiskTier> {
    prop_oneof![
        Just(RiskTier::Id),
        Just(RiskTier::NearOod),
        Just(RiskTier::FarOod),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semb_round_trip_is_bit_exact(
        rows in 0usize..12,
        cols in 1usize..8,
        seed in any::<u32>(),
        tier_labeled in any::<bool>(),
    ) {
        let mut state = seed as u64;
        let mut next = move || {
            // xorshift over f32 payload values
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as i32 as f64) / (i32::MAX as f64)
        };
        let v = Array2::from_shape_fn((rows, cols), |_| next() as f32 as f64);
        let set = if tier_labeled {
            EmbeddingSet::new(v, Some(vec![0; rows]), RiskTier::Id, false).unwrap()
        } else {
            EmbeddingSet::new(v, None, RiskTier::FarOod, false).unwrap()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.semb");
        save_embeddings(&set, &path).unwrap();
        let loaded = load_embeddings_unchecked(&path).unwrap();
        prop_assert_eq!(loaded, set);
    }

    #[test]
    fn sinkhorn_marginals_hold(
        b in 1usize..12,
        k in 1usize..6,
        eps in 0.05f64..0.8,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sims = Array2::from_shape_fn((b, k), |_| rng.random_range(-1.0..1.0));
        let asg = assign(sims.view(), eps, 5_000, 1e-9).unwrap();
        for row in asg.weights.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&w| w >= 0.0));
        }
        for col in asg.weights.columns() {
            prop_assert!((col.sum() - b as f64 / k as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn ambiguity_stays_in_unit_interval(
        z in prop::collection::vec(-5.0f64..5.0, 4),
        reps in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 2..10),
    ) {
        let m = Array2::from_shape_vec(
            (reps.len(), 4),
            reps.iter().flatten().copied().collect(),
        ).unwrap();
        let labels: Vec<usize> = (0..reps.len()).map(|i| i % 2).collect();
        let reps = RepresentativeSet::new(m, labels).unwrap();
        let z = ndarray::Array1::from_vec(z);
        let a = s_ambig(z.view(), &reps).unwrap();
        prop_assert!((0.0..=1.0).contains(&a), "ambiguity {} out of range", a);
    }

    #[test]
    fn novelty_obeys_triangle_bound(
        z1 in prop::collection::vec(-3.0f64..3.0, 5),
        z2 in prop::collection::vec(-3.0f64..3.0, 5),
        reps in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 5), 2..8),
    ) {
        let m = Array2::from_shape_vec(
            (reps.len(), 5),
            reps.iter().flatten().copied().collect(),
        ).unwrap();
        let labels: Vec<usize> = (0..reps.len()).map(|i| i % 2).collect();
        let reps = RepresentativeSet::new(m, labels).unwrap();
        let z1 = ndarray::Array1::from_vec(z1);
        let z2 = ndarray::Array1::from_vec(z2);
        let n1 = s_novel(z1.view(), &reps).unwrap();
        let n2 = s_novel(z2.view(), &reps).unwrap();
        prop_assert!((n1 - n2).abs() <= euclidean(z1.view(), z2.view()) + 1e-12);
    }

    #[test]
    fn auroc_invariant_under_increasing_transform(
        id in prop::collection::vec(-10.0f64..10.0, 1..20),
        ood in prop::collection::vec(-10.0f64..10.0, 1..20),
    ) {
        let (_, base) = binary_metrics(&id, &ood, true).unwrap();
        // strictly increasing map: affine plus odd cubic
        let f = |x: f64| 2.5 * x + 0.1 * x.powi(3) + 1.0;
        let id_t: Vec<f64> = id.iter().map(|&x| f(x)).collect();
        let ood_t: Vec<f64> = ood.iter().map(|&x| f(x)).collect();
        let (_, transformed) = binary_metrics(&id_t, &ood_t, true).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_invariant_under_tier_relabeling(
        pairs in prop::collection::vec((tier_strategy(), tier_strategy()), 1..50),
        perm_pick in 0usize..6,
    ) {
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0],
        ];
        let perm = perms[perm_pick];
        let apply = |t: RiskTier| RiskTier::from_index(perm[t.index()]).unwrap();
        let truth: Vec<RiskTier> = pairs.iter().map(|(t, _)| *t).collect();
        let preds: Vec<RiskTier> = pairs.iter().map(|(_, p)| *p).collect();
        let base = macro_f1(&TernaryPrediction::new(truth.clone(), preds.clone()).unwrap()).1;
        let relabeled = macro_f1(&TernaryPrediction::new(
            truth.into_iter().map(apply).collect(),
            preds.into_iter().map(apply).collect(),
        ).unwrap()).1;
        prop_assert!((base - relabeled).abs() < 1e-12);
    }

    #[test]
    fn nsr_monotone_under_single_correction(
        pairs in prop::collection::vec((tier_strategy(), tier_strategy()), 2..60),
        fix in 0usize..60,
    ) {
        let truth: Vec<RiskTier> = pairs.iter().map(|(t, _)| *t).collect();
        let mut preds: Vec<RiskTier> = pairs.iter().map(|(_, p)| *p).collect();
        let has_ood = truth.iter().any(|&t| t != RiskTier::Id);
        prop_assume!(has_ood);
        let cost = CostMatrix::default();
        let before = nsr(&TernaryPrediction::new(truth.clone(), preds.clone()).unwrap(), &cost).unwrap();
        let fix = fix % preds.len();
        preds[fix] = truth[fix];
        let after = nsr(&TernaryPrediction::new(truth, preds).unwrap(), &cost).unwrap();
        prop_assert!(after <= before + 1e-15);
    }

    #[test]
    fn surprise_vector_components_are_consistent(
        c in 0.0f64..10.0,
        n in 0.0f64..10.0,
        a in 0.0f64..1.0,
    ) {
        let sv = SurpriseVector { s_conf: c, s_novel: n, s_ambig: a };
        prop_assert_eq!(sv.component(0), c);
        prop_assert_eq!(sv.component(1), n);
        prop_assert_eq!(sv.component(2), a);
    }
}
