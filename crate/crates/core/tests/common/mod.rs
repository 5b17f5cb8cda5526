//! Shared oracles for integration tests: central finite differences and
//! random instance builders. Everything here stays independent of the
//! implementation paths it checks.

#![allow(dead_code)]

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssv_core::hierarchy::LabelHierarchy;
use ssv_core::numeric::sample_unit_sphere;
use ssv_core::prototypes::PrototypeBank;

pub const FD_STEP: f64 = 1e-5;

/// Central finite differences of a scalar function over a matrix argument.
pub fn fd_grad_matrix<F: FnMut(&Array2<f64>) -> f64>(
    base: &Array2<f64>,
    mut f: F,
) -> Array2<f64> {
    let mut grad = Array2::zeros(base.raw_dim());
    let mut work = base.clone();
    for idx in 0..base.len() {
        let (r, c) = (idx / base.ncols(), idx % base.ncols());
        let orig = work[[r, c]];
        work[[r, c]] = orig + FD_STEP;
        let plus = f(&work);
        work[[r, c]] = orig - FD_STEP;
        let minus = f(&work);
        work[[r, c]] = orig;
        grad[[r, c]] = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// Central finite differences over a 3-array argument (prototypes).
pub fn fd_grad_array3<F: FnMut(&Array3<f64>) -> f64>(
    base: &Array3<f64>,
    mut f: F,
) -> Array3<f64> {
    let mut grad = Array3::zeros(base.raw_dim());
    let mut work = base.clone();
    let dims = base.raw_dim();
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            for c in 0..dims[2] {
                let orig = work[[a, b, c]];
                work[[a, b, c]] = orig + FD_STEP;
                let plus = f(&work);
                work[[a, b, c]] = orig - FD_STEP;
                let minus = f(&work);
                work[[a, b, c]] = orig;
                grad[[a, b, c]] = (plus - minus) / (2.0 * FD_STEP);
            }
        }
    }
    grad
}

/// Central finite differences over a flat parameter vector.
pub fn fd_grad_vec<F: FnMut(&[f64]) -> f64>(base: &[f64], mut f: F) -> Vec<f64> {
    let mut grad = vec![0.0; base.len()];
    let mut work = base.to_vec();
    for i in 0..base.len() {
        let orig = work[i];
        work[i] = orig + FD_STEP;
        let plus = f(&work);
        work[i] = orig - FD_STEP;
        let minus = f(&work);
        work[i] = orig;
        grad[i] = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// Max over components of |a − b| / max(|b|, floor).
pub fn max_rel_err<'a, I, J>(analytic: I, reference: J, floor: f64) -> f64
where
    I: IntoIterator<Item = &'a f64>,
    J: IntoIterator<Item = &'a f64>,
{
    analytic
        .into_iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Hierarchy with `supers` superclasses of `subs` subclasses each.
pub fn grid_hierarchy(supers: usize, subs: usize) -> LabelHierarchy {
    let mut tsv = String::new();
    for m in 0..supers {
        for j in 0..subs {
            tsv.push_str(&format!("s{m}c{j}\ts{m}\n"));
        }
    }
    LabelHierarchy::from_tsv(&tsv).unwrap()
}

/// Unit-norm batch rows with labels covering every class at least once.
pub fn random_unit_batch(
    n: usize,
    d: usize,
    num_classes: usize,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    assert!(n >= num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        z.row_mut(i).assign(&sample_unit_sphere(&mut rng, d));
        labels.push(rng.random_range(0..num_classes));
    }
    for class in 0..num_classes {
        labels[class] = class;
    }
    (z, labels)
}

pub fn random_bank(hierarchy: &LabelHierarchy, k: usize, d: usize, seed: u64) -> PrototypeBank {
    ssv_core::prototypes::init_prototypes(hierarchy, k, d, seed).unwrap()
}

// ---- end-to-end pipeline fixtures -------------------------------------

use ssv_core::embedding::{EmbeddingSet, RiskTier};
use ssv_core::head::ProjectionHead;
use ssv_core::risk::{fit_classifier_masked, macro_f1, nsr, ComponentMask, CostMatrix, TernaryPrediction};
use ssv_core::ssv::{fit_global_stats, probe, GlobalStats, RepresentativeSet, SurpriseVector};
use ssv_core::synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
use ssv_core::trainer::{train, TrainConfig, TrainLog};

/// One trained arm of the experiment: data, checkpoints, embedded splits,
/// fitted probe reference, and probed surprise vectors per split.
pub struct Pipeline {
    pub data: SyntheticData,
    pub head: ProjectionHead,
    pub bank: ssv_core::prototypes::PrototypeBank,
    pub log: TrainLog,
    pub emb_train: EmbeddingSet,
    pub emb_test: EmbeddingSet,
    pub emb_near: EmbeddingSet,
    pub emb_far: EmbeddingSet,
    pub stats: GlobalStats,
    pub reps: RepresentativeSet,
    /// Probed (id_test ++ near ++ far) with true tiers.
    pub ssvs: Vec<(SurpriseVector, RiskTier)>,
}

pub fn run_pipeline(seed: u64, hierarchy_loss: bool) -> Pipeline {
    let spec = SyntheticSpec {
        seed,
        ..Default::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let cfg = TrainConfig {
        seed,
        hierarchy_loss_enabled: hierarchy_loss,
        ..Default::default()
    };
    let (head, bank, log) = train(&data.train, &data.hierarchy, cfg).unwrap();
    let emb_train = head.embed(&data.train).unwrap();
    let emb_test = head.embed(&data.id_test).unwrap();
    let emb_near = head.embed(&data.near_ood).unwrap();
    let emb_far = head.embed(&data.far_ood).unwrap();
    let stats = fit_global_stats(&emb_train, None).unwrap();
    let reps = RepresentativeSet::from_bank(&bank).unwrap();
    let mut ssvs = Vec::new();
    for (set, tier) in [
        (&emb_test, RiskTier::Id),
        (&emb_near, RiskTier::NearOod),
        (&emb_far, RiskTier::FarOod),
    ] {
        for sv in probe(set, &stats, &reps).unwrap() {
            ssvs.push((sv, tier));
        }
    }
    Pipeline {
        data,
        head,
        bank,
        log,
        emb_train,
        emb_test,
        emb_near,
        emb_far,
        stats,
        reps,
        ssvs,
    }
}

/// Fit a masked classifier on the fit half, score on the eval half.
pub fn classifier_metrics(
    ssvs: &[(SurpriseVector, RiskTier)],
    mask: ComponentMask,
    seed: u64,
) -> (f64, f64) {
    let (fit, eval) = ssv_core::risk::stratified_split(ssvs, 0.5, seed);
    let clf = fit_classifier_masked(&fit, mask, seed).unwrap();
    let inputs: Vec<SurpriseVector> = eval.iter().map(|(s, _)| *s).collect();
    let truth: Vec<RiskTier> = eval.iter().map(|(_, t)| *t).collect();
    let preds = TernaryPrediction::new(truth, clf.predict(&inputs)).unwrap();
    let (_, macro_avg) = macro_f1(&preds);
    let risk = nsr(&preds, &CostMatrix::default()).unwrap();
    (risk, macro_avg)
}

pub fn mean_s_novel(ssvs: &[(SurpriseVector, RiskTier)], tier: RiskTier) -> f64 {
    let vals: Vec<f64> = ssvs
        .iter()
        .filter(|(_, t)| *t == tier)
        .map(|(s, _)| s.s_novel)
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}
