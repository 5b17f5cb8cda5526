//! Interactive demo session: generate synthetic hierarchical data, step the
//! trainer epoch by epoch, and expose projections, surprise probes, and risk
//! metrics as JSON. Pure Rust so the whole surface is testable natively;
//! the wasm bindings in `lib.rs` are thin string adapters.
//!
//! Training is stepped through `Trainer::run_epoch` rather than the batch
//! `train` entry point so the browser stays responsive and no wall-clock
//! machinery is touched on wasm targets.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use ssv_core::diagnostics::{cohesion, compactness, prototype_angles, separation};
use ssv_core::embedding::{EmbeddingSet, RiskTier};
use ssv_core::risk::{
    confusion_matrix, fit_classifier_masked, kmeans_baseline, macro_f1, nsr, stratified_split,
    ComponentMask, CostMatrix, TernaryPrediction,
};
use ssv_core::ssv::{fit_global_stats, probe, RepresentativeSet, SurpriseVector};
use ssv_core::synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
use ssv_core::trainer::{EpochStats, TrainConfig, Trainer};

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub num_superclasses: usize,
    pub subclasses_per_superclass: usize,
    pub samples_per_subclass: usize,
    pub dim: usize,
    pub intra_spread: f64,
    pub sibling_offset: f64,
    pub superclass_offset: f64,
    pub data_seed: u64,
    pub train_seed: u64,
    pub hierarchy_loss_enabled: bool,
    pub learning_rate: f64,
    pub num_prototypes: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        let cfg = TrainConfig::default();
        Self {
            num_superclasses: spec.num_superclasses,
            subclasses_per_superclass: spec.subclasses_per_superclass,
            samples_per_subclass: spec.samples_per_subclass,
            dim: spec.dim,
            intra_spread: spec.intra_spread,
            sibling_offset: spec.sibling_offset,
            superclass_offset: spec.superclass_offset,
            data_seed: 7,
            train_seed: 0,
            hierarchy_loss_enabled: true,
            learning_rate: cfg.learning_rate,
            num_prototypes: cfg.num_prototypes,
        }
    }
}

#[derive(Serialize)]
struct PointGroup {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Superclass id per point for ID tiers; empty for OOD tiers.
    superclasses: Vec<usize>,
}

#[derive(Serialize)]
struct Snapshot {
    epoch: usize,
    train: PointGroup,
    id_test: PointGroup,
    near_ood: PointGroup,
    far_ood: PointGroup,
    prototypes: PointGroup,
    compactness: Option<f64>,
    cohesion: Option<f64>,
    separation: Option<f64>,
    intra_angle_deg: Option<f64>,
    inter_angle_deg: Option<f64>,
    loss_history: Vec<LossPoint>,
}

#[derive(Serialize)]
struct LossPoint {
    epoch: usize,
    mle: f64,
    inter_proto: f64,
    hierarchy: f64,
    total: f64,
}

#[derive(Serialize)]
struct TierSsv {
    conf: Vec<f64>,
    novel: Vec<f64>,
    ambig: Vec<f64>,
    mean_novel: f64,
}

#[derive(Serialize)]
struct ProbeReport {
    id: TierSsv,
    near: TierSsv,
    far: TierSsv,
}

#[derive(Serialize)]
struct PredictorReport {
    nsr: f64,
    macro_f1: f64,
    f1: [f64; 3],
    confusion: [[usize; 3]; 3],
}

#[derive(Serialize)]
struct EvaluateReport {
    classifier: PredictorReport,
    kmeans: PredictorReport,
    always_id_nsr: f64,
    eval_rows: usize,
}

pub struct DemoSession {
    data: SyntheticData,
    trainer: Trainer,
}

impl DemoSession {
    pub fn from_json(config_json: &str) -> Result<Self, String> {
        let cfg: DemoConfig = if config_json.trim().is_empty() {
            DemoConfig::default()
        } else {
            serde_json::from_str(config_json).map_err(|e| format!("bad config: {e}"))?
        };
        let spec = SyntheticSpec {
            num_superclasses: cfg.num_superclasses,
            subclasses_per_superclass: cfg.subclasses_per_superclass,
            samples_per_subclass: cfg.samples_per_subclass,
            dim: cfg.dim,
            intra_spread: cfg.intra_spread,
            sibling_offset: cfg.sibling_offset,
            superclass_offset: cfg.superclass_offset,
            seed: cfg.data_seed,
        };
        let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
        let train_cfg = TrainConfig {
            seed: cfg.train_seed,
            hierarchy_loss_enabled: cfg.hierarchy_loss_enabled,
            learning_rate: cfg.learning_rate,
            num_prototypes: cfg.num_prototypes,
            output_dim: cfg.dim.min(16),
            ..Default::default()
        };
        let trainer =
            Trainer::new(&data.train, &data.hierarchy, train_cfg).map_err(|e| e.to_string())?;
        Ok(Self { data, trainer })
    }

    pub fn train_epochs(&mut self, n: usize) -> Result<String, String> {
        let mut last: Option<EpochStats> = None;
        for _ in 0..n {
            last = Some(self.trainer.run_epoch().map_err(|e| e.to_string())?);
        }
        let history: Vec<LossPoint> = self
            .trainer
            .stats()
            .iter()
            .map(|e| LossPoint {
                epoch: e.epoch,
                mle: e.mle,
                inter_proto: e.inter_proto,
                hierarchy: e.hierarchy,
                total: e.total,
            })
            .collect();
        let body = serde_json::json!({
            "epochs_run": self.trainer.stats().len(),
            "last_total": last.map(|e| e.total),
            "loss_history": history,
        });
        Ok(body.to_string())
    }

    pub fn snapshot(&self) -> Result<String, String> {
        let embed = |set: &EmbeddingSet| self.trainer.head().embed(set).map_err(|e| e.to_string());
        let emb_train = embed(&self.data.train)?;
        let emb_test = embed(&self.data.id_test)?;
        let emb_near = embed(&self.data.near_ood)?;
        let emb_far = embed(&self.data.far_ood)?;

        let basis = pca2(emb_train.vectors());
        let h = &self.data.hierarchy;
        let super_of = |set: &EmbeddingSet| -> Vec<usize> {
            set.labels()
                .map(|ls| ls.iter().map(|&c| h.superclass_of(c)).collect())
                .unwrap_or_default()
        };
        let project_set = |set: &EmbeddingSet, supers: Vec<usize>| -> PointGroup {
            let (xs, ys) = project(set.vectors(), &basis);
            PointGroup {
                xs,
                ys,
                superclasses: supers,
            }
        };

        let flat = self.trainer.bank().flattened();
        let (pxs, pys) = project(&flat, &basis);
        let k = self.trainer.bank().prototypes_per_class();
        let proto_supers: Vec<usize> = (0..flat.nrows()).map(|r| h.superclass_of(r / k)).collect();

        let stats = self.trainer.stats();
        Ok(serde_json::to_string(&Snapshot {
            epoch: stats.len(),
            train: project_set(&emb_train, super_of(&emb_train)),
            id_test: project_set(&emb_test, super_of(&emb_test)),
            near_ood: project_set(&emb_near, Vec::new()),
            far_ood: project_set(&emb_far, Vec::new()),
            prototypes: PointGroup {
                xs: pxs,
                ys: pys,
                superclasses: proto_supers,
            },
            compactness: compactness(&emb_test).ok(),
            cohesion: cohesion(&emb_test, h).ok(),
            separation: separation(&emb_test, h).ok(),
            intra_angle_deg: prototype_angles(self.trainer.bank()).ok().map(|a| a.0),
            inter_angle_deg: prototype_angles(self.trainer.bank()).ok().map(|a| a.1),
            loss_history: stats
                .iter()
                .map(|e| LossPoint {
                    epoch: e.epoch,
                    mle: e.mle,
                    inter_proto: e.inter_proto,
                    hierarchy: e.hierarchy,
                    total: e.total,
                })
                .collect(),
        })
        .expect("snapshot serializes"))
    }

    fn probed(&self) -> Result<Vec<(SurpriseVector, RiskTier)>, String> {
        let embed = |set: &EmbeddingSet| self.trainer.head().embed(set).map_err(|e| e.to_string());
        let emb_train = embed(&self.data.train)?;
        let stats = fit_global_stats(&emb_train, None).map_err(|e| e.to_string())?;
        let reps = RepresentativeSet::from_bank(self.trainer.bank()).map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for (set, tier) in [
            (&self.data.id_test, RiskTier::Id),
            (&self.data.near_ood, RiskTier::NearOod),
            (&self.data.far_ood, RiskTier::FarOod),
        ] {
            let emb = embed(set)?;
            for sv in probe(&emb, &stats, &reps).map_err(|e| e.to_string())? {
                rows.push((sv, tier));
            }
        }
        Ok(rows)
    }

    pub fn probe_ssv(&self) -> Result<String, String> {
        let rows = self.probed()?;
        let tier_block = |tier: RiskTier| -> TierSsv {
            let svs: Vec<&SurpriseVector> = rows
                .iter()
                .filter(|(_, t)| *t == tier)
                .map(|(s, _)| s)
                .collect();
            let novel: Vec<f64> = svs.iter().map(|s| s.s_novel).collect();
            TierSsv {
                conf: svs.iter().map(|s| s.s_conf).collect(),
                ambig: svs.iter().map(|s| s.s_ambig).collect(),
                mean_novel: novel.iter().sum::<f64>() / novel.len().max(1) as f64,
                novel,
            }
        };
        Ok(serde_json::to_string(&ProbeReport {
            id: tier_block(RiskTier::Id),
            near: tier_block(RiskTier::NearOod),
            far: tier_block(RiskTier::FarOod),
        })
        .expect("probe report serializes"))
    }

    pub fn evaluate(&self, seed: u64) -> Result<String, String> {
        let rows = self.probed()?;
        let cost = CostMatrix::default();
        let (fit, eval) = stratified_split(&rows, 0.5, seed);
        if fit.is_empty() || eval.is_empty() {
            return Err("not enough probed rows to split".into());
        }
        let truth: Vec<RiskTier> = eval.iter().map(|(_, t)| *t).collect();
        let inputs: Vec<SurpriseVector> = eval.iter().map(|(s, _)| *s).collect();

        let clf = fit_classifier_masked(&fit, ComponentMask::FULL, seed)
            .map_err(|e| e.to_string())?;
        let clf_preds =
            TernaryPrediction::new(truth.clone(), clf.predict(&inputs)).map_err(|e| e.to_string())?;
        let km_preds = kmeans_baseline(&inputs, &truth, seed).map_err(|e| e.to_string())?;
        let always_id =
            TernaryPrediction::new(truth.clone(), vec![RiskTier::Id; truth.len()])
                .map_err(|e| e.to_string())?;

        let report = |p: &TernaryPrediction| -> Result<PredictorReport, String> {
            let (f1, macro_avg) = macro_f1(p);
            Ok(PredictorReport {
                nsr: nsr(p, &cost).map_err(|e| e.to_string())?,
                macro_f1: macro_avg,
                f1,
                confusion: confusion_matrix(p),
            })
        };
        Ok(serde_json::to_string(&EvaluateReport {
            classifier: report(&clf_preds)?,
            kmeans: report(&km_preds)?,
            always_id_nsr: nsr(&always_id, &cost).map_err(|e| e.to_string())?,
            eval_rows: eval.len(),
        })
        .expect("evaluate report serializes"))
    }
}

/// Top two principal directions of the row covariance, via power iteration
/// with deflation. Deterministic: fixed starting vectors.
fn pca2(vectors: &Array2<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let n = vectors.nrows().max(1);
    let d = vectors.ncols();
    let mean = vectors
        .mean_axis(ndarray::Axis(0))
        .unwrap_or_else(|| Array1::zeros(d));
    let centered = vectors - &mean.view().insert_axis(ndarray::Axis(0));
    let cov = centered.t().dot(&centered) / n as f64;

    let power = |deflate: Option<&Array1<f64>>| -> Array1<f64> {
        let mut v = Array1::from_shape_fn(d, |i| 1.0 / (i as f64 + 1.0));
        if let Some(u) = deflate {
            let proj = v.dot(u);
            v = &v - &(u * proj);
        }
        for _ in 0..100 {
            let mut w = cov.dot(&v);
            if let Some(u) = deflate {
                let proj = w.dot(u);
                w = &w - &(u * proj);
            }
            let norm = w.dot(&w).sqrt();
            if norm < 1e-12 {
                break;
            }
            v = w / norm;
        }
        v
    };
    let first = power(None);
    let second = power(Some(&first));
    (mean, first, second)
}

fn project(
    vectors: &Array2<f64>,
    (mean, first, second): &(Array1<f64>, Array1<f64>, Array1<f64>),
) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(vectors.nrows());
    let mut ys = Vec::with_capacity(vectors.nrows());
    for row in vectors.rows() {
        let r = &row.to_owned() - mean;
        xs.push(r.dot(first));
        ys.push(r.dot(second));
    }
    (xs, ys)
}
