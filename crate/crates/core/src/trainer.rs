//! Training loop for the projection head: per batch, forward → normalize →
//! per-class Sinkhorn assignment → composite loss and gradients → SGD step →
//! EMA prototype update. Deterministic given the seed; batches are uniform
//! shuffles each epoch and classes absent from a batch skip their EMA update.

use crate::diagnostics;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::head::ProjectionHead;
use crate::hierarchy::LabelHierarchy;
use crate::losses::{total_loss, LossConfig};
use crate::prototypes::{ema_update, init_prototypes, BatchAssignments, PrototypeBank};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossConfig,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
    pub ema_alpha: f64,
    pub seed: u64,
    /// Ablation switch: false zeroes the hierarchy term (λ2 = 0).
    pub hierarchy_loss_enabled: bool,
    pub num_prototypes: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.05,
            loss: LossConfig::default(),
            sinkhorn_epsilon: 0.05,
            sinkhorn_max_iters: 100,
            sinkhorn_tol: 1e-6,
            // prototype-loss gradients reach the head only through the
            // (1−α) blend; at desk scale α must leave that signal usable
            ema_alpha: 0.9,
            seed: 0,
            hierarchy_loss_enabled: true,
            num_prototypes: 4,
            hidden_dim: 64,
            output_dim: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument {
                name: "batch_size",
                detail: format!("must be >= 2, got {}", self.batch_size),
            });
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument {
                name: "learning_rate",
                detail: format!("must be positive, got {}", self.learning_rate),
            });
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::InvalidArgument {
                name: "ema_alpha",
                detail: format!("must be in [0, 1], got {}", self.ema_alpha),
            });
        }
        if !(self.sinkhorn_epsilon > 0.0) || !(self.sinkhorn_tol > 0.0) {
            return Err(Error::InvalidArgument {
                name: "sinkhorn",
                detail: "epsilon and tol must be positive".into(),
            });
        }
        if self.num_prototypes < 1 || self.hidden_dim < 1 || self.output_dim < 2 {
            return Err(Error::InvalidArgument {
                name: "model dims",
                detail: format!(
                    "num_prototypes={}, hidden_dim={}, output_dim={}",
                    self.num_prototypes, self.hidden_dim, self.output_dim
                ),
            });
        }
        self.loss.validate()
    }

    /// Loss weights with the ablation switch applied.
    pub fn effective_loss(&self) -> LossConfig {
        let mut loss = self.loss.clone();
        if !self.hierarchy_loss_enabled {
            loss.lambda2 = 0.0;
        }
        loss
    }
}

/// Per-epoch record: mean loss components over batches plus a manifold
/// snapshot of the embedded training set. Metric fields are None when the
/// hierarchy makes them undefined (e.g. a single superclass).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mle: f64,
    pub inter_proto: f64,
    pub hierarchy: f64,
    pub total: f64,
    pub compactness: Option<f64>,
    pub cohesion: Option<f64>,
    pub separation: Option<f64>,
}

/// Wall-clock lives here, once per run, so the per-epoch records stay
/// bit-reproducible across identical runs.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub wall_clock_ms: u128,
}

impl TrainLog {
    pub fn initial_total(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.total)
    }

    pub fn final_total(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.total)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epoch,mle,inter_proto,hierarchy,total,compactness,cohesion,separation\n");
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x}"));
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.epoch,
                e.mle,
                e.inter_proto,
                e.hierarchy,
                e.total,
                fmt(e.compactness),
                fmt(e.cohesion),
                fmt(e.separation),
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Incremental training state; `train` drives it to completion, interactive
/// frontends can step epoch by epoch.
pub struct Trainer {
    cfg: TrainConfig,
    effective_loss: LossConfig,
    data: EmbeddingSet,
    hierarchy: LabelHierarchy,
    head: ProjectionHead,
    bank: PrototypeBank,
    rng: ChaCha8Rng,
    next_epoch: usize,
    stats: Vec<EpochStats>,
}

impl Trainer {
    pub fn new(data: &EmbeddingSet, hierarchy: &LabelHierarchy, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.labels().is_none() {
            return Err(Error::InvalidArgument {
                name: "data",
                detail: "training needs the labelled ID train split".into(),
            });
        }
        if data.is_empty() {
            return Err(Error::InvalidArgument {
                name: "data",
                detail: "training set is empty".into(),
            });
        }
        data.validate_labels(hierarchy)?;
        if cfg.hierarchy_loss_enabled && cfg.loss.lambda2 > 0.0 {
            hierarchy.validate_for_hierarchy_loss()?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let head_seed = rng.random::<u64>();
        let bank_seed = rng.random::<u64>();
        let head = ProjectionHead::init(data.dim(), cfg.hidden_dim, cfg.output_dim, head_seed)?;
        let bank = init_prototypes(hierarchy, cfg.num_prototypes, cfg.output_dim, bank_seed)?
            .with_alpha(cfg.ema_alpha)?;
        Ok(Self {
            effective_loss: cfg.effective_loss(),
            cfg,
            data: data.clone(),
            hierarchy: hierarchy.clone(),
            head,
            bank,
            rng,
            next_epoch: 0,
            stats: Vec::new(),
        })
    }

    pub fn head(&self) -> &ProjectionHead {
        &self.head
    }

    pub fn bank(&self) -> &PrototypeBank {
        &self.bank
    }

    pub fn stats(&self) -> &[EpochStats] {
        &self.stats
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let epoch = self.next_epoch;
        let labels = self.data.labels().expect("validated at construction");
        let n = self.data.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);

        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            let mut x = Array2::zeros((chunk.len(), self.data.dim()));
            let mut batch_labels = Vec::with_capacity(chunk.len());
            for (r, &i) in chunk.iter().enumerate() {
                x.row_mut(r).assign(&self.data.vectors().row(i));
                batch_labels.push(labels[i]);
            }
            let cache = self.head.forward(x.view()).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged {
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            })?;
            let z = &cache.output;
            let assignments = BatchAssignments::compute(
                z.view(),
                &batch_labels,
                &self.bank,
                self.cfg.sinkhorn_epsilon,
                self.cfg.sinkhorn_max_iters,
                self.cfg.sinkhorn_tol,
            )?;
            let report = total_loss(
                z.view(),
                &batch_labels,
                &self.bank,
                &assignments,
                &self.effective_loss,
            )
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged {
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            })?;
            let grads = self
                .head
                .backward(&cache, report.grad_embeddings.view());
            self.head.apply_sgd(&grads, self.cfg.learning_rate);
            self.bank = ema_update(&self.bank, z.view(), &batch_labels, &assignments)?;

            sums.0 += report.mle;
            sums.1 += report.inter_proto;
            sums.2 += report.hierarchy;
            sums.3 += report.total;
            batches += 1;
        }

        let embedded = self.head.embed(&self.data)?;
        let stats = EpochStats {
            epoch,
            mle: sums.0 / batches as f64,
            inter_proto: sums.1 / batches as f64,
            hierarchy: sums.2 / batches as f64,
            total: sums.3 / batches as f64,
            compactness: diagnostics::compactness(&embedded).ok(),
            cohesion: diagnostics::cohesion(&embedded, &self.hierarchy).ok(),
            separation: diagnostics::separation(&embedded, &self.hierarchy).ok(),
        };
        self.stats.push(stats.clone());
        self.next_epoch += 1;
        Ok(stats)
    }

    pub fn into_parts(self) -> (ProjectionHead, PrototypeBank, Vec<EpochStats>) {
        (self.head, self.bank, self.stats)
    }
}

/// Full training run. `epochs = 0` returns the seeded initialization
/// untouched with an empty log.
pub fn train(
    data: &EmbeddingSet,
    hierarchy: &LabelHierarchy,
    cfg: TrainConfig,
) -> Result<(ProjectionHead, PrototypeBank, TrainLog)> {
    let start = Instant::now();
    let epochs = cfg.epochs;
    let mut trainer = Trainer::new(data, hierarchy, cfg)?;
    for _ in 0..epochs {
        trainer.run_epoch()?;
    }
    let (head, bank, stats) = trainer.into_parts();
    Ok((
        head,
        bank,
        TrainLog {
            epochs: stats,
            wall_clock_ms: start.elapsed().as_millis(),
        },
    ))
}
