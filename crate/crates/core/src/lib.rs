//! Hierarchical prototype manifolds on the unit sphere, the semantic surprise
//! probe, and cost-sensitive ternary OOD risk evaluation (ID / Near-OOD /
//! Far-OOD), runnable end-to-end on synthetic hierarchical embedding data.
//!
//! Pipeline: [`synthetic::generate_synthetic`] produces labelled unit-norm
//! features with a two-level subclass→superclass hierarchy; [`trainer::train`]
//! fits a small projection head by minimizing a mixture-likelihood term plus
//! two prototype-level contrastive terms, with balanced Sinkhorn assignment
//! and EMA prototype maintenance; [`ssv::probe`] turns any embedding into a
//! (conformity, novelty, ambiguity) surprise vector against the fitted ID
//! reference; [`risk`] classifies surprise vectors into risk tiers and scores
//! predictions with the normalized semantic risk metric, macro F1, and binary
//! OOD metrics. [`diagnostics`] quantifies manifold geometric health.

pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod head;
pub mod hierarchy;
pub mod losses;
pub mod numeric;
pub mod prototypes;
pub mod risk;
pub mod sinkhorn;
pub mod ssv;
pub mod synthetic;
pub mod trainer;

pub use embedding::{load_embeddings, save_embeddings, EmbeddingSet, RiskTier};
pub use error::{Error, Result};
pub use hierarchy::LabelHierarchy;
pub use prototypes::{BatchAssignments, PrototypeBank};
pub use ssv::SurpriseVector;
