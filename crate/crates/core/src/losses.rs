//! The composite manifold-shaping objective and its analytic gradients.
//!
//! Three terms act on a batch of unit-norm embeddings `z` with ground-truth
//! subclasses and a bank of K prototypes per subclass:
//!
//! * mixture likelihood (`loss_mle`): negative log posterior of the true
//!   subclass under a prototype mixture with Sinkhorn weights on the true
//!   class and uniform 1/K weights elsewhere;
//! * inter-prototype contrast (`loss_inter_proto`): InfoNCE over prototypes,
//!   positives = other prototypes of the same subclass, denominator = every
//!   prototype except the anchor;
//! * hierarchy contrast (`loss_hierarchy`): per anchor, positives are
//!   prototypes of sibling subclasses (same superclass), negatives the
//!   prototypes of all other superclasses; each positive is scored against
//!   itself plus the full negative set.
//!
//! `total_loss` combines them as `mle + λ1·inter + λ2·hierarchy`. Sinkhorn
//! weights are constants under differentiation. The prototype-level terms
//! are evaluated at the EMA candidates `Normalize(α·p + (1−α)·Σ w z)`, so
//! their gradients reach the batch embeddings through the `(1−α)` blend;
//! the mixture term uses the pre-update bank. All reductions are
//! log-sum-exp stabilized and summed in fixed order.

use crate::error::{Error, Result};
use crate::numeric::logsumexp;
use crate::prototypes::{ema_blend, BatchAssignments, PrototypeBank};
use ndarray::{Array2, Array3, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Mixture-likelihood temperature.
    pub tau: f64,
    /// Inter-prototype temperature.
    pub tau_p: f64,
    /// Hierarchy temperature.
    pub tau_h: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            tau_p: 0.2,
            tau_h: 0.2,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau", self.tau), ("tau_p", self.tau_p), ("tau_h", self.tau_h)] {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument {
                    name,
                    detail: format!("temperature must be positive, got {t}"),
                });
            }
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(l >= 0.0) {
                return Err(Error::InvalidArgument {
                    name,
                    detail: format!("weight must be nonnegative, got {l}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LossReport {
    pub mle: f64,
    pub inter_proto: f64,
    pub hierarchy: f64,
    pub total: f64,
    pub grad_embeddings: Array2<f64>,
}

/// Mixture negative log likelihood and its exact gradient w.r.t. the batch
/// embeddings (prototypes and assignment weights held fixed).
pub fn loss_mle(
    z: ArrayView2<f64>,
    labels: &[usize],
    bank: &PrototypeBank,
    assignments: &BatchAssignments,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    let (b, d) = z.dim();
    let (c, k) = (bank.num_classes(), bank.prototypes_per_class());
    if labels.len() != b {
        return Err(Error::DimensionMismatch {
            context: "batch labels",
            expected: b,
            got: labels.len(),
        });
    }
    if d != bank.dim() {
        return Err(Error::DimensionMismatch {
            context: "batch embeddings",
            expected: bank.dim(),
            got: d,
        });
    }
    let flat = bank.flattened(); // (C·K)×D
    let scores = z.dot(&flat.t()); // B×(C·K), scores/τ later
    let uniform = 1.0 / k as f64;

    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros((b, d));
    let mut logits = vec![0.0f64; c * k];
    let mut num_logits = vec![0.0f64; k];
    for i in 0..b {
        let own = labels[i];
        if own >= c {
            return Err(Error::UnknownSubclass { id: own, count: c });
        }
        for class in 0..c {
            for slot in 0..k {
                let m = class * k + slot;
                let w = if class == own {
                    assignments
                        .own_weight(class, i, slot)
                        .ok_or(Error::InvalidArgument {
                            name: "assignments",
                            detail: format!("no assignment row for batch sample {i}"),
                        })?
                } else {
                    uniform
                };
                logits[m] = if w > 0.0 {
                    w.ln() + scores[[i, m]] / cfg.tau
                } else {
                    f64::NEG_INFINITY
                };
                if class == own {
                    num_logits[slot] = logits[m];
                }
            }
        }
        let lse_den = logsumexp(&logits);
        let lse_num = logsumexp(&num_logits);
        let vi = lse_den - lse_num;
        if !vi.is_finite() {
            return Err(Error::NonFinite {
                context: "mixture likelihood",
                index: Some(i),
            });
        }
        value += vi;
        // softmax responsibilities over denominator and numerator sets
        let scale = 1.0 / (b as f64 * cfg.tau);
        for class in 0..c {
            for slot in 0..k {
                let m = class * k + slot;
                if !logits[m].is_finite() {
                    continue;
                }
                let mut coeff = (logits[m] - lse_den).exp();
                if class == own {
                    coeff -= (logits[m] - lse_num).exp();
                }
                if coeff != 0.0 {
                    let p = flat.row(m);
                    let mut g = grad.row_mut(i);
                    g.scaled_add(coeff * scale, &p);
                }
            }
        }
    }
    Ok((value / b as f64, grad))
}

/// InfoNCE over prototypes within each subclass; denominator spans every
/// prototype except the anchor itself. Errors with `NoPositives` at K = 1.
pub fn loss_inter_proto(bank: &PrototypeBank, cfg: &LossConfig) -> Result<(f64, Array3<f64>)> {
    cfg.validate()?;
    let (c, k, d) = bank.prototypes().dim();
    if k < 2 {
        return Err(Error::NoPositives);
    }
    let m = c * k;
    let flat = bank.flattened();
    let gram = flat.dot(&flat.t()).mapv(|s| s / cfg.tau_p);

    let mu = 1.0 / (c as f64 * k as f64 * (k as f64 - 1.0));
    let mut value = 0.0;
    let mut grad_flat = Array2::<f64>::zeros((m, d));
    let mut others = Vec::with_capacity(m - 1);
    for a in 0..m {
        let class = a / k;
        others.clear();
        others.extend((0..m).filter(|&x| x != a).map(|x| gram[[a, x]]));
        let lse = logsumexp(&others);
        // positives: same class, different slot
        let pos: Vec<usize> = (class * k..(class + 1) * k).filter(|&x| x != a).collect();
        for &p in &pos {
            value += mu * (lse - gram[[a, p]]);
        }
        let n_pos = pos.len() as f64; // = K−1
        // dLSE/dq terms appear once per positive
        for x in 0..m {
            if x == a {
                continue;
            }
            let sigma = (gram[[a, x]] - lse).exp();
            let w = mu * n_pos * sigma / cfg.tau_p;
            {
                let mut ga = grad_flat.row_mut(a);
                ga.scaled_add(w, &flat.row(x));
            }
            let mut gx = grad_flat.row_mut(x);
            gx.scaled_add(w, &flat.row(a));
        }
        for &p in &pos {
            let w = -mu / cfg.tau_p;
            {
                let mut ga = grad_flat.row_mut(a);
                ga.scaled_add(w, &flat.row(p));
            }
            let mut gp = grad_flat.row_mut(p);
            gp.scaled_add(w, &flat.row(a));
        }
    }
    let grad = grad_flat
        .into_shape_with_order((c, k, d))
        .expect("contiguous");
    Ok((value, grad))
}

/// Hierarchy contrast: pulls sibling-subclass prototypes together and pushes
/// other superclasses away. Zero (with zero gradient) when there is a single
/// superclass; errors when some superclass has no sibling subclasses.
pub fn loss_hierarchy(bank: &PrototypeBank, cfg: &LossConfig) -> Result<(f64, Array3<f64>)> {
    cfg.validate()?;
    let h = bank.hierarchy();
    h.validate_for_hierarchy_loss()?;
    let (c, k, d) = bank.prototypes().dim();
    let m = c * k;
    let flat = bank.flattened();
    let gram = flat.dot(&flat.t()).mapv(|s| s / cfg.tau_h);

    let mut value = 0.0;
    let mut grad_flat = Array2::<f64>::zeros((m, d));
    for a in 0..m {
        let class = a / k;
        let pos: Vec<usize> = h
            .siblings_of(class)
            .into_iter()
            .flat_map(|sib| sib * k..(sib + 1) * k)
            .collect();
        let neg: Vec<usize> = (0..c)
            .filter(|&j| h.superclass_of(j) != h.superclass_of(class))
            .flat_map(|j| j * k..(j + 1) * k)
            .collect();
        let mu = 1.0 / (m as f64 * pos.len() as f64);
        let mut den = Vec::with_capacity(neg.len() + 1);
        for &p in &pos {
            den.clear();
            den.push(gram[[a, p]]);
            den.extend(neg.iter().map(|&n| gram[[a, n]]));
            let lse = logsumexp(&den);
            value += mu * (lse - gram[[a, p]]);

            let sigma_p = (gram[[a, p]] - lse).exp();
            // anchor gradient: Σ_D σ_x q_x − q_p
            {
                let w = mu * sigma_p / cfg.tau_h;
                let mut ga = grad_flat.row_mut(a);
                ga.scaled_add(w, &flat.row(p));
            }
            for &n in &neg {
                let sigma_n = (gram[[a, n]] - lse).exp();
                let w = mu * sigma_n / cfg.tau_h;
                {
                    let mut ga = grad_flat.row_mut(a);
                    ga.scaled_add(w, &flat.row(n));
                }
                let mut gn = grad_flat.row_mut(n);
                gn.scaled_add(w, &flat.row(a));
            }
            {
                let w = -mu / cfg.tau_h;
                let mut ga = grad_flat.row_mut(a);
                ga.scaled_add(w, &flat.row(p));
            }
            let mut gp = grad_flat.row_mut(p);
            gp.scaled_add(mu * (sigma_p - 1.0) / cfg.tau_h, &flat.row(a));
        }
    }
    let grad = grad_flat
        .into_shape_with_order((c, k, d))
        .expect("contiguous");
    Ok((value, grad))
}

/// Full objective with the EMA coupling. The prototype-level terms are
/// evaluated at the post-update candidates so their gradients flow into the
/// batch embeddings; the trainer commits exactly those candidates afterwards.
pub fn total_loss(
    z: ArrayView2<f64>,
    labels: &[usize],
    bank: &PrototypeBank,
    assignments: &BatchAssignments,
    cfg: &LossConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    let (mle, mut grad) = loss_mle(z, labels, bank, assignments, cfg)?;

    let blend = ema_blend(bank, z, assignments);
    let candidate_bank = bank.with_prototypes(blend.candidates);

    let k = bank.prototypes_per_class();
    let inter = if cfg.lambda1 > 0.0 && k >= 2 {
        Some(loss_inter_proto(&candidate_bank, cfg)?)
    } else {
        None // K = 1: no positives, term disabled
    };
    let hier = if cfg.lambda2 > 0.0 {
        Some(loss_hierarchy(&candidate_bank, cfg)?)
    } else {
        None
    };

    let inter_val = inter.as_ref().map_or(0.0, |(v, _)| *v);
    let hier_val = hier.as_ref().map_or(0.0, |(v, _)| *v);

    // route prototype gradients into embeddings through the EMA blend:
    // ∂p/∂z_i = (1−α)·w_{i,k}·J_normalize(v), J = (I − u uᵀ)/‖v‖
    if inter.is_some() || hier.is_some() {
        let (c, _, d) = bank.prototypes().dim();
        let alpha = bank.alpha();
        let mut g_proto = Array3::<f64>::zeros((c, k, d));
        if let Some((_, g)) = &inter {
            g_proto.scaled_add(cfg.lambda1, g);
        }
        if let Some((_, g)) = &hier {
            g_proto.scaled_add(cfg.lambda2, g);
        }
        for class in 0..c {
            let Some(block) = assignments.block(class) else {
                continue;
            };
            for slot in 0..k {
                let nv = blend.prenorm[[class, slot]];
                if nv == 0.0 {
                    continue; // kept previous prototype: constant
                }
                let u = candidate_bank.prototype(class, slot);
                let g = g_proto.slice(ndarray::s![class, slot, ..]);
                let radial = g.dot(&u);
                let h_vec = (&g.to_owned() - &(&u.to_owned() * radial)) / nv;
                for (r, &i) in block.rows.iter().enumerate() {
                    let w = block.assignment.weights[[r, slot]];
                    if w == 0.0 {
                        continue;
                    }
                    let mut gi = grad.row_mut(i);
                    gi.scaled_add((1.0 - alpha) * w, &h_vec);
                }
            }
        }
    }

    let total = mle + cfg.lambda1 * inter_val + cfg.lambda2 * hier_val;
    if !total.is_finite() {
        return Err(Error::NonFinite {
            context: "total loss",
            index: None,
        });
    }
    Ok(LossReport {
        mle,
        inter_proto: inter_val,
        hierarchy: hier_val,
        total,
        grad_embeddings: grad,
    })
}
