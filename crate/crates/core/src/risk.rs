//! Ternary risk classification over surprise vectors and the metrics that
//! score it: normalized semantic risk (nSR), macro F1, confusion matrices,
//! and binary OOD metrics (FPR at 95% TPR, AUROC).
//!
//! The risk classifier is a multinomial logistic regression over the three
//! surprise components augmented with their squares and pairwise products
//! (9 features for the full vector), standardized and trained by full-batch
//! gradient descent with a backtracking step so the recorded loss trace
//! decreases monotonically. A seeded k-means over the same features serves
//! as the clustering baseline.

use crate::embedding::RiskTier;
use crate::error::{Error, Result};
use crate::ssv::SurpriseVector;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

/// Semantic risk costs, rows = true tier, columns = predicted tier.
/// The diagonal is zero and the OOD-missed-as-ID column is pinned to
/// (Near→ID) = 5 and (Far→ID) = 6, which makes the always-predict-ID
/// baseline score exactly 1 under `nsr`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: [[f64; 3]; 3],
}

impl Default for CostMatrix {
    fn default() -> Self {
        // off-diagonal defaults encode that over-warning is cheaper than
        // under-warning; ID→Near 1, ID→Far 2, Near→Far 1, Far→Near 2
        Self {
            costs: [[0.0, 1.0, 2.0], [5.0, 0.0, 1.0], [6.0, 2.0, 0.0]],
        }
    }
}

impl CostMatrix {
    pub fn new(costs: [[f64; 3]; 3]) -> Result<Self> {
        for (i, row) in costs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidArgument {
                        name: "cost matrix",
                        detail: format!("cost[{i}][{j}] = {c} must be finite and nonnegative"),
                    });
                }
            }
            if costs[i][i] != 0.0 {
                return Err(Error::InvalidArgument {
                    name: "cost matrix",
                    detail: "diagonal must be zero (correct predictions cost nothing)".into(),
                });
            }
        }
        if costs[1][0] != 5.0 || costs[2][0] != 6.0 {
            return Err(Error::InvalidArgument {
                name: "cost matrix",
                detail: format!(
                    "C(Near,ID) and C(Far,ID) are pinned to 5 and 6, got {} and {}",
                    costs[1][0], costs[2][0]
                ),
            });
        }
        Ok(Self { costs })
    }

    pub fn cost(&self, true_tier: RiskTier, pred_tier: RiskTier) -> f64 {
        self.costs[true_tier.index()][pred_tier.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(",ID,Near,Far\n");
        for (i, tier) in RiskTier::ALL.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                tier, self.costs[i][0], self.costs[i][1], self.costs[i][2]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "cost matrix csv",
            detail,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header.trim() != ",ID,Near,Far" {
            return Err(bad(format!("bad header `{header}`")));
        }
        let mut costs = [[0.0; 3]; 3];
        for (i, tier) in RiskTier::ALL.iter().enumerate() {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("missing row for {tier}")))?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 || RiskTier::parse(fields[0].trim()) != Some(*tier) {
                return Err(bad(format!("row {} must start with `{tier}`", i + 2)));
            }
            for j in 0..3 {
                costs[i][j] = fields[j + 1]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad cost `{}`", fields[j + 1])))?;
            }
        }
        Self::new(costs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Aligned true and predicted tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryPrediction {
    true_tiers: Vec<RiskTier>,
    pred_tiers: Vec<RiskTier>,
}

impl TernaryPrediction {
    pub fn new(true_tiers: Vec<RiskTier>, pred_tiers: Vec<RiskTier>) -> Result<Self> {
        if true_tiers.len() != pred_tiers.len() {
            return Err(Error::DimensionMismatch {
                context: "predictions",
                expected: true_tiers.len(),
                got: pred_tiers.len(),
            });
        }
        Ok(Self {
            true_tiers,
            pred_tiers,
        })
    }

    pub fn len(&self) -> usize {
        self.true_tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_tiers.is_empty()
    }

    pub fn true_tiers(&self) -> &[RiskTier] {
        &self.true_tiers
    }

    pub fn pred_tiers(&self) -> &[RiskTier] {
        &self.pred_tiers
    }
}

/// Rows = true tier, columns = predicted tier.
pub fn confusion_matrix(preds: &TernaryPrediction) -> [[usize; 3]; 3] {
    let mut m = [[0usize; 3]; 3];
    for (t, p) in preds.true_tiers.iter().zip(&preds.pred_tiers) {
        m[t.index()][p.index()] += 1;
    }
    m
}

/// Normalized semantic risk: total cost divided by the cost of always
/// predicting ID (5·N_Near + 6·N_Far). Perfect predictions score 0, the
/// always-ID baseline scores exactly 1; undefined without OOD samples.
pub fn nsr(preds: &TernaryPrediction, cost: &CostMatrix) -> Result<f64> {
    let n_near = preds
        .true_tiers
        .iter()
        .filter(|t| **t == RiskTier::NearOod)
        .count();
    let n_far = preds
        .true_tiers
        .iter()
        .filter(|t| **t == RiskTier::FarOod)
        .count();
    if n_near + n_far == 0 {
        return Err(Error::NoOodSamples);
    }
    let total: f64 = preds
        .true_tiers
        .iter()
        .zip(&preds.pred_tiers)
        .map(|(t, p)| cost.cost(*t, *p))
        .sum();
    let denom = cost.cost(RiskTier::NearOod, RiskTier::Id) * n_near as f64
        + cost.cost(RiskTier::FarOod, RiskTier::Id) * n_far as f64;
    Ok(total / denom)
}

/// Per-class and macro F1 with the 0-for-empty-denominator convention.
pub fn macro_f1(preds: &TernaryPrediction) -> ([f64; 3], f64) {
    let m = confusion_matrix(preds);
    let mut per_class = [0.0; 3];
    for c in 0..3 {
        let tp = m[c][c] as f64;
        let fp: f64 = (0..3).filter(|&t| t != c).map(|t| m[t][c] as f64).sum();
        let fn_: f64 = (0..3).filter(|&p| p != c).map(|p| m[c][p] as f64).sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        per_class[c] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    let macro_avg = per_class.iter().sum::<f64>() / 3.0;
    (per_class, macro_avg)
}

/// AUROC (rank statistic with midrank tie correction) and FPR at the 95% TPR
/// operating point for a binary ID-vs-OOD score. The FPR95 threshold is the
/// qualifying operating point with the smallest FPR, i.e. the largest
/// higher-is-OOD threshold whose TPR is still ≥ 0.95.
pub fn binary_metrics(
    id_scores: &[f64],
    ood_scores: &[f64],
    higher_is_ood: bool,
) -> Result<(f64, f64)> {
    if id_scores.is_empty() || ood_scores.is_empty() {
        return Err(Error::InvalidArgument {
            name: "scores",
            detail: "both score lists must be non-empty".into(),
        });
    }
    if id_scores
        .iter()
        .chain(ood_scores.iter())
        .any(|x| !x.is_finite())
    {
        return Err(Error::NonFinite {
            context: "binary scores",
            index: None,
        });
    }
    let sign = if higher_is_ood { 1.0 } else { -1.0 };
    let id: Vec<f64> = id_scores.iter().map(|x| sign * x).collect();
    let ood: Vec<f64> = ood_scores.iter().map(|x| sign * x).collect();

    // midranks over the pooled sample
    let mut pooled: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, false))
        .chain(ood.iter().map(|&s| (s, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let n = pooled.len();
    let mut rank_sum_ood = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for item in pooled.iter().take(j + 1).skip(i) {
            if item.1 {
                rank_sum_ood += midrank;
            }
        }
        i = j + 1;
    }
    let (n_i, n_o) = (id.len() as f64, ood.len() as f64);
    let auroc = (rank_sum_ood - n_o * (n_o + 1.0) / 2.0) / (n_i * n_o);

    // FPR at >= 95% TPR: threshold at the ⌈0.95·n_o⌉-th highest OOD score
    let mut ood_sorted = ood.clone();
    ood_sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let need = ((0.95 * n_o).ceil() as usize).clamp(1, ood_sorted.len());
    let threshold = ood_sorted[need - 1];
    let fpr = id.iter().filter(|&&s| s >= threshold).count() as f64 / n_i;
    Ok((fpr, auroc))
}

/// Which surprise components a classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentMask {
    pub conf: bool,
    pub novel: bool,
    pub ambig: bool,
}

impl ComponentMask {
    pub const FULL: ComponentMask = ComponentMask {
        conf: true,
        novel: true,
        ambig: true,
    };

    pub fn single(i: usize) -> ComponentMask {
        ComponentMask {
            conf: i == 0,
            novel: i == 1,
            ambig: i == 2,
        }
    }

    fn selected(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.conf {
            out.push(0);
        }
        if self.novel {
            out.push(1);
        }
        if self.ambig {
            out.push(2);
        }
        out
    }

    pub fn parse(s: &str) -> Option<ComponentMask> {
        let mut mask = ComponentMask {
            conf: false,
            novel: false,
            ambig: false,
        };
        if s == "full" {
            return Some(ComponentMask::FULL);
        }
        for part in s.split('+') {
            match part.trim() {
                "conf" => mask.conf = true,
                "novel" => mask.novel = true,
                "ambig" => mask.ambig = true,
                _ => return None,
            }
        }
        if mask.selected().is_empty() {
            None
        } else {
            Some(mask)
        }
    }
}

impl std::fmt::Display for ComponentMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self == ComponentMask::FULL {
            return f.write_str("full");
        }
        let names = ["conf", "novel", "ambig"];
        let parts: Vec<&str> = self.selected().iter().map(|&i| names[i]).collect();
        f.write_str(&parts.join("+"))
    }
}

/// Multinomial logistic regression over quadratic surprise features.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskClassifier {
    mask: ComponentMask,
    weights: Array2<f64>, // 3×(F+1), bias in the last column
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    loss_trace: Vec<f64>,
}

impl RiskClassifier {
    pub fn mask(&self) -> ComponentMask {
        self.mask
    }

    /// Cross-entropy at the recorded checkpoints; decreases monotonically.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn predict(&self, ssvs: &[SurpriseVector]) -> Vec<RiskTier> {
        ssvs.iter()
            .map(|sv| {
                let x = self.standardize(&quadratic_features(sv, self.mask));
                let mut best = (0usize, f64::NEG_INFINITY);
                for c in 0..3 {
                    let mut logit = self.weights[[c, x.len()]];
                    for (f, &xf) in x.iter().enumerate() {
                        logit += self.weights[[c, f]] * xf;
                    }
                    if logit > best.1 {
                        best = (c, logit);
                    }
                }
                RiskTier::from_index(best.0).expect("three classes")
            })
            .collect()
    }

    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(f, &x)| (x - self.feat_mean[f]) / self.feat_std[f])
            .collect()
    }
}

/// Selected components, their squares, and pairwise products.
fn quadratic_features(sv: &SurpriseVector, mask: ComponentMask) -> Vec<f64> {
    let sel = mask.selected();
    let raw: Vec<f64> = sel.iter().map(|&i| sv.component(i)).collect();
    let mut feats = raw.clone();
    for &x in &raw {
        feats.push(x * x);
    }
    for i in 0..raw.len() {
        for j in (i + 1)..raw.len() {
            feats.push(raw[i] * raw[j]);
        }
    }
    feats
}

pub fn fit_classifier(
    ssvs: &[(SurpriseVector, RiskTier)],
    seed: u64,
) -> Result<RiskClassifier> {
    fit_classifier_masked(ssvs, ComponentMask::FULL, seed)
}

/// Full-batch gradient descent with backtracking halving; deterministic per
/// seed, training loss monotone across recorded checkpoints.
pub fn fit_classifier_masked(
    ssvs: &[(SurpriseVector, RiskTier)],
    mask: ComponentMask,
    seed: u64,
) -> Result<RiskClassifier> {
    for tier in RiskTier::ALL {
        if !ssvs.iter().any(|(_, t)| *t == tier) {
            return Err(Error::MissingTier {
                tier: match tier {
                    RiskTier::Id => "ID",
                    RiskTier::NearOod => "Near",
                    RiskTier::FarOod => "Far",
                },
            });
        }
    }
    let n = ssvs.len();
    let raw: Vec<Vec<f64>> = ssvs
        .iter()
        .map(|(sv, _)| quadratic_features(sv, mask))
        .collect();
    let nf = raw[0].len();
    let mut feat_mean = vec![0.0; nf];
    let mut feat_std = vec![0.0; nf];
    for x in &raw {
        for f in 0..nf {
            feat_mean[f] += x[f];
        }
    }
    for m in feat_mean.iter_mut() {
        *m /= n as f64;
    }
    for x in &raw {
        for f in 0..nf {
            feat_std[f] += (x[f] - feat_mean[f]).powi(2);
        }
    }
    for s in feat_std.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant feature: leave unscaled
        }
    }
    let mut x = Array2::<f64>::zeros((n, nf + 1));
    for (i, rowf) in raw.iter().enumerate() {
        for f in 0..nf {
            x[[i, f]] = (rowf[f] - feat_mean[f]) / feat_std[f];
        }
        x[[i, nf]] = 1.0;
    }
    let y: Vec<usize> = ssvs.iter().map(|(_, t)| t.index()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::<f64>::from_shape_fn((3, nf + 1), |_| {
        0.01 * rng.sample::<f64, _>(StandardNormal)
    });

    // light L2 on non-bias weights keeps the quadratic features from
    // overfitting small fits without hurting separable cases
    const L2: f64 = 1e-4;
    let loss_and_grad = |w: &Array2<f64>| -> (f64, Array2<f64>) {
        let logits = x.dot(&w.t()); // n×3
        let mut loss = 0.0;
        let mut grad = Array2::<f64>::zeros((3, nf + 1));
        for i in 0..n {
            let row = logits.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&l| (l - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            loss += -(row[y[i]] - m - z.ln());
            for c in 0..3 {
                let p = exps[c] / z;
                let delta = p - if c == y[i] { 1.0 } else { 0.0 };
                let mut grow = grad.row_mut(c);
                grow.scaled_add(delta / n as f64, &x.row(i));
            }
        }
        let mut total = loss / n as f64;
        for c in 0..3 {
            for f in 0..nf {
                total += 0.5 * L2 * w[[c, f]] * w[[c, f]];
                grad[[c, f]] += L2 * w[[c, f]];
            }
        }
        (total, grad)
    };

    let mut trace = Vec::new();
    let (mut loss, mut grad) = loss_and_grad(&w);
    trace.push(loss);
    let mut lr = 1.0;
    for iter in 0..500 {
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-10 || lr < 1e-14 {
            break;
        }
        // backtrack until the step improves the loss
        let mut stepped = false;
        for _ in 0..60 {
            let mut cand = w.clone();
            cand.scaled_add(-lr, &grad);
            let (cand_loss, cand_grad) = loss_and_grad(&cand);
            if cand_loss <= loss {
                w = cand;
                loss = cand_loss;
                grad = cand_grad;
                lr = (lr * 1.2).min(16.0);
                stepped = true;
                break;
            }
            lr *= 0.5;
        }
        if !stepped {
            break;
        }
        if (iter + 1) % 25 == 0 {
            trace.push(loss);
        }
    }
    trace.push(loss);

    Ok(RiskClassifier {
        mask,
        weights: w,
        feat_mean,
        feat_std,
        loss_trace: trace,
    })
}

/// Seeded k-means with k-means++ init; returns per-point cluster ids and the
/// inertia of the best of `restarts` runs. Empty clusters trigger a reseed,
/// up to 10 before signalling. Fewer distinct points than k collapses to
/// trivial per-point clusters.
pub fn kmeans_cluster(
    points: ArrayView2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = points.nrows();
    if n < k {
        return Err(Error::InvalidArgument {
            name: "points",
            detail: format!("need at least {k} points, got {n}"),
        });
    }
    // degenerate duplicates: fewer distinct rows than clusters
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let row: Vec<f64> = points.row(i).to_vec();
        if !distinct.contains(&row) {
            distinct.push(row);
        }
        if distinct.len() > k {
            break;
        }
    }
    if distinct.len() <= k {
        let assign: Vec<usize> = (0..n)
            .map(|i| {
                let row: Vec<f64> = points.row(i).to_vec();
                distinct.iter().position(|d| *d == row).expect("collected")
            })
            .collect();
        return Ok((assign, 0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut failures = 0usize;
    let mut run = 0usize;
    while run < restarts {
        let attempt_seed = rng.random::<u64>();
        match lloyd_once(points, k, attempt_seed) {
            Some(result) => {
                if best.as_ref().is_none_or(|b| result.1 < b.1 - 1e-15) {
                    best = Some(result);
                }
                run += 1;
            }
            None => {
                failures += 1;
                if failures > 10 {
                    return Err(Error::DegenerateClustering { attempts: failures });
                }
            }
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One k-means++ init plus Lloyd iterations; None when a cluster empties.
fn lloyd_once(points: ArrayView2<f64>, k: usize, seed: u64) -> Option<(Vec<usize>, f64)> {
    let n = points.nrows();
    let d = points.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut dist2 = vec![0.0f64; n];
    for c in 1..k {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for cc in 0..c {
                let mut s = 0.0;
                for t in 0..d {
                    let diff = points[[i, t]] - centers[[cc, t]];
                    s += diff * diff;
                }
                best = best.min(s);
            }
            dist2[i] = best;
            total += best;
        }
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for i in 0..n {
                if target < dist2[i] {
                    chosen = i;
                    break;
                }
                target -= dist2[i];
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
    }

    let mut assign = vec![0usize; n];
    for _ in 0..200 {
        let mut changed = false;
        for i in 0..n {
            let mut best = (0usize, f64::INFINITY);
            for c in 0..k {
                let mut s = 0.0;
                for t in 0..d {
                    let diff = points[[i, t]] - centers[[c, t]];
                    s += diff * diff;
                }
                if s < best.1 {
                    best = (c, s);
                }
            }
            if assign[i] != best.0 {
                assign[i] = best.0;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for i in 0..n {
            counts[assign[i]] += 1;
            let mut row = sums.row_mut(assign[i]);
            row += &points.row(i);
        }
        if counts.iter().any(|&c| c == 0) {
            return None;
        }
        for c in 0..k {
            let mut row = sums.row_mut(c);
            row.mapv_inplace(|x| x / counts[c] as f64);
        }
        centers = sums;
        if !changed {
            break;
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        for t in 0..d {
            let diff = points[[i, t]] - centers[[assign[i], t]];
            inertia += diff * diff;
        }
    }
    Some((assign, inertia))
}

/// Deterministic stratified split: per tier, shuffle with a seeded stream
/// and send the first `floor(frac·n)` rows to the fit half.
pub fn stratified_split(
    rows: &[(SurpriseVector, RiskTier)],
    train_frac: f64,
    seed: u64,
) -> (
    Vec<(SurpriseVector, RiskTier)>,
    Vec<(SurpriseVector, RiskTier)>,
) {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = Vec::new();
    let mut eval = Vec::new();
    for tier in RiskTier::ALL {
        let mut tier_rows: Vec<&(SurpriseVector, RiskTier)> =
            rows.iter().filter(|(_, t)| *t == tier).collect();
        tier_rows.shuffle(&mut rng);
        let n_fit = (tier_rows.len() as f64 * train_frac).floor() as usize;
        for (i, r) in tier_rows.into_iter().enumerate() {
            if i < n_fit {
                fit.push(*r);
            } else {
                eval.push(*r);
            }
        }
    }
    (fit, eval)
}

/// k = 3 clustering of the surprise vectors; clusters map to tiers by
/// majority true tier (ties break to the lower tier index).
pub fn kmeans_baseline(
    ssvs: &[SurpriseVector],
    true_tiers: &[RiskTier],
    seed: u64,
) -> Result<TernaryPrediction> {
    if ssvs.len() != true_tiers.len() {
        return Err(Error::DimensionMismatch {
            context: "kmeans labels",
            expected: ssvs.len(),
            got: true_tiers.len(),
        });
    }
    if ssvs.len() < 3 {
        return Err(Error::InvalidArgument {
            name: "ssvs",
            detail: format!("need at least 3 samples, got {}", ssvs.len()),
        });
    }
    // standardized raw components, same scaling idea as the classifier
    let mut points = Array2::<f64>::zeros((ssvs.len(), 3));
    for (i, sv) in ssvs.iter().enumerate() {
        points[[i, 0]] = sv.s_conf;
        points[[i, 1]] = sv.s_novel;
        points[[i, 2]] = sv.s_ambig;
    }
    for f in 0..3 {
        let col = points.column(f);
        let mean = col.sum() / col.len() as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
        let std = var.sqrt().max(1e-12);
        let mut col = points.column_mut(f);
        col.mapv_inplace(|x| (x - mean) / std);
    }
    let (assign, _) = kmeans_cluster(points.view(), 3, seed, 10)?;

    let num_clusters = assign.iter().copied().max().unwrap_or(0) + 1;
    let mut votes = vec![[0usize; 3]; num_clusters];
    for (i, &c) in assign.iter().enumerate() {
        votes[c][true_tiers[i].index()] += 1;
    }
    let cluster_tier: Vec<RiskTier> = votes
        .iter()
        .map(|v| {
            let mut best = (0usize, 0usize);
            for tier in 0..3 {
                if v[tier] > best.1 {
                    best = (tier, v[tier]); // strict >, ties keep lower index
                }
            }
            RiskTier::from_index(best.0).expect("tier index")
        })
        .collect();
    let preds: Vec<RiskTier> = assign.iter().map(|&c| cluster_tier[c]).collect();
    TernaryPrediction::new(true_tiers.to_vec(), preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sv(c: f64, n: f64, a: f64) -> SurpriseVector {
        SurpriseVector {
            s_conf: c,
            s_novel: n,
            s_ambig: a,
        }
    }

    fn tiers(spec: &[(RiskTier, usize)]) -> Vec<RiskTier> {
        spec.iter()
            .flat_map(|(t, n)| std::iter::repeat_n(*t, *n))
            .collect()
    }

    #[test]
    fn cost_matrix_invariants() {
        assert!(CostMatrix::new([[0.0, 1.0, 2.0], [5.0, 0.0, 1.0], [6.0, 2.0, 0.0]]).is_ok());
        // broken diagonal
        assert!(CostMatrix::new([[0.5, 1.0, 2.0], [5.0, 0.0, 1.0], [6.0, 2.0, 0.0]]).is_err());
        // unpinned Near→ID
        assert!(CostMatrix::new([[0.0, 1.0, 2.0], [4.0, 0.0, 1.0], [6.0, 2.0, 0.0]]).is_err());
        let m = CostMatrix::default();
        assert_eq!(CostMatrix::from_csv(&m.to_csv()).unwrap(), m);
    }

    #[test]
    fn nsr_axioms() {
        let cost = CostMatrix::default();
        let t = tiers(&[
            (RiskTier::Id, 50),
            (RiskTier::NearOod, 30),
            (RiskTier::FarOod, 20),
        ]);
        let perfect = TernaryPrediction::new(t.clone(), t.clone()).unwrap();
        assert_eq!(nsr(&perfect, &cost).unwrap(), 0.0);

        let always_id =
            TernaryPrediction::new(t.clone(), vec![RiskTier::Id; t.len()]).unwrap();
        assert_eq!(nsr(&always_id, &cost).unwrap(), 1.0);

        // hand case: 10 Near→ID, 5 Far→Near, rest correct
        let mut preds = t.clone();
        let near_start = 50;
        let far_start = 80;
        for p in preds.iter_mut().skip(near_start).take(10) {
            *p = RiskTier::Id;
        }
        for p in preds.iter_mut().skip(far_start).take(5) {
            *p = RiskTier::NearOod;
        }
        let hand = TernaryPrediction::new(t, preds).unwrap();
        // (10·5 + 5·2) / (5·30 + 6·20) = 60/270
        assert_abs_diff_eq!(nsr(&hand, &cost).unwrap(), 60.0 / 270.0, epsilon = 1e-15);

        let only_id = tiers(&[(RiskTier::Id, 5)]);
        let p = TernaryPrediction::new(only_id.clone(), only_id).unwrap();
        assert!(matches!(nsr(&p, &cost), Err(Error::NoOodSamples)));
    }

    #[test]
    fn macro_f1_cases() {
        let t = tiers(&[
            (RiskTier::Id, 4),
            (RiskTier::NearOod, 4),
            (RiskTier::FarOod, 4),
        ]);
        let perfect = TernaryPrediction::new(t.clone(), t).unwrap();
        let (per, macro_avg) = macro_f1(&perfect);
        assert_eq!(per, [1.0, 1.0, 1.0]);
        assert_eq!(macro_avg, 1.0);

        // Far never true and never predicted → F1(Far) = 0 by convention
        let t = tiers(&[(RiskTier::Id, 3), (RiskTier::NearOod, 3)]);
        let p = TernaryPrediction::new(t.clone(), t).unwrap();
        let (per, _) = macro_f1(&p);
        assert_eq!(per[2], 0.0);
        assert_eq!(per[0], 1.0);

        // hand-computed mixed case
        let truth = vec![
            RiskTier::Id,
            RiskTier::Id,
            RiskTier::NearOod,
            RiskTier::FarOod,
        ];
        let pred = vec![
            RiskTier::Id,
            RiskTier::NearOod,
            RiskTier::NearOod,
            RiskTier::Id,
        ];
        let p = TernaryPrediction::new(truth, pred).unwrap();
        let (per, macro_avg) = macro_f1(&p);
        assert_abs_diff_eq!(per[0], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(per[1], 2.0 / 3.0, epsilon = 1e-13);
        assert_eq!(per[2], 0.0);
        assert_abs_diff_eq!(macro_avg, (0.5 + 2.0 / 3.0) / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn confusion_matrix_cases() {
        let t = tiers(&[(RiskTier::Id, 2), (RiskTier::FarOod, 3)]);
        let p = TernaryPrediction::new(t.clone(), vec![RiskTier::Id; 5]).unwrap();
        let m = confusion_matrix(&p);
        assert_eq!(m[0][0], 2);
        assert_eq!(m[2][0], 3);
        assert_eq!(m[1][1], 0);
    }

    #[test]
    fn binary_metric_cases() {
        // perfectly separated
        let (fpr, auroc) = binary_metrics(&[0.1, 0.2, 0.3], &[0.9, 1.0, 1.1], true).unwrap();
        assert_eq!(auroc, 1.0);
        assert_eq!(fpr, 0.0);

        // identical score lists → chance level under tie correction
        let (_, auroc) = binary_metrics(&[0.5, 0.5], &[0.5, 0.5], true).unwrap();
        assert_abs_diff_eq!(auroc, 0.5, epsilon = 1e-12);

        // lower-is-ood flips
        let (fpr, auroc) = binary_metrics(&[0.9, 1.0], &[0.1, 0.2], false).unwrap();
        assert_eq!(auroc, 1.0);
        assert_eq!(fpr, 0.0);

        assert!(binary_metrics(&[], &[1.0], true).is_err());
        assert!(binary_metrics(&[f64::NAN], &[1.0], true).is_err());
    }

    #[test]
    fn auroc_matches_pair_counting_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let id: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let ood: Vec<f64> = (0..20).map(|_| rng.random_range(0.3..1.3)).collect();
        let (_, auroc) = binary_metrics(&id, &ood, true).unwrap();
        let mut concordant = 0.0;
        for &o in &ood {
            for &i in &id {
                if o > i {
                    concordant += 1.0;
                } else if o == i {
                    concordant += 0.5;
                }
            }
        }
        let oracle = concordant / (id.len() * ood.len()) as f64;
        assert_abs_diff_eq!(auroc, oracle, epsilon = 1e-12);
    }

    fn blob_data(seed: u64) -> (Vec<SurpriseVector>, Vec<RiskTier>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ssvs = Vec::new();
        let mut tiers = Vec::new();
        let centers = [(1.0, 0.5, 0.2), (4.0, 2.0, 0.8), (8.0, 5.0, 0.4)];
        for (ci, &(a, b, c)) in centers.iter().enumerate() {
            for _ in 0..30 {
                ssvs.push(sv(
                    a + rng.random_range(-0.2..0.2),
                    b + rng.random_range(-0.2..0.2),
                    c + rng.random_range(-0.05..0.05),
                ));
                tiers.push(RiskTier::from_index(ci).unwrap());
            }
        }
        (ssvs, tiers)
    }

    #[test]
    fn classifier_fits_separable_clusters_perfectly() {
        let (ssvs, tiers) = blob_data(5);
        let pairs: Vec<(SurpriseVector, RiskTier)> =
            ssvs.iter().copied().zip(tiers.iter().copied()).collect();
        let clf = fit_classifier(&pairs, 0).unwrap();
        let preds = clf.predict(&ssvs);
        assert_eq!(preds, tiers);
        // monotone loss trace
        for w in clf.loss_trace().windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn classifier_is_deterministic_per_seed() {
        let (ssvs, tiers) = blob_data(6);
        let pairs: Vec<(SurpriseVector, RiskTier)> =
            ssvs.iter().copied().zip(tiers.iter().copied()).collect();
        let a = fit_classifier(&pairs, 9).unwrap();
        let b = fit_classifier(&pairs, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classifier_requires_all_tiers() {
        let pairs = vec![
            (sv(1.0, 1.0, 0.5), RiskTier::Id),
            (sv(2.0, 2.0, 0.5), RiskTier::NearOod),
        ];
        assert!(matches!(
            fit_classifier(&pairs, 0),
            Err(Error::MissingTier { tier: "Far" })
        ));
    }

    #[test]
    fn kmeans_recovers_point_masses() {
        let mut ssvs = Vec::new();
        let mut truth = Vec::new();
        for (tier, c) in [
            (RiskTier::Id, 0.0),
            (RiskTier::NearOod, 5.0),
            (RiskTier::FarOod, 10.0),
        ] {
            for _ in 0..10 {
                ssvs.push(sv(c, c, 0.1));
                truth.push(tier);
            }
        }
        let pred = kmeans_baseline(&ssvs, &truth, 3).unwrap();
        assert_eq!(pred.pred_tiers(), pred.true_tiers());
    }

    #[test]
    fn kmeans_identical_points_collapse_to_one_tier() {
        let ssvs = vec![sv(1.0, 1.0, 1.0); 9];
        let truth = tiers(&[
            (RiskTier::Id, 3),
            (RiskTier::NearOod, 4),
            (RiskTier::FarOod, 2),
        ]);
        let pred = kmeans_baseline(&ssvs, &truth, 1).unwrap();
        // majority tier is Near
        assert!(pred.pred_tiers().iter().all(|&t| t == RiskTier::NearOod));
    }

    #[test]
    fn kmeans_matches_exhaustive_restart_oracle() {
        let (ssvs, _) = blob_data(11);
        let mut points = Array2::<f64>::zeros((ssvs.len(), 3));
        for (i, s) in ssvs.iter().enumerate() {
            points[[i, 0]] = s.s_conf;
            points[[i, 1]] = s.s_novel;
            points[[i, 2]] = s.s_ambig;
        }
        let (_, inertia) = kmeans_cluster(points.view(), 3, 5, 10).unwrap();
        let (_, oracle) = kmeans_cluster(points.view(), 3, 99, 50).unwrap();
        assert_abs_diff_eq!(inertia, oracle, epsilon = 1e-9);
    }
}
