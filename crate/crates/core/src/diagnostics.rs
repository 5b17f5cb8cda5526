//! Manifold geometric health: compactness (same-subclass pair distances),
//! cohesion (cross-subclass pairs within a superclass), separation
//! (cross-superclass pairs), and prototype angle statistics. Compactness and
//! cohesion average per group first, then across groups; separation is the
//! global cross-superclass mean. Pair scans are exact O(N²) by default with
//! an optional seeded uniform pair subsample for large sets.

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::numeric::euclidean;
use crate::prototypes::PrototypeBank;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldReport {
    pub compactness: f64,
    pub cohesion: f64,
    pub separation: f64,
    pub intra_super_angle_deg: f64,
    pub inter_super_angle_deg: f64,
    /// Seed of the uniform pair subsample when one was used; None = exact.
    pub pair_sample: Option<PairSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub max_pairs: usize,
    pub seed: u64,
}

/// Mean same-subclass pair distance, averaged per subclass then across
/// subclasses. Errors when no subclass has at least two samples.
pub fn compactness(set: &EmbeddingSet) -> Result<f64> {
    let labels = labels_of(set)?;
    let v = set.vectors();
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut per_class = Vec::new();
    for class in 0..num_classes {
        let rows: Vec<usize> = (0..set.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        let mut count = 0u64;
        for a in 0..rows.len() {
            for b in (a + 1)..rows.len() {
                sum += euclidean(v.row(rows[a]), v.row(rows[b]));
                count += 1;
            }
        }
        per_class.push(sum / count as f64);
    }
    if per_class.is_empty() {
        return Err(Error::NoPairs {
            metric: "compactness",
        });
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// Mean distance over same-superclass cross-subclass pairs, averaged per
/// superclass then across superclasses.
pub fn cohesion(set: &EmbeddingSet, hierarchy: &LabelHierarchy) -> Result<f64> {
    let labels = labels_of(set)?;
    set.validate_labels(hierarchy)?;
    let v = set.vectors();
    let mut per_super = Vec::new();
    for m in 0..hierarchy.num_superclasses() {
        let rows: Vec<usize> = (0..set.len())
            .filter(|&i| hierarchy.superclass_of(labels[i]) == m)
            .collect();
        let mut sum = 0.0;
        let mut count = 0u64;
        for a in 0..rows.len() {
            for b in (a + 1)..rows.len() {
                if labels[rows[a]] != labels[rows[b]] {
                    sum += euclidean(v.row(rows[a]), v.row(rows[b]));
                    count += 1;
                }
            }
        }
        if count > 0 {
            per_super.push(sum / count as f64);
        }
    }
    if per_super.is_empty() {
        return Err(Error::NoPairs { metric: "cohesion" });
    }
    Ok(per_super.iter().sum::<f64>() / per_super.len() as f64)
}

/// Global mean distance over all cross-superclass sample pairs.
pub fn separation(set: &EmbeddingSet, hierarchy: &LabelHierarchy) -> Result<f64> {
    let labels = labels_of(set)?;
    set.validate_labels(hierarchy)?;
    let v = set.vectors();
    let mut sum = 0.0;
    let mut count = 0u64;
    for a in 0..set.len() {
        for b in (a + 1)..set.len() {
            if hierarchy.superclass_of(labels[a]) != hierarchy.superclass_of(labels[b]) {
                sum += euclidean(v.row(a), v.row(b));
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoPairs {
            metric: "separation",
        });
    }
    Ok(sum / count as f64)
}

/// Mean pairwise angles (degrees): intra = prototypes of different
/// subclasses within the same superclass, inter = across superclasses.
/// Dot products are clamped to [−1, 1] before arccos.
pub fn prototype_angles(bank: &PrototypeBank) -> Result<(f64, f64)> {
    let h = bank.hierarchy();
    if h.num_superclasses() < 2 {
        return Err(Error::InterAngleUndefined);
    }
    let flat = bank.flattened();
    let k = bank.prototypes_per_class();
    let mut intra = (0.0, 0u64);
    let mut inter = (0.0, 0u64);
    for a in 0..flat.nrows() {
        for b in (a + 1)..flat.nrows() {
            let (ca, cb) = (a / k, b / k);
            if ca == cb {
                continue;
            }
            let angle = flat.row(a).dot(&flat.row(b)).clamp(-1.0, 1.0).acos();
            if h.superclass_of(ca) == h.superclass_of(cb) {
                intra.0 += angle;
                intra.1 += 1;
            } else {
                inter.0 += angle;
                inter.1 += 1;
            }
        }
    }
    if intra.1 == 0 {
        return Err(Error::NoPairs {
            metric: "intra-superclass prototype angle",
        });
    }
    let to_deg = 180.0 / std::f64::consts::PI;
    Ok((
        to_deg * intra.0 / intra.1 as f64,
        to_deg * inter.0 / inter.1 as f64,
    ))
}

/// Full report for one embedded set plus its bank. `pair_sample` switches the
/// three distance metrics to a seeded uniform pair subsample.
pub fn manifold_report(
    set: &EmbeddingSet,
    hierarchy: &LabelHierarchy,
    bank: &PrototypeBank,
    pair_sample: Option<PairSample>,
) -> Result<ManifoldReport> {
    // angles first: a single superclass should surface as "inter undefined"
    let (intra, inter) = prototype_angles(bank)?;
    let (compactness, cohesion, separation) = match pair_sample {
        None => (
            compactness(set)?,
            cohesion(set, hierarchy)?,
            separation(set, hierarchy)?,
        ),
        Some(ps) => sampled_distance_metrics(set, hierarchy, ps)?,
    };
    Ok(ManifoldReport {
        compactness,
        cohesion,
        separation,
        intra_super_angle_deg: intra,
        inter_super_angle_deg: inter,
        pair_sample,
    })
}

/// Uniform pair subsample shared by the three distance metrics. Per-group
/// structure mirrors the exact scans: compactness/cohesion average per
/// group, separation pools globally.
fn sampled_distance_metrics(
    set: &EmbeddingSet,
    hierarchy: &LabelHierarchy,
    ps: PairSample,
) -> Result<(f64, f64, f64)> {
    let labels = labels_of(set)?;
    set.validate_labels(hierarchy)?;
    let v = set.vectors();
    let n = set.len();
    if n < 2 || ps.max_pairs == 0 {
        return Err(Error::NoPairs { metric: "sampled" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ps.seed);
    let num_classes = hierarchy.num_subclasses();
    let mut class_acc = vec![(0.0, 0u64); num_classes];
    let mut super_acc = vec![(0.0, 0u64); hierarchy.num_superclasses()];
    let mut sep_acc = (0.0, 0u64);
    for _ in 0..ps.max_pairs {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let d = euclidean(v.row(a), v.row(b));
        let (la, lb) = (labels[a], labels[b]);
        if la == lb {
            class_acc[la].0 += d;
            class_acc[la].1 += 1;
        } else if hierarchy.superclass_of(la) == hierarchy.superclass_of(lb) {
            let m = hierarchy.superclass_of(la);
            super_acc[m].0 += d;
            super_acc[m].1 += 1;
        } else {
            sep_acc.0 += d;
            sep_acc.1 += 1;
        }
    }
    let mean_of = |acc: &[(f64, u64)]| {
        let vals: Vec<f64> = acc
            .iter()
            .filter(|(_, c)| *c > 0)
            .map(|(s, c)| s / *c as f64)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let compactness = mean_of(&class_acc).ok_or(Error::NoPairs {
        metric: "compactness",
    })?;
    let cohesion = mean_of(&super_acc).ok_or(Error::NoPairs { metric: "cohesion" })?;
    if sep_acc.1 == 0 {
        return Err(Error::NoPairs {
            metric: "separation",
        });
    }
    Ok((compactness, cohesion, sep_acc.0 / sep_acc.1 as f64))
}

fn labels_of(set: &EmbeddingSet) -> Result<&[usize]> {
    set.labels().ok_or(Error::InvalidArgument {
        name: "set",
        detail: "manifold metrics need a labelled set".into(),
    })
}
