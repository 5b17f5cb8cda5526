//! Synthetic hierarchical embedding data: a desk-scale stand-in for image
//! features. ID subclasses are Gaussian-angle caps on the unit sphere grouped
//! by superclass; Near-OOD samples come from one held-out sibling direction
//! per superclass (inside the superclass cone); Far-OOD samples are drawn
//! from directions at least `superclass_offset` away from every superclass
//! center. Deterministic given the seed (ChaCha8 stream).

use crate::embedding::{EmbeddingSet, RiskTier};
use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::numeric::{angle_between, rotate_towards, sample_unit_sphere, sample_unit_tangent};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MAX_REJECTION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_superclasses: usize,
    pub subclasses_per_superclass: usize,
    pub samples_per_subclass: usize,
    pub dim: usize,
    /// Angular scale (radians) of each subclass cap.
    pub intra_spread: f64,
    /// Angular distance of subclass centers from their superclass center,
    /// and of the held-out Near-OOD direction from an ID subclass center.
    pub sibling_offset: f64,
    /// Minimum angular separation between superclass centers and the
    /// exclusion radius around them for Far-OOD directions.
    pub superclass_offset: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_superclasses: 3,
            subclasses_per_superclass: 3,
            samples_per_subclass: 60,
            dim: 16,
            intra_spread: 0.15,
            sibling_offset: 0.35,
            superclass_offset: 0.90,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::InvalidArgument {
                name: "dim",
                detail: format!("must be >= 3, got {}", self.dim),
            });
        }
        for (name, v) in [
            ("num_superclasses", self.num_superclasses),
            ("subclasses_per_superclass", self.subclasses_per_superclass),
            ("samples_per_subclass", self.samples_per_subclass),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument {
                    name,
                    detail: "count must be positive".into(),
                });
            }
        }
        if self.intra_spread < 0.0
            || !(self.intra_spread < self.sibling_offset
                && self.sibling_offset < self.superclass_offset)
        {
            return Err(Error::InvalidArgument {
                name: "spreads",
                detail: format!(
                    "require 0 <= intra_spread < sibling_offset < superclass_offset, got {} / {} / {}",
                    self.intra_spread, self.sibling_offset, self.superclass_offset
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: EmbeddingSet,
    pub id_test: EmbeddingSet,
    pub near_ood: EmbeddingSet,
    pub far_ood: EmbeddingSet,
    pub hierarchy: LabelHierarchy,
}

/// One sample on the cap around `center`: rotate by |N(0, spread)| radians
/// along a uniform tangent. spread = 0 reproduces the center exactly.
fn cap_sample<R: Rng>(rng: &mut R, center: &Array1<f64>, spread: f64) -> Array1<f64> {
    if spread == 0.0 {
        return center.clone();
    }
    let theta = spread * rng.sample::<f64, _>(StandardNormal).abs();
    let t = sample_unit_tangent(rng, center.view());
    rotate_towards(center.view(), t.view(), theta)
}

fn to_set(
    rows: Vec<Array1<f64>>,
    dim: usize,
    labels: Option<Vec<usize>>,
    tier: RiskTier,
) -> Result<EmbeddingSet> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * dim);
    for r in rows {
        flat.extend(r.iter());
    }
    let m = Array2::from_shape_vec((n, dim), flat).expect("row dims are uniform");
    EmbeddingSet::new(m, labels, tier, true)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_super = spec.num_superclasses;
    let n_sub = spec.subclasses_per_superclass;
    let dim = spec.dim;

    // Superclass centers with pairwise angular separation >= superclass_offset.
    let mut super_centers: Vec<Array1<f64>> = Vec::with_capacity(n_super);
    for _ in 0..n_super {
        let mut placed = false;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let c = sample_unit_sphere(&mut rng, dim);
            if super_centers
                .iter()
                .all(|s| angle_between(c.view(), s.view()) >= spec.superclass_offset)
            {
                super_centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::DegenerateGeneration {
                detail: format!(
                    "cannot place {} superclass centers at separation {} in dim {}",
                    n_super, spec.superclass_offset, dim
                ),
            });
        }
    }

    // Subclass centers at sibling_offset from their superclass center.
    let mut sub_centers: Vec<Array1<f64>> = Vec::with_capacity(n_super * n_sub);
    for sc in &super_centers {
        for _ in 0..n_sub {
            let t = sample_unit_tangent(&mut rng, sc.view());
            sub_centers.push(rotate_towards(sc.view(), t.view(), spec.sibling_offset));
        }
    }

    // One held-out sibling direction per superclass: sibling_offset away
    // from a randomly chosen ID subclass center of that superclass.
    let mut near_centers: Vec<Array1<f64>> = Vec::with_capacity(n_super);
    for m in 0..n_super {
        let pick = m * n_sub + rng.random_range(0..n_sub);
        let base = &sub_centers[pick];
        let t = sample_unit_tangent(&mut rng, base.view());
        near_centers.push(rotate_towards(base.view(), t.view(), spec.sibling_offset));
    }

    let subclass_names: Vec<String> = (0..n_super)
        .flat_map(|m| (0..n_sub).map(move |j| format!("super{m}_sub{j}")))
        .collect();
    let superclass_of: Vec<usize> = (0..n_super).flat_map(|m| vec![m; n_sub]).collect();
    let superclass_names: Vec<String> = (0..n_super).map(|m| format!("super{m}")).collect();
    let hierarchy = LabelHierarchy::new(subclass_names, superclass_of, superclass_names)?;

    let n_train = spec.samples_per_subclass;
    let n_test = (spec.samples_per_subclass / 2).max(1);
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (c, center) in sub_centers.iter().enumerate() {
        for _ in 0..n_train {
            train_rows.push(cap_sample(&mut rng, center, spec.intra_spread));
            train_labels.push(c);
        }
        for _ in 0..n_test {
            test_rows.push(cap_sample(&mut rng, center, spec.intra_spread));
            test_labels.push(c);
        }
    }

    let mut near_rows = Vec::new();
    for center in &near_centers {
        for _ in 0..spec.samples_per_subclass {
            near_rows.push(cap_sample(&mut rng, center, spec.intra_spread));
        }
    }

    // Far-OOD: independent directions rejected until clear of every
    // superclass center.
    let n_far = n_super * spec.samples_per_subclass;
    let mut far_rows = Vec::with_capacity(n_far);
    for _ in 0..n_far {
        let mut placed = false;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let v = sample_unit_sphere(&mut rng, dim);
            if super_centers
                .iter()
                .all(|s| angle_between(v.view(), s.view()) >= spec.superclass_offset)
            {
                far_rows.push(v);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::DegenerateGeneration {
                detail: format!(
                    "cannot draw Far-OOD directions {} rad away from all superclass centers",
                    spec.superclass_offset
                ),
            });
        }
    }

    Ok(SyntheticData {
        train: to_set(train_rows, dim, Some(train_labels), RiskTier::Id)?,
        id_test: to_set(test_rows, dim, Some(test_labels), RiskTier::Id)?,
        near_ood: to_set(near_rows, dim, None, RiskTier::NearOod)?,
        far_ood: to_set(far_rows, dim, None, RiskTier::FarOod)?,
        hierarchy,
    })
}
