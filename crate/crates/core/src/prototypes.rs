//! K unit-norm prototypes per subclass with EMA maintenance.
//!
//! Prototypes are state, not trainable parameters: each batch update blends
//! the previous prototype with the assignment-weighted sum of that class's
//! embeddings and renormalizes,
//! `p ← Normalize(α·p + (1−α)·Σ_i 1[y_i=c]·w_{i,k}·z_i)`.
//! Classes absent from a batch keep their prototypes bit-for-bit; a
//! near-zero pre-normalization vector is a degenerate update and keeps the
//! previous prototype as well.
//!
//! Serialized banks (`.pbank`) reuse the binary container idiom of `.semb`
//! with an f64 payload plus (C, K, alpha, hierarchy checksum) in the header.

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::numeric::{norm, sample_unit_sphere};
use crate::sinkhorn::{assign, AssignmentMatrix};
use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const PBANK_MAGIC: &[u8; 4] = b"SPBK";
const PBANK_VERSION: u16 = 1;
const DTYPE_F64: u8 = 2;

/// Pre-normalization vectors shorter than this keep the previous prototype.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    prototypes: Array3<f64>, // C×K×D
    alpha: f64,
    hierarchy: LabelHierarchy,
}

impl PrototypeBank {
    pub fn prototypes(&self) -> &Array3<f64> {
        &self.prototypes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn hierarchy(&self) -> &LabelHierarchy {
        &self.hierarchy
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.shape()[0]
    }

    pub fn prototypes_per_class(&self) -> usize {
        self.prototypes.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.prototypes.shape()[2]
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument {
                name: "alpha",
                detail: format!("EMA decay must be in [0, 1], got {alpha}"),
            });
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn prototype(&self, class: usize, slot: usize) -> ndarray::ArrayView1<'_, f64> {
        self.prototypes.slice(ndarray::s![class, slot, ..])
    }

    /// All prototypes as a (C·K)×D matrix, row index = class·K + slot.
    pub fn flattened(&self) -> Array2<f64> {
        let (c, k, d) = self.prototypes.dim();
        self.prototypes
            .to_shape((c * k, d))
            .expect("contiguous")
            .to_owned()
    }

    /// Same hierarchy and decay, different prototype values.
    pub(crate) fn with_prototypes(&self, prototypes: Array3<f64>) -> Self {
        Self {
            prototypes,
            alpha: self.alpha,
            hierarchy: self.hierarchy.clone(),
        }
    }

    #[doc(hidden)]
    pub fn from_parts(
        prototypes: Array3<f64>,
        alpha: f64,
        hierarchy: LabelHierarchy,
    ) -> Result<Self> {
        if prototypes.shape()[0] != hierarchy.num_subclasses() {
            return Err(Error::DimensionMismatch {
                context: "prototype bank classes",
                expected: hierarchy.num_subclasses(),
                got: prototypes.shape()[0],
            });
        }
        Self { prototypes, alpha, hierarchy }.with_alpha(alpha)
    }
}

/// Prototypes drawn uniformly on the unit sphere, deterministic per seed.
pub fn init_prototypes(
    hierarchy: &LabelHierarchy,
    num_prototypes: usize,
    dim: usize,
    seed: u64,
) -> Result<PrototypeBank> {
    if num_prototypes < 1 {
        return Err(Error::InvalidArgument {
            name: "num_prototypes",
            detail: "need at least one prototype per subclass".into(),
        });
    }
    if dim < 2 {
        return Err(Error::InvalidArgument {
            name: "dim",
            detail: format!("prototype dimension must be >= 2, got {dim}"),
        });
    }
    let c = hierarchy.num_subclasses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes = Array3::zeros((c, num_prototypes, dim));
    for ci in 0..c {
        for k in 0..num_prototypes {
            let p = sample_unit_sphere(&mut rng, dim);
            prototypes.slice_mut(ndarray::s![ci, k, ..]).assign(&p);
        }
    }
    Ok(PrototypeBank {
        prototypes,
        alpha: 0.999,
        hierarchy: hierarchy.clone(),
    })
}

/// Sinkhorn assignments for one batch, grouped by ground-truth subclass.
#[derive(Debug, Clone)]
pub struct ClassBlock {
    /// Batch row indices of this class, in batch order.
    pub rows: Vec<usize>,
    pub assignment: AssignmentMatrix,
}

#[derive(Debug, Clone)]
pub struct BatchAssignments {
    blocks: Vec<Option<ClassBlock>>,
}

impl BatchAssignments {
    /// Runs per-class Sinkhorn between each class's embeddings and its own
    /// prototypes (cosine similarities; inputs are unit-norm).
    pub fn compute(
        z: ArrayView2<f64>,
        labels: &[usize],
        bank: &PrototypeBank,
        epsilon: f64,
        max_iters: usize,
        tol: f64,
    ) -> Result<Self> {
        if labels.len() != z.nrows() {
            return Err(Error::DimensionMismatch {
                context: "batch labels",
                expected: z.nrows(),
                got: labels.len(),
            });
        }
        if z.ncols() != bank.dim() {
            return Err(Error::DimensionMismatch {
                context: "batch embeddings",
                expected: bank.dim(),
                got: z.ncols(),
            });
        }
        let c = bank.num_classes();
        let k = bank.prototypes_per_class();
        for &l in labels {
            if l >= c {
                return Err(Error::UnknownSubclass { id: l, count: c });
            }
        }
        let mut blocks = vec![None; c];
        for class in 0..c {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if rows.is_empty() {
                continue;
            }
            let mut sims = Array2::zeros((rows.len(), k));
            for (r, &i) in rows.iter().enumerate() {
                for slot in 0..k {
                    sims[[r, slot]] = z.row(i).dot(&bank.prototype(class, slot));
                }
            }
            let assignment = assign(sims.view(), epsilon, max_iters, tol)?;
            blocks[class] = Some(ClassBlock { rows, assignment });
        }
        Ok(Self { blocks })
    }

    pub fn block(&self, class: usize) -> Option<&ClassBlock> {
        self.blocks.get(class).and_then(|b| b.as_ref())
    }

    pub fn num_classes(&self) -> usize {
        self.blocks.len()
    }

    /// Sinkhorn weight of batch row `i` on prototype `slot` of its own
    /// class, or None when the row is not covered by any block.
    pub fn own_weight(&self, class: usize, row: usize, slot: usize) -> Option<f64> {
        let block = self.block(class)?;
        let r = block.rows.iter().position(|&i| i == row)?;
        Some(block.assignment.weights[[r, slot]])
    }
}

/// EMA blend output: normalized candidates plus the pre-normalization norm
/// per slot. A zero norm marks a slot that kept its previous prototype
/// (class absent, degenerate vector, or full decay); such slots are
/// constants under differentiation.
pub(crate) struct EmaBlend {
    pub candidates: Array3<f64>,
    pub prenorm: Array2<f64>, // C×K
}

/// EMA blend and renormalization for every prototype; shared by the public
/// update and the coupled-loss path so both see identical arithmetic.
pub(crate) fn ema_blend(
    bank: &PrototypeBank,
    z: ArrayView2<f64>,
    assignments: &BatchAssignments,
) -> EmaBlend {
    let (c, k, d) = bank.prototypes.dim();
    let alpha = bank.alpha;
    let mut out = bank.prototypes.clone();
    let mut prenorm = Array2::<f64>::zeros((c, k));
    if alpha == 1.0 {
        return EmaBlend {
            candidates: out,
            prenorm,
        }; // full decay: bank unchanged
    }
    for class in 0..c {
        let Some(block) = assignments.block(class) else {
            continue; // class absent from batch: prototype unchanged
        };
        for slot in 0..k {
            let mut m = Array1::<f64>::zeros(d);
            for (r, &i) in block.rows.iter().enumerate() {
                let w = block.assignment.weights[[r, slot]];
                m.scaled_add(w, &z.row(i));
            }
            let p = bank.prototype(class, slot);
            let v = &p.to_owned() * alpha + &(&m * (1.0 - alpha));
            let n = norm(v.view());
            if n < DEGENERATE_NORM {
                continue; // degenerate update: keep previous prototype
            }
            prenorm[[class, slot]] = n;
            out.slice_mut(ndarray::s![class, slot, ..]).assign(&(&v / n));
        }
    }
    EmaBlend {
        candidates: out,
        prenorm,
    }
}

pub(crate) fn ema_candidates(
    bank: &PrototypeBank,
    z: ArrayView2<f64>,
    assignments: &BatchAssignments,
) -> Array3<f64> {
    ema_blend(bank, z, assignments).candidates
}

/// One EMA step over a labelled batch. Assignments must be the per-class
/// Sinkhorn output for exactly this batch.
pub fn ema_update(
    bank: &PrototypeBank,
    z: ArrayView2<f64>,
    labels: &[usize],
    assignments: &BatchAssignments,
) -> Result<PrototypeBank> {
    if labels.len() != z.nrows() {
        return Err(Error::DimensionMismatch {
            context: "batch labels",
            expected: z.nrows(),
            got: labels.len(),
        });
    }
    if z.ncols() != bank.dim() {
        return Err(Error::DimensionMismatch {
            context: "batch embeddings",
            expected: bank.dim(),
            got: z.ncols(),
        });
    }
    if assignments.num_classes() != bank.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "assignment classes",
            expected: bank.num_classes(),
            got: assignments.num_classes(),
        });
    }
    for class in 0..bank.num_classes() {
        if let Some(block) = assignments.block(class) {
            if block.assignment.num_prototypes() != bank.prototypes_per_class() {
                return Err(Error::DimensionMismatch {
                    context: "assignment prototypes",
                    expected: bank.prototypes_per_class(),
                    got: block.assignment.num_prototypes(),
                });
            }
            if block.rows.iter().any(|&i| labels.get(i) != Some(&class)) {
                return Err(Error::InvalidArgument {
                    name: "assignments",
                    detail: format!("block for class {class} references rows of another class"),
                });
            }
        }
    }
    let prototypes = ema_candidates(bank, z, assignments);
    debug_assert!(prototypes
        .axis_iter(Axis(0))
        .all(|per_class| per_class
            .axis_iter(Axis(0))
            .all(|p| (norm(p) - 1.0).abs() < 1e-6)));
    Ok(PrototypeBank {
        prototypes,
        alpha: bank.alpha,
        hierarchy: bank.hierarchy.clone(),
    })
}

/// Per-class mean embedding, renormalized to the sphere. Baseline stand-in
/// for learned prototypes.
pub fn class_centroids(set: &EmbeddingSet, hierarchy: &LabelHierarchy) -> Result<Array2<f64>> {
    let labels = set.labels().ok_or(Error::InvalidArgument {
        name: "set",
        detail: "class centroids need a labelled set".into(),
    })?;
    set.validate_labels(hierarchy)?;
    let c = hierarchy.num_subclasses();
    let d = set.dim();
    let mut sums = Array2::<f64>::zeros((c, d));
    let mut counts = vec![0usize; c];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += &set.vectors().row(i);
    }
    for class in 0..c {
        if counts[class] == 0 {
            return Err(Error::EmptyClass { class });
        }
        let mut row = sums.row_mut(class);
        row.mapv_inplace(|x| x / counts[class] as f64);
        let n = norm(row.view());
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateCentroid { class });
        }
        row.mapv_inplace(|x| x / n);
    }
    Ok(sums)
}

pub fn save_prototype_bank(bank: &PrototypeBank, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let wr = |w: &mut BufWriter<std::fs::File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    let (c, k, d) = bank.prototypes.dim();
    wr(&mut w, PBANK_MAGIC)?;
    wr(&mut w, &PBANK_VERSION.to_le_bytes())?;
    wr(&mut w, &[DTYPE_F64, 0])?;
    wr(&mut w, &(c as u32).to_le_bytes())?;
    wr(&mut w, &(k as u32).to_le_bytes())?;
    wr(&mut w, &(d as u32).to_le_bytes())?;
    wr(&mut w, &bank.alpha.to_le_bytes())?;
    wr(&mut w, &bank.hierarchy.checksum().to_le_bytes())?;
    for &x in bank.prototypes.iter() {
        wr(&mut w, &x.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_prototype_bank(path: &Path, hierarchy: &LabelHierarchy) -> Result<PrototypeBank> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |detail: String| Error::Format {
        what: "prototype bank file",
        detail,
    };
    let mut read_exact = |buf: &mut [u8]| -> Result<()> {
        r.read_exact(buf).map_err(|_| bad("truncated file".into()))
    };
    let mut magic = [0u8; 4];
    read_exact(&mut magic)?;
    if &magic != PBANK_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut u16b = [0u8; 2];
    read_exact(&mut u16b)?;
    if u16::from_le_bytes(u16b) != PBANK_VERSION {
        return Err(bad("unsupported version".into()));
    }
    let mut flags = [0u8; 2];
    read_exact(&mut flags)?;
    if flags[0] != DTYPE_F64 {
        return Err(bad(format!("unsupported dtype tag {}", flags[0])));
    }
    let mut u32b = [0u8; 4];
    read_exact(&mut u32b)?;
    let c = u32::from_le_bytes(u32b) as usize;
    read_exact(&mut u32b)?;
    let k = u32::from_le_bytes(u32b) as usize;
    read_exact(&mut u32b)?;
    let d = u32::from_le_bytes(u32b) as usize;
    let mut u64b = [0u8; 8];
    read_exact(&mut u64b)?;
    let alpha = f64::from_le_bytes(u64b);
    read_exact(&mut u64b)?;
    let checksum = u64::from_le_bytes(u64b);
    if checksum != hierarchy.checksum() {
        return Err(bad(
            "hierarchy checksum mismatch: bank was built against a different hierarchy".into(),
        ));
    }
    if c != hierarchy.num_subclasses() {
        return Err(bad(format!(
            "bank has {c} classes, hierarchy has {}",
            hierarchy.num_subclasses()
        )));
    }
    let mut data = Vec::with_capacity(c * k * d);
    let mut f64b = [0u8; 8];
    for _ in 0..c * k * d {
        read_exact(&mut f64b)?;
        data.push(f64::from_le_bytes(f64b));
    }
    let prototypes =
        Array3::from_shape_vec((c, k, d), data).map_err(|e| bad(format!("payload: {e}")))?;
    PrototypeBank::from_parts(prototypes, alpha, hierarchy.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use tempfile::tempdir;

    fn hier4() -> LabelHierarchy {
        LabelHierarchy::from_tsv("a\tx\nb\tx\nc\ty\nd\ty\n").unwrap()
    }

    fn random_unit_batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = Array2::zeros((n, d));
        for i in 0..n {
            let v = sample_unit_sphere(&mut rng, d);
            z.row_mut(i).assign(&v);
        }
        z
    }

    #[test]
    fn init_is_deterministic_and_unit_norm() {
        let h = hier4();
        let a = init_prototypes(&h, 2, 8, 1).unwrap();
        let b = init_prototypes(&h, 2, 8, 1).unwrap();
        assert_eq!(a, b);
        for class in 0..4 {
            for slot in 0..2 {
                assert!((norm(a.prototype(class, slot)) - 1.0).abs() < 1e-6);
            }
        }
        let c = init_prototypes(&h, 2, 8, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn alpha_one_is_a_noop() {
        let h = hier4();
        let bank = init_prototypes(&h, 2, 8, 3).unwrap().with_alpha(1.0).unwrap();
        let z = random_unit_batch(6, 8, 9);
        let labels = vec![0, 0, 1, 2, 3, 3];
        let asg = BatchAssignments::compute(z.view(), &labels, &bank, 0.05, 100, 1e-6).unwrap();
        let updated = ema_update(&bank, z.view(), &labels, &asg).unwrap();
        assert_eq!(updated.prototypes(), bank.prototypes());
    }

    #[test]
    fn alpha_zero_single_sample_replaces_prototype() {
        let h = hier4();
        let bank = init_prototypes(&h, 1, 4, 3).unwrap().with_alpha(0.0).unwrap();
        let z = array![[0.5, 0.5, 0.5, 0.5]];
        let labels = vec![2usize];
        let asg = BatchAssignments::compute(z.view(), &labels, &bank, 0.05, 100, 1e-6).unwrap();
        // K = 1 gives weight exactly 1
        assert_eq!(asg.own_weight(2, 0, 0), Some(1.0));
        let updated = ema_update(&bank, z.view(), &labels, &asg).unwrap();
        let n = norm(z.row(0));
        let expected = &z.row(0).to_owned() / n;
        assert_eq!(updated.prototype(2, 0).to_owned(), expected);
        // other classes untouched
        assert_eq!(updated.prototype(0, 0), bank.prototype(0, 0));
    }

    #[test]
    fn matches_naive_double_loop_oracle() {
        let h = hier4();
        let bank = init_prototypes(&h, 3, 8, 5).unwrap().with_alpha(0.99).unwrap();
        let z = random_unit_batch(12, 8, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let labels: Vec<usize> = (0..12).map(|_| rng.random_range(0..4)).collect();
        let asg = BatchAssignments::compute(z.view(), &labels, &bank, 0.05, 500, 1e-9).unwrap();
        let updated = ema_update(&bank, z.view(), &labels, &asg).unwrap();

        // independent straight-line recomputation
        let alpha = 0.99;
        for class in 0..4 {
            for slot in 0..3 {
                let mut v: Vec<f64> = bank
                    .prototype(class, slot)
                    .iter()
                    .map(|&x| alpha * x)
                    .collect();
                for i in 0..12 {
                    if labels[i] == class {
                        let w = asg.own_weight(class, i, slot).unwrap();
                        for d in 0..8 {
                            v[d] += (1.0 - alpha) * w * z[[i, d]];
                        }
                    }
                }
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for d in 0..8 {
                    let expected = v[d] / n;
                    assert!((updated.prototype(class, slot)[d] - expected).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn fixed_point_when_mass_sits_on_prototype() {
        let h = hier4();
        let bank = init_prototypes(&h, 2, 8, 3).unwrap().with_alpha(0.9).unwrap();
        // all samples of class 1 exactly at prototype (1, 0) and (1, 1)?
        // use a single-slot view: both prototypes of class 1 set equal first
        let mut protos = bank.prototypes().clone();
        let p = protos.slice(ndarray::s![1, 0, ..]).to_owned();
        protos.slice_mut(ndarray::s![1, 1, ..]).assign(&p);
        let bank = PrototypeBank::from_parts(protos, 0.9, h).unwrap();
        let mut z = Array2::zeros((4, 8));
        for i in 0..4 {
            z.row_mut(i).assign(&p);
        }
        let labels = vec![1usize; 4];
        let asg = BatchAssignments::compute(z.view(), &labels, &bank, 0.05, 200, 1e-9).unwrap();
        let updated = ema_update(&bank, z.view(), &labels, &asg).unwrap();
        for d in 0..8 {
            assert!((updated.prototype(1, 0)[d] - p[d]).abs() < 1e-7);
            assert!((updated.prototype(1, 1)[d] - p[d]).abs() < 1e-7);
        }
    }

    #[test]
    fn update_is_sample_order_independent() {
        let h = hier4();
        let bank = init_prototypes(&h, 2, 8, 5).unwrap().with_alpha(0.5).unwrap();
        let z = random_unit_batch(8, 8, 31);
        let labels = vec![0, 1, 2, 3, 0, 1, 2, 3];
        let asg = BatchAssignments::compute(z.view(), &labels, &bank, 0.1, 500, 1e-10).unwrap();
        let a = ema_update(&bank, z.view(), &labels, &asg).unwrap();

        let perm = [7usize, 3, 5, 1, 6, 2, 4, 0];
        let mut zp = Array2::zeros((8, 8));
        let mut lp = vec![0usize; 8];
        for (new_i, &old_i) in perm.iter().enumerate() {
            zp.row_mut(new_i).assign(&z.row(old_i));
            lp[new_i] = labels[old_i];
        }
        let asg_p = BatchAssignments::compute(zp.view(), &lp, &bank, 0.1, 500, 1e-10).unwrap();
        let b = ema_update(&bank, zp.view(), &lp, &asg_p).unwrap();
        for (x, y) in a.prototypes().iter().zip(b.prototypes().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_update_keeps_previous_prototype() {
        let h = hier4();
        let bank = init_prototypes(&h, 1, 4, 3).unwrap().with_alpha(0.0).unwrap();
        // two antipodal samples with equal weight: weighted sum is zero
        let z = array![[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]];
        let labels = vec![0usize, 0];
        let sims = Array2::zeros((2, 1));
        let assignment = assign(sims.view(), 0.05, 10, 1e-6).unwrap();
        let asg = BatchAssignments {
            blocks: vec![
                Some(ClassBlock {
                    rows: vec![0, 1],
                    assignment,
                }),
                None,
                None,
                None,
            ],
        };
        let updated = ema_update(&bank, z.view(), &labels, &asg).unwrap();
        assert_eq!(updated.prototype(0, 0), bank.prototype(0, 0));
    }

    #[test]
    fn centroids_match_brute_force() {
        use crate::embedding::{EmbeddingSet, RiskTier};
        let h = hier4();
        let z = random_unit_batch(100, 16, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let labels: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let set = EmbeddingSet::new(z.clone(), Some(labels.clone()), RiskTier::Id, true).unwrap();
        let centroids = class_centroids(&set, &h).unwrap();
        for class in 0..4 {
            let rows: Vec<usize> = (0..100).filter(|&i| labels[i] == class).collect();
            let mut mean = vec![0.0; 16];
            for &i in &rows {
                for d in 0..16 {
                    mean[d] += set.vectors()[[i, d]];
                }
            }
            for m in mean.iter_mut() {
                *m /= rows.len() as f64;
            }
            let n = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            for d in 0..16 {
                assert!((centroids[[class, d]] - mean[d] / n).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn centroid_error_paths() {
        use crate::embedding::{EmbeddingSet, RiskTier};
        let h = hier4();
        // class 3 absent
        let set = EmbeddingSet::new(
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            Some(vec![0, 1, 2]),
            RiskTier::Id,
            true,
        )
        .unwrap();
        assert!(matches!(
            class_centroids(&set, &h),
            Err(Error::EmptyClass { class: 3 })
        ));
        // antipodal pair collapses to zero mean
        let set = EmbeddingSet::new(
            array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]],
            Some(vec![0, 0, 1, 2, 3]),
            RiskTier::Id,
            true,
        )
        .unwrap();
        assert!(matches!(
            class_centroids(&set, &h),
            Err(Error::DegenerateCentroid { class: 0 })
        ));
        // single sample per class: centroid equals the sample
        let set = EmbeddingSet::new(
            array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            Some(vec![0, 1, 2, 3]),
            RiskTier::Id,
            true,
        )
        .unwrap();
        let c = class_centroids(&set, &h).unwrap();
        assert_eq!(c.row(0), set.vectors().row(0));
        assert_eq!(c.row(3), set.vectors().row(3));
    }

    #[test]
    fn pbank_round_trip_and_checksum_guard() {
        let h = hier4();
        let dir = tempdir().unwrap();
        let path = dir.path().join("b.pbank");
        let bank = init_prototypes(&h, 3, 8, 11).unwrap().with_alpha(0.97).unwrap();
        save_prototype_bank(&bank, &path).unwrap();
        let loaded = load_prototype_bank(&path, &h).unwrap();
        assert_eq!(loaded, bank);

        let other = LabelHierarchy::from_tsv("a\tx\nb\tx\nc\ty\ne\ty\n").unwrap();
        assert!(matches!(
            load_prototype_bank(&path, &other),
            Err(Error::Format { .. })
        ));
    }
}
