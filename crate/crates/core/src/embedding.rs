//! Embedding sets and their file formats.
//!
//! An [`EmbeddingSet`] is an N×D matrix of feature vectors plus subclass
//! labels (ID splits only) and a risk-tier tag. Coordinates are quantized
//! through f32 at construction, so the binary `.semb` payload (f32) always
//! round-trips bit-exactly while in-memory numerics run in f64.
//!
//! `.semb` layout, little-endian: magic `SEMB`, version u16, dtype u8 (1 =
//! f32), risk_tier u8, normalized u8, has_labels u8, N u64, D u32, then N
//! u32 labels when present, then the row-major f32 payload.
//!
//! CSV import: header `dim=D`, rows `label,v0,...,vD-1` with `-` for
//! unlabeled rows.

use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::numeric::{norm, quantize_f32};
use ndarray::Array2;
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const SEMB_MAGIC: &[u8; 4] = b"SEMB";
const SEMB_VERSION: u16 = 1;
const DTYPE_F32: u8 = 1;

/// Exact-norm acceptance band; rows declared normalized inside
/// (NORM_TOL, NORM_REJECT) are renormalized, beyond it rejected.
pub const NORM_TOL: f64 = 1e-6;
pub const NORM_REJECT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RiskTier {
    Id,
    NearOod,
    FarOod,
}

impl RiskTier {
    pub const ALL: [RiskTier; 3] = [RiskTier::Id, RiskTier::NearOod, RiskTier::FarOod];

    pub fn index(self) -> usize {
        match self {
            RiskTier::Id => 0,
            RiskTier::NearOod => 1,
            RiskTier::FarOod => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<RiskTier> {
        Self::ALL.get(i).copied()
    }

    pub fn parse(s: &str) -> Option<RiskTier> {
        match s {
            "ID" => Some(RiskTier::Id),
            "Near" => Some(RiskTier::NearOod),
            "Far" => Some(RiskTier::FarOod),
            _ => None,
        }
    }
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskTier::Id => "ID",
            RiskTier::NearOod => "Near",
            RiskTier::FarOod => "Far",
        })
    }
}

/// Immutable matrix of feature vectors with labels and a split tag.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Array2<f64>,
    labels: Option<Vec<usize>>,
    risk_tier: RiskTier,
    normalized: bool,
}

impl EmbeddingSet {
    /// Builds a set, quantizing coordinates through f32 and enforcing the
    /// norm band on rows declared normalized. Labels must be present iff
    /// the tier is ID.
    pub fn new(
        mut vectors: Array2<f64>,
        labels: Option<Vec<usize>>,
        risk_tier: RiskTier,
        normalized: bool,
    ) -> Result<Self> {
        match (&labels, risk_tier) {
            (Some(_), RiskTier::Id) | (None, RiskTier::NearOod) | (None, RiskTier::FarOod) => {}
            (Some(_), _) => {
                return Err(Error::InvalidArgument {
                    name: "labels",
                    detail: "labels are only valid on the ID tier".into(),
                })
            }
            (None, RiskTier::Id) => {
                return Err(Error::InvalidArgument {
                    name: "labels",
                    detail: "ID tier requires labels".into(),
                })
            }
        }
        if let Some(ls) = &labels {
            if ls.len() != vectors.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "labels",
                    expected: vectors.nrows(),
                    got: ls.len(),
                });
            }
        }
        vectors.mapv_inplace(quantize_f32);
        if normalized {
            for row in 0..vectors.nrows() {
                let n = norm(vectors.row(row));
                let off = (n - 1.0).abs();
                if off <= NORM_TOL {
                    continue;
                }
                if off < NORM_REJECT {
                    let mut r = vectors.row_mut(row);
                    r.mapv_inplace(|x| quantize_f32(x / n));
                } else {
                    return Err(Error::NormViolation { row, norm: n });
                }
            }
        }
        Ok(Self {
            vectors,
            labels,
            risk_tier,
            normalized,
        })
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn risk_tier(&self) -> RiskTier {
        self.risk_tier
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Checks that every label is a known subclass id.
    pub fn validate_labels(&self, hierarchy: &LabelHierarchy) -> Result<()> {
        if let Some(ls) = &self.labels {
            for &l in ls {
                if l >= hierarchy.num_subclasses() {
                    return Err(Error::UnknownSubclass {
                        id: l,
                        count: hierarchy.num_subclasses(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Row view of the subset belonging to one subclass.
    pub fn rows_of_class(&self, class: usize) -> Vec<usize> {
        match &self.labels {
            Some(ls) => (0..self.len()).filter(|&i| ls[i] == class).collect(),
            None => Vec::new(),
        }
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let wr = |w: &mut BufWriter<std::fs::File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    wr(&mut w, SEMB_MAGIC)?;
    wr(&mut w, &SEMB_VERSION.to_le_bytes())?;
    wr(&mut w, &[DTYPE_F32])?;
    wr(&mut w, &[set.risk_tier.index() as u8])?;
    wr(&mut w, &[set.normalized as u8])?;
    wr(&mut w, &[set.labels.is_some() as u8])?;
    wr(&mut w, &(set.len() as u64).to_le_bytes())?;
    wr(&mut w, &(set.dim() as u32).to_le_bytes())?;
    if let Some(ls) = &set.labels {
        for &l in ls {
            wr(&mut w, &(l as u32).to_le_bytes())?;
        }
    }
    for &x in set.vectors.iter() {
        wr(&mut w, &(x as f32).to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads and validates a `.semb` file. Labels are checked against the
/// hierarchy; rows declared normalized are renormalized when inside the
/// tolerance band and rejected beyond it.
pub fn load_embeddings(path: &Path, hierarchy: &LabelHierarchy) -> Result<EmbeddingSet> {
    let set = load_embeddings_unchecked(path)?;
    set.validate_labels(hierarchy)?;
    Ok(set)
}

/// `.semb` load without a hierarchy (for unlabeled splits).
pub fn load_embeddings_unchecked(path: &Path) -> Result<EmbeddingSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |detail: String| Error::Format {
        what: "embedding file",
        detail,
    };
    let mut read_exact = |buf: &mut [u8]| -> Result<()> {
        r.read_exact(buf)
            .map_err(|_| bad("truncated header or payload".into()))
    };

    let mut magic = [0u8; 4];
    read_exact(&mut magic)?;
    if &magic != SEMB_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut u16b = [0u8; 2];
    read_exact(&mut u16b)?;
    let version = u16::from_le_bytes(u16b);
    if version != SEMB_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut b = [0u8; 4];
    read_exact(&mut b)?;
    let [dtype, tier, normalized, has_labels] = b;
    if dtype != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype tag {dtype}")));
    }
    let tier = RiskTier::from_index(tier as usize)
        .ok_or_else(|| bad(format!("unknown risk tier tag {tier}")))?;
    if normalized > 1 || has_labels > 1 {
        return Err(bad("flag bytes must be 0 or 1".into()));
    }
    let mut u64b = [0u8; 8];
    read_exact(&mut u64b)?;
    let n = u64::from_le_bytes(u64b) as usize;
    let mut u32b = [0u8; 4];
    read_exact(&mut u32b)?;
    let d = u32::from_le_bytes(u32b) as usize;

    let labels = if has_labels == 1 {
        let mut ls = Vec::with_capacity(n);
        for _ in 0..n {
            read_exact(&mut u32b)?;
            ls.push(u32::from_le_bytes(u32b) as usize);
        }
        Some(ls)
    } else {
        None
    };
    let mut data = Vec::with_capacity(n * d);
    let mut f32b = [0u8; 4];
    for _ in 0..n * d {
        read_exact(&mut f32b)?;
        data.push(f32::from_le_bytes(f32b) as f64);
    }
    // trailing bytes mean a dimension mismatch between header and payload
    let mut probe = [0u8; 1];
    if r.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after payload".into()));
    }
    let vectors = Array2::from_shape_vec((n, d), data)
        .map_err(|e| bad(format!("payload shape: {e}")))?;
    EmbeddingSet::new(vectors, labels, tier, normalized == 1)
}

/// CSV import path. Header `dim=D`, rows `label,v0,...,vD-1`; `-` marks an
/// unlabeled row. Labeled files become the ID tier (validated against the
/// hierarchy when given); fully unlabeled files take `tier_if_unlabeled`.
/// Rows within the norm band of 1 mark the set normalized.
pub fn import_embeddings_csv(
    path: &Path,
    tier_if_unlabeled: RiskTier,
    hierarchy: Option<&LabelHierarchy>,
) -> Result<EmbeddingSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::Format {
        what: "embedding csv",
        detail,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let d: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(format!("header must be `dim=D`, got `{header}`")))?;

    let mut data = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or_default().trim();
        labels.push(if label_field == "-" {
            None
        } else {
            Some(label_field.parse().map_err(|_| {
                bad(format!("line {}: bad label `{label_field}`", lineno + 1))
            })?)
        });
        let mut count = 0;
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad value `{f}`", lineno + 1)))?;
            data.push(v);
            count += 1;
        }
        if count != d {
            return Err(Error::DimensionMismatch {
                context: "csv row",
                expected: d,
                got: count,
            });
        }
    }
    let n = labels.len();
    let vectors = Array2::from_shape_vec((n, d), data).expect("shape checked per-row");

    let all_labeled = !labels.is_empty() && labels.iter().all(|l| l.is_some());
    let any_labeled = labels.iter().any(|l| l.is_some());
    if any_labeled && !all_labeled {
        return Err(bad("mixed labeled and unlabeled rows".into()));
    }
    let normalized = n > 0
        && vectors
            .rows()
            .into_iter()
            .all(|r| (norm(r) - 1.0).abs() < NORM_REJECT);
    let (labels, tier) = if all_labeled {
        (
            Some(labels.into_iter().map(|l| l.unwrap()).collect()),
            RiskTier::Id,
        )
    } else {
        (None, tier_if_unlabeled)
    };
    let set = EmbeddingSet::new(vectors, labels, tier, normalized)?;
    if let Some(h) = hierarchy {
        set.validate_labels(h)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::LabelHierarchy;
    use ndarray::array;
    use tempfile::tempdir;

    fn hier() -> LabelHierarchy {
        LabelHierarchy::from_tsv("a\tx\nb\tx\nc\ty\nd\ty\n").unwrap()
    }

    #[test]
    fn minimal_valid_file_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.semb");
        let v = array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let set = EmbeddingSet::new(v, Some(vec![0, 1]), RiskTier::Id, true).unwrap();
        save_embeddings(&set, &path).unwrap();
        let loaded = load_embeddings(&path, &hier()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.dim(), 4);
        assert_eq!(loaded, set);
    }

    #[test]
    fn norm_in_tolerance_band_is_renormalized() {
        let v = array![[0.9995, 0.0, 0.0]];
        let set = EmbeddingSet::new(v, None, RiskTier::NearOod, true).unwrap();
        assert!((norm(set.vectors().row(0)) - 1.0).abs() <= NORM_TOL);
        assert!((set.vectors()[[0, 0]] - 1.0).abs() <= NORM_TOL);
    }

    #[test]
    fn norm_out_of_band_is_rejected() {
        let v = array![[0.5, 0.0, 0.0]];
        let err = EmbeddingSet::new(v, None, RiskTier::FarOod, true).unwrap_err();
        assert!(matches!(err, Error::NormViolation { row: 0, .. }));
    }

    #[test]
    fn labels_present_iff_id() {
        assert!(EmbeddingSet::new(array![[1.0]], None, RiskTier::Id, false).is_err());
        assert!(
            EmbeddingSet::new(array![[1.0]], Some(vec![0]), RiskTier::NearOod, false).is_err()
        );
    }

    #[test]
    fn unknown_subclass_id_is_rejected_on_load() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.semb");
        let set =
            EmbeddingSet::new(array![[1.0, 0.0]], Some(vec![9]), RiskTier::Id, true).unwrap();
        save_embeddings(&set, &path).unwrap();
        assert!(matches!(
            load_embeddings(&path, &hier()),
            Err(Error::UnknownSubclass { id: 9, .. })
        ));
    }

    #[test]
    fn empty_set_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("e.semb");
        let set = EmbeddingSet::new(
            Array2::zeros((0, 5)),
            Some(vec![]),
            RiskTier::Id,
            true,
        )
        .unwrap();
        save_embeddings(&set, &path).unwrap();
        let loaded = load_embeddings(&path, &hier()).unwrap();
        assert_eq!(loaded.len(), 0);
        assert_eq!(loaded.dim(), 5);
    }

    #[test]
    fn truncated_file_is_malformed() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.semb");
        let set = EmbeddingSet::new(array![[1.0, 0.0]], Some(vec![0]), RiskTier::Id, true).unwrap();
        save_embeddings(&set, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            load_embeddings(&path, &hier()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn csv_import_labeled_and_unlabeled() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("l.csv");
        std::fs::write(&p1, "dim=2\n0,1.0,0.0\n1,0.0,1.0\n").unwrap();
        let s1 = import_embeddings_csv(&p1, RiskTier::FarOod, Some(&hier())).unwrap();
        assert_eq!(s1.risk_tier(), RiskTier::Id);
        assert_eq!(s1.labels(), Some(&[0usize, 1][..]));
        assert!(s1.normalized());

        let p2 = dir.path().join("u.csv");
        std::fs::write(&p2, "dim=2\n-,3.0,4.0\n").unwrap();
        let s2 = import_embeddings_csv(&p2, RiskTier::FarOod, None).unwrap();
        assert_eq!(s2.risk_tier(), RiskTier::FarOod);
        assert!(!s2.normalized());
        assert_eq!(s2.vectors()[[0, 1]], 4.0);
    }

    #[test]
    fn csv_dimension_mismatch() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "dim=3\n0,1.0,0.0\n").unwrap();
        assert!(matches!(
            import_embeddings_csv(&p, RiskTier::Id, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
