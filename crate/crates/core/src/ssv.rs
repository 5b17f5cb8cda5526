//! The semantic surprise probe: every embedding maps to a 3-vector
//! (conformity, novelty, ambiguity) against a fitted ID reference.
//!
//! * `s_conf`: Mahalanobis distance to the global ID Gaussian (mean plus
//!   ridge-regularized covariance, Cholesky-factorized once).
//! * `s_novel`: Euclidean distance to the nearest concept representative
//!   (learned prototypes, or class centroids for baselines).
//! * `s_ambig`: ratio of the nearest-representative distance to the nearest
//!   distance among representatives of a different subclass; 1 is maximal
//!   ambiguity, 0 means the sample sits exactly on a representative.
//!
//! All probe distances are Euclidean, on purpose, including on unit-norm
//! embeddings. Ties for the nearest representative break to the lowest
//! index. Probe dumps are CSV rows `s_conf,s_novel,s_ambig,risk_tier`.

use crate::embedding::{EmbeddingSet, RiskTier};
use crate::error::{Error, Result};
use crate::numeric::euclidean;
use crate::prototypes::PrototypeBank;
use ndarray::{Array1, Array2, ArrayView1};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct GlobalStats {
    mu: Array1<f64>,
    /// Lower-triangular Cholesky factor of Σ + ridge·I.
    chol: Array2<f64>,
    sigma: Array2<f64>,
    ridge: f64,
}

impl GlobalStats {
    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mu.view()
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.sigma
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Scale-aware default: 1e-3 · trace(Σ)/D.
pub fn default_ridge(sigma: &Array2<f64>) -> f64 {
    let d = sigma.nrows();
    1e-3 * sigma.diag().sum() / d as f64
}

/// Sample mean and ridge-regularized sample covariance (N−1 denominator) of
/// the ID training features, factorized for repeated Mahalanobis solves.
/// `ridge = None` picks the scale-aware default.
pub fn fit_global_stats(id_train: &EmbeddingSet, ridge: Option<f64>) -> Result<GlobalStats> {
    fit_global_stats_raw(id_train.vectors().view(), ridge)
}

/// Raw-matrix variant of [`fit_global_stats`] (no f32 quantization).
pub fn fit_global_stats_raw(
    v: ndarray::ArrayView2<f64>,
    ridge: Option<f64>,
) -> Result<GlobalStats> {
    let n = v.nrows();
    let d = v.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument {
            name: "id_train",
            detail: format!("need at least 2 samples to fit covariance, got {n}"),
        });
    }
    let mu = v.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let mut sigma = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let r = &v.row(i) - &mu;
        for a in 0..d {
            for b in a..d {
                sigma[[a, b]] += r[a] * r[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            sigma[[a, b]] /= (n - 1) as f64;
            sigma[[b, a]] = sigma[[a, b]];
        }
    }
    let ridge = ridge.unwrap_or_else(|| default_ridge(&sigma));
    if ridge < 0.0 {
        return Err(Error::InvalidArgument {
            name: "ridge",
            detail: format!("must be nonnegative, got {ridge}"),
        });
    }
    let mut reg = sigma.clone();
    for a in 0..d {
        reg[[a, a]] += ridge;
    }
    let chol = cholesky(&reg).ok_or(Error::SingularCovariance)?;
    Ok(GlobalStats {
        mu,
        chol,
        sigma,
        ridge,
    })
}

/// Lower-triangular Cholesky factor; None when the matrix is not positive
/// definite.
fn cholesky(m: &Array2<f64>) -> Option<Array2<f64>> {
    let d = m.nrows();
    let mut l = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[[i, j]];
            for t in 0..j {
                s -= l[[i, t]] * l[[j, t]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Mahalanobis distance √((z−μ)ᵀ(Σ+ridge·I)⁻¹(z−μ)) via the cached factor:
/// with Σ_reg = LLᵀ, solve Ly = r and take ‖y‖.
pub fn s_conf(z: ArrayView1<f64>, stats: &GlobalStats) -> Result<f64> {
    if z.len() != stats.dim() {
        return Err(Error::DimensionMismatch {
            context: "s_conf input",
            expected: stats.dim(),
            got: z.len(),
        });
    }
    let r = &z.to_owned() - &stats.mu;
    let d = stats.dim();
    let mut y = vec![0.0f64; d];
    for i in 0..d {
        let mut s = r[i];
        for t in 0..i {
            s -= stats.chol[[i, t]] * y[t];
        }
        y[i] = s / stats.chol[[i, i]];
    }
    Ok(y.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Concept representatives with their subclass ids. Must span at least two
/// distinct subclasses so the ambiguity denominator is well-defined.
#[derive(Debug, Clone)]
pub struct RepresentativeSet {
    representatives: Array2<f64>,
    subclass_of: Vec<usize>,
}

impl RepresentativeSet {
    pub fn new(representatives: Array2<f64>, subclass_of: Vec<usize>) -> Result<Self> {
        if representatives.nrows() != subclass_of.len() {
            return Err(Error::DimensionMismatch {
                context: "representative labels",
                expected: representatives.nrows(),
                got: subclass_of.len(),
            });
        }
        let mut classes: Vec<usize> = subclass_of.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::TooFewClasses {
                found: classes.len(),
            });
        }
        Ok(Self {
            representatives,
            subclass_of,
        })
    }

    /// The learned prototypes, flattened to rows.
    pub fn from_bank(bank: &PrototypeBank) -> Result<Self> {
        let k = bank.prototypes_per_class();
        let subclass_of = (0..bank.num_classes()).flat_map(|c| vec![c; k]).collect();
        Self::new(bank.flattened(), subclass_of)
    }

    /// Class centroids as single representatives per subclass.
    pub fn from_centroids(centroids: Array2<f64>) -> Result<Self> {
        let subclass_of = (0..centroids.nrows()).collect();
        Self::new(centroids, subclass_of)
    }

    pub fn len(&self) -> usize {
        self.representatives.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.representatives.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.representatives
    }

    pub fn subclass_of(&self, row: usize) -> usize {
        self.subclass_of[row]
    }

    /// Nearest representative (lowest index on ties) and its distance.
    fn nearest(&self, z: ArrayView1<f64>) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for r in 0..self.len() {
            let d = euclidean(z, self.representatives.row(r));
            if d < best.1 {
                best = (r, d);
            }
        }
        best
    }
}

/// Distance to the nearest concept representative.
pub fn s_novel(z: ArrayView1<f64>, reps: &RepresentativeSet) -> Result<f64> {
    check_dim(z, reps)?;
    Ok(reps.nearest(z).1)
}

/// Nearest distance over the nearest distance to a different subclass.
/// Returns 1 on the fully degenerate case (both distances zero).
pub fn s_ambig(z: ArrayView1<f64>, reps: &RepresentativeSet) -> Result<f64> {
    check_dim(z, reps)?;
    let (r1, d1) = reps.nearest(z);
    let c1 = reps.subclass_of(r1);
    let mut d2 = f64::INFINITY;
    for r in 0..reps.len() {
        if reps.subclass_of(r) != c1 {
            let d = euclidean(z, reps.representatives.row(r));
            if d < d2 {
                d2 = d;
            }
        }
    }
    if d2 == 0.0 {
        // z coincides with representatives of two classes
        return Ok(1.0);
    }
    Ok(d1 / d2)
}

fn check_dim(z: ArrayView1<f64>, reps: &RepresentativeSet) -> Result<()> {
    if z.len() != reps.dim() {
        return Err(Error::DimensionMismatch {
            context: "probe input",
            expected: reps.dim(),
            got: z.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurpriseVector {
    pub s_conf: f64,
    pub s_novel: f64,
    pub s_ambig: f64,
}

impl SurpriseVector {
    pub fn component(&self, i: usize) -> f64 {
        match i {
            0 => self.s_conf,
            1 => self.s_novel,
            2 => self.s_ambig,
            _ => panic!("surprise vector has 3 components"),
        }
    }
}

/// Per-row surprise vectors, order-preserving.
pub fn probe(
    set: &EmbeddingSet,
    stats: &GlobalStats,
    reps: &RepresentativeSet,
) -> Result<Vec<SurpriseVector>> {
    let mut out = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let z = set.vectors().row(i);
        out.push(SurpriseVector {
            s_conf: s_conf(z, stats)?,
            s_novel: s_novel(z, reps)?,
            s_ambig: s_ambig(z, reps)?,
        });
    }
    Ok(out)
}

pub fn write_ssv_csv(
    path: &Path,
    rows: &[(SurpriseVector, RiskTier)],
) -> Result<()> {
    let mut out = String::from("s_conf,s_novel,s_ambig,risk_tier\n");
    for (sv, tier) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            sv.s_conf, sv.s_novel, sv.s_ambig, tier
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_ssv_csv(path: &Path) -> Result<Vec<(SurpriseVector, RiskTier)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::Format {
        what: "ssv csv",
        detail,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some("s_conf,s_novel,s_ambig,risk_tier") => {}
        other => return Err(bad(format!("bad header {other:?}"))),
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("line {}: expected 4 fields", lineno + 2)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad number `{s}`", lineno + 2)))
        };
        let tier = RiskTier::parse(fields[3].trim())
            .ok_or_else(|| bad(format!("line {}: bad tier `{}`", lineno + 2, fields[3])))?;
        out.push((
            SurpriseVector {
                s_conf: parse(fields[0])?,
                s_novel: parse(fields[1])?,
                s_ambig: parse(fields[2])?,
            },
            tier,
        ));
    }
    Ok(out)
}
