//! Entropic-regularized optimal transport between a batch of samples and the
//! K prototypes of one subclass, producing balanced soft assignment weights.
//!
//! The plan approximates the entropic OT optimum between the uniform sample
//! marginal (1/B each) and the uniform prototype marginal (1/K each) with
//! cost −similarities and regularization ε. Dual updates run in the log
//! domain, so small ε does not underflow. The returned weights are the plan
//! rescaled so every row sums to 1; column sums then converge to B/K.

use crate::error::{Error, Result};
use crate::numeric::logsumexp;
use ndarray::{Array1, Array2, ArrayView2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    /// B×K nonnegative weights, each row summing to 1.
    pub weights: Array2<f64>,
    pub epsilon: f64,
    pub iterations_run: usize,
}

impl AssignmentMatrix {
    pub fn num_samples(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_prototypes(&self) -> usize {
        self.weights.ncols()
    }

    /// Shannon entropy of the full plan (weights normalized to total mass 1),
    /// in nats. Non-decreasing in ε for fixed similarities.
    pub fn plan_entropy(&self) -> f64 {
        let total: f64 = self.weights.sum();
        self.weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| {
                let p = w / total;
                -p * p.ln()
            })
            .sum()
    }
}

/// Sinkhorn-Knopp assignment of B samples to K prototypes given cosine
/// similarities. Stops when the row-marginal violation drops below `tol`
/// or after `max_iters` dual sweeps.
pub fn assign(
    similarities: ArrayView2<f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<AssignmentMatrix> {
    let (b, k) = similarities.dim();
    if b == 0 || k == 0 {
        return Err(Error::InvalidArgument {
            name: "similarities",
            detail: format!("matrix must be non-empty, got {b}x{k}"),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument {
            name: "epsilon",
            detail: format!("must be positive, got {epsilon}"),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument {
            name: "tol",
            detail: format!("must be positive, got {tol}"),
        });
    }
    if similarities.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "similarities",
            index: None,
        });
    }

    // log kernel: exp(−cost/ε) with cost = −similarities
    let log_kernel = similarities.mapv(|s| s / epsilon);
    let log_a = -(b as f64).ln();
    let log_b = -(k as f64).ln();

    let mut f = Array1::<f64>::zeros(b); // sample potentials
    let mut g = Array1::<f64>::zeros(k); // prototype potentials
    let mut iterations_run = 0;
    let mut row_buf = vec![0.0f64; k];
    let mut col_buf = vec![0.0f64; b];

    for _ in 0..max_iters {
        iterations_run += 1;
        for i in 0..b {
            for j in 0..k {
                row_buf[j] = log_kernel[[i, j]] + g[j];
            }
            f[i] = log_a - logsumexp(&row_buf);
        }
        for j in 0..k {
            for i in 0..b {
                col_buf[i] = log_kernel[[i, j]] + f[i];
            }
            g[j] = log_b - logsumexp(&col_buf);
        }
        // column marginals are exact right after the g-sweep; convergence is
        // measured as the total row-marginal drift
        let mut violation = 0.0;
        for i in 0..b {
            let mut row_mass = 0.0;
            for j in 0..k {
                row_mass += (f[i] + log_kernel[[i, j]] + g[j]).exp();
            }
            violation += (row_mass - (1.0 / b as f64)).abs();
        }
        if violation < tol {
            break;
        }
    }

    // final row sweep makes row marginals exact, then rescale rows to 1
    for i in 0..b {
        for j in 0..k {
            row_buf[j] = log_kernel[[i, j]] + g[j];
        }
        f[i] = log_a - logsumexp(&row_buf);
    }
    let mut weights = Array2::<f64>::zeros((b, k));
    for i in 0..b {
        for j in 0..k {
            weights[[i, j]] = (f[i] + log_kernel[[i, j]] + g[j]).exp();
        }
    }
    for mut row in weights.axis_iter_mut(Axis(0)) {
        let s = row.sum();
        row.mapv_inplace(|w| w / s);
    }

    Ok(AssignmentMatrix {
        weights,
        epsilon,
        iterations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain-exp Sinkhorn used as the reference solver in oracle tests.
    fn reference_sinkhorn(sims: &Array2<f64>, epsilon: f64, iters: usize) -> Array2<f64> {
        let (b, k) = sims.dim();
        let kernel = sims.mapv(|s| (s / epsilon).exp());
        let mut u = vec![1.0; b];
        let mut v = vec![1.0; k];
        let a = 1.0 / b as f64;
        let bm = 1.0 / k as f64;
        for _ in 0..iters {
            for i in 0..b {
                let s: f64 = (0..k).map(|j| kernel[[i, j]] * v[j]).sum();
                u[i] = a / s;
            }
            for j in 0..k {
                let s: f64 = (0..b).map(|i| kernel[[i, j]] * u[i]).sum();
                v[j] = bm / s;
            }
        }
        let mut plan = Array2::zeros((b, k));
        for i in 0..b {
            for j in 0..k {
                plan[[i, j]] = u[i] * kernel[[i, j]] * v[j];
            }
        }
        // rescale rows to 1 like `assign`
        for i in 0..b {
            let s: f64 = (0..k).map(|j| plan[[i, j]]).sum();
            for j in 0..k {
                plan[[i, j]] /= s;
            }
        }
        plan
    }

    #[test]
    fn equal_similarities_give_uniform_weights() {
        let sims = Array2::from_elem((5, 4), 0.3);
        let asg = assign(sims.view(), 0.05, 100, 1e-6).unwrap();
        for &w in asg.weights.iter() {
            assert_abs_diff_eq!(w, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_prototype_takes_all_mass() {
        let sims = array![[0.9], [-0.2], [0.1]];
        let asg = assign(sims.view(), 0.1, 100, 1e-6).unwrap();
        for &w in asg.weights.iter() {
            assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn low_epsilon_recovers_permutation_against_reference() {
        let sims = array![[1.0, 0.0], [0.0, 1.0]];
        let asg = assign(sims.view(), 0.05, 100, 1e-6).unwrap();
        let oracle = reference_sinkhorn(&sims, 0.05, 10_000);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(asg.weights[[i, j]], oracle[[i, j]], epsilon = 1e-9);
            }
        }
        let expected = array![[1.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(asg.weights[[i, j]], expected[[i, j]], epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn matches_reference_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let b = rng.random_range(2..10);
            let k = rng.random_range(2..6);
            let sims = Array2::from_shape_fn((b, k), |_| rng.random_range(-1.0..1.0));
            let asg = assign(sims.view(), 0.2, 10_000, 1e-12).unwrap();
            let oracle = reference_sinkhorn(&sims, 0.2, 10_000);
            for (w, o) in asg.weights.iter().zip(oracle.iter()) {
                assert_abs_diff_eq!(w, o, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn marginal_invariants_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let b = rng.random_range(1..20);
            let k = rng.random_range(1..8);
            let sims = Array2::from_shape_fn((b, k), |_| rng.random_range(-1.0..1.0));
            let asg = assign(sims.view(), 0.1, 5_000, 1e-9).unwrap();
            for row in asg.weights.rows() {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-6);
                assert!(row.iter().all(|&w| w >= 0.0));
            }
            for col in asg.weights.columns() {
                assert_abs_diff_eq!(col.sum(), b as f64 / k as f64, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn entropy_nondecreasing_in_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sims = Array2::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let mut last = f64::NEG_INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.5] {
            let asg = assign(sims.view(), eps, 20_000, 1e-12).unwrap();
            let h = asg.plan_entropy();
            assert!(
                h >= last - 1e-9,
                "entropy decreased at eps={eps}: {h} < {last}"
            );
            last = h;
        }
    }

    #[test]
    fn permutation_equivariance_over_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sims = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let perm = [2usize, 0, 1];
        let permuted = Array2::from_shape_fn((5, 3), |(i, j)| sims[[i, perm[j]]]);
        let a = assign(sims.view(), 0.1, 2_000, 1e-10).unwrap();
        let b = assign(permuted.view(), 0.1, 2_000, 1e-10).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert_abs_diff_eq!(b.weights[[i, j]], a.weights[[i, perm[j]]], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sims = array![[1.0, f64::NAN]];
        assert!(matches!(
            assign(sims.view(), 0.1, 10, 1e-6),
            Err(Error::NonFinite { .. })
        ));
        let sims = array![[1.0, 0.0]];
        assert!(assign(sims.view(), 0.0, 10, 1e-6).is_err());
        assert!(assign(sims.view(), -1.0, 10, 1e-6).is_err());
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(assign(empty.view(), 0.1, 10, 1e-6).is_err());
    }
}
