//! Small shared numeric helpers: stabilized reductions, sphere sampling,
//! f32 quantization, and a checksum for format headers.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

/// log(Σ exp(x_i)) with max-shift stabilization. Empty input → -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Round a coordinate through f32. All persisted embedding payloads are f32,
/// so sets quantized this way round-trip bit-exactly.
pub fn quantize_f32(x: f64) -> f64 {
    x as f32 as f64
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn sample_unit_sphere<R: Rng>(rng: &mut R, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(v.view());
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Unit tangent at `at` (orthogonal to it), uniformly distributed.
pub fn sample_unit_tangent<R: Rng>(rng: &mut R, at: ArrayView1<f64>) -> Array1<f64> {
    loop {
        let v = sample_unit_sphere(rng, at.len());
        let proj = v.dot(&at);
        let t = &v - &(&at.to_owned() * proj);
        let n = norm(t.view());
        if n > 1e-6 {
            return t / n;
        }
    }
}

/// Move `from` along the geodesic towards tangent `t` by `angle` radians.
/// Exactly unit-norm when `from` and `t` are orthonormal.
pub fn rotate_towards(from: ArrayView1<f64>, tangent: ArrayView1<f64>, angle: f64) -> Array1<f64> {
    let (s, c) = angle.sin_cos();
    &from.to_owned() * c + &(&tangent.to_owned() * s)
}

pub fn angle_between(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b).clamp(-1.0, 1.0).acos()
}

/// FNV-1a 64-bit, used for hierarchy checksums in binary headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logsumexp_matches_naive_in_safe_range() {
        let xs = [0.3f64, -1.2, 2.0, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn logsumexp_survives_large_magnitudes() {
        let v = logsumexp(&[1000.0, 1000.0]);
        assert_relative_eq!(v, 1000.0 + 2f64.ln(), max_relative = 1e-12);
        assert!(logsumexp(&[-1e8, -1e8]).is_finite());
    }

    #[test]
    fn sphere_samples_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = sample_unit_sphere(&mut rng, 16);
            assert!((norm(v.view()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = sample_unit_sphere(&mut rng, 8);
        let t = sample_unit_tangent(&mut rng, p.view());
        assert!(p.dot(&t).abs() < 1e-12);
        assert!((norm(t.view()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_moves_by_requested_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = sample_unit_sphere(&mut rng, 8);
        let t = sample_unit_tangent(&mut rng, p.view());
        let q = rotate_towards(p.view(), t.view(), 0.4);
        assert_relative_eq!(angle_between(p.view(), q.view()), 0.4, epsilon = 1e-12);
    }
}
