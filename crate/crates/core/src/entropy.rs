//! Social entropy of a swarm.
//!
//! For a cluster radius `h`, agent `i` sees the fraction
//! `p_i(h) = |{j : D_ij <= h}| / N` of the swarm inside its radius, and the
//! cluster entropy is `H(h) = -Σ_i p_i log2 p_i`. The total entropy is
//! `S = ∫_0^∞ H(h) dh`.
//!
//! `H` is a step function of `h` that only changes at pairwise distances
//! and vanishes once `h` reaches the largest one, so the integral is
//! evaluated exactly as a finite sum over the sorted distinct distances.
//! Distances are measured in the horizontal plane.

use serde::Serialize;

use crate::exec::Exec;
use crate::state::Vec3;

/// Symmetric matrix of pairwise planar distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sorted distinct non-zero distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> =
            (0..self.n).flat_map(|i| (i + 1..self.n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).filter(|&x| x > 0.0).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }
}

/// Breakpoint of the piecewise-constant entropy curve: `h_bits` holds on
/// `[h, next h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyBreakpoint {
    pub h: f64,
    pub h_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyResult {
    /// Total entropy, bit·m.
    pub s: f64,
    /// Breakpoints with strictly increasing `h`; the last one has zero
    /// entropy.
    pub curve: Vec<EntropyBreakpoint>,
}

pub fn pairwise_distances(positions: &[Vec3]) -> DistanceMatrix {
    pairwise_distances_with(positions, Exec::default())
}

pub fn pairwise_distances_with(positions: &[Vec3], exec: Exec) -> DistanceMatrix {
    let n = positions.len();
    let rows = exec.map(n, |i| positions.iter().map(|q| (positions[i] - *q).planar_norm()).collect::<Vec<f64>>());
    DistanceMatrix { n, data: rows.concat() }
}

/// `H(h)` in bits.
///
/// Terms are grouped by member count before summing, so the result does not
/// depend on agent order.
pub fn cluster_entropy_at(h: f64, matrix: &DistanceMatrix) -> f64 {
    let n = matrix.len();
    let mut agents_with = vec![0usize; n + 1];
    for i in 0..n {
        agents_with[matrix.row(i).iter().filter(|&&d| d <= h).count()] += 1;
    }
    let total = n as f64;
    let sum: f64 = agents_with
        .iter()
        .enumerate()
        .take(n)
        .filter(|&(members, &agents)| members > 0 && agents > 0)
        .map(|(members, &agents)| {
            let p = members as f64 / total;
            -(agents as f64) * p * p.log2()
        })
        .sum();
    sum + 0.0
}

pub fn total_entropy(positions: &[Vec3]) -> EntropyResult {
    total_entropy_with(positions, Exec::default())
}

/// Exact integral of the cluster entropy over `h`.
pub fn total_entropy_with(positions: &[Vec3], exec: Exec) -> EntropyResult {
    let matrix = pairwise_distances_with(positions, exec);
    let distances = matrix.distinct_distances();
    let mut starts = Vec::with_capacity(distances.len() + 1);
    starts.push(0.0);
    starts.extend_from_slice(&distances);

    // H is constant on [start_k, start_{k+1}); its value there is H(start_k)
    // because membership uses D <= h.
    let values = exec.map(starts.len(), |k| cluster_entropy_at(starts[k], &matrix));
    let curve: Vec<EntropyBreakpoint> = starts.iter().zip(&values).map(|(&h, &h_bits)| EntropyBreakpoint { h, h_bits }).collect();
    let s = curve.windows(2).map(|w| w[0].h_bits * (w[1].h - w[0].h)).sum();
    EntropyResult { s, curve }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> Vec<Vec3> {
        xs.iter().map(|&x| Vec3::planar(x, 0.0)).collect()
    }

    /// Midpoint Riemann sum of `H` with a fixed step, independent of the
    /// breakpoint bookkeeping.
    fn riemann(positions: &[Vec3], step: f64) -> f64 {
        let n = positions.len();
        let mut d = vec![0.0; n * n];
        let mut max_d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dn = positions[i].n - positions[j].n;
                let de = positions[i].e - positions[j].e;
                d[i * n + j] = (dn * dn + de * de).sqrt();
                max_d = max_d.max(d[i * n + j]);
            }
        }
        let entropy = |h: f64| -> f64 {
            let mut total = 0.0;
            for i in 0..n {
                let c = (0..n).filter(|&j| d[i * n + j] <= h).count();
                let p = c as f64 / n as f64;
                total -= p * p.log2();
            }
            total
        };
        let steps = (max_d / step).ceil() as usize;
        (0..steps).map(|k| entropy((k as f64 + 0.5) * step) * step).sum()
    }

    #[test]
    fn distances_examples() {
        let single = pairwise_distances(&[Vec3::planar(3.0, 4.0)]);
        assert_eq!((single.len(), single.get(0, 0)), (1, 0.0));
        let pair = pairwise_distances(&line(&[0.0, 4.0]));
        assert_eq!(pair.get(0, 1), 4.0);
        assert_eq!(pair.get(1, 0), 4.0);
    }

    #[test]
    fn distances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pts: Vec<Vec3> = (0..20).map(|_| Vec3::planar(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0))).collect();
        let m = pairwise_distances(&pts);
        for i in 0..20 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..20 {
                let expected = ((pts[i].n - pts[j].n).powi(2) + (pts[i].e - pts[j].e).powi(2)).sqrt();
                assert!((m.get(i, j) - expected).abs() < 1e-12);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn cluster_entropy_examples() {
        let coincident = pairwise_distances(&line(&[2.0, 2.0, 2.0, 2.0]));
        assert_eq!(cluster_entropy_at(0.0, &coincident), 0.0);
        assert_eq!(cluster_entropy_at(5.0, &coincident), 0.0);

        let spread = pairwise_distances(&line(&[0.0, 10.0, 20.0, 30.0, 40.0]));
        assert!((cluster_entropy_at(5.0, &spread) - 5f64.log2()).abs() < 1e-12);

        let three = pairwise_distances(&line(&[0.0, 1.0, 2.0]));
        // p = (2/3, 1, 2/3)
        let manual = -2.0 * (2.0 / 3.0) * (2.0f64 / 3.0).log2();
        assert!((cluster_entropy_at(1.0, &three) - manual).abs() < 1e-12);
        assert!((manual - 0.779_950_0).abs() < 1e-6);
    }

    #[test]
    fn total_entropy_examples() {
        assert_eq!(total_entropy(&line(&[1.0, 1.0, 1.0])).s, 0.0);
        assert!((total_entropy(&line(&[0.0, 4.0])).s - 4.0).abs() < 1e-12);
        let expected = 3f64.log2() + (4.0 / 3.0) * 1.5f64.log2();
        let s = total_entropy(&line(&[0.0, 1.0, 2.0])).s;
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 2.365).abs() < 1e-3);
        assert_eq!(total_entropy(&[Vec3::ZERO]).s, 0.0);
    }

    #[test]
    fn hand_examples_match_quadrature() {
        assert!((riemann(&line(&[0.0, 4.0]), 1e-3) - 4.0).abs() < 1e-2);
        assert!((riemann(&line(&[0.0, 1.0, 2.0]), 1e-3) - 2.365).abs() < 1e-2);
    }

    #[test]
    fn curve_is_monotone_and_ends_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.random_range(1..12);
            let pts: Vec<Vec3> = (0..n).map(|_| Vec3::planar(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0))).collect();
            let r = total_entropy(&pts);
            assert!(r.curve.windows(2).all(|w| w[0].h < w[1].h));
            assert_eq!(r.curve.last().unwrap().h_bits, 0.0);
            assert_eq!(r.curve[0].h, 0.0);
            assert!(r.s >= 0.0);
        }
    }

    #[test]
    fn invariant_under_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pts: Vec<Vec3> = (0..9).map(|_| Vec3::planar(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0))).collect();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let moved: Vec<Vec3> = pts.iter().map(|p| Vec3::planar(c * p.n - s * p.e + 17.0, s * p.n + c * p.e - 4.0)).collect();
        let a = total_entropy(&pts).s;
        let b = total_entropy(&moved).s;
        assert!((a - b).abs() / a < 1e-9);
    }

    #[test]
    fn execution_policies_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let pts: Vec<Vec3> = (0..40).map(|_| Vec3::planar(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0))).collect();
        assert_eq!(total_entropy_with(&pts, Exec::Sequential), total_entropy_with(&pts, Exec::Parallel));
    }
}
