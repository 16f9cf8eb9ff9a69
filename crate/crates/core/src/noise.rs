//! Reproducible Wiener increments with Brownian-bridge refinement.
//!
//! The coarse increments come from ChaCha stream 0 of the trajectory seed.
//! Refining a step of length `h` with total increment `X` splits it into
//! `X/2 + (√h/2)ξ` and the remainder, where `ξ` is drawn from a stream owned
//! by that split. Splits are numbered in heap order (1 is the first halving,
//! 2 and 3 its children, ...), so a path at level `L` reuses every variate of
//! level `L − 1` and the sum over each coarse step is preserved exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator over `stream` of the seeded ChaCha family.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. Gaussian increments of variance `dt`.
pub fn gaussian_increments(seed: u64, dt: f64, n: usize) -> Vec<f64> {
    let sd = dt.sqrt();
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// One Brownian path sampled on `n_base` coarse steps of size `base_dt`.
#[derive(Clone, Debug)]
pub struct WienerPath {
    seed: u64,
    base_dt: f64,
    base: Vec<f64>,
}

impl WienerPath {
    pub fn new(seed: u64, base_dt: f64, n_base: usize) -> Self {
        Self { seed, base_dt, base: gaussian_increments(seed, base_dt, n_base) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn base_dt(&self) -> f64 {
        self.base_dt
    }

    pub fn n_base(&self) -> usize {
        self.base.len()
    }

    /// Step size at refinement `level`.
    pub fn dt(&self, level: u32) -> f64 {
        self.base_dt / f64::from(1u32 << level)
    }

    /// Increments at refinement `level` (`n_base · 2^level` of them).
    pub fn increments(&self, level: u32) -> Vec<f64> {
        let per = 1usize << level;
        // ξ for split `node` of coarse step `i` is the i-th draw of stream `node`.
        let nodes: Vec<Vec<f64>> = (1..per as u64)
            .map(|node| {
                let mut rng = stream_rng(self.seed, node);
                (0..self.base.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(self.base.len() * per);
        let mut buf = vec![0.0; per];
        for (i, &x) in self.base.iter().enumerate() {
            buf[0] = x;
            let mut width = 1usize;
            let mut h = self.base_dt;
            for depth in 0..level {
                // expand in place from the right so parents are read before being overwritten
                for p in (0..width).rev() {
                    let node = (1usize << depth) + p;
                    let total = buf[p];
                    let left = total / 2.0 + 0.5 * h.sqrt() * nodes[node - 1][i];
                    buf[2 * p] = left;
                    buf[2 * p + 1] = total - left;
                }
                width *= 2;
                h /= 2.0;
            }
            out.extend_from_slice(&buf[..per]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a = gaussian_increments(7, 1e-3, 100);
        assert_eq!(a, gaussian_increments(7, 1e-3, 100));
        assert_ne!(a, gaussian_increments(8, 1e-3, 100));
        let mut s1 = stream_rng(7, 1);
        let mut s0 = stream_rng(7, 0);
        assert_ne!(s0.random::<u64>(), s1.random::<u64>());
    }

    #[test]
    fn refinement_preserves_coarse_sums() {
        let path = WienerPath::new(3, 0.01, 50);
        let l0 = path.increments(0);
        for level in 1..4 {
            let fine = path.increments(level);
            let per = 1 << level;
            assert_eq!(fine.len(), 50 * per);
            for i in 0..50 {
                let s: f64 = fine[i * per..(i + 1) * per].iter().sum();
                assert_abs_diff_eq!(s, l0[i], epsilon = 1e-14);
            }
        }
        // level L+1 refines level L
        let l2 = path.increments(2);
        let l3 = path.increments(3);
        for (j, pair) in l3.chunks(2).enumerate() {
            assert_abs_diff_eq!(pair[0] + pair[1], l2[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn refined_increments_have_fine_variance() {
        let path = WienerPath::new(11, 0.02, 20000);
        for level in 0..3 {
            let inc = path.increments(level);
            let dt = path.dt(level);
            let var = inc.iter().map(|x| x * x).sum::<f64>() / inc.len() as f64;
            // relative standard error √(2/n) ≤ 1%
            assert!((var / dt - 1.0).abs() < 0.04, "level {level}: {}", var / dt);
            // consecutive fine increments are uncorrelated
            let cov = inc.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (inc.len() - 1) as f64;
            assert!(cov.abs() / dt < 0.04);
        }
    }
}
