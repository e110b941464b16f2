//! Counter-based random streams and uniform sampling of balls and tori.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream for sample `index` under `seed`; the result does not
/// depend on which worker draws it.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a sub-seed for a named sub-task, so that sibling tasks under one
/// batch seed draw independent streams.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - tag);
    rng.next_u64()
}

/// Uniform direction on the unit sphere of `R^n`.
pub fn unit_vector(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point of the closed ball `B^n_R`: Gaussian direction times
/// radius `R U^{1/n}`.
pub fn uniform_ball(n: usize, radius: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut v = unit_vector(n, rng);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64);
    for x in &mut v {
        *x *= r;
    }
    v
}

/// Uniform point of `[0,1)^n`.
pub fn uniform_cube(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// `ln(pi^{n/2} R^n / Gamma(n/2 + 1))`.
pub fn ln_ball_volume(n: usize, radius: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * std::f64::consts::PI.ln() + nf * radius.ln() - libm::lgamma(0.5 * nf + 1.0)
}

/// Volume of the Euclidean `n`-ball; `inf` when it overflows.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    ln_ball_volume(n, radius).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn small_ball_volumes() {
        assert!((ball_volume(1, 2.0) - 4.0).abs() < 1e-12);
        assert!((ball_volume(2, 1.5) - PI * 2.25).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * PI).abs() < 1e-12);
        assert!(ln_ball_volume(8232, 9.0).is_finite());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = sample_rng(7, 3).next_u64();
        let b: u64 = sample_rng(7, 3).next_u64();
        let c: u64 = sample_rng(7, 4).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(sub_seed(7, 0), sub_seed(7, 1));
    }

    #[test]
    fn ball_samples_fill_the_ball() {
        let n = 5;
        let mut rng = sample_rng(1, 0);
        let m = 20000;
        let mut inner = 0;
        for _ in 0..m {
            let v = uniform_ball(n, 2.0, &mut rng);
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(r <= 2.0 + 1e-12);
            if r < 1.0 {
                inner += 1;
            }
        }
        // P(|v| < R/2) = 2^-n
        let frac = inner as f64 / m as f64;
        let expect = 0.5f64.powi(n as i32);
        let sd = (expect * (1.0 - expect) / m as f64).sqrt();
        assert!((frac - expect).abs() < 5.0 * sd, "{frac} vs {expect}");
    }
}
