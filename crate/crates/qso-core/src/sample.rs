//! Seeded randomness helpers. Everything downstream of a fixed seed is
//! deterministic across platforms, which the golden tests rely on.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::simplex::SimplexPoint;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from [0, 1) with 53 random bits.
#[inline]
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-rate exponential draw.
#[inline]
pub fn unit_exponential(rng: &mut ChaCha8Rng) -> f64 {
    -libm::log(1.0 - uniform(rng))
}

/// Uniform draw from the simplex: normalized unit exponentials.
pub fn random_simplex_point(rng: &mut ChaCha8Rng, m: usize) -> SimplexPoint {
    assert!(m >= 1);
    let mut coords: Vec<f64> = (0..m).map(|_| unit_exponential(rng)).collect();
    let sum: f64 = coords.iter().sum();
    for v in coords.iter_mut() {
        *v /= sum;
    }
    SimplexPoint::from_trusted(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_reproduces() {
        let mut a = rng(7);
        let mut b = rng(7);
        for _ in 0..100 {
            assert_eq!(uniform(&mut a).to_bits(), uniform(&mut b).to_bits());
        }
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut r = rng(1);
        for _ in 0..10_000 {
            let u = uniform(&mut r);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn simplex_draws_are_valid_points() {
        let mut r = rng(2);
        for m in 1..=10 {
            for _ in 0..100 {
                let p = random_simplex_point(&mut r, m);
                assert_eq!(p.dim(), m);
                assert!(p.coords().iter().all(|v| *v >= 0.0));
                let s: f64 = p.coords().iter().sum();
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn simplex_draws_cover_the_interior() {
        // Mean of each coordinate should be near 1/m for a uniform draw.
        let mut r = rng(3);
        let m = 4;
        let n = 20_000;
        let mut mean = [0.0f64; 4];
        for _ in 0..n {
            let p = random_simplex_point(&mut r, m);
            for (acc, v) in mean.iter_mut().zip(p.coords()) {
                *acc += v;
            }
        }
        for acc in mean.iter_mut() {
            *acc /= n as f64;
            assert!((*acc - 0.25).abs() < 0.01);
        }
    }
}
