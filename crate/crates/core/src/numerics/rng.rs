//! Seeded, splittable random streams.
//!
//! Every stochastic operation in the crate takes an explicit seed or an
//! `RngStream`; nothing reads global entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scalar::Scalar;

pub type RngStream = ChaCha8Rng;

/// Independent stream `stream` of the generator family keyed by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically derives a child seed from a parent seed and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |acc, &t| mix64(acc ^ mix64(t)))
}

/// Fills `out` with `Normal(0, std)` draws.
pub fn fill_normal<T: Scalar>(rng: &mut RngStream, std: f64, out: &mut [T]) {
    if std == 0.0 {
        out.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let normal = Normal::new(0.0, std).expect("finite positive std");
    for x in out.iter_mut() {
        *x = T::of(normal.sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = rng_stream(7, 0);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = rng_stream(7, 0);
                move |_| r.random()
            })
            .collect();
        let c: Vec<u64> = (0..4)
            .map({
                let mut r = rng_stream(7, 1);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_depend_on_every_tag() {
        let s = derive_seed(1, &[2, 3]);
        assert_eq!(s, derive_seed(1, &[2, 3]));
        assert_ne!(s, derive_seed(1, &[3, 2]));
        assert_ne!(s, derive_seed(2, &[2, 3]));
    }
}
