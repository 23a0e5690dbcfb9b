use rand::Rng;

use super::rng::RngStream;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::Parameter(format!("keep_prob must lie in (0, 1], got {keep_prob}")));
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0. At `keep_prob == 1` every entry is exactly one.
pub fn dropout_mask<T: Scalar>(keep_prob: f64, len: usize, rng: &mut RngStream) -> Result<Vec<T>> {
    check_keep_prob(keep_prob)?;
    let mut mask = vec![T::one(); len];
    fill_dropout_mask(keep_prob, rng, &mut mask);
    Ok(mask)
}

/// In-place variant used on hot paths; `keep_prob` must already be validated.
pub(crate) fn fill_dropout_mask<T: Scalar>(keep_prob: f64, rng: &mut RngStream, mask: &mut [T]) {
    if keep_prob >= 1.0 {
        mask.iter_mut().for_each(|m| *m = T::one());
        return;
    }
    let scale = T::of(1.0 / keep_prob);
    for m in mask.iter_mut() {
        *m = if rng.random::<f64>() < keep_prob { scale } else { T::zero() };
    }
}

/// Applies a mask elementwise.
pub fn apply_mask<T: Scalar>(x: &mut [T], mask: &[T]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= *m;
    }
}
