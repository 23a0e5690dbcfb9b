use crate::numerics::{sigmoid, Scalar};

/// Probabilities are clipped to `[P_CLIP, 1 − P_CLIP]` before taking logs.
pub const P_CLIP: f64 = 1e-12;

/// Binary cross-entropy `−[y ln p + (1−y) ln(1−p)]` with clipping.
pub fn logloss<T: Scalar>(y: u8, p: T) -> T {
    let lo = T::of(P_CLIP);
    let p = p.max(lo).min(T::one() - lo);
    if y == 1 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

/// `∂ logloss(y, sigmoid(z)) / ∂z`.
#[inline]
pub fn loss_grad<T: Scalar>(y: u8, p: T) -> T {
    p - T::of(f64::from(y))
}

/// Loss and logit gradient at logit `z`.
#[inline]
pub fn loss_and_grad<T: Scalar>(z: T, y: u8) -> (T, T) {
    let p = sigmoid(z);
    (logloss(y, p), loss_grad(y, p))
}
