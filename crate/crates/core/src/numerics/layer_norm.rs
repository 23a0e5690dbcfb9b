use super::scalar::Scalar;

/// Per-vector statistics kept from the forward pass for backprop.
#[derive(Debug, Clone, Default)]
pub struct LayerNormCache<T> {
    /// Normalized input `(x - mean) / sqrt(var + eps)`.
    pub normalized: Vec<T>,
    pub inv_std: T,
}

/// `gain ⊙ (x − mean) / sqrt(var + eps) + bias` with the population variance.
pub fn layer_norm<T: Scalar>(x: &[T], gain: &[T], bias: &[T], epsilon: T) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    let mut cache = LayerNormCache::default();
    layer_norm_into(x, gain, bias, epsilon, &mut out, &mut cache);
    out
}

pub fn layer_norm_into<T: Scalar>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    epsilon: T,
    out: &mut [T],
    cache: &mut LayerNormCache<T>,
) {
    debug_assert_eq!(x.len(), gain.len());
    debug_assert_eq!(x.len(), bias.len());
    let n = T::of(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let denom = (var + epsilon).sqrt();
    let inv_std = if denom > T::zero() { T::one() / denom } else { T::zero() };
    cache.inv_std = inv_std;
    cache.normalized.clear();
    cache.normalized.extend(x.iter().map(|&v| (v - mean) * inv_std));
    for ((o, xh), (g, b)) in out.iter_mut().zip(&cache.normalized).zip(gain.iter().zip(bias)) {
        *o = *g * *xh + *b;
    }
}

/// Backprop through `layer_norm`. Accumulates into `d_gain`/`d_bias` and
/// overwrites `d_x`.
pub fn layer_norm_backward<T: Scalar>(
    d_out: &[T],
    gain: &[T],
    cache: &LayerNormCache<T>,
    d_x: &mut [T],
    d_gain: &mut [T],
    d_bias: &mut [T],
) {
    let n = T::of(d_out.len() as f64);
    let mut mean_dxh = T::zero();
    let mut mean_dxh_xh = T::zero();
    for i in 0..d_out.len() {
        let xh = cache.normalized[i];
        d_gain[i] += d_out[i] * xh;
        d_bias[i] += d_out[i];
        let dxh = d_out[i] * gain[i];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh;
    }
    mean_dxh /= n;
    mean_dxh_xh /= n;
    for i in 0..d_out.len() {
        let dxh = d_out[i] * gain[i];
        d_x[i] = cache.inv_std * (dxh - mean_dxh - cache.normalized[i] * mean_dxh_xh);
    }
}
