//! Pairwise product layer of the PNN family.
//!
//! Embeddings arrive as one flat buffer of `m` rows of width `k`. The product
//! vector lays out inner products first (pairs in `(0,1), (0,2), …, (m−2,m−1)`
//! order), then outer products row-major.

use super::spec::{OuterMode, Product};
use crate::numerics::{dot, Scalar};

pub fn num_pairs(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

pub fn product_len(product: Product, mode: OuterMode, m: usize, k: usize) -> usize {
    let outer = match mode {
        OuterMode::Compressed => k * k,
        OuterMode::Exact => num_pairs(m) * k * k,
    };
    match product {
        Product::Inner => num_pairs(m),
        Product::Outer => outer,
        Product::Both => num_pairs(m) + outer,
    }
}

/// Fills `out` with the product vector. `field_sum` receives `Σ_i e_i` when
/// compressed outer products are used.
pub fn product_forward<T: Scalar>(
    product: Product,
    mode: OuterMode,
    emb: &[T],
    m: usize,
    k: usize,
    out: &mut Vec<T>,
    field_sum: &mut Vec<T>,
) {
    out.clear();
    let e = |i: usize| &emb[i * k..(i + 1) * k];
    if matches!(product, Product::Inner | Product::Both) {
        for i in 0..m {
            for j in i + 1..m {
                out.push(dot(e(i), e(j)));
            }
        }
    }
    if matches!(product, Product::Outer | Product::Both) {
        match mode {
            OuterMode::Compressed => {
                field_sum.clear();
                field_sum.resize(k, T::zero());
                for i in 0..m {
                    for (s, x) in field_sum.iter_mut().zip(e(i)) {
                        *s += *x;
                    }
                }
                for a in 0..k {
                    for b in 0..k {
                        out.push(field_sum[a] * field_sum[b]);
                    }
                }
            }
            OuterMode::Exact => {
                for i in 0..m {
                    for j in i + 1..m {
                        for &ea in e(i) {
                            for &eb in e(j) {
                                out.push(ea * eb);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adds `∂p/∂emb · d_prod` into `d_emb`.
pub fn product_backward<T: Scalar>(
    product: Product,
    mode: OuterMode,
    emb: &[T],
    m: usize,
    k: usize,
    field_sum: &[T],
    d_prod: &[T],
    d_emb: &mut [T],
) {
    let mut at = 0;
    if matches!(product, Product::Inner | Product::Both) {
        for i in 0..m {
            for j in i + 1..m {
                let g = d_prod[at];
                at += 1;
                if g == T::zero() {
                    continue;
                }
                for f in 0..k {
                    let (ei, ej) = (emb[i * k + f], emb[j * k + f]);
                    d_emb[i * k + f] += g * ej;
                    d_emb[j * k + f] += g * ei;
                }
            }
        }
    }
    if matches!(product, Product::Outer | Product::Both) {
        let dp = &d_prod[at..];
        match mode {
            OuterMode::Compressed => {
                // p[a,b] = s_a s_b, so ∂/∂s_c = Σ_b dp[c,b] s_b + Σ_a dp[a,c] s_a
                let mut d_sum = vec![T::zero(); k];
                for a in 0..k {
                    for b in 0..k {
                        let g = dp[a * k + b];
                        d_sum[a] += g * field_sum[b];
                        d_sum[b] += g * field_sum[a];
                    }
                }
                for i in 0..m {
                    for (d, s) in d_emb[i * k..(i + 1) * k].iter_mut().zip(&d_sum) {
                        *d += *s;
                    }
                }
            }
            OuterMode::Exact => {
                let mut base = 0;
                for i in 0..m {
                    for j in i + 1..m {
                        for a in 0..k {
                            for b in 0..k {
                                let g = dp[base + a * k + b];
                                d_emb[i * k + a] += g * emb[j * k + b];
                                d_emb[j * k + b] += g * emb[i * k + a];
                            }
                        }
                        base += k * k;
                    }
                }
            }
        }
    }
}
