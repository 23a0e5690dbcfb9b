//! Offline evaluation: AUC, mean log-loss, speed-up rates and the
//! hyper-parameter sweep harness.

mod sweep;

pub use sweep::{
    apply_axis, shape_layout, sweep, write_sweep_csv, write_sweep_json, Shape, SweepAxis, SweepProtocol, SweepRow,
    DROPOUT_VALUES,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::featurespace::SparseInstance;
use crate::models::Model;
use crate::numerics::Scalar;
use crate::training::logloss;

/// Area under the ROC curve: the fraction of (positive, negative) pairs the
/// scores order correctly, ties counting one half.
///
/// Sorts once and sweeps tie groups, so it runs in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auc inputs", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Parameter("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!("AUC needs both classes, got {pos} positives and {neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the concordant count, so tie halves stay integral
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p_g, mut n_g) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                p_g += 1;
            } else {
                n_g += 1;
            }
            j += 1;
        }
        twice += 2 * p_g * neg_below + p_g * n_g;
        neg_below += n_g;
        i = j;
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Mean per-instance log-loss with probability clipping.
pub fn dataset_logloss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::dim("logloss inputs", probs.len(), labels.len()));
    }
    if probs.is_empty() {
        return Err(Error::UndefinedMetric("log-loss of an empty set".into()));
    }
    let total: f64 = probs.iter().zip(labels).map(|(&p, &y)| logloss(y, p)).sum();
    Ok(total / probs.len() as f64)
}

/// `time_b / time_a`: how many times faster strategy A is than B.
pub fn speedup_rate(time_b: f64, time_a: f64) -> Result<f64> {
    if !(time_b > 0.0 && time_a > 0.0) {
        return Err(Error::Parameter(format!("times must be positive, got {time_b} and {time_a}")));
    }
    Ok(time_b / time_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub auc: f64,
    pub logloss: f64,
    pub n: usize,
}

/// AUC and mean log-loss of `model` on `data`.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &[SparseInstance]) -> Result<Evaluation> {
    let probs: Vec<f64> = model.predict(data)?.into_iter().map(Scalar::as_f64).collect();
    let labels: Vec<u8> = data.iter().map(|i| i.label).collect();
    Ok(Evaluation { auc: auc(&probs, &labels)?, logloss: dataset_logloss(&probs, &labels)?, n: data.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.3, 0.5, 0.2], &[1, 1, 0, 0]).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn logloss_examples() {
        assert!((dataset_logloss(&[0.5; 4], &[1, 0, 0, 1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(dataset_logloss(&[1.0, 0.0], &[1, 0]).unwrap() < 1e-11);
        let two = dataset_logloss(&[0.8, 0.8], &[1, 0]).unwrap();
        assert!((two - (-(0.8f64.ln()) - 0.2f64.ln()) / 2.0).abs() < 1e-12);
        assert!((two - 0.91629).abs() < 1e-5);
    }

    #[test]
    fn speedup_examples() {
        assert_eq!(speedup_rate(10.0, 5.0).unwrap(), 2.0);
        assert_eq!(speedup_rate(3.0, 3.0).unwrap(), 1.0);
        assert!((speedup_rate(13.12, 1.0).unwrap() - 13.12).abs() < 1e-12);
        assert!(speedup_rate(0.0, 1.0).is_err());
        assert!(speedup_rate(1.0, -1.0).is_err());
    }
}
