use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::evaluate;
use crate::error::{Error, Result};
use crate::featurespace::SparseInstance;
use crate::models::{Model, ModelSpec};
use crate::numerics::Activation;
use crate::training::{TrainConfig, Trainer};

/// The dropout grid: keep probabilities from 1.0 down to 0.5.
pub const DROPOUT_VALUES: [f64; 6] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Constant,
    Increasing,
    Decreasing,
    Diamond,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Constant, Shape::Increasing, Shape::Decreasing, Shape::Diamond];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Constant => "constant",
            Shape::Increasing => "increasing",
            Shape::Decreasing => "decreasing",
            Shape::Diamond => "diamond",
        }
    }

    fn weights(self, layers: usize) -> Vec<usize> {
        (0..layers)
            .map(|i| match self {
                Shape::Constant => 1,
                Shape::Increasing => i + 1,
                Shape::Decreasing => layers - i,
                Shape::Diamond => (i + 1).min(layers - i),
            })
            .collect()
    }
}

/// Splits `total` neurons over `layers` hidden layers following `shape`.
/// Widths are floored shares of the shape's weights; the rounding remainder
/// goes to the middle layer, so the sum is exactly `total`.
pub fn shape_layout(shape: Shape, total: usize, layers: usize) -> Result<Vec<usize>> {
    if layers == 0 {
        return Err(Error::Config("a layout needs at least one layer".into()));
    }
    let weights = shape.weights(layers);
    let sum: usize = weights.iter().sum();
    let mut widths: Vec<usize> = weights.iter().map(|w| total * w / sum).collect();
    let assigned: usize = widths.iter().sum();
    widths[layers / 2] += total - assigned;
    if widths.contains(&0) {
        return Err(Error::Config(format!(
            "{total} neurons are too few for a {} layout over {layers} layers",
            shape.name()
        )));
    }
    Ok(widths)
}

/// One hyper-parameter axis and the values to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Activation(Vec<Activation>),
    /// Keep probabilities.
    Dropout(Vec<f64>),
    NeuronsPerLayer(Vec<usize>),
    HiddenLayers(Vec<usize>),
    /// Redistributes the base spec's total neuron count over its layer count.
    NetworkShape(Vec<Shape>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Activation(_) => "activation",
            SweepAxis::Dropout(_) => "dropout",
            SweepAxis::NeuronsPerLayer(_) => "neurons_per_layer",
            SweepAxis::HiddenLayers(_) => "hidden_layers",
            SweepAxis::NetworkShape(_) => "network_shape",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Activation(v) => v.len(),
            SweepAxis::Dropout(v) => v.len(),
            SweepAxis::NeuronsPerLayer(v) => v.len(),
            SweepAxis::HiddenLayers(v) => v.len(),
            SweepAxis::NetworkShape(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropout_default() -> Self {
        SweepAxis::Dropout(DROPOUT_VALUES.to_vec())
    }
}

/// The `i`-th cell of `axis` applied to `base`, with a printable label.
pub fn apply_axis(base: &ModelSpec, axis: &SweepAxis, i: usize) -> Result<(ModelSpec, String)> {
    if !base.kind.has_deep() {
        return Err(Error::Config(format!("{} axis does not apply to {}", axis.name(), base.kind)));
    }
    let mut spec = base.clone();
    let label = match axis {
        SweepAxis::Activation(v) => {
            spec.activation = v[i];
            v[i].to_string()
        }
        SweepAxis::Dropout(v) => {
            spec.keep_prob = v[i];
            v[i].to_string()
        }
        SweepAxis::NeuronsPerLayer(v) => {
            spec.hidden = vec![v[i]; base.hidden.len()];
            v[i].to_string()
        }
        SweepAxis::HiddenLayers(v) => {
            spec.hidden = vec![base.hidden[0]; v[i]];
            v[i].to_string()
        }
        SweepAxis::NetworkShape(v) => {
            spec.hidden = shape_layout(v[i], base.hidden.iter().sum(), base.hidden.len())?;
            v[i].name().to_string()
        }
    };
    spec.validate()?;
    Ok((spec, label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub auc: f64,
    pub logloss: f64,
    pub wall_time_s: f64,
}

/// Data and training budget shared by every sweep cell.
#[derive(Debug, Clone)]
pub struct SweepProtocol<'a> {
    pub train: &'a [SparseInstance],
    pub test: &'a [SparseInstance],
    pub num_fields: usize,
    pub num_features: usize,
    /// Fixed epochs and seed for every cell.
    pub config: TrainConfig,
}

/// Trains and evaluates one model per axis value.
pub fn sweep(base: &ModelSpec, axis: &SweepAxis, protocol: &SweepProtocol<'_>) -> Result<Vec<SweepRow>> {
    if axis.is_empty() {
        return Err(Error::Config(format!("{} axis has no values", axis.name())));
    }
    // reject bad cells before spending time on any
    let cells = (0..axis.len()).map(|i| apply_axis(base, axis, i)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cells.len());
    for (spec, label) in cells {
        let t0 = Instant::now();
        let model = Model::<f64>::new(spec, protocol.num_fields, protocol.num_features, protocol.config.seed)?;
        let mut trainer = Trainer::new(model, protocol.config.clone())?;
        trainer.fit(protocol.train)?;
        let eval = evaluate(&trainer.model, protocol.test)?;
        rows.push(SweepRow {
            axis_value: label,
            auc: eval.auc,
            logloss: eval.logloss,
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_json(path: &Path, axis: &SweepAxis, rows: &[SweepRow]) -> Result<()> {
    let doc = serde_json::json!({ "axis": axis.name(), "rows": rows });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(path, e))
}
