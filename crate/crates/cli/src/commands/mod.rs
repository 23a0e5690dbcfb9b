pub mod bench;
pub mod eval;
pub mod index;
pub mod simulate;
pub mod sweep;
pub mod synth;
pub mod train;

use ctr_core::featurespace::SparseInstance;
use ctr_core::models::{pretrain_fnn, Model, ModelKind, ModelSpec};
use ctr_core::training::{StepLog, TrainConfig, Trainer};
use ctr_core::{Model64, Result};

/// Trains `spec` on `data`. An FNN first fits an FM for `pretrain_epochs`
/// and starts from its latent vectors.
pub fn fit(
    spec: &ModelSpec,
    config: &TrainConfig,
    pretrain_epochs: usize,
    num_fields: usize,
    num_features: usize,
    data: &[SparseInstance],
) -> Result<(Model64, Vec<StepLog>)> {
    let model = if spec.kind == ModelKind::Fnn && pretrain_epochs > 0 {
        let fm_spec = ModelSpec::new(ModelKind::Fm).with_k(spec.k).with_init_std(spec.init_std);
        let fm = Model::new(fm_spec, num_fields, num_features, config.seed)?;
        let mut t = Trainer::new(fm, TrainConfig { epochs: pretrain_epochs, ..config.clone() })?;
        t.fit(data)?;
        pretrain_fnn(&t.into_model(), spec.clone(), config.seed)?
    } else {
        Model::new(spec.clone(), num_fields, num_features, config.seed)?
    };
    let mut trainer = Trainer::new(model, config.clone())?;
    let log = trainer.fit(data)?;
    Ok((trainer.into_model(), log))
}
