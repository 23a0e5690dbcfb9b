use std::path::Path;

use ctr_core::featurespace::read_indexed;
use ctr_core::metrics::evaluate;
use ctr_core::models::load_checkpoint;
use ctr_core::{Error, Model64, Result};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, load_schema, required, schema_hash, write_report, Header};

pub fn run(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let schema = load_schema(required(&cfg.data.schema, "data.schema")?)?;
    let data_path = required(&cfg.data.test, "data.test")?;
    let data = read_indexed(data_path, &schema)?;
    let model: Model64 = load_checkpoint(checkpoint)?;
    if model.num_features != schema.total_features() || model.num_fields != schema.num_fields() {
        return Err(Error::Dimension {
            context: "checkpoint against schema".into(),
            expected: format!("{} fields / {} features", schema.num_fields(), schema.total_features()),
            found: format!("{} fields / {} features", model.num_fields, model.num_features),
        });
    }
    let e = evaluate(&model, &data)?;
    let header = Header::new("eval", cfg, schema_hash(&schema)?)?;
    create_dir(&cfg.output.dir)?;
    let body = json!({
        "checkpoint": checkpoint,
        "data": data_path,
        "model": model.spec,
        "auc": e.auc,
        "logloss": e.logloss,
        "n": e.n,
    });
    write_report(&cfg.out("eval_report.json"), &header, body)?;
    println!("{} auc={:.6} logloss={:.6} n={}", model.spec.kind, e.auc, e.logloss, e.n);
    Ok(())
}
