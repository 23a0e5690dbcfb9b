use ctr_core::featurespace::read_indexed;
use ctr_core::metrics::{sweep, write_sweep_csv, SweepProtocol};
use ctr_core::Result;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, load_schema, required, schema_hash, write_report, Header};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let schema = load_schema(required(&cfg.data.schema, "data.schema")?)?;
    let train = read_indexed(required(&cfg.data.train, "data.train")?, &schema)?;
    let test = read_indexed(required(&cfg.data.test, "data.test")?, &schema)?;
    let header = Header::new("sweep", cfg, schema_hash(&schema)?)?;
    let protocol = SweepProtocol {
        train: &train,
        test: &test,
        num_fields: schema.num_fields(),
        num_features: schema.total_features(),
        config: cfg.train.clone(),
    };
    let rows = sweep(&cfg.model, &cfg.sweep, &protocol)?;

    create_dir(&cfg.output.dir)?;
    write_sweep_csv(&cfg.out("sweep.csv"), &rows)?;
    let body = json!({ "axis": cfg.sweep.name(), "model": cfg.model, "train": cfg.train, "rows": rows });
    write_report(&cfg.out("sweep_report.json"), &header, body)?;
    for r in &rows {
        println!("{}={} auc={:.6} logloss={:.6}", cfg.sweep.name(), r.axis_value, r.auc, r.logloss);
    }
    Ok(())
}
