use std::time::Instant;

use ctr_core::featurespace::read_indexed;
use ctr_core::metrics::evaluate;
use ctr_core::models::save_checkpoint;
use ctr_core::training::write_log_jsonl;
use ctr_core::Result;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, load_schema, required, schema_hash, write_report, Header};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let schema = load_schema(required(&cfg.data.schema, "data.schema")?)?;
    let train = read_indexed(required(&cfg.data.train, "data.train")?, &schema)?;
    let test = cfg.data.test.as_ref().map(|p| read_indexed(p, &schema)).transpose()?;
    let header = Header::new("train", cfg, schema_hash(&schema)?)?;

    let t0 = Instant::now();
    let (model, log) =
        super::fit(&cfg.model, &cfg.train, cfg.pretrain_epochs, schema.num_fields(), schema.total_features(), &train)?;
    let wall = t0.elapsed().as_secs_f64();
    let train_eval = evaluate(&model, &train)?;
    let test_eval = test.as_deref().map(|t| evaluate(&model, t)).transpose()?;

    // nothing is written until training has succeeded
    create_dir(&cfg.output.dir)?;
    save_checkpoint(&model, &cfg.out("model.ckpt"))?;
    write_log_jsonl(&cfg.out("train_log.jsonl"), &log)?;
    let body = json!({
        "model": cfg.model,
        "train": cfg.train,
        "effective_lr": cfg.train.effective_lr(),
        "steps": log.len(),
        "final_loss": log.last().map(|s| s.mean_loss),
        "train_eval": train_eval,
        "test_eval": test_eval,
        "wall_time_s": wall,
    });
    write_report(&cfg.out("train_report.json"), &header, body)?;
    let shown = test_eval.unwrap_or(train_eval);
    println!("{} auc={:.6} logloss={:.6} n={}", cfg.model.kind, shown.auc, shown.logloss, shown.n);
    Ok(())
}
