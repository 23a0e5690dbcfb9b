use std::io::Write;
use std::path::Path;

use ctr_core::metrics::auc;
use ctr_core::simulate::{generate_synthetic, to_raw_lines};
use ctr_core::{Error, Result};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, required, schema_hash, write_report, Header};

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let io = |e| Error::Io { path: path.to_path_buf(), source: e };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for l in lines {
        writeln!(out, "{l}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let spec = required(&cfg.synth, "synth")?;
    let data = generate_synthetic(spec)?;
    let header = Header::new("synth", cfg, schema_hash(&data.schema)?)?;
    // the clean logit is the best any model can rank with
    let labels = |d: &[ctr_core::featurespace::SparseInstance]| d.iter().map(|i| i.label).collect::<Vec<_>>();
    let ceiling = |clean: &[f64], d| auc(clean, &labels(d)).ok();

    create_dir(&cfg.output.dir)?;
    write_lines(&cfg.out("train.tsv"), &to_raw_lines(&data, &data.train))?;
    write_lines(&cfg.out("test.tsv"), &to_raw_lines(&data, &data.test))?;
    let body = json!({
        "spec": spec,
        "train_records": data.train.len(),
        "test_records": data.test.len(),
        "train_clean_auc": ceiling(&data.train_clean, &data.train),
        "test_clean_auc": ceiling(&data.test_clean, &data.test),
    });
    write_report(&cfg.out("synth_report.json"), &header, body)?;
    Ok(())
}
