use std::io::BufRead;
use std::path::Path;

use ctr_core::featurespace::{index_offline, FeatureSchema, FieldDecl, RawReader, SchemaOptions};
use ctr_core::{Error, Result};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, load_schema, required, schema_hash, write_report, Header};

/// Parses `retain`, `standardize`, `quantiles:N` or `boundaries:a,b,...`.
pub fn parse_policy(s: &str) -> Result<FieldDecl> {
    let bad = || Error::Config(format!("unknown numeric policy {s:?}"));
    let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
    match (name.trim().to_ascii_lowercase().as_str(), arg) {
        ("retain", None) => Ok(FieldDecl::Retain),
        ("standardize", None) => Ok(FieldDecl::Standardize),
        ("quantiles", Some(n)) => Ok(FieldDecl::Quantiles(n.trim().parse().map_err(|_| bad())?)),
        ("boundaries", Some(list)) => {
            let b =
                list.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
            Ok(FieldDecl::Boundaries(b))
        }
        _ => Err(bad()),
    }
}

fn count_fields(path: &Path, delimiter: char) -> Result<usize> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        if !line.trim().is_empty() {
            return Ok(line.split(delimiter).count().saturating_sub(1));
        }
    }
    Err(Error::Config(format!("{}: no records to infer the field count from", path.display())))
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ix = &cfg.index;
    let input = required(&ix.input, "index.input")?;
    let output = required(&ix.output, "index.output")?;
    let schema_path = required(&cfg.data.schema, "data.schema")?;

    let schema = if ix.reuse_schema {
        load_schema(schema_path)?
    } else {
        let m = count_fields(input, ix.delimiter)?;
        let numeric = parse_policy(&ix.numeric_policy)?;
        let mut decls = vec![FieldDecl::Categorical; m];
        for &f in &ix.numeric_fields {
            let slot = decls.get_mut(f).ok_or(Error::Index { what: "numeric field", index: f, bound: m })?;
            *slot = numeric.clone();
        }
        let opts = SchemaOptions { reserve_unknown: ix.reserve_unknown };
        FeatureSchema::build(RawReader::open(input, ix.delimiter)?, &decls, opts)?
    };

    for dir in [output.parent(), schema_path.parent(), Some(cfg.output.dir.as_path())].into_iter().flatten() {
        if !dir.as_os_str().is_empty() {
            create_dir(dir)?;
        }
    }
    let records = index_offline(input, &schema, ix.delimiter, output)?;
    if !ix.reuse_schema {
        std::fs::write(schema_path, schema.to_json()?)
            .map_err(|e| Error::Io { path: schema_path.to_path_buf(), source: e })?;
    }
    let header = Header::new("index", cfg, schema_hash(&schema)?)?;
    let body = json!({
        "input": input,
        "output": output,
        "schema": schema_path,
        "records": records,
        "num_fields": schema.num_fields(),
        "num_features": schema.total_features(),
    });
    write_report(&cfg.out("index_report.json"), &header, body.clone())?;
    println!("{}", serde_json::to_string(&body)?);
    Ok(())
}
