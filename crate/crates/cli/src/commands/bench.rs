use std::time::{Duration, Instant};

use ctr_core::featurespace::{async_reader, batches, read_indexed, throttle, Order, SparseInstance};
use ctr_core::metrics::speedup_rate;
use ctr_core::models::{Model, ModelKind, ModelSpec};
use ctr_core::simulate::{generate_synthetic, FieldPair, SyntheticSpec};
use ctr_core::training::{TrainConfig, Trainer};
use ctr_core::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{create_dir, load_schema, schema_hash, write_report, Header};

#[derive(Debug, Serialize)]
struct KindRow {
    kind: ModelKind,
    seconds: f64,
    relative_to_lr: f64,
}

#[derive(Debug, Serialize)]
struct WorkerRow {
    workers: usize,
    seconds: f64,
    speed_up: f64,
}

fn spec_for(kind: ModelKind, k: usize, hidden: &[usize]) -> ModelSpec {
    let mut spec = ModelSpec::new(kind);
    if kind.has_fm() || kind.has_deep() {
        spec = spec.with_k(k);
    }
    if kind.has_deep() {
        spec = spec.with_hidden(hidden);
    }
    spec
}

fn time_fit(
    spec: ModelSpec,
    cfg: &TrainConfig,
    fields: usize,
    features: usize,
    data: &[SparseInstance],
) -> Result<f64> {
    let model = Model::<f64>::new(spec, fields, features, cfg.seed)?;
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let t0 = Instant::now();
    trainer.fit(data)?;
    Ok(t0.elapsed().as_secs_f64())
}

fn time_stream(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    fields: usize,
    features: usize,
    data: &[SparseInstance],
    delay: Duration,
    queue: Option<usize>,
) -> Result<f64> {
    let model = Model::<f64>::new(spec.clone(), fields, features, cfg.seed)?;
    let mut trainer = Trainer::new(model, cfg.clone())?;
    // the async reader needs an owned, 'static source
    let owned: Vec<SparseInstance> = data.to_vec();
    let source = throttle(batches(owned.into_iter().map(Ok), cfg.bs, Order::Sequential)?, delay);
    let t0 = Instant::now();
    match queue {
        Some(cap) => trainer.train_batches(async_reader(source, cap)?)?,
        None => trainer.train_batches(source)?,
    };
    Ok(t0.elapsed().as_secs_f64())
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let b = &cfg.bench;
    if b.epochs == 0 {
        return Err(Error::Config("bench.epochs must be at least 1".into()));
    }
    let (data, fields, features, shash) = match (&cfg.data.train, &cfg.data.schema) {
        (Some(train), Some(schema)) => {
            let schema = load_schema(schema)?;
            let data = read_indexed(train, &schema)?;
            (data, schema.num_fields(), schema.total_features(), schema_hash(&schema)?)
        }
        (None, None) => {
            let mut spec = SyntheticSpec::uniform(b.fields, b.cardinality, b.instances, 0, cfg.seed());
            spec.linear_std = 0.5;
            spec.pairs = (0..b.fields / 2).map(|i| FieldPair { fields: [2 * i, 2 * i + 1], weight: 1.0 }).collect();
            let synth = generate_synthetic(&spec)?;
            let hash = schema_hash(&synth.schema)?;
            (synth.train, synth.schema.num_fields(), synth.schema.total_features(), hash)
        }
        _ => return Err(Error::Config("bench needs both data.train and data.schema, or neither".into())),
    };
    let header = Header::new("bench", cfg, shash)?;
    let base = TrainConfig { epochs: b.epochs, workers: 1, ..cfg.train.clone() };

    // LR anchors the relative column, so it always runs first
    let mut kinds = vec![ModelKind::Lr];
    kinds.extend(b.kinds.iter().copied().filter(|&k| k != ModelKind::Lr));
    let mut times = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let secs = time_fit(spec_for(kind, b.k, &b.hidden), &base, fields, features, &data)?;
        eprintln!("bench {kind}: {secs:.3}s");
        times.push(secs);
    }
    let kind_rows: Vec<KindRow> = kinds
        .iter()
        .zip(&times)
        .map(|(&kind, &seconds)| KindRow { kind, seconds, relative_to_lr: seconds / times[0] })
        .collect();

    let delay = Duration::from_millis(b.throttle_ms);
    let one_epoch = TrainConfig { epochs: 1, ..base.clone() };
    let sync_s = time_stream(&cfg.model, &one_epoch, fields, features, &data, delay, None)?;
    let async_s = time_stream(&cfg.model, &one_epoch, fields, features, &data, delay, Some(b.queue))?;

    let mut worker_rows: Vec<WorkerRow> = Vec::new();
    for &p in &b.workers {
        let seconds =
            time_fit(cfg.model.clone(), &TrainConfig { workers: p, ..base.clone() }, fields, features, &data)?;
        let reference = worker_rows.first().map_or(seconds, |r| r.seconds);
        worker_rows.push(WorkerRow { workers: p, seconds, speed_up: speedup_rate(reference, seconds)? });
    }

    create_dir(&cfg.output.dir)?;
    let mut w = csv::Writer::from_path(cfg.out("bench_models.csv"))?;
    for row in &kind_rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Io { path: cfg.out("bench_models.csv"), source: e })?;
    let body = json!({
        "instances": data.len(),
        "cores": std::thread::available_parallelism().map_or(1, |n| n.get()),
        "models": kind_rows,
        "reader": {
            "model": cfg.model.kind,
            "throttle_ms": b.throttle_ms,
            "queue": b.queue,
            "sync_s": sync_s,
            "async_s": async_s,
            "speed_up": speedup_rate(sync_s, async_s)?,
        },
        "workers": worker_rows,
    });
    write_report(&cfg.out("bench_report.json"), &header, body)?;
    for r in &kind_rows {
        println!("{:<10} {:>9.3}s  x{:.2}", r.kind.name(), r.seconds, r.relative_to_lr);
    }
    println!("reader sync {sync_s:.3}s async {async_s:.3}s");
    for r in &worker_rows {
        println!("workers={} {:.3}s speed-up {:.2}", r.workers, r.seconds, r.speed_up);
    }
    Ok(())
}
