//! `ctr`: index raw logs, train and evaluate CTR models, run sweeps, list
//! simulations and benchmarks.
//!
//! Every command reads at most one JSON config (`--config`); flags and
//! `--set key.path=value` override its keys. Exit status is 0 on success,
//! 2 for configuration or input errors and 3 for numerical failures.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctr_core::metrics::DROPOUT_VALUES;
use ctr_core::{Error, Result};
use serde_json::Value;

use config::{json_or_string, Patch};

#[derive(Parser)]
#[command(name = "ctr", version, about = "Train and evaluate CTR models on sparse field data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.l2_fm=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for reports, checkpoints and logs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DataArgs {
    /// Indexed training file.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Indexed test file.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Model kind: lr, poly2, fm, dnn, fnn, ipnn, opnn, pnn*, lr&dnn, fm&dnn, deepfm-d, deepfm-ip, deepfm-op, deepfm-*p.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated hidden layer widths.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    keep_prob: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    bs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Scale the learning rate by the square root of the worker count.
    #[arg(long)]
    lr_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build a schema from raw delimited data and write the indexed binary file.
    Index {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Load the schema instead of building it.
        #[arg(long)]
        reuse_schema: bool,
        #[arg(long)]
        delimiter: Option<char>,
        /// retain, standardize, quantiles:N or boundaries:a,b,...
        #[arg(long)]
        numeric_policy: Option<String>,
        /// Comma-separated zero-based numeric field positions.
        #[arg(long)]
        numeric_fields: Option<String>,
    },
    /// Train one model and write its checkpoint, step log and report.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a checkpoint on indexed data.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Indexed evaluation file.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Train one model per value of a hyper-parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// activation, dropout, neurons_per_layer, hidden_layers or network_shape.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values (dropout defaults to 1,0.9,...,0.5).
        #[arg(long)]
        values: Option<String>,
    },
    /// Compare the recommendation lists of two models on simulated users.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        checkpoint_a: Option<PathBuf>,
        #[arg(long)]
        checkpoint_b: Option<PathBuf>,
        #[arg(long)]
        model_a: Option<String>,
        #[arg(long)]
        model_b: Option<String>,
    },
    /// Time the model zoo, the async reader and parallel workers.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated model kinds.
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        throttle_ms: Option<u64>,
        /// Comma-separated worker counts.
        #[arg(long)]
        worker_counts: Option<String>,
    },
    /// Write raw synthetic train/test files from the `synth` config section.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

fn list(s: &str) -> Value {
    Value::Array(s.split(',').filter(|x| !x.trim().is_empty()).map(|x| json_or_string(x.trim())).collect())
}

fn push<T: Into<Value>>(patches: &mut Vec<Patch>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        patches.push(Patch::new(key, v));
    }
}

impl Common {
    fn patches(&self) -> Result<Vec<Patch>> {
        let mut p = self.set.iter().map(|s| Patch::parse(s)).collect::<Result<Vec<_>>>()?;
        push(&mut p, "output.dir", self.out_dir.as_ref().map(|d| d.to_string_lossy().into_owned()));
        push(&mut p, "train.seed", self.seed);
        Ok(p)
    }
}

fn path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|d| d.to_string_lossy().into_owned())
}

impl DataArgs {
    fn patch(&self, p: &mut Vec<Patch>) {
        push(p, "data.train", path(&self.train));
        push(p, "data.test", path(&self.test));
        push(p, "data.schema", path(&self.schema));
    }
}

impl TrainArgs {
    fn patch(&self, p: &mut Vec<Patch>, model_key: &str) {
        push(p, &format!("{model_key}.kind"), self.model.clone());
        push(p, &format!("{model_key}.k"), self.k);
        push(p, &format!("{model_key}.hidden"), self.hidden.as_deref().map(list));
        push(p, &format!("{model_key}.keep_prob"), self.keep_prob);
        push(p, "train.lr", self.lr);
        push(p, "train.bs", self.bs);
        push(p, "train.epochs", self.epochs);
        push(p, "train.workers", self.workers);
        if self.lr_scale {
            p.push(Patch::new("train.lr_scale_on_parallel", true));
        }
    }
}

fn sweep_axis(axis: Option<&str>, values: Option<&str>) -> Result<Option<Value>> {
    let values = match (axis, values) {
        (None, None) => return Ok(None),
        (None, Some(_)) => return Err(Error::Config("--values needs --axis".into())),
        (Some(_), Some(v)) => list(v),
        (Some("dropout"), None) => serde_json::to_value(DROPOUT_VALUES)?,
        (Some(a), None) => return Err(Error::Config(format!("axis {a} needs --values"))),
    };
    Ok(Some(serde_json::json!({ "axis": axis, "values": values })))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { common, input, output, schema, reuse_schema, delimiter, numeric_policy, numeric_fields } => {
            let mut p = common.patches()?;
            push(&mut p, "index.input", path(&input));
            push(&mut p, "index.output", path(&output));
            push(&mut p, "data.schema", path(&schema));
            push(&mut p, "index.delimiter", delimiter.map(String::from));
            push(&mut p, "index.numeric_policy", numeric_policy);
            push(&mut p, "index.numeric_fields", numeric_fields.as_deref().map(list));
            if reuse_schema {
                p.push(Patch::new("index.reuse_schema", true));
            }
            commands::index::run(&config::load(common.config.as_deref(), &p)?)
        }
        Command::Train { common, data, train } => {
            let mut p = common.patches()?;
            data.patch(&mut p);
            train.patch(&mut p, "model");
            commands::train::run(&config::load(common.config.as_deref(), &p)?)
        }
        Command::Eval { common, checkpoint, data, schema } => {
            let mut p = common.patches()?;
            push(&mut p, "data.test", path(&data));
            push(&mut p, "data.schema", path(&schema));
            commands::eval::run(&config::load(common.config.as_deref(), &p)?, &checkpoint)
        }
        Command::Sweep { common, data, train, axis, values } => {
            let mut p = common.patches()?;
            data.patch(&mut p);
            train.patch(&mut p, "model");
            push(&mut p, "sweep", sweep_axis(axis.as_deref(), values.as_deref())?);
            commands::sweep::run(&config::load(common.config.as_deref(), &p)?)
        }
        Command::Simulate { common, train, catalog, checkpoint_a, checkpoint_b, model_a, model_b } => {
            let mut p = common.patches()?;
            // architecture flags apply to side B, the model under test
            train.patch(&mut p, "simulate.model_b");
            push(&mut p, "simulate.catalog", path(&catalog));
            push(&mut p, "simulate.checkpoint_a", path(&checkpoint_a));
            push(&mut p, "simulate.checkpoint_b", path(&checkpoint_b));
            push(&mut p, "simulate.model_a.kind", model_a);
            push(&mut p, "simulate.model_b.kind", model_b);
            commands::simulate::run(&config::load(common.config.as_deref(), &p)?)
        }
        Command::Bench { common, data, train, kinds, throttle_ms, worker_counts } => {
            let mut p = common.patches()?;
            data.patch(&mut p);
            train.patch(&mut p, "model");
            push(&mut p, "bench.kinds", kinds.as_deref().map(list));
            push(&mut p, "bench.throttle_ms", throttle_ms);
            push(&mut p, "bench.workers", worker_counts.as_deref().map(list));
            commands::bench::run(&config::load(common.config.as_deref(), &p)?)
        }
        Command::Synth { common } => commands::synth::run(&config::load(common.config.as_deref(), &common.patches()?)?),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
