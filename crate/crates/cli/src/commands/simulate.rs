use ctr_core::models::{load_checkpoint, save_checkpoint, ModelSpec};
use ctr_core::simulate::{
    ab_report, click_log, generate_users, recommend, write_ab_csv, Catalog, ClickSim, UserAppEncoder,
};
use ctr_core::{Model64, Result};
use serde_json::json;

use crate::config::{sha256_hex, RunConfig};
use crate::report::{create_dir, write_report, Header};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let sim = &cfg.simulate;
    let seed = cfg.seed();
    let catalog = match &sim.catalog {
        Some(p) => Catalog::load(p)?,
        None => Catalog::generate(sim.types, sim.per_type, seed)?,
    };
    let users = generate_users(sim.t, sim.n, &catalog, sim.history_len, seed)?;
    let encoder = UserAppEncoder { history_len: sim.history_len, num_apps: catalog.len() };
    let layout = json!({
        "history_len": encoder.history_len,
        "num_apps": encoder.num_apps,
        "num_fields": encoder.num_fields(),
        "num_features": encoder.num_features(),
    });
    let header = Header::new("simulate", cfg, sha256_hex(&serde_json::to_vec(&layout)?))?;

    // one click log shared by both sides, built only if a side needs training
    let mut log = None;
    let mut side = |ckpt: &Option<std::path::PathBuf>, spec: &ModelSpec| -> Result<(Model64, bool)> {
        if let Some(p) = ckpt {
            return Ok((load_checkpoint(p)?, false));
        }
        let data = log.get_or_insert_with(|| click_log(&users, &catalog, &encoder, &sim.clicks, sim.impressions, seed));
        let (model, _) =
            super::fit(spec, &cfg.train, cfg.pretrain_epochs, encoder.num_fields(), encoder.num_features(), data)?;
        Ok((model, true))
    };
    let (model_a, trained_a) = side(&sim.checkpoint_a, &sim.model_a)?;
    let (model_b, trained_b) = side(&sim.checkpoint_b, &sim.model_b)?;

    let candidates = catalog.ids();
    let lists_a = recommend(&model_a, &encoder, &users.users, &candidates)?;
    let lists_b = recommend(&model_b, &encoder, &users.users, &candidates)?;
    let clicks = ClickSim { users: &users.users, clicks: sim.clicks, seed };
    let report =
        ab_report(&lists_a, &lists_b, &users.groups(), &catalog, &sim.ls, sim.click_simulation.then_some(&clicks))?;

    create_dir(&cfg.output.dir)?;
    catalog.save(&cfg.out("catalog.json"))?;
    for (trained, model, name) in [(trained_a, &model_a, "model_a.ckpt"), (trained_b, &model_b, "model_b.ckpt")] {
        if trained {
            save_checkpoint(model, &cfg.out(name))?;
        }
    }
    write_ab_csv(&cfg.out("ab.csv"), &report)?;
    let body = json!({
        "layout": layout,
        "model_a": model_a.spec,
        "model_b": model_b.spec,
        "users": users.users.len(),
        "rows": report.rows,
        "deltas": report.deltas,
    });
    write_report(&cfg.out("ab_report.json"), &header, body)?;
    for d in &report.deltas {
        println!(
            "L={} d_personalization={:+.6} d_coverage={:+.6} d_popularity={:+.6}",
            d.l, d.personalization, d.coverage, d.popularity_mean
        );
    }
    Ok(())
}
