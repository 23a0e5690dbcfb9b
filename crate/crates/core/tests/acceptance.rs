//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{fm_pairwise_naive, gradient_check, random_instances, randomized_model, small_spec, CARDS};
use ctr_core::featurespace::{async_reader, batches, throttle, write_indexed, Batch, IndexedReader, Order};
use ctr_core::metrics::{apply_axis, auc, dataset_logloss, evaluate, shape_layout, Shape, SweepAxis, DROPOUT_VALUES};
use ctr_core::models::{Model, ModelKind, ModelSpec, OuterMode};
use ctr_core::numerics::Activation;
use ctr_core::simulate::{
    coverage_at, generate_synthetic, personalization_at, popularity_at, FieldPair, FieldTriple, RecommendationList,
    SyntheticData, SyntheticSpec,
};
use ctr_core::training::{TrainConfig, Trainer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M: usize = 10;
const CARD: usize = 20;
const SEEDS: u64 = 5;

/// Ten fields of twenty values with linear effects, six planted field pairs
/// and four planted field triples.
fn planted_spec(seed: u64, n_train: usize, n_test: usize) -> SyntheticSpec {
    let mut spec = SyntheticSpec::uniform(M, CARD, n_train, n_test, 1000 + seed);
    spec.linear_std = 0.5;
    for fields in [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9], [0, 5]] {
        spec.pairs.push(FieldPair { fields, weight: 1.0 });
    }
    for fields in [[0, 2, 4], [1, 3, 5], [6, 8, 9], [2, 5, 8]] {
        spec.triples.push(FieldTriple { fields, weight: 1.5 });
    }
    spec
}

fn zoo_spec(kind: ModelKind) -> ModelSpec {
    let spec = ModelSpec::new(kind);
    match (kind.has_fm() || kind.has_deep(), kind.has_deep()) {
        (false, _) => ModelSpec { k: 0, hidden: vec![], ..spec },
        (true, false) => spec.with_k(8).with_hidden(vec![]),
        (true, true) => spec.with_k(8).with_hidden(vec![64, 64]),
    }
}

fn zoo_config(seed: u64) -> TrainConfig {
    TrainConfig { seed, ..TrainConfig::new(256, 0.005, 10) }
}

fn train_and_score(kind: ModelKind, data: &SyntheticData, seed: u64) -> f64 {
    let model = Model::<f64>::new(zoo_spec(kind), M, M * CARD, seed).unwrap();
    let mut t = Trainer::new(model, zoo_config(seed)).unwrap();
    t.fit(&data.train).unwrap();
    evaluate(&t.model, &data.test).unwrap().auc
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn c1_gradients() -> Outcome {
    let t0 = Instant::now();
    let d: usize = CARDS.iter().sum();
    let batch = random_instances(&CARDS, 8, 101);
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for kind in ModelKind::ALL {
        let mut variants = vec![small_spec(kind)];
        if kind.has_deep() {
            variants.push(small_spec(kind).with_layer_norm(true).with_outer(OuterMode::Exact));
        }
        for spec in variants {
            let model = randomized_model(spec, CARDS.len(), d, 102);
            for (id, rel, _) in gradient_check(&model, &batch, 1e-5) {
                checked += 1;
                if rel > worst.0 {
                    worst = (rel, format!("{kind} {id}"));
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst.0 < 1e-4 && secs < 120.0,
        format!("{checked} tensors, worst rel err {:.2e} ({}), {secs:.1}s (limit 1e-4, 120s)", worst.0, worst.1),
    )
}

fn c2_fm_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..1000u64 {
        let cards = [5, 3, 7, 1, 4];
        let d = cards.iter().sum();
        let spec = ModelSpec::new(ModelKind::Fm).with_k(1 + (case % 6) as usize);
        let model = randomized_model(spec, cards.len(), d, case);
        let inst = &random_instances(&cards, 1, case + 7)[0];
        let fast = model.parts(inst).unwrap().pairwise;
        let naive = fm_pairwise_naive(&model, inst);
        worst = worst.max((fast - naive).abs() / naive.abs().max(1e-300));
    }
    outcome(worst < 1e-10, format!("1000 cases, worst rel err {worst:.2e} (limit 1e-10)"))
}

fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&si, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 1) {
        for (&sj, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 0) {
            den += 1.0;
            num += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    num / den
}

fn c3_auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 500 {
        let n = rng.random_range(2..=200);
        let grid = [4, 50, 100_000][sets % 3];
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..grid) as f64 / grid as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if !(labels.contains(&0) && labels.contains(&1)) {
            continue;
        }
        worst = worst.max((auc(&scores, &labels).unwrap() - auc_pairs(&scores, &labels)).abs());
        sets += 1;
    }
    let ln2 = (dataset_logloss(&[0.5; 8], &[1, 0, 1, 1, 0, 0, 1, 0]).unwrap() - std::f64::consts::LN_2).abs();
    let pair = (dataset_logloss(&[0.8, 0.8], &[1, 0]).unwrap() - (-(0.8f64.ln()) - 0.2f64.ln()) / 2.0).abs();
    outcome(
        worst < 1e-12 && ln2 < 1e-12 && pair < 1e-12,
        format!("500 sets, worst |Δauc| {worst:.1e}; ln2 case {ln2:.1e}; two-point case {pair:.1e}"),
    )
}

struct ZooRun {
    aucs: Vec<(ModelKind, Vec<f64>)>,
    secs: f64,
}

impl ZooRun {
    fn mean(&self, kind: ModelKind) -> f64 {
        let v = &self.aucs.iter().find(|(k, _)| *k == kind).unwrap().1;
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn run_zoo() -> ZooRun {
    let t0 = Instant::now();
    let kinds = [ModelKind::Lr, ModelKind::Fm, ModelKind::Dnn, ModelKind::DeepFmD, ModelKind::FmDnn];
    let mut aucs: Vec<(ModelKind, Vec<f64>)> = kinds.iter().map(|&k| (k, Vec::new())).collect();
    for seed in 0..SEEDS {
        let data = generate_synthetic(&planted_spec(seed, 100_000, 20_000)).unwrap();
        for (kind, v) in aucs.iter_mut() {
            v.push(train_and_score(*kind, &data, seed));
        }
    }
    ZooRun { aucs, secs: t0.elapsed().as_secs_f64() }
}

fn c4_ordering(zoo: &ZooRun) -> Outcome {
    let deepfm = zoo.mean(ModelKind::DeepFmD);
    let gaps = [
        ("FM", deepfm - zoo.mean(ModelKind::Fm), 0.005),
        ("DNN", deepfm - zoo.mean(ModelKind::Dnn), 0.005),
        ("LR", deepfm - zoo.mean(ModelKind::Lr), 0.02),
    ];
    let mut detail = String::new();
    for (kind, v) in &zoo.aucs {
        let cells: Vec<String> = v.iter().map(|a| format!("{a:.4}")).collect();
        detail += &format!("\n      {:<9} mean {:.4} [{}]", kind.name(), zoo.mean(*kind), cells.join(" "));
    }
    let head: Vec<String> = gaps.iter().map(|(n, g, min)| format!("DeepFM-D − {n} = {g:+.4} (need ≥ {min})")).collect();
    outcome(
        gaps.iter().all(|(_, g, min)| g >= min) && zoo.secs < 1800.0,
        format!("{}; {:.0}s for {} runs{detail}", head.join(", "), zoo.secs, SEEDS * 5),
    )
}

fn c5_shared_embedding(zoo: &ZooRun) -> Outcome {
    let gap = zoo.mean(ModelKind::DeepFmD) - zoo.mean(ModelKind::FmDnn);
    let wins = zoo.aucs[3].1.iter().zip(&zoo.aucs[4].1).filter(|(a, b)| a >= b).count();
    outcome(gap >= 0.0, format!("DeepFM-D − FM&DNN = {gap:+.4} mean AUC; DeepFM-D ahead on {wins}/{SEEDS} seeds"))
}

fn c6_parallel() -> Outcome {
    let data = generate_synthetic(&planted_spec(0, 100_000, 20_000)).unwrap();
    // gradient equivalence on a fixed batch, dropout on
    let spec = zoo_spec(ModelKind::DeepFmD).with_keep_prob(0.8);
    let model = Model::<f64>::new(spec, M, M * CARD, 1).unwrap();
    let batch = &data.train[..1000];
    let mut one = Trainer::new(model.clone(), TrainConfig { seed: 4, ..TrainConfig::new(1000, 0.01, 1) }).unwrap();
    let mut four = Trainer::new(model, TrainConfig { seed: 4, workers: 4, ..TrainConfig::new(1000, 0.01, 1) }).unwrap();
    let (g1, _) = one.gradient(batch).unwrap();
    let (g4, _) = four.gradient(batch).unwrap();
    let mut grad_err = 0.0f64;
    for ((_, a), (_, b)) in g1.tensors().into_iter().zip(g4.tensors()) {
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for (x, y) in a.iter().zip(b) {
            grad_err = grad_err.max((x - y).abs() / scale);
        }
    }

    // loss curves at equal data consumed: P=1 at bs, P=4 at 4·bs with lr·√4
    let curve = |config: TrainConfig| {
        let model = Model::<f64>::new(zoo_spec(ModelKind::DeepFmD), M, M * CARD, 0).unwrap();
        let mut t = Trainer::new(model, config).unwrap();
        (0..6)
            .map(|_| {
                t.train_epoch(&data.train).unwrap();
                evaluate(&t.model, &data.test).unwrap().logloss
            })
            .collect::<Vec<f64>>()
    };
    let p1 = curve(TrainConfig::new(256, 0.005, 1));
    let p4 = curve(TrainConfig { workers: 4, lr_scale_on_parallel: true, ..TrainConfig::new(1024, 0.005, 1) });
    let worst = p1.iter().zip(&p4).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);
    let fmt = |c: &[f64]| c.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    outcome(
        grad_err < 1e-9 && worst <= 0.05,
        format!(
            "gradient rel err {grad_err:.1e} (limit 1e-9); worst curve gap {:.2}% (limit 5%)\n      P=1 test logloss by epoch: {}\n      P=4 test logloss by epoch: {}",
            100.0 * worst,
            fmt(&p1),
            fmt(&p4)
        ),
    )
}

fn c7_async_reader() -> Outcome {
    let data = generate_synthetic(&planted_spec(7, 40_000, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.bin");
    write_indexed(&path, &data.train).unwrap();
    let delay = Duration::from_millis(3);
    let run = |use_async: bool| {
        let reader = IndexedReader::open(&path, &data.schema).unwrap();
        let stream = throttle(batches(reader, 256, Order::Sequential).unwrap(), delay);
        let model = Model::<f64>::new(zoo_spec(ModelKind::DeepFmD), M, M * CARD, 0).unwrap();
        let mut t = Trainer::new(model, TrainConfig::new(256, 0.005, 1)).unwrap();
        let mut sums = Vec::new();
        let t0 = Instant::now();
        let record = |b: ctr_core::Result<Batch>| {
            if let Ok(b) = &b {
                sums.push(b.checksum());
            }
            b
        };
        if use_async {
            t.train_batches(async_reader(stream, 8).unwrap().map(record)).unwrap();
        } else {
            t.train_batches(stream.map(record)).unwrap();
        }
        (t0.elapsed().as_secs_f64(), sums, t.into_model().store)
    };
    let (mut sync_t, sync_sums, sync_store) = run(false);
    let (mut async_t, async_sums, async_store) = run(true);
    // second pass, keep the faster of each
    sync_t = sync_t.min(run(false).0);
    async_t = async_t.min(run(true).0);
    let rate = sync_t / async_t;
    let same = sync_sums == async_sums && sync_store == async_store;
    outcome(
        same && rate >= 1.05,
        format!(
            "{} batches, checksums {}; sync {sync_t:.2}s, async {async_t:.2}s, speed-up {rate:.2}× (need ≥ 1.05)",
            sync_sums.len(),
            if same { "identical" } else { "DIFFER" }
        ),
    )
}

fn c8_list_metrics() -> Outcome {
    let (t, n, l, apps) = (3usize, 10usize, 5usize, 20u32);
    let groups: Vec<usize> = (0..t * n).map(|u| u / n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let downloads: Vec<u64> = (0..apps).map(|_| rng.random_range(0..10_000)).collect();
    let d_max = *downloads.iter().max().unwrap();
    let mut mismatches = Vec::new();
    for fixture in 0..20 {
        let lists: Vec<RecommendationList> = (0..t * n)
            .map(|u| {
                let mut a: Vec<u32> = (0..apps).collect();
                a.shuffle(&mut rng);
                RecommendationList { user: u, apps: a }
            })
            .collect();
        // integer counts first, then the same division chain
        let mut h = 0.0;
        for gi in 0..t {
            for gj in gi + 1..t {
                let mut sum = 0.0;
                for a in (0..t * n).filter(|&a| groups[a] == gi) {
                    for b in (0..t * n).filter(|&b| groups[b] == gj) {
                        let q = lists[a].apps[..l].iter().filter(|x| lists[b].apps[..l].contains(x)).count();
                        sum += 1.0 - q as f64 / l as f64;
                    }
                }
                h += sum / (n * n) as f64;
            }
        }
        h = h * 2.0 / (t * (t - 1)) as f64;
        let mut union: Vec<u32> = lists.iter().flat_map(|x| x.apps[..l].to_vec()).collect();
        union.sort_unstable();
        union.dedup();
        let cov = union.len() as f64 / apps as f64;
        let per_list: Vec<f64> = lists
            .iter()
            .map(|x| x.apps[..l].iter().map(|&a| downloads[a as usize] as f64 / d_max as f64).sum::<f64>() / l as f64)
            .collect();
        let pop = per_list.iter().sum::<f64>() / per_list.len() as f64;
        let got_pop = popularity_at(&lists, &downloads, l, d_max).unwrap().mean;
        if personalization_at(&lists, &groups, l).unwrap() != h
            || coverage_at(&lists, apps as usize, l).unwrap() != cov
            || got_pop != pop
        {
            mismatches.push(fixture);
        }
    }
    let same: Vec<RecommendationList> =
        (0..t * n).map(|u| RecommendationList { user: u, apps: (0..apps).collect() }).collect();
    let disjoint: Vec<RecommendationList> = (0..t * n)
        .map(|u| {
            let g = groups[u] as u32;
            RecommendationList { user: u, apps: (0..apps).map(|a| (a + 5 * g) % apps).collect() }
        })
        .collect();
    let h0 = personalization_at(&same, &groups, l).unwrap();
    let h1 = personalization_at(&disjoint, &groups, l).unwrap();
    outcome(
        mismatches.is_empty() && h0 == 0.0 && h1 == 1.0,
        format!("20 fixtures (t=3, n=10, L=5), mismatches {mismatches:?}; identical lists h={h0}, disjoint h={h1}"),
    )
}

fn c9_layer_norm() -> Outcome {
    let epochs = 10;
    let data = generate_synthetic(&planted_spec(0, 100_000, 20_000)).unwrap();
    let base =
        ModelSpec::new(ModelKind::DeepFmD).with_k(8).with_hidden(vec![64, 64, 64]).with_activation(Activation::Tanh);
    let curve = |spec: ModelSpec| {
        let model = Model::<f64>::new(spec, M, M * CARD, 0).unwrap();
        let mut t = Trainer::new(model, TrainConfig::new(256, 0.002, 1)).unwrap();
        (0..epochs)
            .map(|_| {
                t.train_epoch(&data.train).unwrap();
                evaluate(&t.model, &data.test).unwrap().logloss
            })
            .collect::<Vec<f64>>()
    };
    let off = curve(base.clone());
    let on = curve(base.with_layer_norm(true));
    let target = off[epochs - 1] * 1.01;
    let reached = on.iter().position(|&x| x <= target).map(|e| e + 1);
    let budget = (epochs as f64 * 0.7).floor() as usize;
    let fmt = |c: &[f64]| c.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    outcome(
        reached.is_some_and(|e| e <= budget),
        format!(
            "LN-off final {:.4}; LN-on within 1% after {} of {epochs} epochs (need ≤ {budget})\n      LN-off: {}\n      LN-on:  {}",
            off[epochs - 1],
            reached.map_or("never".to_string(), |e| e.to_string()),
            fmt(&off),
            fmt(&on)
        ),
    )
}

fn c10_sweep_harness() -> Outcome {
    let layouts: Vec<Vec<usize>> = Shape::ALL.iter().map(|&s| shape_layout(s, 600, 3).unwrap()).collect();
    let expected = vec![vec![200, 200, 200], vec![100, 200, 300], vec![300, 200, 100], vec![150, 300, 150]];
    let base = ModelSpec::new(ModelKind::DeepFmD).with_hidden(vec![200, 200, 200]);
    let axis = SweepAxis::dropout_default();
    let keeps: Vec<f64> = (0..axis.len()).map(|i| apply_axis(&base, &axis, i).unwrap().0.keep_prob).collect();
    outcome(
        layouts == expected && keeps == [1.0, 0.9, 0.8, 0.7, 0.6, 0.5] && keeps == DROPOUT_VALUES,
        format!("shape layouts {layouts:?}; dropout cells {keeps:?}"),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        println!("{} [{id}] {name}: {} ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };
    run(1, "gradient suite", &c1_gradients);
    run(2, "FM oracle", &c2_fm_oracle);
    run(3, "AUC and log-loss oracles", &c3_auc_oracle);
    let zoo = run_zoo();
    run(4, "model ordering on planted interactions", &|| c4_ordering(&zoo));
    run(5, "shared embedding", &|| c5_shared_embedding(&zoo));
    run(6, "data parallelism", &c6_parallel);
    run(7, "async reader", &c7_async_reader);
    run(8, "list metrics", &c8_list_metrics);
    run(9, "layer normalization", &c9_layer_norm);
    run(10, "sweep harness", &c10_sweep_harness);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
