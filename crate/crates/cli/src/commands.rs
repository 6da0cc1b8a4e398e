//! `synth`, `train`, `eval`, `sweep-k` and `study`.

use std::path::{Path, PathBuf};

use morerm::experiment::{self, World};
use morerm::metrics::{self, EvalRow};
use morerm::prefdata::{load_jsonl, DiversifiedDataset, HashFeaturizer};
use morerm::rewardnet::Checkpoint;
use morerm::{ExperimentConfig, Scheme};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::{create_dir, opt, write_csv, write_json, write_text, write_with};
use crate::Format;

fn tags(digest: &str, seed: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("config_digest".into(), json!(digest));
    m.insert("seed".into(), json!(seed));
    m
}

/// A directory argument resolves to `default_file` inside it.
fn resolve_file(path: &Path, default_file: &str) -> CliResult<PathBuf> {
    let file = if path.is_dir() {
        path.join(default_file)
    } else {
        path.to_path_buf()
    };
    if !file.is_file() {
        return Err(CliError::Data(format!("missing data file {}", file.display())));
    }
    Ok(file)
}

fn load(path: &Path, d: usize) -> CliResult<DiversifiedDataset> {
    Ok(load_jsonl(path, &HashFeaturizer { d })?)
}

pub fn synth(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    let digest = cfg.digest();
    let seed = cfg.synthesis.seed;
    let world = World::build(cfg, seed)?;
    let held_out = world.source_testset(cfg.eval.source_test_n)?;
    create_dir(out)?;
    let t = tags(&digest, seed);
    world.train.write_jsonl(&out.join("train.jsonl"), &t)?;
    world.shared_test.write_jsonl(&out.join("test_shared.jsonl"), &t)?;
    held_out.write_jsonl(&out.join("test_sources.jsonl"), &t)?;
    write_json(
        &out.join("spec.json"),
        &json!({ "config_digest": digest, "seed": seed, "spec": world.spec }),
    )?;
    let toml = cfg.to_toml()?;
    write_text(
        &out.join("config.toml"),
        &format!("# config_digest = \"{digest}\"\n# seed = {seed}\n{toml}"),
    )?;
    println!(
        "synth: {} sources x {} pairs, d = {}, digest {digest} -> {}",
        world.spec.k,
        world.spec.n_per_source,
        world.spec.d,
        out.display()
    );
    Ok(())
}

pub fn train(cfg: &ExperimentConfig, data: &Path, out: &Path, format: Format) -> CliResult<()> {
    let path = resolve_file(data, "train.jsonl")?;
    let ds = load(&path, cfg.synthesis.d)?;
    let trained = morerm::train(&ds, &cfg.train)?;
    let digest = cfg.digest();
    let seed = cfg.train.seed;
    let scheme = cfg.train.scheme;
    let stem = format!("{}-s{seed}", scheme.tag());
    create_dir(out)?;

    Checkpoint::from_model(&trained.model, digest.clone(), seed).save(&out.join(format!("{stem}.checkpoint.json")))?;
    match format {
        Format::Csv => {
            let extra = [("config_digest", digest.clone()), ("seed", seed.to_string())];
            write_with(&out.join(format!("{stem}.trace.csv")), |w| trained.trace.write_csv(w, &extra))?;
        }
        Format::Json => write_json(
            &out.join(format!("{stem}.trace.json")),
            &json!({ "config_digest": digest, "seed": seed, "scheme": scheme, "trace": trained.trace }),
        )?,
    }
    write_json(
        &out.join(format!("{stem}.train.json")),
        &json!({
            "config_digest": digest,
            "seed": seed,
            "scheme": scheme,
            "k": ds.k(),
            "n_pairs": ds.len(),
            "steps": trained.steps,
            "initial_loss": trained.initial_loss,
            "final_loss": trained.final_loss,
            "epoch_losses": trained.epoch_losses,
        }),
    )?;
    println!(
        "train: {scheme} seed {seed}, {} steps, loss {} -> {}",
        trained.steps, trained.initial_loss, trained.final_loss
    );
    Ok(())
}

/// Label for a `<tag>-s<seed>.checkpoint.json` file: the scheme when the tag
/// names one, the bare tag otherwise.
fn label_from_file(path: &Path, seed: u64) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".checkpoint.json").or_else(|| name.strip_suffix(".json")).unwrap_or(name);
    let tag = stem.strip_suffix(&format!("-s{seed}")).unwrap_or(stem);
    let scheme = match tag {
        "more" => Some(Scheme::More),
        "multitask" => Some(Scheme::MultiTask),
        _ => tag.strip_prefix("single").and_then(|i| i.parse().ok()).map(Scheme::Single),
    };
    Some(scheme.map_or_else(|| tag.to_string(), |s| s.to_string())).filter(|l| !l.is_empty())
}

const METRICS_HEADER: [&str; 17] = [
    "scheme",
    "seed",
    "source",
    "n",
    "accuracy",
    "ece",
    "mean_diff",
    "q1",
    "q2",
    "q3",
    "pos_outlier_count",
    "pos_outlier_mean",
    "neg_outlier_count",
    "neg_outlier_mean",
    "ece_confidence",
    "config_digest",
    "train_config_digest",
];

const RELIABILITY_HEADER: [&str; 10] = [
    "bin_low",
    "bin_high",
    "count",
    "acc",
    "conf",
    "scheme",
    "seed",
    "source",
    "ece_confidence",
    "config_digest",
];

pub fn eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    test: &Path,
    scheme: Option<Scheme>,
    out: &Path,
    format: Format,
) -> CliResult<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.to_model()?;
    let test = resolve_file(test, "test_sources.jsonl")?;
    let ds = load(&test, model.d())?;
    let rows = metrics::evaluate(&model, &ds, &cfg.eval.options())?;

    let seed = ckpt.seed;
    let digest = cfg.digest();
    let confidence = cfg.eval.confidence.to_string();
    let label = match scheme {
        Some(s) => s.to_string(),
        None => label_from_file(checkpoint, seed).unwrap_or_else(|| "model".into()),
    };
    let file_tag: String = label.chars().filter(|c| *c != ':').collect();
    let stem = format!("{file_tag}-s{seed}");
    create_dir(out)?;

    match format {
        Format::Csv => {
            let metric_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| metrics_record(r, &label, seed, &confidence, &digest, &ckpt.train_config_digest))
                .collect();
            write_csv(&out.join(format!("metrics-{stem}.csv")), &METRICS_HEADER, &metric_rows)?;
            let bins: Vec<Vec<String>> = rows
                .iter()
                .flat_map(|r| {
                    r.calibration.bins.iter().map(|b| {
                        vec![
                            b.low.to_string(),
                            b.high.to_string(),
                            b.count.to_string(),
                            opt(b.acc),
                            opt(b.conf),
                            label.clone(),
                            seed.to_string(),
                            r.source.clone(),
                            confidence.clone(),
                            digest.clone(),
                        ]
                    })
                })
                .collect();
            write_csv(&out.join(format!("reliability-{stem}.csv")), &RELIABILITY_HEADER, &bins)?;
        }
        Format::Json => write_json(
            &out.join(format!("metrics-{stem}.json")),
            &json!({
                "scheme": label,
                "seed": seed,
                "ece_confidence": confidence,
                "config_digest": digest,
                "train_config_digest": ckpt.train_config_digest,
                "rows": rows,
            }),
        )?,
    }
    for r in &rows {
        println!("eval: {label} seed {seed} {:<12} n {:>6} acc {:.4} ece {:.4}", r.source, r.n, r.accuracy, r.ece);
    }
    Ok(())
}

fn metrics_record(r: &EvalRow, scheme: &str, seed: u64, confidence: &str, digest: &str, train_digest: &str) -> Vec<String> {
    let s = &r.stats;
    vec![
        scheme.to_string(),
        seed.to_string(),
        r.source.clone(),
        r.n.to_string(),
        r.accuracy.to_string(),
        r.ece.to_string(),
        s.mean.to_string(),
        s.q1.to_string(),
        s.median.to_string(),
        s.q3.to_string(),
        s.positive_outliers.count.to_string(),
        opt(s.positive_outliers.mean),
        s.negative_outliers.count.to_string(),
        opt(s.negative_outliers.mean),
        confidence.to_string(),
        digest.to_string(),
        train_digest.to_string(),
    ]
}

pub fn sweep_k(cfg: &ExperimentConfig, out: &Path, format: Format) -> CliResult<()> {
    let digest = cfg.digest();
    let confidence = cfg.eval.confidence.to_string();
    let mut res = experiment::sweep_k(cfg)?;
    res.rows.sort_by_key(|r| (r.k, r.seed, r.scheme.to_string()));
    res.trends.sort_by_key(|t| t.0);
    res.traces.sort_by_key(|t| (t.1, t.0));
    create_dir(out)?;

    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.seed.to_string(),
                        r.scheme.to_string(),
                        r.accuracy.to_string(),
                        r.ece.to_string(),
                        r.mean_abs_diff.to_string(),
                        confidence.clone(),
                        digest.clone(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("sweep_k.csv"),
                &["k", "seed", "scheme", "accuracy", "ece", "mean_abs_diff", "ece_confidence", "config_digest"],
                &rows,
            )?;
            let trends: Vec<Vec<String>> = res
                .trends
                .iter()
                .map(|(seed, rho)| vec![seed.to_string(), rho.to_string(), digest.clone()])
                .collect();
            write_csv(&out.join("sweep_k_trend.csv"), &["seed", "spearman_rho", "config_digest"], &trends)?;
            let dir = out.join("traces");
            create_dir(&dir)?;
            for (seed, k, trace) in &res.traces {
                let extra = [("k", k.to_string()), ("seed", seed.to_string()), ("config_digest", digest.clone())];
                write_with(&dir.join(format!("more-k{k}-s{seed}.trace.csv")), |w| trace.write_csv(w, &extra))?;
            }
        }
        Format::Json => {
            let trends: Vec<Value> = res
                .trends
                .iter()
                .map(|(seed, rho)| json!({ "seed": seed, "spearman_rho": rho }))
                .collect();
            let traces: Vec<Value> = res
                .traces
                .iter()
                .map(|(seed, k, trace)| json!({ "seed": seed, "k": k, "trace": trace }))
                .collect();
            write_json(
                &out.join("sweep_k.json"),
                &json!({
                    "config_digest": digest,
                    "ece_confidence": confidence,
                    "rows": res.rows,
                    "trends": trends,
                    "mean_spearman_rho": res.mean_trend(),
                    "traces": traces,
                }),
            )?;
        }
    }
    println!(
        "sweep-k: {} rows, mean Spearman(K, MORE ECE) = {:.4}",
        res.rows.len(),
        res.mean_trend()
    );
    Ok(())
}

pub fn study(cfg: &ExperimentConfig, out: &Path, format: Format) -> CliResult<()> {
    let digest = cfg.digest();
    let confidence = cfg.eval.confidence.to_string();
    let mut res = experiment::study(cfg)?;
    res.results.sort_by(|a, b| (a.seed, &a.rm_id).cmp(&(b.seed, &b.rm_id)));
    create_dir(out)?;

    let summary = json!({
        "spearman_rho": res.spearman_rho,
        "n_rms": res.n_rms,
        "config_digest": digest,
        "seeds": cfg.study.seeds,
    });
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = res
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.rm_id.clone(),
                        r.scheme.clone(),
                        r.seed.to_string(),
                        r.ece.to_string(),
                        r.mean_selected_true_reward.to_string(),
                        r.oracle_mean.to_string(),
                        r.random_mean.to_string(),
                        r.regret.to_string(),
                        confidence.clone(),
                        digest.clone(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("study.csv"),
                &[
                    "rm_id",
                    "scheme",
                    "seed",
                    "ece",
                    "score",
                    "oracle",
                    "random",
                    "regret",
                    "ece_confidence",
                    "config_digest",
                ],
                &rows,
            )?;
            write_text(&out.join("study_summary.json"), &format!("{summary}\n"))?;
        }
        Format::Json => write_json(
            &out.join("study.json"),
            &json!({ "summary": summary, "ece_confidence": confidence, "results": res.results }),
        )?,
    }
    println!("{summary}");
    Ok(())
}
