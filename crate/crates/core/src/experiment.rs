//! Experiment configuration and the seeded cell runners behind the CLI sweeps.
//!
//! A *world* is everything drawn from one seed: the ground-truth spec, the
//! diversified training data and the shared-preference test set. Cells
//! (scheme × K × seed) train on a world and are independent of each other, so
//! they run through [`par::try_map`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{self, AlignmentResult, StudyEntry};
use crate::error::{Error, Result};
use crate::metrics::{self, ConfidenceMode, EvalOptions};
use crate::par::{self, Execution};
use crate::prefdata::{
    synthesize, synthesize_shared_testset, DiversifiedDataset, LabelMode, SynthesisParams, SynthesisSpec,
};
use crate::rewardnet::{Arch, RewardModel};
use crate::trainer::{train, LambdaTrace, Scheme, TrainConfig, TrainedRM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bins: usize,
    pub confidence: ConfidenceMode,
    pub outlier_fence: f64,
    /// Size of the shared-preference test set.
    pub shared_test_n: usize,
    pub shared_label_mode: LabelMode,
    /// Held-out pairs per source written by `synth`.
    pub source_test_n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            bins: metrics::DEFAULT_BINS,
            confidence: ConfidenceMode::Folded,
            outlier_fence: metrics::TUKEY_FENCE,
            shared_test_n: 4000,
            shared_label_mode: LabelMode::BradleyTerry,
            source_test_n: 1000,
        }
    }
}

impl EvalConfig {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            bins: self.bins,
            confidence: self.confidence,
            outlier_fence: self.outlier_fence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Sources used (the first `k` of the world).
    pub k: usize,
    pub seeds: Vec<u64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            k: 4,
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_values: vec![2, 3, 4, 5],
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Candidates per prompt.
    pub s: usize,
    pub n_prompts: usize,
    /// Sources used; the study trains one single-source RM per source.
    pub k: usize,
    pub seeds: Vec<u64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            s: 4,
            n_prompts: 2000,
            k: 4,
            seeds: vec![0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synthesis: SynthesisParams,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub compare: CompareConfig,
    pub sweep: SweepConfig,
    pub study: StudyConfig,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    /// The drifted synthetic benchmark: d=16, K=5, α=2, 4,000 pairs per
    /// source, separable labels, ‖w*‖=0.5, tanh MLP (h=16), lr 0.1.
    fn default() -> Self {
        ExperimentConfig {
            synthesis: SynthesisParams {
                shared_norm: 0.5,
                label_noise_mode: LabelMode::Deterministic,
                ..SynthesisParams::default()
            },
            train: TrainConfig {
                arch: Arch::Mlp { hidden: 16 },
                learning_rate: 0.1,
                ..TrainConfig::default()
            },
            eval: EvalConfig::default(),
            compare: CompareConfig::default(),
            sweep: SweepConfig::default(),
            study: StudyConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.synthesis.validate()?;
        self.train.validate()?;
        self.eval.options().validate()?;
        if self.eval.shared_test_n == 0 {
            return Err(Error::Config("eval.shared_test_n must be >= 1".into()));
        }
        if self.study.s < 2 {
            return Err(Error::Config("study.s must be >= 2".into()));
        }
        Ok(())
    }

    /// Same experiment with every seed source pinned to `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.synthesis.seed = seed;
        c.train.seed = seed;
        c
    }

    /// SHA-256 of the canonical JSON form, first 16 hex digits.
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

/// Stable short digest of any serialisable value.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config values serialise to JSON");
    let hash = Sha256::digest(&json);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Everything drawn from one seed.
#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub spec: SynthesisSpec,
    pub train: DiversifiedDataset,
    pub shared_test: DiversifiedDataset,
}

impl World {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let params = SynthesisParams {
            seed,
            ..cfg.synthesis.clone()
        };
        let spec = params.resolve()?;
        let train = synthesize(&spec)?;
        let shared_test = synthesize_shared_testset(&spec, cfg.eval.shared_test_n, cfg.eval.shared_label_mode, seed)?;
        Ok(World {
            seed,
            spec,
            train,
            shared_test,
        })
    }

    /// Held-out pairs for every source, drawn from streams disjoint from training.
    pub fn source_testset(&self, n_per_source: usize) -> Result<DiversifiedDataset> {
        let spec = SynthesisSpec {
            n_per_source,
            seed: self.seed ^ HELD_OUT_SALT,
            ..self.spec.clone()
        };
        synthesize(&spec)
    }

    /// Linear model scoring by the shared weight.
    pub fn oracle(&self) -> Result<RewardModel> {
        RewardModel::linear(self.spec.shared_weight.to_vec(), 0.0)
    }
}

const HELD_OUT_SALT: u64 = 0xA076_1D64_78BD_642F;

/// Shared-test-set metrics for one trained cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub scheme: Scheme,
    pub seed: u64,
    pub k: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub mean_abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub metrics: CellMetrics,
    pub trained: TrainedRM,
}

/// Trains `scheme` on the first `k` sources of `world` and scores it on the shared test set.
pub fn run_cell(cfg: &ExperimentConfig, world: &World, scheme: Scheme, k: usize) -> Result<Cell> {
    let data = world.train.first_sources(k)?;
    let trained = train(&data, &cfg.train.with_scheme(scheme).with_seed(world.seed))?;
    let metrics = shared_metrics(cfg, world, &trained.model, scheme, k)?;
    Ok(Cell { metrics, trained })
}

fn shared_metrics(cfg: &ExperimentConfig, world: &World, model: &RewardModel, scheme: Scheme, k: usize) -> Result<CellMetrics> {
    let diffs = metrics::reward_differences(model, &world.shared_test)?.concat();
    let cal = metrics::ece_of_differences(&diffs, cfg.eval.confidence, cfg.eval.bins)?;
    Ok(CellMetrics {
        scheme,
        seed: world.seed,
        k,
        accuracy: diffs.iter().filter(|d| **d > 0.0).count() as f64 / diffs.len() as f64,
        ece: cal.ece,
        mean_abs_diff: diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64,
    })
}

fn build_worlds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<World>> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    par::try_map(cfg.execution, seeds, |&s| World::build(cfg, s))
}

fn check_k(cfg: &ExperimentConfig, k: usize) -> Result<()> {
    if k < 1 || k > cfg.synthesis.k {
        return Err(Error::Config(format!(
            "K = {k} outside [1, {}] available sources",
            cfg.synthesis.k
        )));
    }
    Ok(())
}

/// MultiTask vs MORE on the first `compare.k` sources, one pair of rows per seed.
pub fn compare_schemes(cfg: &ExperimentConfig) -> Result<Vec<CellMetrics>> {
    cfg.validate()?;
    check_k(cfg, cfg.compare.k)?;
    let worlds = build_worlds(cfg, &cfg.compare.seeds)?;
    let cells: Vec<(&World, Scheme)> = worlds
        .iter()
        .flat_map(|w| [(w, Scheme::MultiTask), (w, Scheme::More)])
        .collect();
    par::try_map(cfg.execution, &cells, |&(w, s)| {
        run_cell(cfg, w, s, cfg.compare.k).map(|c| c.metrics)
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Rows ordered by (seed, K, scheme).
    pub rows: Vec<CellMetrics>,
    /// Per seed: Spearman rho of (K, MORE shared-test ECE).
    pub trends: Vec<(u64, f64)>,
    /// MORE λ traces keyed by (seed, K).
    pub traces: Vec<(u64, usize, LambdaTrace)>,
}

impl SweepOutput {
    pub fn mean_trend(&self) -> f64 {
        self.trends.iter().map(|t| t.1).sum::<f64>() / self.trends.len() as f64
    }
}

/// MORE and MultiTask for every K in `sweep.k_values` and every seed.
pub fn sweep_k(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let ks = &cfg.sweep.k_values;
    if ks.len() < 2 {
        return Err(Error::Config("sweep needs at least two K values".into()));
    }
    for &k in ks {
        if k < 2 {
            return Err(Error::Config(format!("sweep K = {k} must be >= 2")));
        }
        check_k(cfg, k)?;
    }
    let worlds = build_worlds(cfg, &cfg.sweep.seeds)?;
    let cells: Vec<(&World, usize, Scheme)> = worlds
        .iter()
        .flat_map(|w| {
            ks.iter()
                .flat_map(move |&k| [(w, k, Scheme::More), (w, k, Scheme::MultiTask)])
        })
        .collect();
    let done = par::try_map(cfg.execution, &cells, |&(w, k, s)| run_cell(cfg, w, s, k))?;

    let mut rows = Vec::with_capacity(done.len());
    let mut traces = Vec::new();
    for c in done {
        if c.metrics.scheme == Scheme::More {
            traces.push((c.metrics.seed, c.metrics.k, c.trained.trace));
        }
        rows.push(c.metrics);
    }
    let trends = cfg
        .sweep
        .seeds
        .iter()
        .map(|&seed| {
            let (kx, ey): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.seed == seed && r.scheme == Scheme::More)
                .map(|r| (r.k as f64, r.ece))
                .unzip();
            metrics::spearman(&kx, &ey).map(|rho| (seed, rho))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput { rows, trends, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    /// Trained RMs followed by one `oracle` reference row per seed.
    pub results: Vec<AlignmentResult>,
    /// Correlation over the trained RMs only.
    pub spearman_rho: f64,
    pub n_rms: usize,
}

/// Single per source, MultiTask and MORE for every study seed, then the ECE ↔ alignment correlation.
pub fn study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    check_k(cfg, cfg.study.k)?;
    let worlds = build_worlds(cfg, &cfg.study.seeds)?;
    let mut schemes: Vec<Scheme> = (0..cfg.study.k).map(Scheme::Single).collect();
    schemes.extend([Scheme::MultiTask, Scheme::More]);
    let cells: Vec<(&World, Scheme)> = worlds
        .iter()
        .flat_map(|w| schemes.iter().map(move |&s| (w, s)))
        .collect();
    let study_cells = par::try_map(cfg.execution, &cells, |&(w, s)| -> Result<_> {
        let data = w.train.first_sources(cfg.study.k)?;
        let trained = train(&data, &cfg.train.with_scheme(s).with_seed(w.seed))?;
        let entry = StudyEntry {
            rm_id: format!("{}-s{}", s.tag(), w.seed),
            scheme: s.to_string(),
            seed: w.seed,
            model: trained.model,
        };
        let pool = alignment::generate_candidates(&w.spec, cfg.study.n_prompts, cfg.study.s, w.seed)?;
        alignment::assess(&entry, &pool, &w.shared_test, cfg.eval.confidence, cfg.eval.bins)
    })?;
    let rho = alignment::correlate(&study_cells)?;
    let n_rms = study_cells.len();
    let mut results = study_cells;
    for w in &worlds {
        let entry = StudyEntry {
            rm_id: format!("oracle-s{}", w.seed),
            scheme: "oracle".into(),
            seed: w.seed,
            model: w.oracle()?,
        };
        let pool = alignment::generate_candidates(&w.spec, cfg.study.n_prompts, cfg.study.s, w.seed)?;
        results.push(alignment::assess(&entry, &pool, &w.shared_test, cfg.eval.confidence, cfg.eval.bins)?);
    }
    Ok(StudyOutput {
        results,
        spearman_rho: rho,
        n_rms,
    })
}
