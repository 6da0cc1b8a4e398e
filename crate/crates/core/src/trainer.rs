//! Single, MultiTask and MORE training loops plus the averaging ensemble.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math;
use crate::moosolver::{self, GradientSet, SimplexWeights, SolverOptions};
use crate::prefdata::{BatchSampler, DiverseBatch, DiversifiedDataset, PreferencePair};
use crate::rewardnet::{Arch, GradScope, Gradient, RewardModel, Scorer};

/// Training scheme; parses from `single:<i>`, `multitask` or `more`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Single(usize),
    MultiTask,
    More,
}

impl Scheme {
    /// Filename-friendly tag.
    pub fn tag(&self) -> String {
        match self {
            Scheme::Single(i) => format!("single{i}"),
            Scheme::MultiTask => "multitask".into(),
            Scheme::More => "more".into(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Single(i) => write!(f, "single:{i}"),
            Scheme::MultiTask => f.write_str("multitask"),
            Scheme::More => f.write_str("more"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multitask" => Ok(Scheme::MultiTask),
            "more" => Ok(Scheme::More),
            _ => s
                .strip_prefix("single:")
                .and_then(|i| i.parse().ok())
                .map(Scheme::Single)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown scheme `{s}` (expected single:<i>, multitask or more)"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    #[default]
    Solve,
    Fixed(SimplexWeights),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub per_source_batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub arch: Arch,
    pub lambda_mode: LambdaMode,
    /// Start each solve from the previous step's λ.
    pub warm_start: bool,
    pub solver: SolverOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scheme: Scheme::More,
            per_source_batch: 16,
            epochs: 1,
            learning_rate: 0.05,
            seed: 0,
            arch: Arch::Linear,
            lambda_mode: LambdaMode::Solve,
            warm_start: false,
            solver: SolverOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.per_source_batch == 0 {
            return Err(Error::Config("per_source_batch must be >= 1".into()));
        }
        if let Arch::Mlp { hidden: 0 } = self.arch {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        self.solver.validate()
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        TrainConfig {
            scheme,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRecord {
    pub step: usize,
    pub lambda: Vec<f64>,
    pub norm_sq: f64,
    pub losses: Vec<f64>,
    /// `‖g_i‖²` of each source's head gradient.
    pub head_norms_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LambdaTrace {
    pub k: usize,
    pub records: Vec<LambdaRecord>,
}

impl LambdaTrace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with columns `step, lambda_0.., norm_sq, loss_0..` and any `extra` trailing columns.
    pub fn write_csv(&self, mut out: impl Write, extra: &[(&str, String)]) -> std::io::Result<()> {
        let mut header = vec!["step".to_string()];
        header.extend((0..self.k).map(|i| format!("lambda_{i}")));
        header.push("norm_sq".into());
        header.extend((0..self.k).map(|i| format!("loss_{i}")));
        header.extend(extra.iter().map(|(k, _)| k.to_string()));
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.step.to_string()];
            row.extend(r.lambda.iter().map(f64::to_string));
            row.push(r.norm_sq.to_string());
            row.extend(r.losses.iter().map(f64::to_string));
            row.extend(extra.iter().map(|(_, v)| v.clone()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRM {
    pub model: RewardModel,
    pub config: TrainConfig,
    pub trace: LambdaTrace,
    /// Mean ranking loss over all training pairs before the first step.
    pub initial_loss: f64,
    /// Mean ranking loss over all training pairs after the last step.
    pub final_loss: f64,
    /// Mean per-step objective for each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// What a training step did, handed to [`train_observed`] observers.
#[derive(Debug)]
pub struct StepInfo<'a> {
    pub step: usize,
    /// Objective at the pre-step parameters.
    pub loss: f64,
    pub update: &'a Gradient,
    pub model: &'a RewardModel,
}

pub fn train(dataset: &DiversifiedDataset, config: &TrainConfig) -> Result<TrainedRM> {
    train_observed(dataset, config, |_| {})
}

/// Runs [`train`] and calls `observer` after every parameter update.
pub fn train_observed(
    dataset: &DiversifiedDataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&StepInfo<'_>),
) -> Result<TrainedRM> {
    config.validate()?;
    let owned;
    let data = match config.scheme {
        Scheme::Single(i) => {
            owned = dataset.single_source(i)?;
            &owned
        }
        Scheme::MultiTask | Scheme::More => dataset,
    };
    if data.is_empty() || data.groups().iter().any(Vec::is_empty) {
        return Err(Error::Empty("training dataset"));
    }
    if let (Scheme::More, LambdaMode::Fixed(w)) = (config.scheme, &config.lambda_mode) {
        check_dim(data.k(), w.k())?;
    }

    let mut model = RewardModel::init(config.arch, data.d(), config.seed)?;
    let all_pairs: Vec<&PreferencePair> = data.pairs().collect();
    let initial_loss = model.ranking_loss(&all_pairs)?;
    let mut sampler = BatchSampler::new(data, config.per_source_batch, sampler_seed(config.seed))?;
    let steps_per_epoch = sampler.steps_per_epoch();
    let mut trace = LambdaTrace {
        k: if config.scheme == Scheme::More { data.k() } else { 0 },
        records: Vec::new(),
    };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut prev_lambda: Option<SimplexWeights> = None;
    let mut step = 0;

    for _ in 0..config.epochs {
        let mut epoch_sum = 0.0;
        for _ in 0..steps_per_epoch {
            let batch = sampler.next_batch(data);
            let (loss, grad) = match config.scheme {
                Scheme::Single(_) | Scheme::MultiTask => model.loss_and_gradient(&batch.union(), GradScope::Full)?,
                Scheme::More => {
                    let (loss, grad, record) = more_step(&model, &batch, config, prev_lambda.as_ref(), step)?;
                    if config.warm_start {
                        prev_lambda = Some(SimplexWeights::new(record.lambda.clone())?);
                    }
                    trace.records.push(record);
                    (loss, grad)
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            model.apply_update(&grad, config.learning_rate)?;
            observer(&StepInfo {
                step,
                loss,
                update: &grad,
                model: &model,
            });
            epoch_sum += loss;
            step += 1;
        }
        epoch_losses.push(epoch_sum / steps_per_epoch as f64);
    }

    let final_loss = model.ranking_loss(&all_pairs)?;
    Ok(TrainedRM {
        model,
        config: config.clone(),
        trace,
        initial_loss,
        final_loss,
        epoch_losses,
        steps: step,
    })
}

fn sampler_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5851_F42D_4C95_7F2D
}

/// One MORE step: λ from head-only per-source gradients, applied to the full ones.
fn more_step(
    model: &RewardModel,
    batch: &DiverseBatch<'_>,
    config: &TrainConfig,
    warm: Option<&SimplexWeights>,
    step: usize,
) -> Result<(f64, Gradient, LambdaRecord)> {
    let head = model.head_len();
    let mut losses = Vec::with_capacity(batch.k());
    let mut fulls = Vec::with_capacity(batch.k());
    for sub in &batch.sub_batches {
        let (l, g) = model
            .loss_and_gradient(sub, GradScope::Full)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss { step },
                other => other,
            })?;
        losses.push(l);
        fulls.push(g);
    }
    // head-only gradients are the head prefix of the full ones
    let heads = GradientSet::new(
        fulls.iter().map(|g| g.values[..head].to_vec()).collect(),
        GradScope::HeadOnly,
    )?;
    let (lambda, norm_sq) = match &config.lambda_mode {
        LambdaMode::Solve => {
            let s = moosolver::solve(&heads, &config.solver, warm)?;
            (s.weights, s.norm_sq)
        }
        LambdaMode::Fixed(w) => {
            let n = moosolver::combined_norm(&heads, w)?;
            (w.clone(), n)
        }
    };
    let mut grad = Gradient::zeros(model.arch(), model.param_count(GradScope::Full), GradScope::Full);
    let mut loss = 0.0;
    for ((l, g), &w) in losses.iter().zip(&fulls).zip(lambda.as_slice()) {
        grad.add_scaled(w, g)?;
        loss += w * l;
    }
    let record = LambdaRecord {
        step,
        lambda: lambda.as_slice().to_vec(),
        norm_sq,
        losses,
        head_norms_sq: heads.grads().iter().map(|g| math::norm_sq(g)).collect(),
    };
    Ok((loss, grad, record))
}

/// `θ ← θ − lr · grad`, returning the updated model.
pub fn sgd_step(model: &RewardModel, grad: &Gradient, learning_rate: f64) -> Result<RewardModel> {
    let mut m = model.clone();
    m.apply_update(grad, learning_rate)?;
    Ok(m)
}

/// Averaging baseline: mean of the member models' reward differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    models: Vec<RewardModel>,
}

impl Ensemble {
    pub fn new(models: Vec<RewardModel>) -> Result<Self> {
        let first = models.first().ok_or(Error::Empty("ensemble"))?;
        let d = first.d();
        for m in &models {
            check_dim(d, m.d())?;
        }
        Ok(Ensemble { models })
    }

    pub fn models(&self) -> &[RewardModel] {
        &self.models
    }
}

impl Scorer for Ensemble {
    fn dim(&self) -> usize {
        self.models[0].d()
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.models.iter().map(|m| m.score(x)).sum::<f64>() / self.models.len() as f64
    }

    fn pair_difference(&self, pair: &PreferencePair) -> f64 {
        self.models.iter().map(|m| m.pair_difference(pair)).sum::<f64>() / self.models.len() as f64
    }
}

pub fn ensemble_average_reward(models: &[RewardModel], pair: &PreferencePair) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let mut total = 0.0;
    for m in models {
        total += m.reward_difference(pair)?;
    }
    Ok(total / models.len() as f64)
}
