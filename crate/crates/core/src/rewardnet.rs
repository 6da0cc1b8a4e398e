//! Reward models, the Bradley-Terry ranking loss and its analytic gradients.
//!
//! Parameters are laid out flat as
//! `[head_weights.., head_bias, hidden_weights (row-major h×d).., hidden_bias..]`;
//! the first `head_len()` entries form the reward head. For the linear
//! architecture the head is the whole model.

use std::borrow::Borrow;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{all_finite, dot, sigmoid, softplus};
use crate::prefdata::{FeatureVector, PreferencePair};

const HIDDEN_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    #[default]
    Linear,
    /// One tanh hidden layer of width `hidden`.
    Mlp { hidden: usize },
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arch::Linear => write!(f, "linear"),
            Arch::Mlp { hidden } => write!(f, "mlp{hidden}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradScope {
    Full,
    /// Head weights and bias only, hidden activations held fixed.
    HeadOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub arch: Arch,
    pub scope: GradScope,
}

impl Gradient {
    pub fn zeros(arch: Arch, len: usize, scope: GradScope) -> Self {
        Gradient {
            values: vec![0.0; len],
            arch,
            scope,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &Gradient) -> Result<()> {
        check_dim(self.len(), other.len())?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    arch: Arch,
    d: usize,
    head_weights: Vec<f64>,
    head_bias: f64,
    hidden_weights: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl RewardModel {
    /// Zero head; MLP hidden weights ~ N(0, 0.01²) from `seed`, hidden bias zero.
    pub fn init(arch: Arch, d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("feature dimension must be >= 1".into()));
        }
        match arch {
            Arch::Linear => Ok(RewardModel {
                arch,
                d,
                head_weights: vec![0.0; d],
                head_bias: 0.0,
                hidden_weights: Vec::new(),
                hidden_bias: Vec::new(),
            }),
            Arch::Mlp { hidden } => {
                if hidden == 0 {
                    return Err(Error::Config("hidden width must be >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let hidden_weights = (0..hidden * d)
                    .map(|_| HIDDEN_INIT_STD * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Ok(RewardModel {
                    arch,
                    d,
                    head_weights: vec![0.0; hidden],
                    head_bias: 0.0,
                    hidden_weights,
                    hidden_bias: vec![0.0; hidden],
                })
            }
        }
    }

    pub fn linear(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("feature dimension must be >= 1".into()));
        }
        let m = RewardModel {
            arch: Arch::Linear,
            d: weights.len(),
            head_weights: weights,
            head_bias: bias,
            hidden_weights: Vec::new(),
            hidden_bias: Vec::new(),
        };
        m.check_finite()?;
        Ok(m)
    }

    /// `hidden_weights` is row-major `h × d`.
    pub fn mlp(
        d: usize,
        hidden_weights: Vec<f64>,
        hidden_bias: Vec<f64>,
        head_weights: Vec<f64>,
        head_bias: f64,
    ) -> Result<Self> {
        let h = head_weights.len();
        if d == 0 || h == 0 {
            return Err(Error::Config("d and hidden width must be >= 1".into()));
        }
        check_dim(h * d, hidden_weights.len())?;
        check_dim(h, hidden_bias.len())?;
        let m = RewardModel {
            arch: Arch::Mlp { hidden: h },
            d,
            head_weights,
            head_bias,
            hidden_weights,
            hidden_bias,
        };
        m.check_finite()?;
        Ok(m)
    }

    fn check_finite(&self) -> Result<()> {
        if all_finite(&self.head_weights)
            && self.head_bias.is_finite()
            && all_finite(&self.hidden_weights)
            && all_finite(&self.hidden_bias)
        {
            Ok(())
        } else {
            Err(Error::NonFinite("model parameters".into()))
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.head_weights
    }

    pub fn head_bias(&self) -> f64 {
        self.head_bias
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.hidden_weights
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    /// Number of head parameters (weights plus bias).
    pub fn head_len(&self) -> usize {
        self.head_weights.len() + 1
    }

    pub fn param_count(&self, scope: GradScope) -> usize {
        match scope {
            GradScope::HeadOnly => self.head_len(),
            GradScope::Full => self.head_len() + self.hidden_weights.len() + self.hidden_bias.len(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count(GradScope::Full));
        p.extend_from_slice(&self.head_weights);
        p.push(self.head_bias);
        p.extend_from_slice(&self.hidden_weights);
        p.extend_from_slice(&self.hidden_bias);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.param_count(GradScope::Full), params.len())?;
        if !all_finite(params) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        let h = self.head_weights.len();
        let hw = self.hidden_weights.len();
        self.head_weights.copy_from_slice(&params[..h]);
        self.head_bias = params[h];
        self.hidden_weights.copy_from_slice(&params[h + 1..h + 1 + hw]);
        self.hidden_bias.copy_from_slice(&params[h + 1 + hw..]);
        Ok(())
    }

    pub fn with_bias_shift(&self, shift: f64) -> Self {
        let mut m = self.clone();
        m.head_bias += shift;
        m
    }

    /// Scales the head weights (not the bias) by `factor`.
    pub fn with_head_scale(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.head_weights.iter_mut().for_each(|w| *w *= factor);
        m
    }

    /// Head inputs for `x`: `x` itself for linear, `tanh(Wx + c)` for MLP.
    pub fn hidden_state(&self, x: &[f64]) -> Vec<f64> {
        match self.arch {
            Arch::Linear => x.to_vec(),
            Arch::Mlp { .. } => self
                .hidden_weights
                .chunks_exact(self.d)
                .zip(&self.hidden_bias)
                .map(|(row, b)| (dot(row, x) + b).tanh())
                .collect(),
        }
    }

    /// Reward without the dimension check.
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match self.arch {
            Arch::Linear => dot(&self.head_weights, x) + self.head_bias,
            Arch::Mlp { .. } => {
                let mut r = self.head_bias;
                for ((row, b), a) in self
                    .hidden_weights
                    .chunks_exact(self.d)
                    .zip(&self.hidden_bias)
                    .zip(&self.head_weights)
                {
                    r += a * (dot(row, x) + b).tanh();
                }
                r
            }
        }
    }

    pub fn reward(&self, features: &FeatureVector) -> Result<f64> {
        check_dim(self.d, features.dim())?;
        Ok(self.score(features))
    }

    pub fn reward_difference(&self, pair: &PreferencePair) -> Result<f64> {
        check_dim(self.d, pair.winner.dim())?;
        check_dim(self.d, pair.loser.dim())?;
        Ok(self.score_difference(pair))
    }

    /// Winner-minus-loser reward. The head bias cancels, so it is left out.
    pub(crate) fn score_difference(&self, pair: &PreferencePair) -> f64 {
        match self.arch {
            Arch::Linear => self
                .head_weights
                .iter()
                .zip(pair.winner.iter().zip(pair.loser.iter()))
                .map(|(w, (a, b))| w * (a - b))
                .sum(),
            Arch::Mlp { .. } => self
                .hidden_weights
                .chunks_exact(self.d)
                .zip(&self.hidden_bias)
                .zip(&self.head_weights)
                .map(|((row, b), a)| a * ((dot(row, &pair.winner) + b).tanh() - (dot(row, &pair.loser) + b).tanh()))
                .sum(),
        }
    }

    fn check_pairs<P: Borrow<PreferencePair>>(&self, pairs: &[P]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::Empty("pair list"));
        }
        for p in pairs {
            let p = p.borrow();
            check_dim(self.d, p.winner.dim())?;
            check_dim(self.d, p.loser.dim())?;
        }
        Ok(())
    }

    /// Mean of `-ln σ(Δr)` over `pairs`.
    pub fn ranking_loss<P: Borrow<PreferencePair>>(&self, pairs: &[P]) -> Result<f64> {
        self.check_pairs(pairs)?;
        let total: f64 = pairs
            .iter()
            .map(|p| softplus(-self.score_difference(p.borrow())))
            .sum();
        Ok(total / pairs.len() as f64)
    }

    pub fn ranking_loss_gradient<P: Borrow<PreferencePair>>(
        &self,
        pairs: &[P],
        scope: GradScope,
    ) -> Result<Gradient> {
        self.loss_and_gradient(pairs, scope).map(|(_, g)| g)
    }

    /// Mean ranking loss and its gradient in one pass.
    ///
    /// Each pair contributes `-σ(-Δr) · (∇r(winner) − ∇r(loser)) / n`.
    pub fn loss_and_gradient<P: Borrow<PreferencePair>>(
        &self,
        pairs: &[P],
        scope: GradScope,
    ) -> Result<(f64, Gradient)> {
        self.check_pairs(pairs)?;
        let n = pairs.len() as f64;
        let mut grad = Gradient::zeros(self.arch, self.param_count(scope), scope);
        let mut loss = 0.0;
        let h = self.head_weights.len();

        match self.arch {
            Arch::Linear => {
                for p in pairs {
                    let p = p.borrow();
                    let dr = self.score_difference(p);
                    loss += softplus(-dr);
                    let coef = -sigmoid(-dr) / n;
                    for (g, (a, b)) in grad.values[..h].iter_mut().zip(p.winner.iter().zip(p.loser.iter())) {
                        *g += coef * (a - b);
                    }
                }
            }
            Arch::Mlp { .. } => {
                let d = self.d;
                let (head, rest) = grad.values.split_at_mut(h + 1);
                let (g_hw, g_hb) = if scope == GradScope::Full {
                    let (a, b) = rest.split_at_mut(h * d);
                    (a, b)
                } else {
                    (&mut [][..], &mut [][..])
                };
                for p in pairs {
                    let p = p.borrow();
                    let zw = self.hidden_state(&p.winner);
                    let zl = self.hidden_state(&p.loser);
                    let dr: f64 = self
                        .head_weights
                        .iter()
                        .zip(zw.iter().zip(&zl))
                        .map(|(a, (w, l))| a * (w - l))
                        .sum();
                    loss += softplus(-dr);
                    let coef = -sigmoid(-dr) / n;
                    for j in 0..h {
                        head[j] += coef * (zw[j] - zl[j]);
                    }
                    if scope == GradScope::Full {
                        for j in 0..h {
                            let cw = coef * self.head_weights[j] * (1.0 - zw[j] * zw[j]);
                            let cl = coef * self.head_weights[j] * (1.0 - zl[j] * zl[j]);
                            if cw == 0.0 && cl == 0.0 {
                                continue;
                            }
                            let row = &mut g_hw[j * d..(j + 1) * d];
                            for ((g, xw), xl) in row.iter_mut().zip(p.winner.iter()).zip(p.loser.iter()) {
                                *g += cw * xw - cl * xl;
                            }
                            g_hb[j] += cw - cl;
                        }
                    }
                }
            }
        }
        // head bias gradient stays exactly zero: it cancels in every Δr
        let loss = loss / n;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite("ranking loss".into()));
        }
        Ok((loss, grad))
    }

    /// In-place `θ ← θ − lr · grad` over the full parameter vector.
    pub(crate) fn apply_update(&mut self, grad: &Gradient, learning_rate: f64) -> Result<()> {
        if grad.scope != GradScope::Full {
            return Err(Error::Config("updates require a full-scope gradient".into()));
        }
        check_dim(self.param_count(GradScope::Full), grad.len())?;
        if !grad.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let h = self.head_weights.len();
        let hw = self.hidden_weights.len();
        let g = &grad.values;
        for (p, gi) in self.head_weights.iter_mut().zip(&g[..h]) {
            *p -= learning_rate * gi;
        }
        self.head_bias -= learning_rate * g[h];
        for (p, gi) in self.hidden_weights.iter_mut().zip(&g[h + 1..h + 1 + hw]) {
            *p -= learning_rate * gi;
        }
        for (p, gi) in self.hidden_bias.iter_mut().zip(&g[h + 1 + hw..]) {
            *p -= learning_rate * gi;
        }
        Ok(())
    }
}

/// Anything that assigns a scalar reward to a feature vector.
pub trait Scorer: Sync {
    fn dim(&self) -> usize;

    /// Reward without the dimension check.
    fn score(&self, x: &[f64]) -> f64;

    /// Winner-minus-loser reward, unchecked.
    fn pair_difference(&self, pair: &PreferencePair) -> f64 {
        self.score(&pair.winner) - self.score(&pair.loser)
    }

    fn checked_difference(&self, pair: &PreferencePair) -> Result<f64> {
        check_dim(self.dim(), pair.winner.dim())?;
        check_dim(self.dim(), pair.loser.dim())?;
        Ok(self.pair_difference(pair))
    }
}

impl Scorer for RewardModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn score(&self, x: &[f64]) -> f64 {
        RewardModel::score(self, x)
    }

    fn pair_difference(&self, pair: &PreferencePair) -> f64 {
        self.score_difference(pair)
    }
}

/// On-disk model checkpoint (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arch: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_bias: Option<Vec<f64>>,
    pub train_config_digest: String,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_model(model: &RewardModel, train_config_digest: impl Into<String>, seed: u64) -> Self {
        let (arch, h, hidden_weights, hidden_bias) = match model.arch {
            Arch::Linear => ("linear".to_string(), None, None, None),
            Arch::Mlp { hidden } => (
                "mlp".to_string(),
                Some(hidden),
                Some(
                    model
                        .hidden_weights
                        .chunks_exact(model.d)
                        .map(<[f64]>::to_vec)
                        .collect(),
                ),
                Some(model.hidden_bias.clone()),
            ),
        };
        Checkpoint {
            arch,
            d: model.d,
            h,
            head_weights: model.head_weights.clone(),
            head_bias: model.head_bias,
            hidden_weights,
            hidden_bias,
            train_config_digest: train_config_digest.into(),
            seed,
        }
    }

    pub fn to_model(&self) -> Result<RewardModel> {
        match self.arch.as_str() {
            "linear" => {
                check_dim(self.d, self.head_weights.len())?;
                RewardModel::linear(self.head_weights.clone(), self.head_bias)
            }
            "mlp" => {
                let h = self.h.ok_or_else(|| Error::Config("mlp checkpoint without h".into()))?;
                check_dim(h, self.head_weights.len())?;
                let rows = self
                    .hidden_weights
                    .as_ref()
                    .ok_or_else(|| Error::Config("mlp checkpoint without hidden_weights".into()))?;
                check_dim(h, rows.len())?;
                let mut flat = Vec::with_capacity(h * self.d);
                for r in rows {
                    check_dim(self.d, r.len())?;
                    flat.extend_from_slice(r);
                }
                let bias = self
                    .hidden_bias
                    .clone()
                    .ok_or_else(|| Error::Config("mlp checkpoint without hidden_bias".into()))?;
                RewardModel::mlp(self.d, flat, bias, self.head_weights.clone(), self.head_bias)
            }
            other => Err(Error::Config(format!("unknown arch `{other}`"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}
