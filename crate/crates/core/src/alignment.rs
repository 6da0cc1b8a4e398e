//! Best-of-S reject sampling and the ECE ↔ alignment study.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metrics::{ece_of_differences, reward_differences, spearman, ConfidenceMode};
use crate::par::{self, Execution};
use crate::prefdata::{DiversifiedDataset, FeatureVector, SynthesisSpec};
use crate::rewardnet::{RewardModel, Scorer};

/// Candidate responses per prompt, with true shared rewards when known.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    d: usize,
    s: usize,
    candidates: Vec<Vec<FeatureVector>>,
    true_rewards: Option<Vec<Vec<f64>>>,
}

impl CandidatePool {
    pub fn new(
        d: usize,
        candidates: Vec<Vec<FeatureVector>>,
        true_rewards: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let s = candidates.first().map_or(2, Vec::len);
        if s < 2 {
            return Err(Error::Config("at least 2 candidates per prompt are required".into()));
        }
        for c in &candidates {
            check_dim(s, c.len())?;
            for x in c {
                check_dim(d, x.dim())?;
            }
        }
        if let Some(t) = &true_rewards {
            check_dim(candidates.len(), t.len())?;
            for r in t {
                check_dim(s, r.len())?;
            }
        }
        Ok(CandidatePool {
            d,
            s,
            candidates,
            true_rewards,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n_prompts(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Vec<FeatureVector>] {
        &self.candidates
    }

    pub fn true_rewards(&self) -> Option<&[Vec<f64>]> {
        self.true_rewards.as_deref()
    }
}

/// `n_prompts × s` standard-normal candidates scored by the shared weight.
pub fn generate_candidates(spec: &SynthesisSpec, n_prompts: usize, s: usize, seed: u64) -> Result<CandidatePool> {
    if s < 2 {
        return Err(Error::Config(format!("S must be >= 2, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 2);
    let candidates: Vec<Vec<FeatureVector>> = (0..n_prompts)
        .map(|_| {
            (0..s)
                .map(|_| FeatureVector::standard_normal(spec.d, &mut rng))
                .collect()
        })
        .collect();
    let true_rewards = candidates
        .iter()
        .map(|c| c.iter().map(|x| spec.shared_reward(x)).collect())
        .collect();
    CandidatePool::new(spec.d, candidates, Some(true_rewards))
}

/// Per prompt, the index of the highest-scoring candidate (ties to the lowest index).
pub fn reject_sample(scorer: &dyn Scorer, pool: &CandidatePool) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    check_dim(scorer.dim(), pool.d)?;
    Ok(pool
        .candidates
        .iter()
        .map(|c| argmax(c.iter().map(|x| scorer.score(x))))
        .collect())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub mean_selected_true_reward: f64,
    pub oracle_mean: f64,
    pub random_mean: f64,
}

impl AlignmentScore {
    pub fn regret(&self) -> f64 {
        self.oracle_mean - self.mean_selected_true_reward
    }
}

pub fn alignment_score(selections: &[usize], pool: &CandidatePool) -> Result<AlignmentScore> {
    let truth = pool.true_rewards.as_ref().ok_or(Error::MissingTrueRewards)?;
    if truth.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    check_dim(truth.len(), selections.len())?;
    let (mut sel, mut best, mut rand) = (0.0, 0.0, 0.0);
    for (r, &i) in truth.iter().zip(selections) {
        if i >= r.len() {
            return Err(Error::Config(format!("selection {i} out of range")));
        }
        sel += r[i];
        best += r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rand += r.iter().sum::<f64>() / r.len() as f64;
    }
    let n = truth.len() as f64;
    Ok(AlignmentScore {
        mean_selected_true_reward: sel / n,
        oracle_mean: best / n,
        random_mean: rand / n,
    })
}

/// A reward model entered into the study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyEntry {
    pub rm_id: String,
    pub scheme: String,
    pub seed: u64,
    pub model: RewardModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub rm_id: String,
    pub scheme: String,
    pub seed: u64,
    pub ece: f64,
    pub mean_selected_true_reward: f64,
    pub oracle_mean: f64,
    pub random_mean: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub results: Vec<AlignmentResult>,
    pub spearman_rho: f64,
}

/// ECE on `shared_testset` and reject-sampling score on `pool` for one model.
pub fn assess(
    entry: &StudyEntry,
    pool: &CandidatePool,
    shared_testset: &DiversifiedDataset,
    mode: ConfidenceMode,
    bins: usize,
) -> Result<AlignmentResult> {
    let diffs = reward_differences(&entry.model, shared_testset)?.concat();
    let ece = ece_of_differences(&diffs, mode, bins)?.ece;
    let score = alignment_score(&reject_sample(&entry.model, pool)?, pool)?;
    Ok(AlignmentResult {
        rm_id: entry.rm_id.clone(),
        scheme: entry.scheme.clone(),
        seed: entry.seed,
        ece,
        mean_selected_true_reward: score.mean_selected_true_reward,
        oracle_mean: score.oracle_mean,
        random_mean: score.random_mean,
        regret: score.regret(),
    })
}

/// Scores every RM and correlates ECE with the selected true reward.
pub fn ece_alignment_study(
    rms: &[StudyEntry],
    pool: &CandidatePool,
    shared_testset: &DiversifiedDataset,
    mode: ConfidenceMode,
    exec: Execution,
) -> Result<StudyResult> {
    if rms.len() < 3 {
        return Err(Error::Config(format!(
            "the study needs at least 3 reward models, got {}",
            rms.len()
        )));
    }
    let results = par::try_map(exec, rms, |e| {
        assess(e, pool, shared_testset, mode, crate::metrics::DEFAULT_BINS)
    })?;
    let rho = correlate(&results)?;
    Ok(StudyResult {
        results,
        spearman_rho: rho,
    })
}

/// Spearman correlation of (ECE, mean selected true reward).
pub fn correlate(results: &[AlignmentResult]) -> Result<f64> {
    let eces: Vec<f64> = results.iter().map(|r| r.ece).collect();
    let scores: Vec<f64> = results.iter().map(|r| r.mean_selected_true_reward).collect();
    spearman(&eces, &scores)
}
