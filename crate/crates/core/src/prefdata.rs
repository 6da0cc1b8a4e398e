//! Diversified preference data: synthesis, ingestion, balancing, splitting
//! and per-source batch sampling.
//!
//! A dataset is a list of *sources* (one per preference distribution), each
//! holding its own [`PreferencePair`]s. Every operation here is a pure function
//! of its inputs and an explicit seed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{dot, norm_sq, sigmoid};

/// Dense feature representation of a (prompt, response) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !crate::math::all_finite(&values) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(FeatureVector(values))
    }

    pub fn zeros(d: usize) -> Self {
        FeatureVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn standard_normal(d: usize, rng: &mut impl Rng) -> Self {
        FeatureVector((0..d).map(|_| rng.sample(StandardNormal)).collect())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub winner: FeatureVector,
    pub loser: FeatureVector,
    pub source_id: usize,
}

impl PreferencePair {
    pub fn new(
        prompt_id: impl Into<String>,
        winner: FeatureVector,
        loser: FeatureVector,
        source_id: usize,
    ) -> Result<Self> {
        check_dim(winner.dim(), loser.dim())?;
        Ok(PreferencePair {
            prompt_id: prompt_id.into(),
            winner,
            loser,
            source_id,
        })
    }

    pub fn dim(&self) -> usize {
        self.winner.dim()
    }
}

/// How a source turns reward differences into preference labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Winner drawn with probability σ(r(a) − r(b)).
    #[default]
    BradleyTerry,
    /// Winner is the argmax; ties go to the first candidate.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub source_id: usize,
    pub name: String,
    pub drift_magnitude: f64,
    pub drift_direction: FeatureVector,
    pub label_mode: LabelMode,
}

impl SourceSpec {
    /// Source-specific reward `w*·φ + α·(u·φ)`.
    pub fn true_reward(&self, shared_weight: &[f64], features: &[f64]) -> f64 {
        dot(shared_weight, features) + self.drift_magnitude * dot(&self.drift_direction, features)
    }
}

/// Whether `a` beats `b` under a labelling rule with source reward gap `gap = r(a) − r(b)`.
pub fn draw_label(mode: LabelMode, gap: f64, rng: &mut impl Rng) -> bool {
    match mode {
        LabelMode::Deterministic => gap >= 0.0,
        LabelMode::BradleyTerry => rng.random::<f64>() < sigmoid(gap),
    }
}

/// Fully resolved ground truth for a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub d: usize,
    pub k: usize,
    pub n_per_source: usize,
    pub shared_weight: FeatureVector,
    pub sources: Vec<SourceSpec>,
    pub seed: u64,
}

/// Key/value parameters from which a [`SynthesisSpec`] is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisParams {
    pub d: usize,
    pub k: usize,
    pub n_per_source: usize,
    /// One drift magnitude per source.
    pub alpha: Vec<f64>,
    /// ‖w*‖₂ of the randomly drawn shared weight.
    pub shared_norm: f64,
    pub label_noise_mode: LabelMode,
    /// Project drift directions orthogonal to w*.
    pub orthogonal_drift: bool,
    pub seed: u64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            d: 16,
            k: 5,
            n_per_source: 4000,
            alpha: vec![2.0; 5],
            shared_norm: 1.0,
            label_noise_mode: LabelMode::BradleyTerry,
            orthogonal_drift: true,
            seed: 0,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.n_per_source == 0 {
            return Err(Error::Config("d, k and n_per_source must be >= 1".into()));
        }
        if self.alpha.len() != self.k {
            return Err(Error::Config(format!(
                "alpha has {} entries but k = {}",
                self.alpha.len(),
                self.k
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config("alpha entries must be finite and >= 0".into()));
        }
        if !(self.shared_norm.is_finite() && self.shared_norm > 0.0) {
            return Err(Error::Config("shared_norm must be finite and > 0".into()));
        }
        if self.orthogonal_drift && self.d < 2 {
            return Err(Error::Config("orthogonal drift needs d >= 2".into()));
        }
        Ok(())
    }

    /// Draws w* and the drift directions from `seed`.
    pub fn resolve(&self) -> Result<SynthesisSpec> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let raw = FeatureVector::standard_normal(self.d, &mut rng);
        let scale = self.shared_norm / raw.norm();
        let shared = FeatureVector(raw.iter().map(|v| v * scale).collect());
        let shared_sq = norm_sq(&shared);

        let sources = (0..self.k)
            .map(|i| {
                let mut u = FeatureVector::standard_normal(self.d, &mut rng).into_inner();
                if self.orthogonal_drift {
                    let proj = dot(&u, &shared) / shared_sq;
                    for (ui, wi) in u.iter_mut().zip(shared.iter()) {
                        *ui -= proj * wi;
                    }
                }
                let n = norm_sq(&u).sqrt();
                u.iter_mut().for_each(|v| *v /= n);
                SourceSpec {
                    source_id: i,
                    name: format!("source_{i}"),
                    drift_magnitude: self.alpha[i],
                    drift_direction: FeatureVector(u),
                    label_mode: self.label_noise_mode,
                }
            })
            .collect();

        let spec = SynthesisSpec {
            d: self.d,
            k: self.k,
            n_per_source: self.n_per_source,
            shared_weight: shared,
            sources,
            seed: self.seed,
        };
        spec.validate(self.orthogonal_drift)?;
        Ok(spec)
    }
}

impl SynthesisSpec {
    pub fn validate(&self, orthogonal: bool) -> Result<()> {
        if self.k == 0 || self.n_per_source == 0 {
            return Err(Error::Config("k and n_per_source must be >= 1".into()));
        }
        if self.sources.len() != self.k {
            return Err(Error::Config(format!(
                "{} sources declared for k = {}",
                self.sources.len(),
                self.k
            )));
        }
        check_dim(self.d, self.shared_weight.dim())?;
        if !crate::math::all_finite(&self.shared_weight) {
            return Err(Error::NonFinite("shared weight".into()));
        }
        if self.shared_weight.norm() <= 0.0 {
            return Err(Error::Config("shared weight must be nonzero".into()));
        }
        for s in &self.sources {
            check_dim(self.d, s.drift_direction.dim())?;
            if !s.drift_magnitude.is_finite() || !crate::math::all_finite(&s.drift_direction) {
                return Err(Error::NonFinite(format!("drift of source {}", s.source_id)));
            }
            if s.drift_magnitude < 0.0 {
                return Err(Error::Config("drift magnitude must be >= 0".into()));
            }
            if (s.drift_direction.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "drift direction of source {} is not unit norm",
                    s.source_id
                )));
            }
            if orthogonal
                && dot(&s.drift_direction, &self.shared_weight).abs() / self.shared_weight.norm()
                    > 1e-9
            {
                return Err(Error::Config(format!(
                    "drift direction of source {} is not orthogonal to w*",
                    s.source_id
                )));
            }
        }
        Ok(())
    }

    pub fn shared_reward(&self, features: &[f64]) -> f64 {
        dot(&self.shared_weight, features)
    }
}

fn labelled_pair(
    rng: &mut ChaCha8Rng,
    d: usize,
    mode: LabelMode,
    reward: impl Fn(&[f64]) -> f64,
    prompt_id: String,
    source_id: usize,
) -> PreferencePair {
    let a = FeatureVector::standard_normal(d, rng);
    let b = FeatureVector::standard_normal(d, rng);
    let a_wins = draw_label(mode, reward(&a) - reward(&b), rng);
    let (winner, loser) = if a_wins { (a, b) } else { (b, a) };
    PreferencePair {
        prompt_id,
        winner,
        loser,
        source_id,
    }
}

/// Generates `n_per_source` labelled pairs for every source of `spec`.
///
/// Each source draws from its own ChaCha stream, so source `i` is identical
/// no matter how many other sources are declared.
pub fn synthesize(spec: &SynthesisSpec) -> Result<DiversifiedDataset> {
    spec.validate(false)?;
    let groups = spec
        .sources
        .iter()
        .map(|src| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(src.source_id as u64);
            (0..spec.n_per_source)
                .map(|j| {
                    labelled_pair(
                        &mut rng,
                        spec.d,
                        src.label_mode,
                        |x| src.true_reward(&spec.shared_weight, x),
                        format!("s{}-{j}", src.source_id),
                        src.source_id,
                    )
                })
                .collect()
        })
        .collect();
    DiversifiedDataset::new(
        spec.d,
        spec.sources.iter().map(|s| s.name.clone()).collect(),
        groups,
        Some(spec.sources.clone()),
    )
}

/// Shared-preference test set: labels come from w* alone (no drift).
pub fn synthesize_shared_testset(
    spec: &SynthesisSpec,
    n: usize,
    mode: LabelMode,
    seed: u64,
) -> Result<DiversifiedDataset> {
    if n == 0 {
        return Err(Error::Empty("shared test set size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    let pairs = (0..n)
        .map(|j| {
            labelled_pair(
                &mut rng,
                spec.d,
                mode,
                |x| spec.shared_reward(x),
                format!("shared-{j}"),
                0,
            )
        })
        .collect();
    DiversifiedDataset::new(spec.d, vec!["shared".into()], vec![pairs], None)
}

/// Pairs grouped by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversifiedDataset {
    d: usize,
    names: Vec<String>,
    groups: Vec<Vec<PreferencePair>>,
    sources: Option<Vec<SourceSpec>>,
}

impl DiversifiedDataset {
    pub fn new(
        d: usize,
        names: Vec<String>,
        groups: Vec<Vec<PreferencePair>>,
        sources: Option<Vec<SourceSpec>>,
    ) -> Result<Self> {
        if names.len() != groups.len() {
            return Err(Error::Config(format!(
                "{} source names for {} groups",
                names.len(),
                groups.len()
            )));
        }
        for (i, group) in groups.iter().enumerate() {
            for p in group {
                check_dim(d, p.winner.dim())?;
                check_dim(d, p.loser.dim())?;
                if p.source_id != i {
                    return Err(Error::UnknownSource(p.source_id));
                }
            }
        }
        Ok(DiversifiedDataset {
            d,
            names,
            groups,
            sources,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn group(&self, source_id: usize) -> Result<&[PreferencePair]> {
        self.groups
            .get(source_id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownSource(source_id))
    }

    pub fn groups(&self) -> &[Vec<PreferencePair>] {
        &self.groups
    }

    pub fn sources(&self) -> Option<&[SourceSpec]> {
        self.sources.as_deref()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PreferencePair> {
        self.groups.iter().flatten()
    }

    /// The first `k` sources, keeping ids.
    pub fn first_sources(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::Config(format!(
                "requested {k} sources, dataset has {}",
                self.k()
            )));
        }
        Ok(DiversifiedDataset {
            d: self.d,
            names: self.names[..k].to_vec(),
            groups: self.groups[..k].to_vec(),
            sources: self.sources.as_ref().map(|s| s[..k].to_vec()),
        })
    }

    /// A single source as a one-group dataset (its pairs get source id 0).
    pub fn single_source(&self, source_id: usize) -> Result<Self> {
        let pairs = self
            .group(source_id)?
            .iter()
            .cloned()
            .map(|mut p| {
                p.source_id = 0;
                p
            })
            .collect();
        Ok(DiversifiedDataset {
            d: self.d,
            names: vec![self.names[source_id].clone()],
            groups: vec![pairs],
            sources: self.sources.as_ref().map(|s| {
                let mut src = s[source_id].clone();
                src.source_id = 0;
                vec![src]
            }),
        })
    }

    /// Writes the feature-form JSONL representation, one pair per line.
    ///
    /// `tags` are appended to every record; readers ignore them.
    pub fn write_jsonl(&self, path: &Path, tags: &serde_json::Map<String, serde_json::Value>) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for p in self.pairs() {
            let rec = FeatureRecordOut {
                source: &self.names[p.source_id],
                prompt_id: &p.prompt_id,
                chosen_features: &p.winner,
                rejected_features: &p.loser,
                tags,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize)]
struct FeatureRecordOut<'a> {
    source: &'a str,
    prompt_id: &'a str,
    chosen_features: &'a [f64],
    rejected_features: &'a [f64],
    #[serde(flatten)]
    tags: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct FeatureRecord {
    source: String,
    #[serde(default)]
    prompt_id: Option<String>,
    chosen_features: Vec<f64>,
    rejected_features: Vec<f64>,
}

#[derive(Deserialize)]
struct TextRecord {
    source: String,
    prompt: String,
    chosen: String,
    rejected: String,
}

/// Maps a (prompt, response) text pair to features.
pub trait Featurizer {
    fn dim(&self) -> usize;
    fn featurize(&self, prompt: &str, response: &str) -> FeatureVector;
}

#[derive(Debug, Clone, Copy)]
pub struct HashFeaturizer {
    pub d: usize,
}

impl Featurizer for HashFeaturizer {
    fn dim(&self) -> usize {
        self.d
    }

    fn featurize(&self, prompt: &str, response: &str) -> FeatureVector {
        hash_featurize(prompt, response, self.d)
    }
}

fn fnv1a64(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Signed hashing-trick projection of lowercase alphanumeric tokens, L2-normalised.
///
/// Prompt and response tokens are hashed in separate namespaces. Bucket is
/// `(h >> 1) mod d`, sign is the low bit of `h`. All-empty text gives the zero vector.
pub fn hash_featurize(prompt: &str, response: &str, d: usize) -> FeatureVector {
    let mut v = vec![0.0; d];
    if d == 0 {
        return FeatureVector(v);
    }
    for (ns, text) in [(b"p:", prompt), (b"r:", response)] {
        for tok in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let tok = tok.to_lowercase();
            let h = fnv1a64(&[ns, tok.as_bytes()]);
            let bucket = ((h >> 1) % d as u64) as usize;
            v[bucket] += if h & 1 == 0 { 1.0 } else { -1.0 };
        }
    }
    let n = norm_sq(&v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    FeatureVector(v)
}

/// Reads a JSONL preference file (feature or text form, may be mixed).
///
/// Source names map to dense ids in first-seen order.
pub fn load_jsonl(path: &Path, featurizer: &dyn Featurizer) -> Result<DiversifiedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), featurizer)
}

pub fn read_jsonl(reader: impl BufRead, featurizer: &dyn Featurizer) -> Result<DiversifiedDataset> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<PreferencePair>> = Vec::new();
    let mut d: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let parse_err = |e: serde_json::Error| Error::Parse {
            line: line_no,
            message: e.to_string(),
        };

        let (source, prompt_id, winner, loser) =
            if obj.contains_key("chosen_features") || obj.contains_key("rejected_features") {
                let rec: FeatureRecord = serde_json::from_value(value).map_err(parse_err)?;
                if rec.chosen_features.len() != rec.rejected_features.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: Error::DimensionMismatch {
                            expected: rec.chosen_features.len(),
                            found: rec.rejected_features.len(),
                        }
                        .to_string(),
                    });
                }
                let prompt_id = rec.prompt_id.unwrap_or_else(|| format!("line-{line_no}"));
                let finite = |v: Vec<f64>| {
                    FeatureVector::new(v).map_err(|e| Error::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })
                };
                (
                    rec.source,
                    prompt_id,
                    finite(rec.chosen_features)?,
                    finite(rec.rejected_features)?,
                )
            } else if obj.contains_key("chosen") && obj.contains_key("rejected") {
                let rec: TextRecord = serde_json::from_value(value).map_err(parse_err)?;
                (
                    rec.source,
                    format!("line-{line_no}"),
                    featurizer.featurize(&rec.prompt, &rec.chosen),
                    featurizer.featurize(&rec.prompt, &rec.rejected),
                )
            } else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "unknown record schema".into(),
                });
            };

        let dim = winner.dim();
        match d {
            None => d = Some(dim),
            Some(expected) if expected != dim => {
                return Err(Error::Parse {
                    line: line_no,
                    message: Error::DimensionMismatch {
                        expected,
                        found: dim,
                    }
                    .to_string(),
                })
            }
            _ => {}
        }
        let sid = *ids.entry(source.clone()).or_insert_with(|| {
            names.push(source);
            groups.push(Vec::new());
            names.len() - 1
        });
        groups[sid].push(PreferencePair {
            prompt_id,
            winner,
            loser,
            source_id: sid,
        });
    }

    let d = d.ok_or(Error::Empty("preference file"))?;
    DiversifiedDataset::new(d, names, groups, None)
}

fn source_rng(seed: u64, source_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(source_id as u64);
    rng
}

/// Resizes every source to exactly `n_per_source` pairs.
///
/// Larger sources are subsampled without replacement. Smaller sources keep
/// every original pair once and fill the remainder by drawing with replacement.
pub fn balance(dataset: &DiversifiedDataset, n_per_source: usize, seed: u64) -> Result<DiversifiedDataset> {
    if n_per_source == 0 {
        return Err(Error::Config("n_per_source must be >= 1".into()));
    }
    let groups = dataset
        .groups
        .iter()
        .enumerate()
        .map(|(i, group)| {
            if group.is_empty() {
                return Err(Error::SourceTooSmall {
                    source_name: dataset.names[i].clone(),
                    available: 0,
                });
            }
            let mut rng = source_rng(seed, i);
            let n = group.len();
            let picked: Vec<usize> = if n >= n_per_source {
                index::sample(&mut rng, n, n_per_source).into_vec()
            } else {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.extend((n..n_per_source).map(|_| rng.random_range(0..n)));
                idx.shuffle(&mut rng);
                idx
            };
            Ok(picked.into_iter().map(|j| group[j].clone()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    DiversifiedDataset::new(dataset.d, dataset.names.clone(), groups, dataset.sources.clone())
}

/// Per-source train/test partition; both halves keep all K sources and input order.
pub fn split(
    dataset: &DiversifiedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(DiversifiedDataset, DiversifiedDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut train = Vec::with_capacity(dataset.k());
    let mut test = Vec::with_capacity(dataset.k());
    for (i, group) in dataset.groups.iter().enumerate() {
        let n = group.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::SourceTooSmall {
                source_name: dataset.names[i].clone(),
                available: n,
            });
        }
        let mut rng = source_rng(seed, i);
        let mut is_test = vec![false; n];
        for j in index::sample(&mut rng, n, n_test) {
            is_test[j] = true;
        }
        let (te, tr): (Vec<_>, Vec<_>) = group
            .iter()
            .zip(&is_test)
            .partition(|(_, &t)| t);
        train.push(tr.into_iter().map(|(p, _)| p.clone()).collect());
        test.push(te.into_iter().map(|(p, _)| p.clone()).collect());
    }
    Ok((
        DiversifiedDataset::new(dataset.d, dataset.names.clone(), train, dataset.sources.clone())?,
        DiversifiedDataset::new(dataset.d, dataset.names.clone(), test, dataset.sources.clone())?,
    ))
}

/// One training batch: `per_source` pairs from each of the K sources.
#[derive(Debug, Clone)]
pub struct DiverseBatch<'a> {
    pub sub_batches: Vec<Vec<&'a PreferencePair>>,
}

impl<'a> DiverseBatch<'a> {
    pub fn k(&self) -> usize {
        self.sub_batches.len()
    }

    pub fn len(&self) -> usize {
        self.sub_batches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn union(&self) -> Vec<&'a PreferencePair> {
        self.sub_batches.iter().flatten().copied().collect()
    }
}

/// Epoch-based without-replacement sampler state, one shuffled order per source.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    per_source: usize,
    orders: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(dataset: &DiversifiedDataset, per_source: usize, seed: u64) -> Result<Self> {
        if per_source == 0 {
            return Err(Error::Config("per-source batch size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orders = dataset
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if g.is_empty() {
                    return Err(Error::SourceTooSmall {
                        source_name: dataset.names[i].clone(),
                        available: 0,
                    });
                }
                let mut o: Vec<usize> = (0..g.len()).collect();
                o.shuffle(&mut rng);
                Ok(o)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BatchSampler {
            per_source,
            cursors: vec![0; orders.len()],
            orders,
            rng,
        })
    }

    pub fn per_source(&self) -> usize {
        self.per_source
    }

    /// Batches needed for the largest source to complete one epoch.
    pub fn steps_per_epoch(&self) -> usize {
        self.orders
            .iter()
            .map(|o| o.len().div_ceil(self.per_source))
            .max()
            .unwrap_or(0)
    }

    pub fn next_batch<'a>(&mut self, dataset: &'a DiversifiedDataset) -> DiverseBatch<'a> {
        let sub_batches = (0..self.orders.len())
            .map(|i| {
                let group = &dataset.groups[i];
                (0..self.per_source)
                    .map(|_| {
                        if self.cursors[i] == self.orders[i].len() {
                            self.orders[i].shuffle(&mut self.rng);
                            self.cursors[i] = 0;
                        }
                        let j = self.orders[i][self.cursors[i]];
                        self.cursors[i] += 1;
                        &group[j]
                    })
                    .collect()
            })
            .collect();
        DiverseBatch { sub_batches }
    }
}

/// Draws the next diverse batch from `state`, advancing it.
pub fn sample_diverse_batch<'a>(
    dataset: &'a DiversifiedDataset,
    state: &mut BatchSampler,
) -> DiverseBatch<'a> {
    state.next_batch(dataset)
}
