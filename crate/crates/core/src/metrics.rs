//! Preference accuracy, expected calibration error, reward-difference
//! statistics, drift error and rank correlation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{dot, norm_sq, sigmoid};
use crate::prefdata::{DiversifiedDataset, SynthesisSpec};
use crate::rewardnet::{Arch, RewardModel, Scorer};

pub const DEFAULT_BINS: usize = 10;
pub const TUKEY_FENCE: f64 = 1.5;

/// How a reward difference becomes a confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// `max(σ(Δr), σ(−Δr))`; correct iff `Δr > 0`.
    #[default]
    Folded,
    /// `σ(Δr)` against ground truth 1; correct iff `σ(Δr) > 0.5`.
    Literal,
}

impl fmt::Display for ConfidenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfidenceMode::Folded => "folded",
            ConfidenceMode::Literal => "literal",
        })
    }
}

impl FromStr for ConfidenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "folded" => Ok(ConfidenceMode::Folded),
            "literal" => Ok(ConfidenceMode::Literal),
            _ => Err(Error::Config(format!(
                "unknown confidence mode `{s}` (expected folded or literal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub confidence: f64,
    pub predicted: u8,
    pub truth: u8,
}

impl PairPrediction {
    pub fn new(confidence: f64, predicted: u8, truth: u8) -> Result<Self> {
        if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
            return Err(Error::NonFinite(format!("confidence {confidence}")));
        }
        Ok(PairPrediction {
            confidence,
            predicted,
            truth,
        })
    }

    pub fn is_correct(&self) -> bool {
        self.predicted == self.truth
    }
}

/// Literal prediction: `p̂ = σ(Δr)`, `ŷ = [p̂ > 0.5]`, `y = 1`.
pub fn predict(reward_difference: f64) -> Result<PairPrediction> {
    predict_with(reward_difference, ConfidenceMode::Literal)
}

pub fn predict_with(reward_difference: f64, mode: ConfidenceMode) -> Result<PairPrediction> {
    if !reward_difference.is_finite() {
        return Err(Error::NonFinite("reward difference".into()));
    }
    let p = match mode {
        ConfidenceMode::Literal => {
            let p = sigmoid(reward_difference);
            PairPrediction {
                confidence: p,
                predicted: u8::from(p > 0.5),
                truth: 1,
            }
        }
        ConfidenceMode::Folded => PairPrediction {
            confidence: sigmoid(reward_difference.abs()),
            predicted: u8::from(reward_difference > 0.0),
            truth: 1,
        },
    };
    Ok(p)
}

/// Winner-minus-loser reward for every test pair, grouped by source.
pub fn reward_differences(scorer: &dyn Scorer, testset: &DiversifiedDataset) -> Result<Vec<Vec<f64>>> {
    check_dim(scorer.dim(), testset.d())?;
    if testset.is_empty() {
        return Err(Error::Empty("test set"));
    }
    Ok(testset
        .groups()
        .iter()
        .map(|g| g.iter().map(|p| scorer.pair_difference(p)).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: f64,
    pub n: usize,
    /// `None` for sources without test pairs.
    pub per_source: Vec<Option<f64>>,
}

fn accuracy_of(diffs: &[f64]) -> Option<f64> {
    if diffs.is_empty() {
        None
    } else {
        Some(diffs.iter().filter(|d| **d > 0.0).count() as f64 / diffs.len() as f64)
    }
}

pub fn preference_accuracy(scorer: &dyn Scorer, testset: &DiversifiedDataset) -> Result<AccuracyReport> {
    let diffs = reward_differences(scorer, testset)?;
    let pooled: Vec<f64> = diffs.iter().flatten().copied().collect();
    Ok(AccuracyReport {
        overall: accuracy_of(&pooled).unwrap_or(0.0),
        n: pooled.len(),
        per_source: diffs.iter().map(|d| accuracy_of(d)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub acc: Option<f64>,
    pub conf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub m: usize,
    pub n: usize,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

impl CalibrationReport {
    /// Reliability-diagram CSV: `bin_low, bin_high, count, acc, conf` plus `extra` columns.
    /// Empty bins print `absent`.
    pub fn write_reliability_csv(&self, mut out: impl Write, extra: &[(&str, String)]) -> std::io::Result<()> {
        let mut header = String::from("bin_low,bin_high,count,acc,conf");
        for (k, _) in extra {
            header.push(',');
            header.push_str(k);
        }
        writeln!(out, "{header}")?;
        for b in &self.bins {
            let opt = |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |x| x.to_string());
            let mut row = format!("{},{},{},{},{}", b.low, b.high, b.count, opt(b.acc), opt(b.conf));
            for (_, v) in extra {
                row.push(',');
                row.push_str(v);
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Bin index (0-based) for confidence `p`: bin m covers `((m−1)/M, m/M]`, and 0 goes to the first bin.
pub fn bin_index(p: f64, m: usize) -> usize {
    let mf = m as f64;
    let mut idx = ((p * mf).ceil() as usize).clamp(1, m) - 1;
    while idx > 0 && p <= idx as f64 / mf {
        idx -= 1;
    }
    while idx + 1 < m && p > (idx + 1) as f64 / mf {
        idx += 1;
    }
    idx
}

pub fn ece(predictions: &[PairPrediction], m: usize) -> Result<CalibrationReport> {
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if m == 0 {
        return Err(Error::Config("number of bins must be >= 1".into()));
    }
    let mut count = vec![0usize; m];
    let mut correct = vec![0usize; m];
    let mut conf_sum = vec![0.0; m];
    for p in predictions {
        if !(p.confidence.is_finite() && (0.0..=1.0).contains(&p.confidence)) {
            return Err(Error::NonFinite(format!("confidence {}", p.confidence)));
        }
        let b = bin_index(p.confidence, m);
        count[b] += 1;
        correct[b] += usize::from(p.is_correct());
        conf_sum[b] += p.confidence;
    }
    let n = predictions.len();
    let mut ece = 0.0;
    let bins = (0..m)
        .map(|b| {
            let (acc, conf) = if count[b] == 0 {
                (None, None)
            } else {
                let c = count[b] as f64;
                let acc = correct[b] as f64 / c;
                let conf = conf_sum[b] / c;
                ece += c / n as f64 * (acc - conf).abs();
                (Some(acc), Some(conf))
            };
            CalibrationBin {
                low: b as f64 / m as f64,
                high: (b + 1) as f64 / m as f64,
                count: count[b],
                acc,
                conf,
            }
        })
        .collect();
    Ok(CalibrationReport { m, n, bins, ece })
}

/// ECE of reward differences under `mode`.
pub fn ece_of_differences(diffs: &[f64], mode: ConfidenceMode, m: usize) -> Result<CalibrationReport> {
    let preds = diffs
        .iter()
        .map(|&d| predict_with(d, mode))
        .collect::<Result<Vec<_>>>()?;
    ece(&preds, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSummary {
    pub count: usize,
    /// `None` when there are no outliers.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDiffStats {
    pub n: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub positive_outliers: OutlierSummary,
    pub negative_outliers: OutlierSummary,
}

impl RewardDiffStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary statistics and Tukey-fence outliers (`fence`·IQR beyond the quartiles).
pub fn diff_stats(diffs: &[f64], fence: f64) -> Result<RewardDiffStats> {
    if diffs.is_empty() {
        return Err(Error::Empty("reward differences"));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("reward differences".into()));
    }
    let mut sorted = diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (hi, lo) = (q3 + fence * iqr, q1 - fence * iqr);
    let summary = |keep: &dyn Fn(f64) -> bool| {
        let out: Vec<f64> = diffs.iter().copied().filter(|&d| keep(d)).collect();
        OutlierSummary {
            count: out.len(),
            mean: (!out.is_empty()).then(|| out.iter().sum::<f64>() / out.len() as f64),
        }
    };
    let n = diffs.len() as f64;
    Ok(RewardDiffStats {
        n: diffs.len(),
        mean: diffs.iter().sum::<f64>() / n,
        mean_abs: diffs.iter().map(|d| d.abs()).sum::<f64>() / n,
        q1,
        median,
        q3,
        positive_outliers: summary(&|d| d > hi),
        negative_outliers: summary(&|d| d < lo),
    })
}

/// Pooled reward-difference statistics over the whole test set.
pub fn reward_diff_stats(scorer: &dyn Scorer, testset: &DiversifiedDataset) -> Result<RewardDiffStats> {
    let pooled: Vec<f64> = reward_differences(scorer, testset)?.concat();
    diff_stats(&pooled, TUKEY_FENCE)
}

/// Cosine distance between a linear model's head and the shared weight; 1 for the zero model.
pub fn drift_error(model: &RewardModel, spec: &SynthesisSpec) -> Result<f64> {
    if model.arch() != Arch::Linear {
        return Err(Error::NotLinear);
    }
    let w = model.head_weights();
    check_dim(spec.d, w.len())?;
    let nw = norm_sq(w).sqrt();
    if nw == 0.0 {
        return Ok(1.0);
    }
    let ws = &spec.shared_weight;
    Ok(1.0 - dot(w, ws) / (nw * ws.norm()))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_dim(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::Config("spearman needs at least 2 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let mean = (xs.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (a, b) = (a - mean, b - mean);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateRanks);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One row of an evaluation report (one source, or all sources pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub source: String,
    pub n: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub stats: RewardDiffStats,
    pub calibration: CalibrationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub bins: usize,
    pub confidence: ConfidenceMode,
    /// Tukey fence multiplier.
    pub outlier_fence: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bins: DEFAULT_BINS,
            confidence: ConfidenceMode::Folded,
            outlier_fence: TUKEY_FENCE,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::Config("bins must be >= 1".into()));
        }
        if !(self.outlier_fence.is_finite() && self.outlier_fence >= 0.0) {
            return Err(Error::Config("outlier_fence must be >= 0".into()));
        }
        Ok(())
    }
}

fn eval_row(source: String, diffs: &[f64], opts: &EvalOptions) -> Result<EvalRow> {
    let calibration = ece_of_differences(diffs, opts.confidence, opts.bins)?;
    Ok(EvalRow {
        source,
        n: diffs.len(),
        accuracy: accuracy_of(diffs).unwrap_or(0.0),
        ece: calibration.ece,
        stats: diff_stats(diffs, opts.outlier_fence)?,
        calibration,
    })
}

/// Per-source rows (non-empty sources only) followed by the pooled row `all`.
pub fn evaluate(scorer: &dyn Scorer, testset: &DiversifiedDataset, opts: &EvalOptions) -> Result<Vec<EvalRow>> {
    opts.validate()?;
    let diffs = reward_differences(scorer, testset)?;
    let mut rows = Vec::with_capacity(diffs.len() + 1);
    for (name, d) in testset.names().iter().zip(&diffs) {
        if !d.is_empty() {
            rows.push(eval_row(name.clone(), d, opts)?);
        }
    }
    rows.push(eval_row("all".into(), &diffs.concat(), opts)?);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_examples() {
        let p = predict(0.0).unwrap();
        assert_eq!((p.confidence, p.predicted, p.is_correct()), (0.5, 0, false));
        let p = predict(2.0).unwrap();
        assert!((p.confidence - 0.880_797_077_977_882_4).abs() < 1e-15 && p.is_correct());
        let p = predict(-1.0).unwrap();
        assert!((p.confidence - 0.268_941_421_369_995_1).abs() < 1e-15 && !p.is_correct());
        let f = predict_with(-1.0, ConfidenceMode::Folded).unwrap();
        assert!((f.confidence - 0.731_058_578_630_004_9).abs() < 1e-15 && !f.is_correct());
        assert!(predict(f64::NAN).is_err());
    }

    #[test]
    fn ece_examples() {
        let perfect = vec![PairPrediction::new(1.0, 1, 1).unwrap(); 5];
        assert_eq!(ece(&perfect, 10).unwrap().ece, 0.0);
        let two = [
            PairPrediction::new(0.95, 1, 1).unwrap(),
            PairPrediction::new(0.95, 0, 1).unwrap(),
        ];
        let r = ece(&two, 10).unwrap();
        assert_eq!(r.bins[9].count, 2);
        assert_eq!(r.bins[9].acc, Some(0.5));
        assert!((r.ece - 0.45).abs() < 1e-15);
        assert!(ece(&[], 10).is_err());
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.1, 10), 0);
        assert_eq!(bin_index(0.5, 10), 4);
        assert_eq!(bin_index(0.500_000_1, 10), 5);
        assert_eq!(bin_index(1.0, 10), 9);
        assert_eq!(bin_index(0.3, 10), 2);
        assert_eq!(bin_index(0.7, 1), 0);
    }

    #[test]
    fn stats_examples() {
        let s = diff_stats(&[2.0; 7], TUKEY_FENCE).unwrap();
        assert_eq!((s.iqr(), s.positive_outliers.count, s.negative_outliers.count), (0.0, 0, 0));
        let s = diff_stats(&[1.0, 1.0, 1.0, 1.0, 100.0], TUKEY_FENCE).unwrap();
        assert_eq!(s.positive_outliers.count, 1);
        assert_eq!(s.positive_outliers.mean, Some(100.0));
        assert_eq!(s.negative_outliers.mean, None);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(spearman(&[1.0, 2.0], &[5.0, 5.0]), Err(Error::DegenerateRanks)));
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn confidence_mode_parsing() {
        assert_eq!("literal".parse::<ConfidenceMode>().unwrap(), ConfidenceMode::Literal);
        assert!("both".parse::<ConfidenceMode>().is_err());
    }
}
