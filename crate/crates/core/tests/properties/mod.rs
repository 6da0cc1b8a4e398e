//! Property suite shared by the `invariants` and `acceptance` test targets.
//!
//! Every property runs 100 generated cases from a fixed-seed runner.

use morerm::alignment::{alignment_score, generate_candidates, reject_sample};
use morerm::math::{dot, sigmoid};
use morerm::metrics::{self, bin_index, ece, quantile_sorted, ConfidenceMode, PairPrediction};
use morerm::moosolver::{self, combined_norm, GradientSet, SimplexWeights, SolverInit, SolverOptions};
use morerm::prefdata::{
    balance, draw_label, hash_featurize, split, synthesize, BatchSampler, DiversifiedDataset, FeatureVector,
    LabelMode, PreferencePair, SynthesisParams,
};
use morerm::rewardnet::{Arch, GradScope, RewardModel, Scorer};
use morerm::trainer::{self, LambdaMode, Scheme, TrainConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 100;

pub fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub type PropResult = Result<(), String>;

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> PropResult
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn fv(v: Vec<f64>) -> FeatureVector {
    FeatureVector::new(v).unwrap()
}

/// Random pairs of dimension `d` from a seed.
pub fn random_pairs(d: usize, n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|j| {
            let w = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let l = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            PreferencePair::new(format!("p{j}"), fv(w), fv(l), 0).unwrap()
        })
        .collect()
}

/// Random model with parameters of order one.
pub fn random_model(arch: Arch, d: usize, seed: u64) -> RewardModel {
    let mut m = RewardModel::init(arch, d, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let p: Vec<f64> = (0..m.param_count(GradScope::Full))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    m.set_params(&p).unwrap();
    m
}

fn arch_strategy() -> impl Strategy<Value = Arch> {
    prop_oneof![Just(Arch::Linear), (1usize..=6).prop_map(|hidden| Arch::Mlp { hidden })]
}

fn small_dataset(k: usize, n: usize, seed: u64) -> DiversifiedDataset {
    let params = SynthesisParams {
        d: 3,
        k,
        n_per_source: n,
        alpha: vec![1.0; k],
        seed,
        ..SynthesisParams::default()
    };
    synthesize(&params.resolve().unwrap()).unwrap()
}

fn gradient_set_strategy(k_range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (k_range, 1usize..=8).prop_flat_map(|(k, p)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), k))
}

// ---------- prefdata ----------

/// Label frequency against σ(gap). The family of 100 cases is held to a 99%
/// binomial interval jointly (Bonferroni, per-case z = 3.891).
pub fn bt_label_frequency() -> PropResult {
    run((-3.0f64..3.0, any::<u64>()), |(gap, seed)| {
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wins = (0..n).filter(|_| draw_label(LabelMode::BradleyTerry, gap, &mut rng)).count();
        let p = sigmoid(gap);
        let half_width = 3.891 * (p * (1.0 - p) / n as f64).sqrt();
        prop_assert!((wins as f64 / n as f64 - p).abs() <= half_width);
        Ok(())
    })
}

pub fn balance_sizes_exact() -> PropResult {
    run(
        (prop::collection::vec(1usize..40, 1..5), 1usize..60, any::<u64>()),
        |(sizes, target, seed)| {
            let groups: Vec<Vec<PreferencePair>> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    random_pairs(2, n, seed ^ i as u64)
                        .into_iter()
                        .map(|mut p| {
                            p.source_id = i;
                            p
                        })
                        .collect()
                })
                .collect();
            let names = (0..sizes.len()).map(|i| format!("s{i}")).collect();
            let ds = DiversifiedDataset::new(2, names, groups, None).unwrap();
            let out = balance(&ds, target, seed).unwrap();
            prop_assert!(out.groups().iter().all(|g| g.len() == target));
            prop_assert_eq!(out.clone(), balance(&ds, target, seed).unwrap());
            Ok(())
        },
    )
}

pub fn split_is_partition() -> PropResult {
    run((2usize..4, 5usize..60, 0.05f64..0.9, any::<u64>()), |(k, n, frac, seed)| {
        let ds = small_dataset(k, n, seed);
        let Ok((train, test)) = split(&ds, frac, seed) else {
            return Ok(());
        };
        for i in 0..k {
            let mut all: Vec<&str> = train.group(i).unwrap().iter().map(|p| p.prompt_id.as_str()).collect();
            let te: Vec<&str> = test.group(i).unwrap().iter().map(|p| p.prompt_id.as_str()).collect();
            prop_assert!(te.iter().all(|id| !all.contains(id)));
            all.extend(te);
            all.sort_unstable();
            let mut orig: Vec<&str> = ds.group(i).unwrap().iter().map(|p| p.prompt_id.as_str()).collect();
            orig.sort_unstable();
            prop_assert_eq!(all, orig);
        }
        let (train2, test2) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train, train2);
        prop_assert_eq!(test, test2);
        Ok(())
    })
}

pub fn batch_composition() -> PropResult {
    run((1usize..6, 1usize..40, 1usize..20, any::<u64>()), |(k, n, per_source, seed)| {
        let ds = small_dataset(k, n, seed);
        let mut sampler = BatchSampler::new(&ds, per_source, seed).unwrap();
        for _ in 0..3 {
            let b = sampler.next_batch(&ds);
            prop_assert_eq!(b.k(), k);
            prop_assert_eq!(b.len(), k * per_source);
            for (i, sub) in b.sub_batches.iter().enumerate() {
                prop_assert_eq!(sub.len(), per_source);
                prop_assert!(sub.iter().all(|p| p.source_id == i));
            }
        }
        Ok(())
    })
}

pub fn data_determinism() -> PropResult {
    run((1usize..4, 1usize..30, any::<u64>()), |(k, n, seed)| {
        prop_assert_eq!(small_dataset(k, n, seed), small_dataset(k, n, seed));
        let ds = small_dataset(k, n, seed);
        let mut a = BatchSampler::new(&ds, 3, seed).unwrap();
        let mut b = BatchSampler::new(&ds, 3, seed).unwrap();
        for _ in 0..4 {
            let ia: Vec<&str> = a.next_batch(&ds).union().iter().map(|p| p.prompt_id.as_str()).collect();
            let ib: Vec<&str> = b.next_batch(&ds).union().iter().map(|p| p.prompt_id.as_str()).collect();
            prop_assert_eq!(ia, ib);
        }
        Ok(())
    })
}

pub fn hash_featurizer() -> PropResult {
    run(("[a-z ]{0,40}", "[a-z0-9 ]{0,40}", 1usize..64), |(prompt, response, d)| {
        let a = hash_featurize(&prompt, &response, d);
        prop_assert_eq!(a.clone(), hash_featurize(&prompt, &response, d));
        let has_tokens = prompt.split_whitespace().next().is_some() || response.split_whitespace().next().is_some();
        if has_tokens && a.norm() > 0.0 {
            prop_assert!((a.norm() - 1.0).abs() <= 1e-9);
        }
        if !has_tokens {
            prop_assert_eq!(a.norm(), 0.0);
        }
        Ok(())
    })
}

// ---------- rewardnet ----------

pub fn loss_nonnegative_and_decreasing() -> PropResult {
    run((-30.0f64..30.0, 1e-3f64..5.0), |(dr, step)| {
        let m = RewardModel::linear(vec![1.0], 0.0).unwrap();
        let pair = |x: f64| PreferencePair::new("p", fv(vec![x]), fv(vec![0.0]), 0).unwrap();
        let lo = m.ranking_loss(&[pair(dr)]).unwrap();
        let hi = m.ranking_loss(&[pair(dr + step)]).unwrap();
        prop_assert!(lo >= 0.0 && hi >= 0.0);
        prop_assert!(hi < lo);
        Ok(())
    })
}

pub fn bias_invariance() -> PropResult {
    run((arch_strategy(), 1usize..6, -50.0f64..50.0, any::<u64>()), |(arch, d, shift, seed)| {
        let m = random_model(arch, d, seed);
        let s = m.with_bias_shift(shift);
        let pairs = random_pairs(d, 12, seed);
        prop_assert_eq!(m.ranking_loss(&pairs).unwrap(), s.ranking_loss(&pairs).unwrap());
        let g = m.ranking_loss_gradient(&pairs, GradScope::Full).unwrap();
        prop_assert_eq!(g.values[m.head_len() - 1], 0.0);
        for scope in [GradScope::Full, GradScope::HeadOnly] {
            let a = m.ranking_loss_gradient(&pairs, scope).unwrap();
            let b = s.ranking_loss_gradient(&pairs, scope).unwrap();
            prop_assert_eq!(a, b);
        }
        let test = DiversifiedDataset::new(d, vec!["t".into()], vec![pairs], None).unwrap();
        let opts = metrics::EvalOptions::default();
        prop_assert_eq!(metrics::evaluate(&m, &test, &opts).unwrap(), metrics::evaluate(&s, &test, &opts).unwrap());
        Ok(())
    })
}

/// Largest per-coordinate relative error between the analytic gradient and
/// central differences with step `eps`. Relative error is taken against
/// `max(|analytic|, |numeric|, floor)`.
pub fn finite_difference_error(model: &RewardModel, pairs: &[PreferencePair], scope: GradScope, eps: f64, floor: f64) -> f64 {
    let g = model.ranking_loss_gradient(pairs, scope).unwrap();
    let base = model.params();
    let mut worst: f64 = 0.0;
    for (j, &analytic) in g.values.iter().enumerate() {
        let mut probe = model.clone();
        let mut p = base.clone();
        p[j] = base[j] + eps;
        probe.set_params(&p).unwrap();
        let up = probe.ranking_loss(pairs).unwrap();
        p[j] = base[j] - eps;
        probe.set_params(&p).unwrap();
        let down = probe.ranking_loss(pairs).unwrap();
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

pub const FD_EPS: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-4;

pub fn gradient_matches_finite_differences() -> PropResult {
    run((arch_strategy(), 1usize..6, 1usize..12, any::<u64>()), |(arch, d, n, seed)| {
        let m = random_model(arch, d, seed);
        let pairs = random_pairs(d, n, seed.wrapping_add(1));
        for scope in [GradScope::Full, GradScope::HeadOnly] {
            let err = finite_difference_error(&m, &pairs, scope, FD_EPS, FD_FLOOR);
            prop_assert!(err <= 1e-6, "relative error {err}");
        }
        Ok(())
    })
}

pub fn reward_is_pure() -> PropResult {
    run((arch_strategy(), 1usize..6, any::<u64>()), |(arch, d, seed)| {
        let m = random_model(arch, d, seed);
        for p in random_pairs(d, 4, seed) {
            let a = m.reward(&p.winner).unwrap();
            prop_assert_eq!(a.to_bits(), m.reward(&p.winner).unwrap().to_bits());
        }
        Ok(())
    })
}

// ---------- moosolver ----------

fn solve_set(rows: &[Vec<f64>], opts: &SolverOptions) -> (SimplexWeights, f64, Vec<f64>) {
    let set = GradientSet::new(rows.to_vec(), GradScope::HeadOnly).unwrap();
    let s = moosolver::solve(&set, opts, None).unwrap();
    (s.weights, s.norm_sq, s.objective_trace)
}

pub fn solver_on_simplex() -> PropResult {
    run(gradient_set_strategy(1..=6), |rows| {
        let (w, _, _) = solve_set(&rows, &SolverOptions::default());
        prop_assert!(w.as_slice().iter().all(|&l| l >= 0.0));
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Ok(())
    })
}

pub fn solver_monotone() -> PropResult {
    run((gradient_set_strategy(3..=6), any::<bool>()), |(rows, uniform)| {
        let opts = SolverOptions {
            init: if uniform { SolverInit::Uniform } else { SolverInit::Pair },
            ..SolverOptions::default()
        };
        let (_, _, trace) = solve_set(&rows, &opts);
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0], "objective rose from {} to {}", w[0], w[1]);
        }
        Ok(())
    })
}

pub fn solver_vertex_dominance() -> PropResult {
    run(gradient_set_strategy(1..=6), |rows| {
        let set = GradientSet::new(rows.clone(), GradScope::HeadOnly).unwrap();
        let (w, achieved, _) = solve_set(&rows, &SolverOptions::default());
        let k = rows.len();
        let min_vertex = rows.iter().map(|g| dot(g, g)).fold(f64::INFINITY, f64::min);
        prop_assert!(achieved <= min_vertex + 1e-9);
        prop_assert!(achieved <= combined_norm(&set, &SimplexWeights::uniform(k)).unwrap() + 1e-9);
        prop_assert!((combined_norm(&set, &w).unwrap() - achieved).abs() <= 1e-12);
        Ok(())
    })
}

/// Scaling every gradient by c > 0 scales the optimum by c² and keeps λ.
pub fn solver_scale_equivariance() -> PropResult {
    let strategy = (2usize..=4)
        .prop_flat_map(|k| (Just(k), k..=8))
        .prop_flat_map(|(k, p)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), k))
        .prop_flat_map(|rows| (Just(rows), 0.1f64..10.0));
    run(strategy, |(rows, c)| {
        let opts = SolverOptions::default();
        let (w, n, _) = solve_set(&rows, &opts);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|g| g.iter().map(|v| c * v).collect()).collect();
        let (ws, ns, _) = solve_set(&scaled, &opts);
        prop_assert!((ns - c * c * n).abs() <= 1e-9 * (1.0 + c * c), "{ns} vs {}", c * c * n);
        for (a, b) in w.as_slice().iter().zip(ws.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-4, "λ {a} vs {b}");
        }
        Ok(())
    })
}

// ---------- trainer ----------

fn tiny_train_config(arch: Arch, seed: u64) -> TrainConfig {
    TrainConfig {
        arch,
        per_source_batch: 4,
        seed,
        ..TrainConfig::default()
    }
}

pub fn training_deterministic() -> PropResult {
    run((1usize..4, arch_strategy(), any::<u64>()), |(k, arch, seed)| {
        let ds = small_dataset(k, 16, seed);
        let cfg = tiny_train_config(arch, seed);
        prop_assert_eq!(trainer::train(&ds, &cfg).unwrap(), trainer::train(&ds, &cfg).unwrap());
        Ok(())
    })
}

pub fn trace_lambda_valid() -> PropResult {
    run((1usize..5, arch_strategy(), any::<u64>()), |(k, arch, seed)| {
        let ds = small_dataset(k, 16, seed);
        let t = trainer::train(&ds, &tiny_train_config(arch, seed)).unwrap();
        prop_assert_eq!(t.trace.records.len(), t.steps);
        for r in &t.trace.records {
            prop_assert!(SimplexWeights::new(r.lambda.clone()).is_ok());
            let min_vertex = r.head_norms_sq.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(r.norm_sq <= min_vertex + 1e-9);
        }
        Ok(())
    })
}

/// With equal sub-batches, Σ (1/K) L_i equals the mean loss over the union.
pub fn more_multitask_loss_magnitude() -> PropResult {
    run((1usize..5, 1usize..6, arch_strategy(), any::<u64>()), |(k, b, arch, seed)| {
        let ds = small_dataset(k, 20, seed);
        let m = random_model(arch, 3, seed);
        let mut sampler = BatchSampler::new(&ds, b, seed).unwrap();
        let batch = sampler.next_batch(&ds);
        let more: f64 = batch
            .sub_batches
            .iter()
            .map(|s| m.ranking_loss(s).unwrap() / k as f64)
            .sum();
        let multitask = m.ranking_loss(&batch.union()).unwrap();
        prop_assert!((more - multitask).abs() <= 1e-12);
        Ok(())
    })
}

pub fn fixed_lambda_matches_multitask_step() -> PropResult {
    run((1usize..4, arch_strategy(), any::<u64>()), |(k, arch, seed)| {
        let ds = small_dataset(k, 12, seed);
        let mt_cfg = tiny_train_config(arch, seed).with_scheme(Scheme::MultiTask);
        let more_cfg = TrainConfig {
            lambda_mode: LambdaMode::Fixed(SimplexWeights::uniform(k)),
            ..tiny_train_config(arch, seed)
        };
        let mt = trainer::train(&ds, &mt_cfg).unwrap();
        let more = trainer::train(&ds, &more_cfg).unwrap();
        for (a, b) in mt.model.params().iter().zip(more.model.params()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        Ok(())
    })
}

// ---------- metrics ----------

fn predictions_strategy() -> impl Strategy<Value = Vec<PairPrediction>> {
    let conf = prop_oneof![
        3 => 0.0f64..=1.0,
        1 => (0u32..=10).prop_map(|m| m as f64 / 10.0),
    ];
    prop::collection::vec((conf, 0u8..=1, 0u8..=1), 1..200).prop_map(|v| {
        v.into_iter()
            .map(|(c, p, t)| PairPrediction::new(c, p, t).unwrap())
            .collect()
    })
}

pub fn ece_partition() -> PropResult {
    run((predictions_strategy(), 1usize..20), |(preds, m)| {
        let r = ece(&preds, m).unwrap();
        prop_assert_eq!(r.bins.iter().map(|b| b.count).sum::<usize>(), preds.len());
        for p in &preds {
            let hits = (0..m)
                .filter(|&b| {
                    let (lo, hi) = (b as f64 / m as f64, (b + 1) as f64 / m as f64);
                    (p.confidence > lo && p.confidence <= hi) || (b == 0 && p.confidence == 0.0)
                })
                .count();
            prop_assert_eq!(hits, 1);
            let b = bin_index(p.confidence, m);
            prop_assert!(p.confidence <= (b + 1) as f64 / m as f64);
        }
        prop_assert!((0.0..=1.0).contains(&r.ece));
        Ok(())
    })
}

pub fn ece_permutation_invariant() -> PropResult {
    run((predictions_strategy(), any::<u64>()), |(preds, seed)| {
        let mut shuffled = preds.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = ece(&preds, 10).unwrap();
        let b = ece(&shuffled, 10).unwrap();
        prop_assert!((a.ece - b.ece).abs() <= 1e-12);
        let counts = |r: &metrics::CalibrationReport| r.bins.iter().map(|b| b.count).collect::<Vec<_>>();
        prop_assert_eq!(counts(&a), counts(&b));
        Ok(())
    })
}

pub fn confidence_monotone_under_scaling() -> PropResult {
    run((arch_strategy(), 1usize..6, 1.0f64..10.0, any::<u64>()), |(arch, d, c, seed)| {
        let m = random_model(arch, d, seed);
        let scaled = m.with_head_scale(c);
        for p in random_pairs(d, 16, seed) {
            let (a, b) = (m.pair_difference(&p), scaled.pair_difference(&p));
            prop_assert_eq!(a > 0.0, b > 0.0);
            prop_assert_eq!(a < 0.0, b < 0.0);
            for mode in [ConfidenceMode::Literal, ConfidenceMode::Folded] {
                let pa = metrics::predict_with(a, mode).unwrap().confidence;
                let pb = metrics::predict_with(b, mode).unwrap().confidence;
                prop_assert!((pb - 0.5).abs() >= (pa - 0.5).abs() - 1e-15);
            }
        }
        Ok(())
    })
}

pub fn quartiles_match_sort_oracle() -> PropResult {
    run(prop::collection::vec(-100.0f64..100.0, 1..300), |xs| {
        let s = metrics::diff_stats(&xs, 1.5).unwrap();
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = |q: f64| {
            let pos = q * (sorted.len() - 1) as f64;
            let i = pos as usize;
            if i + 1 >= sorted.len() {
                sorted[i]
            } else {
                sorted[i] + (pos - i as f64) * (sorted[i + 1] - sorted[i])
            }
        };
        prop_assert_eq!(s.q1.to_bits(), oracle(0.25).to_bits());
        prop_assert_eq!(s.median.to_bits(), oracle(0.5).to_bits());
        prop_assert_eq!(s.q3.to_bits(), oracle(0.75).to_bits());
        prop_assert_eq!(quantile_sorted(&sorted, 0.5).to_bits(), oracle(0.5).to_bits());
        prop_assert!(s.q1 <= s.median && s.median <= s.q3);
        prop_assert!(s.positive_outliers.count + s.negative_outliers.count <= s.n);
        Ok(())
    })
}

// ---------- alignment ----------

pub fn selection_affine_invariance() -> PropResult {
    run(
        (arch_strategy(), 1usize..6, 2usize..6, 0.1f64..10.0, -5.0f64..5.0, any::<u64>()),
        |(arch, d, s, c, shift, seed)| {
            let params = SynthesisParams {
                d: d.max(2),
                k: 1,
                alpha: vec![0.0],
                seed,
                ..SynthesisParams::default()
            };
            let spec = params.resolve().unwrap();
            let m = random_model(arch, spec.d, seed);
            let pool = generate_candidates(&spec, 30, s, seed).unwrap();
            let t = m.with_head_scale(c).with_bias_shift(shift);
            prop_assert_eq!(reject_sample(&m, &pool).unwrap(), reject_sample(&t, &pool).unwrap());
            Ok(())
        },
    )
}

pub fn oracle_selector_regret_zero() -> PropResult {
    run((2usize..6, 2usize..6, 1usize..50, any::<u64>()), |(d, s, n, seed)| {
        let params = SynthesisParams {
            d,
            k: 1,
            alpha: vec![0.0],
            seed,
            ..SynthesisParams::default()
        };
        let spec = params.resolve().unwrap();
        let pool = generate_candidates(&spec, n, s, seed).unwrap();
        let oracle = RewardModel::linear(spec.shared_weight.to_vec(), 0.0).unwrap();
        let score = alignment_score(&reject_sample(&oracle, &pool).unwrap(), &pool).unwrap();
        prop_assert_eq!(score.regret(), 0.0);
        prop_assert!(score.random_mean <= score.mean_selected_true_reward);
        Ok(())
    })
}

pub fn study_deterministic() -> PropResult {
    run(any::<u64>(), |seed| {
        let mut cfg = morerm::ExperimentConfig::default();
        cfg.synthesis = SynthesisParams {
            d: 3,
            k: 3,
            n_per_source: 16,
            alpha: vec![2.0; 3],
            seed,
            ..cfg.synthesis
        };
        cfg.train.arch = Arch::Linear;
        cfg.eval.shared_test_n = 30;
        cfg.study.k = 2;
        cfg.study.n_prompts = 20;
        cfg.study.seeds = vec![seed, seed.wrapping_add(1)];
        cfg.execution = morerm::Execution::Sequential;
        let a = morerm::experiment::study(&cfg);
        let b = morerm::experiment::study(&cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed, the other did not"),
        }
        Ok(())
    })
}

pub type Property = (&'static str, fn() -> PropResult);

/// Every property with its name, in module order.
pub fn all() -> Vec<Property> {
    vec![
        ("bt_label_frequency", bt_label_frequency),
        ("balance_sizes_exact", balance_sizes_exact),
        ("split_is_partition", split_is_partition),
        ("batch_composition", batch_composition),
        ("data_determinism", data_determinism),
        ("hash_featurizer", hash_featurizer),
        ("loss_nonnegative_and_decreasing", loss_nonnegative_and_decreasing),
        ("bias_invariance", bias_invariance),
        ("gradient_matches_finite_differences", gradient_matches_finite_differences),
        ("reward_is_pure", reward_is_pure),
        ("solver_on_simplex", solver_on_simplex),
        ("solver_monotone", solver_monotone),
        ("solver_vertex_dominance", solver_vertex_dominance),
        ("solver_scale_equivariance", solver_scale_equivariance),
        ("training_deterministic", training_deterministic),
        ("trace_lambda_valid", trace_lambda_valid),
        ("more_multitask_loss_magnitude", more_multitask_loss_magnitude),
        ("fixed_lambda_matches_multitask_step", fixed_lambda_matches_multitask_step),
        ("ece_partition", ece_partition),
        ("ece_permutation_invariant", ece_permutation_invariant),
        ("confidence_monotone_under_scaling", confidence_monotone_under_scaling),
        ("quartiles_match_sort_oracle", quartiles_match_sort_oracle),
        ("selection_affine_invariance", selection_affine_invariance),
        ("oracle_selector_regret_zero", oracle_selector_regret_zero),
        ("study_deterministic", study_deterministic),
    ]
}
