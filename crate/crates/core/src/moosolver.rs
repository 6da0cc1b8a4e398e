//! Min-norm point of the convex hull of K gradients, i.e. the simplex weights
//! λ minimising ‖Σ λ_i g_i‖².
//!
//! K = 1 and K = 2 are closed-form. For K ≥ 3 the solver runs Frank-Wolfe with
//! exact line search on the Gram matrix, starting from the best pairwise
//! solution (or from uniform weights, or a caller-supplied warm start).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{all_finite, dot, norm_sq};
use crate::rewardnet::GradScope;

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    grads: Vec<Vec<f64>>,
    scope: GradScope,
}

impl GradientSet {
    pub fn new(grads: Vec<Vec<f64>>, scope: GradScope) -> Result<Self> {
        let first = grads.first().ok_or(Error::Empty("gradient set"))?;
        let p = first.len();
        for g in &grads {
            check_dim(p, g.len())?;
            if !all_finite(g) {
                return Err(Error::NonFinite("gradient set".into()));
            }
        }
        Ok(GradientSet { grads, scope })
    }

    pub fn k(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.grads[0].len()
    }

    pub fn scope(&self) -> GradScope {
        self.scope
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    /// `Σ λ_i g_i`.
    pub fn combine(&self, weights: &SimplexWeights) -> Result<Vec<f64>> {
        check_dim(self.k(), weights.k())?;
        let mut v = vec![0.0; self.dim()];
        for (g, &l) in self.grads.iter().zip(weights.as_slice()) {
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi += l * gi;
            }
        }
        Ok(v)
    }

    fn gram(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        let mut m = vec![vec![0.0; k]; k];
        for (i, gi) in self.grads.iter().enumerate() {
            for (j, gj) in self.grads.iter().enumerate().skip(i) {
                let v = dot(gi, gj);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("simplex weights"));
        }
        if !all_finite(&weights) {
            return Err(Error::NonFinite("simplex weights".into()));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("simplex weights must be >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Config(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(SimplexWeights(weights))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1, "simplex needs at least one vertex");
        SimplexWeights(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        assert!(i < k, "vertex index out of range");
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        SimplexWeights(w)
    }

    /// Proportional weights, e.g. sub-batch sizes.
    pub fn proportional(sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total == 0 {
            return Err(Error::Empty("proportional weights"));
        }
        Ok(SimplexWeights(
            sizes.iter().map(|&s| s as f64 / total as f64).collect(),
        ))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Clamps round-off negatives and renormalises.
    fn from_raw(mut w: Vec<f64>) -> Self {
        w.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        SimplexWeights(w)
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexWeights::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverInit {
    /// Best closed-form two-vertex solution.
    #[default]
    Pair,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once the objective decreases by less than this.
    pub tol: f64,
    pub init: SolverInit,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 256,
            tol: 1e-12,
            init: SolverInit::Pair,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("solver max_iters must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config("solver tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Full solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub weights: SimplexWeights,
    /// `‖Σ λ_i g_i‖²`, evaluated on the gradients.
    pub norm_sq: f64,
    pub iterations: usize,
    /// Gram-form objective at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Minimises `‖γ g_a + (1−γ) g_b‖²` over γ ∈ [0, 1].
pub fn min_norm_pair(g_a: &[f64], g_b: &[f64]) -> Result<(f64, f64)> {
    check_dim(g_a.len(), g_b.len())?;
    let diff_sq: f64 = g_a.iter().zip(g_b).map(|(a, b)| (a - b) * (a - b)).sum();
    if diff_sq == 0.0 {
        return Ok((0.5, norm_sq(g_a)));
    }
    let num: f64 = g_a.iter().zip(g_b).map(|(a, b)| (b - a) * b).sum();
    let gamma = (num / diff_sq).clamp(0.0, 1.0);
    let value = g_a
        .iter()
        .zip(g_b)
        .map(|(a, b)| {
            let c = gamma * a + (1.0 - gamma) * b;
            c * c
        })
        .sum();
    Ok((gamma, value))
}

/// `‖Σ λ_i g_i‖²`.
pub fn combined_norm(grads: &GradientSet, weights: &SimplexWeights) -> Result<f64> {
    Ok(norm_sq(&grads.combine(weights)?))
}

pub fn min_norm_weights(grads: &GradientSet, opts: &SolverOptions) -> Result<(SimplexWeights, f64)> {
    solve(grads, opts, None).map(|s| (s.weights, s.norm_sq))
}

/// Solves with full diagnostics; `start` (if given) replaces the configured
/// initialisation for K ≥ 3.
pub fn solve(
    grads: &GradientSet,
    opts: &SolverOptions,
    start: Option<&SimplexWeights>,
) -> Result<MinNormSolution> {
    opts.validate()?;
    let k = grads.k();
    let finish = |weights: SimplexWeights, iterations, objective_trace| -> Result<MinNormSolution> {
        let norm_sq = combined_norm(grads, &weights)?;
        Ok(MinNormSolution {
            weights,
            norm_sq,
            iterations,
            objective_trace,
        })
    };

    if grads.grads.iter().all(|g| g.iter().all(|v| *v == 0.0)) {
        return finish(SimplexWeights::uniform(k), 0, vec![0.0]);
    }
    if k == 1 {
        return finish(SimplexWeights::vertex(1, 0), 0, vec![norm_sq(&grads.grads[0])]);
    }
    if k == 2 {
        let (gamma, value) = min_norm_pair(&grads.grads[0], &grads.grads[1])?;
        return finish(SimplexWeights(vec![gamma, 1.0 - gamma]), 0, vec![value]);
    }

    let m = grads.gram();
    let quad = |l: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..k {
            s += l[i] * dot(&m[i], l);
        }
        s
    };
    let mut lambda = match start {
        Some(w) => {
            check_dim(k, w.k())?;
            w.0.clone()
        }
        None => match opts.init {
            SolverInit::Uniform => SimplexWeights::uniform(k).0,
            SolverInit::Pair => best_pair_start(&m),
        },
    };

    let mut objective = quad(&lambda);
    let mut trace = vec![objective];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        iterations += 1;
        let mv: Vec<f64> = m.iter().map(|row| dot(row, &lambda)).collect();
        let mut t = 0;
        for i in 1..k {
            if mv[i] < mv[t] {
                t = i;
            }
        }
        let vv = dot(&lambda, &mv);
        let vt = mv[t];
        let tt = m[t][t];
        let denom = vv - 2.0 * vt + tt;
        if denom <= 0.0 {
            break;
        }
        let gamma = ((vv - vt) / denom).clamp(0.0, 1.0);
        let mut next: Vec<f64> = lambda.iter().map(|l| (1.0 - gamma) * l).collect();
        next[t] += gamma;
        let next_obj = quad(&next);
        if next_obj > objective {
            break;
        }
        let decrease = objective - next_obj;
        lambda = next;
        objective = next_obj;
        trace.push(objective);
        if decrease < opts.tol {
            break;
        }
    }
    finish(SimplexWeights::from_raw(lambda), iterations, trace)
}

/// Best two-vertex solution over all pairs; ties go to the lowest pair.
fn best_pair_start(m: &[Vec<f64>]) -> Vec<f64> {
    let k = m.len();
    let mut best = (f64::INFINITY, 0, 1, 0.5);
    for i in 0..k {
        for j in i + 1..k {
            let denom = m[i][i] - 2.0 * m[i][j] + m[j][j];
            let g = if denom <= 0.0 {
                0.5
            } else {
                ((m[j][j] - m[i][j]) / denom).clamp(0.0, 1.0)
            };
            let value = g * g * m[i][i] + 2.0 * g * (1.0 - g) * m[i][j] + (1.0 - g) * (1.0 - g) * m[j][j];
            if value < best.0 {
                best = (value, i, j, g);
            }
        }
    }
    let mut lambda = vec![0.0; k];
    lambda[best.1] = best.3;
    lambda[best.2] = 1.0 - best.3;
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]]) -> GradientSet {
        GradientSet::new(rows.iter().map(|r| r.to_vec()).collect(), GradScope::HeadOnly).unwrap()
    }

    #[test]
    fn pair_examples() {
        let (g, v) = min_norm_pair(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((g - 0.5).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        let (g, v) = min_norm_pair(&[2.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((g - 0.2).abs() < 1e-15 && (v - 0.8).abs() < 1e-15);
        let (g, v) = min_norm_pair(&[1.5, -2.0], &[-1.5, 2.0]).unwrap();
        assert_eq!((g, v), (0.5, 0.0));
        let (g, v) = min_norm_pair(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!((g, v), (0.5, 25.0));
        assert!(min_norm_pair(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_k_cases() {
        let opts = SolverOptions::default();
        let (w, v) = min_norm_weights(&set(&[&[3.0, -1.0]]), &opts).unwrap();
        assert_eq!((w.as_slice(), v), (&[1.0][..], 10.0));
        let (w, v) = min_norm_weights(&set(&[&[2.0, 0.0], &[0.0, 1.0]]), &opts).unwrap();
        assert!((w.as_slice()[0] - 0.2).abs() < 1e-12 && (v - 0.8).abs() < 1e-12);
        let (_, v) = min_norm_weights(&set(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]]), &opts).unwrap();
        assert!(v <= 1e-8);
    }

    #[test]
    fn zero_gradients_give_uniform() {
        let (w, v) = min_norm_weights(&set(&[&[0.0; 3], &[0.0; 3], &[0.0; 3]]), &SolverOptions::default()).unwrap();
        assert_eq!(w, SimplexWeights::uniform(3));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GradientSet::new(vec![vec![1.0, f64::NAN]], GradScope::Full).is_err());
        assert!(GradientSet::new(vec![vec![1.0], vec![1.0, 2.0]], GradScope::Full).is_err());
        assert!(GradientSet::new(vec![], GradScope::Full).is_err());
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![-0.1, 1.1]).is_err());
        let bad = SolverOptions {
            max_iters: 0,
            ..SolverOptions::default()
        };
        assert!(min_norm_weights(&set(&[&[1.0]]), &bad).is_err());
    }

    #[test]
    fn uniform_and_warm_starts_agree_on_interior_optimum() {
        let g = set(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, -1.0]]);
        let opts = SolverOptions {
            init: SolverInit::Uniform,
            ..SolverOptions::default()
        };
        let a = solve(&g, &opts, None).unwrap();
        let b = solve(&g, &SolverOptions::default(), Some(&SimplexWeights::vertex(3, 0))).unwrap();
        assert!(a.norm_sq < 1e-10 && b.norm_sq < 1e-10);
        for w in a.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn combined_norm_vertices() {
        let g = set(&[&[1.0, 2.0], &[-1.0, -2.0]]);
        assert_eq!(combined_norm(&g, &SimplexWeights::vertex(2, 1)).unwrap(), 5.0);
        assert_eq!(combined_norm(&g, &SimplexWeights::uniform(2)).unwrap(), 0.0);
        let w: SimplexWeights = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<SimplexWeights>("[0.5,0.75]").is_err());
    }
}
