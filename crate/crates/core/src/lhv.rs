//! Local instruction-set models: deterministic strategies, their mixtures,
//! predictions, and least-squares fits to observed correlations.
//!
//! Strategies are ordered lexicographically over the outcome sequence
//! `(party 1 settings…, party 2 settings…, party 3 settings…)` with `+1`
//! before `−1`. Strategy `code` therefore stores the outcome at sequence
//! position `p` in bit `K − 1 − p` (set bit = −1), `K` being the total number
//! of settings; code 0 is the all-`+1` strategy.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bell::{
    self, evaluate, tuple_at, tuple_count, BellExpression, CorrelationTable, SettingTuple, Shape,
};
use crate::error::{Error, Result};

/// Weight-sum slack for a valid model.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A deterministic ±1 outcome for every (party, setting) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstructionSet {
    #[serde(skip)]
    code: u64,
    outcomes: [Vec<i8>; 3],
}

impl InstructionSet {
    /// Decodes strategy `code` in the lexicographic order described above.
    pub fn from_index(shape: Shape, code: u64) -> Self {
        let total: usize = shape.iter().sum();
        let mut pos = 0;
        let outcomes = [0, 1, 2].map(|p| {
            (0..shape[p])
                .map(|_| {
                    let bit = total - 1 - pos;
                    pos += 1;
                    if (code >> bit) & 1 == 1 {
                        -1
                    } else {
                        1
                    }
                })
                .collect()
        });
        InstructionSet { code, outcomes }
    }

    /// Builds a strategy from explicit outcome lists; entries must be ±1.
    pub fn from_outcomes(outcomes: [Vec<i8>; 3]) -> Result<Self> {
        let mut code = 0u64;
        for o in outcomes.iter().flatten() {
            code = match o {
                1 => code << 1,
                -1 => (code << 1) | 1,
                other => return Err(Error::InvalidModel(format!("outcome {other} is not ±1"))),
            };
        }
        Ok(InstructionSet { code, outcomes })
    }

    pub fn index(&self) -> u64 {
        self.code
    }

    pub fn shape(&self) -> Shape {
        [
            self.outcomes[0].len(),
            self.outcomes[1].len(),
            self.outcomes[2].len(),
        ]
    }

    pub fn outcome(&self, party: usize, setting: usize) -> i8 {
        self.outcomes[party][setting]
    }

    pub fn outcomes(&self) -> &[Vec<i8>; 3] {
        &self.outcomes
    }

    /// Outcome triple for a joint setting.
    pub fn respond(&self, t: SettingTuple) -> [i8; 3] {
        [
            self.outcomes[0][t[0]],
            self.outcomes[1][t[1]],
            self.outcomes[2][t[2]],
        ]
    }

    /// Correlation of this strategy on tuple `t`: the outcome product.
    pub fn product(&self, t: SettingTuple) -> i8 {
        let [a, b, c] = self.respond(t);
        a * b * c
    }
}

/// All deterministic strategies for `shape`, in lexicographic order.
pub fn enumerate_instruction_sets(shape: Shape, cap: u64) -> Result<Vec<InstructionSet>> {
    if shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "invalid setting counts {shape:?}"
        )));
    }
    let count = bell::strategy_count(shape, cap)?;
    Ok((0..count)
        .map(|c| InstructionSet::from_index(shape, c))
        .collect())
}

/// Column-major ±1 matrix: column `λ` is the correlation vector of strategy `λ`.
#[derive(Debug, Clone)]
struct StrategyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StrategyMatrix {
    fn new(shape: Shape) -> Result<Self> {
        let strategies = enumerate_instruction_sets(shape, bell::DEFAULT_STRATEGY_CAP)?;
        let rows = tuple_count(shape);
        let mut data = Vec::with_capacity(rows * strategies.len());
        for s in &strategies {
            data.extend((0..rows).map(|r| f64::from(s.product(tuple_at(shape, r)))));
        }
        Ok(StrategyMatrix {
            rows,
            cols: strategies.len(),
            data,
        })
    }

    fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.rows];
        for (c, &wc) in w.iter().enumerate() {
            if wc != 0.0 {
                for (xi, a) in x.iter_mut().zip(self.column(c)) {
                    *xi += wc * a;
                }
            }
        }
        x
    }

    fn dot_column(&self, c: usize, v: &[f64]) -> f64 {
        self.column(c).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// A probability distribution over the deterministic strategies of a shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LhvModel {
    shape: Shape,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    settings: Shape,
    weights: Vec<f64>,
}

impl TryFrom<ModelFile> for LhvModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        LhvModel::new(f.settings, f.weights)
    }
}

impl From<LhvModel> for ModelFile {
    fn from(m: LhvModel) -> Self {
        ModelFile {
            settings: m.shape,
            weights: m.weights,
        }
    }
}

impl LhvModel {
    /// Weights must be nonnegative and sum to 1 within [`WEIGHT_SUM_TOL`].
    pub fn new(shape: Shape, weights: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidModel(format!(
                "invalid setting counts {shape:?}"
            )));
        }
        let count = bell::strategy_count(shape, bell::DEFAULT_STRATEGY_CAP)?;
        if weights.len() as u64 != count {
            return Err(Error::InvalidModel(format!(
                "{} weights for {count} strategies of shape {shape:?}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidModel(format!("weight {i} is {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidModel(format!("weights sum to {sum}")));
        }
        Ok(LhvModel { shape, weights })
    }

    pub fn uniform(shape: Shape) -> Result<Self> {
        let count = bell::strategy_count(shape, bell::DEFAULT_STRATEGY_CAP)? as usize;
        LhvModel::new(shape, vec![1.0 / count as f64; count])
    }

    pub fn point_mass(shape: Shape, strategy: usize) -> Result<Self> {
        let count = bell::strategy_count(shape, bell::DEFAULT_STRATEGY_CAP)? as usize;
        if strategy >= count {
            return Err(Error::InvalidModel(format!(
                "strategy {strategy} out of range (0..{count})"
            )));
        }
        let mut weights = vec![0.0; count];
        weights[strategy] = 1.0;
        LhvModel::new(shape, weights)
    }

    /// `alpha·a + (1 − alpha)·b`.
    pub fn mixture(a: &LhvModel, b: &LhvModel, alpha: f64) -> Result<Self> {
        if a.shape != b.shape {
            return Err(Error::ShapeMismatch {
                expected: a.shape,
                found: b.shape,
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "mixing weight {alpha} outside [0, 1]"
            )));
        }
        let weights = a
            .weights
            .iter()
            .zip(&b.weights)
            .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
            .collect();
        LhvModel::new(a.shape, weights)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `E(i,j,k) = Σ_λ p(λ) a1(λ,i) a2(λ,j) a3(λ,k)`.
pub fn predictions(model: &LhvModel) -> CorrelationTable {
    let matrix = StrategyMatrix::new(model.shape).expect("model shape already validated");
    let values = matrix
        .apply(&model.weights)
        .into_iter()
        .map(|v| v.clamp(-1.0, 1.0))
        .collect();
    CorrelationTable::new(model.shape, values).expect("mixture of ±1 products lies in [-1, 1]")
}

pub fn model_bell_value(model: &LhvModel, expr: &BellExpression) -> Result<f64> {
    evaluate(expr, &predictions(model))
}

/// Step-size schedule for the conditional-gradient loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `2/(t+2)`, shortened to the exact line minimizer whenever the full
    /// step would raise the objective.
    OpenLoop,
    /// Exact line minimization along the Frank–Wolfe or away direction
    /// (away-step variant).
    AwayLineSearch,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the Frank–Wolfe duality gap falls to this value.
    pub tolerance: f64,
    pub step: StepRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 10_000,
            tolerance: 1e-8,
            step: StepRule::AwayLineSearch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: LhvModel,
    /// `Σ (E_model − E_obs)²` over all tuples.
    pub residual: f64,
    pub iterations_used: usize,
    /// Final duality gap; an upper bound on `residual − optimum`.
    pub duality_gap: f64,
    pub converged: bool,
    /// Residual after each iteration, starting with the initial point.
    pub residual_history: Vec<f64>,
}

enum Objective<'a> {
    /// `||x − target||²`
    LeastSquares(&'a [f64]),
    /// `−c·x`
    Linear(&'a [f64]),
}

impl Objective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::LeastSquares(t) => x.iter().zip(*t).map(|(a, b)| (a - b) * (a - b)).sum(),
            Objective::Linear(c) => -x.iter().zip(*c).map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::LeastSquares(t) => x.iter().zip(*t).map(|(a, b)| 2.0 * (a - b)).collect(),
            Objective::Linear(c) => c.iter().map(|v| -v).collect(),
        }
    }

    /// Minimizer of `γ ↦ f(x + γ d)` on `[0, max]`.
    fn line_minimizer(&self, grad: &[f64], d: &[f64], max: f64) -> f64 {
        let slope: f64 = grad.iter().zip(d).map(|(g, v)| g * v).sum();
        if slope >= 0.0 {
            return 0.0;
        }
        match self {
            Objective::LeastSquares(_) => {
                let curv: f64 = 2.0 * d.iter().map(|v| v * v).sum::<f64>();
                if curv <= 0.0 {
                    max
                } else {
                    (-slope / curv).min(max)
                }
            }
            Objective::Linear(_) => max,
        }
    }
}

struct SimplexRun {
    weights: Vec<f64>,
    value: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn argmin_by<F: Fn(usize) -> f64>(n: usize, f: F) -> usize {
    (0..n).fold(0, |best, i| if f(i) < f(best) { i } else { best })
}

/// Conditional-gradient minimization over the strategy simplex, starting
/// from the uniform mixture.
fn frank_wolfe(
    matrix: &StrategyMatrix,
    objective: &Objective<'_>,
    opts: &FitOptions,
) -> SimplexRun {
    let n = matrix.cols;
    let mut w = vec![1.0 / n as f64; n];
    let mut x = matrix.apply(&w);
    let mut value = objective.value(&x);
    let mut best_w = w.clone();
    let mut history = vec![value];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for t in 0..opts.max_iterations {
        let grad = objective.gradient(&x);
        let scores: Vec<f64> = (0..n).map(|c| matrix.dot_column(c, &grad)).collect();
        let toward = argmin_by(n, |c| scores[c]);
        let current: f64 = grad.iter().zip(&x).map(|(g, v)| g * v).sum();
        gap = current - scores[toward];
        if gap <= opts.tolerance {
            converged = true;
            break;
        }
        iterations = t + 1;

        let fw_dir: Vec<f64> = matrix
            .column(toward)
            .iter()
            .zip(&x)
            .map(|(a, b)| a - b)
            .collect();
        let (gamma, vertex, away) = match opts.step {
            StepRule::OpenLoop => {
                let schedule = 2.0 / (t as f64 + 2.0);
                let exact = objective.line_minimizer(&grad, &fw_dir, 1.0);
                // Past twice the exact minimizer the step would increase f.
                let gamma = if schedule > 2.0 * exact {
                    exact
                } else {
                    schedule
                };
                (gamma, toward, false)
            }
            StepRule::AwayLineSearch => {
                let active = (0..n).filter(|&c| w[c] > 0.0);
                let away_v = active.fold(None::<usize>, |best, c| match best {
                    Some(b) if scores[b] >= scores[c] => Some(b),
                    _ => Some(c),
                });
                let away_v = away_v.expect("weights sum to one");
                let away_gap = scores[away_v] - current;
                if away_gap > gap && w[away_v] < 1.0 {
                    let dir: Vec<f64> = x
                        .iter()
                        .zip(matrix.column(away_v))
                        .map(|(a, b)| a - b)
                        .collect();
                    let max = w[away_v] / (1.0 - w[away_v]);
                    let gamma = objective.line_minimizer(&grad, &dir, max);
                    (gamma, away_v, true)
                } else {
                    let gamma = objective.line_minimizer(&grad, &fw_dir, 1.0);
                    (gamma, toward, false)
                }
            }
        };

        if gamma <= 0.0 {
            // No descent available along the chosen direction.
            break;
        }
        if away {
            for wc in w.iter_mut() {
                *wc *= 1.0 + gamma;
            }
            w[vertex] -= gamma;
            if w[vertex] < 1e-15 {
                w[vertex] = 0.0;
            }
        } else {
            for wc in w.iter_mut() {
                *wc *= 1.0 - gamma;
            }
            w[vertex] += gamma;
        }
        x = matrix.apply(&w);
        let next = objective.value(&x);
        // Exact line search can still lose the last ulp; keep the best iterate.
        if next <= value {
            value = next;
            best_w.clone_from(&w);
        }
        history.push(value);
    }

    // Renormalize away accumulated rounding.
    let sum: f64 = best_w.iter().sum();
    for wc in best_w.iter_mut() {
        *wc /= sum;
    }
    let value = objective.value(&matrix.apply(&best_w));
    SimplexRun {
        weights: best_w,
        value,
        gap,
        iterations,
        converged,
        history,
    }
}

/// Best instruction-set mixture for an observed correlation table.
pub fn fit_to_data(observed: &CorrelationTable, opts: &FitOptions) -> Result<FitResult> {
    if opts.max_iterations == 0 || opts.tolerance.is_nan() || opts.tolerance < 0.0 {
        return Err(Error::InvalidArgument(
            "fit needs a positive iteration budget and tolerance ≥ 0".into(),
        ));
    }
    let shape = observed.shape();
    let matrix = StrategyMatrix::new(shape)?;
    let run = frank_wolfe(&matrix, &Objective::LeastSquares(observed.values()), opts);
    Ok(FitResult {
        model: LhvModel::new(shape, run.weights)?,
        residual: run.value.max(0.0),
        iterations_used: run.iterations,
        duality_gap: run.gap,
        converged: run.converged,
        residual_history: run.history,
    })
}

/// Maximizes the expression over instruction-set mixtures by conditional
/// gradient. Returns the maximizing model and its value.
pub fn maximize_bell_value(expr: &BellExpression, opts: &FitOptions) -> Result<(LhvModel, f64)> {
    let shape = expr.shape();
    let matrix = StrategyMatrix::new(shape)?;
    let run = frank_wolfe(&matrix, &Objective::Linear(expr.coefficients()), opts);
    let model = LhvModel::new(shape, run.weights)?;
    let value = model_bell_value(&model, expr)?;
    Ok((model, value))
}

/// Cached strategy sampler for repeated draws from one model.
#[derive(Debug, Clone)]
pub struct LhvSampler {
    shape: Shape,
    index: WeightedIndex<f64>,
}

impl LhvSampler {
    pub fn new(model: &LhvModel) -> Self {
        LhvSampler {
            shape: model.shape,
            index: WeightedIndex::new(&model.weights).expect("model weights are a distribution"),
        }
    }

    /// Draws a hidden strategy and reads off its outcomes for `t`.
    pub fn sample<R: Rng + ?Sized>(&self, t: SettingTuple, rng: &mut R) -> [i8; 3] {
        let code = self.index.sample(rng) as u64;
        InstructionSet::from_index(self.shape, code).respond(t)
    }
}

pub fn sample_outcome<R: Rng + ?Sized>(model: &LhvModel, t: SettingTuple, rng: &mut R) -> [i8; 3] {
    LhvSampler::new(model).sample(t, rng)
}
