//! Finite-statistics experiments: seeded simulation of click counts,
//! correlation estimates, visibility fits and the quantum-versus-local
//! comparison.
//!
//! Each setting tuple is sampled in its own block from the stream
//! `rng::stream(seed, tuple_index)`, so estimates of different tuples are
//! independent and parallel and sequential runs produce identical datasets.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bell::{
    self, quantum_table, tuple_at, tuple_count, tuple_index, BellExpression, CorrelationTable,
    SettingTuple, SettingsAssignment, Shape,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lhv::{self, FitOptions, FitResult, LhvModel, LhvSampler};
use crate::quantum::{outcome_distribution, outcome_product, QuantumState};
use crate::rng;

/// Absolute residual difference below which the comparison is a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Simulation parameters shared by the quantum and local sources.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub shots_per_setting: u64,
    pub seed: u64,
    pub assignment: SettingsAssignment,
    pub expression: BellExpression,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(
        shots_per_setting: u64,
        seed: u64,
        assignment: SettingsAssignment,
        expression: BellExpression,
    ) -> Result<Self> {
        if shots_per_setting == 0 {
            return Err(Error::InvalidArgument(
                "shots_per_setting must be at least 1".into(),
            ));
        }
        if assignment.shape() != expression.shape() {
            return Err(Error::ShapeMismatch {
                expected: expression.shape(),
                found: assignment.shape(),
            });
        }
        Ok(ExperimentConfig {
            shots_per_setting,
            seed,
            assignment,
            expression,
            execution: Execution::default(),
        })
    }

    /// Mermin's expression with the canonical x/y settings.
    pub fn mermin(shots_per_setting: u64, seed: u64) -> Result<Self> {
        let (expr, assign) = bell::mermin3();
        ExperimentConfig::new(shots_per_setting, seed, assign, expr)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Outcome counts for one joint setting, indexed as `quantum::OUTCOME_LABELS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleCounts {
    pub settings: SettingTuple,
    pub counts: [u64; 8],
}

impl TupleCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Click counts for every joint setting of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    assignment: SettingsAssignment,
    shots_per_setting: u64,
    tuples: Vec<TupleCounts>,
}

impl Dataset {
    /// Requires every tuple of the assignment's shape exactly once, each
    /// summing to `shots_per_setting`. Tuples are stored in index order.
    pub fn new(
        assignment: SettingsAssignment,
        shots_per_setting: u64,
        tuples: Vec<TupleCounts>,
    ) -> Result<Self> {
        let shape = assignment.shape();
        if shots_per_setting == 0 {
            return Err(Error::InvalidDataset(
                "shots_per_setting must be at least 1".into(),
            ));
        }
        let mut slots: Vec<Option<TupleCounts>> = vec![None; tuple_count(shape)];
        for tc in tuples {
            let t = tc.settings;
            if t.iter().zip(shape.iter()).any(|(a, k)| a >= k) {
                return Err(Error::InvalidDataset(format!(
                    "tuple {t:?} outside shape {shape:?}"
                )));
            }
            if tc.total() != shots_per_setting {
                return Err(Error::InvalidDataset(format!(
                    "tuple {t:?} has {} counts, expected {shots_per_setting}",
                    tc.total()
                )));
            }
            let slot = &mut slots[tuple_index(shape, t)];
            if slot.is_some() {
                return Err(Error::InvalidDataset(format!("tuple {t:?} appears twice")));
            }
            *slot = Some(tc);
        }
        let tuples = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| {
                    Error::InvalidDataset(format!("tuple {:?} missing", tuple_at(shape, i)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            assignment,
            shots_per_setting,
            tuples,
        })
    }

    pub fn shape(&self) -> Shape {
        self.assignment.shape()
    }

    pub fn assignment(&self) -> &SettingsAssignment {
        &self.assignment
    }

    pub fn shots_per_setting(&self) -> u64 {
        self.shots_per_setting
    }

    pub fn tuples(&self) -> &[TupleCounts] {
        &self.tuples
    }

    pub fn counts(&self, t: SettingTuple) -> &[u64; 8] {
        &self.tuples[tuple_index(self.shape(), t)].counts
    }
}

/// Draws a multinomial sample of `shots` over `probs` as a chain of
/// conditional binomials.
fn multinomial(shots: u64, probs: &[f64; 8], rng: &mut rng::StreamRng) -> [u64; 8] {
    let clean = probs.map(|p| p.max(0.0));
    let total: f64 = clean.iter().sum();
    let mut counts = [0u64; 8];
    let mut remaining = shots;
    let mut mass = 1.0;
    for k in 0..7 {
        if remaining == 0 {
            break;
        }
        let p = clean[k] / total;
        let cond = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = Binomial::new(remaining, cond)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[k] = c;
        remaining -= c;
        mass -= p;
    }
    counts[7] += remaining;
    counts
}

/// Samples every setting tuple of the config from `state`.
pub fn simulate_quantum(state: &QuantumState, config: &ExperimentConfig) -> Result<Dataset> {
    let shape = config.assignment.shape();
    let tuples = exec::map_indexed(tuple_count(shape), config.execution, |idx| {
        let t = tuple_at(shape, idx);
        let [a, b, c] = config.assignment.settings_for(t);
        let probs = outcome_distribution(state, &a, &b, &c);
        let mut rng = rng::stream(config.seed, idx as u64);
        TupleCounts {
            settings: t,
            counts: multinomial(config.shots_per_setting, &probs, &mut rng),
        }
    });
    Dataset::new(config.assignment.clone(), config.shots_per_setting, tuples)
}

fn outcome_index(o: [i8; 3]) -> usize {
    o.iter().fold(0, |acc, &x| acc * 2 + usize::from(x < 0))
}

/// Samples every setting tuple by repeated hidden-strategy draws.
pub fn simulate_lhv(model: &LhvModel, config: &ExperimentConfig) -> Result<Dataset> {
    let shape = config.expression.shape();
    if model.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape,
            found: model.shape(),
        });
    }
    let sampler = LhvSampler::new(model);
    let tuples = exec::map_indexed(tuple_count(shape), config.execution, |idx| {
        let t = tuple_at(shape, idx);
        let mut rng = rng::stream(config.seed, idx as u64);
        let mut counts = [0u64; 8];
        for _ in 0..config.shots_per_setting {
            counts[outcome_index(sampler.sample(t, &mut rng))] += 1;
        }
        TupleCounts {
            settings: t,
            counts,
        }
    });
    Dataset::new(config.assignment.clone(), config.shots_per_setting, tuples)
}

/// Sample mean of the outcome product with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `None` for imported estimates whose sample size is unknown.
    pub shots: Option<u64>,
}

impl CorrelationEstimate {
    /// Plug-in estimate `stderr = sqrt((1 − mean²)/shots)`.
    pub fn from_sample(mean: f64, shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidDataset("estimate from zero shots".into()));
        }
        if !mean.is_finite() || mean.abs() > 1.0 {
            return Err(Error::InvalidDataset(format!(
                "mean {mean} outside [-1, 1]"
            )));
        }
        let stderr = ((1.0 - mean * mean).max(0.0) / shots as f64).sqrt();
        Ok(CorrelationEstimate {
            mean,
            stderr,
            shots: Some(shots),
        })
    }

    pub fn imported(mean: f64, stderr: f64) -> Result<Self> {
        if !mean.is_finite() || mean.abs() > 1.0 + bell::ENTRY_SLACK {
            return Err(Error::InvalidDataset(format!(
                "mean {mean} outside [-1, 1]"
            )));
        }
        if !stderr.is_finite() || stderr < 0.0 {
            return Err(Error::InvalidDataset(format!(
                "stderr {stderr} must be finite and ≥ 0"
            )));
        }
        Ok(CorrelationEstimate {
            mean,
            stderr,
            shots: None,
        })
    }

    /// Noise-free value, as from infinite statistics.
    pub fn exact(mean: f64) -> Self {
        CorrelationEstimate {
            mean,
            stderr: 0.0,
            shots: None,
        }
    }
}

/// One [`CorrelationEstimate`] per joint setting.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    shape: Shape,
    entries: Vec<CorrelationEstimate>,
}

impl EstimateTable {
    pub fn new(shape: Shape, entries: Vec<CorrelationEstimate>) -> Result<Self> {
        if entries.len() != tuple_count(shape) {
            return Err(Error::InvalidDataset(format!(
                "{} estimates for shape {shape:?}",
                entries.len()
            )));
        }
        // Validates the entry range.
        CorrelationTable::new(shape, entries.iter().map(|e| e.mean).collect())?;
        Ok(EstimateTable { shape, entries })
    }

    /// Zero-error estimates equal to an exact table.
    pub fn exact(table: &CorrelationTable) -> Self {
        EstimateTable {
            shape: table.shape(),
            entries: table
                .values()
                .iter()
                .map(|&m| CorrelationEstimate::exact(m))
                .collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn entries(&self) -> &[CorrelationEstimate] {
        &self.entries
    }

    pub fn get(&self, t: SettingTuple) -> &CorrelationEstimate {
        &self.entries[tuple_index(self.shape, t)]
    }

    pub fn means(&self) -> CorrelationTable {
        CorrelationTable::new(self.shape, self.entries.iter().map(|e| e.mean).collect())
            .expect("means validated on construction")
    }
}

pub fn estimate_correlations(data: &Dataset) -> Result<EstimateTable> {
    let entries = data
        .tuples()
        .iter()
        .map(|tc| {
            let shots = tc.total();
            if shots == 0 {
                return Err(Error::InvalidDataset(format!(
                    "tuple {:?} has no counts",
                    tc.settings
                )));
            }
            let signed: i128 = tc
                .counts
                .iter()
                .enumerate()
                .map(|(o, &n)| i128::from(outcome_product(o)) * i128::from(n))
                .sum();
            CorrelationEstimate::from_sample(signed as f64 / shots as f64, shots)
        })
        .collect::<Result<Vec<_>>>()?;
    EstimateTable::new(data.shape(), entries)
}

/// Bell value with an independent-tuple propagated standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub value: f64,
    pub stderr: f64,
}

pub fn estimate_bell(expr: &BellExpression, estimates: &EstimateTable) -> Result<BellEstimate> {
    if expr.shape() != estimates.shape {
        return Err(Error::ShapeMismatch {
            expected: expr.shape(),
            found: estimates.shape,
        });
    }
    let (value, var) = expr
        .coefficients()
        .iter()
        .zip(&estimates.entries)
        .fold((0.0, 0.0), |(v, s), (c, e)| {
            (v + c * e.mean, s + c * c * e.stderr * e.stderr)
        });
    Ok(BellEstimate {
        value,
        stderr: var.sqrt(),
    })
}

/// Least-squares visibility within the one-parameter noisy-GHZ family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    /// `Σ (E_obs − v·E_ref)²` over all tuples.
    pub residual: f64,
    /// Standard error of the unclamped estimator from the per-tuple errors.
    pub stderr: f64,
}

/// `v* = Σ E_obs·E_ref / Σ E_ref²`, clamped to `[0, 1]`.
pub fn fit_visibility(
    estimates: &EstimateTable,
    reference: &CorrelationTable,
) -> Result<VisibilityFit> {
    if estimates.shape != reference.shape() {
        return Err(Error::ShapeMismatch {
            expected: reference.shape(),
            found: estimates.shape,
        });
    }
    let (mut cross, mut norm, mut var) = (0.0, 0.0, 0.0);
    for (e, &r) in estimates.entries.iter().zip(reference.values()) {
        if r.abs() > 1e-12 {
            cross += e.mean * r;
            norm += r * r;
            var += r * r * e.stderr * e.stderr;
        }
    }
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "reference correlation table is identically zero".into(),
        ));
    }
    let visibility = (cross / norm).clamp(0.0, 1.0);
    let residual = estimates
        .entries
        .iter()
        .zip(reference.values())
        .map(|(e, &r)| (e.mean - visibility * r).powi(2))
        .sum();
    Ok(VisibilityFit {
        visibility,
        residual,
        stderr: var.sqrt() / norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    QuantumCloser,
    LhvCloser,
    Tie,
}

impl Verdict {
    pub fn from_residuals(quantum: f64, lhv: f64) -> Self {
        if (quantum - lhv).abs() <= TIE_TOLERANCE {
            Verdict::Tie
        } else if quantum < lhv {
            Verdict::QuantumCloser
        } else {
            Verdict::LhvCloser
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::QuantumCloser => "quantum_closer",
            Verdict::LhvCloser => "lhv_closer",
            Verdict::Tie => "tie",
        }
    }
}

/// Observed and fitted correlation for one tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleFit {
    pub settings: SettingTuple,
    pub observed: f64,
    pub quantum: f64,
    pub lhv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub quantum_fit: VisibilityFit,
    pub lhv_fit: FitResult,
    /// Bell value of the best-fitting local model.
    pub lhv_bell_value: f64,
    pub mermin_estimate: BellEstimate,
    pub verdict: Verdict,
    pub per_tuple: Vec<TupleFit>,
}

/// Fits both model families to the dataset and names the closer one.
pub fn compare_models(
    data: &Dataset,
    expr: &BellExpression,
    assignment: &SettingsAssignment,
) -> Result<ComparisonReport> {
    compare_estimates(
        &estimate_correlations(data)?,
        expr,
        assignment,
        &FitOptions::default(),
    )
}

/// [`compare_models`] on an estimate table (simulated, imported or exact).
pub fn compare_estimates(
    estimates: &EstimateTable,
    expr: &BellExpression,
    assignment: &SettingsAssignment,
    fit: &FitOptions,
) -> Result<ComparisonReport> {
    if assignment.shape() != estimates.shape {
        return Err(Error::ShapeMismatch {
            expected: assignment.shape(),
            found: estimates.shape,
        });
    }
    let reference = quantum_table(&QuantumState::ghz(), assignment);
    let quantum_fit = fit_visibility(estimates, &reference)?;
    let observed = estimates.means();
    let lhv_fit = lhv::fit_to_data(&observed, fit)?;
    let lhv_bell_value = lhv::model_bell_value(&lhv_fit.model, expr)?;
    let mermin_estimate = estimate_bell(expr, estimates)?;
    let lhv_pred = lhv::predictions(&lhv_fit.model);
    let per_tuple = bell::tuples(estimates.shape)
        .map(|t| TupleFit {
            settings: t,
            observed: observed.get(t),
            quantum: quantum_fit.visibility * reference.get(t),
            lhv: lhv_pred.get(t),
        })
        .collect();
    Ok(ComparisonReport {
        verdict: Verdict::from_residuals(quantum_fit.residual, lhv_fit.residual),
        quantum_fit,
        lhv_fit,
        lhv_bell_value,
        mermin_estimate,
        per_tuple,
    })
}

/// Bell estimates from `runs` independent repetitions of a quantum
/// experiment. Run `r` uses root seed `rng::run_seed(config.seed, r)`.
pub fn repeated_bell_estimates(
    state: &QuantumState,
    config: &ExperimentConfig,
    runs: usize,
) -> Result<Vec<BellEstimate>> {
    let inner = config.clone().with_execution(Execution::Sequential);
    exec::map_indexed(runs, config.execution, |r| {
        let cfg = inner
            .clone()
            .with_seed(rng::run_seed(config.seed, r as u64));
        let data = simulate_quantum(state, &cfg)?;
        estimate_bell(&cfg.expression, &estimate_correlations(&data)?)
    })
    .into_iter()
    .collect()
}
