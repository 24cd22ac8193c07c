//! Bell expressions over three parties, correlation tables and bounds.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lhv::InstructionSet;
use crate::quantum::{correlation, MeasurementSetting, QuantumState};
use crate::rng;

/// Number of measurement settings per party.
pub type Shape = [usize; 3];

/// Joint-setting tuple `(i, j, k)`.
pub type SettingTuple = [usize; 3];

/// Slack allowed on correlation entries outside `[-1, 1]`.
pub const ENTRY_SLACK: f64 = 1e-9;

/// Default cap on the number of enumerated deterministic strategies.
pub const DEFAULT_STRATEGY_CAP: u64 = 1 << 24;

// Below this many strategies the enumeration stays on the calling thread.
const PARALLEL_MIN_STRATEGIES: u64 = 1 << 12;

pub fn tuple_count(shape: Shape) -> usize {
    shape.iter().product()
}

/// Row-major linear index of a setting tuple, party 1 slowest.
pub fn tuple_index(shape: Shape, t: SettingTuple) -> usize {
    (t[0] * shape[1] + t[1]) * shape[2] + t[2]
}

pub fn tuple_at(shape: Shape, idx: usize) -> SettingTuple {
    [
        idx / (shape[1] * shape[2]),
        (idx / shape[2]) % shape[1],
        idx % shape[2],
    ]
}

/// All setting tuples of `shape` in linear-index order.
pub fn tuples(shape: Shape) -> impl Iterator<Item = SettingTuple> {
    (0..tuple_count(shape)).map(move |i| tuple_at(shape, i))
}

fn check_shape(shape: Shape) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::InvalidExpression(format!(
            "every party needs at least one setting, got {shape:?}"
        )));
    }
    Ok(())
}

fn in_shape(shape: Shape, t: SettingTuple) -> bool {
    t.iter().zip(shape.iter()).all(|(a, k)| a < k)
}

/// Real coefficients on joint-setting tuples: `B = Σ c(i,j,k) E(i,j,k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpressionFile", into = "ExpressionFile")]
pub struct BellExpression {
    shape: Shape,
    coefficients: Vec<f64>,
}

impl BellExpression {
    /// Builds an expression from sparse `(tuple, coefficient)` terms.
    /// Repeated tuples are rejected.
    pub fn new(shape: Shape, terms: impl IntoIterator<Item = (SettingTuple, f64)>) -> Result<Self> {
        check_shape(shape)?;
        let mut coefficients = vec![0.0; tuple_count(shape)];
        let mut seen = vec![false; coefficients.len()];
        for (t, c) in terms {
            if !in_shape(shape, t) {
                return Err(Error::InvalidExpression(format!(
                    "tuple {t:?} outside shape {shape:?}"
                )));
            }
            let idx = tuple_index(shape, t);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::InvalidExpression(format!(
                    "tuple {t:?} listed twice"
                )));
            }
            coefficients[idx] = c;
        }
        BellExpression::from_dense(shape, coefficients)
    }

    /// Builds an expression from a dense coefficient vector in tuple order.
    pub fn from_dense(shape: Shape, coefficients: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        if coefficients.len() != tuple_count(shape) {
            return Err(Error::InvalidExpression(format!(
                "{} coefficients for shape {shape:?} (expected {})",
                coefficients.len(),
                tuple_count(shape)
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidExpression("non-finite coefficient".into()));
        }
        if coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidExpression("no nonzero coefficient".into()));
        }
        Ok(BellExpression {
            shape,
            coefficients,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, t: SettingTuple) -> f64 {
        self.coefficients[tuple_index(self.shape, t)]
    }

    /// Nonzero terms in tuple order.
    pub fn terms(&self) -> impl Iterator<Item = (SettingTuple, f64)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(move |(i, &c)| (tuple_at(self.shape, i), c))
    }

    pub fn negated(&self) -> BellExpression {
        BellExpression {
            shape: self.shape,
            coefficients: self.coefficients.iter().map(|c| -c).collect(),
        }
    }

    /// Relabels parties: party `p` of the result is party `perm[p]` of `self`.
    pub fn permute_parties(&self, perm: [usize; 3]) -> Result<BellExpression> {
        let mut check = perm;
        check.sort_unstable();
        if check != [0, 1, 2] {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of parties"
            )));
        }
        let shape = [
            self.shape[perm[0]],
            self.shape[perm[1]],
            self.shape[perm[2]],
        ];
        let mut coefficients = vec![0.0; tuple_count(shape)];
        for t in tuples(self.shape) {
            let mut nt = [0; 3];
            for p in 0..3 {
                nt[p] = t[perm[p]];
            }
            coefficients[tuple_index(shape, nt)] = self.coefficient(t);
        }
        Ok(BellExpression {
            shape,
            coefficients,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ExpressionTerm {
    tuple: SettingTuple,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct ExpressionFile {
    settings: Shape,
    coefficients: Vec<ExpressionTerm>,
}

impl TryFrom<ExpressionFile> for BellExpression {
    type Error = Error;
    fn try_from(f: ExpressionFile) -> Result<Self> {
        BellExpression::new(
            f.settings,
            f.coefficients.into_iter().map(|t| (t.tuple, t.c)),
        )
    }
}

impl From<BellExpression> for ExpressionFile {
    fn from(e: BellExpression) -> Self {
        ExpressionFile {
            settings: e.shape,
            coefficients: e
                .terms()
                .map(|(tuple, c)| ExpressionTerm { tuple, c })
                .collect(),
        }
    }
}

/// Per-party ordered measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "[Vec<MeasurementSetting>; 3]",
    into = "[Vec<MeasurementSetting>; 3]"
)]
pub struct SettingsAssignment {
    parties: [Vec<MeasurementSetting>; 3],
}

impl SettingsAssignment {
    pub fn new(parties: [Vec<MeasurementSetting>; 3]) -> Result<Self> {
        if parties.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument(
                "every party needs at least one setting".into(),
            ));
        }
        Ok(SettingsAssignment { parties })
    }

    /// `x = (1,0,0)`, `y = (0,1,0)` for every party.
    pub fn xy() -> Self {
        let xy = vec![MeasurementSetting::X, MeasurementSetting::Y];
        SettingsAssignment {
            parties: [xy.clone(), xy.clone(), xy],
        }
    }

    pub fn shape(&self) -> Shape {
        [
            self.parties[0].len(),
            self.parties[1].len(),
            self.parties[2].len(),
        ]
    }

    pub fn party(&self, p: usize) -> &[MeasurementSetting] {
        &self.parties[p]
    }

    pub fn setting(&self, party: usize, idx: usize) -> &MeasurementSetting {
        &self.parties[party][idx]
    }

    fn triple(&self, t: SettingTuple) -> [&MeasurementSetting; 3] {
        [
            &self.parties[0][t[0]],
            &self.parties[1][t[1]],
            &self.parties[2][t[2]],
        ]
    }

    /// Settings for the joint tuple `t`.
    pub fn settings_for(&self, t: SettingTuple) -> [MeasurementSetting; 3] {
        let [a, b, c] = self.triple(t);
        [*a, *b, *c]
    }
}

impl TryFrom<[Vec<MeasurementSetting>; 3]> for SettingsAssignment {
    type Error = Error;
    fn try_from(parties: [Vec<MeasurementSetting>; 3]) -> Result<Self> {
        SettingsAssignment::new(parties)
    }
}

impl From<SettingsAssignment> for [Vec<MeasurementSetting>; 3] {
    fn from(a: SettingsAssignment) -> Self {
        a.parties
    }
}

/// One correlation value per joint-setting tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    shape: Shape,
    values: Vec<f64>,
}

impl CorrelationTable {
    /// Rejects entries outside `[-1, 1]` by more than [`ENTRY_SLACK`].
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        if values.len() != tuple_count(shape) {
            return Err(Error::InvalidArgument(format!(
                "{} correlation values for shape {shape:?}",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + ENTRY_SLACK {
                return Err(Error::CorrelationOutOfRange {
                    tuple: tuple_at(shape, i),
                    value: v,
                });
            }
        }
        Ok(CorrelationTable { shape, values })
    }

    pub fn from_fn(shape: Shape, f: impl FnMut(SettingTuple) -> f64) -> Result<Self> {
        CorrelationTable::new(shape, tuples(shape).map(f).collect())
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        CorrelationTable::new(shape, vec![0.0; tuple_count(shape)])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, t: SettingTuple) -> f64 {
        self.values[tuple_index(self.shape, t)]
    }

    /// Entry-wise scaling by `s ∈ [0, 1]`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("scale {s} outside [0, 1]")));
        }
        Ok(CorrelationTable {
            shape: self.shape,
            values: self.values.iter().map(|v| v * s).collect(),
        })
    }
}

fn expect_shape(expected: Shape, found: Shape) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// `Σ c(i,j,k) · E(i,j,k)`.
pub fn evaluate(expr: &BellExpression, table: &CorrelationTable) -> Result<f64> {
    expect_shape(expr.shape, table.shape)?;
    Ok(expr
        .coefficients
        .iter()
        .zip(&table.values)
        .map(|(c, e)| c * e)
        .sum())
}

/// Correlation table of `state` under `assign`, one entry per tuple.
pub fn quantum_table(state: &QuantumState, assign: &SettingsAssignment) -> CorrelationTable {
    let shape = assign.shape();
    let values = tuples(shape)
        .map(|t| {
            let [a, b, c] = assign.triple(t);
            correlation(state, a, b, c)
        })
        .collect();
    CorrelationTable { shape, values }
}

pub fn quantum_value(
    expr: &BellExpression,
    state: &QuantumState,
    assign: &SettingsAssignment,
) -> Result<f64> {
    expect_shape(expr.shape, assign.shape())?;
    evaluate(expr, &quantum_table(state, assign))
}

/// `Σ |c|`: the maximum over all tables with entries in `[-1, 1]`.
pub fn algebraic_bound(expr: &BellExpression) -> f64 {
    expr.coefficients.iter().map(|c| c.abs()).sum()
}

/// Mermin's expression `+XXX − XYY − YXY − YYX` and its canonical settings.
pub fn mermin3() -> (BellExpression, SettingsAssignment) {
    let expr = BellExpression::new(
        [2, 2, 2],
        [
            ([0, 0, 0], 1.0),
            ([0, 1, 1], -1.0),
            ([1, 0, 1], -1.0),
            ([1, 1, 0], -1.0),
        ],
    )
    .expect("Mermin expression is well formed");
    (expr, SettingsAssignment::xy())
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub cap: u64,
    pub execution: Execution,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            cap: DEFAULT_STRATEGY_CAP,
            execution: Execution::default(),
        }
    }
}

/// Maximum over deterministic strategies with the maximizing strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBound {
    pub value: f64,
    pub witness: InstructionSet,
}

/// Number of deterministic strategies for `shape`, checked against `cap`.
pub(crate) fn strategy_count(shape: Shape, cap: u64) -> Result<u64> {
    let bits: u32 = shape.iter().map(|&k| k as u32).sum();
    let count = 1u128.checked_shl(bits).unwrap_or(u128::MAX);
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap { count, cap });
    }
    Ok(count as u64)
}

pub fn lhv_bound(expr: &BellExpression) -> Result<LocalBound> {
    lhv_bound_with(expr, &EnumerationOptions::default())
}

/// Exact maximum of the expression over all deterministic instruction sets.
/// Ties go to the first strategy in lexicographic order.
pub fn lhv_bound_with(expr: &BellExpression, opts: &EnumerationOptions) -> Result<LocalBound> {
    let shape = expr.shape;
    let count = strategy_count(shape, opts.cap)?;
    let total_bits = shape.iter().sum::<usize>();
    let offsets = [0, shape[0], shape[0] + shape[1]];
    let terms: Vec<([usize; 3], f64)> = expr
        .terms()
        .map(|(t, c)| {
            let pos = [0, 1, 2].map(|p| total_bits - 1 - (offsets[p] + t[p]));
            (pos, c)
        })
        .collect();

    let score = |code: u64| {
        let v: f64 = terms
            .iter()
            .map(|&(pos, c)| {
                let flips = pos.iter().map(|&b| (code >> b) & 1).sum::<u64>();
                if flips % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum();
        (v, code)
    };
    let better = |a: (f64, u64), b: (f64, u64)| {
        if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
            a
        } else {
            b
        }
    };
    let exec = if count >= PARALLEL_MIN_STRATEGIES {
        opts.execution
    } else {
        Execution::Sequential
    };
    let (value, code) = exec::map_reduce(count, exec, (f64::NEG_INFINITY, u64::MAX), score, better);
    Ok(LocalBound {
        value,
        witness: InstructionSet::from_index(shape, code),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 20,
            iterations: 200,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingsSearch {
    pub assignment: SettingsAssignment,
    pub value: f64,
}

fn random_setting(rng: &mut rng::StreamRng) -> MeasurementSetting {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if let Ok(s) = MeasurementSetting::from_direction(v) {
            return s;
        }
    }
}

/// Contribution of the tuples that use `(party, idx)`, with that setting
/// replaced by `probe`. Linear in the probe's Bloch vector.
fn partial_value(
    expr: &BellExpression,
    state: &QuantumState,
    parties: &[Vec<MeasurementSetting>; 3],
    party: usize,
    idx: usize,
    probe: &MeasurementSetting,
) -> f64 {
    expr.terms()
        .filter(|(t, _)| t[party] == idx)
        .map(|(t, c)| {
            let mut s = [&parties[0][t[0]], &parties[1][t[1]], &parties[2][t[2]]];
            s[party] = probe;
            c * correlation(state, s[0], s[1], s[2])
        })
        .sum()
}

fn ascend(
    expr: &BellExpression,
    state: &QuantumState,
    iterations: usize,
    rng: &mut rng::StreamRng,
) -> SettingsAssignment {
    let shape = expr.shape;
    let mut parties: [Vec<MeasurementSetting>; 3] =
        [0, 1, 2].map(|p| (0..shape[p]).map(|_| random_setting(rng)).collect());
    let axes = [
        MeasurementSetting::X,
        MeasurementSetting::Y,
        MeasurementSetting::Z,
    ];
    let mut last = f64::NEG_INFINITY;
    for _ in 0..iterations {
        for party in 0..3 {
            for idx in 0..shape[party] {
                // The objective is affine in this Bloch vector; its best unit
                // vector is the normalized gradient.
                let grad = axes.map(|a| partial_value(expr, state, &parties, party, idx, &a));
                if let Ok(s) = MeasurementSetting::from_direction(grad) {
                    parties[party][idx] = s;
                }
            }
        }
        let assign = SettingsAssignment {
            parties: parties.clone(),
        };
        let value = evaluate(expr, &quantum_table(state, &assign)).unwrap_or(f64::NEG_INFINITY);
        if value - last <= 1e-14 {
            break;
        }
        last = value;
    }
    SettingsAssignment { parties }
}

/// Random-restart coordinate ascent over Bloch vectors.
pub fn optimize_settings(
    expr: &BellExpression,
    state: &QuantumState,
    opts: &SearchOptions,
) -> Result<SettingsSearch> {
    if opts.restarts == 0 || opts.iterations == 0 {
        return Err(Error::InvalidArgument(
            "restarts and iterations must be positive".into(),
        ));
    }
    let runs = exec::map_indexed(opts.restarts, opts.execution, |r| {
        let mut rng = rng::stream(opts.seed, r as u64);
        let assignment = ascend(expr, state, opts.iterations, &mut rng);
        let value = evaluate(expr, &quantum_table(state, &assignment)).unwrap_or(f64::NEG_INFINITY);
        SettingsSearch { assignment, value }
    });
    let mut best: Option<SettingsSearch> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
