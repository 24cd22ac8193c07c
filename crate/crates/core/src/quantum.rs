//! Dense three-qubit states, spin observables and correlation functions.
//!
//! Party 1 is the most significant bit of the 8-dimensional basis index, so
//! basis state `|b1 b2 b3>` sits at index `4*b1 + 2*b2 + b3`.

use nalgebra::{Matrix2, SMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DensityMatrix = SMatrix<Complex64, 8, 8>;
pub type SpinObservable = Matrix2<Complex64>;

/// Slack for Hermiticity, trace and algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Lowest eigenvalue accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-10;

/// Labels of the eight joint outcomes, in outcome-index order.
pub const OUTCOME_LABELS: [&str; 8] = ["+++", "++-", "+-+", "+--", "-++", "-+-", "--+", "---"];

/// The ±1 outcome of each party for outcome index `idx` (bit set = −1).
pub fn outcome_signs(idx: usize) -> [i8; 3] {
    let s = |bit: usize| if (idx >> bit) & 1 == 0 { 1 } else { -1 };
    [s(2), s(1), s(0)]
}

/// Product of the three outcomes for outcome index `idx`.
pub fn outcome_product(idx: usize) -> i8 {
    if idx.count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Mixing weight of the pure entangled component against white noise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Visibility(f64);

impl Visibility {
    pub fn new(v: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&v) {
            Ok(Visibility(v))
        } else {
            Err(Error::InvalidVisibility(v))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Visibility {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Visibility::new(v)
    }
}

impl From<Visibility> for f64 {
    fn from(v: Visibility) -> f64 {
        v.0
    }
}

/// A unit Bloch vector selecting the dichotomic observable `n·σ` for one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MeasurementSetting([f64; 3]);

impl MeasurementSetting {
    pub const X: MeasurementSetting = MeasurementSetting([1.0, 0.0, 0.0]);
    pub const Y: MeasurementSetting = MeasurementSetting([0.0, 1.0, 0.0]);
    pub const Z: MeasurementSetting = MeasurementSetting([0.0, 0.0, 1.0]);

    /// Accepts only vectors whose norm is 1 within [`ALGEBRAIC_TOL`].
    pub fn new(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        let norm = (nx * nx + ny * ny + nz * nz).sqrt();
        if norm.is_finite() && (norm - 1.0).abs() <= ALGEBRAIC_TOL {
            Ok(MeasurementSetting([nx, ny, nz]))
        } else {
            Err(Error::NonUnitSetting(nx, ny, nz))
        }
    }

    /// Normalizes an arbitrary nonzero direction.
    pub fn from_direction(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || norm <= f64::EPSILON {
            return Err(Error::NonUnitSetting(v[0], v[1], v[2]));
        }
        Ok(MeasurementSetting([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Point on the unit sphere from polar angle `theta` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        MeasurementSetting([
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ])
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.0
    }
}

impl TryFrom<[f64; 3]> for MeasurementSetting {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        MeasurementSetting::new(v[0], v[1], v[2])
    }
}

impl From<MeasurementSetting> for [f64; 3] {
    fn from(s: MeasurementSetting) -> [f64; 3] {
        s.0
    }
}

/// A validated three-qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: DensityMatrix,
}

impl QuantumState {
    /// Validates `matrix` against the density-matrix invariants.
    pub fn from_matrix(matrix: DensityMatrix) -> Result<Self> {
        check_density_matrix(&matrix)?;
        Ok(QuantumState { matrix })
    }

    /// Projector onto `(|000> + |111>)/√2`.
    pub fn ghz() -> Self {
        let half = Complex64::new(0.5, 0.0);
        let mut matrix = DensityMatrix::zeros();
        for &(i, j) in &[(0, 0), (0, 7), (7, 0), (7, 7)] {
            matrix[(i, j)] = half;
        }
        QuantumState { matrix }
    }

    /// The maximally mixed state `1/8`.
    pub fn white_noise() -> Self {
        QuantumState {
            matrix: DensityMatrix::identity() * Complex64::new(0.125, 0.0),
        }
    }

    /// `v·signal + (1−v)·noise`. Convex combinations of valid states are valid.
    pub fn mix(signal: &QuantumState, noise: &QuantumState, v: Visibility) -> Self {
        let v = v.value();
        QuantumState {
            matrix: signal.matrix * Complex64::new(v, 0.0)
                + noise.matrix * Complex64::new(1.0 - v, 0.0),
        }
    }

    /// GHZ state degraded by white noise at visibility `v`.
    pub fn noisy_ghz(v: Visibility) -> Self {
        QuantumState::mix(&QuantumState::ghz(), &QuantumState::white_noise(), v)
    }

    pub fn matrix(&self) -> &DensityMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr ρ²`; equals 1 exactly for pure states.
    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

fn min_eigenvalue(matrix: &DensityMatrix) -> f64 {
    let eig = SymmetricEigen::new(*matrix);
    eig.eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Checks Hermiticity, unit trace and positive semidefiniteness.
pub fn check_density_matrix(matrix: &DensityMatrix) -> Result<()> {
    if matrix
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::InvalidState("non-finite entry".into()));
    }
    let mut herm_dev = 0.0f64;
    for i in 0..8 {
        for j in 0..8 {
            herm_dev = herm_dev.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    if herm_dev > ALGEBRAIC_TOL {
        return Err(Error::InvalidState(format!(
            "not Hermitian (deviation {herm_dev:e})"
        )));
    }
    let tr = matrix.trace();
    if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    let lo = min_eigenvalue(matrix);
    if lo < PSD_FLOOR {
        return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
    }
    Ok(())
}

pub fn ghz_state() -> QuantumState {
    QuantumState::ghz()
}

pub fn white_noise_state() -> QuantumState {
    QuantumState::white_noise()
}

pub fn mix(signal: &QuantumState, noise: &QuantumState, v: Visibility) -> QuantumState {
    QuantumState::mix(signal, noise, v)
}

/// `nx·σx + ny·σy + nz·σz`.
pub fn observable(setting: &MeasurementSetting) -> SpinObservable {
    let [nx, ny, nz] = setting.bloch();
    SpinObservable::new(
        Complex64::new(nz, 0.0),
        Complex64::new(nx, -ny),
        Complex64::new(nx, ny),
        Complex64::new(-nz, 0.0),
    )
}

/// Projector onto the `sign` eigenspace of `observable(setting)`.
fn projector(setting: &MeasurementSetting, sign: i8) -> SpinObservable {
    let half = Complex64::new(0.5, 0.0);
    let s = Complex64::new(f64::from(sign), 0.0);
    (SpinObservable::identity() + observable(setting) * s) * half
}

fn expectation(state: &QuantumState, op: &DensityMatrix) -> f64 {
    // Tr(ρ·op) without forming the product matrix.
    let rho = state.matrix();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..8 {
        for j in 0..8 {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc.re
}

/// `Tr[ρ (O(s1) ⊗ O(s2) ⊗ O(s3))]`.
pub fn correlation(
    state: &QuantumState,
    s1: &MeasurementSetting,
    s2: &MeasurementSetting,
    s3: &MeasurementSetting,
) -> f64 {
    let op: DensityMatrix = observable(s1)
        .kronecker(&observable(s2))
        .kronecker(&observable(s3));
    expectation(state, &op)
}

/// Probabilities of the eight joint outcomes, indexed as in [`OUTCOME_LABELS`].
pub fn outcome_distribution(
    state: &QuantumState,
    s1: &MeasurementSetting,
    s2: &MeasurementSetting,
    s3: &MeasurementSetting,
) -> [f64; 8] {
    let proj = |s: &MeasurementSetting| [projector(s, 1), projector(s, -1)];
    let (p1, p2, p3) = (proj(s1), proj(s2), proj(s3));
    let mut probs = [0.0; 8];
    for (idx, p) in probs.iter_mut().enumerate() {
        let op: DensityMatrix = p1[(idx >> 2) & 1]
            .kronecker(&p2[(idx >> 1) & 1])
            .kronecker(&p3[idx & 1]);
        *p = expectation(state, &op);
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use bellkit_testkit::dense;
    use proptest::prelude::*;

    fn to_rows(m: &DensityMatrix) -> Vec<Vec<Complex64>> {
        (0..8)
            .map(|i| (0..8).map(|j| m[(i, j)]).collect())
            .collect()
    }

    fn unit_vector() -> impl Strategy<Value = MeasurementSetting> {
        (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU)
            .prop_map(|(t, p)| MeasurementSetting::from_angles(t, p))
    }

    #[test]
    fn ghz_is_pure_with_corner_entries() {
        let ghz = ghz_state();
        assert_abs_diff_eq!(ghz.trace(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ghz.purity(), 1.0, epsilon = 1e-12);
        let m = ghz.matrix();
        for (i, j) in [(0, 0), (0, 7), (7, 0), (7, 7)] {
            assert_abs_diff_eq!(m[(i, j)].re, 0.5, epsilon = 1e-15);
        }
        let idem = m * m - m;
        assert!(idem.iter().all(|z| z.norm() <= 1e-12));
        assert!(QuantumState::from_matrix(*m).is_ok());
    }

    #[test]
    fn ghz_matches_hand_expanded_projector() {
        let oracle = dense::ghz_density();
        let ours = to_rows(ghz_state().matrix());
        for i in 0..8 {
            for j in 0..8 {
                assert!((oracle[i][j] - ours[i][j]).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn ghz_commutes_with_qubit_swaps() {
        let rho = to_rows(ghz_state().matrix());
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let swapped = dense::permute_qubits(&rho, a, b);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((swapped[i][j] - rho[i][j]).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn white_noise_is_identity_over_eight() {
        let m = *white_noise_state().matrix();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 0.125 } else { 0.0 };
                assert_eq!(m[(i, j)], Complex64::new(expect, 0.0));
            }
        }
        let eig = SymmetricEigen::new(m);
        assert!(eig.eigenvalues.iter().all(|&e| (e - 0.125).abs() <= 1e-12));
    }

    #[test]
    fn mixing_endpoints() {
        let ghz = ghz_state();
        let noise = white_noise_state();
        assert_eq!(mix(&ghz, &noise, Visibility::new(1.0).unwrap()), ghz);
        assert_eq!(mix(&ghz, &noise, Visibility::new(0.0).unwrap()), noise);
        for v in [0.0, 0.3, 0.71, 1.0] {
            assert_eq!(mix(&noise, &noise, Visibility::new(v).unwrap()), noise);
        }
    }

    #[test]
    fn noisy_ghz_entries_at_071() {
        let rho = QuantumState::noisy_ghz(Visibility::new(0.71).unwrap());
        let m = rho.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 0.71 * 0.5 + 0.29 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 7)].re, 0.71 * 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 3)].re, 0.29 / 8.0, epsilon = 1e-15);
        assert!(QuantumState::from_matrix(*m).is_ok());
    }

    #[test]
    fn visibility_out_of_range_rejected() {
        for v in [-0.01, 1.0001, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                Visibility::new(v),
                Err(Error::InvalidVisibility(_))
            ));
        }
    }

    #[test]
    fn invalid_matrices_rejected() {
        let mut m = *ghz_state().matrix();
        m[(0, 7)] = Complex64::new(0.5, 0.1);
        assert!(QuantumState::from_matrix(m).is_err());

        let m = DensityMatrix::identity() * Complex64::new(0.2, 0.0);
        assert!(QuantumState::from_matrix(m).is_err());

        // Unit trace but with eigenvalues 1.5 and -0.5.
        let mut m = DensityMatrix::zeros();
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            QuantumState::from_matrix(m),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn pauli_observables() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(
            observable(&MeasurementSetting::X),
            SpinObservable::new(zero, one, one, zero)
        );
        assert_eq!(
            observable(&MeasurementSetting::Y),
            SpinObservable::new(zero, -i, i, zero)
        );
        assert_eq!(
            observable(&MeasurementSetting::Z),
            SpinObservable::new(one, zero, zero, -one)
        );
    }

    #[test]
    fn non_unit_setting_rejected() {
        assert!(MeasurementSetting::new(1.0, 1.0, 0.0).is_err());
        assert!(MeasurementSetting::new(0.0, 0.0, 0.0).is_err());
        assert!(MeasurementSetting::from_direction([0.0, 0.0, 0.0]).is_err());
        assert!(MeasurementSetting::new(0.6, 0.8, 0.0).is_ok());
        let s: std::result::Result<MeasurementSetting, _> = serde_json::from_str("[2.0, 0.0, 0.0]");
        assert!(s.is_err());
    }

    #[test]
    fn ghz_correlations_against_dense_oracle() {
        let ghz = ghz_state();
        let rho = to_rows(ghz.matrix());
        let x = MeasurementSetting::X;
        let y = MeasurementSetting::Y;
        let xxx = dense::correlation(&rho, [x.bloch(), x.bloch(), x.bloch()]);
        let xyy = dense::correlation(&rho, [x.bloch(), y.bloch(), y.bloch()]);
        assert_abs_diff_eq!(xxx, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xyy, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(correlation(&ghz, &x, &x, &x), xxx, epsilon = 1e-12);
        assert_abs_diff_eq!(correlation(&ghz, &x, &y, &y), xyy, epsilon = 1e-12);
    }

    #[test]
    fn ghz_z_basis_outcomes() {
        let z = MeasurementSetting::Z;
        let p = outcome_distribution(&ghz_state(), &z, &z, &z);
        for (idx, &pi) in p.iter().enumerate() {
            let expect = if idx == 0 || idx == 7 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(pi, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn white_noise_outcomes_uniform() {
        let s = MeasurementSetting::from_angles(0.4, 2.0);
        let p = outcome_distribution(&white_noise_state(), &s, &MeasurementSetting::X, &s);
        assert!(p.iter().all(|&pi| (pi - 0.125).abs() <= 1e-12));
    }

    #[test]
    fn outcome_helpers() {
        assert_eq!(outcome_signs(0), [1, 1, 1]);
        assert_eq!(outcome_signs(1), [1, 1, -1]);
        assert_eq!(outcome_signs(4), [-1, 1, 1]);
        for (idx, expected) in OUTCOME_LABELS.iter().enumerate() {
            let s = outcome_signs(idx);
            assert_eq!(outcome_product(idx), s[0] * s[1] * s[2]);
            let label: String = s.iter().map(|&x| if x > 0 { '+' } else { '-' }).collect();
            assert_eq!(*expected, label);
        }
    }

    proptest! {
        #[test]
        fn observable_squares_to_identity(n in unit_vector()) {
            let o = observable(&n);
            let sq = o * o - SpinObservable::identity();
            prop_assert!(sq.iter().all(|z| z.norm() <= 1e-12));
            prop_assert!(o.trace().norm() <= 1e-12);
            let eig = SymmetricEigen::new(o);
            let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            prop_assert!((ev[0] + 1.0).abs() <= 1e-12 && (ev[1] - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn correlation_matches_dense_oracle(
            v in 0.0..=1.0f64, a in unit_vector(), b in unit_vector(), c in unit_vector()
        ) {
            let state = QuantumState::noisy_ghz(Visibility::new(v).unwrap());
            let oracle = dense::correlation(&to_rows(state.matrix()), [a.bloch(), b.bloch(), c.bloch()]);
            let ours = correlation(&state, &a, &b, &c);
            prop_assert!((oracle - ours).abs() <= 1e-12);
            prop_assert!(ours.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn white_noise_correlation_vanishes(a in unit_vector(), b in unit_vector(), c in unit_vector()) {
            prop_assert!(correlation(&white_noise_state(), &a, &b, &c).abs() <= 1e-12);
        }

        #[test]
        fn distribution_consistent_with_correlation(
            v in 0.0..=1.0f64, a in unit_vector(), b in unit_vector(), c in unit_vector()
        ) {
            let state = QuantumState::noisy_ghz(Visibility::new(v).unwrap());
            let p = outcome_distribution(&state, &a, &b, &c);
            prop_assert!(p.iter().all(|&x| x >= -1e-12));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let e: f64 = p.iter().enumerate().map(|(i, &x)| f64::from(outcome_product(i)) * x).sum();
            prop_assert!((e - correlation(&state, &a, &b, &c)).abs() <= 1e-12);
        }

        #[test]
        fn correlation_linear_in_visibility(a in unit_vector(), b in unit_vector(), c in unit_vector()) {
            let pure = correlation(&ghz_state(), &a, &b, &c);
            for step in 0..=10 {
                let v = f64::from(step) / 10.0;
                let state = QuantumState::noisy_ghz(Visibility::new(v).unwrap());
                prop_assert!((correlation(&state, &a, &b, &c) - v * pure).abs() <= 1e-12);
                prop_assert!(QuantumState::from_matrix(*state.matrix()).is_ok());
            }
        }
    }
}
