use bellkit::bell::{mermin3, quantum_table, tuples};
use bellkit::experiment::{
    compare_models, estimate_correlations, fit_visibility, simulate_quantum, ExperimentConfig,
};
use bellkit::quantum::{QuantumState, Visibility};
use bellkit::rng::run_seed;
use bellkit::Execution;

fn noisy(v: f64) -> QuantumState {
    QuantumState::noisy_ghz(Visibility::new(v).unwrap())
}

#[test]
fn estimates_within_five_sigma_at_a_million_shots() {
    let (_, xy) = mermin3();
    let rho = noisy(0.71);
    let truth = quantum_table(&rho, &xy);
    let mut good_runs = 0;
    for run in 0..100 {
        let cfg = ExperimentConfig::mermin(1_000_000, run_seed(2024, run)).unwrap();
        let est = estimate_correlations(&simulate_quantum(&rho, &cfg).unwrap()).unwrap();
        let all_ok = tuples([2, 2, 2]).all(|t| {
            let e = est.get(t);
            (e.mean - truth.get(t)).abs() <= 5.0 * e.stderr
        });
        good_runs += usize::from(all_ok);
    }
    assert!(good_runs >= 99, "{good_runs}/100 runs within 5 sigma");
}

#[test]
fn visibility_recovered_within_three_sigma() {
    let (_, xy) = mermin3();
    let reference = quantum_table(&QuantumState::ghz(), &xy);
    for (n, v) in [0.0, 0.5, 0.71, 1.0].into_iter().enumerate() {
        let cfg = ExperimentConfig::mermin(100_000, 900 + n as u64).unwrap();
        let est = estimate_correlations(&simulate_quantum(&noisy(v), &cfg).unwrap()).unwrap();
        let fit = fit_visibility(&est, &reference).unwrap();
        assert!(
            (fit.visibility - v).abs() <= 3.0 * fit.stderr,
            "v={v}: fitted {} ± {}",
            fit.visibility,
            fit.stderr
        );
    }
}

#[test]
fn full_pipeline_is_bit_identical_for_a_seed() {
    let (m, xy) = mermin3();
    let run = |execution| {
        let cfg = ExperimentConfig::mermin(20_000, 31337)
            .unwrap()
            .with_execution(execution);
        let data = simulate_quantum(&noisy(0.71), &cfg).unwrap();
        (data.clone(), compare_models(&data, &m, &xy).unwrap())
    };
    let a = run(Execution::Sequential);
    let b = run(Execution::Sequential);
    let c = run(Execution::Parallel);
    assert_eq!(a, b);
    assert_eq!(a, c);
}
