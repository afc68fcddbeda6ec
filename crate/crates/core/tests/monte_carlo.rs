use snm_core::analysis::{average_outage, OutageQuery};
use snm_core::channel::{AllocationMode, Topology};
use snm_core::modem::ModulationParams;
use snm_core::montecarlo::{
    run_exact_mode_with_diagnostics, run_threshold_mode, simulate, SimulationMode, SimulationPlan,
};

fn query(n: usize, distances: Vec<f64>, alpha: f64, pt: f64, allocation: AllocationMode) -> OutageQuery {
    let topology = Topology::new(distances, alpha, pt, 1.0, allocation).unwrap();
    OutageQuery::new(topology, ModulationParams::new(n, 2).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a / b - 1.0).abs() < rel
}

#[test]
fn closed_form_golden_values() {
    let eq = AllocationMode::EqualPerNode;
    assert!(close(average_outage(&query(4, vec![2.5, 2.5], 2.0, 1e4, eq)), 0.009_306_255_491_187_117, 1e-13));
    assert!(close(average_outage(&query(4, vec![2.5, 2.5], 2.0, 1e3, eq)), 0.087_216_168_704_726_76, 1e-13));
    let golden = 0.456_601_665_255_119_47;
    assert!(close(average_outage(&query(8, vec![1.25; 4], 3.0, 250.0, eq)), golden, 1e-13));
    let total = query(8, vec![1.25; 4], 3.0, 1e3, AllocationMode::TotalUniform);
    assert!(close(average_outage(&total), golden, 1e-13));
}

#[test]
fn threshold_mode_agrees_with_closed_form() {
    for (pt, seed) in [(100.0, 1), (1e3, 2), (1e4, 3)] {
        let q = query(4, vec![2.5, 2.5], 2.0, pt, AllocationMode::EqualPerNode);
        let expected = average_outage(&q);
        let est = run_threshold_mode(&SimulationPlan::new(q, 400_000, seed, SimulationMode::Threshold)).unwrap();
        assert!((est.probability - expected).abs() < 3.0 * est.std_error.max(1e-6), "{pt}: {est:?} vs {expected}");
    }
}

#[test]
fn estimates_are_worker_independent() {
    let q = query(4, vec![2.0, 1.5, 1.5], 2.5, 300.0, AllocationMode::EqualPerNode);
    for mode in [SimulationMode::Threshold, SimulationMode::Exact] {
        let mut plan = SimulationPlan::new(q.clone(), 30_001, 5, mode);
        let pooled = simulate(&plan).unwrap();
        plan.workers = Some(1);
        let single = simulate(&plan).unwrap();
        plan.workers = Some(3);
        let three = simulate(&plan).unwrap();
        assert_eq!(pooled, single);
        assert_eq!(single, three);
    }
}

#[test]
fn different_seeds_give_different_streams() {
    let q = query(4, vec![2.5, 2.5], 2.0, 100.0, AllocationMode::EqualPerNode);
    let a = simulate(&SimulationPlan::new(q.clone(), 50_000, 1, SimulationMode::Threshold)).unwrap();
    let b = simulate(&SimulationPlan::new(q, 50_000, 2, SimulationMode::Threshold)).unwrap();
    assert_ne!(a.failures, b.failures);
}

#[test]
fn exact_failures_contain_threshold_failures() {
    // Channel draws are shared, so every threshold failure is also an exact failure.
    for (pt, seed) in [(100.0, 4), (1e3, 5), (1e4, 6)] {
        let q = query(4, vec![2.5, 2.5], 2.0, pt, AllocationMode::EqualPerNode);
        let thr = simulate(&SimulationPlan::new(q.clone(), 40_000, seed, SimulationMode::Threshold)).unwrap();
        let (exact, diag) =
            run_exact_mode_with_diagnostics(&SimulationPlan::new(q, 40_000, seed, SimulationMode::Exact)).unwrap();
        assert!(exact.failures >= thr.failures);
        assert_eq!(diag.snr_first + diag.misdetection_first, exact.failures);
    }
}

#[test]
fn detection_error_rate_is_small_at_high_snr() {
    let q = query(4, vec![1.0], 2.0, 1e4, AllocationMode::EqualPerNode);
    let (est, diag) =
        run_exact_mode_with_diagnostics(&SimulationPlan::new(q, 100_000, 8, SimulationMode::Exact)).unwrap();
    // single hop: no relay, so only the SNR event counts as outage
    assert_eq!(diag.misdetection_first, 0);
    assert!(est.probability < 0.01);
    let bler = diag.destination_errors as f64 / est.trials as f64;
    assert!(bler < 1e-2, "block error rate {bler}");
}

#[test]
fn early_stop_cuts_trials_when_interval_is_tight() {
    let q = query(2, vec![2.5], 2.0, 10.0, AllocationMode::EqualPerNode);
    let mut plan = SimulationPlan::new(q, 5_000_000, 9, SimulationMode::Threshold);
    plan.early_stop = Some(0.05);
    let est = simulate(&plan).unwrap();
    assert!(est.trials < 5_000_000);
    assert!((est.ci_high - est.ci_low) / est.probability < 0.05);
}
