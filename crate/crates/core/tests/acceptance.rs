//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL ...` line.
//!
//! Run with `cargo test -p snm-core --test acceptance -- --nocapture --test-threads 1`
//! to see the report in order.

use std::process::Command;
use std::time::Instant;

use snm_core::analysis::{asymptotic_average_outage, asymptotic_conditional_outage, average_outage, OutageQuery};
use snm_core::channel::{sample_channel, AllocationMode, Topology};
use snm_core::modem::{codebook_size, decode_bits, encode, ml_detect, BitStream, Codebook, ModulationParams};
use snm_core::montecarlo::{simulate, trial_rng, SimulationMode, SimulationPlan};
use snm_core::num_complex::Complex64;

const TOTAL_DISTANCE: f64 = 5.0;

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn query(n: usize, hops: usize, alpha: f64, pt_db: f64, allocation: AllocationMode) -> OutageQuery {
    let topology = Topology::equidistant(hops, TOTAL_DISTANCE, alpha, db(pt_db), 1.0, allocation).unwrap();
    OutageQuery::new(topology, ModulationParams::new(n, 2).unwrap())
}

fn report(id: u32, pass: bool, detail: &str) {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_closed_form_within_monte_carlo_interval() {
    let start = Instant::now();
    let mut cells = 0;
    let mut inside = 0;
    let mut misses = Vec::new();
    for n in [2, 4] {
        for hops in [1, 2, 3] {
            for pt_db in [20.0, 30.0, 40.0] {
                let q = query(n, hops, 2.0, pt_db, AllocationMode::EqualPerNode);
                let closed = average_outage(&q);
                let mut plan = SimulationPlan::new(q, 1_000_000, 1 + cells as u64, SimulationMode::Threshold);
                plan.confidence_level = 0.997;
                let est = simulate(&plan).unwrap();
                cells += 1;
                if est.ci_low <= closed && closed <= est.ci_high {
                    inside += 1;
                } else {
                    misses.push(format!("N={n} L={hops} {pt_db}dB"));
                }
            }
        }
    }
    let fraction = inside as f64 / cells as f64;
    let pass = fraction >= 0.95;
    report(
        1,
        pass,
        &format!(
            "{inside}/{cells} cells inside the 99.7% interval, misses {misses:?}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn grid() -> impl Iterator<Item = (usize, usize)> {
    [2, 4, 8].into_iter().flat_map(|n| [1, 2, 4].into_iter().map(move |l| (n, l)))
}

#[test]
fn criterion_2_asymptote_matches_closed_form() {
    let mut worst60: f64 = 0.0;
    let mut worst40: f64 = 0.0;
    for (n, hops) in grid() {
        let ratio = |pt_db| {
            let q = query(n, hops, 2.0, pt_db, AllocationMode::EqualPerNode);
            (average_outage(&q) / asymptotic_average_outage(&q).value - 1.0).abs()
        };
        worst60 = worst60.max(ratio(60.0));
        worst40 = worst40.max(ratio(40.0));
    }
    let pass = worst60 < 0.02 && worst40 < 0.10;
    report(
        2,
        pass,
        &format!("worst relative gap {:.3}% at 60 dB, {:.3}% at 40 dB", worst60 * 100.0, worst40 * 100.0),
    );
    assert!(pass);
}

#[test]
fn criterion_3_unit_diversity_slope() {
    let mut worst: f64 = 0.0;
    for (n, hops) in grid() {
        let at = |pt_db| average_outage(&query(n, hops, 2.0, pt_db, AllocationMode::EqualPerNode)).log10();
        let slope = (at(60.0) - at(40.0)) / 20.0;
        worst = worst.max((slope / -0.1 - 1.0).abs());
    }
    let pass = worst < 0.02;
    report(3, pass, &format!("worst slope deviation {:.3}% from -0.1 per dB", worst * 100.0));
    assert!(pass);
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0] * (1.0 - 1e-12))
}

#[test]
fn criterion_4_subcarrier_and_hop_trends() {
    let at = |n, hops| average_outage(&query(n, hops, 2.0, 30.0, AllocationMode::EqualPerNode));
    let mut failures = Vec::new();
    for hops in 1..=5 {
        let by_n: Vec<f64> = [2, 4, 8].iter().map(|&n| at(n, hops)).collect();
        if !by_n.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            failures.push(format!("not increasing in N at L={hops}"));
        }
    }
    for n in [2, 4, 8] {
        let by_l: Vec<f64> = (1..=5).map(|hops| at(n, hops)).collect();
        if !strictly_decreasing(&by_l) {
            failures.push(format!("not decreasing in L at N={n}"));
        }
        let gains: Vec<f64> = by_l.windows(2).map(|w| w[0] - w[1]).collect();
        if !strictly_decreasing(&gains) {
            failures.push(format!("improvements not shrinking at N={n}"));
        }
    }
    let pass = failures.is_empty();
    report(4, pass, &format!("violations {failures:?}"));
    assert!(pass);
}

#[test]
fn criterion_5_total_power_hop_trend() {
    let mut lines = Vec::new();
    let mut pass = true;
    for alpha in [2.0, 3.0] {
        let by_l: Vec<f64> = (1..=4)
            .map(|hops| average_outage(&query(4, hops, alpha, 30.0, AllocationMode::TotalUniform)))
            .collect();
        let ok = strictly_decreasing(&by_l);
        pass &= ok;
        lines.push(format!("alpha={alpha}: {by_l:.6?} {}", if ok { "decreasing" } else { "not decreasing" }));
    }
    report(5, pass, &lines.join("; "));
    assert!(pass, "total-power outage is not strictly decreasing in L for every alpha: {lines:?}");
}

#[test]
fn criterion_6_exact_chain_against_threshold_model() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for (pt_db, seed) in [(30.0, 30), (45.0, 45)] {
        let q = query(4, 2, 2.0, pt_db, AllocationMode::EqualPerNode);
        let thr = simulate(&SimulationPlan::new(q.clone(), 100_000, seed, SimulationMode::Threshold)).unwrap();
        let exact = simulate(&SimulationPlan::new(q, 100_000, seed, SimulationMode::Exact)).unwrap();
        let sigma = (exact.std_error.powi(2) + thr.std_error.powi(2)).sqrt();
        let ok = if pt_db < 40.0 {
            exact.probability >= thr.probability - 3.0 * sigma
        } else {
            (exact.probability - thr.probability).abs() < 3.0 * sigma
        };
        pass &= ok;
        details.push(format!(
            "{pt_db}dB exact={:.4e} threshold={:.4e} 3sigma={:.2e}",
            exact.probability,
            thr.probability,
            3.0 * sigma
        ));
    }
    report(6, pass, &format!("{}, {:.1}s", details.join("; "), start.elapsed().as_secs_f64()));
    assert!(pass);
}

fn all_streams(params: &ModulationParams) -> Vec<BitStream> {
    let mut out = Vec::new();
    for active in 1..=params.subcarriers() {
        let payload = active * params.bits_per_symbol();
        for value in 0..(1u64 << payload) {
            let mut bits = BitStream::new(Vec::new());
            bits.push_uint(active as u64 - 1, params.heading_bits());
            bits.push_uint(value, payload);
            out.push(bits);
        }
    }
    out
}

#[test]
fn criterion_7_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut n = 1;
    while n <= 1024 {
        let q = OutageQuery::new(
            Topology::equidistant(3, TOTAL_DISTANCE, 2.0, db(50.0), 1.0, AllocationMode::EqualPerNode).unwrap(),
            ModulationParams::new(n, 2).unwrap(),
        );
        let average = asymptotic_average_outage(&q).value;
        let mean: f64 = (1..=n).map(|t| asymptotic_conditional_outage(&q, t).value).sum::<f64>() / n as f64;
        if (average / mean - 1.0).abs() > 1e-12 {
            failures.push(format!("square-sum identity at N={n}"));
        }
        n *= 2;
    }

    for n in [1, 2, 4, 8] {
        for m in [2u64, 4] {
            let params = ModulationParams::new(n, m as usize).unwrap();
            let expected = m * (m.pow(n as u32) - 1) / (m - 1);
            let book = Codebook::new(params).unwrap();
            if codebook_size(&params).unwrap() != expected || book.len() as u64 != expected {
                failures.push(format!("cardinality N={n} M={m}"));
            }
        }
    }

    for n in [1, 2, 4] {
        for m in [2, 4] {
            let params = ModulationParams::new(n, m).unwrap();
            let streams = all_streams(&params);
            let mut seen = vec![false; codebook_size(&params).unwrap() as usize];
            for bits in &streams {
                let block = encode(bits, &params).unwrap();
                seen[block.index()] = true;
                if decode_bits(&block, &params).unwrap() != *bits {
                    failures.push(format!("roundtrip N={n} M={m} {bits}"));
                }
            }
            if streams.len() != seen.len() || !seen.iter().all(|&s| s) {
                failures.push(format!("encoding not a bijection N={n} M={m}"));
            }
        }
    }

    for n in [1, 2, 4] {
        let params = ModulationParams::new(n, 2).unwrap();
        let book = Codebook::new(params).unwrap();
        let topology = Topology::equidistant(1, 1.0, 2.0, 10.0, 1.0, AllocationMode::EqualPerNode).unwrap();
        for draw in 0..20 {
            let realization = sample_channel(&topology, &params, &mut trial_rng(77, draw));
            let h = realization.hop_coefficients(0);
            for block in book.blocks() {
                let scale = (10.0 / block.active_count() as f64).sqrt();
                let y: Vec<Complex64> = block.symbols().iter().zip(h).map(|(x, h)| h * x * scale).collect();
                if ml_detect(&y, h, &book, 10.0).index != block.index() {
                    failures.push(format!("noiseless detection N={n} block {}", block.index()));
                }
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && elapsed < 60.0;
    report(7, pass, &format!("violations {failures:?}, {elapsed:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_8_csv_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.conf");
    std::fs::write(
        &config,
        "N = 4\nM = 2\nL = 2\nalpha = 2\nxi = 1\npt_over_n0_db = 20:10:40\n\
         allocation_mode = equal_per_node\ndistance_policy = fixed_total(5)\n\
         engines = closed_form, asymptotic, mc_threshold, mc_exact\ntrials = 20000\nseed = 99\n",
    )
    .unwrap();
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_snm"))
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let one = run("1", "one.csv");
    let three = run("3", "three.csv");
    let pass = one == three && !one.is_empty();
    report(8, pass, &format!("{} bytes, workers 1 vs 3 identical: {}", one.len(), one == three));
    assert!(pass);
}
