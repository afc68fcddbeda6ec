//! Seeded Monte Carlo outage estimation.
//!
//! Two fidelities are available:
//!
//! * [`SimulationMode::Threshold`]: a trial fails iff some active subcarrier
//!   on some hop sees an SNR below the threshold. The activation pattern is
//!   assumed to be detected correctly everywhere.
//! * [`SimulationMode::Exact`]: the full chain. Random bits are encoded, every
//!   hop propagates the block with fresh noise, each receiver runs exhaustive
//!   ML detection and relays forward their own estimate. A trial fails iff a
//!   hop has an active-subcarrier SNR below the threshold (evaluated on the
//!   pattern that hop actually transmitted) or a relay detects a pattern
//!   other than the source's.
//!
//! Every trial draws from its own ChaCha stream selected by
//! `(seed, trial index)`. The active count and the channel are drawn first
//! and in the same order in both modes, so the two modes run with the same
//! seed see identical channels trial by trial. Trials are grouped in
//! fixed-size chunks for parallel execution and the counts merged by
//! summation, so results do not depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::analysis::OutageQuery;
use crate::channel::{propagate, sample_channel, subcarrier_snr, ChannelRealization, NoiseModel};
use crate::modem::{encode, ml_detect, BitStream, Codebook, ModemError, TransmitBlock};

/// Trials per work unit.
pub const CHUNK_TRIALS: u64 = 4096;

/// Chunks evaluated between early-termination checks.
const CHUNKS_PER_BATCH: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("confidence level must lie in (0, 1) (got {0})")]
    InvalidConfidence(f64),
    #[error("early-stop target must be positive (got {0})")]
    InvalidEarlyStop(f64),
    #[error("plan requests {requested:?} mode but {called:?} was called")]
    ModeMismatch {
        requested: SimulationMode,
        called: SimulationMode,
    },
    #[error("could not build worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimulationMode {
    Threshold,
    Exact,
}

/// Inputs of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub query: OutageQuery,
    pub trials: u64,
    pub seed: u64,
    pub mode: SimulationMode,
    pub confidence_level: f64,
    /// Stop once `(ci_high - ci_low) / p` falls below this. Off when `None`.
    pub early_stop: Option<f64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl SimulationPlan {
    pub fn new(query: OutageQuery, trials: u64, seed: u64, mode: SimulationMode) -> Self {
        Self {
            query,
            trials,
            seed,
            mode,
            confidence_level: 0.95,
            early_stop: None,
            workers: None,
        }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(SimulationError::NoTrials);
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(SimulationError::InvalidConfidence(self.confidence_level));
        }
        if let Some(target) = self.early_stop {
            if !(target > 0.0) {
                return Err(SimulationError::InvalidEarlyStop(target));
            }
        }
        Ok(())
    }
}

/// An estimated outage probability with its normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub probability: f64,
    pub trials: u64,
    pub failures: u64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence_level: f64,
}

impl OutageEstimate {
    pub fn from_counts(failures: u64, trials: u64, confidence_level: f64) -> Self {
        assert!(trials > 0 && failures <= trials);
        let p = failures as f64 / trials as f64;
        let (ci_low, ci_high) = confidence_interval(failures, trials, confidence_level);
        Self {
            probability: p,
            trials,
            failures,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            ci_low,
            ci_high,
            confidence_level,
        }
    }
}

/// Standard normal quantile at `(1 + level) / 2`.
pub fn z_score(level: f64) -> f64 {
    Normal::standard().inverse_cdf((1.0 + level) / 2.0)
}

/// Normal-approximation interval `p +- z sqrt(p(1-p)/n)`, clipped to `[0, 1]`.
///
/// Degenerates to a point at `p = 0` or `p = 1` and is unreliable below about
/// ten failures.
pub fn confidence_interval(failures: u64, trials: u64, level: f64) -> (f64, f64) {
    let p = failures as f64 / trials as f64;
    let half = z_score(level) * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Which event of the outage union fired first within a failed exact-mode trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageEvent {
    /// An active subcarrier of `hop` fell below the threshold.
    SnrBelowThreshold { hop: usize },
    /// The relay at the end of `hop` detected the wrong pattern.
    Misdetection { hop: usize },
}

/// Result of one exact-mode trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOutcome {
    pub first_event: Option<OutageEvent>,
    /// The destination's final estimate differs from the source block.
    pub destination_error: bool,
}

impl ExactOutcome {
    pub fn is_failure(&self) -> bool {
        self.first_event.is_some()
    }
}

/// Per-event tallies gathered alongside an exact-mode estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactDiagnostics {
    pub snr_first: u64,
    pub misdetection_first: u64,
    /// Trials whose destination estimate was wrong (block error rate numerator).
    pub destination_errors: u64,
}

impl std::ops::Add for ExactDiagnostics {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            snr_first: self.snr_first + rhs.snr_first,
            misdetection_first: self.misdetection_first + rhs.misdetection_first,
            destination_errors: self.destination_errors + rhs.destination_errors,
        }
    }
}

/// Random stream of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Threshold-mode failure test for a given active count and channel.
pub fn threshold_failure(query: &OutageQuery, active: usize, realization: &ChannelRealization) -> bool {
    let topology = &query.topology;
    let xi = topology.threshold();
    (0..topology.hops()).any(|hop| {
        (0..active).any(|n| subcarrier_snr(realization, topology, hop, n, active, true) < xi)
    })
}

/// Runs the full detect-and-forward chain for one source block.
pub fn exact_trial<R: Rng + ?Sized>(
    query: &OutageQuery,
    codebook: &Codebook,
    source: &TransmitBlock,
    realization: &ChannelRealization,
    noise: &NoiseModel,
    rng: &mut R,
) -> ExactOutcome {
    let topology = &query.topology;
    let hops = topology.hops();
    let xi = topology.threshold();
    let power = topology.effective_power();
    let mut first_event = None;
    let mut current = source;
    let mut destination_error = false;
    for hop in 0..hops {
        let active = current.active_count();
        let below = (0..active).any(|n| subcarrier_snr(realization, topology, hop, n, active, true) < xi);
        if below && first_event.is_none() {
            first_event = Some(OutageEvent::SnrBelowThreshold { hop });
        }
        let received = propagate(current, realization, topology, hop, noise, rng);
        let detection = ml_detect(&received, realization.hop_coefficients(hop), codebook, power);
        let wrong = detection.index != source.index();
        if hop + 1 < hops {
            if wrong && first_event.is_none() {
                first_event = Some(OutageEvent::Misdetection { hop });
            }
        } else {
            destination_error = wrong;
        }
        current = detection.block;
    }
    ExactOutcome {
        first_event,
        destination_error,
    }
}

fn draw_active<R: Rng + ?Sized>(query: &OutageQuery, rng: &mut R) -> usize {
    rng.random_range(1..=query.params.subcarriers())
}

fn draw_source<R: Rng + ?Sized>(
    query: &OutageQuery,
    active: usize,
    rng: &mut R,
) -> Result<TransmitBlock, ModemError> {
    let params = &query.params;
    let mut bits = BitStream::default();
    bits.push_uint(active as u64 - 1, params.heading_bits());
    for _ in 0..active * params.bits_per_symbol() {
        bits.push_uint(rng.random::<bool>() as u64, 1);
    }
    encode(&bits, params)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    failures: u64,
    diagnostics: ExactDiagnostics,
}

impl std::ops::Add for Tally {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            trials: self.trials + rhs.trials,
            failures: self.failures + rhs.failures,
            diagnostics: self.diagnostics + rhs.diagnostics,
        }
    }
}

fn run_chunk(plan: &SimulationPlan, codebook: Option<&Codebook>, chunk: u64) -> Tally {
    let first = chunk * CHUNK_TRIALS;
    let last = (first + CHUNK_TRIALS).min(plan.trials);
    let query = &plan.query;
    let noise = NoiseModel::unit();
    let mut tally = Tally::default();
    for trial in first..last {
        let mut rng = trial_rng(plan.seed, trial);
        let active = draw_active(query, &mut rng);
        let realization = sample_channel(&query.topology, &query.params, &mut rng);
        tally.trials += 1;
        match codebook {
            None => {
                if threshold_failure(query, active, &realization) {
                    tally.failures += 1;
                }
            }
            Some(codebook) => {
                let source = draw_source(query, active, &mut rng)
                    .expect("active count and payload length are consistent by construction");
                let outcome = exact_trial(query, codebook, &source, &realization, &noise, &mut rng);
                match outcome.first_event {
                    Some(OutageEvent::SnrBelowThreshold { .. }) => {
                        tally.failures += 1;
                        tally.diagnostics.snr_first += 1;
                    }
                    Some(OutageEvent::Misdetection { .. }) => {
                        tally.failures += 1;
                        tally.diagnostics.misdetection_first += 1;
                    }
                    None => {}
                }
                if outcome.destination_error {
                    tally.diagnostics.destination_errors += 1;
                }
            }
        }
    }
    tally
}

fn run_chunks(plan: &SimulationPlan, codebook: Option<&Codebook>) -> Tally {
    let chunks = plan.trials.div_ceil(CHUNK_TRIALS);
    let batch = match plan.early_stop {
        Some(_) => CHUNKS_PER_BATCH,
        None => chunks,
    };
    let mut total = Tally::default();
    let mut next = 0;
    while next < chunks {
        let end = (next + batch).min(chunks);
        total = total
            + (next..end)
                .into_par_iter()
                .map(|chunk| run_chunk(plan, codebook, chunk))
                .reduce(Tally::default, |a, b| a + b);
        next = end;
        if let Some(target) = plan.early_stop {
            if total.failures > 0 {
                let est = OutageEstimate::from_counts(total.failures, total.trials, plan.confidence_level);
                if (est.ci_high - est.ci_low) / est.probability < target {
                    break;
                }
            }
        }
    }
    total
}

fn execute(plan: &SimulationPlan, codebook: Option<&Codebook>) -> Result<Tally, SimulationError> {
    match plan.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| SimulationError::WorkerPool(e.to_string()))?;
            Ok(pool.install(|| run_chunks(plan, codebook)))
        }
        None => Ok(run_chunks(plan, codebook)),
    }
}

/// Estimates outage under the correct-detection assumption.
pub fn run_threshold_mode(plan: &SimulationPlan) -> Result<OutageEstimate, SimulationError> {
    if plan.mode != SimulationMode::Threshold {
        return Err(SimulationError::ModeMismatch {
            requested: plan.mode,
            called: SimulationMode::Threshold,
        });
    }
    plan.validate()?;
    let tally = execute(plan, None)?;
    Ok(OutageEstimate::from_counts(tally.failures, tally.trials, plan.confidence_level))
}

/// Estimates outage over the full detect-and-forward chain.
pub fn run_exact_mode(plan: &SimulationPlan) -> Result<OutageEstimate, SimulationError> {
    run_exact_mode_with_diagnostics(plan).map(|(estimate, _)| estimate)
}

pub fn run_exact_mode_with_diagnostics(
    plan: &SimulationPlan,
) -> Result<(OutageEstimate, ExactDiagnostics), SimulationError> {
    if plan.mode != SimulationMode::Exact {
        return Err(SimulationError::ModeMismatch {
            requested: plan.mode,
            called: SimulationMode::Exact,
        });
    }
    plan.validate()?;
    let codebook = Codebook::new(plan.query.params)?;
    let tally = execute(plan, Some(&codebook))?;
    Ok((
        OutageEstimate::from_counts(tally.failures, tally.trials, plan.confidence_level),
        tally.diagnostics,
    ))
}

/// Dispatches on `plan.mode`.
pub fn simulate(plan: &SimulationPlan) -> Result<OutageEstimate, SimulationError> {
    match plan.mode {
        SimulationMode::Threshold => run_threshold_mode(plan),
        SimulationMode::Exact => run_exact_mode(plan),
    }
}
