//! Closed-form and high-SNR outage probabilities.
//!
//! All quantities depend on the allocation mode only through the per-node
//! effective power. `1 - e^{-x}` is always evaluated as `-expm1(-x)` since the
//! per-subcarrier outage drops below `1e-6` at high SNR.

use crate::channel::Topology;
use crate::modem::ModulationParams;

/// A topology paired with the modulation it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageQuery {
    pub topology: Topology,
    pub params: ModulationParams,
}

impl OutageQuery {
    pub fn new(topology: Topology, params: ModulationParams) -> Self {
        Self { topology, params }
    }
}

/// Average end-to-end channel power gain `S_sigma = 1 / sum_i S_i^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticContext {
    pub s_sigma: f64,
}

impl AsymptoticContext {
    pub fn new(topology: &Topology) -> Self {
        let path_loss_sum: f64 = (0..topology.hops()).map(|i| topology.path_loss(i)).sum();
        Self {
            s_sigma: 1.0 / path_loss_sum,
        }
    }
}

/// A high-SNR series value.
///
/// The series is not a probability outside the high-SNR regime, so it is
/// reported unclamped; `in_regime` is false once it exceeds one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticValue {
    pub value: f64,
    pub in_regime: bool,
}

impl AsymptoticValue {
    fn new(value: f64) -> Self {
        Self {
            value,
            in_regime: value <= 1.0,
        }
    }
}

/// Subcarrier-wise outage of `hop` when `active` subcarriers share the power:
/// `F(T xi S^alpha N0 / P) = 1 - exp(-T xi S^alpha / P)`.
pub fn per_hop_subcarrier_outage(query: &OutageQuery, hop: usize, active: usize) -> f64 {
    let topology = &query.topology;
    let x = active as f64 * topology.threshold() * topology.path_loss(hop) / topology.effective_power();
    -(-x).exp_m1()
}

/// End-to-end outage given `active` subcarriers: `1 - prod_i (1 - Phi_i)^T`.
pub fn conditional_outage(query: &OutageQuery, active: usize) -> f64 {
    let log_survival: f64 = (0..query.topology.hops())
        .map(|hop| active as f64 * (-per_hop_subcarrier_outage(query, hop, active)).ln_1p())
        .sum();
    -log_survival.exp_m1()
}

/// Average outage over `T = 1..N`, each count equally likely.
pub fn average_outage(query: &OutageQuery) -> f64 {
    let n = query.params.subcarriers();
    (1..=n).map(|t| conditional_outage(query, t)).sum::<f64>() / n as f64
}

/// First-order outage given `active` subcarriers: `T^2 xi / (P S_sigma)`.
pub fn asymptotic_conditional_outage(query: &OutageQuery, active: usize) -> AsymptoticValue {
    let ctx = AsymptoticContext::new(&query.topology);
    let t = active as f64;
    AsymptoticValue::new(
        t * t * query.topology.threshold() / (query.topology.effective_power() * ctx.s_sigma),
    )
}

/// High-SNR average outage `xi (N+1)(2N+1) / (6 P S_sigma)`.
pub fn asymptotic_average_outage(query: &OutageQuery) -> AsymptoticValue {
    let ctx = AsymptoticContext::new(&query.topology);
    let n = query.params.subcarriers() as f64;
    AsymptoticValue::new(
        query.topology.threshold() * (n + 1.0) * (2.0 * n + 1.0)
            / (6.0 * query.topology.effective_power() * ctx.s_sigma),
    )
}
