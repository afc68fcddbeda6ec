//! Multi-hop Rayleigh fading channel with distance path loss and AWGN.
//!
//! Transmit power is expressed relative to a unit reference noise power, so
//! `pt_over_n0` doubles as the per-node transmit power. A [`NoiseModel`] with
//! `n0 = 1` reproduces the SNR definition exactly; other values scale the
//! injected noise only.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::modem::{ModulationParams, TransmitBlock};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("at least one hop is required")]
    NoHops,
    #[error("hop {hop} distance must be positive and finite (got {distance})")]
    InvalidDistance { hop: usize, distance: f64 },
    #[error("path loss exponent must be finite and non-negative (got {0})")]
    InvalidPathLoss(f64),
    #[error("Pt/N0 must be positive and finite (got {0})")]
    InvalidPower(f64),
    #[error("outage threshold must be finite and non-negative (got {0})")]
    InvalidThreshold(f64),
    #[error("noise power must be finite and non-negative (got {0})")]
    InvalidNoise(f64),
}

/// How transmit power is assigned to the `L` transmitting nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationMode {
    /// Every transmitter uses the full `Pt/N0`.
    EqualPerNode,
    /// `Pt/N0` is a network-wide budget split evenly over the `L` transmitters.
    TotalUniform,
}

impl AllocationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AllocationMode::EqualPerNode => "equal_per_node",
            AllocationMode::TotalUniform => "total_uniform",
        }
    }
}

/// Hop distances, path loss, power and outage threshold of one relay chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    distances: Vec<f64>,
    path_loss_exponent: f64,
    pt_over_n0: f64,
    threshold: f64,
    allocation: AllocationMode,
}

impl Topology {
    pub fn new(
        distances: Vec<f64>,
        path_loss_exponent: f64,
        pt_over_n0: f64,
        threshold: f64,
        allocation: AllocationMode,
    ) -> Result<Self, TopologyError> {
        if distances.is_empty() {
            return Err(TopologyError::NoHops);
        }
        for (hop, &distance) in distances.iter().enumerate() {
            if !(distance > 0.0 && distance.is_finite()) {
                return Err(TopologyError::InvalidDistance { hop, distance });
            }
        }
        if !(path_loss_exponent >= 0.0 && path_loss_exponent.is_finite()) {
            return Err(TopologyError::InvalidPathLoss(path_loss_exponent));
        }
        if !(pt_over_n0 > 0.0 && pt_over_n0.is_finite()) {
            return Err(TopologyError::InvalidPower(pt_over_n0));
        }
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(TopologyError::InvalidThreshold(threshold));
        }
        Ok(Self {
            distances,
            path_loss_exponent,
            pt_over_n0,
            threshold,
            allocation,
        })
    }

    /// `hops` equal-length hops covering `total_distance`.
    pub fn equidistant(
        hops: usize,
        total_distance: f64,
        path_loss_exponent: f64,
        pt_over_n0: f64,
        threshold: f64,
        allocation: AllocationMode,
    ) -> Result<Self, TopologyError> {
        if hops == 0 {
            return Err(TopologyError::NoHops);
        }
        let distances = vec![total_distance / hops as f64; hops];
        Self::new(distances, path_loss_exponent, pt_over_n0, threshold, allocation)
    }

    /// `L`.
    pub fn hops(&self) -> usize {
        self.distances.len()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn pt_over_n0(&self) -> f64 {
        self.pt_over_n0
    }

    /// Outage threshold `xi` (linear).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn allocation(&self) -> AllocationMode {
        self.allocation
    }

    /// Per-node power ratio after allocation.
    pub fn effective_power(&self) -> f64 {
        match self.allocation {
            AllocationMode::EqualPerNode => self.pt_over_n0,
            AllocationMode::TotalUniform => self.pt_over_n0 / self.hops() as f64,
        }
    }

    /// Large-scale attenuation `S_i^-alpha` of `hop`.
    pub fn path_gain(&self, hop: usize) -> f64 {
        self.distances[hop].powf(-self.path_loss_exponent)
    }

    /// `S_i^alpha` of `hop`.
    pub fn path_loss(&self, hop: usize) -> f64 {
        self.distances[hop].powf(self.path_loss_exponent)
    }

    pub fn with_pt_over_n0(&self, pt_over_n0: f64) -> Result<Self, TopologyError> {
        Self::new(
            self.distances.clone(),
            self.path_loss_exponent,
            pt_over_n0,
            self.threshold,
            self.allocation,
        )
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, TopologyError> {
        Self::new(
            self.distances.clone(),
            self.path_loss_exponent,
            self.pt_over_n0,
            threshold,
            self.allocation,
        )
    }
}

/// Circularly-symmetric complex Gaussian noise with total variance `n0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self, TopologyError> {
        if !(n0 >= 0.0 && n0.is_finite()) {
            return Err(TopologyError::InvalidNoise(n0));
        }
        Ok(Self { n0 })
    }

    /// The reference noise power the SNR definition is normalized to.
    pub fn unit() -> Self {
        Self { n0: 1.0 }
    }

    pub fn noiseless() -> Self {
        Self { n0: 0.0 }
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let sigma = (self.n0 / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sigma, im * sigma)
    }
}

/// Per-hop, per-subcarrier fading for one end-to-end transmission.
///
/// Stored row-major: hop `i`, subcarrier `n` lives at `i * N + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    hops: usize,
    subcarriers: usize,
    coefficients: Vec<Complex64>,
    gains: Vec<f64>,
}

impl ChannelRealization {
    /// Builds a realization from normalized gains `G_i(n)` and phases.
    ///
    /// `gains` and `phases` are row-major `L x N`.
    pub fn from_gains(topology: &Topology, subcarriers: usize, gains: Vec<f64>, phases: &[f64]) -> Self {
        let hops = topology.hops();
        assert_eq!(gains.len(), hops * subcarriers);
        assert_eq!(phases.len(), gains.len());
        let coefficients = gains
            .iter()
            .zip(phases)
            .enumerate()
            .map(|(slot, (&g, &theta))| {
                Complex64::from_polar((g * topology.path_gain(slot / subcarriers)).sqrt(), theta)
            })
            .collect();
        Self {
            hops,
            subcarriers,
            coefficients,
            gains,
        }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Small-scale power gain `G_i(n)`.
    pub fn gain(&self, hop: usize, subcarrier: usize) -> f64 {
        self.gains[hop * self.subcarriers + subcarrier]
    }

    /// Complex coefficient `h_i(n)`, path loss included.
    pub fn coefficient(&self, hop: usize, subcarrier: usize) -> Complex64 {
        self.coefficients[hop * self.subcarriers + subcarrier]
    }

    /// Diagonal of `H_i`.
    pub fn hop_coefficients(&self, hop: usize) -> &[Complex64] {
        let start = hop * self.subcarriers;
        &self.coefficients[start..start + self.subcarriers]
    }

    pub fn hop_gains(&self, hop: usize) -> &[f64] {
        let start = hop * self.subcarriers;
        &self.gains[start..start + self.subcarriers]
    }
}

/// Draws one realization: `G ~ Exp(1)` by inverse CDF, phase uniform on `[0, 2pi)`.
///
/// Two uniforms are consumed per (hop, subcarrier) in row-major order.
pub fn sample_channel<R: Rng + ?Sized>(
    topology: &Topology,
    params: &ModulationParams,
    rng: &mut R,
) -> ChannelRealization {
    let slots = topology.hops() * params.subcarriers();
    let mut gains = Vec::with_capacity(slots);
    let mut phases = Vec::with_capacity(slots);
    for _ in 0..slots {
        let u: f64 = rng.random();
        gains.push(-(-u).ln_1p());
        phases.push(2.0 * PI * rng.random::<f64>());
    }
    ChannelRealization::from_gains(topology, params.subcarriers(), gains, &phases)
}

/// Received SNR of one subcarrier, `P G S^-alpha / (T N0)`, or 0 if inactive.
pub fn subcarrier_snr(
    realization: &ChannelRealization,
    topology: &Topology,
    hop: usize,
    subcarrier: usize,
    active_count: usize,
    active: bool,
) -> f64 {
    if !active {
        return 0.0;
    }
    topology.effective_power() * realization.gain(hop, subcarrier) * topology.path_gain(hop)
        / active_count as f64
}

/// Received block `y = sqrt(P/T) H x + w` over `hop`, with fresh noise.
pub fn propagate<R: Rng + ?Sized>(
    block: &TransmitBlock,
    realization: &ChannelRealization,
    topology: &Topology,
    hop: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Complex64> {
    let scale = (topology.effective_power() / block.active_count() as f64).sqrt();
    block
        .symbols()
        .iter()
        .zip(realization.hop_coefficients(hop))
        .map(|(x, h)| h * x * scale + noise.sample(rng))
        .collect()
}
