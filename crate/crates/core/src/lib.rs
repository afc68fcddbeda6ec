//! Outage analysis and link-level simulation of relay-assisted multi-hop
//! OFDM with subcarrier number modulation (OFDM-SNM).
//!
//! - [`modem`]: bit mapping, codebook, ML block detection
//! - [`channel`]: Rayleigh fading hops with path loss and AWGN
//! - [`analysis`]: closed-form and high-SNR outage probabilities
//! - [`montecarlo`]: seeded outage estimation (threshold and full-chain modes)
//! - [`config`] and [`sweep`]: parameter sweeps and CSV output for the `snm` CLI

pub mod analysis;
pub mod channel;
pub mod config;
pub mod modem;
pub mod montecarlo;
pub mod sweep;

pub use analysis::{
    asymptotic_average_outage, asymptotic_conditional_outage, average_outage, conditional_outage,
    per_hop_subcarrier_outage, AsymptoticContext, AsymptoticValue, OutageQuery,
};
pub use channel::{
    propagate, sample_channel, subcarrier_snr, AllocationMode, ChannelRealization, NoiseModel,
    Topology, TopologyError,
};
pub use config::{load_config, parse_config, ConfigError, DistancePolicy, Engine, SweepSpec, SweptParameter};
pub use modem::{
    average_rate, codebook_size, decode_bits, encode, ml_detect, BitStream, Codebook, Detection,
    ModemError, ModulationParams, TransmitBlock,
};
pub use montecarlo::{
    confidence_interval, run_exact_mode, run_threshold_mode, simulate, OutageEstimate,
    SimulationError, SimulationMode, SimulationPlan,
};
pub use sweep::{emit_csv, run_sweep, ResultTable, SweepError};

pub use num_complex;
