//! Timing algebra, idle noise and a repetition-code memory experiment.

pub mod decoder;
mod noise;
mod repcode;
mod timing;
mod twirl;

pub use decoder::{decode, edge_weight, Matching, SpacetimeGraph};
pub use noise::{ExpDecayFit, NoiseCurves};
pub use repcode::{
    find_optimal_duration, ler_repetition_sweep, logical_error_rate, simulate_shot,
    wilson_interval, LerPoint, RepCodeConfig,
};
pub use timing::{
    exec_time_estimate, pipeline_gap, qec_cycle_time, t_pipelined, t_unpipelined, TimingParams,
};
pub use twirl::{pauli_twirl_idle, CoherenceParams, PauliChannel};
