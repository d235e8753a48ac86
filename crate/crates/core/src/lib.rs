//! Uplink timing-advance / carrier-frequency-offset control chain for a LEO
//! 5G-NTN software-defined ground station.
//!
//! Orbit and pass geometry, open-loop residual error budget, the delayed and
//! quantized edge PID loop, the regime-switching link emulator and the
//! campaign harness that turns telemetry into summary tables.

pub mod campaign;
pub mod config;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod link_emulator;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod uncertainty;

pub use campaign::{CampaignConfig, CampaignDataset, RunResult, RunSpec};
pub use config::{ConfigErrors, SimConfig};
pub use controller::{closed_loop_track, controller_step, quantize, ControllerState, PidConfig};
pub use error::{SimError, SimResult};
pub use geometry::{EphemerisSample, GeometrySample, GroundSite, LinkConstants, OrbitElements};
pub use link_emulator::{HandoverState, Mode, Regime, RegimeThresholds, TelemetryRow, TransportParams};
pub use montecarlo::{MonteCarloReport, MonteCarloSettings};
pub use uncertainty::{ResidualSample, UncertaintyConfig};
