//! Fixtures shared by the criterion benches.

use sdgs_core::scenario::StationPass;
use sdgs_core::{CampaignConfig, SimConfig};

pub fn config() -> SimConfig {
    SimConfig::default()
}

/// Campaign restricted to the first station and its first run.
pub fn single_run_campaign() -> CampaignConfig {
    let cfg = config();
    let mut c = cfg.campaign_config(cfg.effective_seed(None, None));
    c.stations.truncate(1);
    c.runs.truncate(1);
    c
}

pub fn first_pass(c: &CampaignConfig) -> StationPass {
    sdgs_core::campaign::station_passes(c).unwrap().remove(0)
}
