//! A/B/D run groups across the station set.
//!
//! Each station contributes one run window: the last `window_s` seconds before
//! loss of signal of its best pass. Every run at a station replays that same
//! window, so reference and controlled runs see identical geometry.

pub mod io;
pub mod report;
pub mod sensitivity;
pub mod summary;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{closed_loop_track, PidConfig};
use crate::error::{SimError, SimResult};
use crate::geometry::{geometry_for, GroundSite, LinkConstants, OrbitElements};
use crate::link_emulator::{
    classify_regime, link_tick, probe_rtt, HandoverMachine, LinkTickInputs, Mode, RegimeThresholds, StateDwellConfig,
    TelemetryRow, TransportParams,
};
use crate::rng::{derive_seed, label_tag, stream};
use crate::scenario::{best_pass, open_loop_trajectory, StationPass};
use crate::uncertainty::{sample_run_biases, ResidualGenerator, UncertaintyConfig};

pub use io::{read_telemetry_csv, write_telemetry_csv, RunMetadata};
pub use report::{emit_tables, CampaignReport};
pub use sensitivity::{sensitivity_check, SensitivityReport};
pub use summary::{steady_state_filter, summarize_group, summarize_run, transient_counts, GroupSummary, RunSummary};

const TAG_UNCERTAINTY: u64 = 0x0075_6e63;
const TAG_TRANSPORT: u64 = 0x7472_616e;
const TAG_PROBE: u64 = 0x7072_6f62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: String,
    pub mode: Mode,
    pub seed: u64,
    pub duration_s: f64,
}

impl RunSpec {
    pub fn new(id: &str, mode: Mode, seed: u64, duration_s: f64) -> Self {
        Self {
            id: id.to_string(),
            mode,
            seed,
            duration_s,
        }
    }

    /// A1-A3 edge-controlled, B1-B3 reference, D1 probe.
    pub fn default_runs(duration_s: f64) -> Vec<RunSpec> {
        vec![
            RunSpec::new("A1", Mode::EdgeControlled, 101, duration_s),
            RunSpec::new("A2", Mode::EdgeControlled, 102, duration_s),
            RunSpec::new("A3", Mode::EdgeControlled, 103, duration_s),
            RunSpec::new("B1", Mode::Reference, 201, duration_s),
            RunSpec::new("B2", Mode::Reference, 202, duration_s),
            RunSpec::new("B3", Mode::Reference, 203, duration_s),
            RunSpec::new("D1", Mode::Probe, 301, duration_s),
        ]
    }

    /// Mode implied by the run-group letter, if any.
    pub fn group_mode(&self) -> Option<Mode> {
        match self.id.chars().next() {
            Some('A') => Some(Mode::EdgeControlled),
            Some('B') => Some(Mode::Reference),
            Some('D') => Some(Mode::Probe),
            _ => None,
        }
    }
}

/// Everything a campaign run needs, resolved from the simulator config.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub seed: u64,
    pub stations: Vec<GroundSite>,
    pub orbit: OrbitElements,
    pub consts: LinkConstants,
    pub runs: Vec<RunSpec>,
    /// Controller settling time simulated ahead of the logged window.
    pub warmup_s: f64,
    /// One telemetry row every `downsample` control ticks.
    pub downsample: usize,
    pub pass_horizon_s: f64,
    pub uncertainty: UncertaintyConfig,
    pub pid: PidConfig,
    pub thresholds: RegimeThresholds,
    pub transport: TransportParams,
    pub dwell: StateDwellConfig,
}

impl CampaignConfig {
    /// Run-group invariants: letter and mode agree, ids and seeds are unique.
    pub fn validate_runs(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut ids = HashSet::new();
        let mut seeds = HashSet::new();
        for r in &self.runs {
            match r.group_mode() {
                Some(m) if m == r.mode => {}
                Some(m) => errs.push(format!("run {} is labeled {} but its group requires {}", r.id, r.mode, m)),
                None => errs.push(format!("run {} does not belong to an A, B or D group", r.id)),
            }
            if !ids.insert(r.id.clone()) {
                errs.push(format!("duplicate run id {}", r.id));
            }
            if !seeds.insert(r.seed) {
                errs.push(format!("run {} reuses seed {}", r.id, r.seed));
            }
            if !(r.duration_s > 0.0) {
                errs.push(format!("run {} duration_s must be > 0", r.id));
            }
        }
        if self.runs.iter().any(|r| r.duration_s != self.runs[0].duration_s) {
            errs.push("all runs must share one duration_s so A and B windows coincide".into());
        }
        errs
    }

    pub fn window_s(&self) -> f64 {
        self.runs.first().map(|r| r.duration_s).unwrap_or(0.0)
    }

    fn run_seed(&self, station_index: usize, run: &RunSpec) -> u64 {
        derive_seed(self.seed, &[station_index as u64, label_tag(&run.id), run.seed])
    }
}

/// Outcome of one station x run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub spec: RunSpec,
    pub station: String,
    pub seed: u64,
    pub start_s: f64,
    pub end_s: f64,
    pub rows: Vec<TelemetryRow>,
    /// Set when the residual loop tripped the divergence detector.
    pub diverged: Option<String>,
}

impl RunResult {
    pub fn row_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.handover_state.to_string()).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignDataset {
    pub passes: Vec<StationPass>,
    pub runs: Vec<RunResult>,
}

impl CampaignDataset {
    pub fn runs_for<'a>(&'a self, station: &'a str, mode: Mode) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.station == station && r.spec.mode == mode)
    }

    pub fn stations(&self) -> Vec<String> {
        self.passes.iter().map(|p| p.site.name.clone()).collect()
    }
}

/// Select every station's pass; fails if any station has no usable window.
pub fn station_passes(cfg: &CampaignConfig) -> SimResult<Vec<StationPass>> {
    let needed = cfg.window_s() + cfg.warmup_s;
    cfg.stations
        .par_iter()
        .map(|site| best_pass(site, &cfg.orbit, cfg.pass_horizon_s, cfg.dwell.min_elevation_deg, needed))
        .collect()
}

fn execute_run(cfg: &CampaignConfig, station_index: usize, pass: &StationPass, spec: &RunSpec) -> SimResult<RunResult> {
    let seed = cfg.run_seed(station_index, spec);
    let site = &pass.site;
    let t_los = pass.set_s;
    let t_start = t_los - spec.duration_s;
    let t_sim0 = t_start - cfg.warmup_s;
    let t_fb = cfg.pid.t_fb_s;
    let warmup_ticks = (cfg.warmup_s / t_fb).round() as usize;

    let mut unc_rng = stream(seed, &[TAG_UNCERTAINTY]);
    let mut transport_rng = stream(seed, &[TAG_TRANSPORT]);
    let mut probe_rng = stream(seed, &[TAG_PROBE]);

    let biases = sample_run_biases(&cfg.uncertainty, &mut unc_rng);
    let mut generator = ResidualGenerator::new(cfg.uncertainty, biases, cfg.consts);
    let open = open_loop_trajectory(site, &cfg.orbit, &cfg.consts, &mut generator, t_sim0, t_los, t_fb, &mut unc_rng)?;

    let mut result = RunResult {
        spec: spec.clone(),
        station: site.name.clone(),
        seed,
        start_s: t_start,
        end_s: t_los,
        rows: Vec::new(),
        diverged: None,
    };
    let samples = if spec.mode.closed_loop() {
        match closed_loop_track(&cfg.pid, &open) {
            Ok(s) => s,
            Err(e @ SimError::Diverged { .. }) => {
                result.diverged = Some(e.to_string());
                return Ok(result);
            }
            Err(e) => return Err(e),
        }
    } else {
        open
    };

    let mut machine = HandoverMachine::new(cfg.dwell, t_sim0);
    let downsample = cfg.downsample.max(1);
    for (k, s) in samples.iter().enumerate() {
        let (tau, cfo) = match (s.dtau_closed_s, s.dcfo_closed_hz) {
            (Some(t), Some(f)) => (t, f),
            _ => (s.dtau_open_s, s.dcfo_open_hz),
        };
        let regime = classify_regime(tau, cfo, &cfg.thresholds);
        if k < warmup_ticks {
            continue;
        }
        let geo = geometry_for(site, &cfg.orbit, s.t_s, &cfg.consts)?;
        let state = machine.update(s.t_s, geo.elevation_deg, t_los - s.t_s, regime);
        if !(k - warmup_ticks).is_multiple_of(downsample) {
            continue;
        }
        let inputs = LinkTickInputs {
            station: &site.name,
            run_id: &spec.id,
            mode: spec.mode,
            handover_state: state,
            geometry: &geo,
            residual: s,
        };
        let mut row = link_tick(&inputs, &cfg.thresholds, &cfg.transport, &mut transport_rng);
        if spec.mode == Mode::Probe {
            row.rtt_ms = probe_rtt(row.regime, &cfg.transport, &mut probe_rng);
        }
        result.rows.push(row);
    }
    Ok(result)
}

/// Execute every station x run. Runs are independent and run in parallel on
/// the current rayon pool; the result order is station-major, then config order.
pub fn run_campaign(cfg: &CampaignConfig) -> SimResult<CampaignDataset> {
    let errs = cfg.validate_runs();
    if !errs.is_empty() {
        return Err(SimError::Invalid(errs.join("; ")));
    }
    let passes = station_passes(cfg)?;
    let jobs: Vec<(usize, &StationPass, &RunSpec)> = passes
        .iter()
        .enumerate()
        .flat_map(|(i, p)| cfg.runs.iter().map(move |r| (i, p, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, p, r)| execute_run(cfg, i, p, r))
        .collect::<SimResult<Vec<_>>>()?;
    Ok(CampaignDataset { passes, runs })
}
