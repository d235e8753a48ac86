//! Steady-state filtering, per-run and per-group statistics, transient counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::link_emulator::{HandoverState, Mode, TelemetryRow};
use crate::stats::{mean, nearest_rank, sample_std};

/// Rows tagged NORMAL, in their original order.
pub fn steady_state_filter(rows: &[TelemetryRow]) -> Vec<&TelemetryRow> {
    rows.iter().filter(|r| r.handover_state == HandoverState::Normal).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub station: String,
    pub mode: Mode,
    pub n_rows_total: usize,
    pub n_rows_normal: usize,
    pub goodput_mean: f64,
    pub goodput_std: Option<f64>,
    pub rtt_mean: f64,
    pub rtt_p95: f64,
    pub rtt_p99: f64,
    /// P95 of the residual the regime guard acted on (closed-loop when active).
    pub ta_p95_us: f64,
    pub cfo_p95_hz: f64,
    pub ta_open_p95_us: f64,
    pub cfo_open_p95_hz: f64,
}

fn p95_abs(rows: &[&TelemetryRow], f: impl Fn(&TelemetryRow) -> f64) -> f64 {
    let mut v: Vec<f64> = rows.iter().map(|r| f(r).abs()).collect();
    nearest_rank(&mut v, 95.0).unwrap_or(f64::NAN)
}

/// Statistics over the NORMAL rows of one run.
pub fn summarize_run(rows: &[TelemetryRow]) -> SimResult<RunSummary> {
    let first = rows
        .first()
        .ok_or_else(|| SimError::NoSteadyState("run has no telemetry rows".into()))?;
    let normal = steady_state_filter(rows);
    if normal.is_empty() {
        return Err(SimError::NoSteadyState(format!(
            "run {} at {} has no NORMAL rows",
            first.run_id, first.station
        )));
    }
    let goodput: Vec<f64> = normal.iter().map(|r| r.goodput_mbps).collect();
    let mut rtt: Vec<f64> = normal.iter().map(|r| r.rtt_ms).collect();
    let rtt_mean = mean(&rtt).unwrap_or(f64::NAN);
    rtt.sort_by(f64::total_cmp);
    Ok(RunSummary {
        run_id: first.run_id.clone(),
        station: first.station.clone(),
        mode: first.mode,
        n_rows_total: rows.len(),
        n_rows_normal: normal.len(),
        goodput_mean: mean(&goodput).unwrap_or(f64::NAN),
        goodput_std: sample_std(&goodput),
        rtt_mean,
        rtt_p95: crate::stats::nearest_rank_sorted(&rtt, 95.0),
        rtt_p99: crate::stats::nearest_rank_sorted(&rtt, 99.0),
        ta_p95_us: p95_abs(&normal, |r| r.active_residual_us_hz().0),
        cfo_p95_hz: p95_abs(&normal, |r| r.active_residual_us_hz().1),
        ta_open_p95_us: p95_abs(&normal, |r| r.dtau_open_us),
        cfo_open_p95_hz: p95_abs(&normal, |r| r.dcfo_open_hz),
    })
}

/// Mean and sample standard deviation of one per-run statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: Option<f64>,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values).unwrap_or(f64::NAN),
            std: sample_std(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n_runs: usize,
    pub goodput_mean: MeanStd,
    pub rtt_mean: MeanStd,
    pub rtt_p95: MeanStd,
    pub rtt_p99: MeanStd,
    pub ta_p95_us: MeanStd,
    pub cfo_p95_hz: MeanStd,
    pub ta_open_p95_us: MeanStd,
    pub cfo_open_p95_hz: MeanStd,
}

/// Per-run statistics first, then mean and sample std across the runs.
pub fn summarize_group(runs: &[RunSummary]) -> SimResult<GroupSummary> {
    if runs.is_empty() {
        return Err(SimError::NoSteadyState("run group is empty".into()));
    }
    let col = |f: fn(&RunSummary) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(GroupSummary {
        n_runs: runs.len(),
        goodput_mean: col(|r| r.goodput_mean),
        rtt_mean: col(|r| r.rtt_mean),
        rtt_p95: col(|r| r.rtt_p95),
        rtt_p99: col(|r| r.rtt_p99),
        ta_p95_us: col(|r| r.ta_p95_us),
        cfo_p95_hz: col(|r| r.cfo_p95_hz),
        ta_open_p95_us: col(|r| r.ta_open_p95_us),
        cfo_open_p95_hz: col(|r| r.cfo_open_p95_hz),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCounts {
    pub total: usize,
    pub counts: BTreeMap<HandoverState, usize>,
}

impl StateCounts {
    pub fn count(&self, s: HandoverState) -> usize {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    /// Percentage of rows in state `s`.
    pub fn percent(&self, s: HandoverState) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.count(s) as f64 / self.total as f64
        }
    }
}

/// Row counts per handover state for each mode present in `rows`.
pub fn transient_counts<'a>(rows: impl IntoIterator<Item = &'a TelemetryRow>) -> BTreeMap<Mode, StateCounts> {
    let mut out: BTreeMap<Mode, StateCounts> = BTreeMap::new();
    for r in rows {
        let e = out.entry(r.mode).or_insert_with(|| StateCounts {
            total: 0,
            counts: HandoverState::ALL.iter().map(|&s| (s, 0)).collect(),
        });
        e.total += 1;
        *e.counts.entry(r.handover_state).or_insert(0) += 1;
    }
    out
}
