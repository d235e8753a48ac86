//! Campaign tables: primary-station comparison, cross-station summary,
//! model-vs-campaign reconciliation and transient row accounting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::summary::{summarize_group, summarize_run, transient_counts, GroupSummary, MeanStd, RunSummary, StateCounts};
use super::CampaignDataset;
use crate::error::{SimError, SimResult};
use crate::link_emulator::{HandoverState, Mode};
use crate::montecarlo::MonteCarloReport;
use crate::stats::relative_change;

fn pct(base: f64, new: f64) -> f64 {
    100.0 * relative_change(base, new)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub reference_mean: f64,
    pub reference_std: Option<f64>,
    pub controlled_mean: f64,
    pub controlled_std: Option<f64>,
    pub change_pct: f64,
}

impl ComparisonRow {
    fn new(metric: &str, reference: MeanStd, controlled: MeanStd) -> Self {
        Self {
            metric: metric.to_string(),
            reference_mean: reference.mean,
            reference_std: reference.std,
            controlled_mean: controlled.mean,
            controlled_std: controlled.std,
            change_pct: pct(reference.mean, controlled.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRow {
    pub station: String,
    pub lat_deg: f64,
    pub reference_goodput_mbps: f64,
    pub controlled_goodput_mbps: f64,
    pub goodput_change_pct: f64,
    pub ta_p95_us: f64,
    pub cfo_p95_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationRow {
    pub metric: String,
    pub model: f64,
    /// Smallest and largest per-station group value.
    pub campaign_min: f64,
    pub campaign_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientRow {
    pub mode: Mode,
    pub state: HandoverState,
    pub rows: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub station: String,
    pub probe_rtt_mean_ms: f64,
    pub controlled_rtt_mean_ms: f64,
    pub relative_diff: f64,
}

/// Aggregates across every station, used by the sensitivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadlineMetrics {
    pub goodput_uplift_pct: f64,
    pub p95_rtt_reduction_pct: f64,
    pub ta_p95_closed_us: f64,
    pub cfo_p95_closed_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub primary_station: String,
    pub n_per_group: usize,
    pub primary: Vec<ComparisonRow>,
    pub stations: Vec<StationRow>,
    pub reconciliation: Vec<ReconciliationRow>,
    pub transients: Vec<TransientRow>,
    pub probe: Vec<ProbeRow>,
    pub headline: HeadlineMetrics,
}

fn run_summaries(ds: &CampaignDataset, station: &str, mode: Mode) -> SimResult<Vec<RunSummary>> {
    ds.runs_for(station, mode)
        .filter(|r| r.diverged.is_none())
        .map(|r| summarize_run(&r.rows))
        .collect()
}

fn group(ds: &CampaignDataset, table: &'static str, station: &str, mode: Mode) -> SimResult<GroupSummary> {
    let runs = run_summaries(ds, station, mode)?;
    if runs.is_empty() {
        let letter = match mode {
            Mode::EdgeControlled => "A",
            Mode::Reference => "B",
            Mode::Probe => "D",
        };
        return Err(SimError::MissingInput {
            table,
            missing: format!("{mode} run group ({letter} runs) at {station}"),
        });
    }
    summarize_group(&runs)
}

fn all_runs(ds: &CampaignDataset, mode: Mode) -> SimResult<Vec<RunSummary>> {
    let mut out = Vec::new();
    for st in ds.stations() {
        out.extend(run_summaries(ds, &st, mode)?);
    }
    if out.is_empty() {
        return Err(SimError::MissingInput {
            table: "headline",
            missing: format!("{mode} run group"),
        });
    }
    Ok(out)
}

/// Station-aggregate metrics: per-run statistics averaged over all runs of a mode.
pub fn headline_metrics(ds: &CampaignDataset) -> SimResult<HeadlineMetrics> {
    let a = summarize_group(&all_runs(ds, Mode::EdgeControlled)?)?;
    let b = summarize_group(&all_runs(ds, Mode::Reference)?)?;
    Ok(HeadlineMetrics {
        goodput_uplift_pct: pct(b.goodput_mean.mean, a.goodput_mean.mean),
        p95_rtt_reduction_pct: -pct(b.rtt_p95.mean, a.rtt_p95.mean),
        ta_p95_closed_us: a.ta_p95_us.mean,
        cfo_p95_closed_hz: a.cfo_p95_hz.mean,
    })
}

/// Build all tables. Fails naming the first missing run group or the missing
/// model-based summary.
pub fn emit_tables(ds: &CampaignDataset, model: Option<&MonteCarloReport>) -> SimResult<CampaignReport> {
    let stations = ds.stations();
    let primary_station = stations.first().cloned().ok_or(SimError::MissingInput {
        table: "table1",
        missing: "station list".into(),
    })?;

    let a = group(ds, "table1", &primary_station, Mode::EdgeControlled)?;
    let b = group(ds, "table1", &primary_station, Mode::Reference)?;
    let primary = vec![
        ComparisonRow::new("goodput_mbps", b.goodput_mean, a.goodput_mean),
        ComparisonRow::new("rtt_mean_ms", b.rtt_mean, a.rtt_mean),
        ComparisonRow::new("rtt_p95_ms", b.rtt_p95, a.rtt_p95),
        ComparisonRow::new("rtt_p99_ms", b.rtt_p99, a.rtt_p99),
        ComparisonRow::new("residual_ta_p95_us", b.ta_p95_us, a.ta_p95_us),
        ComparisonRow::new("residual_cfo_p95_hz", b.cfo_p95_hz, a.cfo_p95_hz),
    ];

    let mut station_rows = Vec::new();
    let mut groups = Vec::new();
    for (pass, st) in ds.passes.iter().zip(&stations) {
        let a = group(ds, "table2", st, Mode::EdgeControlled)?;
        let b = group(ds, "table2", st, Mode::Reference)?;
        station_rows.push(StationRow {
            station: st.clone(),
            lat_deg: pass.site.lat_deg,
            reference_goodput_mbps: b.goodput_mean.mean,
            controlled_goodput_mbps: a.goodput_mean.mean,
            goodput_change_pct: pct(b.goodput_mean.mean, a.goodput_mean.mean),
            ta_p95_us: a.ta_p95_us.mean,
            cfo_p95_hz: a.cfo_p95_hz.mean,
        });
        groups.push((a, b));
    }

    let model = model.ok_or(SimError::MissingInput {
        table: "table3",
        missing: "model-based Monte Carlo summary".into(),
    })?;
    let range = |f: &dyn Fn(&(GroupSummary, GroupSummary)) -> f64| {
        groups
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let recon = |metric: &str, model: f64, r: (f64, f64)| ReconciliationRow {
        metric: metric.to_string(),
        model,
        campaign_min: r.0,
        campaign_max: r.1,
    };
    let reconciliation = vec![
        recon("ta_open_p95_us", model.open.ta_us.p95, range(&|g| g.1.ta_p95_us.mean)),
        recon("ta_closed_p95_us", model.closed.ta_us.p95, range(&|g| g.0.ta_p95_us.mean)),
        recon("cfo_open_p95_hz", model.open.cfo_hz.p95, range(&|g| g.1.cfo_p95_hz.mean)),
        recon("cfo_closed_p95_hz", model.closed.cfo_hz.p95, range(&|g| g.0.cfo_p95_hz.mean)),
    ];

    let counts = transient_counts(
        ds.runs
            .iter()
            .filter(|r| r.spec.mode != Mode::Probe)
            .flat_map(|r| r.rows.iter()),
    );
    let transients = transient_rows(&counts);

    let mut probe = Vec::new();
    for st in &stations {
        let d = run_summaries(ds, st, Mode::Probe)?;
        if d.is_empty() {
            continue;
        }
        let a = group(ds, "probe", st, Mode::EdgeControlled)?;
        let probe_mean = MeanStd::of(&d.iter().map(|r| r.rtt_mean).collect::<Vec<_>>()).mean;
        probe.push(ProbeRow {
            station: st.clone(),
            probe_rtt_mean_ms: probe_mean,
            controlled_rtt_mean_ms: a.rtt_mean.mean,
            relative_diff: relative_change(a.rtt_mean.mean, probe_mean),
        });
    }

    Ok(CampaignReport {
        primary_station,
        n_per_group: a.n_runs,
        primary,
        stations: station_rows,
        reconciliation,
        transients,
        probe,
        headline: headline_metrics(ds)?,
    })
}

fn transient_rows(counts: &BTreeMap<Mode, StateCounts>) -> Vec<TransientRow> {
    counts
        .iter()
        .flat_map(|(&mode, c)| {
            HandoverState::ALL.iter().map(move |&state| TransientRow {
                mode,
                state,
                rows: c.count(state),
                percent: c.percent(state),
            })
        })
        .collect()
}

fn fmt_ms(m: f64, s: Option<f64>) -> String {
    match s {
        Some(s) => format!("{m:.2} +/- {s:.2}"),
        None => format!("{m:.2}"),
    }
}

impl CampaignReport {
    pub fn table1_text(&self) -> String {
        let mut out = format!(
            "Steady-state comparison at {} (NORMAL rows, n={} per group)\n{:<22} {:>18} {:>18} {:>9}\n",
            self.primary_station, self.n_per_group, "metric", "reference", "edge-controlled", "change"
        );
        for r in &self.primary {
            let _ = writeln!(
                out,
                "{:<22} {:>18} {:>18} {:>+8.1}%",
                r.metric,
                fmt_ms(r.reference_mean, r.reference_std),
                fmt_ms(r.controlled_mean, r.controlled_std),
                r.change_pct
            );
        }
        out
    }

    pub fn table2_text(&self) -> String {
        let mut out = format!(
            "Cross-station summary\n{:<14} {:>7} {:>10} {:>10} {:>9} {:>9} {:>9}\n",
            "station", "lat", "ref_gp", "ctl_gp", "change", "ta_p95", "cfo_p95"
        );
        for r in &self.stations {
            let _ = writeln!(
                out,
                "{:<14} {:>7.1} {:>10.2} {:>10.2} {:>+8.1}% {:>9.2} {:>9.1}",
                r.station,
                r.lat_deg,
                r.reference_goodput_mbps,
                r.controlled_goodput_mbps,
                r.goodput_change_pct,
                r.ta_p95_us,
                r.cfo_p95_hz
            );
        }
        out
    }

    pub fn table3_text(&self) -> String {
        let mut out = format!(
            "Model-based vs campaign residual P95\n{:<20} {:>10} {:>20}\n",
            "metric", "model", "campaign"
        );
        for r in &self.reconciliation {
            let _ = writeln!(
                out,
                "{:<20} {:>10.2} {:>9.2} - {:<9.2}",
                r.metric, r.model, r.campaign_min, r.campaign_max
            );
        }
        out
    }

    pub fn transients_text(&self) -> String {
        let mut out = format!("Handover state rows per mode\n{:<16} {:<10} {:>8} {:>8}\n", "mode", "state", "rows", "pct");
        for r in &self.transients {
            let _ = writeln!(out, "{:<16} {:<10} {:>8} {:>7.2}%", r.mode.as_str(), r.state.as_str(), r.rows, r.percent);
        }
        if !self.probe.is_empty() {
            let _ = writeln!(out, "\nProbe RTT cross-check");
            for p in &self.probe {
                let _ = writeln!(
                    out,
                    "{:<16} probe {:>7.2} ms  controlled {:>7.2} ms  diff {:>+6.1}%",
                    p.station,
                    p.probe_rtt_mean_ms,
                    p.controlled_rtt_mean_ms,
                    100.0 * p.relative_diff
                );
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        [self.table1_text(), self.table2_text(), self.table3_text(), self.transients_text()].join("\n")
    }

    /// Write the four tables as CSV or text files into `dir`; returns the paths.
    pub fn write(&self, dir: &Path, as_csv: bool) -> SimResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        if as_csv {
            paths.push(write_csv(&dir.join("table1_primary.csv"), &self.primary)?);
            paths.push(write_csv(&dir.join("table2_stations.csv"), &self.stations)?);
            paths.push(write_csv(&dir.join("table3_reconciliation.csv"), &self.reconciliation)?);
            paths.push(write_csv(&dir.join("transient_counts.csv"), &self.transients)?);
        } else {
            for (name, body) in [
                ("table1_primary.txt", self.table1_text()),
                ("table2_stations.txt", self.table2_text()),
                ("table3_reconciliation.txt", self.table3_text()),
                ("transient_counts.txt", self.transients_text()),
            ] {
                let p = dir.join(name);
                std::fs::write(&p, body)?;
                paths.push(p);
            }
        }
        Ok(paths)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> SimResult<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}
