//! Model-layer residual distributions, open and closed loop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controller::PidConfig;
use crate::error::{SimError, SimResult};
use crate::geometry::{GroundSite, LinkConstants, OrbitElements};
use crate::scenario::{best_pass, MonteCarloScenario};
use crate::uncertainty::{PercentileSummary, UncertaintyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub n_runs: usize,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub sample_interval_s: f64,
    pub pass_horizon_s: f64,
    pub min_elevation_deg: f64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            n_runs: 1000,
            warmup_s: 5.0,
            duration_s: 20.0,
            sample_interval_s: 0.2,
            pass_horizon_s: 172_800.0,
            min_elevation_deg: 10.0,
        }
    }
}

impl MonteCarloSettings {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_runs == 0 {
            errs.push("n_runs must be >= 1".into());
        }
        for (k, v) in [
            ("duration_s", self.duration_s),
            ("sample_interval_s", self.sample_interval_s),
            ("pass_horizon_s", self.pass_horizon_s),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{k} must be > 0 (got {v})"));
            }
        }
        if !(self.warmup_s >= 0.0) {
            errs.push(format!("warmup_s must be >= 0 (got {})", self.warmup_s));
        }
        errs
    }

    pub fn scenario(
        &self,
        stations: &[GroundSite],
        orbit: &OrbitElements,
        consts: &LinkConstants,
        t_fb_s: f64,
        seed: u64,
    ) -> SimResult<MonteCarloScenario> {
        let span = self.warmup_s + self.duration_s;
        let passes = stations
            .iter()
            .map(|s| best_pass(s, orbit, self.pass_horizon_s, self.min_elevation_deg, span))
            .collect::<SimResult<Vec<_>>>()?;
        Ok(MonteCarloScenario {
            passes,
            orbit: *orbit,
            consts: *consts,
            seed,
            warmup_s: self.warmup_s,
            duration_s: self.duration_s,
            sample_interval_s: self.sample_interval_s,
            t_fb_s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n_runs: usize,
    pub open: PercentileSummary,
    pub closed: PercentileSummary,
}

/// Pooled |residual| percentiles over `n_runs` runs, before and after the loop.
pub fn monte_carlo(
    scenario: &MonteCarloScenario,
    unc: &UncertaintyConfig,
    pid: &PidConfig,
    n_runs: usize,
) -> SimResult<MonteCarloReport> {
    let runs = scenario.run_closed_loop(unc, pid, n_runs)?;
    let samples = runs.iter().flatten();
    let n = runs.iter().map(Vec::len).sum();
    let (mut ot, mut of, mut ct, mut cf) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for s in samples {
        ot.push(s.dtau_open_s.abs() * 1e6);
        of.push(s.dcfo_open_hz.abs());
        ct.push(s.dtau_closed_s.unwrap_or(0.0).abs() * 1e6);
        cf.push(s.dcfo_closed_hz.unwrap_or(0.0).abs());
    }
    let empty = || SimError::Invalid("monte carlo produced no samples".into());
    Ok(MonteCarloReport {
        n_runs,
        open: PercentileSummary::from_magnitudes(ot, of).ok_or_else(empty)?,
        closed: PercentileSummary::from_magnitudes(ct, cf).ok_or_else(empty)?,
    })
}

impl MonteCarloReport {
    fn rows(&self) -> [(&'static str, &'static str, crate::stats::Percentiles); 4] {
        [
            ("residual_ta_open", "us", self.open.ta_us),
            ("residual_ta_closed", "us", self.closed.ta_us),
            ("residual_cfo_open", "Hz", self.open.cfo_hz),
            ("residual_cfo_closed", "Hz", self.closed.cfo_hz),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Residual distributions over {} runs ({} samples)\n{:<22} {:>5} {:>9} {:>9} {:>9}\n",
            self.n_runs, self.open.n_samples, "metric", "unit", "p50", "p95", "p99"
        );
        for (m, u, p) in self.rows() {
            let _ = writeln!(out, "{m:<22} {u:>5} {:>9.3} {:>9.3} {:>9.3}", p.p50, p.p95, p.p99);
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> SimResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "unit", "p50", "p95", "p99", "n_samples"])?;
        for (m, u, p) in self.rows() {
            w.write_record([
                m.to_string(),
                u.to_string(),
                p.p50.to_string(),
                p.p95.to_string(),
                p.p99.to_string(),
                self.open.n_samples.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
