//! Closed-loop P95 over a grid of feedback period, delay and quantization.

use serde::{Deserialize, Serialize};

use super::PidConfig;
use crate::error::{SimError, SimResult};
use crate::scenario::MonteCarloScenario;
use crate::stats::nearest_rank;
use crate::uncertainty::UncertaintyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub t_fb_ms: f64,
    pub d_fb_ms: f64,
    pub quant_tau_us: f64,
    pub quant_f_hz: f64,
}

impl SweepSpec {
    pub fn apply(&self, base: &PidConfig) -> PidConfig {
        PidConfig {
            t_fb_s: self.t_fb_ms * 1e-3,
            d_fb_s: self.d_fb_ms * 1e-3,
            quant_tau_s: self.quant_tau_us * 1e-6,
            quant_f_hz: self.quant_f_hz,
            ..*base
        }
    }
}

/// One CSV row; the P95 columns are empty for unstable configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_fb_ms: f64,
    pub d_fb_ms: f64,
    pub quant_tau_us: f64,
    pub quant_f_hz: f64,
    pub ta_p95_us: Option<f64>,
    pub cfo_p95_hz: Option<f64>,
    pub stable: bool,
}

fn sweep_row(
    scenario: &MonteCarloScenario,
    unc: &UncertaintyConfig,
    base: &PidConfig,
    spec: &SweepSpec,
    n_runs: usize,
) -> SimResult<SweepRow> {
    let pid = spec.apply(base);
    let errs = pid.validate();
    if !errs.is_empty() {
        return Err(SimError::Invalid(errs.join("; ")));
    }
    let (ta, cfo, stable) = match scenario.run_closed_loop(unc, &pid, n_runs) {
        Ok(runs) => {
            let (mut ta, mut cfo): (Vec<f64>, Vec<f64>) = runs
                .iter()
                .flatten()
                .map(|s| {
                    (
                        s.dtau_closed_s.unwrap_or(0.0).abs() * 1e6,
                        s.dcfo_closed_hz.unwrap_or(0.0).abs(),
                    )
                })
                .unzip();
            (nearest_rank(&mut ta, 95.0), nearest_rank(&mut cfo, 95.0), true)
        }
        Err(SimError::Diverged { .. }) => (None, None, false),
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        t_fb_ms: spec.t_fb_ms,
        d_fb_ms: spec.d_fb_ms,
        quant_tau_us: spec.quant_tau_us,
        quant_f_hz: spec.quant_f_hz,
        ta_p95_us: ta,
        cfo_p95_hz: cfo,
        stable,
    })
}

/// Evaluate every grid row over `n_runs` seeded runs. Divergent rows are
/// reported with `stable = false` instead of failing the sweep.
pub fn delay_quantization_sweep(
    scenario: &MonteCarloScenario,
    unc: &UncertaintyConfig,
    base: &PidConfig,
    rows: &[SweepSpec],
    n_runs: usize,
) -> SimResult<Vec<SweepRow>> {
    rows.iter().map(|spec| sweep_row(scenario, unc, base, spec, n_runs)).collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> SimResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
