//! Multiplicative perturbation of implementation constants.
//!
//! The perturbed vector covers regime thresholds, handover dwell settings,
//! controller gains/limits and the transport spread/loss constants. Transport
//! rates, base latencies and jitter scales stay fixed together with geometry:
//! they are the regime endpoints the headline metrics are measured against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::{headline_metrics, HeadlineMetrics};
use super::{run_campaign, CampaignConfig};
use crate::error::{SimError, SimResult};
use crate::rng::stream;

const TAG_SENSITIVITY: u64 = 0x7365_6e73;

type Knob = (&'static str, fn(&mut CampaignConfig) -> &mut f64);

/// Names and accessors of the perturbed constants, in draw order.
pub const THETA: [Knob; 17] = [
    ("regime.tau_cp_s", |c| &mut c.thresholds.tau_cp_s),
    ("regime.f_scs_hz", |c| &mut c.thresholds.f_scs_hz),
    ("handover.t_warn_s", |c| &mut c.dwell.t_warn_s),
    ("handover.t_warm_s", |c| &mut c.dwell.t_warm_s),
    ("handover.t_switch_s", |c| &mut c.dwell.t_switch_s),
    ("handover.cleanup_s", |c| &mut c.dwell.cleanup_s),
    ("handover.degraded_lead_factor", |c| &mut c.dwell.degraded_lead_factor),
    ("handover.degraded_smoothing_s", |c| &mut c.dwell.degraded_smoothing_s),
    ("controller.kp", |c| &mut c.pid.kp),
    ("controller.ki", |c| &mut c.pid.ki),
    ("controller.kd", |c| &mut c.pid.kd),
    ("controller.integral_limit_tau_s", |c| &mut c.pid.integral_limit_tau_s),
    ("controller.integral_limit_f_hz", |c| &mut c.pid.integral_limit_f_hz),
    ("transport.rate_sigma_nominal_mbps", |c| &mut c.transport.rate_sigma_nominal_mbps),
    ("transport.rate_sigma_degraded_mbps", |c| &mut c.transport.rate_sigma_degraded_mbps),
    ("transport.loss_nominal", |c| &mut c.transport.loss_nominal),
    ("transport.loss_degraded", |c| &mut c.transport.loss_degraded),
];

/// `theta <- theta * (1 + eps)` element-wise.
pub fn perturb(cfg: &CampaignConfig, eps: &[f64]) -> CampaignConfig {
    let mut out = cfg.clone();
    for ((_, knob), e) in THETA.iter().zip(eps) {
        *knob(&mut out) *= 1.0 + e;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    pub goodput_uplift: f64,
    pub p95_rtt_reduction: f64,
    /// Larger of the TA and CFO closed-loop P95 deviations.
    pub residual_p95: f64,
}

impl Deviations {
    fn between(nominal: &HeadlineMetrics, m: &HeadlineMetrics) -> Self {
        let rel = |a: f64, b: f64| ((b - a) / a).abs();
        Self {
            goodput_uplift: rel(nominal.goodput_uplift_pct, m.goodput_uplift_pct),
            p95_rtt_reduction: rel(nominal.p95_rtt_reduction_pct, m.p95_rtt_reduction_pct),
            residual_p95: rel(nominal.ta_p95_closed_us, m.ta_p95_closed_us)
                .max(rel(nominal.cfo_p95_closed_hz, m.cfo_p95_closed_hz)),
        }
    }

    fn max(self, o: Self) -> Self {
        Self {
            goodput_uplift: self.goodput_uplift.max(o.goodput_uplift),
            p95_rtt_reduction: self.p95_rtt_reduction.max(o.p95_rtt_reduction),
            residual_p95: self.residual_p95.max(o.residual_p95),
        }
    }

    pub fn worst(&self) -> f64 {
        self.goodput_uplift.max(self.p95_rtt_reduction).max(self.residual_p95)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawResult {
    pub index: usize,
    pub epsilon: Vec<f64>,
    pub metrics: Option<HeadlineMetrics>,
    pub deviations: Option<Deviations>,
    /// Why the draw was excluded (divergent loop or missing coverage).
    pub unstable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub theta: Vec<String>,
    pub nominal: HeadlineMetrics,
    pub draws: Vec<DrawResult>,
    /// Maximum over stable draws; zero when there are none.
    pub max: Deviations,
    pub n_unstable: usize,
}

fn metrics_for(cfg: &CampaignConfig) -> SimResult<HeadlineMetrics> {
    let ds = run_campaign(cfg)?;
    if let Some(r) = ds.runs.iter().find(|r| r.diverged.is_some()) {
        return Err(SimError::Invalid(format!("run {} at {} diverged", r.spec.id, r.station)));
    }
    headline_metrics(&ds)
}

/// Run the campaign for each explicit perturbation vector.
pub fn sensitivity_with(cfg: &CampaignConfig, epsilons: Vec<Vec<f64>>) -> SimResult<SensitivityReport> {
    let nominal = metrics_for(cfg)?;
    let mut max = Deviations {
        goodput_uplift: 0.0,
        p95_rtt_reduction: 0.0,
        residual_p95: 0.0,
    };
    let mut draws = Vec::with_capacity(epsilons.len());
    let mut n_unstable = 0;
    for (index, epsilon) in epsilons.into_iter().enumerate() {
        let perturbed = perturb(cfg, &epsilon);
        let errs = [perturbed.pid.validate(), perturbed.dwell.validate(), perturbed.thresholds.validate()].concat();
        let outcome = if errs.is_empty() {
            metrics_for(&perturbed)
        } else {
            Err(SimError::Invalid(errs.join("; ")))
        };
        let draw = match outcome {
            Ok(m) => {
                let d = Deviations::between(&nominal, &m);
                max = max.max(d);
                DrawResult {
                    index,
                    epsilon,
                    metrics: Some(m),
                    deviations: Some(d),
                    unstable: None,
                }
            }
            Err(e @ (SimError::Invalid(_) | SimError::NoSteadyState(_) | SimError::MissingInput { .. })) => {
                n_unstable += 1;
                DrawResult {
                    index,
                    epsilon,
                    metrics: None,
                    deviations: None,
                    unstable: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e),
        };
        draws.push(draw);
    }
    Ok(SensitivityReport {
        theta: THETA.iter().map(|(n, _)| n.to_string()).collect(),
        nominal,
        draws,
        max,
        n_unstable,
    })
}

/// `n_draws` independent perturbations with every element drawn from
/// `U(-epsilon, epsilon)`.
pub fn sensitivity_check(cfg: &CampaignConfig, n_draws: usize, epsilon: f64) -> SimResult<SensitivityReport> {
    let eps = (0..n_draws)
        .map(|i| {
            let mut rng = stream(cfg.seed, &[TAG_SENSITIVITY, i as u64]);
            THETA.iter().map(|_| rng.random_range(-epsilon..=epsilon)).collect()
        })
        .collect();
    sensitivity_with(cfg, eps)
}

impl SensitivityReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Sensitivity over {} draws ({} unstable)\n{:<28} {:>10}\n",
            self.draws.len(),
            self.n_unstable,
            "metric",
            "max dev"
        );
        for (name, v) in [
            ("goodput_uplift", self.max.goodput_uplift),
            ("p95_rtt_reduction", self.max.p95_rtt_reduction),
            ("closed_loop_residual_p95", self.max.residual_p95),
        ] {
            out.push_str(&format!("{name:<28} {:>9.2}%\n", 100.0 * v));
        }
        for d in self.draws.iter().filter(|d| d.unstable.is_some()) {
            out.push_str(&format!("draw {} UNSTABLE: {}\n", d.index, d.unstable.as_deref().unwrap_or("")));
        }
        out
    }

    /// One CSV row per draw.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> SimResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "draw",
            "stable",
            "goodput_uplift_pct",
            "p95_rtt_reduction_pct",
            "ta_p95_closed_us",
            "cfo_p95_closed_hz",
            "dev_goodput_uplift",
            "dev_p95_rtt_reduction",
            "dev_residual_p95",
        ])?;
        for d in &self.draws {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let m = d.metrics;
            let dv = d.deviations;
            w.write_record([
                d.index.to_string(),
                d.unstable.is_none().to_string(),
                f(m.map(|m| m.goodput_uplift_pct)),
                f(m.map(|m| m.p95_rtt_reduction_pct)),
                f(m.map(|m| m.ta_p95_closed_us)),
                f(m.map(|m| m.cfo_p95_closed_hz)),
                f(dv.map(|d| d.goodput_uplift)),
                f(dv.map(|d| d.p95_rtt_reduction)),
                f(dv.map(|d| d.residual_p95)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
