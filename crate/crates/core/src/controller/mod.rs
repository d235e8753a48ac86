//! Edge-side residual loop.
//!
//! The controller runs every `T_fb` seconds and sees the residual `d` ticks
//! late, `d = floor(d_fb / T_fb)`:
//!
//! ```text
//! u[k] = Kp e[k-d] + Ki T_fb sum_{i<=k-d} e[i] + Kd (e[k-d] - e[k-d-1]) / T_fb
//! ```
//!
//! The residual plant is an accumulator: the applied correction grows by the
//! quantized controller output each tick, `c[k+1] = c[k] + Q(u[k])`, and the
//! residual is `e[k] = open[k] - c[k]`. TA and CFO run as two independent loops
//! sharing gains and timing.

pub mod analysis;
pub mod sweep;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::stats::nearest_rank;
use crate::uncertainty::ResidualSample;

pub use analysis::{closed_loop_response, LoopAnalysisConfig, LoopResponse, ResponsePoint};
pub use sweep::{delay_quantization_sweep, SweepRow, SweepSpec};

/// Gains, timing and quantization shared by the TA and CFO loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidConfig {
    pub kp: f64,
    /// 1/s
    pub ki: f64,
    /// s
    pub kd: f64,
    pub t_fb_s: f64,
    pub d_fb_s: f64,
    pub quant_tau_s: f64,
    pub quant_f_hz: f64,
    /// Bound on the integral term of the TA loop, s.
    pub integral_limit_tau_s: f64,
    /// Bound on the integral term of the CFO loop, Hz.
    pub integral_limit_f_hz: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 0.2,
            ki: 4.0,
            kd: 0.0001,
            t_fb_s: 0.005,
            d_fb_s: 0.005,
            quant_tau_s: 0.1e-6,
            quant_f_hz: 50.0,
            integral_limit_tau_s: 50e-6,
            integral_limit_f_hz: 20_000.0,
        }
    }
}

impl PidConfig {
    /// `floor(d_fb / T_fb)`, guarded against representation error when the
    /// ratio is an exact integer.
    pub fn delay_index(&self) -> usize {
        let ratio = self.d_fb_s / self.t_fb_s;
        (ratio + 1e-9).floor().max(0.0) as usize
    }

    pub fn ta_loop(&self) -> LoopParams {
        self.loop_params(self.quant_tau_s, self.integral_limit_tau_s)
    }

    pub fn cfo_loop(&self) -> LoopParams {
        self.loop_params(self.quant_f_hz, self.integral_limit_f_hz)
    }

    fn loop_params(&self, quant_step: f64, integral_limit: f64) -> LoopParams {
        LoopParams {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            t_fb_s: self.t_fb_s,
            delay: self.delay_index(),
            quant_step,
            integral_limit,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.t_fb_s > 0.0) {
            errs.push(format!("t_fb_s must be > 0 (got {})", self.t_fb_s));
        }
        if !(self.d_fb_s >= 0.0) {
            errs.push(format!("d_fb_s must be >= 0 (got {})", self.d_fb_s));
        }
        for (k, v) in [("quant_tau_s", self.quant_tau_s), ("quant_f_hz", self.quant_f_hz)] {
            if !(v >= 0.0) {
                errs.push(format!("{k} must be >= 0 (got {v})"));
            }
        }
        for (k, v) in [
            ("integral_limit_tau_s", self.integral_limit_tau_s),
            ("integral_limit_f_hz", self.integral_limit_f_hz),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{k} must be > 0 (got {v})"));
            }
        }
        for (k, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() {
                errs.push(format!("{k} must be finite"));
            }
        }
        errs
    }
}

/// One loop's parameters in its own units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub t_fb_s: f64,
    pub delay: usize,
    pub quant_step: f64,
    /// Bound on `|Ki T_fb sum e|`.
    pub integral_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Most recent errors, newest last; holds `delay + 2` entries.
    history: VecDeque<f64>,
    /// Running sum of delayed errors (the integral term is `Ki T_fb` times this).
    pub integral_acc: f64,
    pub accumulated_correction: f64,
    pub k: u64,
}

impl ControllerState {
    pub fn new(delay: usize) -> Self {
        Self {
            history: VecDeque::with_capacity(delay + 2),
            integral_acc: 0.0,
            accumulated_correction: 0.0,
            k: 0,
        }
    }

    /// Error seen `lag` ticks ago, zero before the start of the history.
    fn lagged(&self, lag: usize) -> f64 {
        let len = self.history.len();
        if lag < len {
            self.history[len - 1 - lag]
        } else {
            0.0
        }
    }
}

/// Push `e_k` and return `u[k]`.
pub fn controller_step(params: &LoopParams, state: &mut ControllerState, e_k: f64) -> f64 {
    let d = params.delay;
    state.history.push_back(e_k);
    while state.history.len() > d + 2 {
        state.history.pop_front();
    }
    let e_d = state.lagged(d);
    let e_d1 = state.lagged(d + 1);
    let ki_t = params.ki * params.t_fb_s;

    if state.k >= d as u64 {
        state.integral_acc += e_d;
        if ki_t != 0.0 {
            let bound = (params.integral_limit / ki_t).abs();
            state.integral_acc = state.integral_acc.clamp(-bound, bound);
        }
    }
    state.k += 1;

    params.kp * e_d + ki_t * state.integral_acc + params.kd * (e_d - e_d1) / params.t_fb_s
}

/// Round to the nearest multiple of `step`, ties away from zero. A zero step
/// is the identity.
pub fn quantize(value: f64, step: f64) -> f64 {
    if step == 0.0 {
        value
    } else {
        (value / step).round() * step
    }
}

/// Single-loop tracker: residual, controller and accumulating actuator.
#[derive(Debug, Clone)]
pub struct ResidualLoop {
    params: LoopParams,
    state: ControllerState,
}

impl ResidualLoop {
    pub fn new(params: LoopParams) -> Self {
        Self {
            state: ControllerState::new(params.delay),
            params,
        }
    }

    pub fn correction(&self) -> f64 {
        self.state.accumulated_correction
    }

    /// Residual left after the current correction; advances the loop one tick.
    pub fn step(&mut self, open_loop: f64) -> f64 {
        let e = open_loop - self.state.accumulated_correction;
        let u = controller_step(&self.params, &mut self.state, e);
        self.state.accumulated_correction += quantize(u, self.params.quant_step);
        e
    }
}

/// Paired TA/CFO loops driven one sample at a time.
#[derive(Debug, Clone)]
pub struct EdgeController {
    ta: ResidualLoop,
    cfo: ResidualLoop,
}

impl EdgeController {
    pub fn new(cfg: &PidConfig) -> Self {
        Self {
            ta: ResidualLoop::new(cfg.ta_loop()),
            cfo: ResidualLoop::new(cfg.cfo_loop()),
        }
    }

    pub fn apply(&mut self, sample: &ResidualSample) -> ResidualSample {
        ResidualSample {
            dtau_closed_s: Some(self.ta.step(sample.dtau_open_s)),
            dcfo_closed_hz: Some(self.cfo.step(sample.dcfo_open_hz)),
            ..*sample
        }
    }
}

/// `100 x P95(|open|)` for one residual channel.
fn divergence_limit(values: impl Iterator<Item = f64>) -> f64 {
    let mut mags: Vec<f64> = values.map(f64::abs).collect();
    100.0 * nearest_rank(&mut mags, 95.0).unwrap_or(0.0)
}

/// Run both loops over an open-loop trajectory sampled at `T_fb`.
///
/// Fails with [`SimError::Diverged`] if any residual exceeds 100 times the
/// trajectory's open-loop P95 magnitude on that channel.
pub fn closed_loop_track(cfg: &PidConfig, open_loop: &[ResidualSample]) -> SimResult<Vec<ResidualSample>> {
    let ta_limit = divergence_limit(open_loop.iter().map(|s| s.dtau_open_s));
    let cfo_limit = divergence_limit(open_loop.iter().map(|s| s.dcfo_open_hz));
    let mut ctl = EdgeController::new(cfg);
    open_loop
        .iter()
        .enumerate()
        .map(|(tick, s)| {
            let out = ctl.apply(s);
            let (ta, cfo) = (out.dtau_closed_s.unwrap_or(0.0), out.dcfo_closed_hz.unwrap_or(0.0));
            if !ta.is_finite() || ta.abs() > ta_limit {
                return Err(SimError::Diverged { tick, magnitude: ta.abs(), limit: ta_limit });
            }
            if !cfo.is_finite() || cfo.abs() > cfo_limit {
                return Err(SimError::Diverged { tick, magnitude: cfo.abs(), limit: cfo_limit });
            }
            Ok(out)
        })
        .collect()
}
