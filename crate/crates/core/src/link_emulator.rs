//! Regime guard, regime-switching transport penalties and the handover state
//! machine that tags telemetry rows.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::GeometrySample;
use crate::uncertainty::ResidualSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeThresholds {
    pub tau_cp_s: f64,
    pub f_scs_hz: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            tau_cp_s: 1.0e-6,
            f_scs_hz: 300.0,
        }
    }
}

impl RegimeThresholds {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.tau_cp_s > 0.0) {
            errs.push(format!("tau_cp_s must be > 0 (got {})", self.tau_cp_s));
        }
        if !(self.f_scs_hz > 0.0) {
            errs.push(format!("f_scs_hz must be > 0 (got {})", self.f_scs_hz));
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Nominal,
    Degraded,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Nominal => "NOMINAL",
            Regime::Degraded => "DEGRADED",
        })
    }
}

/// NOMINAL iff both residuals are inside their thresholds (boundaries count
/// as inside).
pub fn classify_regime(dtau_s: f64, dcfo_hz: f64, th: &RegimeThresholds) -> Regime {
    if dtau_s.abs() <= th.tau_cp_s && dcfo_hz.abs() <= th.f_scs_hz {
        Regime::Nominal
    } else {
        Regime::Degraded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportParams {
    pub rate_nominal_mbps: f64,
    pub rate_degraded_mbps: f64,
    pub rate_sigma_nominal_mbps: f64,
    pub rate_sigma_degraded_mbps: f64,
    pub latency_base_ms: f64,
    pub latency_retx_ms: f64,
    pub jitter_nominal_ms: f64,
    pub jitter_degraded_ms: f64,
    pub loss_nominal: f64,
    pub loss_degraded: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        Self {
            rate_nominal_mbps: 197.3,
            rate_degraded_mbps: 80.1,
            rate_sigma_nominal_mbps: 4.0,
            rate_sigma_degraded_mbps: 0.4,
            latency_base_ms: 19.0,
            latency_retx_ms: 35.3,
            jitter_nominal_ms: 17.2,
            jitter_degraded_ms: 20.3,
            loss_nominal: 0.001,
            loss_degraded: 0.02,
        }
    }
}

impl TransportParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.rate_degraded_mbps < self.rate_nominal_mbps) {
            errs.push(format!(
                "rate_degraded_mbps ({}) must be below rate_nominal_mbps ({})",
                self.rate_degraded_mbps, self.rate_nominal_mbps
            ));
        }
        for (k, v) in [
            ("rate_degraded_mbps", self.rate_degraded_mbps),
            ("rate_sigma_nominal_mbps", self.rate_sigma_nominal_mbps),
            ("rate_sigma_degraded_mbps", self.rate_sigma_degraded_mbps),
            ("latency_base_ms", self.latency_base_ms),
            ("latency_retx_ms", self.latency_retx_ms),
            ("jitter_nominal_ms", self.jitter_nominal_ms),
            ("jitter_degraded_ms", self.jitter_degraded_ms),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("{k} must be >= 0 (got {v})"));
            }
        }
        for (k, v) in [("loss_nominal", self.loss_nominal), ("loss_degraded", self.loss_degraded)] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{k} must be in [0, 1] (got {v})"));
            }
        }
        errs
    }

    fn regime_terms(&self, regime: Regime) -> (f64, f64, f64, f64, f64) {
        match regime {
            Regime::Nominal => (
                self.rate_nominal_mbps,
                self.rate_sigma_nominal_mbps,
                self.latency_base_ms,
                self.jitter_nominal_ms,
                self.loss_nominal,
            ),
            Regime::Degraded => (
                self.rate_degraded_mbps,
                self.rate_sigma_degraded_mbps,
                self.latency_base_ms + self.latency_retx_ms,
                self.jitter_degraded_ms,
                self.loss_degraded,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSample {
    pub goodput_mbps: f64,
    pub rtt_ms: f64,
    pub loss_event: bool,
}

/// One transport draw. Every call consumes the same number of random values
/// whatever the regime, so streams stay aligned across modes.
pub fn transport_step<R: Rng + ?Sized>(regime: Regime, params: &TransportParams, rng: &mut R) -> TransportSample {
    let (rate, sigma, latency, jitter, loss) = params.regime_terms(regime);
    let g: f64 = rng.sample(StandardNormal);
    let j: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    TransportSample {
        goodput_mbps: (rate + sigma * g).max(0.0),
        rtt_ms: latency + (jitter * j).abs(),
        loss_event: u < loss,
    }
}

/// Round-trip time seen by an independent probe stream.
pub fn probe_rtt<R: Rng + ?Sized>(regime: Regime, params: &TransportParams, rng: &mut R) -> f64 {
    let (_, _, latency, jitter, _) = params.regime_terms(regime);
    let z: f64 = rng.sample(StandardNormal);
    latency + (jitter * z).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HandoverState {
    Normal,
    PreWarn,
    PreWarm,
    Switching,
    Cleanup,
}

impl HandoverState {
    pub const ALL: [HandoverState; 5] = [
        HandoverState::Normal,
        HandoverState::PreWarn,
        HandoverState::PreWarm,
        HandoverState::Switching,
        HandoverState::Cleanup,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HandoverState::Normal => "NORMAL",
            HandoverState::PreWarn => "PRE_WARN",
            HandoverState::PreWarm => "PRE_WARM",
            HandoverState::Switching => "SWITCHING",
            HandoverState::Cleanup => "CLEANUP",
        }
    }

    /// The state that follows in the handover cycle.
    pub fn successor(&self) -> HandoverState {
        match self {
            HandoverState::Normal => HandoverState::PreWarn,
            HandoverState::PreWarn => HandoverState::PreWarm,
            HandoverState::PreWarm => HandoverState::Switching,
            HandoverState::Switching => HandoverState::Cleanup,
            HandoverState::Cleanup => HandoverState::Normal,
        }
    }
}

impl fmt::Display for HandoverState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateDwellConfig {
    /// Time-to-LOS below which NORMAL moves to PRE_WARN.
    pub t_warn_s: f64,
    pub t_warm_s: f64,
    pub t_switch_s: f64,
    /// Minimum CLEANUP residence before returning to NORMAL.
    pub cleanup_s: f64,
    /// Elevation at which the next pass counts as acquired.
    pub min_elevation_deg: f64,
    /// Multiplier on the time-to-LOS thresholds while the link is degraded.
    pub degraded_lead_factor: f64,
    /// Smoothing time constant of the degraded-link indicator.
    pub degraded_smoothing_s: f64,
}

impl Default for StateDwellConfig {
    fn default() -> Self {
        Self {
            t_warn_s: 96.0,
            t_warm_s: 50.6,
            t_switch_s: 0.34,
            cleanup_s: 5.0,
            min_elevation_deg: 10.0,
            degraded_lead_factor: 1.12,
            degraded_smoothing_s: 1.5,
        }
    }
}

impl StateDwellConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.t_warn_s > self.t_warm_s && self.t_warm_s > self.t_switch_s && self.t_switch_s > 0.0) {
            errs.push(format!(
                "thresholds must satisfy t_warn_s > t_warm_s > t_switch_s > 0 (got {}, {}, {})",
                self.t_warn_s, self.t_warm_s, self.t_switch_s
            ));
        }
        if !(self.cleanup_s >= 0.0) {
            errs.push(format!("cleanup_s must be >= 0 (got {})", self.cleanup_s));
        }
        if !(self.degraded_lead_factor > 0.0) {
            errs.push(format!("degraded_lead_factor must be > 0 (got {})", self.degraded_lead_factor));
        }
        if !(self.degraded_smoothing_s >= 0.0) {
            errs.push(format!("degraded_smoothing_s must be >= 0 (got {})", self.degraded_smoothing_s));
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverInputs {
    pub elevation_deg: f64,
    pub time_to_los_s: f64,
    pub time_in_state_s: f64,
    pub link_degraded: bool,
}

/// Advance the handover machine by at most one state.
pub fn handover_step(hs: HandoverState, inp: &HandoverInputs, dwell: &StateDwellConfig) -> HandoverState {
    let lead = if inp.link_degraded { dwell.degraded_lead_factor } else { 1.0 };
    let ttl = inp.time_to_los_s;
    let advance = match hs {
        HandoverState::Normal => ttl < dwell.t_warn_s * lead,
        HandoverState::PreWarn => ttl < dwell.t_warm_s * lead,
        HandoverState::PreWarm => ttl < dwell.t_switch_s * lead,
        HandoverState::Switching => ttl <= 0.0,
        HandoverState::Cleanup => {
            inp.time_in_state_s >= dwell.cleanup_s
                && inp.elevation_deg >= dwell.min_elevation_deg
                && ttl >= dwell.t_warn_s * lead
        }
    };
    if advance {
        hs.successor()
    } else {
        hs
    }
}

/// Stateful wrapper: tracks residence time and a smoothed degraded indicator.
#[derive(Debug, Clone)]
pub struct HandoverMachine {
    dwell: StateDwellConfig,
    state: HandoverState,
    entered_s: f64,
    degraded_level: f64,
    last_t: Option<f64>,
}

impl HandoverMachine {
    pub fn new(dwell: StateDwellConfig, t_s: f64) -> Self {
        Self {
            dwell,
            state: HandoverState::Normal,
            entered_s: t_s,
            degraded_level: 0.0,
            last_t: None,
        }
    }

    pub fn state(&self) -> HandoverState {
        self.state
    }

    pub fn update(&mut self, t_s: f64, elevation_deg: f64, time_to_los_s: f64, regime: Regime) -> HandoverState {
        let x = if regime == Regime::Degraded { 1.0 } else { 0.0 };
        let alpha = match self.last_t {
            Some(prev) if self.dwell.degraded_smoothing_s > 0.0 => 1.0 - (-(t_s - prev) / self.dwell.degraded_smoothing_s).exp(),
            Some(_) => 1.0,
            None => 1.0,
        };
        self.degraded_level += alpha * (x - self.degraded_level);
        self.last_t = Some(t_s);

        let next = handover_step(
            self.state,
            &HandoverInputs {
                elevation_deg,
                time_to_los_s,
                time_in_state_s: t_s - self.entered_s,
                link_degraded: self.degraded_level > 0.5,
            },
            &self.dwell,
        );
        if next != self.state {
            self.state = next;
            self.entered_s = t_s;
        }
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    EdgeControlled,
    Reference,
    Probe,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::EdgeControlled => "EDGE_CONTROLLED",
            Mode::Reference => "REFERENCE",
            Mode::Probe => "PROBE",
        }
    }

    /// Whether the residual loop runs in this mode.
    pub fn closed_loop(&self) -> bool {
        !matches!(self, Mode::Reference)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One downsampled campaign tick. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub t_s: f64,
    pub station: String,
    pub run_id: String,
    pub mode: Mode,
    pub handover_state: HandoverState,
    pub elevation_deg: f64,
    pub slant_range_km: f64,
    pub doppler_hz: f64,
    pub dtau_open_us: f64,
    pub dcfo_open_hz: f64,
    pub dtau_closed_us: Option<f64>,
    pub dcfo_closed_hz: Option<f64>,
    pub regime: Regime,
    pub goodput_mbps: f64,
    pub rtt_ms: f64,
    pub loss_event: u8,
}

pub const TELEMETRY_COLUMNS: [&str; 16] = [
    "t_s",
    "station",
    "run_id",
    "mode",
    "handover_state",
    "elevation_deg",
    "slant_range_km",
    "doppler_hz",
    "dtau_open_us",
    "dcfo_open_hz",
    "dtau_closed_us",
    "dcfo_closed_hz",
    "regime",
    "goodput_mbps",
    "rtt_ms",
    "loss_event",
];

impl TelemetryRow {
    /// Residual the regime guard acts on: closed-loop when present.
    pub fn active_residual_us_hz(&self) -> (f64, f64) {
        match (self.dtau_closed_us, self.dcfo_closed_hz) {
            (Some(t), Some(f)) => (t, f),
            _ => (self.dtau_open_us, self.dcfo_open_hz),
        }
    }

    /// Regime recomputed from the stored residual columns.
    pub fn classified_regime(&self, th: &RegimeThresholds) -> Regime {
        let (t_us, f_hz) = self.active_residual_us_hz();
        classify_regime(t_us * 1e-6, f_hz, th)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinkTickInputs<'a> {
    pub station: &'a str,
    pub run_id: &'a str,
    pub mode: Mode,
    pub handover_state: HandoverState,
    pub geometry: &'a GeometrySample,
    pub residual: &'a ResidualSample,
}

/// Classify the active residual, draw transport and assemble the row.
pub fn link_tick<R: Rng + ?Sized>(
    inp: &LinkTickInputs<'_>,
    th: &RegimeThresholds,
    transport: &TransportParams,
    rng: &mut R,
) -> TelemetryRow {
    let r = inp.residual;
    let closed = inp.mode.closed_loop();
    let mut row = TelemetryRow {
        t_s: r.t_s,
        station: inp.station.to_string(),
        run_id: inp.run_id.to_string(),
        mode: inp.mode,
        handover_state: inp.handover_state,
        elevation_deg: inp.geometry.elevation_deg,
        slant_range_km: inp.geometry.slant_range_km,
        doppler_hz: inp.geometry.doppler_hz,
        dtau_open_us: r.dtau_open_s * 1e6,
        dcfo_open_hz: r.dcfo_open_hz,
        dtau_closed_us: r.dtau_closed_s.filter(|_| closed).map(|v| v * 1e6),
        dcfo_closed_hz: r.dcfo_closed_hz.filter(|_| closed),
        regime: Regime::Nominal,
        goodput_mbps: 0.0,
        rtt_ms: 0.0,
        loss_event: 0,
    };
    row.regime = row.classified_regime(th);
    let tr = transport_step(row.regime, transport, rng);
    row.goodput_mbps = tr.goodput_mbps;
    row.rtt_ms = tr.rtt_ms;
    row.loss_event = u8::from(tr.loss_event);
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn regime_boundaries_are_inclusive() {
        let th = RegimeThresholds::default();
        assert_eq!(classify_regime(0.0, 0.0, &th), Regime::Nominal);
        assert_eq!(classify_regime(th.tau_cp_s, 0.0, &th), Regime::Nominal);
        assert_eq!(classify_regime(-th.tau_cp_s, -th.f_scs_hz, &th), Regime::Nominal);
        assert_eq!(classify_regime(3.65e-6, 76.0, &th), Regime::Degraded);
        assert_eq!(classify_regime(0.0, 300.5, &th), Regime::Degraded);
    }

    #[test]
    fn zero_jitter_gives_fixed_rtt() {
        let p = TransportParams {
            jitter_nominal_ms: 0.0,
            jitter_degraded_ms: 0.0,
            loss_nominal: 0.0,
            loss_degraded: 0.0,
            ..TransportParams::default()
        };
        let mut rng = stream(2, &[]);
        for _ in 0..100 {
            let n = transport_step(Regime::Nominal, &p, &mut rng);
            let d = transport_step(Regime::Degraded, &p, &mut rng);
            assert_eq!(n.rtt_ms, p.latency_base_ms);
            assert_eq!(d.rtt_ms, p.latency_base_ms + p.latency_retx_ms);
            assert!(!n.loss_event && !d.loss_event);
        }
    }

    #[test]
    fn goodput_is_floored_at_zero() {
        let p = TransportParams {
            rate_nominal_mbps: 1.0,
            rate_degraded_mbps: 0.0,
            rate_sigma_degraded_mbps: 50.0,
            ..TransportParams::default()
        };
        let mut rng = stream(4, &[]);
        assert!((0..1000).all(|_| transport_step(Regime::Degraded, &p, &mut rng).goodput_mbps >= 0.0));
    }

    fn inputs(ttl: f64) -> HandoverInputs {
        HandoverInputs {
            elevation_deg: 60.0,
            time_to_los_s: ttl,
            time_in_state_s: 0.0,
            link_degraded: false,
        }
    }

    #[test]
    fn handover_thresholds() {
        let dw = StateDwellConfig::default();
        assert_eq!(handover_step(HandoverState::Normal, &inputs(300.0), &dw), HandoverState::Normal);
        assert_eq!(
            handover_step(HandoverState::PreWarm, &inputs(dw.t_switch_s - 1e-6), &dw),
            HandoverState::Switching
        );
        assert_eq!(handover_step(HandoverState::PreWarm, &inputs(dw.t_switch_s), &dw), HandoverState::PreWarm);
        // One transition per step even when several thresholds are crossed.
        assert_eq!(handover_step(HandoverState::Normal, &inputs(0.1), &dw), HandoverState::PreWarn);
    }

    #[test]
    fn degraded_link_warns_earlier() {
        let dw = StateDwellConfig::default();
        let mut inp = inputs(dw.t_warn_s + 1.0);
        assert_eq!(handover_step(HandoverState::Normal, &inp, &dw), HandoverState::Normal);
        inp.link_degraded = true;
        assert_eq!(handover_step(HandoverState::Normal, &inp, &dw), HandoverState::PreWarn);
    }

    #[test]
    fn cleanup_waits_for_next_pass() {
        let dw = StateDwellConfig::default();
        let mut inp = HandoverInputs {
            elevation_deg: 2.0,
            time_to_los_s: 400.0,
            time_in_state_s: 10.0,
            link_degraded: false,
        };
        assert_eq!(handover_step(HandoverState::Cleanup, &inp, &dw), HandoverState::Cleanup);
        inp.elevation_deg = 20.0;
        assert_eq!(handover_step(HandoverState::Cleanup, &inp, &dw), HandoverState::Normal);
        inp.time_in_state_s = 1.0;
        assert_eq!(handover_step(HandoverState::Cleanup, &inp, &dw), HandoverState::Cleanup);
    }

    #[test]
    fn reference_rows_with_open_loop_magnitudes_are_degraded() {
        let th = RegimeThresholds::default();
        let geo = GeometrySample {
            t_s: 0.0,
            slant_range_km: 900.0,
            radial_velocity_kms: -3.0,
            elevation_deg: 40.0,
            doppler_hz: 20_000.0,
            los_enu: [0.0, 0.0, 1.0],
        };
        let res = ResidualSample {
            dtau_closed_s: Some(0.2e-6),
            dcfo_closed_hz: Some(20.0),
            ..ResidualSample::open(0.0, 3.65e-6, 855.0)
        };
        let mut rng = stream(8, &[]);
        let mk = |mode| LinkTickInputs {
            station: "s",
            run_id: "r",
            mode,
            handover_state: HandoverState::Normal,
            geometry: &geo,
            residual: &res,
        };
        let reference = link_tick(&mk(Mode::Reference), &th, &TransportParams::default(), &mut rng);
        assert_eq!(reference.regime, Regime::Degraded);
        assert_eq!(reference.dtau_closed_us, None);
        let controlled = link_tick(&mk(Mode::EdgeControlled), &th, &TransportParams::default(), &mut rng);
        assert_eq!(controlled.regime, Regime::Nominal);
    }
}
