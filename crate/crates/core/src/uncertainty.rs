//! Open-loop residual error budget.
//!
//! The residual timing error is the sum of four range-domain components
//! (ephemeris, UE position, clock, propagation) divided by `c`; the residual
//! CFO is the radial-velocity error scaled by `f_c / c` plus an oscillator term.
//!
//! Stochastic components are driven from unit-variance internal states and
//! scaled by the configured magnitudes at read time, so scaling every
//! magnitude by `k` under a fixed seed scales every sample by exactly `k`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::LinkConstants;
use crate::stats::Percentiles;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    /// Half-width of the uniform along-track bias (equivalent range), m.
    pub eph_along_track_bias_m: f64,
    /// Ephemeris random-walk intensity, m/sqrt(s).
    pub eph_drift_rw_m_per_sqrt_s: f64,
    /// Correlation time of the ephemeris radial-velocity error, s. Its standard
    /// deviation is `eph_drift_rw / sqrt(eph_velocity_corr_s)`.
    pub eph_velocity_corr_s: f64,
    pub gnss_sigma_h_m: f64,
    pub gnss_sigma_v_m: f64,
    /// White UE velocity error along the line of sight, m/s.
    pub gnss_velocity_sigma_mps: f64,
    pub clock_bias_sigma_us: f64,
    pub clock_drift_ppm: f64,
    pub clock_resync_interval_s: f64,
    pub prop_jitter_sigma_us: f64,
    /// Gauss-Markov correlation time of the propagation term; 0 means white.
    pub prop_jitter_corr_s: f64,
    /// Per-sample white propagation/measurement noise, us.
    pub prop_white_sigma_us: f64,
    /// Magnitude of the static oscillator offset (sign drawn per run), Hz.
    pub osc_offset_mean_hz: f64,
    /// Per-run Gaussian spread of the static oscillator offset, Hz.
    pub osc_offset_sigma_hz: f64,
    pub osc_jitter_sigma_hz: f64,
    /// Gauss-Markov correlation time of the oscillator wander; 0 means white.
    pub osc_jitter_corr_s: f64,
    /// Per-sample white frequency noise, Hz.
    pub osc_white_sigma_hz: f64,
    pub seed: u64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            eph_along_track_bias_m: 150.0,
            eph_drift_rw_m_per_sqrt_s: 0.2,
            eph_velocity_corr_s: 1.0,
            gnss_sigma_h_m: 5.0,
            gnss_sigma_v_m: 10.0,
            gnss_velocity_sigma_mps: 0.05,
            clock_bias_sigma_us: 1.2,
            clock_drift_ppm: 0.5,
            clock_resync_interval_s: 4.0,
            prop_jitter_sigma_us: 0.4,
            prop_jitter_corr_s: 1.0,
            prop_white_sigma_us: 0.17,
            osc_offset_mean_hz: 0.0,
            osc_offset_sigma_hz: 480.0,
            osc_jitter_sigma_hz: 50.0,
            osc_jitter_corr_s: 1.0,
            osc_white_sigma_hz: 30.0,
            seed: 0,
        }
    }
}

impl UncertaintyConfig {
    /// Disturbance model of the campaign runs: a persistent oscillator
    /// offset of either sign, slightly more timing noise and less frequency
    /// noise than the model layer.
    pub fn campaign_default() -> Self {
        Self {
            osc_offset_mean_hz: 650.0,
            osc_offset_sigma_hz: 120.0,
            prop_white_sigma_us: 0.19,
            osc_white_sigma_hz: 25.0,
            ..Self::default()
        }
    }

    /// Every magnitude set to zero; correlation times and resync kept.
    pub fn zero() -> Self {
        Self::default().scaled(0.0)
    }

    /// Multiply every error magnitude by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            eph_along_track_bias_m: self.eph_along_track_bias_m * k,
            eph_drift_rw_m_per_sqrt_s: self.eph_drift_rw_m_per_sqrt_s * k,
            gnss_sigma_h_m: self.gnss_sigma_h_m * k,
            gnss_sigma_v_m: self.gnss_sigma_v_m * k,
            gnss_velocity_sigma_mps: self.gnss_velocity_sigma_mps * k,
            clock_bias_sigma_us: self.clock_bias_sigma_us * k,
            clock_drift_ppm: self.clock_drift_ppm * k,
            prop_jitter_sigma_us: self.prop_jitter_sigma_us * k,
            prop_white_sigma_us: self.prop_white_sigma_us * k,
            osc_offset_mean_hz: self.osc_offset_mean_hz * k,
            osc_offset_sigma_hz: self.osc_offset_sigma_hz * k,
            osc_jitter_sigma_hz: self.osc_jitter_sigma_hz * k,
            osc_white_sigma_hz: self.osc_white_sigma_hz * k,
            ..*self
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let non_negative = [
            ("eph_along_track_bias_m", self.eph_along_track_bias_m),
            ("eph_drift_rw_m_per_sqrt_s", self.eph_drift_rw_m_per_sqrt_s),
            ("eph_velocity_corr_s", self.eph_velocity_corr_s),
            ("gnss_sigma_h_m", self.gnss_sigma_h_m),
            ("gnss_sigma_v_m", self.gnss_sigma_v_m),
            ("gnss_velocity_sigma_mps", self.gnss_velocity_sigma_mps),
            ("clock_bias_sigma_us", self.clock_bias_sigma_us),
            ("clock_drift_ppm", self.clock_drift_ppm),
            ("prop_jitter_sigma_us", self.prop_jitter_sigma_us),
            ("prop_jitter_corr_s", self.prop_jitter_corr_s),
            ("prop_white_sigma_us", self.prop_white_sigma_us),
            ("osc_offset_mean_hz", self.osc_offset_mean_hz),
            ("osc_offset_sigma_hz", self.osc_offset_sigma_hz),
            ("osc_jitter_sigma_hz", self.osc_jitter_sigma_hz),
            ("osc_jitter_corr_s", self.osc_jitter_corr_s),
            ("osc_white_sigma_hz", self.osc_white_sigma_hz),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("{key} must be finite and >= 0 (got {v})"));
            }
        }
        if !(self.clock_resync_interval_s > 0.0) {
            errs.push(format!(
                "clock_resync_interval_s must be > 0 (got {})",
                self.clock_resync_interval_s
            ));
        }
        errs
    }
}

/// Per-run static draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunBiases {
    pub along_track_bias_m: f64,
    pub clock_bias_s: f64,
    /// Signed fractional clock drift (0.5 ppm = 5e-7).
    pub clock_drift: f64,
    /// Time of the first clock resync, in `[0, resync interval)`.
    pub resync_phase_s: f64,
    pub osc_offset_hz: f64,
    /// UE position error, east/north/up, m.
    pub gnss_enu_m: [f64; 3],
}

impl RunBiases {
    pub const ZERO: RunBiases = RunBiases {
        along_track_bias_m: 0.0,
        clock_bias_s: 0.0,
        clock_drift: 0.0,
        resync_phase_s: 0.0,
        osc_offset_hz: 0.0,
        gnss_enu_m: [0.0; 3],
    };
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Draw the static per-run biases. The number of draws taken from `rng` does
/// not depend on the configuration.
pub fn sample_run_biases<R: Rng + ?Sized>(cfg: &UncertaintyConfig, rng: &mut R) -> RunBiases {
    let along = rng.random_range(-1.0..=1.0) * cfg.eph_along_track_bias_m;
    let clock_z: f64 = rng.sample(StandardNormal);
    let drift_sign = sign(rng);
    let phase_u: f64 = rng.random();
    let osc_sign = sign(rng);
    let osc_z: f64 = rng.sample(StandardNormal);
    let ge: f64 = rng.sample(StandardNormal);
    let gn: f64 = rng.sample(StandardNormal);
    let gu: f64 = rng.sample(StandardNormal);
    RunBiases {
        along_track_bias_m: along,
        clock_bias_s: clock_z * cfg.clock_bias_sigma_us * 1e-6,
        clock_drift: drift_sign * cfg.clock_drift_ppm * 1e-6,
        resync_phase_s: phase_u * cfg.clock_resync_interval_s,
        osc_offset_hz: osc_sign * cfg.osc_offset_mean_hz + osc_z * cfg.osc_offset_sigma_hz,
        gnss_enu_m: [ge * cfg.gnss_sigma_h_m, gn * cfg.gnss_sigma_h_m, gu * cfg.gnss_sigma_v_m],
    }
}

/// Unit-intensity random walk; starts at zero on the first update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RandomWalk {
    value: f64,
    last_t: Option<f64>,
}

impl RandomWalk {
    pub fn advance<R: Rng + ?Sized>(&mut self, t_s: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        if let Some(last) = self.last_t {
            let dt = (t_s - last).max(0.0);
            self.value += dt.sqrt() * z;
        }
        self.last_t = Some(t_s);
        self.value
    }
}

/// Unit-variance first-order Gauss-Markov process, stationary from the first
/// sample. A non-positive correlation time gives white noise.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussMarkov {
    value: f64,
    last_t: Option<f64>,
}

impl GaussMarkov {
    pub fn advance<R: Rng + ?Sized>(&mut self, t_s: f64, corr_s: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.value = match self.last_t {
            Some(last) if corr_s > 0.0 => {
                let phi = (-(t_s - last).max(0.0) / corr_s).exp();
                phi * self.value + (1.0 - phi * phi).sqrt() * z
            }
            _ => z,
        };
        self.last_t = Some(t_s);
        self.value
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RangeProcessState {
    pub eph_drift: RandomWalk,
    pub prop: GaussMarkov,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VelocityProcessState {
    pub eph_velocity: GaussMarkov,
    pub osc: GaussMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeErrorSample {
    pub t_s: f64,
    pub d_rho_eph_m: f64,
    pub d_rho_ue_m: f64,
    pub d_rho_clk_m: f64,
    pub d_rho_prop_m: f64,
    pub total_dtau_s: f64,
}

impl RangeErrorSample {
    pub fn component_sum_m(&self) -> f64 {
        self.d_rho_eph_m + self.d_rho_ue_m + self.d_rho_clk_m + self.d_rho_prop_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityErrorSample {
    pub t_s: f64,
    pub d_vr_eph_ms: f64,
    pub d_vr_ue_ms: f64,
    pub d_f_osc_hz: f64,
    pub total_dcfo_hz: f64,
}

/// Open-loop (and, once a controller has run, closed-loop) residuals at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub t_s: f64,
    pub dtau_open_s: f64,
    pub dcfo_open_hz: f64,
    pub dtau_closed_s: Option<f64>,
    pub dcfo_closed_hz: Option<f64>,
}

impl ResidualSample {
    pub fn open(t_s: f64, dtau_s: f64, dcfo_hz: f64) -> Self {
        Self {
            t_s,
            dtau_open_s: dtau_s,
            dcfo_open_hz: dcfo_hz,
            dtau_closed_s: None,
            dcfo_closed_hz: None,
        }
    }
}

/// Time of the most recent clock resync at or before `t_s`.
pub fn last_resync_s(cfg: &UncertaintyConfig, biases: &RunBiases, t_s: f64) -> f64 {
    let period = cfg.clock_resync_interval_s;
    let n = ((t_s - biases.resync_phase_s) / period).floor();
    biases.resync_phase_s + n * period
}

/// Range-domain error decomposition at `t_s`. `los_enu` is the unit
/// site-to-satellite vector used to project the UE position error.
pub fn range_error_at<R: Rng + ?Sized>(
    cfg: &UncertaintyConfig,
    biases: &RunBiases,
    t_s: f64,
    state: &mut RangeProcessState,
    los_enu: [f64; 3],
    consts: &LinkConstants,
    rng: &mut R,
) -> RangeErrorSample {
    let c = consts.c_ms;
    let rw = state.eph_drift.advance(t_s, rng);
    let prop = state.prop.advance(t_s, cfg.prop_jitter_corr_s, rng);
    let prop_white: f64 = rng.sample(StandardNormal);

    let d_rho_eph_m = biases.along_track_bias_m + cfg.eph_drift_rw_m_per_sqrt_s * rw;
    let d_rho_ue_m = los_enu
        .iter()
        .zip(biases.gnss_enu_m.iter())
        .map(|(l, g)| l * g)
        .sum::<f64>();
    let since_resync = t_s - last_resync_s(cfg, biases, t_s);
    let d_rho_clk_m = c * (biases.clock_bias_s + biases.clock_drift * since_resync);
    let d_rho_prop_m = c * 1e-6 * (cfg.prop_jitter_sigma_us * prop + cfg.prop_white_sigma_us * prop_white);

    let total = d_rho_eph_m + d_rho_ue_m + d_rho_clk_m + d_rho_prop_m;
    RangeErrorSample {
        t_s,
        d_rho_eph_m,
        d_rho_ue_m,
        d_rho_clk_m,
        d_rho_prop_m,
        total_dtau_s: total / c,
    }
}

/// Velocity/oscillator error decomposition at `t_s`.
pub fn velocity_error_at<R: Rng + ?Sized>(
    cfg: &UncertaintyConfig,
    biases: &RunBiases,
    t_s: f64,
    state: &mut VelocityProcessState,
    consts: &LinkConstants,
    rng: &mut R,
) -> VelocityErrorSample {
    let eph = state.eph_velocity.advance(t_s, cfg.eph_velocity_corr_s, rng);
    let osc = state.osc.advance(t_s, cfg.osc_jitter_corr_s, rng);
    let ue_z: f64 = rng.sample(StandardNormal);
    let osc_white: f64 = rng.sample(StandardNormal);

    let eph_sigma = if cfg.eph_velocity_corr_s > 0.0 {
        cfg.eph_drift_rw_m_per_sqrt_s / cfg.eph_velocity_corr_s.sqrt()
    } else {
        0.0
    };
    let d_vr_eph_ms = eph_sigma * eph;
    let d_vr_ue_ms = cfg.gnss_velocity_sigma_mps * ue_z;
    let d_f_osc_hz = biases.osc_offset_hz + cfg.osc_jitter_sigma_hz * osc + cfg.osc_white_sigma_hz * osc_white;
    VelocityErrorSample {
        t_s,
        d_vr_eph_ms,
        d_vr_ue_ms,
        d_f_osc_hz,
        total_dcfo_hz: consts.hz_per_mps() * (d_vr_eph_ms + d_vr_ue_ms) + d_f_osc_hz,
    }
}

/// Stateful generator of open-loop residuals for one run.
#[derive(Debug, Clone)]
pub struct ResidualGenerator {
    cfg: UncertaintyConfig,
    biases: RunBiases,
    consts: LinkConstants,
    range: RangeProcessState,
    velocity: VelocityProcessState,
}

impl ResidualGenerator {
    pub fn new(cfg: UncertaintyConfig, biases: RunBiases, consts: LinkConstants) -> Self {
        Self {
            cfg,
            biases,
            consts,
            range: RangeProcessState::default(),
            velocity: VelocityProcessState::default(),
        }
    }

    pub fn biases(&self) -> &RunBiases {
        &self.biases
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        t_s: f64,
        los_enu: [f64; 3],
        rng: &mut R,
    ) -> (RangeErrorSample, VelocityErrorSample) {
        let r = range_error_at(&self.cfg, &self.biases, t_s, &mut self.range, los_enu, &self.consts, rng);
        let v = velocity_error_at(&self.cfg, &self.biases, t_s, &mut self.velocity, &self.consts, rng);
        (r, v)
    }

    pub fn residual<R: Rng + ?Sized>(&mut self, t_s: f64, los_enu: [f64; 3], rng: &mut R) -> ResidualSample {
        let (r, v) = self.sample(t_s, los_enu, rng);
        ResidualSample::open(t_s, r.total_dtau_s, v.total_dcfo_hz)
    }
}

/// P50/P95/P99 of |residual TA| (us) and |residual CFO| (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileSummary {
    pub n_samples: usize,
    pub ta_us: Percentiles,
    pub cfo_hz: Percentiles,
}

impl PercentileSummary {
    pub fn from_magnitudes(mut ta_us: Vec<f64>, mut cfo_hz: Vec<f64>) -> Option<Self> {
        Some(Self {
            n_samples: ta_us.len(),
            ta_us: Percentiles::of(&mut ta_us)?,
            cfo_hz: Percentiles::of(&mut cfo_hz)?,
        })
    }
}

/// Pooled open-loop percentiles over `n_runs` seeded runs of `scenario`.
pub fn monte_carlo_open_loop(
    cfg: &UncertaintyConfig,
    scenario: &crate::scenario::MonteCarloScenario,
    n_runs: usize,
) -> crate::error::SimResult<PercentileSummary> {
    let runs = scenario.run_open_loop(cfg, n_runs)?;
    let (ta, cfo): (Vec<f64>, Vec<f64>) = runs
        .iter()
        .flat_map(|r| r.iter().map(|s| (s.dtau_open_s.abs() * 1e6, s.dcfo_open_hz.abs())))
        .unzip();
    PercentileSummary::from_magnitudes(ta, cfo)
        .ok_or_else(|| crate::error::SimError::Invalid("monte carlo produced no samples".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::nearest_rank;

    fn consts() -> LinkConstants {
        LinkConstants::default()
    }

    #[test]
    fn biases_are_deterministic_per_seed() {
        let cfg = UncertaintyConfig::default();
        let a = sample_run_biases(&cfg, &mut stream(11, &[]));
        let b = sample_run_biases(&cfg, &mut stream(11, &[]));
        assert_eq!(a, b);
    }

    #[test]
    fn along_track_bias_moments() {
        let cfg = UncertaintyConfig::default();
        let mut rng = stream(3, &[]);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| sample_run_biases(&cfg, &mut rng).along_track_bias_m)
            .collect();
        assert!(draws.iter().all(|d| (-150.0..=150.0).contains(d)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 2.0, "{mean}");
    }

    #[test]
    fn zero_config_gives_zero_biases_and_residuals() {
        let cfg = UncertaintyConfig::zero();
        let mut rng = stream(5, &[]);
        let b = sample_run_biases(&cfg, &mut rng);
        assert_eq!(b.along_track_bias_m, 0.0);
        assert_eq!(b.clock_bias_s, 0.0);
        assert_eq!(b.clock_drift, 0.0);
        assert_eq!(b.osc_offset_hz, 0.0);
        assert_eq!(b.gnss_enu_m, [0.0; 3]);
        let mut gen = ResidualGenerator::new(cfg, b, consts());
        for k in 0..100 {
            let r = gen.residual(k as f64 * 0.005, [0.3, 0.4, 0.866], &mut rng);
            assert_eq!(r.dtau_open_s, 0.0);
            assert_eq!(r.dcfo_open_hz, 0.0);
        }
    }

    #[test]
    fn clock_drift_since_resync() {
        let cfg = UncertaintyConfig {
            clock_resync_interval_s: 10.0,
            ..UncertaintyConfig::zero()
        };
        let biases = RunBiases {
            clock_drift: 0.5e-6,
            ..RunBiases::ZERO
        };
        let mut state = RangeProcessState::default();
        let s = range_error_at(&cfg, &biases, 4.0, &mut state, [0.0, 0.0, 1.0], &consts(), &mut stream(1, &[]));
        assert!((s.d_rho_clk_m - 599.584_916).abs() < 1e-6, "{}", s.d_rho_clk_m);
        assert!((s.total_dtau_s - 2.0e-6).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity_holds() {
        let cfg = UncertaintyConfig::default();
        let mut rng = stream(9, &[]);
        let biases = sample_run_biases(&cfg, &mut rng);
        let mut state = RangeProcessState::default();
        for k in 0..1000 {
            let s = range_error_at(&cfg, &biases, k as f64 * 0.01, &mut state, [0.6, 0.0, 0.8], &consts(), &mut rng);
            assert!((s.total_dtau_s * consts().c_ms - s.component_sum_m()).abs() < 1e-15 * consts().c_ms);
        }
    }

    #[test]
    fn cfo_from_velocity_error() {
        // (0.1 / c) * 2 GHz
        let hz = consts().hz_per_mps() * 0.1;
        assert!((hz - 0.667).abs() < 1e-3, "{hz}");

        let cfg = UncertaintyConfig::default();
        let mut rng = stream(4, &[]);
        let biases = sample_run_biases(&cfg, &mut rng);
        let mut state = VelocityProcessState::default();
        for k in 0..500 {
            let v = velocity_error_at(&cfg, &biases, k as f64 * 0.005, &mut state, &consts(), &mut rng);
            let expect = consts().hz_per_mps() * (v.d_vr_eph_ms + v.d_vr_ue_ms) + v.d_f_osc_hz;
            assert!((v.total_dcfo_hz - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_config_velocity_is_zero() {
        let cfg = UncertaintyConfig::zero();
        let mut state = VelocityProcessState::default();
        let v = velocity_error_at(&cfg, &RunBiases::ZERO, 1.0, &mut state, &consts(), &mut stream(2, &[]));
        assert_eq!(v.total_dcfo_hz, 0.0);
    }

    #[test]
    fn propagation_jitter_quantile() {
        // Gaussian quantile oracle: P95 of |N(0, 0.4 us)| = 1.959964 * 0.4.
        let cfg = UncertaintyConfig {
            prop_jitter_sigma_us: 0.4,
            ..UncertaintyConfig::zero()
        };
        let mut rng = stream(21, &[]);
        let mut mags: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut state = RangeProcessState::default();
                let s = range_error_at(&cfg, &RunBiases::ZERO, 50.0, &mut state, [0.0, 0.0, 1.0], &consts(), &mut rng);
                s.total_dtau_s.abs() * 1e6
            })
            .collect();
        let p95 = nearest_rank(&mut mags, 95.0).unwrap();
        let oracle = 1.959_964 * 0.4;
        assert!((p95 / oracle - 1.0).abs() < 0.03, "{p95} vs {oracle}");
    }

    #[test]
    fn cfo_quantile_matches_component_convolution() {
        // Gaussian components only: static N(0, 250) + wander N(0, 50) + velocity
        // terms. The sum is Gaussian with the root-sum-square sigma.
        let cfg = UncertaintyConfig::default();
        let k = consts().hz_per_mps();
        let eph_sigma = cfg.eph_drift_rw_m_per_sqrt_s / cfg.eph_velocity_corr_s.sqrt();
        let sigma = (cfg.osc_offset_sigma_hz.powi(2)
            + cfg.osc_jitter_sigma_hz.powi(2)
            + (k * eph_sigma).powi(2)
            + (k * cfg.gnss_velocity_sigma_mps).powi(2))
        .sqrt();
        let mut rng = stream(33, &[]);
        let mut mags: Vec<f64> = (0..100_000)
            .map(|_| {
                let biases = sample_run_biases(&cfg, &mut rng);
                let mut state = VelocityProcessState::default();
                velocity_error_at(&cfg, &biases, 10.0, &mut state, &consts(), &mut rng)
                    .total_dcfo_hz
                    .abs()
            })
            .collect();
        let p95 = nearest_rank(&mut mags, 95.0).unwrap();
        let oracle = 1.959_964 * sigma;
        assert!((p95 / oracle - 1.0).abs() < 0.05, "{p95} vs {oracle}");
    }

    #[test]
    fn random_walk_variance_grows_linearly() {
        let mut rng = stream(8, &[]);
        let times = [10.0, 40.0, 90.0];
        let trials = 10_000;
        let mut sums = [0.0; 3];
        for _ in 0..trials {
            let mut rw = RandomWalk::default();
            rw.advance(0.0, &mut rng);
            let mut t_prev = 0.0;
            for (i, &t) in times.iter().enumerate() {
                // Several sub-steps so the test exercises accumulation.
                for j in 1..=5 {
                    rw.advance(t_prev + (t - t_prev) * j as f64 / 5.0, &mut rng);
                }
                t_prev = t;
                sums[i] += rw.value * rw.value;
            }
        }
        for (i, &t) in times.iter().enumerate() {
            let var = sums[i] / trials as f64;
            assert!((var / t - 1.0).abs() < 0.1, "t={t}: var={var}");
        }
    }

    #[test]
    fn gauss_markov_is_stationary_and_white_when_uncorrelated() {
        let mut rng = stream(12, &[]);
        let mut gm = GaussMarkov::default();
        let n = 50_000;
        let mut sum2 = 0.0;
        let mut lag = 0.0;
        let mut prev = gm.advance(0.0, 0.0, &mut rng);
        for k in 1..n {
            let v = gm.advance(k as f64 * 0.01, 0.0, &mut rng);
            sum2 += v * v;
            lag += v * prev;
            prev = v;
        }
        assert!((sum2 / n as f64 - 1.0).abs() < 0.03);
        assert!((lag / n as f64).abs() < 0.02);

        let mut gm = GaussMarkov::default();
        let mut sum2 = 0.0;
        for k in 0..n {
            let v = gm.advance(k as f64 * 0.01, 0.5, &mut rng);
            sum2 += v * v;
        }
        assert!((sum2 / n as f64 - 1.0).abs() < 0.1);
    }
}
