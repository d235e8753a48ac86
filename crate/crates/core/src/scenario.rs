//! Pass selection and seeded residual trajectories over real pass geometry.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{closed_loop_track, PidConfig};
use crate::error::{SimError, SimResult};
use crate::geometry::{culmination, geometry_for, pass_window, GroundSite, LinkConstants, OrbitElements};
use crate::rng::{derive_seed, stream};
use crate::uncertainty::{sample_run_biases, ResidualGenerator, ResidualSample, UncertaintyConfig};

const TAG_START: u64 = 0x0053_5441_5254;
const TAG_UNCERTAINTY: u64 = 0x554e_4345_5254;

/// One station's selected visibility window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationPass {
    pub site: GroundSite,
    pub rise_s: f64,
    pub set_s: f64,
    pub culmination_s: f64,
    pub max_elevation_deg: f64,
}

impl StationPass {
    pub fn duration_s(&self) -> f64 {
        self.set_s - self.rise_s
    }
}

/// Highest-culminating pass of at least `min_duration_s` in `[epoch, epoch + horizon_s]`.
pub fn best_pass(
    site: &GroundSite,
    elems: &OrbitElements,
    horizon_s: f64,
    min_elev_deg: f64,
    min_duration_s: f64,
) -> SimResult<StationPass> {
    let t0 = elems.epoch_s;
    pass_window(site, elems, t0, t0 + horizon_s, min_elev_deg)
        .into_iter()
        // Windows clipped by the search horizon are not complete passes.
        .filter(|&(rise, set)| rise > t0 && set < t0 + horizon_s && set - rise >= min_duration_s)
        .map(|(rise, set)| {
            let (tc, el) = culmination(site, elems, rise, set);
            StationPass {
                site: site.clone(),
                rise_s: rise,
                set_s: set,
                culmination_s: tc,
                max_elevation_deg: el,
            }
        })
        .max_by(|a, b| a.max_elevation_deg.total_cmp(&b.max_elevation_deg))
        .ok_or_else(|| SimError::NoPass {
            station: site.name.clone(),
            needed_s: min_duration_s,
            min_elev_deg,
        })
}

/// Open-loop residuals at every tick of `[t_start, t_end)` with period `t_fb_s`.
#[allow(clippy::too_many_arguments)]
pub fn open_loop_trajectory<R: Rng + ?Sized>(
    site: &GroundSite,
    elems: &OrbitElements,
    consts: &LinkConstants,
    generator: &mut ResidualGenerator,
    t_start: f64,
    t_end: f64,
    t_fb_s: f64,
    rng: &mut R,
) -> SimResult<Vec<ResidualSample>> {
    let n = ((t_end - t_start) / t_fb_s).round().max(0.0) as usize;
    (0..n)
        .map(|k| {
            let t = t_start + k as f64 * t_fb_s;
            let geo = geometry_for(site, elems, t, consts)?;
            Ok(generator.residual(t, geo.los_enu, rng))
        })
        .collect()
}

/// Independent model-layer runs: run `i` uses station `i mod n` and a random
/// start inside that station's best pass.
#[derive(Debug, Clone)]
pub struct MonteCarloScenario {
    pub passes: Vec<StationPass>,
    pub orbit: OrbitElements,
    pub consts: LinkConstants,
    pub seed: u64,
    /// Controller settling time simulated before sampling starts.
    pub warmup_s: f64,
    /// Sampled span per run after warmup.
    pub duration_s: f64,
    pub sample_interval_s: f64,
    /// Tick period used for open-loop-only runs.
    pub t_fb_s: f64,
}

impl MonteCarloScenario {
    pub fn span_s(&self) -> f64 {
        self.warmup_s + self.duration_s
    }

    fn run_seed(&self, cfg: &UncertaintyConfig, run: usize) -> u64 {
        derive_seed(self.seed, &[cfg.seed, run as u64])
    }

    /// Full-rate open-loop trajectory of one run, warmup included.
    pub fn trajectory(&self, cfg: &UncertaintyConfig, run: usize, t_fb_s: f64) -> SimResult<Vec<ResidualSample>> {
        if self.passes.is_empty() {
            return Err(SimError::Invalid("scenario has no station passes".into()));
        }
        let pass = &self.passes[run % self.passes.len()];
        let seed = self.run_seed(cfg, run);
        let latest = pass.set_s - self.span_s();
        if latest < pass.rise_s {
            return Err(SimError::NoPass {
                station: pass.site.name.clone(),
                needed_s: self.span_s(),
                min_elev_deg: 0.0,
            });
        }
        let t_start = stream(seed, &[TAG_START]).random_range(pass.rise_s..=latest);
        let mut rng = stream(seed, &[TAG_UNCERTAINTY]);
        let biases = sample_run_biases(cfg, &mut rng);
        let mut generator = ResidualGenerator::new(*cfg, biases, self.consts);
        open_loop_trajectory(
            &pass.site,
            &self.orbit,
            &self.consts,
            &mut generator,
            t_start,
            t_start + self.span_s(),
            t_fb_s,
            &mut rng,
        )
    }

    /// Keep every sample-interval's tick after warmup.
    fn subsample(&self, traj: Vec<ResidualSample>, t_fb_s: f64) -> Vec<ResidualSample> {
        let stride = ((self.sample_interval_s / t_fb_s).round() as usize).max(1);
        let skip = (self.warmup_s / t_fb_s).round() as usize;
        traj.into_iter().skip(skip).step_by(stride).collect()
    }

    pub fn run_open_loop(&self, cfg: &UncertaintyConfig, n_runs: usize) -> SimResult<Vec<Vec<ResidualSample>>> {
        (0..n_runs)
            .into_par_iter()
            .map(|run| Ok(self.subsample(self.trajectory(cfg, run, self.t_fb_s)?, self.t_fb_s)))
            .collect()
    }

    /// Same runs driven through the residual loop; samples carry both the
    /// open- and closed-loop residuals.
    pub fn run_closed_loop(
        &self,
        cfg: &UncertaintyConfig,
        pid: &PidConfig,
        n_runs: usize,
    ) -> SimResult<Vec<Vec<ResidualSample>>> {
        (0..n_runs)
            .into_par_iter()
            .map(|run| {
                let traj = self.trajectory(cfg, run, pid.t_fb_s)?;
                Ok(self.subsample(closed_loop_track(pid, &traj)?, pid.t_fb_s))
            })
            .collect()
    }
}
