//! z-domain view of the delayed loop.
//!
//! All polynomials are coefficient vectors in ascending powers of `z^-1`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::PidConfig;
use crate::error::{SimError, SimResult};

/// First-order plant `P(z) = g z^-1 / (1 - p z^-1)`. The residual loop's
/// accumulating actuator is `g = 1, p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopAnalysisConfig {
    pub plant_gain: f64,
    pub plant_pole: f64,
    pub eval_frequencies_hz: Vec<f64>,
}

impl Default for LoopAnalysisConfig {
    fn default() -> Self {
        Self {
            plant_gain: 1.0,
            plant_pole: 1.0,
            eval_frequencies_hz: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
        }
    }
}

impl LoopAnalysisConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !self.plant_gain.is_finite() {
            errs.push("plant_gain must be finite".into());
        }
        // The pure accumulator (pole on the unit circle) is allowed; anything
        // outside is not a plant we can analyse meaningfully.
        if !(self.plant_pole.abs() <= 1.0) {
            errs.push(format!("plant_pole must satisfy |p| <= 1 (got {})", self.plant_pole));
        }
        if self.eval_frequencies_hz.iter().any(|f| !(*f >= 0.0)) {
            errs.push("eval_frequencies_hz must be >= 0".into());
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub freq_hz: f64,
    pub magnitude: f64,
    pub phase_deg: f64,
    /// `|1 - T_cl|`: attenuation of a disturbance at this frequency.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopResponse {
    pub delay: usize,
    pub points: Vec<ResponsePoint>,
    pub stable: bool,
    /// Closed-loop characteristic polynomial in ascending powers of `z^-1`.
    pub characteristic: Vec<f64>,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_eval(p: &[f64], zinv: Complex<f64>) -> Complex<f64> {
    p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * zinv + c)
}

/// `C(z)` as `(numerator, denominator)`. Without integral action the common
/// `1 - z^-1` factor is cancelled, leaving the PD form.
pub fn pid_polynomials(kp: f64, ki: f64, kd: f64, t_fb_s: f64) -> (Vec<f64>, Vec<f64>) {
    let dterm = kd / t_fb_s;
    if ki == 0.0 {
        return (vec![kp + dterm, -dterm], vec![1.0]);
    }
    (
        vec![kp + ki * t_fb_s + dterm, -kp - 2.0 * dterm, dterm],
        vec![1.0, -1.0],
    )
}

/// Schur-Cohn / Jury recursion: true iff every root of
/// `c[0] z^n + c[1] z^(n-1) + ... + c[n]` lies strictly inside the unit circle.
pub fn schur_stable(coeffs: &[f64]) -> bool {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c[0] == 0.0 {
        c.remove(0);
    }
    while c.len() > 1 {
        let n = c.len() - 1;
        let (c0, cn) = (c[0], c[n]);
        if !(cn.abs() < c0.abs()) {
            return false;
        }
        c = (0..n).map(|k| c0 * c[k] - cn * c[n - k]).collect();
    }
    true
}

/// Evaluate `T_cl(z) = z^-d C P / (1 + z^-d C P)` on the unit circle and test
/// the closed-loop characteristic polynomial for stability.
pub fn closed_loop_response(pid: &PidConfig, plant: &LoopAnalysisConfig) -> SimResult<LoopResponse> {
    if !(pid.t_fb_s > 0.0) {
        return Err(SimError::Invalid(format!("t_fb_s must be > 0 (got {})", pid.t_fb_s)));
    }
    let d = pid.delay_index();
    let (nc, dc) = pid_polynomials(pid.kp, pid.ki, pid.kd, pid.t_fb_s);
    let (np, dp) = (vec![0.0, plant.plant_gain], vec![1.0, -plant.plant_pole]);

    let mut forward = vec![0.0; d];
    forward.extend(poly_mul(&nc, &np));
    let open_den = poly_mul(&dc, &dp);
    let characteristic = poly_add(&open_den, &forward);

    let loop_closed = forward.iter().any(|&c| c != 0.0);
    let stable = !loop_closed || schur_stable(&characteristic);

    let points = plant
        .eval_frequencies_hz
        .iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f * pid.t_fb_s;
            let zinv = Complex::from_polar(1.0, -w);
            let num = poly_eval(&forward, zinv);
            let t = if loop_closed {
                num / poly_eval(&characteristic, zinv)
            } else {
                Complex::new(0.0, 0.0)
            };
            ResponsePoint {
                freq_hz: f,
                magnitude: t.norm(),
                phase_deg: t.arg().to_degrees(),
                sensitivity: (Complex::new(1.0, 0.0) - t).norm(),
            }
        })
        .collect();

    Ok(LoopResponse {
        delay: d,
        points,
        stable,
        characteristic,
    })
}
