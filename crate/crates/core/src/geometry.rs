//! Circular-orbit propagation and ground-site line-of-sight geometry.
//!
//! Everything here works in an Earth-centred inertial frame with a spherical,
//! uniformly rotating Earth. Positions are in km, velocities in km/s. The
//! Greenwich sidereal angle is zero at `t = 0`.
//!
//! Doppler sign: a satellite closing on the site (range decreasing) yields a
//! positive Doppler shift, `f_D = -(f_c / c) * d|r_u - r_s|/dt`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Standard gravitational parameter of the Earth, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Mean spherical Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Circular orbit description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitElements {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    /// Argument of latitude at `epoch_s`.
    pub phase_deg: f64,
    pub epoch_s: f64,
}

impl Default for OrbitElements {
    fn default() -> Self {
        Self {
            altitude_km: 550.0,
            inclination_deg: 53.0,
            raan_deg: 0.0,
            phase_deg: 0.0,
            epoch_s: 0.0,
        }
    }
}

impl OrbitElements {
    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH_KM3_S2 / self.semi_major_axis_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }

    pub fn orbital_speed_kms(&self) -> f64 {
        (MU_EARTH_KM3_S2 / self.semi_major_axis_km()).sqrt()
    }

    /// Same orbit with angles wrapped into `[0, 360)`.
    pub fn normalized(mut self) -> Self {
        self.raan_deg = wrap_deg(self.raan_deg);
        self.phase_deg = wrap_deg(self.phase_deg);
        self
    }

    /// Shift the satellite along its track by `meters` (positive = ahead).
    pub fn with_along_track_offset(mut self, meters: f64) -> Self {
        let dphase = (meters / 1000.0) / self.semi_major_axis_km();
        self.phase_deg = wrap_deg(self.phase_deg + dphase.to_degrees());
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.altitude_km > 0.0) {
            return Err(format!("altitude_km must be > 0 (got {})", self.altitude_km));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(format!(
                "inclination_deg must lie in [0, 180] (got {})",
                self.inclination_deg
            ));
        }
        if !self.raan_deg.is_finite() || !self.phase_deg.is_finite() || !self.epoch_s.is_finite() {
            return Err("orbit angles and epoch must be finite".into());
        }
        Ok(())
    }
}

fn wrap_deg(x: f64) -> f64 {
    let w = x.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSite {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default)]
    pub alt_m: f64,
}

impl GroundSite {
    pub fn new(name: impl Into<String>, lat_deg: f64, lon_deg: f64, alt_m: f64) -> Self {
        Self {
            name: name.into(),
            lat_deg,
            lon_deg,
            alt_m,
        }
    }

    /// The four campaign stations.
    pub fn default_stations() -> Vec<GroundSite> {
        vec![
            GroundSite::new("Shenzhen", 22.5, 114.0, 0.0),
            GroundSite::new("Beijing", 39.9, 116.4, 0.0),
            GroundSite::new("Tokyo", 35.7, 139.7, 0.0),
            GroundSite::new("Los Angeles", 34.1, -118.2, 0.0),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lat_deg.abs() <= 90.0) {
            return Err(format!("{}: |lat_deg| must be <= 90", self.name));
        }
        if !(self.lon_deg.abs() <= 180.0) {
            return Err(format!("{}: |lon_deg| must be <= 180", self.name));
        }
        if !self.alt_m.is_finite() {
            return Err(format!("{}: alt_m must be finite", self.name));
        }
        Ok(())
    }

    fn radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.alt_m / 1000.0
    }

    /// Inertial position and velocity of the site at `t_s`.
    pub fn eci_state(&self, t_s: f64) -> (Vector3<f64>, Vector3<f64>) {
        let lat = self.lat_deg.to_radians();
        let lon = self.lon_deg.to_radians() + EARTH_ROTATION_RAD_S * t_s;
        let r = self.radius_km();
        let pos = Vector3::new(r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin());
        let vel = Vector3::new(-EARTH_ROTATION_RAD_S * pos.y, EARTH_ROTATION_RAD_S * pos.x, 0.0);
        (pos, vel)
    }

    /// East, north and up unit vectors (inertial frame) at `t_s`.
    pub fn enu_basis(&self, t_s: f64) -> [Vector3<f64>; 3] {
        let lat = self.lat_deg.to_radians();
        let lon = self.lon_deg.to_radians() + EARTH_ROTATION_RAD_S * t_s;
        let east = Vector3::new(-lon.sin(), lon.cos(), 0.0);
        let north = Vector3::new(-lat.sin() * lon.cos(), -lat.sin() * lon.sin(), lat.cos());
        let up = Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin());
        [east, north, up]
    }

    /// Site displaced by a local east/north/up offset in metres.
    pub fn offset_enu(&self, east_m: f64, north_m: f64, up_m: f64) -> GroundSite {
        let r_km = self.radius_km();
        let dlat = (north_m / 1000.0) / r_km;
        let dlon = (east_m / 1000.0) / (r_km * self.lat_deg.to_radians().cos());
        GroundSite {
            name: self.name.clone(),
            lat_deg: self.lat_deg + dlat.to_degrees(),
            lon_deg: self.lon_deg + dlon.to_degrees(),
            alt_m: self.alt_m + up_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConstants {
    pub f_c_hz: f64,
    pub c_ms: f64,
}

impl Default for LinkConstants {
    fn default() -> Self {
        Self {
            f_c_hz: 2.0e9,
            c_ms: SPEED_OF_LIGHT_M_S,
        }
    }
}

impl LinkConstants {
    /// Hz of Doppler per m/s of radial velocity.
    pub fn hz_per_mps(&self) -> f64 {
        self.f_c_hz / self.c_ms
    }

    /// Doppler shift for a radial velocity in km/s (positive = receding).
    pub fn doppler_hz(&self, radial_velocity_kms: f64) -> f64 {
        -self.hz_per_mps() * radial_velocity_kms * 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EphemerisSample {
    pub t_s: f64,
    pub r_s: Vector3<f64>,
    pub v_s: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySample {
    pub t_s: f64,
    pub slant_range_km: f64,
    /// Range rate, positive when receding.
    pub radial_velocity_kms: f64,
    pub elevation_deg: f64,
    pub doppler_hz: f64,
    /// Unit line-of-sight vector (site to satellite) in local east/north/up.
    pub los_enu: [f64; 3],
}

impl GeometrySample {
    /// Apply a range bias along the line of sight (positive lengthens the range).
    pub fn with_los_range_bias(mut self, bias_km: f64) -> Self {
        self.slant_range_km += bias_km;
        self
    }
}

/// Two-body circular propagation.
pub fn propagate(elems: &OrbitElements, t_s: f64) -> EphemerisSample {
    let a = elems.semi_major_axis_km();
    let n = elems.mean_motion();
    let u = elems.phase_deg.to_radians() + n * (t_s - elems.epoch_s);
    let (su, cu) = u.sin_cos();
    let (so, co) = elems.raan_deg.to_radians().sin_cos();
    let (si, ci) = elems.inclination_deg.to_radians().sin_cos();

    let r_s = Vector3::new(a * (co * cu - so * su * ci), a * (so * cu + co * su * ci), a * su * si);
    let speed = a * n;
    let v_s = Vector3::new(
        speed * (-co * su - so * cu * ci),
        speed * (-so * su + co * cu * ci),
        speed * cu * si,
    );
    EphemerisSample { t_s, r_s, v_s }
}

/// True line-of-sight geometry between `site` and the satellite state `sample`.
pub fn geometry_at(
    site: &GroundSite,
    sample: &EphemerisSample,
    consts: &LinkConstants,
) -> SimResult<GeometrySample> {
    let (r_u, v_u) = site.eci_state(sample.t_s);
    los_geometry(sample, &r_u, &v_u, &site.enu_basis(sample.t_s), consts)
}

fn los_geometry(
    sample: &EphemerisSample,
    r_u: &Vector3<f64>,
    v_u: &Vector3<f64>,
    enu: &[Vector3<f64>; 3],
    consts: &LinkConstants,
) -> SimResult<GeometrySample> {
    let rel = sample.r_s - r_u;
    let range = rel.norm();
    if !(range > 1e-9) {
        return Err(SimError::DegenerateGeometry { t_s: sample.t_s });
    }
    let los = rel / range;
    let radial_velocity = (sample.v_s - v_u).dot(&los);
    let [east, north, up] = enu;
    let (e, n, u) = (los.dot(east), los.dot(north), los.dot(up));
    let elevation = u.atan2(e.hypot(n)).to_degrees();
    Ok(GeometrySample {
        t_s: sample.t_s,
        slant_range_km: range,
        radial_velocity_kms: radial_velocity,
        elevation_deg: elevation,
        doppler_hz: consts.doppler_hz(radial_velocity),
        los_enu: [e, n, u],
    })
}

/// UE-side prior: the same geometry evaluated on perturbed orbit knowledge and a
/// perturbed site position. Elevation is reported against the true site's local
/// vertical.
pub fn predicted_geometry(
    site: &GroundSite,
    perturbed_elems: &OrbitElements,
    perturbed_site: &GroundSite,
    t_s: f64,
    consts: &LinkConstants,
) -> SimResult<GeometrySample> {
    let eph = propagate(perturbed_elems, t_s);
    let (r_u, v_u) = perturbed_site.eci_state(t_s);
    los_geometry(&eph, &r_u, &v_u, &site.enu_basis(t_s), consts)
}

/// Convenience: propagate and evaluate in one call.
pub fn geometry_for(
    site: &GroundSite,
    elems: &OrbitElements,
    t_s: f64,
    consts: &LinkConstants,
) -> SimResult<GeometrySample> {
    geometry_at(site, &propagate(elems, t_s), consts)
}

fn elevation_deg(site: &GroundSite, elems: &OrbitElements, t_s: f64) -> f64 {
    let eph = propagate(elems, t_s);
    let (r_u, _) = site.eci_state(t_s);
    let rel = eph.r_s - r_u;
    let up = r_u / r_u.norm();
    let vertical = rel.dot(&up);
    vertical.atan2((rel - vertical * up).norm()).to_degrees()
}

/// Visibility windows `(rise_t, set_t)` inside `[t0, t1]` where the elevation is
/// at least `min_elev_deg`. Edges are located by a 1 s scan and refined by
/// bisection to 1 ms.
pub fn pass_window(
    site: &GroundSite,
    elems: &OrbitElements,
    t0: f64,
    t1: f64,
    min_elev_deg: f64,
) -> Vec<(f64, f64)> {
    const SCAN_S: f64 = 1.0;
    const TOL_S: f64 = 1e-3;
    if !(t1 > t0) {
        return Vec::new();
    }
    let visible = |t: f64| elevation_deg(site, elems, t) >= min_elev_deg;
    let refine = |mut lo: f64, mut hi: f64, rising: bool| {
        // Invariant: visible(lo) != rising, visible(hi) == rising.
        while hi - lo > TOL_S {
            let mid = 0.5 * (lo + hi);
            if visible(mid) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if rising {
            hi
        } else {
            lo
        }
    };

    let mut windows = Vec::new();
    let mut prev_t = t0;
    let mut prev_vis = visible(t0);
    let mut open = if prev_vis { Some(t0) } else { None };
    loop {
        let t = (prev_t + SCAN_S).min(t1);
        let vis = visible(t);
        match (prev_vis, vis) {
            (false, true) => open = Some(refine(prev_t, t, true)),
            (true, false) => {
                let set = refine(prev_t, t, false);
                if let Some(rise) = open.take() {
                    windows.push((rise, set));
                }
            }
            _ => {}
        }
        prev_t = t;
        prev_vis = vis;
        if t >= t1 {
            break;
        }
    }
    if let Some(rise) = open {
        windows.push((rise, t1));
    }
    windows
}

/// Time of peak elevation inside a window (golden-section search).
pub fn culmination(site: &GroundSite, elems: &OrbitElements, rise: f64, set: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (rise, set);
    let f = |t: f64| elevation_deg(site, elems, t);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while b - a > 1e-4 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub_satellite_site(elems: &OrbitElements, t_s: f64) -> GroundSite {
        let eph = propagate(elems, t_s);
        let lat = eph.r_s.z.atan2(eph.r_s.x.hypot(eph.r_s.y)).to_degrees();
        let lon = (eph.r_s.y.atan2(eph.r_s.x) - EARTH_ROTATION_RAD_S * t_s).to_degrees();
        let lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
        GroundSite::new("sub", lat, lon, 0.0)
    }

    #[test]
    fn equatorial_speed_matches_vis_viva() {
        let elems = OrbitElements {
            inclination_deg: 0.0,
            ..OrbitElements::default()
        };
        let eph = propagate(&elems, 0.0);
        assert!((eph.r_s.norm() - 6921.0).abs() < 1e-9);
        assert!(eph.r_s.z.abs() < 1e-12);
        let expected = (MU_EARTH_KM3_S2 / 6921.0).sqrt();
        assert!((eph.v_s.norm() - expected).abs() < 1e-12);
        assert!((expected - 7.590).abs() < 2e-3);
    }

    #[test]
    fn one_period_returns_to_start() {
        let elems = OrbitElements {
            raan_deg: 37.0,
            phase_deg: 211.0,
            epoch_s: 120.0,
            ..OrbitElements::default()
        };
        let a = propagate(&elems, elems.epoch_s);
        let b = propagate(&elems, elems.epoch_s + elems.period_s());
        assert!((a.r_s - b.r_s).norm() < 1e-6);
    }

    #[test]
    fn polar_orbit_has_no_equatorial_east_velocity_at_node() {
        let elems = OrbitElements {
            inclination_deg: 90.0,
            raan_deg: 25.0,
            phase_deg: 0.0,
            ..OrbitElements::default()
        };
        let eph = propagate(&elems, 0.0);
        let east = Vector3::new(-eph.r_s.y, eph.r_s.x, 0.0).normalize();
        assert!(eph.v_s.dot(&east).abs() < 1e-12);
    }

    #[test]
    fn doppler_sign_and_scale() {
        let consts = LinkConstants::default();
        let f = consts.doppler_hz(-7.5);
        assert!((f - 50_034.6).abs() < 0.05, "{f}");
        assert!(consts.doppler_hz(1.0) < 0.0);
    }

    #[test]
    fn zenith_elevation_and_zero_range_rate_at_closest_approach() {
        let elems = OrbitElements::default();
        let t = 300.0;
        let site = sub_satellite_site(&elems, t);
        let g = geometry_for(&site, &elems, t, &LinkConstants::default()).unwrap();
        assert!((g.elevation_deg - 90.0).abs() < 1e-6, "{}", g.elevation_deg);
        assert!((g.slant_range_km - 550.0).abs() < 1e-6);

        // Closest approach of the pass: range minimum, range rate ~ 0.
        let (tc, _) = culmination(&site, &elems, t - 200.0, t + 200.0);
        let gc = geometry_for(&site, &elems, tc, &LinkConstants::default()).unwrap();
        assert!(gc.radial_velocity_kms.abs() < 1e-3, "{}", gc.radial_velocity_kms);
        assert!(gc.doppler_hz.abs() < 10.0);
    }

    #[test]
    fn coincident_positions_are_an_error() {
        let sample = EphemerisSample {
            t_s: 0.0,
            r_s: Vector3::new(EARTH_RADIUS_KM, 0.0, 0.0),
            v_s: Vector3::zeros(),
        };
        let site = GroundSite::new("x", 0.0, 0.0, 0.0);
        assert!(matches!(
            geometry_at(&site, &sample, &LinkConstants::default()),
            Err(SimError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn zero_perturbation_prediction_is_identical() {
        let elems = OrbitElements::default();
        let site = GroundSite::default_stations().remove(0);
        let consts = LinkConstants::default();
        for t in [0.0, 500.0, 4321.5] {
            let truth = geometry_for(&site, &elems, t, &consts).unwrap();
            let pred = predicted_geometry(&site, &elems, &site, t, &consts).unwrap();
            assert_eq!(truth, pred);
        }
    }

    #[test]
    fn los_range_bias_shifts_predicted_range() {
        let elems = OrbitElements::default();
        let site = sub_satellite_site(&elems, 100.0);
        let consts = LinkConstants::default();
        let truth = geometry_for(&site, &elems, 100.0, &consts).unwrap();
        let pred = predicted_geometry(&site, &elems, &site, 100.0, &consts)
            .unwrap()
            .with_los_range_bias(0.300);
        assert!((pred.slant_range_km - truth.slant_range_km - 0.300).abs() < 1e-12);
    }

    #[test]
    fn pass_window_edge_cases() {
        let elems = OrbitElements::default();
        let site = GroundSite::new("any", 10.0, 20.0, 0.0);
        assert_eq!(pass_window(&site, &elems, 0.0, 900.0, -90.0), vec![(0.0, 900.0)]);

        let equatorial = OrbitElements {
            inclination_deg: 0.0,
            ..OrbitElements::default()
        };
        let pole = GroundSite::new("pole", 89.9, 0.0, 0.0);
        assert!(pass_window(&pole, &equatorial, 0.0, 86_400.0, 10.0).is_empty());
        assert!(pass_window(&pole, &equatorial, 10.0, 10.0, 10.0).is_empty());
    }

    #[test]
    fn overhead_pass_duration() {
        let elems = OrbitElements::default();
        let site = sub_satellite_site(&elems, 1000.0);
        let windows = pass_window(&site, &elems, 500.0, 1500.0, 0.0);
        assert_eq!(windows.len(), 1);
        let (rise, set) = windows[0];
        assert!(rise < 1000.0 && set > 1000.0);

        // Brute force 1 s scan oracle.
        let scanned = (500..=1500)
            .filter(|&t| elevation_deg(&site, &elems, t as f64) >= 0.0)
            .count() as f64;
        let duration = set - rise;
        assert!((duration - scanned).abs() <= 2.0, "{duration} vs {scanned}");
        assert!((480.0..=780.0).contains(&duration), "{duration}");
    }

    #[test]
    fn normalization_wraps_angles() {
        let e = OrbitElements {
            raan_deg: -30.0,
            phase_deg: 725.0,
            ..OrbitElements::default()
        }
        .normalized();
        assert!((e.raan_deg - 330.0).abs() < 1e-12);
        assert!((e.phase_deg - 5.0).abs() < 1e-12);
    }
}
