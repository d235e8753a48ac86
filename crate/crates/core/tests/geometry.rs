use std::sync::OnceLock;

use proptest::prelude::*;
use sdgs_core::geometry::{geometry_for, predicted_geometry, propagate};
use sdgs_core::scenario::{best_pass, StationPass};
use sdgs_core::{GroundSite, LinkConstants, OrbitElements};

fn passes() -> &'static [StationPass] {
    static P: OnceLock<Vec<StationPass>> = OnceLock::new();
    P.get_or_init(|| {
        GroundSite::default_stations()
            .iter()
            .map(|s| best_pass(s, &OrbitElements::default(), 172_800.0, 10.0, 300.0).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn range_rate_matches_central_difference(station in 0usize..4, frac in 0.0f64..1.0) {
        let p = &passes()[station];
        let t = p.rise_s + frac * (p.set_s - p.rise_s);
        let h = 1e-3;
        let elems = OrbitElements::default();
        let consts = LinkConstants::default();
        let rho = |t| geometry_for(&p.site, &elems, t, &consts).unwrap().slant_range_km;
        let fd = (rho(t + h) - rho(t - h)) / (2.0 * h);
        let g = geometry_for(&p.site, &elems, t, &consts).unwrap();
        prop_assert!((fd - g.radial_velocity_kms).abs() <= 1e-6, "fd {fd} analytic {}", g.radial_velocity_kms);
    }

    #[test]
    fn doppler_is_positive_iff_approaching(station in 0usize..4, frac in 0.0f64..1.0) {
        let p = &passes()[station];
        let t = p.rise_s + frac * (p.set_s - p.rise_s);
        let g = geometry_for(&p.site, &OrbitElements::default(), t, &LinkConstants::default()).unwrap();
        prop_assert_eq!(g.doppler_hz > 0.0, g.radial_velocity_kms < 0.0);
    }

    #[test]
    fn circular_orbit_speed_is_constant(
        alt in 300.0f64..2000.0,
        inc in 0.0f64..180.0,
        raan in 0.0f64..360.0,
        phase in 0.0f64..360.0,
        t in 0.0f64..200_000.0,
    ) {
        let elems = OrbitElements { altitude_km: alt, inclination_deg: inc, raan_deg: raan, phase_deg: phase, epoch_s: 0.0 };
        let v0 = propagate(&elems, 0.0).v_s.norm();
        let v = propagate(&elems, t).v_s.norm();
        prop_assert!((v - v0).abs() <= 1e-9);
    }

    #[test]
    fn predicted_geometry_matches_direct_recomputation(
        station in 0usize..4,
        frac in 0.0f64..1.0,
        dphase in -0.01f64..0.01,
        de in -50.0f64..50.0,
        dn in -50.0f64..50.0,
        du in -50.0f64..50.0,
    ) {
        let p = &passes()[station];
        let t = p.rise_s + frac * (p.set_s - p.rise_s);
        let elems = OrbitElements::default();
        let perturbed = OrbitElements { phase_deg: elems.phase_deg + dphase, ..elems };
        let site_hat = p.site.offset_enu(de, dn, du);
        let g = predicted_geometry(&p.site, &perturbed, &site_hat, t, &LinkConstants::default()).unwrap();

        // Oracle: plain vector arithmetic on the perturbed states.
        let eph = propagate(&perturbed, t);
        let (r_u, v_u) = site_hat.eci_state(t);
        let dr = [eph.r_s.x - r_u.x, eph.r_s.y - r_u.y, eph.r_s.z - r_u.z];
        let dv = [eph.v_s.x - v_u.x, eph.v_s.y - v_u.y, eph.v_s.z - v_u.z];
        let rho = (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2]).sqrt();
        let vr = (dr[0] * dv[0] + dr[1] * dv[1] + dr[2] * dv[2]) / rho;
        prop_assert!((g.slant_range_km - rho).abs() <= 1e-9 * rho);
        prop_assert!((g.radial_velocity_kms - vr).abs() <= 1e-12);
    }
}

#[test]
fn pass_duration_agrees_with_brute_force_scan() {
    let elems = OrbitElements::default();
    for p in passes() {
        let mut visible = 0usize;
        let mut t = p.rise_s - 120.0;
        while t < p.set_s + 120.0 {
            if geometry_for(&p.site, &elems, t, &LinkConstants::default()).unwrap().elevation_deg >= 10.0 {
                visible += 1;
            }
            t += 1.0;
        }
        assert!((visible as f64 - p.duration_s()).abs() <= 2.0, "{} scan {visible} vs {}", p.site.name, p.duration_s());
    }
}
