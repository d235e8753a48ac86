use sdgs_core::uncertainty::monte_carlo_open_loop;
use sdgs_core::{GroundSite, LinkConstants, MonteCarloSettings, OrbitElements, UncertaintyConfig};

fn scenario() -> sdgs_core::scenario::MonteCarloScenario {
    let settings = MonteCarloSettings {
        duration_s: 5.0,
        ..MonteCarloSettings::default()
    };
    settings
        .scenario(&GroundSite::default_stations(), &OrbitElements::default(), &LinkConstants::default(), 0.005, 99)
        .unwrap()
}

#[test]
fn percentiles_do_not_decrease_when_every_magnitude_scales_up() {
    let sc = scenario();
    let base = UncertaintyConfig::default();
    let summaries: Vec<_> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&k| monte_carlo_open_loop(&base.scaled(k), &sc, 40).unwrap())
        .collect();
    for w in summaries.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for (x, y) in [
            (a.ta_us.p50, b.ta_us.p50),
            (a.ta_us.p95, b.ta_us.p95),
            (a.ta_us.p99, b.ta_us.p99),
            (a.cfo_hz.p50, b.cfo_hz.p50),
            (a.cfo_hz.p95, b.cfo_hz.p95),
            (a.cfo_hz.p99, b.cfo_hz.p99),
        ] {
            assert!(y >= x, "{y} < {x}");
        }
    }
}

#[test]
fn identical_inputs_give_bit_identical_summaries() {
    let sc = scenario();
    let cfg = UncertaintyConfig::default();
    assert_eq!(
        monte_carlo_open_loop(&cfg, &sc, 20).unwrap(),
        monte_carlo_open_loop(&cfg, &sc, 20).unwrap()
    );
}

#[test]
fn zero_uncertainty_gives_zero_percentiles() {
    let s = monte_carlo_open_loop(&UncertaintyConfig::zero(), &scenario(), 10).unwrap();
    for v in [s.ta_us.p50, s.ta_us.p95, s.ta_us.p99, s.cfo_hz.p50, s.cfo_hz.p95, s.cfo_hz.p99] {
        assert_eq!(v, 0.0);
    }
}
