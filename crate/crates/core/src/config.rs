//! TOML configuration: one file drives the campaign, Monte Carlo, sweep,
//! sensitivity and loop analysis.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::campaign::{CampaignConfig, RunSpec};
use crate::controller::{LoopAnalysisConfig, PidConfig, SweepSpec};
use crate::geometry::{GroundSite, LinkConstants, OrbitElements};
use crate::link_emulator::{RegimeThresholds, StateDwellConfig, TransportParams};
use crate::montecarlo::MonteCarloSettings;
use crate::uncertainty::UncertaintyConfig;

pub const DEFAULT_SEED: u64 = 20_260_301;
pub const SEED_ENV_VAR: &str = "SDGS_SIM_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigViolation {
    pub section: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("[{}] {}", v.section, v.message)).collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    fn single(section: &str, message: impl Into<String>) -> Self {
        Self(vec![ConfigViolation {
            section: section.to_string(),
            message: message.into(),
        }])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub warmup_s: f64,
    pub downsample: usize,
    pub pass_horizon_s: f64,
    /// Disturbance model seen by the campaign runs.
    pub uncertainty: UncertaintyConfig,
    pub runs: Vec<RunSpec>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            warmup_s: 5.0,
            downsample: 30,
            pass_horizon_s: 172_800.0,
            uncertainty: UncertaintyConfig::campaign_default(),
            runs: RunSpec::default_runs(240.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_runs: usize,
    pub rows: Vec<SweepSpec>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let row = |t_fb_ms, d_fb_ms, quant_tau_us, quant_f_hz| SweepSpec {
            t_fb_ms,
            d_fb_ms,
            quant_tau_us,
            quant_f_hz,
        };
        Self {
            n_runs: 200,
            rows: vec![
                row(5.0, 5.0, 0.1, 50.0),
                row(10.0, 15.0, 0.5, 100.0),
                row(20.0, 30.0, 1.0, 200.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    pub draws: usize,
    pub epsilon: f64,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            draws: 20,
            epsilon: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub orbit: OrbitElements,
    pub link: LinkConstants,
    pub stations: Vec<GroundSite>,
    /// Disturbance model for the Monte Carlo and the sweep.
    pub uncertainty: UncertaintyConfig,
    pub controller: PidConfig,
    pub regime: RegimeThresholds,
    pub transport: TransportParams,
    pub handover: StateDwellConfig,
    pub campaign: CampaignSection,
    pub montecarlo: MonteCarloSettings,
    pub sweep: SweepSection,
    pub sensitivity: SensitivitySection,
    pub analysis: LoopAnalysisConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: None,
            orbit: OrbitElements::default(),
            link: LinkConstants::default(),
            stations: GroundSite::default_stations(),
            uncertainty: UncertaintyConfig::default(),
            controller: PidConfig::default(),
            regime: RegimeThresholds::default(),
            transport: TransportParams::default(),
            handover: StateDwellConfig::default(),
            campaign: CampaignSection::default(),
            montecarlo: MonteCarloSettings::default(),
            sweep: SweepSection::default(),
            sensitivity: SensitivitySection::default(),
            analysis: LoopAnalysisConfig::default(),
        }
    }
}

/// Outcome of validating one config section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionCheck {
    pub section: &'static str,
    pub violations: Vec<String>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigErrors> {
        toml::from_str(text).map_err(|e| ConfigErrors::single("parse", e.to_string().trim_end().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors::single("file", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Per-section invariant checks, in file order.
    pub fn section_checks(&self) -> Vec<SectionCheck> {
        let check = |section, violations| SectionCheck { section, violations };
        let one = |r: Result<(), String>| r.err().into_iter().collect::<Vec<_>>();

        let mut stations = Vec::new();
        if self.stations.is_empty() {
            stations.push("at least one station is required".to_string());
        }
        for s in &self.stations {
            stations.extend(one(s.validate()).into_iter().map(|m| format!("{}: {m}", s.name)));
        }

        let mut link = Vec::new();
        if !(self.link.f_c_hz > 0.0) {
            link.push(format!("f_c_hz must be > 0 (got {})", self.link.f_c_hz));
        }
        if !(self.link.c_ms > 0.0) {
            link.push(format!("c_ms must be > 0 (got {})", self.link.c_ms));
        }

        let mut campaign: Vec<String> = self
            .campaign
            .uncertainty
            .validate()
            .into_iter()
            .map(|m| format!("uncertainty.{m}"))
            .collect();
        if self.campaign.downsample == 0 {
            campaign.push("downsample must be >= 1".into());
        }
        if !(self.campaign.warmup_s >= 0.0) {
            campaign.push("warmup_s must be >= 0".into());
        }
        if !(self.campaign.pass_horizon_s > 0.0) {
            campaign.push("pass_horizon_s must be > 0".into());
        }
        if self.campaign.runs.is_empty() {
            campaign.push("at least one run is required".into());
        }
        campaign.extend(self.campaign_config(0).validate_runs());

        let mut sweep = Vec::new();
        for (i, r) in self.sweep.rows.iter().enumerate() {
            sweep.extend(r.apply(&self.controller).validate().into_iter().map(|m| format!("rows[{i}]: {m}")));
        }
        if self.sweep.n_runs == 0 {
            sweep.push("n_runs must be >= 1".into());
        }

        let mut sensitivity = Vec::new();
        if !(0.0..1.0).contains(&self.sensitivity.epsilon) {
            sensitivity.push(format!("epsilon must be in [0, 1) (got {})", self.sensitivity.epsilon));
        }

        vec![
            check("orbit (OrbitElements)", one(self.orbit.validate())),
            check("link (LinkConstants)", link),
            check("stations (GroundSite)", stations),
            check("uncertainty (UncertaintyConfig)", self.uncertainty.validate()),
            check("controller (PidConfig)", self.controller.validate()),
            check("regime (RegimeThresholds)", self.regime.validate()),
            check("transport (TransportParams)", self.transport.validate()),
            check("handover (StateDwellConfig)", self.handover.validate()),
            check("campaign (CampaignConfig)", campaign),
            check("montecarlo (MonteCarloSettings)", self.montecarlo.validate()),
            check("sweep", sweep),
            check("sensitivity", sensitivity),
            check("analysis (LoopAnalysisConfig)", self.analysis.validate()),
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let v: Vec<ConfigViolation> = self
            .section_checks()
            .into_iter()
            .flat_map(|c| {
                c.violations.into_iter().map(move |message| ConfigViolation {
                    section: c.section.to_string(),
                    message,
                })
            })
            .collect();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(v))
        }
    }

    /// Seed precedence: explicit override, then the config file, then the
    /// environment fallback, then the built-in default.
    pub fn effective_seed(&self, seed_override: Option<u64>, env_seed: Option<u64>) -> u64 {
        seed_override.or(self.seed).or(env_seed).unwrap_or(DEFAULT_SEED)
    }

    /// SHA-256 of the canonical TOML rendering with `seed` resolved.
    pub fn hash_with_seed(&self, seed: u64) -> String {
        let resolved = SimConfig {
            seed: Some(seed),
            ..self.clone()
        };
        crate::campaign::io::sha256_hex(resolved.to_toml().as_bytes())
    }

    pub fn campaign_config(&self, seed: u64) -> CampaignConfig {
        CampaignConfig {
            seed,
            stations: self.stations.clone(),
            orbit: self.orbit,
            consts: self.link,
            runs: self.campaign.runs.clone(),
            warmup_s: self.campaign.warmup_s,
            downsample: self.campaign.downsample,
            pass_horizon_s: self.campaign.pass_horizon_s,
            uncertainty: self.campaign.uncertainty,
            pid: self.controller,
            thresholds: self.regime,
            transport: self.transport,
            dwell: self.handover,
        }
    }

    pub fn montecarlo_scenario(&self, seed: u64) -> crate::error::SimResult<crate::scenario::MonteCarloScenario> {
        self.montecarlo
            .scenario(&self.stations, &self.orbit, &self.link, self.controller.t_fb_s, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = SimConfig::default();
        assert_eq!(SimConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn nonpositive_cp_threshold_names_the_section() {
        let mut c = SimConfig::default();
        c.regime.tau_cp_s = 0.0;
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("RegimeThresholds"));
        assert!(e.to_string().contains("tau_cp_s"));
    }

    #[test]
    fn mislabeled_run_group_is_rejected() {
        let mut c = SimConfig::default();
        c.campaign.runs[0].mode = crate::link_emulator::Mode::Reference;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("A1"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = SimConfig::from_toml_str("[regime]\ntau_cp = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("tau_cp"), "{e}");
    }

    #[test]
    fn seed_precedence() {
        let mut c = SimConfig::default();
        assert_eq!(c.effective_seed(None, None), DEFAULT_SEED);
        assert_eq!(c.effective_seed(None, Some(5)), 5);
        c.seed = Some(9);
        assert_eq!(c.effective_seed(None, Some(5)), 9);
        assert_eq!(c.effective_seed(Some(7), Some(5)), 7);
    }

    #[test]
    fn hash_depends_on_seed() {
        let c = SimConfig::default();
        assert_eq!(c.hash_with_seed(1), c.hash_with_seed(1));
        assert_ne!(c.hash_with_seed(1), c.hash_with_seed(2));
    }
}
