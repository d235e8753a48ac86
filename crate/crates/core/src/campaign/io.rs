//! Telemetry CSV files and their JSON metadata sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CampaignConfig, CampaignDataset, RunResult};
use crate::error::{SimError, SimResult};
use crate::scenario::StationPass;
use crate::link_emulator::{Mode, TelemetryRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub mode: Mode,
    pub station: String,
    pub seed: u64,
    pub config_hash: String,
    pub start_s: f64,
    pub end_s: f64,
    pub row_counts: BTreeMap<String, usize>,
    pub diverged: Option<String>,
    pub version: String,
}

impl RunMetadata {
    pub fn for_run(run: &RunResult, config_hash: &str) -> Self {
        Self {
            run_id: run.spec.id.clone(),
            mode: run.spec.mode,
            station: run.station.clone(),
            seed: run.seed,
            config_hash: config_hash.to_string(),
            start_s: run.start_s,
            end_s: run.end_s,
            row_counts: run.row_counts(),
            diverged: run.diverged.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_telemetry_csv<W: std::io::Write>(rows: &[TelemetryRow], out: W) -> SimResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(crate::link_emulator::TELEMETRY_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_telemetry_csv(path: &Path) -> SimResult<Vec<TelemetryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

/// File stem for a run, e.g. `los_angeles_A1`.
pub fn run_stem(station: &str, run_id: &str) -> String {
    let slug: String = station
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{slug}_{run_id}")
}

/// Write `<stem>.csv` and `<stem>.json` for every run; returns the CSV paths.
pub fn write_dataset(dir: &Path, ds: &CampaignDataset, config_hash: &str) -> SimResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(ds.runs.len());
    for run in &ds.runs {
        let stem = run_stem(&run.station, &run.spec.id);
        let csv_path = dir.join(format!("{stem}.csv"));
        write_telemetry_csv(&run.rows, std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        let meta = RunMetadata::for_run(run, config_hash);
        let mut json = serde_json::to_string_pretty(&meta)?;
        json.push('\n');
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        paths.push(csv_path);
    }
    Ok(paths)
}

/// Rebuild a dataset from files written by [`write_dataset`]. Every station x
/// run of `cfg` must be present.
pub fn read_dataset(dir: &Path, cfg: &CampaignConfig, passes: Vec<StationPass>) -> SimResult<CampaignDataset> {
    let mut runs = Vec::new();
    for pass in &passes {
        for spec in &cfg.runs {
            let stem = run_stem(&pass.site.name, &spec.id);
            let csv_path = dir.join(format!("{stem}.csv"));
            let meta_path = dir.join(format!("{stem}.json"));
            if !csv_path.exists() || !meta_path.exists() {
                return Err(SimError::MissingInput {
                    table: "telemetry",
                    missing: format!("{} run {} ({})", pass.site.name, spec.id, csv_path.display()),
                });
            }
            let meta: RunMetadata = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
            runs.push(RunResult {
                spec: spec.clone(),
                station: meta.station,
                seed: meta.seed,
                start_s: meta.start_s,
                end_s: meta.end_s,
                rows: read_telemetry_csv(&csv_path)?,
                diverged: meta.diverged,
            });
        }
    }
    Ok(CampaignDataset { passes, runs })
}
