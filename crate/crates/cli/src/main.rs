use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdgs_core::campaign::io::{read_dataset, write_dataset};
use sdgs_core::campaign::{emit_tables, run_campaign, sensitivity_check, station_passes};
use sdgs_core::config::{ConfigErrors, SimConfig, SEED_ENV_VAR};
use sdgs_core::controller::sweep::write_sweep_csv;
use sdgs_core::controller::{closed_loop_response, delay_quantization_sweep};
use sdgs_core::montecarlo::{monte_carlo, MonteCarloReport};
use sdgs_core::{SimError, SimResult};

#[derive(Parser, Debug)]
#[command(name = "sdgs-sim", version, about = "LEO uplink TA/CFO residual-loop simulator")]
struct Cli {
    /// Configuration file (TOML). `-` reads standard input.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Worker threads; defaults to min(runs, available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full campaign and emit the report tables.
    Run,
    /// Open- and closed-loop residual percentiles.
    Montecarlo,
    /// Delay/quantization sweep.
    Sweep,
    /// Perturb implementation constants and rerun the campaign.
    Sensitivity {
        /// Number of perturbation draws (defaults to the config value).
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Rebuild the tables from telemetry already under --out.
    Report,
    /// Check the configuration without running anything.
    Validate,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        None => Err(Failure::Config("no configuration given (use --config PATH)".into())),
        Some(p) if p == Path::new("-") => {
            let mut text = String::new();
            std::io::stdin().read_to_string(&mut text)?;
            Ok(SimConfig::from_toml_str(&text)?)
        }
        Some(p) => Ok(SimConfig::load(p)?),
    }
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV_VAR).ok().and_then(|v| v.trim().parse().ok())
}

fn init_pool(jobs: Option<usize>, n_runs: usize) -> Result<(), Failure> {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let n = jobs.unwrap_or_else(|| n_runs.clamp(1, cores)).max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn emit(out: &Path, stem: &str, format: Format, text: &str, write_csv: impl FnOnce(std::fs::File) -> SimResult<()>) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(out)?;
    let path = match format {
        Format::Csv => {
            let p = out.join(format!("{stem}.csv"));
            write_csv(std::fs::File::create(&p)?)?;
            p
        }
        Format::Text => {
            let p = out.join(format!("{stem}.txt"));
            std::fs::write(&p, text)?;
            p
        }
    };
    print!("{text}");
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn model_summary(cfg: &SimConfig, seed: u64) -> SimResult<MonteCarloReport> {
    let scenario = cfg.montecarlo_scenario(seed)?;
    monte_carlo(&scenario, &cfg.uncertainty, &cfg.controller, cfg.montecarlo.n_runs)
}

fn cmd_validate(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    let mut failed = Vec::new();
    for check in cfg.section_checks() {
        if check.violations.is_empty() {
            println!("PASS {}", check.section);
        } else {
            println!("FAIL {}", check.section);
            for v in &check.violations {
                println!("     {v}");
                failed.push(format!("[{}] {v}", check.section));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Config(failed.join("; ")))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if matches!(cli.command, Command::Validate) {
        return cmd_validate(cli);
    }
    let cfg = load_config(cli.config.as_deref())?;
    cfg.validate()?;
    let seed = cfg.effective_seed(cli.seed_override, env_seed());
    eprintln!("effective seed: {seed}");
    let campaign = cfg.campaign_config(seed);
    let n_jobs = match cli.command {
        Command::Run | Command::Sensitivity { .. } | Command::Report => campaign.stations.len() * campaign.runs.len(),
        _ => usize::MAX,
    };
    init_pool(cli.jobs, n_jobs)?;

    match &cli.command {
        Command::Run => {
            let hash = cfg.hash_with_seed(seed);
            let ds = run_campaign(&campaign)?;
            for r in ds.runs.iter().filter(|r| r.diverged.is_some()) {
                eprintln!("run {} at {} diverged: {}", r.spec.id, r.station, r.diverged.as_deref().unwrap_or(""));
            }
            let files = write_dataset(&cli.out.join("telemetry"), &ds, &hash)?;
            eprintln!("wrote {} telemetry files", files.len());
            let model = model_summary(&cfg, seed)?;
            std::fs::write(
                cli.out.join("montecarlo.json"),
                serde_json::to_string_pretty(&model).map_err(SimError::from)? + "\n",
            )?;
            let report = emit_tables(&ds, Some(&model))?;
            let paths = report.write(&cli.out.join("report"), cli.format == Format::Csv)?;
            print!("{}", report.render_text());
            eprintln!("wrote {} report tables", paths.len());
        }
        Command::Report => {
            let passes = station_passes(&campaign)?;
            let ds = read_dataset(&cli.out.join("telemetry"), &campaign, passes)?;
            let cached = cli.out.join("montecarlo.json");
            let model = if cached.exists() {
                serde_json::from_str(&std::fs::read_to_string(&cached)?).map_err(SimError::from)?
            } else {
                model_summary(&cfg, seed)?
            };
            let report = emit_tables(&ds, Some(&model))?;
            let paths = report.write(&cli.out.join("report"), cli.format == Format::Csv)?;
            print!("{}", report.render_text());
            eprintln!("wrote {} report tables", paths.len());
        }
        Command::Montecarlo => {
            let model = model_summary(&cfg, seed)?;
            emit(&cli.out, "montecarlo", cli.format, &model.to_text(), |f| model.write_csv(f))?;
        }
        Command::Sweep => {
            let scenario = cfg.montecarlo_scenario(seed)?;
            let rows = delay_quantization_sweep(&scenario, &cfg.uncertainty, &cfg.controller, &cfg.sweep.rows, cfg.sweep.n_runs)?;
            let mut text = String::from("t_fb_ms d_fb_ms quant_tau_us quant_f_hz ta_p95_us cfo_p95_hz stable\n");
            for r in &rows {
                let analytic = closed_loop_response(&r_pid(&cfg, r), &cfg.analysis)?;
                let show = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "UNSTABLE".into());
                text.push_str(&format!(
                    "{:>7} {:>7} {:>12} {:>10} {:>9} {:>10} {}{}\n",
                    r.t_fb_ms,
                    r.d_fb_ms,
                    r.quant_tau_us,
                    r.quant_f_hz,
                    show(r.ta_p95_us),
                    show(r.cfo_p95_hz),
                    r.stable,
                    if analytic.stable { "" } else { " (linear analysis: unstable)" }
                ));
            }
            emit(&cli.out, "sweep", cli.format, &text, |f| write_sweep_csv(&rows, f))?;
        }
        Command::Sensitivity { draws } => {
            let n = draws.unwrap_or(cfg.sensitivity.draws);
            let rep = sensitivity_check(&campaign, n, cfg.sensitivity.epsilon)?;
            emit(&cli.out, "sensitivity", cli.format, &rep.to_text(), |f| rep.write_csv(f))?;
        }
        Command::Validate => unreachable!(),
    }
    Ok(())
}

fn r_pid(cfg: &SimConfig, r: &sdgs_core::controller::SweepRow) -> sdgs_core::PidConfig {
    sdgs_core::controller::SweepSpec {
        t_fb_ms: r.t_fb_ms,
        d_fb_ms: r.d_fb_ms,
        quant_tau_us: r.quant_tau_us,
        quant_f_hz: r.quant_f_hz,
    }
    .apply(&cfg.controller)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
