use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{error, info, warn};

use nessim_core::config::LoadedConfig;
use nessim_core::engine::{run_campaign, Scenario};
use nessim_core::fixtures::slot_fixtures;
use nessim_core::kpi::{export_campaign, export_trace, KpiRecord};
use nessim_core::scheduler::Scheme;
use nessim_core::traffic::LoadLabel;
use nessim_core::Error;

/// Massive-MIMO downlink energy-saving simulator.
#[derive(Debug, Parser)]
#[command(name = "nessim", version)]
struct Cli {
    /// Scenario file; the bundled default scenario when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Directory for result files.
    #[arg(long, global = true, env = "NESSIM_OUTPUT_DIR", default_value = "results")]
    output_dir: PathBuf,

    /// Override a config key, e.g. `traffic.rate=500` or `schemes[0].chi=0.8`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Maximum concurrent drops (0 = one per core).
    #[arg(short = 'j', long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Base seed, replacing `scenario.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the scenario file and report every problem.
    Validate,
    /// Run one scheme at one load.
    Run {
        #[arg(long, default_value = "Proposed")]
        scheme: String,
        #[arg(long, default_value = "low")]
        load: String,
    },
    /// Run every scheme at every load of the scenario.
    Sweep,
    /// Write seeded random scheduler inputs as JSON.
    Fixtures {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "fixtures.json")]
        out: PathBuf,
    },
}

enum Failure {
    Validation(Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Validation(e)) => {
            report_validation(&e);
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

fn report_validation(e: &Error) {
    match e {
        Error::Invalid(issues) => {
            eprintln!("configuration invalid ({} problems):", issues.len());
            for i in issues {
                eprintln!("  {i}");
            }
        }
        other => eprintln!("configuration invalid: {other}"),
    }
}

fn load(cli: &Cli) -> Result<(LoadedConfig, Vec<Scenario>), Failure> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("scenario.base_seed={seed}"));
    }
    let loaded = match &cli.config {
        Some(path) => LoadedConfig::load(path, &overrides),
        None => LoadedConfig::bundled(&overrides),
    }
    .map_err(Failure::Validation)?;
    let scenarios = loaded.build().map_err(Failure::Validation)?;
    Ok((loaded, scenarios))
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Failure> {
    match &cli.command {
        Command::Validate => {
            let (loaded, scenarios) = load(cli)?;
            println!(
                "{}: ok ({} scheme/load cells, {} drops each, {} slots per drop)",
                loaded.source.display(),
                scenarios.len(),
                loaded.config.scenario.num_drops,
                loaded.config.scenario.slots_per_drop
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scheme, load: load_name } => {
            let scheme: Scheme = scheme.parse().map_err(Failure::Validation)?;
            let load_label: LoadLabel = load_name.parse().map_err(Failure::Validation)?;
            let (_, scenarios) = load(cli)?;
            let selected: Vec<Scenario> = scenarios
                .into_iter()
                .filter(|s| s.scheme.scheme == scheme && s.traffic.load == load_label)
                .collect();
            if selected.is_empty() {
                return Err(Failure::Validation(Error::invalid(
                    "schemes",
                    format!("{scheme} at load {load_label} is not part of the scenario"),
                )));
            }
            execute(cli, &selected)
        }
        Command::Sweep => {
            let (_, scenarios) = load(cli)?;
            execute(cli, &scenarios)
        }
        Command::Fixtures { count, out } => {
            let seed = cli.seed.unwrap_or(1);
            let fixtures = slot_fixtures(seed, *count);
            let path = if out.is_absolute() { out.clone() } else { cli.output_dir.join(out) };
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            let json = serde_json::to_string_pretty(&fixtures).context("serialising fixtures")?;
            std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {count} fixtures to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn execute(cli: &Cli, scenarios: &[Scenario]) -> Result<ExitCode, Failure> {
    let started = std::time::Instant::now();
    let cells = run_campaign(scenarios, cli.jobs).context("starting the campaign")?;
    let mut records: Vec<KpiRecord> = Vec::new();
    let mut failed = 0usize;
    for cell in cells {
        let sc = &scenarios[cell.scenario];
        match cell.result {
            Ok(result) => {
                for (w, n) in &result.warnings {
                    warn!("{} {} drop {}: {w} ({n}x)", sc.scheme.scheme, sc.traffic.load, cell.drop);
                }
                if let Some(trace) = &result.trace {
                    let name = format!("{}_{}_{}.csv", sc.scheme.scheme, sc.traffic.load, cell.drop);
                    export_trace(trace, &cli.output_dir.join("traces").join(name))
                        .context("writing power trace")?;
                }
                records.push(result.kpi);
            }
            Err(e) => {
                failed += 1;
                error!("{} {} drop {} failed: {e}", sc.scheme.scheme, sc.traffic.load, cell.drop);
            }
        }
    }
    if !records.is_empty() {
        let (campaign, ipv) = export_campaign(&records, &cli.output_dir).context("exporting results")?;
        info!("wrote {} and {}", campaign.display(), ipv.display());
        print_summary(&records);
    }
    info!(
        "{} of {} drops completed in {:.1} s",
        records.len(),
        records.len() + failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        error!("{failed} drops failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(records: &[KpiRecord]) {
    println!(
        "{:<18} {:<7} {:>10} {:>9} {:>8} {:>10}",
        "scheme", "load", "UPT Mb/s", "PC", "RB util", "IPV dBm"
    );
    let mut keys: Vec<(Scheme, LoadLabel)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.scheme, r.load)) {
            keys.push((r.scheme, r.load));
        }
    }
    for (scheme, load) in keys {
        let rs: Vec<&KpiRecord> = records.iter().filter(|r| r.scheme == scheme && r.load == load).collect();
        let mean = |f: &dyn Fn(&KpiRecord) -> Option<f64>| {
            let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        println!(
            "{:<18} {:<7} {:>10.2} {:>9.3} {:>8.3} {:>10.2}",
            scheme.name(),
            load.name(),
            mean(&|r| r.upt_mbps),
            mean(&|r| Some(r.pc_mean)),
            mean(&|r| Some(r.rb_utilization)),
            mean(&|r| r.ipv_mean_dbm)
        );
    }
}

