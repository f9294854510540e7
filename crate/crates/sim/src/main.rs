use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use steerpath_core::{EngineConfig64, ExerciseBank64, SliderValue, TopicId};
use steerpath_service::store::{read_log, read_snapshot};
use steerpath_service::{PracticeService, Store};
use steerpath_sim::{grid_bank, ingest_bank, run_simulation, Policy, SimConfig};

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

/// Admin tool for the steerpath practice engine.
#[derive(Parser)]
#[command(name = "steerpath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL exercise bank and print the ingest report.
    Ingest {
        /// Bank file, one exercise object per line.
        bank: PathBuf,
    },
    /// Run a seeded population of simulated learners.
    Simulate(SimulateArgs),
    /// Replay an attempt log and report any disagreement with derived state.
    Audit {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Engine config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Snapshot to check against the replay.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Serve the practice HTTP API.
    Serve {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Attempt log to append to; in-memory when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Fixed,
    Greedy,
    Feedback,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Bank file; a 401-item grid over [-5, 5] when omitted.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    population: usize,
    #[arg(long, default_value_t = 200)]
    attempts: usize,
    #[arg(long, value_enum, default_value = "fixed")]
    policy: PolicyArg,
    /// Slider for the fixed policy.
    #[arg(long, default_value_t = 0.5)]
    slider: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Flattens the simulated response curve by 1 / (1 + x).
    #[arg(long, default_value_t = 0.0)]
    noise_inflation: f64,
    #[arg(long, default_value_t = 0.0)]
    skill_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    skill_sd: f64,
    #[arg(long)]
    topic: Option<String>,
    /// All learners share one store and its adapting item difficulties.
    #[arg(long)]
    shared_bank: bool,
    /// Trailing attempts for the success rate.
    #[arg(long, default_value_t = 50)]
    window: usize,
    /// Per-answer CSV output.
    #[arg(long)]
    steps_csv: Option<PathBuf>,
    /// Per-learner CSV output.
    #[arg(long)]
    metrics_csv: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig64, Box<dyn std::error::Error>> {
    match path {
        Some(p) => Ok(EngineConfig64::from_toml_str(&fs::read_to_string(p)?)?),
        None => Ok(EngineConfig64::default()),
    }
}

fn load_bank(path: &Path) -> Result<ExerciseBank64, Box<dyn std::error::Error>> {
    let (bank, report) = ingest_bank(path)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(bank)
}

fn print_json(value: &impl serde::Serialize) -> io::Result<()> {
    serde_json::to_writer_pretty(io::stdout().lock(), value)?;
    println!();
    Ok(())
}

fn simulate(args: SimulateArgs) -> CliResult {
    let bank = match &args.bank {
        Some(p) => load_bank(p)?,
        None => grid_bank("grid", 401, -5.0, 5.0),
    };
    let policy = match args.policy {
        PolicyArg::Fixed => Policy::FixedSlider(SliderValue::from_real(args.slider)?),
        PolicyArg::Greedy => Policy::GreedyHarder,
        PolicyArg::Feedback => Policy::FeedbackFollower,
    };
    let config = SimConfig {
        population: args.population,
        attempts: args.attempts,
        engine: load_config(args.config.as_deref())?,
        policy,
        seed: args.seed,
        noise_inflation: args.noise_inflation,
        skill_mean: args.skill_mean,
        skill_sd: args.skill_sd,
        topic: args.topic.map(TopicId::from),
        shared_bank: args.shared_bank,
        window: args.window,
    };
    let report = run_simulation(&bank, &config)?;
    if let Some(path) = &args.steps_csv {
        report.write_steps_csv(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.metrics_csv {
        report.write_metrics_csv(BufWriter::new(File::create(path)?))?;
    }
    print_json(&report.summary((0.6, 0.8)))?;
    Ok(ExitCode::SUCCESS)
}

fn audit(bank: &Path, log: &Path, config: Option<&Path>, snapshot: Option<&Path>) -> CliResult {
    let bank = load_bank(bank)?;
    let model = load_config(config)?.model();
    let (attempts, recovery) = read_log(log)?;
    if recovery.truncated_bytes > 0 {
        eprintln!("warning: ignoring {} byte(s) of torn tail", recovery.truncated_bytes);
    }
    let store = match snapshot {
        Some(p) => Store::restore(bank, model, attempts, read_snapshot(p)?)?,
        None => Store::from_log(bank, model, attempts)?,
    };
    let report = store.audit();
    print_json(&report)?;
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(bank: &Path, config: Option<&Path>, log: Option<&Path>, addr: SocketAddr) -> CliResult {
    let bank = load_bank(bank)?;
    let config = load_config(config)?;
    let store = match log {
        Some(p) => {
            let (store, recovery) = Store::open(bank, config.model(), p)?;
            eprintln!("replayed {} attempt(s)", recovery.attempts);
            store
        }
        None => Store::in_memory(bank, config.model()),
    };
    let service = Arc::new(PracticeService::new(store, config));
    tokio::runtime::Runtime::new()?.block_on(steerpath_service::serve(service, addr))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { bank } => ingest_bank(&bank)
            .map_err(Into::into)
            .and_then(|(_, report)| print_json(&report).map_err(Into::into))
            .map(|()| ExitCode::SUCCESS),
        Command::Simulate(args) => simulate(args),
        Command::Audit { bank, log, config, snapshot } => audit(&bank, &log, config.as_deref(), snapshot.as_deref()),
        Command::Serve { bank, config, log, addr } => serve(&bank, config.as_deref(), log.as_deref(), addr),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err}");
        ExitCode::from(2)
    })
}
