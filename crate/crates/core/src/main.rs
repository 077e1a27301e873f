use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manet_sim::config::{parse_kv, ConfigError, ScenarioConfig, SweepSpec};
use manet_sim::metrics::CSV_HEADER;
use manet_sim::protocols::ProtocolRegistry;
use manet_sim::runner::{metrics_from_trace, run_scenario, sweep, sweep_csv, RunError};

#[derive(Parser)]
#[command(name = "manet-sim", version, about = "Discrete-event simulator for AODV, DSR and AOMDV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its metrics row.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the packet trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every protocol x nodes x speed x seed combination.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated, e.g. aodv,dsr,aomdv.
        #[arg(long)]
        protocols: Option<String>,
        /// Comma-separated node counts.
        #[arg(long)]
        node_counts: Option<String>,
        /// Comma-separated max speeds in m/s.
        #[arg(long)]
        speeds: Option<String>,
        /// Seeds, e.g. 1-10 or 1,2,5.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the metrics row from a saved trace.
    Metrics {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Scenario flags; each mirrors a config-file key and overrides it.
#[derive(Args, Default)]
struct ScenarioArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    max_speed: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Simulated seconds.
    #[arg(long)]
    time: Option<String>,
    /// WIDTHxHEIGHT in meters.
    #[arg(long)]
    area: Option<String>,
    #[arg(long)]
    flows: Option<String>,
    /// Packets per second per flow.
    #[arg(long)]
    rate: Option<String>,
    #[arg(long)]
    pkt_size: Option<String>,
    /// Any other key, e.g. --set radio.range=200 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ScenarioArgs {
    fn pairs(&self) -> Result<Vec<(String, String)>, Vec<ConfigError>> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|e| vec![ConfigError::new("config".into(), format!("{}: {e}", path.display()))])?;
                parse_kv(&text)?
            }
            None => Vec::new(),
        };
        let flags = [
            ("protocol", &self.protocol),
            ("nodes", &self.nodes),
            ("max_speed", &self.max_speed),
            ("seed", &self.seed),
            ("time", &self.time),
            ("area", &self.area),
            ("flows", &self.flows),
            ("rate", &self.rate),
            ("pkt_size", &self.pkt_size),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                pairs.push((k.to_string(), v.clone()));
            }
        }
        let mut errors = Vec::new();
        for s in &self.set {
            match s.split_once('=') {
                Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
                None => errors.push(ConfigError::new("set".into(), format!("expected KEY=VALUE, got `{s}`"))),
            }
        }
        if errors.is_empty() {
            Ok(pairs)
        } else {
            Err(errors)
        }
    }
}

enum Failure {
    Config(Vec<ConfigError>),
    Other(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    let registry = ProtocolRegistry::default();
    match cmd {
        Command::Run { scenario, trace, out } => {
            let pairs = scenario.pairs().map_err(Failure::Config)?;
            let cfg = ScenarioConfig::from_pairs(&pairs, &registry).map_err(Failure::Config)?;
            let result = run_scenario(&cfg, &registry, trace.as_deref()).map_err(|e| match e {
                RunError::Config(c) => Failure::Config(c.0),
                RunError::Io(e) => Failure::Other(format!("trace output failed: {e}")),
            })?;
            emit(&out, &format!("{CSV_HEADER}\n{}\n", result.row.to_csv()))?;
        }
        Command::Sweep {
            scenario,
            protocols,
            node_counts,
            speeds,
            seeds,
            jobs,
            out,
        } => {
            let mut pairs = scenario.pairs().map_err(Failure::Config)?;
            for (k, v) in [
                ("sweep.protocols", protocols),
                ("sweep.nodes", node_counts),
                ("sweep.speeds", speeds),
                ("sweep.seeds", seeds),
            ] {
                if let Some(v) = v {
                    pairs.push((k.to_string(), v));
                }
            }
            let spec = SweepSpec::from_pairs(&pairs, &registry).map_err(Failure::Config)?;
            let cells = sweep(&spec, &registry, jobs.max(1));
            for c in &cells {
                if let Err(e) = &c.result {
                    eprintln!(
                        "error: {} nodes={} speed={} seed={}: {e}",
                        c.config.protocol, c.config.nodes, c.config.max_speed, c.config.seed
                    );
                }
            }
            emit(&out, &sweep_csv(&cells))?;
            if cells.iter().any(|c| c.result.is_err()) {
                return Err(Failure::Other("some sweep cells failed".into()));
            }
        }
        Command::Metrics { scenario, trace, out } => {
            let pairs = scenario.pairs().map_err(Failure::Config)?;
            let cfg = ScenarioConfig::from_pairs(&pairs, &registry).map_err(Failure::Config)?;
            let file = File::open(&trace).map_err(|e| Failure::Other(format!("{}: {e}", trace.display())))?;
            let row = metrics_from_trace(BufReader::new(file), &cfg).map_err(|e| Failure::Other(e.to_string()))?;
            emit(&out, &format!("{CSV_HEADER}\n{}\n", row.to_csv()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errors)) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
