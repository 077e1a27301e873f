//! Single runs, parameter sweeps and trace re-analysis.

use std::fs::File;
use std::io::{self, BufRead, BufWriter};
use std::path::Path;

use rayon::prelude::*;

use crate::config::{ConfigErrors, ScenarioConfig, SweepSpec};
use crate::metrics::{Counts, MetricsRow, Recount, CSV_HEADER};
use crate::network::{Network, NetworkSetup, RunStats};
use crate::protocols::ProtocolRegistry;
use crate::sim::{stream, SimRng};
use crate::trace::{TraceError, TraceHasher, TraceRecord, TraceSink, TraceWriter};
use crate::traffic::random_flows;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),
    #[error("trace output failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    /// Metrics recomputed from the trace.
    pub row: MetricsRow,
    /// Counters kept by the network while running.
    pub online: Counts,
    /// The same counters rebuilt from the trace text.
    pub recount: Counts,
    pub trace_sha256: String,
    pub trace_lines: u64,
    pub stats: RunStats,
    /// Orphan receipts, unparsable lines and time reversals seen by the recount.
    pub trace_anomalies: u64,
}

/// Placement, mobility, traffic and loss all come from independent streams
/// of the scenario seed, so every protocol sees the same topology and load.
pub fn build_setup(cfg: &ScenarioConfig) -> NetworkSetup {
    let mut placement = SimRng::derive(cfg.seed, stream::PLACEMENT);
    let positions = (0..cfg.nodes).map(|_| cfg.area.random_point(&mut placement)).collect();
    let mut traffic = SimRng::derive(cfg.seed, stream::TRAFFIC);
    let flows = random_flows(&mut traffic, cfg.nodes, &cfg.traffic_pattern());
    NetworkSetup {
        radio: cfg.radio.clone(),
        area: cfg.area,
        max_speed: cfg.max_speed,
        pause: cfg.pause,
        positions,
        flows,
        sim_time: cfg.sim_time,
        routing: cfg.routing.clone(),
        check_loops: cfg.check_loops,
        mobility_rng: SimRng::derive(cfg.seed, stream::MOBILITY),
        loss_rng: SimRng::derive(cfg.seed, stream::RADIO_LOSS),
    }
}

struct Counter(u64);

impl TraceSink for Counter {
    fn line(&mut self, _: &str) -> io::Result<()> {
        self.0 += 1;
        Ok(())
    }
}

/// Runs one scenario, optionally writing the trace to `trace_path`.
pub fn run_scenario(cfg: &ScenarioConfig, registry: &ProtocolRegistry, trace_path: Option<&Path>) -> Result<RunOutput, RunError> {
    let writer = match trace_path {
        Some(p) => Some(TraceWriter::new(BufWriter::new(File::create(p)?))),
        None => None,
    };
    run_with_sink(cfg, registry, writer).map(|(out, _)| out)
}

/// Runs one scenario, feeding the trace to `extra` as well as to the
/// built-in recount and hasher.
pub fn run_with_sink<S: TraceSink>(cfg: &ScenarioConfig, registry: &ProtocolRegistry, extra: S) -> Result<(RunOutput, S), RunError> {
    let errors = cfg.validate(registry);
    if !errors.is_empty() {
        return Err(RunError::Config(ConfigErrors(errors)));
    }
    let builder = registry
        .get(&cfg.protocol)
        .expect("validated protocol")
        .builder(&cfg.overrides)
        .map_err(|e| RunError::Config(ConfigErrors(e)))?;
    let sink = (Recount::new(), (TraceHasher::new(), (Counter(0), extra)));
    let mut net = Network::new(build_setup(cfg), &builder, sink);
    net.run()?;
    let online = net.counts();
    let stats = net.stats().clone();
    let (recount, (hasher, (lines, extra))) = net.into_sink();
    let counts = recount.counts();
    let row = MetricsRow::from_counts(
        &cfg.protocol,
        cfg.nodes,
        cfg.max_speed,
        cfg.seed,
        &counts,
        cfg.pkt_size,
        cfg.sim_time,
    );
    let out = RunOutput {
        config: cfg.clone(),
        row,
        online,
        recount: counts,
        trace_sha256: hasher.hex_digest(),
        trace_lines: lines.0,
        stats,
        trace_anomalies: recount.orphan_receipts + recount.parse_errors + recount.out_of_order,
    };
    Ok((out, extra))
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub config: ScenarioConfig,
    pub result: Result<RunOutput, String>,
}

/// Runs every cell of `spec` on up to `jobs` threads. Results come back in
/// [`SweepSpec::cells`] order whatever the thread count.
pub fn sweep(spec: &SweepSpec, registry: &ProtocolRegistry, jobs: usize) -> Vec<SweepCell> {
    let cells = spec.cells();
    let run = |cfg: &ScenarioConfig| SweepCell {
        config: cfg.clone(),
        result: run_scenario(cfg, registry, None).map_err(|e| e.to_string()),
    };
    if jobs <= 1 {
        return cells.iter().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(run).collect()),
        Err(_) => cells.iter().map(run).collect(),
    }
}

/// CSV text for a finished sweep. Failed cells keep their key columns and
/// leave every metric empty.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        match &c.result {
            Ok(r) => out.push_str(&r.row.to_csv()),
            Err(_) => out.push_str(&error_row(&c.config)),
        }
        out.push('\n');
    }
    out
}

pub fn error_row(cfg: &ScenarioConfig) -> String {
    format!("{},{},{},{},,,,,,,,", cfg.protocol, cfg.nodes, cfg.max_speed, cfg.seed)
}

/// Recomputes a results row from a saved trace.
pub fn metrics_from_trace<R: BufRead>(reader: R, cfg: &ScenarioConfig) -> Result<MetricsRow, TraceError> {
    let mut recount = Recount::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let rec = TraceRecord::parse(&line).map_err(|message| TraceError::Parse { line_no: i + 1, message })?;
        recount.record(&rec);
    }
    Ok(MetricsRow::from_counts(
        &cfg.protocol,
        cfg.nodes,
        cfg.max_speed,
        cfg.seed,
        &recount.counts(),
        cfg.pkt_size,
        cfg.sim_time,
    ))
}

/// Mean of `f` over successful cells matching the filter; `None` if none has a value.
pub fn mean_over<F, G>(cells: &[SweepCell], filter: F, f: G) -> Option<f64>
where
    F: Fn(&ScenarioConfig) -> bool,
    G: Fn(&MetricsRow) -> Option<f64>,
{
    let vals: Vec<f64> = cells
        .iter()
        .filter(|c| filter(&c.config))
        .filter_map(|c| c.result.as_ref().ok())
        .filter_map(|r| f(&r.row))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimTime;

    fn small(protocol: &str) -> ScenarioConfig {
        ScenarioConfig {
            protocol: protocol.into(),
            nodes: 20,
            max_speed: 10.0,
            sim_time: SimTime::from_secs(40),
            flows: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn online_matches_recount() {
        let reg = ProtocolRegistry::default();
        for p in ["aodv", "dsr", "aomdv"] {
            let out = run_scenario(&small(p), &reg, None).unwrap();
            assert_eq!(out.online, out.recount, "{p}");
            assert_eq!(out.trace_anomalies, 0);
            assert!(out.row.psnd > 0);
            assert!(out.row.prec <= out.row.psnd);
        }
    }

    #[test]
    fn same_config_same_hash() {
        let reg = ProtocolRegistry::default();
        let a = run_scenario(&small("dsr"), &reg, None).unwrap();
        let b = run_scenario(&small("dsr"), &reg, None).unwrap();
        assert_eq!(a.trace_sha256, b.trace_sha256);
        let mut other = small("dsr");
        other.seed = 2;
        assert_ne!(run_scenario(&other, &reg, None).unwrap().trace_sha256, a.trace_sha256);
    }

    #[test]
    fn single_node_without_traffic() {
        let reg = ProtocolRegistry::default();
        let cfg = ScenarioConfig {
            nodes: 1,
            flows: 0,
            ..small("aodv")
        };
        let out = run_scenario(&cfg, &reg, None).unwrap();
        assert_eq!(out.row.psnd, 0);
        assert_eq!(out.row.pdf, None);
        assert_eq!(out.row.avg_e2e_delay_s, None);
        assert!(out.row.to_csv().starts_with("aodv,1,10,1,0,0,,,0,,0,0"));
    }

    #[test]
    fn invalid_config_is_reported() {
        let reg = ProtocolRegistry::default();
        let cfg = ScenarioConfig {
            pkt_size: 0,
            ..small("aodv")
        };
        match run_scenario(&cfg, &reg, None) {
            Err(RunError::Config(e)) => assert_eq!(e.0[0].field, "pkt_size"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn trace_file_round_trip() {
        let reg = ProtocolRegistry::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tr");
        let cfg = small("aomdv");
        let out = run_scenario(&cfg, &reg, Some(&path)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(crate::trace::sha256_hex(&bytes), out.trace_sha256);
        let row = metrics_from_trace(io::BufReader::new(File::open(&path).unwrap()), &cfg).unwrap();
        assert_eq!(row, out.row);
    }

    #[test]
    fn sweep_order_independent_of_jobs() {
        let reg = ProtocolRegistry::default();
        let spec = SweepSpec {
            base: small("aodv"),
            protocols: vec!["aodv".into(), "dsr".into()],
            node_counts: vec![15],
            speeds: vec![0.0, 20.0],
            seeds: vec![1, 2],
        };
        let one = sweep_csv(&sweep(&spec, &reg, 1));
        let many = sweep_csv(&sweep(&spec, &reg, 3));
        assert_eq!(one, many);
        assert_eq!(one.lines().count(), 1 + 8);
    }

    #[test]
    fn failed_cell_becomes_error_row() {
        let cfg = small("aodv");
        let cells = vec![SweepCell {
            config: cfg,
            result: Err("boom".into()),
        }];
        let csv = sweep_csv(&cells);
        assert_eq!(csv.lines().nth(1), Some("aodv,20,10,1,,,,,,,,"));
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 12);
    }
}
