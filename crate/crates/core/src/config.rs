//! Scenario configuration.
//!
//! The file format is flat `key = value` lines with `#` comments; nested
//! settings use dotted keys (`radio.range = 250`). Keys under a protocol's
//! name (`aodv.rreq_retries`) are handed to that protocol's factory. Every
//! problem is collected and reported with its key, not just the first.

use std::collections::BTreeMap;
use std::fmt;

use crate::mobility::Area;
use crate::protocols::ProtocolRegistry;
use crate::radio::RadioConfig;
use crate::routing::RoutingParams;
use crate::sim::SimTime;
use crate::traffic::TrafficPattern;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: String, message: String) -> Self {
        ConfigError { field, message }
    }
}

/// Every problem found in one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<Vec<ConfigError>> for ConfigErrors {
    fn from(v: Vec<ConfigError>) -> Self {
        ConfigErrors(v)
    }
}

/// Splits config text into `(key, value)` pairs in file order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, Vec<ConfigError>> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => pairs.push((k.trim().to_string(), v.trim().to_string())),
            _ => errors.push(ConfigError::new(
                format!("line {}", i + 1),
                format!("expected `key = value`, got `{line}`"),
            )),
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(errors)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: String,
    pub nodes: usize,
    pub area: Area,
    /// m/s; 0 keeps every node where it was placed.
    pub max_speed: f64,
    /// Seconds spent at each waypoint.
    pub pause: f64,
    pub sim_time: SimTime,
    pub seed: u64,
    pub flows: usize,
    /// Packets per second per flow.
    pub rate: f64,
    pub pkt_size: u32,
    pub traffic_start_min: SimTime,
    pub traffic_start_max: SimTime,
    /// Flows stop this long before the end of the run.
    pub traffic_stop_margin: SimTime,
    pub radio: RadioConfig,
    pub routing: RoutingParams,
    /// Check next-hop graphs for cycles after every route change.
    pub check_loops: bool,
    /// Protocol-namespaced settings, e.g. `aodv.rreq_retries`.
    pub overrides: BTreeMap<String, String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: "aodv".to_string(),
            nodes: 60,
            area: Area::default(),
            max_speed: 10.0,
            pause: 0.0,
            sim_time: SimTime::from_secs(300),
            seed: 1,
            flows: 10,
            rate: 4.0,
            pkt_size: 512,
            traffic_start_min: SimTime::from_secs(1),
            traffic_start_max: SimTime::from_secs(5),
            traffic_stop_margin: SimTime::from_secs(5),
            radio: RadioConfig::default(),
            routing: RoutingParams::default(),
            check_loops: false,
            overrides: BTreeMap::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::new(key.to_string(), format!("expected {what}, got `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(ConfigError::new(key.to_string(), format!("expected a number, got `{v}`"))),
    }
}

fn parse_secs(key: &str, v: &str) -> Result<SimTime, ConfigError> {
    let x = parse_f64(key, v)?;
    if x < 0.0 {
        return Err(ConfigError::new(key.to_string(), format!("must be >= 0, got {v}")));
    }
    Ok(SimTime::from_secs_f64(x))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    parse_num(key, v, "true or false")
}

/// `500x500` or `500,500`.
pub fn parse_area(key: &str, v: &str) -> Result<Area, ConfigError> {
    let bad = || ConfigError::new(key.to_string(), format!("expected WIDTHxHEIGHT in meters, got `{v}`"));
    let (w, h) = v.split_once(['x', 'X', ',']).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    let h: f64 = h.trim().parse().map_err(|_| bad())?;
    Area::new(w, h).ok_or_else(bad)
}

impl ScenarioConfig {
    /// Defaults overlaid with `pairs` (later pairs win), then validated.
    pub fn from_pairs(pairs: &[(String, String)], registry: &ProtocolRegistry) -> Result<Self, Vec<ConfigError>> {
        let mut cfg = ScenarioConfig::default();
        let mut errors = Vec::new();
        for (k, v) in pairs {
            if let Err(e) = cfg.set(k, v, registry) {
                errors.push(e);
            }
        }
        errors.extend(cfg.validate(registry));
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    /// Applies one key. Values are range-checked later by [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, v: &str, registry: &ProtocolRegistry) -> Result<(), ConfigError> {
        match key {
            "protocol" => self.protocol = v.to_ascii_lowercase(),
            "nodes" => self.nodes = parse_num(key, v, "a node count")?,
            "area" => self.area = parse_area(key, v)?,
            "max_speed" => self.max_speed = parse_f64(key, v)?,
            "pause" => self.pause = parse_f64(key, v)?,
            "time" => self.sim_time = parse_secs(key, v)?,
            "seed" => self.seed = parse_num(key, v, "an unsigned integer")?,
            "flows" => self.flows = parse_num(key, v, "a flow count")?,
            "rate" => self.rate = parse_f64(key, v)?,
            "pkt_size" => self.pkt_size = parse_num(key, v, "a size in bytes")?,
            "traffic.start_min" => self.traffic_start_min = parse_secs(key, v)?,
            "traffic.start_max" => self.traffic_start_max = parse_secs(key, v)?,
            "traffic.stop_margin" => self.traffic_stop_margin = parse_secs(key, v)?,
            "radio.range" => self.radio.range = parse_f64(key, v)?,
            "radio.bandwidth" => self.radio.bandwidth = parse_f64(key, v)?,
            "radio.per_hop_loss" => self.radio.per_hop_loss = parse_f64(key, v)?,
            "radio.link_fail_detect_delay" => self.radio.link_fail_detect_delay = parse_secs(key, v)?,
            "routing.ttl" => self.routing.ttl = parse_num(key, v, "a hop count up to 255")?,
            "routing.buffer_capacity" => self.routing.buffer_capacity = parse_num(key, v, "a packet count")?,
            "routing.buffer_timeout" => self.routing.buffer_timeout = parse_secs(key, v)?,
            "check.loops" => self.check_loops = parse_bool(key, v)?,
            _ => {
                let ns = key.split_once('.').map(|(ns, _)| ns);
                if ns.is_some_and(|ns| registry.get(ns).is_some()) {
                    self.overrides.insert(key.to_string(), v.to_string());
                } else {
                    return Err(ConfigError::new(key.to_string(), "unknown key".to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, registry: &ProtocolRegistry) -> Vec<ConfigError> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: String| errors.push(ConfigError::new(field.to_string(), message));
        if registry.get(&self.protocol).is_none() {
            let known: Vec<_> = registry.names().collect();
            err(
                "protocol",
                format!("unknown protocol `{}` (known: {})", self.protocol, known.join(", ")),
            );
        }
        if self.nodes == 0 {
            err("nodes", "must be at least 1".to_string());
        }
        if !(self.max_speed >= 0.0) {
            err("max_speed", format!("must be >= 0, got {}", self.max_speed));
        }
        if !(self.pause >= 0.0) {
            err("pause", format!("must be >= 0, got {}", self.pause));
        }
        if self.sim_time == SimTime::ZERO {
            err("time", "must be > 0".to_string());
        }
        if !(self.rate > 0.0) {
            err("rate", format!("must be > 0, got {}", self.rate));
        }
        if self.pkt_size == 0 {
            err("pkt_size", "must be > 0".to_string());
        }
        if self.traffic_start_min > self.traffic_start_max {
            err("traffic.start_min", "must not exceed traffic.start_max".to_string());
        }
        if self.flows > 0 && self.traffic_start_max >= self.traffic_stop() {
            err(
                "time",
                format!(
                    "{} s leaves no traffic window after traffic.start_max ({}) and traffic.stop_margin ({})",
                    self.sim_time, self.traffic_start_max, self.traffic_stop_margin
                ),
            );
        }
        if self.routing.ttl == 0 {
            err("routing.ttl", "must be at least 1".to_string());
        }
        if self.routing.buffer_capacity == 0 {
            err("routing.buffer_capacity", "must be at least 1".to_string());
        }
        for (field, message) in self.radio.problems() {
            err(field, message);
        }
        for name in registry.names() {
            let prefix = format!("{name}.");
            if self.overrides.keys().any(|k| k.starts_with(&prefix)) {
                if let Err(es) = registry.get(name).unwrap().builder(&self.overrides) {
                    errors.extend(es);
                }
            }
        }
        errors
    }

    pub fn traffic_stop(&self) -> SimTime {
        self.sim_time.saturating_sub(self.traffic_stop_margin)
    }

    pub fn traffic_pattern(&self) -> TrafficPattern {
        TrafficPattern {
            flows: self.flows,
            rate: self.rate,
            pkt_size: self.pkt_size,
            start_min: self.traffic_start_min,
            start_max: self.traffic_start_max,
            stop_at: self.traffic_stop(),
        }
    }
}

/// Parses and validates a config file's text.
pub fn validate_config(raw: &str, registry: &ProtocolRegistry) -> Result<ScenarioConfig, Vec<ConfigError>> {
    ScenarioConfig::from_pairs(&parse_kv(raw)?, registry)
}

/// A grid of scenarios: every protocol × node count × speed × seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub protocols: Vec<String>,
    pub node_counts: Vec<usize>,
    pub speeds: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Three protocols, 60 and 80 nodes, speeds 0 to 60 in steps of 10.
    pub fn standard_grid(base: ScenarioConfig, seeds: Vec<u64>) -> Self {
        SweepSpec {
            base,
            protocols: vec!["aodv".into(), "dsr".into(), "aomdv".into()],
            node_counts: vec![60, 80],
            speeds: (0..=6).map(|i| f64::from(i) * 10.0).collect(),
            seeds,
        }
    }

    /// Scenario pairs may include `sweep.protocols`, `sweep.nodes`,
    /// `sweep.speeds` and `sweep.seeds` lists.
    pub fn from_pairs(pairs: &[(String, String)], registry: &ProtocolRegistry) -> Result<Self, Vec<ConfigError>> {
        let mut errors = Vec::new();
        let mut scenario = Vec::new();
        let mut spec = SweepSpec::standard_grid(ScenarioConfig::default(), (1..=10).collect());
        for (k, v) in pairs {
            let r = match k.as_str() {
                "sweep.protocols" => parse_list(k, v, |s| Ok(s.to_ascii_lowercase())).map(|x| spec.protocols = x),
                "sweep.nodes" => parse_list(k, v, |s| s.parse().map_err(|_| s.to_string())).map(|x| spec.node_counts = x),
                "sweep.speeds" => parse_list(k, v, |s| s.parse().map_err(|_| s.to_string())).map(|x| spec.speeds = x),
                "sweep.seeds" => parse_seeds(k, v).map(|x| spec.seeds = x),
                _ => {
                    scenario.push((k.clone(), v.clone()));
                    Ok(())
                }
            };
            if let Err(e) = r {
                errors.push(e);
            }
        }
        match ScenarioConfig::from_pairs(&scenario, registry) {
            Ok(base) => spec.base = base,
            Err(es) => errors.extend(es),
        }
        errors.extend(spec.validate(registry));
        if errors.is_empty() {
            Ok(spec)
        } else {
            Err(errors)
        }
    }

    pub fn validate(&self, registry: &ProtocolRegistry) -> Vec<ConfigError> {
        let mut errors = Vec::new();
        for p in &self.protocols {
            if registry.get(p).is_none() {
                errors.push(ConfigError::new("sweep.protocols".into(), format!("unknown protocol `{p}`")));
            }
        }
        if self.node_counts.contains(&0) {
            errors.push(ConfigError::new("sweep.nodes".into(), "node counts must be at least 1".into()));
        }
        if self.speeds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            errors.push(ConfigError::new("sweep.speeds".into(), "speeds must be finite and >= 0".into()));
        }
        for (field, list_empty) in [
            ("sweep.protocols", self.protocols.is_empty()),
            ("sweep.nodes", self.node_counts.is_empty()),
            ("sweep.speeds", self.speeds.is_empty()),
            ("sweep.seeds", self.seeds.is_empty()),
        ] {
            if list_empty {
                errors.push(ConfigError::new(field.into(), "must not be empty".into()));
            }
        }
        errors
    }

    /// Cells in output order: protocol, then nodes, then speed, then seed.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(self.len());
        for p in &self.protocols {
            for &n in &self.node_counts {
                for &s in &self.speeds {
                    for &seed in &self.seeds {
                        out.push(ScenarioConfig {
                            protocol: p.clone(),
                            nodes: n,
                            max_speed: s,
                            seed,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.protocols.len() * self.node_counts.len() * self.speeds.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_list<T>(key: &str, v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s).map_err(|bad| ConfigError::new(key.to_string(), format!("bad list item `{bad}`"))))
        .collect()
}

/// Comma-separated seeds; `a-b` expands to an inclusive range.
pub fn parse_seeds(key: &str, v: &str) -> Result<Vec<u64>, ConfigError> {
    let lists = parse_list(key, v, |s| {
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| s.to_string());
        match s.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(s.to_string());
                }
                Ok((a..=b).collect())
            }
            None => Ok(vec![num(s)?]),
        }
    })?;
    Ok(lists.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> ProtocolRegistry {
        ProtocolRegistry::default()
    }

    fn fields(errs: &[ConfigError]) -> Vec<&str> {
        errs.iter().map(|e| e.field.as_str()).collect()
    }

    #[test]
    fn empty_input_gives_defaults() {
        let cfg = validate_config("", &reg()).unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!((cfg.area.width, cfg.area.height), (500.0, 500.0));
        assert_eq!(cfg.pkt_size, 512);
        assert_eq!(cfg.sim_time, SimTime::from_secs(300));
        assert_eq!(cfg.traffic_stop(), SimTime::from_secs(295));
    }

    #[test]
    fn full_file() {
        let text = "# scenario\nprotocol = DSR\nnodes = 80  # dense\narea = 1000x400\n\
                    radio.range = 200\nmax_speed = 20\ndsr.cache_per_dst = 2\ncheck.loops = true\n";
        let cfg = validate_config(text, &reg()).unwrap();
        assert_eq!(cfg.protocol, "dsr");
        assert_eq!(cfg.nodes, 80);
        assert_eq!(cfg.area.width, 1000.0);
        assert_eq!(cfg.radio.range, 200.0);
        assert!(cfg.check_loops);
        assert_eq!(cfg.overrides.get("dsr.cache_per_dst").map(String::as_str), Some("2"));
    }

    #[test]
    fn errors_are_aggregated_with_fields() {
        let text = "pkt_size = 0\nbogus = 1\nradio.per_hop_loss = 2\nprotocol = olsr\naodv.nope = 3\nnodes = x";
        let errs = validate_config(text, &reg()).unwrap_err();
        let f = fields(&errs);
        for want in ["pkt_size", "bogus", "radio.per_hop_loss", "protocol", "aodv.nope", "nodes"] {
            assert!(f.contains(&want), "{want} missing from {f:?}");
        }
    }

    #[test]
    fn syntax_errors_name_line() {
        let errs = validate_config("nodes = 3\njust words\n", &reg()).unwrap_err();
        assert_eq!(fields(&errs), ["line 2"]);
    }

    #[test]
    fn short_run_needs_traffic_window() {
        let errs = validate_config("time = 8", &reg()).unwrap_err();
        assert_eq!(fields(&errs), ["time"]);
        assert!(validate_config("time = 8\nflows = 0", &reg()).is_ok());
    }

    #[test]
    fn sweep_grid() {
        let pairs = parse_kv("sweep.seeds = 1-3, 7\nsweep.nodes = 60\nsweep.speeds = 0,30\nsweep.protocols = aodv,dsr\ntime = 50").unwrap();
        let spec = SweepSpec::from_pairs(&pairs, &reg()).unwrap();
        assert_eq!(spec.seeds, [1, 2, 3, 7]);
        assert_eq!(spec.len(), 16);
        let cells = spec.cells();
        assert_eq!(cells.len(), 16);
        assert_eq!((cells[0].protocol.as_str(), cells[0].max_speed, cells[0].seed), ("aodv", 0.0, 1));
        assert_eq!((cells[5].protocol.as_str(), cells[5].max_speed, cells[5].seed), ("aodv", 30.0, 2));
        assert_eq!(cells[15].protocol, "dsr");
        assert!(cells.iter().all(|c| c.sim_time == SimTime::from_secs(50)));

        let grid = SweepSpec::standard_grid(ScenarioConfig::default(), vec![1]);
        assert_eq!(grid.cells().len(), 42);
    }

    #[test]
    fn sweep_errors() {
        let pairs = parse_kv("sweep.protocols = aodv,zrp\nsweep.seeds = 5-2\nsweep.speeds = fast").unwrap();
        let errs = SweepSpec::from_pairs(&pairs, &reg()).unwrap_err();
        assert_eq!(fields(&errs), ["sweep.seeds", "sweep.speeds", "sweep.protocols"]);
    }
}
