//! Packet-event trace: one line per send, receive, drop or forward.
//!
//! ```text
//! <op> <time> <node> <layer> <kind> <uid> <size> <src> <dst> <reason|->
//! s 10.250000 4 AGT DATA 17 512 4 9 -
//! d 31.000000 4 RTR DATA 18 512 4 9 NO_ROUTE
//! ```
//!
//! Broadcast destinations render as `-1`.

use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::routing::{Address, PacketKind};
use crate::sim::SimTime;
use crate::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Send,
    Recv,
    Drop,
    Forward,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Send => "s",
            Op::Recv => "r",
            Op::Drop => "d",
            Op::Forward => "f",
        }
    }
}

impl FromStr for Op {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "s" => Op::Send,
            "r" => Op::Recv,
            "d" => Op::Drop,
            "f" => Op::Forward,
            _ => return Err(()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layer {
    Agt,
    Rtr,
    Mac,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Agt => "AGT",
            Layer::Rtr => "RTR",
            Layer::Mac => "MAC",
        }
    }
}

impl FromStr for Layer {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "AGT" => Layer::Agt,
            "RTR" => Layer::Rtr,
            "MAC" => Layer::Mac,
            _ => return Err(()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DropReason {
    NoRoute,
    Ttl,
    Dup,
    RouteError,
    Loss,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::NoRoute,
        DropReason::Ttl,
        DropReason::Dup,
        DropReason::RouteError,
        DropReason::Loss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoRoute => "NO_ROUTE",
            DropReason::Ttl => "TTL",
            DropReason::Dup => "DUP",
            DropReason::RouteError => "ROUTE_ERROR",
            DropReason::Loss => "LOSS",
        }
    }
}

impl FromStr for DropReason {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        DropReason::ALL.into_iter().find(|r| r.as_str() == s).ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub op: Op,
    pub time: SimTime,
    pub node: NodeId,
    pub layer: Layer,
    pub kind: PacketKind,
    pub uid: u64,
    pub size: u32,
    pub src: NodeId,
    pub dst: Address,
    /// Present exactly on drop records.
    pub reason: Option<DropReason>,
}

impl TraceRecord {
    pub fn write_to(&self, out: &mut String) {
        let _ = write!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            self.op.as_str(),
            self.time,
            self.node,
            self.layer.as_str(),
            self.kind.as_str(),
            self.uid,
            self.size,
            self.src,
            self.dst,
            self.reason.map_or("-", DropReason::as_str)
        );
    }

    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(64);
        self.write_to(&mut s);
        s
    }

    pub fn parse(line: &str) -> Result<TraceRecord, String> {
        let mut it = line.split(' ');
        let mut field = |name: &str| it.next().ok_or_else(|| format!("missing field `{name}`"));
        let op: Op = field("op")?.parse().map_err(|_| "bad op".to_string())?;
        let time_s = field("time")?;
        let time = SimTime::parse_secs(time_s).ok_or_else(|| format!("bad time `{time_s}`"))?;
        let node = field("node")?.parse().map_err(|_| "bad node".to_string())?;
        let layer = field("layer")?.parse().map_err(|_| "bad layer".to_string())?;
        let kind = field("kind")?.parse().map_err(|_| "bad packet kind".to_string())?;
        let uid = field("uid")?.parse().map_err(|_| "bad uid".to_string())?;
        let size = field("size")?.parse().map_err(|_| "bad size".to_string())?;
        let src = field("src")?.parse().map_err(|_| "bad src".to_string())?;
        let dst = field("dst")?.parse().map_err(|_| "bad dst".to_string())?;
        let reason = match field("reason")? {
            "-" => None,
            r => Some(r.parse().map_err(|_| format!("bad reason `{r}`"))?),
        };
        if it.next().is_some() {
            return Err("trailing fields".to_string());
        }
        if (op == Op::Drop) != reason.is_some() {
            return Err("drop records carry a reason and only drop records do".to_string());
        }
        Ok(TraceRecord {
            op,
            time,
            node,
            layer,
            kind,
            uid,
            size,
            src,
            dst,
            reason,
        })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line_no}: {message}")]
    Parse { line_no: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses a whole trace. Blank lines are skipped; line numbers are 1-based.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(TraceRecord::parse(&line).map_err(|message| TraceError::Parse { line_no: i + 1, message })?);
    }
    Ok(out)
}

/// Consumer of formatted trace lines.
pub trait TraceSink: Send {
    fn line(&mut self, line: &str) -> io::Result<()>;

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Discards everything.
impl TraceSink for () {
    fn line(&mut self, _line: &str) -> io::Result<()> {
        Ok(())
    }
}

impl<T: TraceSink> TraceSink for Option<T> {
    fn line(&mut self, line: &str) -> io::Result<()> {
        match self {
            Some(s) => s.line(line),
            None => Ok(()),
        }
    }

    fn finish(&mut self) -> io::Result<()> {
        match self {
            Some(s) => s.finish(),
            None => Ok(()),
        }
    }
}

/// Feeds both sinks.
impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn line(&mut self, line: &str) -> io::Result<()> {
        self.0.line(line)?;
        self.1.line(line)
    }

    fn finish(&mut self) -> io::Result<()> {
        self.0.finish()?;
        self.1.finish()
    }
}

impl<T: TraceSink + ?Sized> TraceSink for &mut T {
    fn line(&mut self, line: &str) -> io::Result<()> {
        (**self).line(line)
    }

    fn finish(&mut self) -> io::Result<()> {
        (**self).finish()
    }
}

pub struct TraceWriter<W: Write + Send> {
    out: W,
}

impl<W: Write + Send> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }
}

impl<W: Write + Send> TraceSink for TraceWriter<W> {
    fn line(&mut self, line: &str) -> io::Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")
    }

    fn finish(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// SHA-256 over the exact bytes a [`TraceWriter`] would produce.
#[derive(Default)]
pub struct TraceHasher {
    hasher: Sha256,
}

impl TraceHasher {
    pub fn new() -> Self {
        TraceHasher::default()
    }

    pub fn hex_digest(&self) -> String {
        self.hasher.clone().finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TraceSink for TraceHasher {
    fn line(&mut self, line: &str) -> io::Result<()> {
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        Ok(())
    }
}

#[derive(Default)]
pub struct LineCollector {
    pub lines: Vec<String>,
}

impl TraceSink for LineCollector {
    fn line(&mut self, line: &str) -> io::Result<()> {
        self.lines.push(line.to_owned());
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
