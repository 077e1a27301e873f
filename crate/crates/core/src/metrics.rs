//! Delivery fraction, throughput, end-to-end delay and routing overhead.
//!
//! Two independent paths produce the same [`Counts`]: the network bumps
//! counters as events happen, and [`Recount`] rebuilds them from the text
//! trace alone.

use std::collections::{HashMap, HashSet};
use std::io;

use crate::routing::PacketKind;
use crate::sim::SimTime;
use crate::trace::{Layer, Op, TraceRecord, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no data packets were sent")]
    NoTraffic,
    #[error("no data packets were delivered")]
    NoDeliveries,
}

/// `prec / psnd * 100`.
pub fn pdf(psnd: u64, prec: u64) -> Result<f64, MetricError> {
    if psnd == 0 {
        return Err(MetricError::NoTraffic);
    }
    Ok(prec as f64 / psnd as f64 * 100.0)
}

/// Received over sent packets. Defined through [`pdf`] so that
/// `throughput_ratio == pdf / 100` holds bit-for-bit.
pub fn throughput_ratio(psnd: u64, prec: u64) -> Result<f64, MetricError> {
    pdf(psnd, prec).map(|p| p / 100.0)
}

/// Conventional goodput in bit/s.
pub fn throughput_bps(prec: u64, pkt_size: u32, sim_time: SimTime) -> f64 {
    let secs = sim_time.as_secs_f64();
    if secs <= 0.0 {
        return 0.0;
    }
    (prec as f64 * f64::from(pkt_size) * 8.0) / secs
}

/// Mean of `tr - ts` over delivered packets, in seconds.
pub fn avg_e2e_delay(deliveries: &[(SimTime, SimTime)]) -> Result<f64, MetricError> {
    let total: u128 = deliveries
        .iter()
        .map(|(ts, tr)| u128::from(tr.saturating_sub(*ts).as_micros()))
        .sum();
    mean_delay(total, deliveries.len() as u64)
}

fn mean_delay(total_us: u128, n: u64) -> Result<f64, MetricError> {
    if n == 0 {
        return Err(MetricError::NoDeliveries);
    }
    Ok(total_us as f64 / n as f64 / 1e6)
}

/// Control packets and bytes put on the air by routing layers: every
/// RTR-layer send or forward of an RREQ/RREP/RERR.
pub fn routing_overhead<'a>(trace: impl IntoIterator<Item = &'a TraceRecord>) -> (u64, u64) {
    trace
        .into_iter()
        .filter(|r| is_overhead(r))
        .fold((0, 0), |(n, b), r| (n + 1, b + u64::from(r.size)))
}

fn is_overhead(r: &TraceRecord) -> bool {
    r.layer == Layer::Rtr && matches!(r.op, Op::Send | Op::Forward) && r.kind.is_control()
}

/// Raw counters from which every metric is derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub psnd: u64,
    pub prec: u64,
    /// Sum of per-packet delays over the `prec` delivered packets.
    pub delay_sum_us: u128,
    pub overhead_pkts: u64,
    pub overhead_bytes: u64,
}

impl Counts {
    pub fn pdf(&self) -> Option<f64> {
        pdf(self.psnd, self.prec).ok()
    }

    pub fn throughput_ratio(&self) -> Option<f64> {
        throughput_ratio(self.psnd, self.prec).ok()
    }

    pub fn avg_e2e_delay(&self) -> Option<f64> {
        mean_delay(self.delay_sum_us, self.prec).ok()
    }
}

/// Rebuilds [`Counts`] from trace lines. Usable as a streaming sink so a
/// full run never has to keep its trace in memory.
#[derive(Debug, Default)]
pub struct Recount {
    counts: Counts,
    sent_at: HashMap<u64, SimTime>,
    received: HashSet<u64>,
    /// AGT receptions with no prior AGT send; always zero in a sound trace.
    pub orphan_receipts: u64,
    /// Lines that failed to parse.
    pub parse_errors: u64,
    last_time: SimTime,
    /// Records whose time went backwards.
    pub out_of_order: u64,
}

impl Recount {
    pub fn new() -> Self {
        Recount::default()
    }

    pub fn record(&mut self, r: &TraceRecord) {
        if r.time < self.last_time {
            self.out_of_order += 1;
        }
        self.last_time = r.time;
        if is_overhead(r) {
            self.counts.overhead_pkts += 1;
            self.counts.overhead_bytes += u64::from(r.size);
        }
        if r.layer != Layer::Agt || r.kind != PacketKind::Data {
            return;
        }
        match r.op {
            Op::Send => {
                self.counts.psnd += 1;
                self.sent_at.insert(r.uid, r.time);
            }
            Op::Recv => {
                let Some(ts) = self.sent_at.get(&r.uid).copied() else {
                    self.orphan_receipts += 1;
                    return;
                };
                if self.received.insert(r.uid) {
                    self.counts.prec += 1;
                    self.counts.delay_sum_us += u128::from(r.time.saturating_sub(ts).as_micros());
                }
            }
            _ => {}
        }
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> Self {
        let mut rc = Recount::new();
        for r in records {
            rc.record(r);
        }
        rc
    }
}

impl TraceSink for Recount {
    fn line(&mut self, line: &str) -> io::Result<()> {
        match TraceRecord::parse(line) {
            Ok(r) => self.record(&r),
            Err(_) => self.parse_errors += 1,
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "protocol,nodes,max_speed,seed,psnd,prec,pdf,throughput_ratio,throughput_bps,avg_e2e_delay_s,routing_overhead_pkts,routing_overhead_bytes";

/// One result row. Metrics that are undefined for a run (no traffic, no
/// deliveries) are `None` and render as empty CSV fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub protocol: String,
    pub nodes: usize,
    pub max_speed: f64,
    pub seed: u64,
    pub psnd: u64,
    pub prec: u64,
    pub pdf: Option<f64>,
    pub throughput_ratio: Option<f64>,
    pub throughput_bps: f64,
    pub avg_e2e_delay_s: Option<f64>,
    pub routing_overhead_pkts: u64,
    pub routing_overhead_bytes: u64,
}

impl MetricsRow {
    pub fn from_counts(protocol: &str, nodes: usize, max_speed: f64, seed: u64, c: &Counts, pkt_size: u32, sim_time: SimTime) -> Self {
        MetricsRow {
            protocol: protocol.to_string(),
            nodes,
            max_speed,
            seed,
            psnd: c.psnd,
            prec: c.prec,
            pdf: c.pdf(),
            throughput_ratio: c.throughput_ratio(),
            throughput_bps: throughput_bps(c.prec, pkt_size, sim_time),
            avg_e2e_delay_s: c.avg_e2e_delay(),
            routing_overhead_pkts: c.overhead_pkts,
            routing_overhead_bytes: c.overhead_bytes,
        }
    }

    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.nodes,
            self.max_speed,
            self.seed,
            self.psnd,
            self.prec,
            opt(self.pdf),
            opt(self.throughput_ratio),
            self.throughput_bps,
            opt(self.avg_e2e_delay_s),
            self.routing_overhead_pkts,
            self.routing_overhead_bytes
        )
    }

    pub fn from_csv(line: &str) -> Result<MetricsRow, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(format!("expected 12 fields, got {}", f.len()));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {name} `{s}`"))
        }
        fn opt(s: &str, name: &str) -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        }
        Ok(MetricsRow {
            protocol: f[0].to_string(),
            nodes: num(f[1], "nodes")?,
            max_speed: num(f[2], "max_speed")?,
            seed: num(f[3], "seed")?,
            psnd: num(f[4], "psnd")?,
            prec: num(f[5], "prec")?,
            pdf: opt(f[6], "pdf")?,
            throughput_ratio: opt(f[7], "throughput_ratio")?,
            throughput_bps: num(f[8], "throughput_bps")?,
            avg_e2e_delay_s: opt(f[9], "avg_e2e_delay_s")?,
            routing_overhead_pkts: num(f[10], "routing_overhead_pkts")?,
            routing_overhead_bytes: num(f[11], "routing_overhead_bytes")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::Address;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(pdf(100, 95).unwrap(), 95.0);
        assert_eq!(pdf(37, 37).unwrap(), 100.0);
        assert_eq!(pdf(0, 0), Err(MetricError::NoTraffic));
    }

    #[test]
    fn throughput_ratio_is_pdf_over_100() {
        assert!((throughput_ratio(100, 95).unwrap() - 0.95).abs() < 1e-15);
        for (s, r) in [(3, 1), (7, 5), (11600, 11013), (1, 0)] {
            assert_eq!(throughput_ratio(s, r).unwrap(), pdf(s, r).unwrap() / 100.0);
        }
        assert_eq!(throughput_ratio(0, 0), Err(MetricError::NoTraffic));
    }

    #[test]
    fn delay_examples() {
        assert_eq!(avg_e2e_delay(&[(t(2.0), t(2.5))]).unwrap(), 0.5);
        assert_eq!(avg_e2e_delay(&[(t(0.0), t(1.0)), (t(0.0), t(3.0))]).unwrap(), 2.0);
        assert_eq!(avg_e2e_delay(&[]), Err(MetricError::NoDeliveries));
    }

    #[test]
    fn conventional_throughput() {
        assert_eq!(throughput_bps(100, 512, SimTime::from_secs(300)), 100.0 * 4096.0 / 300.0);
    }

    fn record(op: Op, t_us: u64, layer: Layer, kind: PacketKind, uid: u64) -> TraceRecord {
        TraceRecord {
            op,
            time: SimTime::from_micros(t_us),
            node: 0,
            layer,
            kind,
            uid,
            size: 48,
            src: 0,
            dst: Address::Broadcast,
            reason: None,
        }
    }

    #[test]
    fn recount_counts_unique_receipts_and_overhead() {
        let recs = vec![
            record(Op::Send, 0, Layer::Agt, PacketKind::Data, 1),
            record(Op::Send, 10, Layer::Rtr, PacketKind::Rreq, 2),
            record(Op::Forward, 20, Layer::Rtr, PacketKind::Rreq, 2),
            record(Op::Send, 20, Layer::Mac, PacketKind::Rreq, 2),
            record(Op::Forward, 30, Layer::Rtr, PacketKind::Data, 1),
            record(Op::Recv, 1_000, Layer::Agt, PacketKind::Data, 1),
            record(Op::Recv, 2_000, Layer::Agt, PacketKind::Data, 1),
            record(Op::Send, 3_000, Layer::Agt, PacketKind::Data, 3),
        ];
        let c = Recount::from_records(&recs).counts();
        assert_eq!(c.psnd, 2);
        assert_eq!(c.prec, 1);
        assert_eq!(c.delay_sum_us, 1_000);
        assert_eq!((c.overhead_pkts, c.overhead_bytes), (2, 96));
        assert_eq!(routing_overhead(&recs), (2, 96));
        assert_eq!(c.pdf(), Some(50.0));
    }

    #[test]
    fn csv_round_trip_and_absent_fields() {
        let c = Counts::default();
        let row = MetricsRow::from_counts("aodv", 1, 0.0, 1, &c, 512, SimTime::from_secs(300));
        assert_eq!(row.pdf, None);
        let line = row.to_csv();
        assert_eq!(line, "aodv,1,0,1,0,0,,,0,,0,0");
        assert_eq!(MetricsRow::from_csv(&line).unwrap(), row);

        let c = Counts {
            psnd: 3,
            prec: 2,
            delay_sum_us: 7,
            overhead_pkts: 4,
            overhead_bytes: 100,
        };
        let row = MetricsRow::from_counts("dsr", 60, 10.0, 4, &c, 512, SimTime::from_secs(300));
        assert_eq!(MetricsRow::from_csv(&row.to_csv()).unwrap(), row);
        assert_eq!(CSV_HEADER.split(',').count(), 12);
    }
}
