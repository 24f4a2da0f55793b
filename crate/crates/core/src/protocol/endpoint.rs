//! Rate-paced publisher and subscriber loops with shared link statistics.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use super::transport::{DatagramReceiver, DatagramSender, UdpReceiver, UdpSender};
use super::wire::{decode, encode_into, Packet, PacketHeader};
use super::ProtocolError;

/// Snapshot of link counters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkStats {
    pub packets_sent: u64,
    pub packets_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Sequence gaps seen by the receiver.
    pub drops_detected: u64,
    /// Datagrams that failed to decode.
    pub decode_errors: u64,
    pub elapsed: Duration,
    /// Packets per second (sent if anything was sent, otherwise received).
    pub measured_rate: f64,
    /// Bits per second over both directions.
    pub measured_load: f64,
}

/// Link counters shared between an endpoint thread and observers.
#[derive(Debug, Default)]
pub struct SharedLinkStats {
    packets_sent: AtomicU64,
    packets_received: AtomicU64,
    bytes_sent: AtomicU64,
    bytes_received: AtomicU64,
    drops_detected: AtomicU64,
    decode_errors: AtomicU64,
    started: OnceLock<Instant>,
    /// Elapsed nanoseconds at stop, or `u64::MAX` while running.
    stopped_ns: AtomicU64,
}

impl SharedLinkStats {
    pub fn new() -> Self {
        Self {
            stopped_ns: AtomicU64::new(u64::MAX),
            ..Self::default()
        }
    }

    /// Marks the start of the measurement window (first call wins).
    pub fn start(&self) -> Instant {
        *self.started.get_or_init(Instant::now)
    }

    /// Freezes the measurement window (first call wins).
    pub fn stop(&self) {
        if let Some(start) = self.started.get() {
            let ns = start.elapsed().as_nanos() as u64;
            let _ = self
                .stopped_ns
                .compare_exchange(u64::MAX, ns, Ordering::AcqRel, Ordering::Acquire);
        }
    }

    pub fn record_sent(&self, bytes: usize) {
        self.packets_sent.fetch_add(1, Ordering::Relaxed);
        self.bytes_sent.fetch_add(bytes as u64, Ordering::Relaxed);
    }

    pub fn record_received(&self, bytes: usize) {
        self.packets_received.fetch_add(1, Ordering::Relaxed);
        self.bytes_received.fetch_add(bytes as u64, Ordering::Relaxed);
    }

    pub fn record_drops(&self, n: u64) {
        self.drops_detected.fetch_add(n, Ordering::Relaxed);
    }

    pub fn record_decode_error(&self) {
        self.decode_errors.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LinkStats {
        let elapsed = match (self.started.get(), self.stopped_ns.load(Ordering::Acquire)) {
            (None, _) => Duration::ZERO,
            (Some(start), u64::MAX) => start.elapsed(),
            (Some(_), ns) => Duration::from_nanos(ns),
        };
        let packets_sent = self.packets_sent.load(Ordering::Relaxed);
        let packets_received = self.packets_received.load(Ordering::Relaxed);
        let bytes_sent = self.bytes_sent.load(Ordering::Relaxed);
        let bytes_received = self.bytes_received.load(Ordering::Relaxed);
        let secs = elapsed.as_secs_f64();
        let per_sec = |x: f64| if secs > 0.0 { x / secs } else { 0.0 };
        let packets = if packets_sent > 0 {
            packets_sent
        } else {
            packets_received
        };
        LinkStats {
            packets_sent,
            packets_received,
            bytes_sent,
            bytes_received,
            drops_detected: self.drops_detected.load(Ordering::Relaxed),
            decode_errors: self.decode_errors.load(Ordering::Relaxed),
            elapsed,
            measured_rate: per_sec(packets as f64),
            measured_load: per_sec(8.0 * (bytes_sent + bytes_received) as f64),
        }
    }
}

/// Counts missing sequence numbers. Reordered or repeated packets are
/// ignored rather than counted.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeqTracker {
    last: Option<u32>,
    drops: u64,
}

impl SeqTracker {
    /// Records `seq` and returns the number of packets skipped since the
    /// previous one. Returns `None` for stale (old or duplicate) packets.
    pub fn observe(&mut self, seq: u32) -> Option<u64> {
        let gap = match self.last {
            None => 0,
            Some(last) => {
                let delta = seq.wrapping_sub(last);
                if delta == 0 || delta > u32::MAX / 2 {
                    return None;
                }
                u64::from(delta - 1)
            }
        };
        self.last = Some(seq);
        self.drops += gap;
        Some(gap)
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }
}

/// Nominal bit rate of a set of periodic flows `(rate_hz, datagram_bytes)`.
pub fn nominal_load_bps(flows: &[(f64, usize)]) -> f64 {
    flows.iter().map(|&(rate, len)| rate * 8.0 * len as f64).sum()
}

fn sleep_until(deadline: Instant, stop: &AtomicBool) {
    const SPIN: Duration = Duration::from_micros(300);
    loop {
        let now = Instant::now();
        if now >= deadline || stop.load(Ordering::Relaxed) {
            return;
        }
        let left = deadline - now;
        if left > SPIN {
            std::thread::sleep(left - SPIN);
        } else {
            std::thread::yield_now();
        }
    }
}

/// Publisher pacing and lifetime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishSchedule {
    pub rate_hz: f64,
    /// Stop after this long; `None` runs until the stop flag is set.
    pub duration: Option<Duration>,
}

/// Sends `source(seq)` at absolute deadlines `start + k / rate_hz` until
/// `stop` is set or the schedule's duration is used up. Sequence numbers
/// start at 0; timestamps are microseconds since start.
pub fn run_publisher<S, F>(
    tx: &mut S,
    schedule: PublishSchedule,
    stop: &AtomicBool,
    stats: &SharedLinkStats,
    mut source: F,
) -> Result<LinkStats, ProtocolError>
where
    S: DatagramSender + ?Sized,
    F: FnMut(u32) -> Packet,
{
    if !(schedule.rate_hz.is_finite() && schedule.rate_hz > 0.0) {
        return Err(ProtocolError::InvalidRate(schedule.rate_hz));
    }
    let period = Duration::from_secs_f64(1.0 / schedule.rate_hz);
    let start = stats.start();
    let mut buf = Vec::new();
    let mut k: u32 = 0;
    let result = loop {
        let deadline = start + period * k;
        if let Some(d) = schedule.duration {
            if deadline >= start + d {
                sleep_until(start + d, stop);
                break Ok(());
            }
        }
        sleep_until(deadline, stop);
        if stop.load(Ordering::Relaxed) {
            break Ok(());
        }
        let ts = start.elapsed().as_micros() as u64;
        if let Err(e) = encode_into(&mut buf, &source(k), k, ts) {
            break Err(e);
        }
        match tx.send(&buf) {
            Ok(()) => stats.record_sent(buf.len()),
            Err(e) => break Err(e),
        }
        k = k.wrapping_add(1);
    };
    stats.stop();
    result.map(|_| stats.snapshot())
}

/// Receives until `stop` is set, decoding each datagram and handing it to
/// `sink`. Undecodable datagrams are counted and skipped; stale ones (older
/// sequence numbers) are dropped.
pub fn run_subscriber<R, F>(
    rx: &mut R,
    stop: &AtomicBool,
    stats: &SharedLinkStats,
    mut sink: F,
) -> Result<LinkStats, ProtocolError>
where
    R: DatagramReceiver + ?Sized,
    F: FnMut(&PacketHeader, &Packet),
{
    stats.start();
    let mut tracker = SeqTracker::default();
    let result = loop {
        if stop.load(Ordering::Relaxed) {
            break Ok(());
        }
        let datagram = match rx.recv_timeout(Duration::from_millis(5)) {
            Ok(Some(d)) => d,
            Ok(None) => continue,
            Err(e) => break Err(e),
        };
        stats.record_received(datagram.len());
        match decode(&datagram) {
            Ok((header, packet)) => {
                if let Some(gap) = tracker.observe(header.seq) {
                    stats.record_drops(gap);
                    sink(&header, &packet);
                }
            }
            Err(e) => {
                log::debug!("discarding datagram: {e}");
                stats.record_decode_error();
            }
        }
    };
    stats.stop();
    result.map(|_| stats.snapshot())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Publisher,
    Subscriber,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointConfig {
    pub role: Role,
    pub bind: SocketAddr,
    /// Destination for publishers.
    pub peer: Option<SocketAddr>,
    pub rate_hz: f64,
    pub duration: Option<Duration>,
}

/// Data side of a UDP endpoint.
pub enum EndpointIo<'a> {
    Source(Box<dyn FnMut(u32) -> Packet + 'a>),
    Sink(Box<dyn FnMut(&PacketHeader, &Packet) + 'a>),
}

/// Binds a UDP socket for `cfg` and runs the matching loop. Bind failures
/// and role/io mismatches surface before anything is sent.
pub fn run_endpoint(
    cfg: &EndpointConfig,
    stop: &AtomicBool,
    stats: &SharedLinkStats,
    io: EndpointIo<'_>,
) -> Result<LinkStats, ProtocolError> {
    match (cfg.role, io) {
        (Role::Publisher, EndpointIo::Source(source)) => {
            let peer = cfg.peer.ok_or(ProtocolError::MissingPeer)?;
            let mut tx = UdpSender::bind(cfg.bind, peer)?;
            let schedule = PublishSchedule {
                rate_hz: cfg.rate_hz,
                duration: cfg.duration,
            };
            run_publisher(&mut tx, schedule, stop, stats, source)
        }
        (Role::Subscriber, EndpointIo::Sink(sink)) => {
            let mut rx = UdpReceiver::bind(cfg.bind)?;
            run_subscriber(&mut rx, stop, stats, sink)
        }
        _ => Err(ProtocolError::RoleMismatch),
    }
}
