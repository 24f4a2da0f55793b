//! Trace CSV files, run reports and trace summaries.

use std::fmt::Write as _;
use std::path::Path;

use super::run::{RunReport, TraceRow};
use super::HarnessError;
use crate::geometry::Vec3;

pub const TRACE_HEADER: &str = "t,fx,fy,fz,tx,ty,tz,contacts,rate_hz";

/// Renders rows as CSV. Floats use the shortest round-trip representation,
/// so equal rows always produce equal bytes.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.force.x, r.force.y, r.force.z, r.torque.x, r.torque.y, r.torque.z, r.contacts, r.rate_hz
        );
    }
    out
}

pub fn write_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    std::fs::write(path, trace_csv(rows)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(HarnessError::Parse {
                line: 1,
                message: format!("expected header {TRACE_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| HarnessError::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", fields.len())));
        }
        let f = |j: usize| {
            fields[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("field {} is not a number: {:?}", j + 1, fields[j])))
        };
        rows.push(TraceRow {
            t: f(0)?,
            force: Vec3::new(f(1)?, f(2)?, f(3)?),
            torque: Vec3::new(f(4)?, f(5)?, f(6)?),
            contacts: fields[7]
                .trim()
                .parse()
                .map_err(|_| bad(format!("contacts is not a count: {:?}", fields[7])))?,
            rate_hz: f(8)?,
        });
    }
    Ok(rows)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace(&text)
}

/// Maximal runs of consecutive rows with a nonzero force or torque, as
/// `(first_t, last_t)` pairs.
pub fn nonzero_intervals(rows: &[TraceRow]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for r in rows {
        let active = r.force != Vec3::zeros() || r.torque != Vec3::zeros();
        open = match (open, active) {
            (None, true) => Some((r.t, r.t)),
            (Some((a, _)), true) => Some((a, r.t)),
            (Some(iv), false) => {
                out.push(iv);
                None
            }
            (None, false) => None,
        };
    }
    out.extend(open);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub rows: usize,
    pub duration: f64,
    pub peak_force: f64,
    pub peak_torque: f64,
    pub mean_force: f64,
    pub contact_rows: usize,
    pub max_contacts: usize,
    pub intervals: Vec<(f64, f64)>,
}

pub fn summarize(rows: &[TraceRow]) -> TraceSummary {
    let forces: Vec<f64> = rows.iter().map(|r| r.force.norm()).collect();
    TraceSummary {
        rows: rows.len(),
        duration: match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        },
        peak_force: forces.iter().copied().fold(0.0, f64::max),
        peak_torque: rows.iter().map(|r| r.torque.norm()).fold(0.0, f64::max),
        mean_force: if rows.is_empty() {
            0.0
        } else {
            forces.iter().sum::<f64>() / rows.len() as f64
        },
        contact_rows: rows.iter().filter(|r| r.contacts > 0).count(),
        max_contacts: rows.iter().map(|r| r.contacts).max().unwrap_or(0),
        intervals: nonzero_intervals(rows),
    }
}

impl std::fmt::Display for TraceSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rows:             {}", self.rows)?;
        writeln!(f, "duration:         {:.4} s", self.duration)?;
        writeln!(f, "peak force:       {:.4} N", self.peak_force)?;
        writeln!(f, "peak torque:      {:.4} N·m", self.peak_torque)?;
        writeln!(f, "mean force:       {:.4} N", self.mean_force)?;
        writeln!(f, "rows in contact:  {}", self.contact_rows)?;
        writeln!(f, "max contacts:     {}", self.max_contacts)?;
        writeln!(f, "nonzero intervals: {}", self.intervals.len())?;
        for (a, b) in &self.intervals {
            writeln!(f, "  {a:.4} .. {b:.4} s")?;
        }
        Ok(())
    }
}

/// Median and maximum of a non-empty slice.
fn median_max(values: &[u64]) -> (u64, u64) {
    let mut v = values.to_vec();
    v.sort_unstable();
    (v[v.len() / 2], v[v.len() - 1])
}

/// Step rates in Hz from per-step durations: `(median, min)`.
pub fn step_rates(step_times_ns: &[u64]) -> Option<(f64, f64)> {
    if step_times_ns.is_empty() {
        return None;
    }
    let (median_ns, max_ns) = median_max(step_times_ns);
    let hz = |ns: u64| 1e9 / (ns.max(1) as f64);
    Some((hz(median_ns), hz(max_ns)))
}

pub fn report_metrics(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "transport: {}", report.transport);
    let _ = writeln!(out, "configured rate: {} Hz", report.rate_hz);
    for (k, s) in report.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "\nstep {} {}: {}",
            k,
            s.name,
            if s.converged { "CONVERGED" } else { "NOT CONVERGED" }
        );
        let _ = writeln!(out, "  position error: {:.6} m", s.position_error);
        let _ = writeln!(out, "  angle error: {:.6} rad", s.angle_error);
        let _ = writeln!(out, "  render steps: {}", s.rows.len());
        let _ = writeln!(out, "  surface voxels: {}", s.surface_voxels);
        let _ = writeln!(out, "  pointshell points: {}", s.pointshell_size);
        let _ = writeln!(out, "  deep penetration steps: {}", s.deep_penetration_steps);
        if let Some((median, min)) = step_rates(&s.step_times_ns) {
            let _ = writeln!(out, "  step rate: median {median:.0} Hz, min {min:.0} Hz");
        }
        if report.transport == super::run::TransportKind::Udp {
            let _ = writeln!(
                out,
                "  network load: {:.3} Mb/s measured over the unpaced run ({} datagrams in, {} out)",
                s.link.measured_load / 1e6,
                s.link.packets_received,
                s.link.packets_sent
            );
        }
    }
    if report.transport == super::run::TransportKind::Udp {
        let _ = writeln!(
            out,
            "\nnominal network load at the configured rate: {:.3} Mb/s",
            report.nominal_load_bps() / 1e6
        );
    }
    out
}
