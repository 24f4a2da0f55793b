//! Scenario runner: parses assembly scenarios, cooks each step's static
//! voxmap, drives the render loop along scripted trajectories and writes
//! force traces and reports.

mod bench;
mod run;
mod scenario;
mod trace;

pub use bench::{
    bench_plate, bench_tool, calibrate_spacing, calibrate_voxel_size, run_bench, BenchConfig, BenchReport,
    REFERENCE_POINTS, REFERENCE_VOXELS,
};
pub use run::{run_assembly, run_step, RunReport, StepResult, TraceRow, TransportKind, LINK_TIMEOUT};
pub use scenario::{
    load_scenario, parse_scenario, NetConfig, Part, Scenario, ScenarioConfig, Step, Trajectory, DEFAULT_ANG_TOL,
    DEFAULT_RATE_HZ, DEFAULT_VOXEL_SIZE,
};
pub use trace::{
    nonzero_intervals, parse_trace, read_trace, report_metrics, step_rates, summarize, trace_csv, write_trace,
    TraceSummary, TRACE_HEADER,
};

use thiserror::Error;

use crate::device::DeviceError;
use crate::geometry::GeometryError;
use crate::protocol::ProtocolError;
use crate::volumetric::VolumetricError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown directive {directive:?}")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: step references unknown part {name:?}")]
    MissingPart { line: usize, name: String },
    #[error("line {line}: waypoint time {t} does not follow {previous}")]
    NonMonotoneTime { line: usize, t: f64, previous: f64 },
    #[error("line {line}: {source}")]
    Mesh {
        line: usize,
        #[source]
        source: GeometryError,
    },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no datagram from peer within {LINK_TIMEOUT:?}")]
    LinkTimeout,
    #[error(transparent)]
    Volumetric(#[from] VolumetricError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
