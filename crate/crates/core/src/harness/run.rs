//! Scenario execution.
//!
//! Each step runs three threads: a device thread that plays the scripted
//! trajectory through the simulated device, the render loop, and a trace
//! sink. Device and render exchange Pose and Wrench datagrams over the
//! selected transport in lockstep (one pose in flight), so the trace depends
//! only on the scenario and not on scheduling. Trace rows go to the sink over
//! an unbounded channel and never block the render loop.

use std::net::SocketAddr;
use std::sync::mpsc;
use std::time::Duration;

use super::scenario::{Scenario, Step};
use super::HarnessError;
use crate::device::SimulatedDevice;
use crate::geometry::{RigidPose, Vec3};
use crate::protocol::{
    decode, encode_into, shared_channel, DatagramReceiver, DatagramSender, LinkStats, Packet, SharedLinkStats,
    UdpReceiver, UdpSender, POSE_DATAGRAM_LEN, WRENCH_DATAGRAM_LEN,
};
use crate::volumetric::{PointShellBuilder, VoxMap};
use crate::vps::{Renderer, ToolState, Wrench};

/// How long either side waits for its peer before giving up.
pub const LINK_TIMEOUT: Duration = Duration::from_secs(5);

const STATUS_DONE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    Udp,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(Self::InProcess),
            "udp" => Ok(Self::Udp),
            _ => Err(format!("unknown transport {s:?} (expected inproc or udp)")),
        }
    }
}

impl std::fmt::Display for TransportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InProcess => "inproc",
            Self::Udp => "udp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub force: Vec3,
    pub torque: Vec3,
    pub contacts: usize,
    pub rate_hz: f64,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub name: String,
    pub rows: Vec<TraceRow>,
    /// Wrenches as decoded by the device side, one per trace row.
    pub delivered: Vec<Wrench>,
    pub final_pose: RigidPose,
    pub target: RigidPose,
    pub position_error: f64,
    pub angle_error: f64,
    pub converged: bool,
    pub deep_penetration_steps: usize,
    pub surface_voxels: usize,
    pub pointshell_size: usize,
    /// Wall-clock duration of each render step, ns.
    pub step_times_ns: Vec<u64>,
    /// Render-side link counters.
    pub link: LinkStats,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub transport: TransportKind,
    pub rate_hz: f64,
    pub steps: Vec<StepResult>,
}

impl RunReport {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    /// Bit rate of the pose and wrench streams at the configured rate.
    pub fn nominal_load_bps(&self) -> f64 {
        crate::protocol::nominal_load_bps(&[(self.rate_hz, POSE_DATAGRAM_LEN), (self.rate_hz, WRENCH_DATAGRAM_LEN)])
    }
}

type Link = (Box<dyn DatagramSender>, Box<dyn DatagramReceiver>);

/// Device-side and render-side transport halves.
fn open_links(scenario: &Scenario, transport: TransportKind) -> Result<(Link, Link), HarnessError> {
    let net = &scenario.config.net;
    match transport {
        TransportKind::InProcess => {
            let (pose_tx, pose_rx) = shared_channel(net.capacity);
            let (wrench_tx, wrench_rx) = shared_channel(net.capacity);
            Ok((
                (Box::new(pose_tx), Box::new(wrench_rx)),
                (Box::new(wrench_tx), Box::new(pose_rx)),
            ))
        }
        TransportKind::Udp => {
            let render_rx = UdpReceiver::bind(net.render_addr)?;
            let device_rx = UdpReceiver::bind(net.device_addr)?;
            let local = |a: SocketAddr| SocketAddr::new(a.ip(), 0);
            let device_tx = UdpSender::bind(local(net.device_addr), render_rx.local_addr()?)?;
            let render_tx = UdpSender::bind(local(net.render_addr), device_rx.local_addr()?)?;
            Ok((
                (Box::new(device_tx), Box::new(device_rx)),
                (Box::new(render_tx), Box::new(render_rx)),
            ))
        }
    }
}

pub fn run_assembly(scenario: &Scenario, transport: TransportKind) -> Result<RunReport, HarnessError> {
    let mut steps = Vec::with_capacity(scenario.steps.len());
    for k in 0..scenario.steps.len() {
        steps.push(run_step(scenario, k, transport)?);
    }
    Ok(RunReport {
        transport,
        rate_hz: scenario.config.rate_hz,
        steps,
    })
}

/// Runs step `k` against everything mounted before it.
pub fn run_step(scenario: &Scenario, k: usize, transport: TransportKind) -> Result<StepResult, HarnessError> {
    let step = &scenario.steps[k];
    let cfg = &scenario.config;
    let voxmap = scenario.step_voxmap(k)?;
    let shell = PointShellBuilder::new(cfg.spacing).build(&scenario.parts[step.active_part].mesh)?;
    log::info!(
        "step {} ({}): {} surface voxels, {} shell points",
        k,
        step.name,
        voxmap.surface_count(),
        shell.len()
    );
    let (device_link, render_link) = open_links(scenario, transport)?;
    let device = SimulatedDevice {
        geometry: cfg.handle,
        limits: cfg.limits,
    };
    let times = step.trajectory.sample_times(1.0 / cfg.rate_hz);
    let render_stats = SharedLinkStats::new();

    let (row_tx, row_rx) = mpsc::channel::<TraceRow>();
    let outcome = std::thread::scope(|scope| {
        let sink = scope.spawn(move || row_rx.into_iter().collect::<Vec<_>>());
        let device_thread = scope.spawn(|| device_loop(device_link, &device, step, &times));
        let render = render_loop(
            render_link,
            scenario,
            &voxmap,
            &shell,
            step,
            &times,
            row_tx,
            &render_stats,
        );
        render_stats.stop();
        let delivered = device_thread.join().expect("device thread panicked");
        let rows = sink.join().expect("trace sink panicked");
        (render, delivered, rows)
    });
    let (render, delivered, rows) = outcome;
    let render = render?;
    let delivered = delivered?;

    let final_pose = render.state.pose;
    let position_error = (final_pose.position() - step.target.position()).norm();
    let angle_error = final_pose.angle_to(&step.target);
    let converged = position_error <= cfg.pos_tol && angle_error <= cfg.ang_tol;
    if render.deep_steps > 0 {
        log::warn!("step {}: {} steps with deep penetration", step.name, render.deep_steps);
    }
    Ok(StepResult {
        name: step.name.clone(),
        rows,
        delivered,
        final_pose,
        target: step.target,
        position_error,
        angle_error,
        converged,
        deep_penetration_steps: render.deep_steps,
        surface_voxels: voxmap.surface_count(),
        pointshell_size: shell.len(),
        step_times_ns: render.step_times_ns,
        link: render_stats.snapshot(),
    })
}

fn recv_decoded(
    rx: &mut dyn DatagramReceiver,
    stats: Option<&SharedLinkStats>,
) -> Result<(crate::protocol::PacketHeader, Packet), HarnessError> {
    loop {
        let bytes = rx.recv_timeout(LINK_TIMEOUT)?.ok_or(HarnessError::LinkTimeout)?;
        if let Some(s) = stats {
            s.record_received(bytes.len());
        }
        match decode(&bytes) {
            Ok(decoded) => return Ok(decoded),
            Err(e) => {
                log::warn!("dropping undecodable datagram: {e}");
                if let Some(s) = stats {
                    s.record_decode_error();
                }
            }
        }
    }
}

/// Plays the trajectory: measure the handle through the arm kinematics,
/// publish the pose, wait for the matching wrench and command the arms.
fn device_loop(
    (mut tx, mut rx): Link,
    device: &SimulatedDevice,
    step: &Step,
    times: &[f64],
) -> Result<Vec<Wrench>, HarnessError> {
    let mut buf = Vec::with_capacity(POSE_DATAGRAM_LEN);
    let mut delivered = Vec::with_capacity(times.len());
    let result = (|| {
        for (seq, &t) in times.iter().enumerate() {
            let seq = seq as u32;
            let handle = device.measure(&step.trajectory.sample(t))?;
            encode_into(&mut buf, &Packet::from_pose(&handle), seq, (t * 1e6).round() as u64)?;
            tx.send(&buf)?;
            let wrench = loop {
                let (header, packet) = recv_decoded(rx.as_mut(), None)?;
                match packet.to_wrench() {
                    Some(w) if header.seq == seq => break w,
                    _ => log::debug!("device ignoring stale packet seq {}", header.seq),
                }
            };
            device.command(&handle, &wrench);
            delivered.push(wrench);
        }
        Ok(())
    })();
    // Always release the render loop, even on failure.
    let end = Packet::Status {
        state: STATUS_DONE,
        rate_hz: 0.0,
    };
    if encode_into(&mut buf, &end, times.len() as u32, 0).is_ok() {
        let _ = tx.send(&buf);
    }
    result.map(|_| delivered)
}

struct RenderOutcome {
    state: ToolState,
    deep_steps: usize,
    step_times_ns: Vec<u64>,
}

fn render_loop(
    (mut tx, mut rx): Link,
    scenario: &Scenario,
    voxmap: &VoxMap,
    shell: &crate::volumetric::PointShell,
    step: &Step,
    times: &[f64],
    rows: mpsc::Sender<TraceRow>,
    stats: &SharedLinkStats,
) -> Result<RenderOutcome, HarnessError> {
    let cfg = &scenario.config;
    let mut renderer = Renderer::new(cfg.render);
    let mut state: Option<ToolState> = None;
    let mut buf = Vec::with_capacity(WRENCH_DATAGRAM_LEN);
    let mut deep_steps = 0;
    let mut step_times_ns = Vec::new();
    let end_time = step.trajectory.end_time();
    stats.start();
    loop {
        let (header, packet) = recv_decoded(rx.as_mut(), Some(stats))?;
        let device_pose = match packet {
            Packet::Status { state: STATUS_DONE, .. } => break,
            ref p => match p.to_pose() {
                Some(pose) => pose,
                None => {
                    log::debug!("render ignoring {:?} packet", p.kind());
                    continue;
                }
            },
        };
        let current = state.get_or_insert_with(|| ToolState::at_rest(device_pose));
        let (next, wrench, st) = renderer.step(current, shell, voxmap, &device_pose);
        *current = next;
        if st.deep_penetration {
            deep_steps += 1;
        }
        step_times_ns.push(st.step_time_ns);

        encode_into(&mut buf, &Packet::from_wrench(&wrench), header.seq, header.timestamp_us)?;
        tx.send(&buf)?;
        stats.record_sent(buf.len());
        let _ = rows.send(TraceRow {
            t: times.get(header.seq as usize).copied().unwrap_or(end_time),
            force: wrench.force,
            torque: wrench.torque,
            contacts: st.contact_count,
            rate_hz: cfg.rate_hz,
        });
    }
    Ok(RenderOutcome {
        state: state.unwrap_or_else(|| ToolState::at_rest(step.trajectory.sample(end_time))),
        deep_steps,
        step_times_ns,
    })
}
