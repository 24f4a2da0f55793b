use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use vhap_core::geometry::load_mesh;
use vhap_core::harness::{
    load_scenario, read_trace, report_metrics, run_assembly, run_bench, summarize, write_trace, BenchConfig,
    TransportKind, REFERENCE_POINTS, REFERENCE_VOXELS,
};
use vhap_core::volumetric::{VoxelKind, Voxelizer};

#[derive(Parser)]
#[command(name = "vhap", version, about = "Voxel-based haptic assembly verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an assembly scenario and write force traces and a report.
    Run {
        scenario: PathBuf,
        /// inproc or udp
        #[arg(long, default_value = "inproc")]
        transport: TransportKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Render-side UDP address (overrides net.render_addr).
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// Device-side UDP address (overrides net.device_addr).
        #[arg(long)]
        peer: Option<SocketAddr>,
        /// Render loop rate (overrides rate_hz).
        #[arg(long)]
        rate_hz: Option<f64>,
    },
    /// Voxelize a mesh and print cell statistics.
    Voxelize {
        mesh: PathBuf,
        #[arg(long)]
        voxel_size: f64,
        #[arg(long, default_value_t = 0.0)]
        band_width: f64,
        /// Factor converting mesh units to meters.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Print every cell, one z-slice at a time.
        #[arg(long)]
        dump: bool,
    },
    /// Measure render-loop throughput on a calibrated workload.
    Bench {
        /// Target surface voxel count.
        #[arg(long, default_value_t = REFERENCE_VOXELS)]
        voxels: usize,
        /// Minimum pointshell size.
        #[arg(long, default_value_t = REFERENCE_POINTS)]
        points: usize,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
    },
    /// Summarize a trace CSV.
    Inspect { trace: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            transport,
            out,
            bind,
            peer,
            rate_hz,
        } => run_scenario(&scenario, transport, &out, bind, peer, rate_hz),
        Command::Voxelize {
            mesh,
            voxel_size,
            band_width,
            scale,
            dump,
        } => {
            let mesh = load_mesh(&mesh, scale)?;
            let map = Voxelizer::new(voxel_size, band_width).voxelize(&mesh)?;
            let [nx, ny, nz] = map.dims();
            println!("grid: {nx} x {ny} x {nz} at {voxel_size} m");
            for kind in [
                VoxelKind::Surface,
                VoxelKind::Interior,
                VoxelKind::Proximity,
                VoxelKind::Empty,
            ] {
                println!("{kind:?}: {}", map.count(kind));
            }
            if dump {
                print!("{}", map.to_dump());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            voxels,
            points,
            seconds,
        } => {
            let report = run_bench(&BenchConfig {
                target_voxels: voxels,
                points,
                seconds,
                ..BenchConfig::default()
            })?;
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { trace } => {
            let rows = read_trace(&trace)?;
            print!("{}", summarize(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_scenario(
    path: &Path,
    transport: TransportKind,
    out: &Path,
    bind: Option<SocketAddr>,
    peer: Option<SocketAddr>,
    rate_hz: Option<f64>,
) -> Result<ExitCode> {
    let mut scenario = load_scenario(path)?;
    let cfg = &mut scenario.config;
    if let Some(addr) = bind {
        cfg.net.render_addr = addr;
    }
    if let Some(addr) = peer {
        cfg.net.device_addr = addr;
    }
    if let Some(rate) = rate_hz {
        if !(rate.is_finite() && rate > 0.0) {
            bail!("--rate-hz must be positive");
        }
        cfg.rate_hz = rate;
        cfg.render.coupling.dt = 1.0 / rate;
    }
    let report = run_assembly(&scenario, transport)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (k, step) in report.steps.iter().enumerate() {
        let file = out.join(format!("{:02}_{}.csv", k, step.name));
        write_trace(&step.rows, &file)?;
        info!("wrote {}", file.display());
    }
    let text = report_metrics(&report);
    let report_path = out.join("report.txt");
    std::fs::write(&report_path, &text).with_context(|| format!("writing {}", report_path.display()))?;
    print!("{text}");
    Ok(if report.all_converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
