use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use alip_core::lut::{LateralLut, LookupTable};
use alip_core::model::RobotParams;
use alip_core::TrajectoryLibrary;
use alip_service::{latency_probe, ControllerConfig, ProbeOptions, Server};
use alip_sim::{export, sim, synthesize_library, Harness, Scenario, DEFAULT_INCLINES, DEFAULT_PERIOD, DEFAULT_SPEED};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

/// Reduced-order gait toolkit: orbit synthesis, placement tables,
/// closed-loop scenarios and the MPC offload service.
#[derive(Parser)]
#[command(name = "alip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize periodic orbits and save them as a trajectory library.
    Trajgen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INCLINES)]
        inclines: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_SPEED)]
        speed: f64,
        #[arg(long, default_value_t = DEFAULT_PERIOD)]
        period: f64,
        #[arg(long, default_value_t = 32.0)]
        mass: f64,
    },
    /// Lateral placement tables.
    Lut {
        #[command(subcommand)]
        action: LutCommand,
    },
    /// Run a scenario file; writes `<name>.csv` and `<name>.svg`.
    Run {
        scenario: PathBuf,
        /// Trajectory library (default: the scenario's, else synthesized).
        #[arg(long)]
        library: Option<PathBuf>,
        /// Directory of `<trajectory>.alut` tables (default: built in memory).
        #[arg(long)]
        luts: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Add the wall-clock MPC latency column to the CSV.
        #[arg(long)]
        latency: bool,
    },
    /// Serve MPC requests over UDP until terminated.
    Serve {
        #[arg(long)]
        bind: String,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Measure round-trip and compute latency against a server.
    Probe {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Seconds.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Library used to draw states near an orbit.
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        traj_id: u16,
        /// Report file (also printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LutCommand {
    /// Build one table per trajectory of a library.
    Build {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Outcome {
    Ok,
    Fell,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Fell) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ControllerConfig> {
    match path {
        Some(p) => ControllerConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ControllerConfig::default()),
    }
}

fn lut_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.alut"))
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Trajgen { out, inclines, speed, period, mass } => {
            let params = RobotParams::with_mass(mass)?;
            let lib = synthesize_library(&inclines, speed, period, &params)?;
            lib.save(&out)?;
            for t in lib.trajectories() {
                println!("{} incline {} deg, T {} s", t.name(), t.incline_deg(), t.duration());
            }
            println!("wrote {}", out.display());
        }
        Command::Lut { action: LutCommand::Build { library, out_dir, config } } => {
            let cfg = load_config(config.as_deref())?;
            let lib = TrajectoryLibrary::load(&library)?;
            let harness = Harness::new(lib, cfg);
            let ctx = &harness.context;
            let luts = sim::build_luts(&ctx.library, &ctx.config.params, &ctx.placement, ctx.prediction_dt)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            for (traj, lut) in ctx.library.trajectories().iter().zip(&luts) {
                let path = lut_path(&out_dir, traj.name());
                lut.table().save(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Run { scenario, library, luts, config, out_dir, latency } => {
            let sc = Scenario::load(&scenario)?;
            let cfg = load_config(config.as_deref())?;
            let lib = match library.as_ref().or(sc.library.as_ref()) {
                Some(p) => TrajectoryLibrary::load(p).with_context(|| format!("reading library {}", p.display()))?,
                None => alip_sim::default_library(&cfg.params)?,
            };
            let mut harness = Harness::new(lib, cfg);
            if let Some(dir) = luts {
                let ctx = &harness.context;
                let tables = ctx
                    .library
                    .trajectories()
                    .iter()
                    .map(|t| Ok(LateralLut::new(LookupTable::load(lut_path(&dir, t.name()))?, t, ctx.placement)?))
                    .collect::<Result<Vec<_>>>()?;
                harness = harness.with_luts(Arc::new(tables));
            }
            let log = harness.run(&sc)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let csv = out_dir.join(format!("{}.csv", sc.name));
            let svg = out_dir.join(format!("{}.svg", sc.name));
            export::export_csv(&log, &csv, latency)?;
            export::emit_plot(&log, &svg)?;
            println!(
                "{}: {} steps, {:.2} s, max |u| {:.3}, mean |u| {:.3}",
                sc.name,
                log.steps.len(),
                log.ticks.last().map_or(0.0, |t| t.time),
                log.max_abs_torque(),
                log.mean_abs_torque()
            );
            println!("wrote {} and {}", csv.display(), svg.display());
            if let Some(f) = &log.fall {
                println!("fall at t = {:.4} s (step {}): {}", f.time, f.step, f.reason);
                return Ok(Outcome::Fell);
            }
        }
        Command::Serve { bind, traj, config } => {
            let cfg = load_config(config.as_deref())?;
            let lib = TrajectoryLibrary::load(&traj)?;
            let mut server = Server::bind(bind.as_str(), lib, cfg).with_context(|| format!("binding {bind}"))?;
            println!("listening on {}", server.local_addr()?);
            use std::io::Write;
            std::io::stdout().flush()?;
            let stop = std::sync::atomic::AtomicBool::new(false);
            server.run(&stop)?;
        }
        Command::Probe { target, rate, duration, traj, traj_id, out } => {
            if !(duration.is_finite() && duration > 0.0) {
                bail!("duration must be positive");
            }
            let target = target.parse().with_context(|| format!("bad target address `{target}`"))?;
            let nominal = match traj {
                Some(p) => {
                    let lib = TrajectoryLibrary::load(&p)?;
                    Some(lib.get(usize::from(traj_id)).context("traj-id outside the library")?.clone())
                }
                None => None,
            };
            let opts = ProbeOptions { rate_hz: rate, duration: Duration::from_secs_f64(duration), traj_id, nominal };
            let report = latency_probe(target, &opts)?.to_string();
            print!("{report}");
            if let Some(p) = out {
                std::fs::write(&p, &report).with_context(|| format!("writing {}", p.display()))?;
            }
        }
    }
    Ok(Outcome::Ok)
}
