use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blowuplab::cli::commands::{self, output_dir, EXIT_INVALID_CONFIG};
use blowuplab::cli::{RunConfig, Status, SweepSpec};
use blowuplab::{Error, Result};

#[derive(Parser)]
#[command(name = "blowuplab", version, about = "Blow-up simulation and energy diagnostics for u_tt - Δu = u_t|u_t|^(p-1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `outputs` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FrameFlags {
    /// Similarity frame center.
    #[arg(long = "frame-a", allow_negative_numbers = true)]
    frame_a: Option<f64>,
    /// Similarity frame time T'.
    #[arg(long = "frame-T")]
    frame_t: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the wave equation and write the time series and report.
    Simulate(Common),
    /// Evaluate the initial-data criterion in a frame.
    Criterion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        frame: FrameFlags,
    },
    /// Energy and dissipation analysis of a stored run.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Directory holding trajectory.bin (and config.toml if --config is absent).
        #[arg(long)]
        run_dir: PathBuf,
        #[command(flatten)]
        frame: FrameFlags,
    },
    /// Blow-up time fit and rate lower bound of a stored 1-D run.
    RateCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Run the Cartesian product of a [sweep] table.
    Sweep(Common),
}

fn load(common: &Common, run_dir: Option<&Path>) -> Result<(RunConfig, PathBuf)> {
    let path = match (&common.config, run_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join("config.toml"),
        (None, None) => return Err(Error::Config("--config is required".into())),
    };
    let cfg = RunConfig::load(&path)?;
    // Analyses of a stored run land next to it unless told otherwise.
    let out = match (&common.out, run_dir) {
        (None, Some(d)) => d.to_path_buf(),
        _ => output_dir(&cfg.outputs, &cfg.base_dir, common.out.as_deref()),
    };
    Ok((cfg, out))
}

fn frame(cfg: &RunConfig, f: &FrameFlags) -> Option<blowuplab::cli::config::FrameSpec> {
    cfg.frame_with(f.frame_a, f.frame_t)
}

fn dispatch(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, out) = load(&common, None)?;
            let (status, sim) = commands::cmd_simulate(&cfg, &out)?;
            let r = &sim.report;
            print!("{}: halt {} at t = {}", out.display(), r.halt_reason, r.t_final);
            if let Some(e) = &r.estimate {
                print!(", T̂ = {} ± {}, β̂ = {}, κ̂ = {}", e.t_hat, e.t_hat_uncertainty, e.beta_hat, e.kappa_hat);
            }
            println!();
            Ok(status)
        }
        Command::Criterion { common, frame: ff } => {
            let (cfg, out) = load(&common, None)?;
            let (status, r) = commands::cmd_criterion(&cfg, &out, frame(&cfg, &ff))?;
            print!("criterion = {} ({})", r.value, r.verdict.as_str());
            if let Some(f) = &r.follow_up {
                print!(", follow-up {} at t = {}, prediction {}", f.halt_reason, f.t_halt, f.prediction);
            }
            println!();
            Ok(status)
        }
        Command::Energy {
            common,
            run_dir,
            frame: ff,
        } => {
            let (cfg, out) = load(&common, Some(&run_dir))?;
            let (status, r) = commands::cmd_energy(&cfg, &out, &run_dir, frame(&cfg, &ff))?;
            println!(
                "E monotone: {} ({} violations), max dissipation residual {}, criterion {}",
                r.monotonicity.monotone,
                r.monotonicity.violations,
                r.dissipation.max_rel_residual,
                r.criterion.verdict.as_str()
            );
            Ok(status)
        }
        Command::RateCheck { common, run_dir } => {
            let (cfg, out) = load(&common, Some(&run_dir))?;
            let (status, r) = commands::cmd_rate_check(&cfg, &out, &run_dir)?;
            println!(
                "T̂ = {}, β̂ = {}, κ̂ = {}; sup (T̂-t)^β max|u_t| = {} [{}], inf (T̂-t)^β F = {} [{}]",
                r.t_hat,
                r.beta_hat,
                r.kappa_hat,
                r.sup_scaled_ut,
                r.ut_verdict.as_str(),
                r.inf_scaled_f,
                r.f_verdict.as_str()
            );
            Ok(status)
        }
        Command::Sweep(common) => {
            let path = common
                .config
                .clone()
                .ok_or_else(|| Error::Config("--config is required".into()))?;
            let spec = SweepSpec::load(&path)?;
            let outputs = spec
                .base
                .get("outputs")
                .and_then(|v| v.as_str())
                .map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            let out = output_dir(&outputs, &spec.base_dir, common.out.as_deref());
            let (status, rows) = commands::cmd_sweep(&spec, &out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} runs ({} with errors) -> {}", rows.len(), failed, out.join("sweep.csv").display());
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
