use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geo_pid_cli::commands::{
    cmd_critical, cmd_gains, cmd_sim, cmd_sweep, CliError, Overrides, Range, SweepRanges,
};
use geo_pid_cli::config::{parse_config, SystemConfig, BUILTIN_NAMES};

/// Geometric PID control on Lie groups with constraints.
#[derive(Parser)]
#[command(name = "geo-pid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the closed loop and write trajectory.csv and summary.txt.
    Sim {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Also write trajectory.svg.
        #[arg(long)]
        svg: bool,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check gains against the stability certificate.
    Gains {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Search kappa over (0, 2/mu) and report the best value.
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Locate the D-critical points of the potential.
    Critical {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Simulate a grid of gains in parallel, one CSV row per run.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// START:END:COUNT or a single value.
        #[arg(long)]
        kp_range: Option<Range>,
        #[arg(long)]
        kd_range: Option<Range>,
        #[arg(long)]
        ki_range: Option<Range>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SystemArgs {
    /// Built-in system (unicycle, circle-particle, euclidean).
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    builtin: Option<String>,
    /// System config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    kp: Option<f64>,
    #[arg(long)]
    kd: Option<f64>,
    #[arg(long)]
    ki: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            t_end: self.t_end,
            kp: self.kp,
            kd: self.kd,
            ki: self.ki,
            kappa: self.kappa,
        }
    }
}

fn load(args: &SystemArgs, overrides: Option<&OverrideArgs>) -> Result<SystemConfig, CliError> {
    let mut cfg = match (&args.builtin, &args.config) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_config(&text)?
        }
        (Some(name), None) => SystemConfig::builtin(name).ok_or_else(|| {
            CliError::InvalidArgument(format!(
                "unknown system '{name}', expected one of {}",
                BUILTIN_NAMES.join(", ")
            ))
        })?,
        (None, None) => return Err(CliError::InvalidArgument("no system given".into())),
    };
    if let Some(o) = overrides {
        o.to_overrides().apply(&mut cfg)?;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sim {
            system,
            overrides,
            svg,
            out,
        } => {
            let cfg = load(&system, Some(&overrides))?;
            let result = cmd_sim(&cfg, svg)?;
            fs::create_dir_all(&out).map_err(|source| CliError::Io {
                path: out.display().to_string(),
                source,
            })?;
            write(&out.join("trajectory.csv"), &result.csv)?;
            let summary = result.summary.to_text();
            write(&out.join("summary.txt"), &summary)?;
            if let Some(s) = &result.svg {
                write(&out.join("trajectory.svg"), s)?;
            }
            print!("{summary}");
        }
        Command::Gains {
            system,
            overrides,
            grid,
            lambda,
            mu,
        } => {
            let cfg = load(&system, Some(&overrides))?;
            print!("{}", cmd_gains(&cfg, grid, lambda, mu)?);
        }
        Command::Critical { system } => {
            let cfg = load(&system, None)?;
            print!("{}", cmd_critical(&cfg)?);
        }
        Command::Sweep {
            system,
            overrides,
            kp_range,
            kd_range,
            ki_range,
            out,
        } => {
            let cfg = load(&system, Some(&overrides))?;
            let csv = cmd_sweep(
                &cfg,
                &SweepRanges {
                    kp: kp_range,
                    kd: kd_range,
                    ki: ki_range,
                },
            )?;
            match out {
                Some(p) => write(&p, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
