use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wcs_lab::commands::{self, Output, RunLength};
use wcs_lab::config;
use wcs_lab::sweep::{parse_grid, SweepParam, SweepSpec};
use wcs_lab::validate::Tolerances;
use wcs_lab::LabError;

/// Throughput of mobile networks powered by wireless charging stations.
#[derive(Debug, Parser)]
#[command(name = "wcs", version)]
struct Cli {
    /// Scenario file (TOML); keys not given keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one scenario key, e.g. `--set v=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// RNG seed; same as `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and replications.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
    /// Write the command's CSV table here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Length {
    /// Simulated slots, warmup included.
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    /// Slots discarded before measuring; ten mean inter-meeting times by default.
    #[arg(long)]
    warmup: Option<u64>,
}

impl Length {
    fn get(&self) -> RunLength {
        RunLength {
            slots: self.slots,
            warmup: self.warmup,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary distribution, P_on and throughput.
    Solve,
    /// Distance transition matrix and the transmit and charge probabilities.
    Kernel,
    /// Inter-meeting time spectrum and CCDF table.
    Intermeeting {
        /// Last t of the CCDF table.
        #[arg(long, default_value_t = 500)]
        horizon: usize,
    },
    /// Unbounded-battery and memoryless-mobility limits.
    Limits,
    /// Density scaling bounds.
    Bounds,
    /// Monte Carlo run; JSON summary and the per-slot active fraction.
    Simulate {
        #[command(flatten)]
        length: Length,
        /// Independent runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        replications: usize,
        /// Write the inter-meeting samples here, one per line.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Evaluate a grid over one of v, L, n, m.
    Sweep {
        /// Swept key: v, L, n or m.
        #[arg(long)]
        param: String,
        /// `a,b,c` or `start:stop:step`.
        #[arg(long)]
        values: String,
        /// With `--param n`, also set m = round(n * RATIO).
        #[arg(long, value_name = "RATIO")]
        stations_per_node: Option<f64>,
        /// Add Monte Carlo columns.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        length: Length,
    },
    /// Analytic model against simulation; exit status 0 iff every check passes.
    Validate {
        #[command(flatten)]
        length: Length,
        /// Override a limit: tv, z, pon or ks, e.g. `--tolerance pon=0.02`.
        #[arg(long, value_name = "KEY=VALUE")]
        tolerance: Vec<String>,
    },
}

fn write_file(path: &Path, body: &str) -> Result<(), LabError> {
    std::fs::write(path, body).map_err(|e| LabError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn execute(cli: &Cli) -> Result<Output, LabError> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    log::debug!("scenario {cfg:?}");
    match &cli.command {
        Command::Solve => commands::solve_cmd(&cfg),
        Command::Kernel => commands::kernel_cmd(&cfg),
        Command::Intermeeting { horizon } => commands::intermeeting_cmd(&cfg, *horizon),
        Command::Limits => commands::limits_cmd(&cfg),
        Command::Bounds => commands::bounds_cmd(&cfg),
        Command::Simulate {
            length,
            replications,
            samples,
        } => {
            let (out, stats) = commands::simulate_cmd(&cfg, length.get(), *replications, cli.jobs)?;
            if let Some(path) = samples {
                write_file(path, &commands::samples_text(&stats))?;
            }
            Ok(out)
        }
        Command::Sweep {
            param,
            values,
            stations_per_node,
            simulate,
            length,
        } => {
            let param = SweepParam::parse(param)?;
            if stations_per_node.is_some() && param != SweepParam::Nodes {
                return Err(LabError::Usage("--stations-per-node needs --param n".into()));
            }
            let simulate = if *simulate {
                Some(commands::sim_options(&cfg, length.get())?)
            } else {
                None
            };
            let plan = SweepSpec {
                param,
                values: parse_grid(values)?,
                base: cfg,
                stations_per_node: *stations_per_node,
                simulate,
            };
            commands::sweep_cmd(&plan, cli.jobs)
        }
        Command::Validate { length, tolerance } => {
            let tol = Tolerances::default().with_overrides(tolerance)?;
            commands::validate_cmd(&cfg, length.get(), &tol)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|out| {
        if let (Some(path), Some(csv)) = (&cli.out, &out.csv) {
            write_file(path, csv)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
