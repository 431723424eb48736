#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twc_core::adversary::ChannelParams;
use twc_core::bounds::{bound_report, snr_sweep, sweep_csv};
use twc_core::lattice::LatticeSpec;
use twc_core::sim::{
    lattice_info, run_experiment, run_geometry_check, sweep, write_outputs, Experiment, ExperimentConfig, SweepAxis,
};
use twc_core::Error;

#[derive(Parser)]
#[command(name = "twc", version, about = "Two-way adversarial channel laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity and bound calculator. Writes JSON, or CSV with --sweep.
    Bounds {
        #[arg(long)]
        pa: f64,
        #[arg(long)]
        pb: f64,
        #[arg(long)]
        na: f64,
        #[arg(long)]
        nb: f64,
        /// `snr:LO:HI:STEPS`, sweeping P_A/N_B.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo run of an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
        /// `AXIS:LO:HI:STEPS` with AXIS one of snr, rate, alpha, n; writes
        /// sweep.csv instead of the per-trial outputs.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Geometric checks: event-rates, orthogonality, sum-pairs,
    /// sumset-bound, strip-angles, avg-radius.
    Geometry {
        check: String,
        #[arg(long)]
        config: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lattice utilities.
    Lattice {
        #[command(subcommand)]
        command: LatticeCommand,
    },
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Covolume, NLD and radii of a lattice description.
    Info {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn parse_range(text: &str) -> Result<(String, f64, f64, usize), Error> {
    let bad = || Error::Config(format!("expected AXIS:LO:HI:STEPS, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let lo: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    let steps: usize = parts[3].parse().map_err(|_| bad())?;
    if steps == 0 || !(hi >= lo) {
        return Err(bad());
    }
    Ok((parts[0].to_string(), lo, hi, steps))
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn read_config(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Bounds {
            pa,
            pb,
            na,
            nb,
            sweep,
            out,
        } => {
            let params = ChannelParams::new(1, pa, pb, na, nb).map_err(|e| Error::Config(e.to_string()))?;
            match sweep {
                None => write(&out, &pretty(&bound_report(&params))),
                Some(spec) => {
                    let (axis, lo, hi, steps) = parse_range(&spec)?;
                    if axis != "snr" {
                        return Err(Error::Config(format!("bounds sweeps only over snr, got {axis:?}")));
                    }
                    let rows = snr_sweep(&params, lo, hi, steps).map_err(|e| Error::Config(e.to_string()))?;
                    write(&out, &sweep_csv(&rows))
                }
            }
        }
        Command::Simulate {
            config,
            threads,
            out_dir,
            sweep: sweep_spec,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if let Some(spec) = sweep_spec {
                let (axis, lo, hi, steps) = parse_range(&spec)?;
                let axis: SweepAxis = axis.parse()?;
                let rows = sweep(&cfg, axis, &grid(lo, hi, steps), threads)?;
                let path = out_dir.join("sweep.csv");
                write(&path, &twc_core::sim::sweep_csv(axis, &rows))?;
                println!("{}", path.display());
                return Ok(());
            }
            let outputs = cfg.outputs.clone();
            let exp = Experiment::new(cfg)?;
            let out = run_experiment(&exp, threads)?;
            let (summary, trials) = write_outputs(&out, &outputs, &out_dir)?;
            print!("{}", out.summary_json());
            eprintln!(
                "wrote {} and {} in {:.2}s",
                summary.display(),
                trials.display(),
                out.summary.wall_time
            );
            Ok(())
        }
        Command::Geometry { check, config, out } => {
            let report = pretty(&run_geometry_check(&check, &read_config(&config)?)?);
            if let Some(path) = out {
                write(&path, &report)?;
            }
            print!("{report}");
            Ok(())
        }
        Command::Lattice {
            command: LatticeCommand::Info { spec },
        } => {
            let spec: LatticeSpec =
                serde_json::from_str(&read_config(&spec)?).map_err(|e| Error::Config(e.to_string()))?;
            print!("{}", pretty(&lattice_info(&spec)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_capacity() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
