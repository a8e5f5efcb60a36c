//! Command-line front end for the localization benchmark harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nlos_locator::bench::{
    self, load_config, loglog_slope, run_benchmark, run_single, timing_scaling, trace_trial,
    BenchConfig, SweepParam,
};

#[derive(Parser)]
#[command(
    name = "nlos-locator",
    about = "TDOA source localization with NLOS mitigation: Monte-Carlo benchmarks, \
             convergence traces, and timing studies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario once and emit records/summary/cdf CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep sigma or the NLOS bound across a value list.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Emit the convergence trace of one trial as trace_<i>.csv.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// Trial index to trace (0-based).
        #[arg(long)]
        trial: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Measure mean per-step cost across problem sizes and fit the
    /// log-log slope.
    Timing {
        /// Comma-separated sensor counts.
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
        sizes: Vec<usize>,
        /// Timed steps per size.
        #[arg(long, default_value_t = 20_000)]
        repetitions: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum ParamArg {
    Sigma,
    B,
}

impl From<ParamArg> for SweepParam {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Sigma => SweepParam::Sigma,
            ParamArg::B => SweepParam::NlosBound,
        }
    }
}

fn apply_overrides(cfg: &mut BenchConfig, trials: Option<usize>, seed: Option<u64>) {
    if let Some(t) = trials {
        cfg.scenario.trials = t;
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> nlos_locator::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, trials, seed);
            std::fs::create_dir_all(&out)?;
            let result = run_single(&cfg.scenario, &cfg.solver, cfg.sigma)?;
            let results = vec![result];
            bench::write_records_csv(&out.join("records.csv"), &results)?;
            bench::write_summary_csv(&out.join("summary.csv"), &results)?;
            bench::write_cdf_csv(&out.join("cdf.csv"), &results[0])?;
            let r = &results[0];
            println!(
                "trials {} | faults {} | rmse {:.6}{}{}",
                r.records.len(),
                r.fault_count,
                r.rmse,
                r.baseline_rmse
                    .map(|b| format!(" | baseline rmse {b:.6}"))
                    .unwrap_or_default(),
                r.crlb.map(|c| format!(" | crlb {c:.6}")).unwrap_or_default(),
            );
            if r.flagged {
                eprintln!("warning: more than 10% of trials faulted");
            }
            println!("wrote records.csv, summary.csv, cdf.csv to {}", out.display());
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            trials,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, trials, seed);
            std::fs::create_dir_all(&out)?;
            let param: SweepParam = param.into();
            let results = run_benchmark(&cfg.scenario, &cfg.solver, cfg.sigma, param, &values)?;
            bench::write_records_csv(&out.join("records.csv"), &results)?;
            bench::write_summary_csv(&out.join("summary.csv"), &results)?;
            for r in &results {
                println!(
                    "{} = {:<8} rmse {:.6}{}{}{}",
                    param.label(),
                    r.param.map(|(_, v)| v).unwrap_or_default(),
                    r.rmse,
                    r.baseline_rmse
                        .map(|b| format!(" | baseline {b:.6}"))
                        .unwrap_or_default(),
                    r.crlb.map(|c| format!(" | crlb {c:.6}")).unwrap_or_default(),
                    if r.flagged { " | FLAGGED" } else { "" },
                );
            }
            println!("wrote records.csv, summary.csv to {}", out.display());
            Ok(())
        }
        Command::Trace { config, trial, out } => {
            let cfg = load_config(&config)?;
            std::fs::create_dir_all(&out)?;
            let result = trace_trial(&cfg.scenario, &cfg.solver, cfg.sigma, trial)?;
            let path = out.join(format!("trace_{trial}.csv"));
            bench::write_trace_csv(&path, &result.trajectory)?;
            let last = result.trajectory.last().expect("non-empty trajectory");
            println!(
                "trial {trial}: {} samples, final x = ({:.4}, {:.4}), kkt_inf {:.3e}, steps {}",
                result.trajectory.len(),
                last.x[0],
                last.x[1],
                last.kkt_inf_norm,
                result.steps
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Timing {
            sizes,
            repetitions,
            out,
        } => {
            let points = timing_scaling(&sizes, repetitions)?;
            std::fs::create_dir_all(&out)?;
            let mut csv = String::from("sensors,mean_step_seconds\n");
            for p in &points {
                println!("L = {:<4} mean step {:.3e} s", p.sensors, p.mean_step_seconds);
                csv.push_str(&format!("{},{}\n", p.sensors, p.mean_step_seconds));
            }
            std::fs::write(out.join("timing.csv"), csv)?;
            if points.len() >= 2 {
                println!("log-log slope: {:.3}", loglog_slope(&points));
            }
            println!("wrote timing.csv to {}", out.display());
            Ok(())
        }
    }
}
