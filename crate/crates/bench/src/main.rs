use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbd_bench::error::BenchError;
use mbd_bench::problems::{self, Problem};
use mbd_bench::{plot, run_experiment, RunConfig};
use mbd_core::demos::{path_to_demonstration, rrt_plan, write_path_csv, RrtConfig};

#[derive(Debug, Parser)]
#[command(name = "mbd", version, about = "Run model-based diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of a JSON config and write traces and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the config's list.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory, overriding the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the accepted task names.
    ListTasks,
    /// Plan an RRT path on a planar task and write it as a demonstration CSV.
    DemoGen {
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value_t = 0.2)]
        clearance: f64,
        /// Also write the raw planner polyline here.
        #[arg(long)]
        path_out: Option<PathBuf>,
    },
    /// Downsample a trace CSV for plotting.
    PlotData {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 50)]
        max_rows: usize,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_file(path: &PathBuf, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), BenchError> {
    let mut w = File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| BenchError::io(path, e))
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run { config, seed_override, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed_override {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let agg = run_experiment(&cfg)?;
            println!(
                "{} {}: mean_cost {:.6} std_cost {:.6} success_rate {:.3} mean_wall_time_ms {:.1}",
                agg.task, agg.method, agg.mean_cost, agg.std_cost, agg.success_rate, agg.mean_wall_time_ms
            );
            Ok(())
        }
        Command::ListTasks => {
            for n in problems::listed_names() {
                println!("{n}");
            }
            Ok(())
        }
        Command::DemoGen { task, out, seed, sigma, clearance, path_out } => {
            let Problem::Trajectory(spec) = problems::build(&task, None, None, 0)? else {
                return Err(BenchError::ConfigInvalid(format!("'{task}' is not a trajectory task")));
            };
            let layout = spec
                .planar
                .as_ref()
                .ok_or_else(|| BenchError::ConfigInvalid(format!("task '{task}' has no planar layout for RRT")))?;
            let rrt = RrtConfig { seed, clearance, ..RrtConfig::default() };
            let path = rrt_plan(layout.start, layout.goal, &layout.region, &rrt)?;
            let demo = path_to_demonstration(&path, &spec, sigma).map_err(|e| BenchError::ConfigInvalid(e.to_string()))?;
            let mut w = File::create(&out).map(BufWriter::new).map_err(|e| BenchError::io(&out, e))?;
            demo.write_csv(&mut w).map_err(|source| BenchError::Format { path: out.clone(), source })?;
            w.flush().map_err(|e| BenchError::io(&out, e))?;
            if let Some(p) = path_out {
                write_file(&p, |w| write_path_csv(&path, w))?;
            }
            Ok(())
        }
        Command::PlotData { trace, max_rows, out } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| BenchError::io(&trace, e))?;
            let data = plot::downsample_csv(&text, max_rows);
            match out {
                Some(p) => write_file(&p, |w| w.write_all(data.as_bytes())),
                None => {
                    print!("{data}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
