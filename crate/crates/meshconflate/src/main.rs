use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use meshconflate::config::ConflationConfig;
use meshconflate::pipeline::{report_text, run_cameras, run_conflate, run_evaluate, table_row};
use meshconflate_core::eval::{DEFAULT_SAMPLES, DEFAULT_TAU};

#[derive(Parser)]
#[command(
    name = "meshconflate",
    version,
    about = "Fuse overlapping triangle meshes through a weighted TSDF"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse the sources listed in a config into one mesh.
    Conflate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `threads` in the config.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare a result mesh against a reference.
    Evaluate {
        result: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as key-value lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export the virtual camera centers of a config's scene as a PLY point cloud.
    Cameras {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        b = b.num_threads(n);
    }
    b.build().context("building thread pool")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Conflate {
            config,
            output,
            threads,
        } => {
            let mut cfg = ConflationConfig::load(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            cfg.validate()?;
            let pool = thread_pool(cfg.threads)?;
            log::info!("{} threads", pool.current_num_threads());
            let summary = pool.install(|| run_conflate(&cfg))?;
            println!(
                "cameras = {}\nrays_cast = {}\nrays_hit = {}\nstored_voxels = {}\nvertices = {}\nfaces = {}",
                summary.cameras, summary.rays_cast, summary.rays_hit, summary.stored_voxels, summary.vertices, summary.faces
            );
            for s in &summary.stages {
                println!("time_{} = {:.3}", s.name, s.elapsed.as_secs_f64());
            }
            if let Some(r) = &summary.evaluation {
                println!("{}", table_row("conflated", r));
            }
        }
        Command::Evaluate {
            result,
            reference,
            tau,
            samples,
            seed,
            report,
        } => {
            let r = run_evaluate(&result, &reference, tau, samples, seed)?;
            print!("{}", report_text(&r));
            println!("{}", table_row("result", &r));
            if let Some(p) = report {
                std::fs::write(&p, report_text(&r))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Cameras { config, out } => {
            let cfg = ConflationConfig::load(&config)?;
            let n = run_cameras(&cfg, &out)?;
            println!("cameras = {n}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
