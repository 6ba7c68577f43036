use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use covsim::distributed::{delaunay_graph, drop_nearest_neighbors, verify_scenario, verify_with_graph};
use covsim::export::{export_record, load_record, ExportFormat};
use covsim::render::{render_figure, FigureKind};
use covsim::{run_simulation, Error, RunConfig};

const THREADS_ENV: &str = "COVSIM_THREADS";

#[derive(Parser)]
#[command(name = "covsim", version, about = "Coverage deployment of heterogeneous mobile sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and export the record.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 if the run hits max_steps.
        #[arg(long)]
        require_converged: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run a simulation and check that every agent's cell and centroid
    /// can be recovered from its Delaunay neighbours alone.
    Verify {
        config: PathBuf,
        /// Check every n-th step in addition to the final one.
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
    /// Render an SVG figure from an exported record directory.
    Render {
        record_dir: PathBuf,
        #[arg(long)]
        kind: String,
        /// Output file (default: <record-dir>/<kind>.svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    NotConverged,
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Lib(Error::Validation(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))))?;
    // Fails only if a pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn cmd_run(config: &Path, out: Option<PathBuf>, require_converged: bool, format: Format) -> Result<(), Failure> {
    let mut cfg = RunConfig::from_file(config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let record = run_simulation(&cfg)?;
    let format = match format {
        Format::Csv => ExportFormat::Csv,
        Format::Json => ExportFormat::Json,
    };
    let files = export_record(&record, &cfg.output_dir, format)?;
    let last = record.last().expect("a run records at least one step");
    println!(
        "status: {:?}, steps: {}, H: {:.6}, error: {:.6}, clips: {}",
        record.status,
        record.step_count(),
        last.objective,
        last.error_measure,
        record.clip_count()
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    if require_converged && !record.converged() {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn cmd_verify(config: &Path, every: usize) -> Result<(), Failure> {
    let cfg = RunConfig::from_file(config)?;
    let scenario = cfg.build()?;
    let record = run_simulation(&cfg)?;
    let every = every.max(1);
    let last = record.steps.len() - 1;
    let mut failures = 0;
    for (k, s) in record.steps.iter().enumerate() {
        if k % every != 0 && k != last {
            continue;
        }
        let report = verify_scenario(&scenario, &s.positions)?;
        let ok = report.passed();
        if !ok {
            failures += 1;
        }
        println!(
            "step {:>5}: {} (max centroid discrepancy {:.3e}, failing agents {:?})",
            s.step,
            if ok { "ok" } else { "FAIL" },
            report.max_centroid_discrepancy,
            report.failing_agents()
        );
    }
    let final_pos = &record.steps[last].positions;
    if final_pos.len() > 2 {
        let graph = delaunay_graph(&scenario.env, final_pos, &scenario.specs, scenario.limited)?;
        let dropped = drop_nearest_neighbors(&graph, final_pos);
        let report = verify_with_graph(&scenario.env, final_pos, &scenario.specs, scenario.limited, &dropped)?;
        println!(
            "dropped-neighbour check: {} (failing agents {:?})",
            if report.passed() { "unexpectedly passed" } else { "fails as expected" },
            report.failing_agents()
        );
    }
    if failures > 0 {
        return Err(Failure::Check(format!("{failures} checked step(s) failed")));
    }
    Ok(())
}

fn cmd_render(dir: &Path, kind: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let kind: FigureKind = kind.parse()?;
    let record = load_record(dir)?;
    let svg = render_figure(&record, kind)?;
    let path = out.unwrap_or_else(|| dir.join(kind.file_name()));
    std::fs::write(&path, svg).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run {
            config,
            out,
            require_converged,
            format,
        } => cmd_run(&config, out, require_converged, format),
        Command::Verify { config, every } => cmd_verify(&config, every),
        Command::Render { record_dir, kind, out } => cmd_render(&record_dir, &kind, out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => {
            eprintln!("error: run did not converge within max_steps");
            ExitCode::from(3)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_)
                | Error::Parse { .. }
                | Error::OutsideGrid { .. }
                | Error::Singular { .. } => ExitCode::from(2),
                Error::Io { .. } => ExitCode::from(1),
            }
        }
    }
}
