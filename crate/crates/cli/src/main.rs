mod config;
mod emit;
mod tasks;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use torus_spectral::Error;

use config::JobConfig;

#[derive(Parser)]
#[command(name = "torus-spectral", version, about = "Spectral curves of periodic Dirac operators on a flat torus")]
struct Cli {
    #[command(subcommand)]
    task: Task,
    /// JSON job configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the JSON result; sample tables go next to it with a `.csv` extension.
    /// Without it the JSON goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Task {
    /// Vacuum lines and double points in a window of the dual lattice.
    Vacuum,
    /// Smallest singular value over a grid in a real 2-plane of ℂ².
    Indicator,
    /// Trace the spectrum as a graph over a rectangle.
    Trace,
    /// Classify vacuum double points.
    Classify,
    /// Handle and node counts over a window.
    Genus,
    /// Willmore energy by the direct, slope and residue routes.
    Energy,
    /// Kernel sections, their deviations from the vacuum and S-map values.
    Section,
    /// Tube and symmetry audits of traced samples.
    Audit,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::Vacuum => "vacuum",
            Task::Indicator => "indicator",
            Task::Trace => "trace",
            Task::Classify => "classify",
            Task::Genus => "genus",
            Task::Energy => "energy",
            Task::Section => "section",
            Task::Audit => "audit",
        }
    }
}

/// Failure modes, each with its exit status.
enum Failure {
    Config(String),
    Compute(Error),
    Io(String),
}

impl Failure {
    fn kind(&self) -> &str {
        match self {
            Failure::Config(_) => "config",
            Failure::Compute(e) => e.kind(),
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) | Failure::Io(m) => m.clone(),
            Failure::Compute(e) => e.to_string(),
        }
    }

    fn status(&self) -> u8 {
        match self {
            Failure::Compute(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

fn load(path: Option<&Path>) -> Result<JobConfig, Failure> {
    let path = path.ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let cfg = load(cli.config.as_deref())?;
    let setup = cfg.setup().map_err(|e| match e {
        Error::InvalidInput(m) => Failure::Config(m),
        other => Failure::Compute(other),
    })?;
    let run_task = match cli.task {
        Task::Vacuum => tasks::vacuum,
        Task::Indicator => tasks::indicator_sweep,
        Task::Trace => tasks::trace,
        Task::Classify => tasks::classify,
        Task::Genus => tasks::genus,
        Task::Energy => tasks::energy,
        Task::Section => tasks::section,
        Task::Audit => tasks::audit,
    };
    let (result, rows) = run_task(&cfg, &setup).map_err(Failure::Compute)?;
    let csv_path = cli.out.as_ref().filter(|_| !rows.is_empty()).map(|p| p.with_extension("csv"));
    if csv_path.is_some() && csv_path.as_ref() == cli.out.as_ref() {
        return Err(Failure::Config("--out must not have a .csv extension for tasks that write samples".into()));
    }
    let doc = json!({
        "task": cli.task.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "tolerances": cfg.tolerances,
        "config": cfg,
        "samples_csv": csv_path.as_ref().map(|p| p.display().to_string()),
        "result": result,
    });
    if let Some(p) = &csv_path {
        emit::write_csv(p, &rows).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(emit::to_json(&doc))
}

fn write_doc(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                // A closed pipe just means the reader stopped early.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("warning: could not configure the thread pool: {e}");
    }
    let outcome = run(&cli).and_then(|text| write_doc(cli.out.as_deref(), &text));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let err = json!({ "error": { "task": cli.task.name(), "kind": f.kind(), "message": f.message() } });
            let text = emit::to_json(&err);
            eprintln!("error: {}", f.message());
            // The error object goes where the result document would have gone.
            match &cli.out {
                Some(p) => {
                    let _ = std::fs::write(p, format!("{text}\n"));
                }
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                }
            }
            ExitCode::from(f.status())
        }
    }
}
