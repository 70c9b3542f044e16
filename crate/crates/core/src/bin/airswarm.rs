use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airswarm::metrics::{compute_metrics, compute_metrics_after};
use airswarm::output::{read_csv, write_csv, write_metrics, write_svg};
use airswarm::scenario::{load_scenario, Scenario};
use airswarm::sim::run_batch;
use airswarm::{Error, Exec};

/// Airship formation and swarm simulator.
#[derive(Parser)]
#[command(name = "airswarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write trace.csv, metrics.json and trace.svg for each.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; each scenario gets a subdirectory named after its file.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run scenarios one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Print error statistics of a trace as JSON.
    Metrics {
        trace: PathBuf,
        /// Ignore records before this time.
        #[arg(long, default_value_t = 0.0)]
        transient_s: f64,
    },
    /// Render a trace as SVG.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Check scenario files without running them.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
}

enum Failure {
    Validation(Error),
    Runtime(Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Scenario>, Failure> {
    paths.iter().map(|p| load_scenario(p).map_err(Failure::Validation)).collect()
}

fn output_dir(out: &Path, scenario_path: &Path) -> PathBuf {
    let stem = scenario_path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    out.join(stem)
}

fn run(paths: &[PathBuf], seed: Option<u64>, out: &Path, exec: Exec) -> Result<(), Failure> {
    let scenarios = load_all(paths)?;
    let traces = run_batch(&scenarios, seed, exec);
    for ((path, scenario), trace) in paths.iter().zip(&scenarios).zip(traces) {
        let trace = trace.map_err(Failure::Runtime)?;
        let dir = output_dir(out, path);
        std::fs::create_dir_all(&dir).map_err(|source| Failure::Runtime(Error::Io { path: dir.clone(), source }))?;
        let summary = compute_metrics(&trace, scenario).map_err(Failure::Runtime)?;
        write_csv(&trace, dir.join("trace.csv")).map_err(Failure::Runtime)?;
        write_metrics(&summary, dir.join("metrics.json")).map_err(Failure::Runtime)?;
        write_svg(&trace, dir.join("trace.svg")).map_err(Failure::Runtime)?;
        let centre = summary.centre;
        println!(
            "{}: {} records, swarm-centre error mean {:.2} m, std {:.2} m -> {}",
            scenario.name,
            trace.records.len(),
            centre.mean_m,
            centre.std_m,
            dir.display()
        );
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenarios, seed, out, sequential } => {
            run(&scenarios, seed, &out, if sequential { Exec::Sequential } else { Exec::default() })
        }
        Command::Metrics { trace, transient_s } => {
            let trace = read_csv(&trace).map_err(Failure::Validation)?;
            let summary = compute_metrics_after(&trace, transient_s).map_err(Failure::Validation)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("metrics serialize"));
            Ok(())
        }
        Command::Plot { trace, svg } => {
            let trace = read_csv(&trace).map_err(Failure::Validation)?;
            write_svg(&trace, &svg).map_err(Failure::Runtime)
        }
        Command::Validate { scenarios } => {
            for (path, scenario) in scenarios.iter().zip(load_all(&scenarios)?) {
                println!("{}: ok ({})", path.display(), scenario.name);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.error());
            ExitCode::from(failure.exit_code())
        }
    }
}
