use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fedheat::bench;
use fedheat::element::ElementKind;
use fedheat::meshgen;
use fedheat::oracle::MassKind;
use fedheat::output;
use fedheat::scenario::{self, Scenario, ScenarioError, THREADS_ENV};
use fedheat::TimeStep;

const EXIT_CONFIG: u8 = 1;
const EXIT_INSTABILITY: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "fedheat", version, about = "Explicit element-level bio-heat solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write fields, probes, statistics and a manifest.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report the Gershgorin critical time step and a stability verdict.
    CheckDt {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Time the solver across worker counts and, optionally, mesh sizes.
    Bench {
        config: PathBuf,
        /// Comma-separated worker counts (default: 1 and all hardware threads).
        #[arg(long, value_delimiter = ',')]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Also sweep generated cubes of increasing size.
        #[arg(long)]
        sweep: bool,
        /// Cells per edge for the sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [8, 12, 16, 20, 24])]
        sweep_cells: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a structured cube mesh.
    GenMesh {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Cells per edge.
        #[arg(long)]
        n: usize,
        /// Edge length, m.
        #[arg(long)]
        size: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the solver and the implicit reference side by side and compare.
    CompareOracle {
        config: PathBuf,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 5e-4)]
        tolerance: f64,
        /// Use a consistent mass matrix in the reference.
        #[arg(long)]
        consistent_mass: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Worker threads (overrides FEDHEAT_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Fixed time step, s.
    #[arg(long, conflicts_with = "auto_dt")]
    dt: Option<f64>,
    /// Time step as a fraction of the critical estimate.
    #[arg(long)]
    auto_dt: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tet,
    Hex,
}

enum Failure {
    Config(String),
    Instability(String),
    Mismatch(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_instability() {
            Failure::Instability(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn load(config: &Path, o: &Overrides) -> Result<(Scenario, usize), Failure> {
    let mut s = Scenario::from_file(config)?;
    if let Some(dt) = o.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
        s.time_step = TimeStep::Fixed(dt);
    }
    if let Some(f) = o.auto_dt {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Failure::Config(format!("--auto-dt must lie in (0, 1], got {f}")));
        }
        s.time_step = TimeStep::Auto(f);
    }
    if let Some(n) = o.steps {
        if n == 0 {
            return Err(Failure::Config("--steps must be at least 1".into()));
        }
        s.steps = n;
    }
    if let Some(dir) = &o.output {
        s.output.directory = dir.clone();
    }
    let env = std::env::var(THREADS_ENV).ok();
    let workers = scenario::resolve_workers(o.threads, env.as_deref())?;
    Ok((s, workers))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, overrides } => {
            let (s, workers) = load(&config, &overrides)?;
            let report = scenario::run_scenario(&s, workers)?;
            let out = &report.output;
            println!(
                "{} steps of {:.6e} s on {} workers ({:.3} s, median {:.4} ms/step)",
                out.state.step,
                out.dt,
                out.workers,
                out.timing.total_s,
                out.timing.median_step_s() * 1e3
            );
            println!("critical dt estimate: {:.6e} s", out.critical_dt);
            print!("{}", output::stats_table_text(&[("P", report.stats)], None));
            println!("output: {}", report.directory.display());
        }
        Command::CheckDt { config, overrides } => {
            let (s, _) = load(&config, &overrides)?;
            let prepared = s.prepare()?;
            let report = scenario::check_dt(&s, &prepared)?;
            print!("{}", report.render());
            if !report.stable() {
                return Err(Failure::Instability(format!(
                    "time step {:e} s exceeds the critical estimate {:e} s",
                    report.dt, report.limit
                )));
            }
        }
        Command::Bench {
            config,
            workers,
            reps,
            sweep,
            sweep_cells,
            overrides,
        } => {
            if reps < 3 {
                return Err(Failure::Config("--reps must be at least 3".into()));
            }
            let (s, default_workers) = load(&config, &overrides)?;
            let mut counts = workers;
            if counts.is_empty() {
                counts = vec![1, default_workers];
                counts.dedup();
            }
            if counts.contains(&0) {
                return Err(Failure::Config("worker counts must be at least 1".into()));
            }
            let prepared = s.prepare()?;
            let dir = s.output.directory.join("bench");
            let rows = bench::worker_scaling(&s, &prepared, &counts, reps)?;
            print!("{}", bench::workers_text(&rows));
            write(&dir.join("workers.csv"), &bench::workers_csv(&rows))?;

            let modes = bench::ti_vs_td(&s, &prepared, *counts.last().unwrap(), reps)?;
            print!("{}", bench::modes_text(&modes));
            write(&dir.join("modes.txt"), &bench::modes_text(&modes))?;

            if sweep {
                let kind = match s.mesh {
                    scenario::MeshSource::Box { kind, .. } => kind,
                    scenario::MeshSource::File(_) => ElementKind::Tet4,
                };
                let result = bench::mesh_sweep(&s, kind, &sweep_cells, *counts.last().unwrap(), reps)?;
                print!("{}", bench::sweep_text(&result));
                write(&dir.join("sweep.csv"), &bench::sweep_csv(&result))?;
                write(&dir.join("sweep.txt"), &bench::sweep_text(&result))?;
            }
            println!("reports: {}", dir.display());
        }
        Command::GenMesh { kind, n, size, output } => {
            if n == 0 || !(size > 0.0 && size.is_finite()) {
                return Err(Failure::Config("--n must be at least 1 and --size positive".into()));
            }
            let kind = match kind {
                KindArg::Tet => ElementKind::Tet4,
                KindArg::Hex => ElementKind::Hex8,
            };
            let mesh = meshgen::cube(kind, n, size);
            write(&output, &mesh.to_text())?;
            println!(
                "{}: {} nodes, {} elements",
                output.display(),
                mesh.node_count(),
                mesh.elements().len()
            );
        }
        Command::CompareOracle {
            config,
            tolerance,
            consistent_mass,
            overrides,
        } => {
            let (s, workers) = load(&config, &overrides)?;
            let prepared = s.prepare()?;
            let mass = if consistent_mass {
                MassKind::Consistent
            } else {
                MassKind::Lumped
            };
            let c = scenario::compare_oracle(&s, &prepared, workers, mass)?;
            let rows = c.rows();
            print!("{}", output::stats_table_text(&rows, Some(c.error)));
            let dir = s.output.directory.join("compare");
            write(&dir.join("stats.csv"), &output::stats_table_csv(&rows, Some(c.error)))?;
            write(&dir.join("stats.txt"), &output::stats_table_text(&rows, Some(c.error)))?;
            if !(c.error <= tolerance) {
                return Err(Failure::Mismatch(format!(
                    "relative error {:.4e} exceeds tolerance {tolerance:e}",
                    c.error
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Instability(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INSTABILITY)
        }
        Err(Failure::Mismatch(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_MISMATCH)
        }
    }
}
