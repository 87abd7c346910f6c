use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use gdb_core::acceptance::{corrupted_solver, format_line, run_suite, SuiteOptions};
use gdb_core::analysis::{emit_figure_data, Figure};
use gdb_core::crypto::hash;
use gdb_core::proto::{run, DbEstimate, RunOutcome, SessionFailure};
use gdb_core::threat::DetectionReport;
use gdb_core::Scenario;

#[derive(Parser)]
#[command(name = "gdb", version, about = "Group distance bounding simulator")]
struct Cli {
    /// Worker threads for sweeps and the acceptance suite (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one scenario under consecutive seeds, one directory per seed.
    Sweep {
        scenario: PathBuf,
        /// First seed (default: the scenario's rng_seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Write figure data as CSV.
    Figures {
        /// 6a, 6b, 6c, 6d or all.
        #[arg(long, default_value = "all")]
        which: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        /// 10^5 Monte Carlo trials instead of 10^4.
        #[arg(long)]
        full: bool,
        /// Swap in a solver that skews every time of flight, to check the suite notices.
        #[arg(long, hide = true)]
        corrupt_solver: bool,
    },
}

enum Failure {
    /// Bad input: unreadable file, malformed JSON, invalid scenario, unknown figure.
    Input(String),
    /// Protocol or runtime failure, including failed acceptance criteria.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct Artifact {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    scenario: String,
    seed: u64,
    out: String,
    artifacts: Vec<Artifact>,
}

#[derive(Serialize)]
struct DetectionFile<'a> {
    detection: Option<&'a DetectionReport>,
    session_failures: &'a [SessionFailure],
}

#[derive(Serialize)]
struct BoundRow<'a> {
    measurer: u32,
    target: u32,
    bound_m: f64,
    method: &'a str,
    auth_ok: bool,
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut s = Scenario::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
    Ok(s)
}

fn simulate(s: Scenario) -> Result<RunOutcome, Failure> {
    let valid = s.validate().map_err(|errs| {
        Failure::Input(errs.iter().map(|e| format!("invalid scenario: {e}")).collect::<Vec<_>>().join("\n"))
    })?;
    run(&valid).map_err(|e| Failure::Runtime(e.to_string()))
}

fn bounds_csv(estimates: &[DbEstimate]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in estimates {
        w.serialize(BoundRow {
            measurer: e.measurer.0,
            target: e.target.0,
            bound_m: e.bound,
            method: e.method.name(),
            auth_ok: e.verified_auth,
        })
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

type RunResult = Result<(RunManifest, RunOutcome), Failure>;

/// Writes the four run artifacts into `out` and returns the manifest.
fn write_run(path: &Path, s: Scenario, out: &Path) -> RunResult {
    let seed = s.rng_seed;
    let outcome = simulate(s)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let detection = DetectionFile { detection: outcome.detection.as_ref(), session_failures: &outcome.failures };
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("trace.jsonl", outcome.trace.to_jsonl().into_bytes()),
        ("bounds.csv", bounds_csv(&outcome.estimates)?),
        ("detection.json", serde_json::to_vec_pretty(&detection).map_err(|e| Failure::Runtime(e.to_string()))?),
    ];
    let mut artifacts = Vec::new();
    for (name, bytes) in files {
        let p = out.join(name);
        fs::write(&p, &bytes).map_err(|e| io_err(&p, e))?;
        artifacts.push(Artifact { name: name.to_string(), sha256: hash(&bytes).to_hex() });
    }
    let manifest =
        RunManifest { scenario: path.display().to_string(), seed, out: out.display().to_string(), artifacts };
    let p = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    Ok((manifest, outcome))
}

fn session_failures(outcome: &RunOutcome) -> Result<(), Failure> {
    if outcome.failures.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = outcome
        .failures
        .iter()
        .map(|f| format!("session {} ({} → {}): {}", f.session, f.measurer, f.target, f.error))
        .collect();
    Err(Failure::Runtime(lines.join("\n")))
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let s = load(scenario, seed)?;
    let (manifest, outcome) = write_run(scenario, s, out)?;
    println!("{} bounds, {} emissions, seed {}", outcome.estimates.len(), outcome.total_count(), manifest.seed);
    session_failures(&outcome)
}

fn cmd_sweep(scenario: &Path, seed: Option<u64>, count: u64, out: &Path) -> Result<(), Failure> {
    let base = load(scenario, None)?;
    let first = seed.unwrap_or(base.rng_seed);
    base.clone().validate().map_err(|errs| {
        Failure::Input(errs.iter().map(|e| format!("invalid scenario: {e}")).collect::<Vec<_>>().join("\n"))
    })?;
    let runs: Vec<(u64, RunResult)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let seed = first.wrapping_add(k);
            let mut s = base.clone();
            s.rng_seed = seed;
            (seed, write_run(scenario, s, &out.join(format!("seed-{seed}"))))
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "measurer", "target", "bound_m", "method", "auth_ok"])
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut failed = Vec::new();
    for (seed, r) in &runs {
        match r {
            Ok((_, outcome)) => {
                for e in &outcome.estimates {
                    w.write_record([
                        seed.to_string(),
                        e.measurer.0.to_string(),
                        e.target.0.to_string(),
                        e.bound.to_string(),
                        e.method.name().to_string(),
                        e.verified_auth.to_string(),
                    ])
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
                }
                if !outcome.failures.is_empty() {
                    failed.push(format!("seed {seed}: {} session failures", outcome.failures.len()));
                }
            }
            Err(e) => failed.push(format!("seed {seed}: {e}")),
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    let p = out.join("summary.csv");
    fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
    println!("{count} runs from seed {first}, summary in {}", p.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failed.join("\n")))
    }
}

fn cmd_figures(which: &str, out: &Path) -> Result<(), Failure> {
    let panels: Vec<String> = if which == "all" {
        Figure::ALL.iter().map(|f| f.name().to_string()).collect()
    } else {
        vec![which.to_string()]
    };
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for panel in panels {
        let csv = emit_figure_data(&panel).map_err(|e| Failure::Input(e.to_string()))?;
        let p = out.join(format!("fig{panel}.csv"));
        fs::write(&p, csv).map_err(|e| io_err(&p, e))?;
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_verify(full: bool, corrupt_solver: bool) -> Result<(), Failure> {
    let mut opts = if full { SuiteOptions::full() } else { SuiteOptions::quick() };
    if corrupt_solver {
        opts.solver = corrupted_solver;
    }
    let results = run_suite(&opts);
    for r in &results {
        println!("{}", format_line(r));
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("failed criteria: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { scenario, seed, out } => cmd_run(scenario, *seed, out),
        Command::Sweep { scenario, seed, count, out } => cmd_sweep(scenario, *seed, *count, out),
        Command::Figures { which, out } => cmd_figures(which, out),
        Command::Verify { quick: _, full, corrupt_solver } => cmd_verify(*full, *corrupt_solver),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
