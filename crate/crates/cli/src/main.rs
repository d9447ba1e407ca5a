//! `dlbound` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid flags, malformed input files and
//! infeasible parameters, 2 for I/O failures and failed self-checks.

mod check;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dlbound::bounds::{auto_lipschitz, compute_beta, compute_eta, full_report, required_samples};
use dlbound::experiments::{export, gap_sweep};
use dlbound::io::{format_f64, read_matrix_csv, write_matrix_csv};
use dlbound::learning::learn;
use dlbound::sparse_coding::sparse_code;
use dlbound::{
    BoundInputs, Dictionary, Error, ExperimentConfig, LearnConfig, Penalty, SignalSet, SolverConfig,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "dlbound",
    version,
    about = "Sample-complexity bounds and sparse dictionary learning"
)]
struct Cli {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value = "0", value_parser = exact_usize)]
    threads: usize,

    /// Seed for every randomized step; overrides seeds from config files.
    #[arg(long, global = true, value_parser = exact_u64)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct PenaltyArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    lambda: f64,
}

impl PenaltyArgs {
    fn penalty(&self) -> dlbound::Result<Penalty> {
        Penalty::new(self.p, self.q, self.lambda)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate η and the constants behind it.
    Bound {
        #[arg(long, value_parser = exact_usize)]
        m: usize,
        #[arg(long, value_parser = exact_usize)]
        d: usize,
        #[command(flatten)]
        pen: PenaltyArgs,
        #[arg(long, value_parser = exact_u64)]
        n: u64,
        #[arg(long)]
        confidence: f64,
        /// Lipschitz constant; must exceed the worst case. Defaults to it.
        #[arg(long = "L")]
        lipschitz: Option<f64>,
        /// Signals (CSV, one per column) for the empirical L_X and C_X.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Smallest n with η(n) at or below a target.
    Samplesize {
        #[arg(long = "target-eta")]
        target_eta: f64,
        #[arg(long, value_parser = exact_usize)]
        m: usize,
        #[arg(long, value_parser = exact_usize)]
        d: usize,
        #[command(flatten)]
        pen: PenaltyArgs,
        #[arg(long)]
        confidence: f64,
        #[arg(long = "L")]
        lipschitz: Option<f64>,
    },
    /// Sparse-code every column of a signal file.
    Code {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[command(flatten)]
        pen: PenaltyArgs,
        #[arg(long = "max-iters", value_parser = exact_usize)]
        max_iters: Option<usize>,
        #[arg(long, value_parser = exact_usize)]
        restarts: Option<usize>,
    },
    /// Learn a dictionary; writes dictionary.csv and trace.csv.
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = exact_usize)]
        d: usize,
        #[command(flatten)]
        pen: PenaltyArgs,
        /// Learning options as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = exact_usize)]
        iters: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a gap sweep; writes gap_curve.csv and its JSON sidecar.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-checks against the grid oracle and the norm inequalities.
    Check,
}

const MAX_EXACT: f64 = 9_007_199_254_740_992.0;

fn exact_u64(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= MAX_EXACT) {
        return Err(format!("{s:?} is not a nonnegative integer"));
    }
    Ok(v as u64)
}

fn exact_usize(s: &str) -> Result<usize, String> {
    exact_u64(s).and_then(|v| usize::try_from(v).map_err(|_| format!("{s:?} is too large")))
}

/// Why a command failed, with the exit code it maps to.
enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn from_core(err: Error, flags: &[&str]) -> Self {
        match err {
            Error::Io { .. } => Failure::Runtime(err.to_string()),
            Error::InvalidParameter { name, reason } => {
                let label = if flags.contains(&name) {
                    format!("--{}", name.replace('_', "-"))
                } else {
                    name.to_string()
                };
                Failure::Input(format!("invalid value for {label}: {reason}"))
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

const BOUND_FLAGS: &[&str] = &[
    "m",
    "d",
    "p",
    "q",
    "lambda",
    "n",
    "confidence",
    "L",
    "target-eta",
];
const CODE_FLAGS: &[&str] = &[
    "p",
    "q",
    "lambda",
    "max_iters",
    "restarts",
    "d",
    "outer_iters",
];

fn print_json(value: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("outputs are plain JSON")
    );
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let core = |flags: &'static [&'static str]| move |e: Error| Failure::from_core(e, flags);
    match cli.command {
        Command::Bound {
            m,
            d,
            pen,
            n,
            confidence,
            lipschitz,
            data,
        } => {
            let pen = pen.penalty().map_err(core(BOUND_FLAGS))?;
            if n < 3 {
                eprintln!("warning: n = {n} is below 3, where log n < 1");
            }
            let inputs = BoundInputs {
                m,
                d,
                pen,
                n,
                confidence_x: confidence,
                lipschitz,
            };
            let signals = match data {
                Some(path) => Some(
                    read_matrix_csv(&path)
                        .and_then(SignalSet::new)
                        .map_err(core(BOUND_FLAGS))?,
                ),
                None => None,
            };
            let report = full_report(&inputs, signals.as_ref()).map_err(core(BOUND_FLAGS))?;
            print_json(&report);
        }
        Command::Samplesize {
            target_eta,
            m,
            d,
            pen,
            confidence,
            lipschitz,
        } => {
            let pen = pen.penalty().map_err(core(BOUND_FLAGS))?;
            let inputs = BoundInputs {
                m,
                d,
                pen,
                n: 3,
                confidence_x: confidence,
                lipschitz,
            };
            let l = inputs.resolved_lipschitz().map_err(core(BOUND_FLAGS))?;
            let n = required_samples(target_eta, m, d, l, confidence).map_err(core(BOUND_FLAGS))?;
            let beta = compute_beta(m, d, l).map_err(core(BOUND_FLAGS))?;
            let eta_n = compute_eta(n, beta, confidence).map_err(core(BOUND_FLAGS))?;
            let eta_prev = if n > 3 {
                Some(compute_eta(n - 1, beta, confidence).map_err(core(BOUND_FLAGS))?)
            } else {
                None
            };
            print_json(&json!({
                "n": n,
                "target_eta": target_eta,
                "eta_n": eta_n,
                "eta_n_minus_1": eta_prev,
                "beta": beta,
                "L": l,
                "L_auto": auto_lipschitz(&pen, d),
            }));
        }
        Command::Code {
            signal,
            dict,
            pen,
            max_iters,
            restarts,
        } => {
            let pen = pen.penalty().map_err(core(CODE_FLAGS))?;
            let mut cfg = SolverConfig::default();
            if let Some(v) = max_iters {
                cfg.max_iters = v;
            }
            if let Some(v) = restarts {
                cfg.restarts = v;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.validate().map_err(core(CODE_FLAGS))?;
            let dictionary = read_matrix_csv(&dict)
                .and_then(Dictionary::new)
                .map_err(core(CODE_FLAGS))?;
            let signals = read_matrix_csv(&signal).map_err(core(CODE_FLAGS))?;
            let results = signals
                .columns()
                .into_iter()
                .map(|x| sparse_code(x, &dictionary, &pen, &cfg))
                .collect::<dlbound::Result<Vec<_>>>()
                .map_err(core(CODE_FLAGS))?;
            if results.len() == 1 {
                print_json(&results[0]);
            } else {
                print_json(&results);
            }
        }
        Command::Learn {
            data,
            d,
            pen,
            config,
            iters,
            out,
        } => {
            let pen = pen.penalty().map_err(core(CODE_FLAGS))?;
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<LearnConfig>(&text).map_err(|e| {
                        Failure::Input(format!("malformed input {}: {e}", path.display()))
                    })?
                }
                None => LearnConfig::default(),
            };
            if let Some(v) = iters {
                cfg.outer_iters = v;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
                cfg.coding.seed = seed;
            }
            if d == 0 {
                return Err(Failure::Input(
                    "invalid value for --d: must be at least 1".into(),
                ));
            }
            let set = read_matrix_csv(&data)
                .and_then(SignalSet::new)
                .map_err(core(CODE_FLAGS))?;
            let trace = learn(&set, set.m(), d, &pen, &cfg).map_err(core(CODE_FLAGS))?;
            create_dir(&out)?;
            let dict_path = out.join("dictionary.csv");
            let trace_path = out.join("trace.csv");
            write_matrix_csv(&dict_path, trace.final_dict.atoms()).map_err(core(CODE_FLAGS))?;
            let mut text = String::from("iteration,objective\n");
            for (i, v) in trace.objectives.iter().enumerate() {
                text.push_str(&format!("{},{}\n", i + 1, format_f64(*v)));
            }
            fs::write(&trace_path, text)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", trace_path.display())))?;
            print_json(&json!({
                "iterations": trace.objectives.len(),
                "final_objective": trace.objectives.last(),
                "replaced_atoms": trace.replaced_atoms,
                "dictionary": dict_path,
                "trace": trace_path,
            }));
        }
        Command::Experiment { config, out } => {
            let mut cfg = ExperimentConfig::from_json_file(&config).map_err(core(&[]))?;
            if let Some(seed) = cli.seed {
                cfg.dist.seed = seed;
            }
            let curve = gap_sweep(&cfg).map_err(core(&[]))?;
            for w in &curve.warnings {
                eprintln!("warning: {w}");
            }
            create_dir(&out)?;
            let csv_path = out.join("gap_curve.csv");
            let sidecar = export(&curve, &csv_path).map_err(core(&[]))?;
            print_json(&json!({
                "rows": curve.rows.len(),
                "envelope_violations": curve.envelope_violations().len(),
                "slope": curve.fit.as_ref().map(|f| f.slope),
                "csv": csv_path,
                "sidecar": sidecar,
            }));
        }
        Command::Check => {
            let rows = check::run_all();
            println!("{:<30} {:>6} {:>9}  status", "check", "cases", "failures");
            let mut all = true;
            for row in &rows {
                let status = if row.failures == 0 { "PASS" } else { "FAIL" };
                all &= row.failures == 0;
                println!(
                    "{:<30} {:>6} {:>9}  {status}",
                    row.name, row.cases, row.failures
                );
            }
            if !all {
                return Err(Failure::Runtime("self-check failed".into()));
            }
        }
    }
    Ok(())
}

/// Collapses a clap diagnostic into one line, keeping the flag names.
fn one_line(err: &clap::Error) -> String {
    err.to_string()
        .lines()
        .map(str::trim)
        .filter(|l| {
            !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = err.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    eprintln!("{}", one_line(&err));
                    ExitCode::from(1)
                }
            };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
