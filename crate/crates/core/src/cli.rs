//! Batch front-end: parse a scenario, run the protocol or memory model, and
//! emit CSV tables plus a short human-readable summary.
//!
//! Configuration comes from a flat `key=value` file (`--config`) with
//! command-line flags taking precedence. Keys use the long flag names with
//! `-` or `_` interchangeably. Everything is an exact computation, so
//! identical configurations produce byte-identical CSV output.
//!
//! Exit codes: 0 ok, 1 oracle-check mismatch, 2 configuration error,
//! 3 photon-capacity error, 4 I/O error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::detection::{DetectorKind, DetectorModel, HeraldMode};
use crate::error::SimError;
use crate::fock::Bell;
use crate::memory::{memory_evolve, relative_phase_state, MemoryParams};
use crate::protocol::{self, HeraldResult};
use crate::sources::SourceSpec;

#[derive(Parser, Debug)]
#[command(name = "herald-sim", version, about = "Heralded two-photon entanglement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the heralding protocol once and emit the sector table
    Herald(RunArgs),
    /// Compare sector probabilities under PNR and bucket detection
    Budget(RunArgs),
    /// Sweep a common source strength and emit rate and fidelity
    SweepLambda(SweepArgs),
    /// Sweep the tapped-source routing parameter and report the optimum
    SweepSliwa(SweepArgs),
    /// Storage-loop survival and fidelity versus cycle count
    Memory(MemoryArgs),
    /// Verify the qubit-level oracle identities
    OracleCheck(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DetectorArg {
    Pnr,
    Bucket,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Pauli,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat key=value configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_b: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
    /// Pair-number cutoff per source
    #[arg(long)]
    cutoff: Option<u32>,
    #[arg(long, value_enum)]
    detector: Option<DetectorArg>,
    /// Detector efficiency
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Pairwise emission overlap of source C (distinguishability)
    #[arg(long)]
    overlap_c: Option<f64>,
    /// CSV output path (stdout when absent)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct MemoryArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Largest cycle count in the table
    #[arg(long)]
    cycles: Option<u32>,
    /// Per-cycle survival probability per loop
    #[arg(long)]
    survival: Option<f64>,
    /// Per-cycle birefringence of loop 1 (radians)
    #[arg(long)]
    theta1: Option<f64>,
    /// Per-cycle birefringence of loop 2 (radians)
    #[arg(long)]
    theta2: Option<f64>,
    /// Per-cycle common phase of loop 1
    #[arg(long)]
    common1: Option<f64>,
    /// Per-cycle common phase of loop 2
    #[arg(long)]
    common2: Option<f64>,
    /// Flip the stored qubits every cycle
    #[arg(long)]
    bitflip: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct OracleArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Capacity(String),
    Io(String),
    CheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Capacity(m)
            | CliError::Io(m)
            | CliError::CheckFailed(m) => m,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Capacity(m) => CliError::Capacity(m),
            SimError::InvalidArgument(m) | SimError::InvalidState(m) => CliError::Config(m),
        }
    }
}

/// Entry point used by the binary.
pub fn run_from_env() -> i32 {
    run(std::env::args())
}

/// Testable entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output with exit code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("herald-sim: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Herald(args) => cmd_herald(args),
        Command::Budget(args) => cmd_budget(args),
        Command::SweepLambda(args) => cmd_sweep_lambda(args),
        Command::SweepSliwa(args) => cmd_sweep_sliwa(args),
        Command::Memory(args) => cmd_memory(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

// ---------------------------------------------------------------------------
// configuration handling
// ---------------------------------------------------------------------------

struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("config file {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!(
                        "config file {} line {}: expected key=value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                map.insert(normalize_key(key), value.trim().to_string());
            }
        }
        Ok(ConfigMap(map))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.remove(&normalize_key(key)) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Config(format!("config field {key}: cannot parse value {raw:?}"))
            }),
        }
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>, CliError> {
        match self.0.remove(&normalize_key(key)) {
            None => Ok(None),
            Some(raw) => match raw.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                _ => Err(CliError::Config(format!(
                    "config field {key}: cannot parse value {raw:?} as boolean"
                ))),
            },
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.0.keys().next() {
            return Err(CliError::Config(format!("unknown config key {key}")));
        }
        Ok(())
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

struct ResolvedRun {
    lambda: (f64, f64, f64),
    cutoff: u32,
    detector: DetectorKind,
    eta: f64,
    mode: HeraldMode,
    overlap_c: f64,
    out: Option<PathBuf>,
}

impl ResolvedRun {
    fn model(&self) -> Result<DetectorModel, CliError> {
        DetectorModel::new(self.detector, self.eta)
            .map_err(|_| CliError::Config(format!("eta: {} outside [0, 1]", self.eta)))
    }

    fn specs(&self) -> (SourceSpec, SourceSpec, SourceSpec) {
        (
            SourceSpec::new("1", "2", self.lambda.0, self.cutoff),
            SourceSpec::new("3", "4", self.lambda.1, self.cutoff),
            SourceSpec::new("5", "6", self.lambda.2, self.cutoff).with_overlap(self.overlap_c),
        )
    }
}

fn positive_field(name: &str, value: f64, lo: f64, hi: f64) -> Result<f64, CliError> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(CliError::Config(format!(
            "{name}: {value} outside [{lo}, {hi}]"
        )));
    }
    Ok(value)
}

fn resolve_run(args: &RunArgs) -> Result<ResolvedRun, CliError> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let run = resolve_run_from(args, &mut cfg)?;
    cfg.finish()?;
    Ok(run)
}

fn resolve_run_from(args: &RunArgs, cfg: &mut ConfigMap) -> Result<ResolvedRun, CliError> {
    let lambda_a = args.lambda_a.or(cfg.take("lambda-a")?).unwrap_or(0.1);
    let lambda_b = args.lambda_b.or(cfg.take("lambda-b")?).unwrap_or(0.1);
    let lambda_c = args.lambda_c.or(cfg.take("lambda-c")?).unwrap_or(0.1);
    let cutoff = args.cutoff.or(cfg.take("cutoff")?).unwrap_or(2);
    let detector = match args.detector {
        Some(d) => d,
        None => match cfg.take::<String>("detector")? {
            None => DetectorArg::Pnr,
            Some(raw) => match raw.as_str() {
                "pnr" => DetectorArg::Pnr,
                "bucket" => DetectorArg::Bucket,
                _ => {
                    return Err(CliError::Config(format!(
                        "detector: expected pnr or bucket, got {raw:?}"
                    )))
                }
            },
        },
    };
    let eta = args.eta.or(cfg.take("eta")?).unwrap_or(1.0);
    let mode = match args.mode {
        Some(m) => m,
        None => match cfg.take::<String>("mode")? {
            None => ModeArg::Pauli,
            Some(raw) => match raw.as_str() {
                "strict" => ModeArg::Strict,
                "pauli" => ModeArg::Pauli,
                _ => {
                    return Err(CliError::Config(format!(
                        "mode: expected strict or pauli, got {raw:?}"
                    )))
                }
            },
        },
    };
    let overlap_c = args.overlap_c.or(cfg.take("overlap-c")?).unwrap_or(1.0);
    let out = args.out.clone().or(cfg.take::<PathBuf>("out")?);

    for (name, v) in [("lambda-a", lambda_a), ("lambda-b", lambda_b), ("lambda-c", lambda_c)] {
        positive_field(name, v, 0.0, 1.0)?;
    }
    if cutoff < 1 {
        return Err(CliError::Config("cutoff: must be at least 1".into()));
    }
    positive_field("eta", eta, 0.0, 1.0)?;
    positive_field("overlap-c", overlap_c, 0.0, 1.0)?;

    Ok(ResolvedRun {
        lambda: (lambda_a, lambda_b, lambda_c),
        cutoff,
        detector: match detector {
            DetectorArg::Pnr => DetectorKind::Pnr,
            DetectorArg::Bucket => DetectorKind::Bucket,
        },
        eta,
        mode: match mode {
            ModeArg::Strict => HeraldMode::Strict,
            ModeArg::Pauli => HeraldMode::PauliFrame,
        },
        overlap_c,
        out,
    })
}

struct ResolvedSweep {
    run: ResolvedRun,
    from: f64,
    to: f64,
    step: f64,
}

fn resolve_sweep(args: &SweepArgs, defaults: (f64, f64, f64)) -> Result<ResolvedSweep, CliError> {
    let mut cfg = ConfigMap::load(args.run.config.as_deref())?;
    let from = args.from.or(cfg.take("from")?).unwrap_or(defaults.0);
    let to = args.to.or(cfg.take("to")?).unwrap_or(defaults.1);
    let step = args.step.or(cfg.take("step")?).unwrap_or(defaults.2);
    let run = resolve_run_from(&args.run, &mut cfg)?;
    cfg.finish()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Config(format!("step: {step} must be positive")));
    }
    if to < from || !to.is_finite() || !from.is_finite() {
        return Err(CliError::Config(format!(
            "from/to: empty range [{from}, {to}]"
        )));
    }
    Ok(ResolvedSweep { run, from, to, step })
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Floating-point values printed with 12 significant digits so 1e-10-level
/// checks can be made from the files.
fn fmt_f(v: f64) -> String {
    format!("{v:.11e}")
}

fn emit_csv(
    header: &[&str],
    rows: &[Vec<String>],
    out: Option<&Path>,
) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Config("refusing to emit an empty table".into()));
    }
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sector_rows(result: &HeraldResult) -> Vec<Vec<String>> {
    protocol::sector_breakdown(result)
        .iter()
        .map(|row| {
            vec![
                row.n_a.to_string(),
                row.n_b.to_string(),
                row.n_c.to_string(),
                fmt_f(row.probability),
                fmt_f(row.fidelity),
            ]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

fn cmd_herald(args: RunArgs) -> Result<(), CliError> {
    let run = resolve_run(&args)?;
    let (a, b, c) = run.specs();
    let result = protocol::run_herald(&a, &b, &c, &run.model()?, run.mode)?;
    println!("herald probability per pulse: {}", fmt_f(result.probability));
    println!("qubit-subspace weight:        {}", fmt_f(result.qubit_weight));
    println!("fidelity to phi+:             {}", fmt_f(result.fidelity));
    println!("truncation weight:            {}", fmt_f(result.truncation_weight));
    emit_csv(
        &["n_A", "n_B", "n_C", "probability", "fidelity"],
        &sector_rows(&result),
        run.out.as_deref(),
    )
}

fn cmd_budget(args: RunArgs) -> Result<(), CliError> {
    let run = resolve_run(&args)?;
    let (a, b, c) = run.specs();
    let pnr = DetectorModel::new(DetectorKind::Pnr, run.eta)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let bucket = DetectorModel::new(DetectorKind::Bucket, run.eta)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let with_pnr = protocol::run_herald(&a, &b, &c, &pnr, run.mode)?;
    let with_bucket = protocol::run_herald(&a, &b, &c, &bucket, run.mode)?;
    println!(
        "herald probability: pnr {} bucket {}",
        fmt_f(with_pnr.probability),
        fmt_f(with_bucket.probability)
    );
    let pnr_rows = protocol::sector_breakdown(&with_pnr);
    let bucket_rows = protocol::sector_breakdown(&with_bucket);
    let rows: Vec<Vec<String>> = pnr_rows
        .iter()
        .zip(bucket_rows.iter())
        .map(|(p, q)| {
            vec![
                p.n_a.to_string(),
                p.n_b.to_string(),
                p.n_c.to_string(),
                fmt_f(p.probability),
                fmt_f(q.probability),
            ]
        })
        .collect();
    emit_csv(
        &["n_A", "n_B", "n_C", "pnr_probability", "bucket_probability"],
        &rows,
        run.out.as_deref(),
    )
}

fn sweep_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| from + i as f64 * step).collect()
}

fn cmd_sweep_lambda(args: SweepArgs) -> Result<(), CliError> {
    let sweep = resolve_sweep(&args, (0.01, 0.1, 0.01))?;
    let model = sweep.run.model()?;
    let mut rows = Vec::new();
    for lambda in sweep_grid(sweep.from, sweep.to, sweep.step) {
        positive_field("from/to", lambda, 0.0, 1.0)?;
        let a = SourceSpec::new("1", "2", lambda, sweep.run.cutoff);
        let b = SourceSpec::new("3", "4", lambda, sweep.run.cutoff);
        let c = SourceSpec::new("5", "6", lambda, sweep.run.cutoff)
            .with_overlap(sweep.run.overlap_c);
        let result = protocol::run_herald(&a, &b, &c, &model, sweep.run.mode)?;
        rows.push(vec![fmt_f(lambda), fmt_f(result.probability), fmt_f(result.fidelity)]);
    }
    emit_csv(&["variable", "rate", "fidelity"], &rows, sweep.run.out.as_deref())
}

fn cmd_sweep_sliwa(args: SweepArgs) -> Result<(), CliError> {
    let sweep = resolve_sweep(&args, (0.05, 0.95, 0.01))?;
    let model = sweep.run.model()?;
    let mut rows = Vec::new();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for routing in sweep_grid(sweep.from, sweep.to, sweep.step) {
        let result = protocol::run_sliwa(sweep.run.lambda.2, routing, &model, sweep.run.mode)?;
        if result.probability > best.1 {
            best = (routing, result.probability);
        }
        rows.push(vec![fmt_f(routing), fmt_f(result.probability), fmt_f(result.fidelity)]);
    }
    println!("maximum rate {} at routing {}", fmt_f(best.1), fmt_f(best.0));
    emit_csv(&["variable", "rate", "fidelity"], &rows, sweep.run.out.as_deref())
}

fn cmd_memory(args: MemoryArgs) -> Result<(), CliError> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let cycles = args.cycles.or(cfg.take("cycles")?).unwrap_or(10);
    let survival = args.survival.or(cfg.take("survival")?).unwrap_or(1.0);
    let theta1 = args.theta1.or(cfg.take("theta1")?).unwrap_or(0.0);
    let theta2 = args.theta2.or(cfg.take("theta2")?).unwrap_or(0.0);
    let common1 = args.common1.or(cfg.take("common1")?).unwrap_or(0.0);
    let common2 = args.common2.or(cfg.take("common2")?).unwrap_or(0.0);
    let bitflip = if args.bitflip {
        true
    } else {
        cfg.take_bool("bitflip")?.unwrap_or(false)
    };
    let out = args.out.clone().or(cfg.take::<PathBuf>("out")?);
    cfg.finish()?;
    positive_field("survival", survival, 0.0, 1.0)?;

    let input = relative_phase_state(0.0);
    let mut rows = Vec::new();
    for k in 0..=cycles {
        let params = MemoryParams {
            cycles: k,
            survival_per_cycle: survival,
            birefringence: (theta1, theta2),
            common_phase: (common1, common2),
            bitflip,
        };
        let (surv, dm) = memory_evolve(&input, &params)?;
        rows.push(vec![
            k.to_string(),
            fmt_f(surv),
            fmt_f(dm.fidelity_to_bell(Bell::PhiPlus)),
        ]);
    }
    emit_csv(&["variable", "rate", "fidelity"], &rows, out.as_deref())
}

fn cmd_oracle_check(args: OracleArgs) -> Result<(), CliError> {
    let mut cfg = ConfigMap::load(args.config.as_deref())?;
    let out = args.out.clone().or(cfg.take::<PathBuf>("out")?);
    cfg.finish()?;

    let tol = 1e-12;
    let amps = protocol::qubit_oracle_eq1();
    let expected = [0b0000usize, 0b0011, 0b1101, 0b1110];
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (idx, amp) in amps.iter().enumerate() {
        let want = if expected.contains(&idx) { 0.5 } else { 0.0 };
        if (amp - Complex64::new(want, 0.0)).norm() > tol {
            failures.push(format!("basis {idx:04b}: amplitude {amp} expected {want}"));
        }
        if expected.contains(&idx) {
            println!("post-gate amplitude |{idx:04b}>: {}", fmt_f(amp.re));
            rows.push(vec![format!("{idx:04b}"), fmt_f(amp.re), fmt_f(amp.im)]);
        }
    }

    let (p, swap) = protocol::qubit_oracle_swap();
    println!("swap projection probability: {}", fmt_f(p));
    if (p - 0.25).abs() > tol {
        failures.push(format!("swap probability {p} expected 0.25"));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let want = [r, 0.0, 0.0, r];
    for (i, amp) in swap.iter().enumerate() {
        if (amp - Complex64::new(want[i], 0.0)).norm() > tol {
            failures.push(format!("swap amplitude {i}: {amp} expected {}", want[i]));
        }
    }
    // every projection branch carries probability 1/4
    for q4 in [false, true] {
        for q2 in [false, true] {
            let (pb, _) = protocol::qubit_oracle_project(q4, q2);
            if (pb - 0.25).abs() > tol {
                failures.push(format!("branch (q4={q4}, q2-={q2}): probability {pb}"));
            }
        }
    }

    if let Some(path) = out.as_deref() {
        emit_csv(&["basis", "amplitude_re", "amplitude_im"], &rows, Some(path))?;
    }
    if failures.is_empty() {
        println!("oracle check passed");
        Ok(())
    } else {
        Err(CliError::CheckFailed(failures.join("; ")))
    }
}
