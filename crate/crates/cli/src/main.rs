//! `turret`: command-line front end for the perimeter-defense simulator.
//!
//! Exit codes: 0 success, 1 domain violation, 2 I/O or parse error, 3 a
//! policy made an illegal decision.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use turret_core::adversary::{random_sequence, stream_burst_adversary, AdversaryError, SequenceSpec};
use turret_core::engine::{simulate_sequence, EngineError};
use turret_core::offline::{
    brute_force_optimal, build_reachability_graph, longest_path_schedule, to_trp_tw, Schedule, TimeWindow,
    DEFAULT_ORACLE_CAP,
};
use turret_core::online::PolicyKind;
use turret_core::regimes::{competitive_ratio, sweep, write_csv, Oracle, OracleMode, RatioError, SweepGrid};
use turret_core::{InputSequence, ProblemInstance};

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(message: impl fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn io(message: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn illegal(message: impl fmt::Display) -> Self {
        Self {
            code: 3,
            message: message.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::IllegalLock { .. } => Failure::illegal(e),
            other => Failure::domain(other),
        }
    }
}

impl From<AdversaryError> for Failure {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Engine(inner) => inner.into(),
            other => Failure::domain(other),
        }
    }
}

impl From<RatioError> for Failure {
    fn from(e: RatioError) -> Self {
        match e {
            RatioError::Engine(inner) => inner.into(),
            other => Failure::domain(other),
        }
    }
}

type Outcome = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "turret", version, about = "Single-turret perimeter defense: simulate, schedule, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an instance file against the model constraints.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run an online policy and write the result and event log.
    Simulate(SimulateArgs),
    /// Solve an instance offline.
    Offline(OfflineArgs),
    /// Compare an online policy with an offline oracle.
    Compete(CompeteArgs),
    /// Tabulate the velocity regimes over a (rho, v) grid as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Sequence JSON file.
    #[arg(long, conflicts_with_all = ["generate", "adversary"])]
    sequence: Option<PathBuf>,
    /// Random sequence spec JSON file, drawn with --seed.
    #[arg(long, conflicts_with = "adversary")]
    generate: Option<PathBuf>,
    /// Use the adaptive stream-and-burst adversary instead of a fixed sequence.
    #[arg(long)]
    adversary: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "sit")]
    policy: PolicyKind,
    /// Initial heading; defaults to the policy's own starting heading.
    #[arg(long, allow_negative_numbers = true)]
    gamma0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Result (or adversary transcript) JSON; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event log as JSON lines; defaults to `<out>.events.jsonl` when --out is set.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Dag,
    Brute,
}

#[derive(Args, Debug)]
struct OfflineArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Intruders as a sequence JSON file, with per-intruder radii.
    #[arg(long)]
    sequence: PathBuf,
    #[arg(long, value_enum, default_value = "dag")]
    method: Method,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma0: f64,
    /// Include the time-window form of every intruder in the output.
    #[arg(long)]
    emit_trptw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompeteArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "sit")]
    policy: PolicyKind,
    #[arg(long, allow_negative_numbers = true)]
    gamma0: Option<f64>,
    #[arg(long, default_value = "brute_force")]
    oracle: OracleMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Base parameters N = 40, omega = 1, theta = pi/4, delta = 0.01, r = 1 on
    /// the default grid.
    #[arg(long)]
    figure4: bool,
    /// Base instance; rho and v are taken from the grids.
    #[arg(long, required_unless_present = "figure4")]
    instance: Option<PathBuf>,
    /// Comma list or `start:stop:count`.
    #[arg(long)]
    rho_grid: Option<String>,
    #[arg(long)]
    v_grid: Option<String>,
    /// Comma list of burst offsets for the lower-bound intervals.
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    let p: ProblemInstance = read_json(path)?;
    let violations = p.validate();
    if violations.is_empty() {
        Ok(p)
    } else {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(Failure::domain(format!("invalid instance: {}", listed.join("; "))))
    }
}

fn load_sequence(p: &ProblemInstance, input: &InputArgs) -> Result<InputSequence, Failure> {
    let seq = match (&input.sequence, &input.generate) {
        (Some(path), _) => read_json(path)?,
        (None, Some(path)) => {
            let spec: SequenceSpec = read_json(path)?;
            random_sequence(p, input.seed, &spec).map_err(Failure::domain)?
        }
        (None, None) => InputSequence::empty(),
    };
    seq.validate(p).map_err(Failure::domain)?;
    Ok(seq)
}

fn write_text(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(Failure::io)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types always serialize");
    s.push('\n');
    s
}

fn cmd_validate(instance: &Path) -> Outcome {
    let p: ProblemInstance = read_json(instance)?;
    let violations = p.validate();
    if violations.is_empty() {
        println!("ok");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::domain(format!("{} constraint(s) violated", violations.len())))
}

fn events_path(args: &SimulateArgs) -> Option<PathBuf> {
    args.events
        .clone()
        .or_else(|| args.out.as_ref().map(|o| o.with_extension("events.jsonl")))
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let p = load_instance(&args.input.instance)?;
    let mut policy = args.policy.build(args.input.seed);
    if args.input.adversary {
        let t = stream_burst_adversary(&p, policy.as_mut())?;
        write_text(args.out.as_deref(), &to_json(&t))?;
        if let Some(path) = events_path(args) {
            write_text(Some(&path), &t.result.event_log_jsonl())?;
        }
        eprintln!(
            "{}: captured {} of {}; offline witness {}",
            t.policy,
            t.online_captures,
            t.intruders.len(),
            t.offline_value()
        );
        return Ok(());
    }
    let seq = load_sequence(&p, &args.input)?;
    let gamma0 = args.gamma0.unwrap_or_else(|| args.policy.default_gamma0(&p));
    let horizon = args.horizon.unwrap_or(f64::INFINITY);
    let result = simulate_sequence(&p, &seq, policy.as_mut(), gamma0, horizon)?;
    write_text(args.out.as_deref(), &to_json(&result))?;
    if let Some(path) = events_path(args) {
        write_text(Some(&path), &result.event_log_jsonl())?;
    }
    eprintln!("captured {} lost {}", result.captured_count(), result.lost_count());
    Ok(())
}

#[derive(Serialize)]
struct OfflineReport {
    method: &'static str,
    value: usize,
    schedule: Schedule,
    #[serde(skip_serializing_if = "Option::is_none")]
    windows: Option<Vec<TimeWindow>>,
}

fn cmd_offline(args: &OfflineArgs) -> Outcome {
    let p = load_instance(&args.instance)?;
    let seq: InputSequence = read_json(&args.sequence)?;
    seq.validate(&p).map_err(Failure::domain)?;
    let intruders = seq.intruders();
    let (method, schedule) = match args.method {
        Method::Dag => {
            let g = build_reachability_graph(&p, &intruders, args.gamma0).map_err(Failure::domain)?;
            ("dag", longest_path_schedule(&g, &p))
        }
        Method::Brute => {
            let (_, s) =
                brute_force_optimal(&p, &intruders, args.gamma0, DEFAULT_ORACLE_CAP).map_err(Failure::domain)?;
            ("brute", s)
        }
    };
    let windows = if args.emit_trptw {
        Some(to_trp_tw(&p, &intruders).map_err(Failure::domain)?)
    } else {
        None
    };
    let report = OfflineReport {
        method,
        value: schedule.value(),
        schedule,
        windows,
    };
    write_text(args.out.as_deref(), &to_json(&report))?;
    eprintln!("{method}: {} captured", report.value);
    Ok(())
}

fn cmd_compete(args: &CompeteArgs) -> Outcome {
    let p = load_instance(&args.input.instance)?;
    let mut policy = args.policy.build(args.input.seed);
    let report = if args.input.adversary {
        let t = stream_burst_adversary(&p, policy.as_mut())?;
        let mut fresh = args.policy.build(args.input.seed);
        let oracle = match args.oracle {
            OracleMode::BruteForce => Oracle::BruteForce(DEFAULT_ORACLE_CAP),
            OracleMode::Dag => Oracle::Dag,
            OracleMode::Witness => Oracle::Witness(&t.witness),
        };
        competitive_ratio(&p, &t.sequence, fresh.as_mut(), 0.0, oracle)?
    } else {
        let seq = load_sequence(&p, &args.input)?;
        let gamma0 = args.gamma0.unwrap_or_else(|| args.policy.default_gamma0(&p));
        let oracle = match args.oracle {
            OracleMode::BruteForce => Oracle::BruteForce(DEFAULT_ORACLE_CAP),
            OracleMode::Dag => Oracle::Dag,
            OracleMode::Witness => {
                return Err(Failure::domain("the witness oracle needs --adversary"));
            }
        };
        competitive_ratio(&p, &seq, policy.as_mut(), gamma0, oracle)?
    };
    println!("online (m_A): {}", report.online);
    println!("offline (m_O): {}", report.offline);
    println!("ratio: {}", report.ratio);
    if let Some(path) = &args.out {
        write_text(Some(path), &to_json(&report))?;
    }
    Ok(())
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = |e: &dyn fmt::Display| Failure::domain(format!("bad grid '{s}': {e}"));
    if let Some((range, count)) = s.rsplit_once(':').filter(|_| s.matches(':').count() == 2) {
        let (start, stop) = range.split_once(':').expect("two colons");
        let start: f64 = start.trim().parse().map_err(|e| bad(&e))?;
        let stop: f64 = stop.trim().parse().map_err(|e| bad(&e))?;
        let count: usize = count.trim().parse().map_err(|e| bad(&e))?;
        return Ok(match count {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|e| bad(&e)))
        .collect()
}

fn cmd_sweep(args: &SweepArgs) -> Outcome {
    let mut grid = SweepGrid::figure4();
    if !args.figure4 {
        let path = args.instance.as_ref().expect("clap requires --instance without --figure4");
        grid.base = read_json(path)?;
    }
    if let Some(s) = &args.rho_grid {
        grid.rho = parse_grid(s)?;
    }
    if let Some(s) = &args.v_grid {
        grid.v = parse_grid(s)?;
    }
    if let Some(j) = &args.j {
        grid.j = j.clone();
    }
    let rows = sweep(&grid).map_err(Failure::domain)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(Failure::io)?;
    write_text(args.out.as_deref(), &String::from_utf8(buf).expect("CSV is ASCII"))?;
    eprintln!("{} rows", rows.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TURRET_LOG")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { instance } => cmd_validate(instance),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Offline(args) => cmd_offline(args),
        Command::Compete(args) => cmd_compete(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
