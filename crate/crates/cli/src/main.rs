//! `kacpru` command-line driver: resolves a configuration from flags and an
//! optional JSON file, runs the exact suite or an experiment, and writes
//! `report.json` plus `tables/*.csv`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use kacpru::experiments::{
    dbproj_experiment, distinguish_experiment, invariance_checks, mixing_experiment, twirl_report, verify_suite,
    with_threads, write_csv, DbProjConfig, DistinguishConfig, ExperimentReport, Family, MixingConfig, VerifyConfig,
    DB_SLACK, FORWARD_SLACK,
};
use kacpru::kacwalk::DEFAULT_DENSE_CAP;
use kacpru::prf::{prf_report, ToyKey};
use kacpru::{Error, Flag, KacParams};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const THREADS_ENV: &str = "KACPRU_THREADS";
const MAX_T: usize = 4;
const MAX_N: u32 = 8;

#[derive(Parser)]
#[command(name = "kacpru", version, about = "Parallel Kac's walk PRU simulator and verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every exact identity check.
    Verify(Opts),
    /// Run one experiment.
    Experiment {
        name: Experiment,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run one experiment over a grid of `n` or `T` values.
    Sweep {
        name: Experiment,
        #[arg(long)]
        over: Axis,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Experiment {
    Dbproj,
    Twirl,
    Invariance,
    Mixing,
    Distinguish,
    Prf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Axis {
    N,
    T,
}

/// Flags shared by every subcommand. Each overrides the same key of `--config`.
#[derive(Args, Clone, Debug, Default)]
struct Opts {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    d: Option<u32>,
    /// Walk length.
    #[arg(long = "T")]
    steps: Option<usize>,
    /// Number of queries.
    #[arg(long)]
    t: Option<usize>,
    /// Workspace qubits of the adversary.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    trials: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    threads: Option<i64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Families for `distinguish` (comma-separated).
    #[arg(long, value_delimiter = ',')]
    family: Vec<String>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest `2^n` simulated with dense matrices.
    #[arg(long)]
    dense_cap: Option<usize>,
    /// Moment order for `mixing` (1 or 2); both when absent.
    #[arg(long)]
    copies: Option<u32>,
    /// Number of trailing inverse queries for `distinguish`.
    #[arg(long)]
    inverse: Option<usize>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<u32>,
    d: Option<u32>,
    #[serde(rename = "T")]
    steps: Option<usize>,
    t: Option<usize>,
    m: Option<u32>,
    trials: Option<i64>,
    seed: Option<u64>,
    threads: Option<i64>,
    out: Option<PathBuf>,
    family: Option<Vec<String>>,
    dense_cap: Option<usize>,
    copies: Option<u32>,
    inverse: Option<usize>,
}

/// Fully resolved configuration, echoed into every report.
#[derive(Clone, Debug, Serialize)]
struct Config {
    command: String,
    n: u32,
    d: u32,
    #[serde(rename = "T")]
    steps: usize,
    t: usize,
    m: u32,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
    out: PathBuf,
    families: Vec<Family>,
    dense_cap: usize,
    copies: Vec<u32>,
    inverse: usize,
    db_slack: f64,
    forward_slack: f64,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn positive(name: &str, v: i64) -> CliResult<usize> {
    if v <= 0 {
        return Err(usage(format!("--{name} must be positive, got {v}")));
    }
    Ok(v as usize)
}

fn default_n(cmd: Option<Experiment>) -> u32 {
    match cmd {
        None => 2,
        Some(Experiment::Dbproj | Experiment::Prf) => 4,
        Some(_) => 3,
    }
}

fn resolve(cmd: Option<Experiment>, opts: &Opts) -> CliResult<Config> {
    let file = match &opts.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let n = opts.n.or(file.n).unwrap_or_else(|| default_n(cmd));
    if !(2..=MAX_N).contains(&n) {
        return Err(usage(format!("n must lie in 2..={MAX_N}, got {n}")));
    }
    let standard = KacParams::standard(n)?;
    let d = opts.d.or(file.d).unwrap_or(if cmd.is_none() { 2 } else { standard.d });
    let steps = opts.steps.or(file.steps).unwrap_or(standard.steps);
    let t = opts.t.or(file.t).unwrap_or(match cmd {
        None | Some(Experiment::Dbproj | Experiment::Distinguish) => 2,
        Some(_) => 1,
    });
    if t > MAX_T {
        return Err(usage(format!("t must be at most {MAX_T}, got {t}")));
    }
    let trials = positive("trials", opts.trials.or(file.trials).unwrap_or(match cmd {
        Some(Experiment::Twirl) => 10_000,
        _ => 2000,
    }))?;
    let threads = match opts.threads.or(file.threads) {
        Some(v) => Some(positive("threads", v)?),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(positive(THREADS_ENV, s.trim().parse().map_err(|_| usage(format!("{THREADS_ENV} is not an integer: {s}")))?)?),
            Err(_) => None,
        },
    };
    let seed = match opts.seed.or(file.seed) {
        Some(s) => s,
        None => {
            let s = rand::rngs::OsRng.next_u64();
            eprintln!("seed: {s} (drawn from OS entropy)");
            s
        }
    };
    let names = if !opts.family.is_empty() { opts.family.clone() } else { file.family.unwrap_or_default() };
    let families = if names.is_empty() {
        vec![Family::HpcShort, Family::HpcLong, Family::Haar, Family::HaarSandwich, Family::PrExact]
    } else {
        names
            .iter()
            .map(|s| s.parse::<Family>().map_err(|_| usage(format!("unknown family {s:?}"))))
            .collect::<CliResult<Vec<_>>>()?
    };
    let copies = match opts.copies.or(file.copies) {
        None => vec![1, 2],
        Some(k @ (1 | 2)) => vec![k],
        Some(k) => return Err(usage(format!("copies must be 1 or 2, got {k}"))),
    };
    let inverse = opts.inverse.or(file.inverse).unwrap_or(0);
    if inverse > t {
        return Err(usage(format!("{inverse} inverse queries exceed t = {t}")));
    }
    Ok(Config {
        command: cmd.map_or("verify".into(), |c| format!("{c:?}").to_lowercase()),
        n,
        d,
        steps,
        t,
        m: opts.m.or(file.m).unwrap_or(1),
        trials,
        seed,
        threads,
        out: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("kacpru-out")),
        families,
        dense_cap: opts.dense_cap.or(file.dense_cap).unwrap_or(DEFAULT_DENSE_CAP),
        copies,
        inverse,
        db_slack: DB_SLACK,
        forward_slack: FORWARD_SLACK,
    })
}

fn check_dense(cfg: &Config) -> CliResult<()> {
    let dim = 1usize << cfg.n;
    if dim > cfg.dense_cap {
        return Err(CliError::Lib(Error::Resource {
            what: "dense walk dimension 2^n".into(),
            needed: dim as u128,
            cap: cfg.dense_cap as u128,
        }));
    }
    Ok(())
}

fn mixing_steps(last: usize) -> Vec<usize> {
    let mut steps = vec![0];
    let mut s = 1;
    while s < last {
        steps.push(s);
        s *= 2;
    }
    if last > 0 {
        steps.push(last);
    }
    steps
}

fn run_experiment(name: Experiment, cfg: &Config) -> CliResult<ExperimentReport> {
    let params = || KacParams::new(cfg.n, cfg.d, cfg.steps);
    let rep = match name {
        Experiment::Dbproj => {
            check_dense(cfg)?;
            let c = DbProjConfig { params: params()?, t: cfg.t, m: cfg.m, trials: cfg.trials, seed: cfg.seed, batches: 100 };
            dbproj_experiment(&c)?.report(&c)?
        }
        Experiment::Twirl => twirl_report(cfg.n, cfg.trials, cfg.t, cfg.seed, 100)?,
        Experiment::Invariance => invariance_checks(cfg.n, cfg.t, 20, &[cfg.n], cfg.seed)?.report(cfg.seed)?,
        Experiment::Mixing => {
            let mut rep = ExperimentReport::new("mixing", Some(cfg.seed), serde_json::Value::Null);
            for &k in &cfg.copies {
                let c = MixingConfig {
                    n: cfg.n,
                    d: cfg.d,
                    steps: mixing_steps(cfg.steps),
                    copies: k,
                    trials: cfg.trials,
                    seed: cfg.seed,
                    batches: 100,
                };
                let sub = mixing_experiment(&c)?.report(&c)?;
                rep.values[format!("k{k}")] = sub.values.clone();
                rep.absorb(&format!("k{k}"), sub);
            }
            rep
        }
        Experiment::Distinguish => {
            check_dense(cfg)?;
            let mut directions = vec![false; cfg.t - cfg.inverse];
            directions.extend(std::iter::repeat(true).take(cfg.inverse));
            let c = DistinguishConfig {
                n: cfg.n,
                d: cfg.d,
                steps: cfg.steps,
                m: cfg.m,
                directions,
                families: cfg.families.clone(),
                trials: cfg.trials,
                seed: cfg.seed,
                adversary_seed: None,
                batches: 100,
            };
            distinguish_experiment(&c)?.report(&c)?
        }
        Experiment::Prf => {
            let key = ToyKey::random(&mut kacpru::numerics::stream_rng(cfg.seed, 0x4B45));
            prf_report(params()?, &key, cfg.seed)?
        }
    };
    Ok(rep)
}

fn with_echo(mut rep: ExperimentReport, cfg: &Config) -> CliResult<ExperimentReport> {
    let run = serde_json::to_value(cfg).map_err(Error::from)?;
    rep.config = serde_json::json!({ "run": run, "experiment": rep.config });
    Ok(rep)
}

fn sweep(name: Experiment, axis: Axis, values: &[u64], base: &Config) -> CliResult<ExperimentReport> {
    let mut rep = ExperimentReport::new(format!("sweep_{}", base.command), Some(base.seed), serde_json::Value::Null);
    let mut parts = Vec::new();
    for &v in values {
        let mut cfg = base.clone();
        let label = match axis {
            Axis::N => {
                let n = u32::try_from(v).ok().filter(|n| (2..=MAX_N).contains(n)).ok_or_else(|| usage(format!("sweep value n = {v} outside 2..={MAX_N}")))?;
                let std = KacParams::standard(n)?;
                cfg.n = n;
                cfg.d = std.d;
                cfg.steps = std.steps;
                format!("n{n}")
            }
            Axis::T => {
                cfg.steps = v as usize;
                format!("T{v}")
            }
        };
        let sub = run_experiment(name, &cfg)?;
        parts.push(serde_json::json!({ "point": label, "values": sub.values }));
        rep.absorb(&label, sub);
    }
    rep.values = serde_json::Value::Array(parts);
    Ok(rep)
}

fn emit(rep: &ExperimentReport, cfg: &Config, table: &str) -> CliResult<()> {
    std::fs::create_dir_all(cfg.out.join("tables")).map_err(|e| CliError::Lib(e.into()))?;
    rep.write_json(&cfg.out.join("report.json"))?;
    write_csv(&rep.rows, &cfg.out.join("tables").join(format!("{table}.csv")))?;
    for c in &rep.checks {
        let flag = match c.flag {
            Flag::Pass => "PASS",
            Flag::Fail => "FAIL",
            Flag::Informational => "INFO",
        };
        let bound = c.bound.map_or(String::new(), |b| format!(" bound {b:.6e}"));
        let reference = if c.reference.is_empty() { String::new() } else { format!(" [{}]", c.reference) };
        println!("{flag} {} measured {:.6e}{bound}{reference}", c.name, c.measured);
    }
    if let Some(d) = &rep.disclaimer {
        println!("note: {d}");
    }
    println!("report: {}", cfg.out.join("report.json").display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    let (cmd, opts) = match &cli.command {
        Command::Verify(o) => (None, o),
        Command::Experiment { name, opts } | Command::Sweep { name, opts, .. } => (Some(*name), opts),
    };
    let cfg = resolve(cmd, opts)?;
    let start = Instant::now();
    let rep = with_threads(cfg.threads, || -> CliResult<ExperimentReport> {
        match &cli.command {
            Command::Verify(_) => Ok(verify_suite(&VerifyConfig { n: cfg.n, d: cfg.d, t_max: cfg.t, seed: cfg.seed })?),
            Command::Experiment { name, .. } => run_experiment(*name, &cfg),
            Command::Sweep { name, over, values, .. } => sweep(*name, *over, values, &cfg),
        }
    })??;
    let mut rep = with_echo(rep, &cfg)?;
    rep.wall_clock_s = start.elapsed().as_secs_f64();
    emit(&rep, &cfg, &rep.experiment.clone())?;
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Resource { .. } => EXIT_RESOURCE,
                Error::Invalid(_) | Error::Contract(_) | Error::Dimension { .. } => EXIT_USAGE,
                _ => EXIT_FAIL,
            })
        }
    }
}
