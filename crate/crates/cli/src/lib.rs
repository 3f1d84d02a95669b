//! The `lpbal` command line: solve and evaluate load-balancing instances,
//! compute brute-force baselines, verify the inequality suites, run subset
//! selection, and generate random instances.
//!
//! Exit codes: 0 success, 1 infeasibility or validation error, 2 internal
//! limit breach (support caps, iteration and round limits, numerics).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use lpbal_core::balance::{self, SolverConfig};
use lpbal_core::brute;
use lpbal_core::dist::PNorm;
use lpbal_core::error::Error;
use lpbal_core::instance;
use lpbal_core::select::{select, SelectConfig};
use lpbal_core::verify;

/// Environment variable holding the default config path for `solve`.
pub const CONFIG_ENV: &str = "LPBAL_CONFIG";

#[derive(Parser)]
#[command(
    name = "lpbal",
    version,
    about = "Stochastic lp load balancing solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a load-balancing instance and emit a replayable report.
    Solve {
        instance: PathBuf,
        /// Solver config JSON; falls back to $LPBAL_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate E ||loads||_p for a given assignment.
    Evaluate {
        instance: PathBuf,
        assignment: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Exact optimum by enumerating all assignments (m^n capped at 10^6).
    BruteForce { instance: PathBuf },
    /// Run the moment/norm/tail inequality suites.
    VerifyBounds {
        #[arg(long, default_value_t = 200)]
        families: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Comma-separated list of p values.
        #[arg(long, default_value = "1.5,2,3,7")]
        p: String,
        /// Precondition constant for the converse norm bound.
        #[arg(long, default_value_t = 2f64.powi(-10))]
        alpha0: f64,
    },
    /// Subset selection with a p-moment objective.
    SubsetSelect {
        /// Items document: {"p": ..., "items": [dist, ...]}.
        instance: PathBuf,
        /// Region document: cardinality, explicit, or partition.
        region: PathBuf,
    },
    /// Generate a random instance.
    GenRandom {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// p value or "inf".
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 3)]
        support: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SupportCapExceeded { .. }
        | Error::NoConvergence(_)
        | Error::Numerical(_)
        | Error::MatchingInfeasible(_)
        | Error::Overflow(_) => 2,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::from)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_p_arg(text: &str) -> Result<PNorm, Error> {
    if text == "inf" {
        return Ok(PNorm::INFINITY);
    }
    let v: f64 = text
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse p from {text:?}")))?;
    PNorm::new(v)
}

fn load_config(explicit: &Option<PathBuf>) -> Result<SolverConfig, Error> {
    let path = match explicit {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
    };
    let cfg: SolverConfig = match path {
        Some(p) => serde_json::from_str(&read(&p)?)?,
        None => SolverConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Solve {
            instance: path,
            config,
            out,
        } => {
            let (inst, p) = instance::parse_instance(&read(&path)?)?;
            let cfg = load_config(&config)?;
            let (_, report) = balance::solve(&inst, p, &cfg)?;
            emit(&out, &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Evaluate {
            instance: ipath,
            assignment: apath,
            mc_samples,
            seed,
        } => {
            let (inst, p) = instance::parse_instance(&read(&ipath)?)?;
            let asg = instance::parse_assignment(&read(&apath)?, inst.machines())?;
            let norm = brute::evaluate_assignment(&inst, &asg, p, mc_samples, seed)?;
            println!("{}", serde_json::to_string_pretty(&norm)?);
            Ok(0)
        }
        Command::BruteForce { instance: path } => {
            let (inst, p) = instance::parse_instance(&read(&path)?)?;
            let result = brute::brute_force_opt(&inst, p, 20_000, 12345)?;
            let doc = json!({
                "assignment": result.assignment.machine_of(),
                "value": result.value,
                "exact": result.exact,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(0)
        }
        Command::VerifyBounds {
            families,
            seed,
            p,
            alpha0,
        } => {
            let ps: Vec<f64> = p
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad p value {s:?}")))
                })
                .collect::<Result<_, _>>()?;
            let outcomes = verify::run_all(families, seed, &ps, alpha0)?;
            let mut all_pass = true;
            for o in &outcomes {
                println!("{o}");
                all_pass &= o.passed();
            }
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::SubsetSelect {
            instance: ipath,
            region: rpath,
        } => {
            let (sel, p) = instance::parse_selection(&read(&ipath)?, &read(&rpath)?)?;
            let oracle = sel.build_oracle();
            let report = select(&sel.items, p, oracle.as_ref(), &SelectConfig::default())?;
            let doc = json!({
                "chosen": report.chosen.iter().map(|&b| u8::from(b)).collect::<Vec<_>>(),
                "accepted_estimate": report.accepted_estimate,
                "guaranteed_moment": report.guaranteed_moment,
                "degenerate": report.degenerate,
                "monotone_acceptance": report.monotone_acceptance,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(0)
        }
        Command::GenRandom {
            m,
            n,
            p,
            support,
            seed,
            out,
        } => {
            if m == 0 || n == 0 {
                return Err(Error::InvalidParameter("m and n must be positive".into()));
            }
            let p = parse_p_arg(&p)?;
            let inst = instance::gen_random(m, n, p, support, seed);
            emit(&out, &instance::write_instance(&inst, p))?;
            Ok(0)
        }
    }
}

/// Parses and runs one invocation; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::SupportCapExceeded { .. } = err {
                eprintln!(
                    "hint: the instance is too large for exact enumeration; \
                     use `evaluate` with --mc-samples for a seeded Monte-Carlo \
                     estimate, or shrink the instance"
                );
            }
            exit_code_for(&err)
        }
    }
}
