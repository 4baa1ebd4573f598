//! Command-line front-end for `advmdp`: MDP and experiment files, attack and
//! solver runs, the verification report, and CSV emitters for plotting.
//!
//! Exit codes are stable: 0 on success, 1 when a verification check fails,
//! 2 for unreadable or invalid input.

pub mod commands;
pub mod error;
pub mod files;
pub mod output;

use std::path::{Path, PathBuf};

use advmdp::mdp::Mode;
use advmdp::verify::{CheckId, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK};
use files::{load_mdp, Experiment, ExperimentConfig};
use output::{sibling, write_file};

#[derive(Debug, Parser)]
#[command(name = "advmdp", version, about = "Evasion attacks on fixed policies in finite MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Max,
    Min,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Max => Mode::Max,
            ModeArg::Min => Mode::Min,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal (max) or pessimal (min) values and a deterministic policy.
    Solve {
        /// MDP file or `fixture:<name>`.
        #[arg(long)]
        mdp: String,
        #[arg(long, value_enum, default_value = "max")]
        mode: ModeArg,
        /// Output JSON file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the configured attacks and writes a CSV plus a JSON sibling.
    Attack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mdp: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the verification checks and writes a JSON report.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restricts the run to the named checks, in the given order.
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Appends a check that always fails.
        #[arg(long, hide = true)]
        force_fail: bool,
    },
    /// Values of random policies, and of admissible perturbations when a
    /// config is given (written to `<out>_adv.csv`).
    Polytope {
        #[arg(long)]
        mdp: Option<String>,
        #[arg(short = 'n', default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learning curves of the learned attackers over the config's seeds, with
    /// a per-attacker summary in `<out>_summary.csv`.
    Learncurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mdp: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn experiment(config: &Path, mdp: Option<&str>, seed: Option<u64>) -> CliResult<Experiment> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Experiment::resolve(cfg, mdp)
}

fn output_path(flag: Option<PathBuf>, exp: &Experiment) -> CliResult<PathBuf> {
    flag.or_else(|| exp.config.output.clone())
        .ok_or_else(|| CliError::Input("no output path: pass --out or set \"output\" in the config".into()))
}

fn parse_checks(names: &[String]) -> CliResult<Vec<CheckId>> {
    if names.is_empty() {
        return Ok(CheckId::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            CheckId::from_name(n).ok_or_else(|| {
                let known: Vec<&str> = CheckId::ALL.iter().map(|c| c.name()).collect();
                CliError::Input(format!("unknown check {n:?}; known: {}", known.join(", ")))
            })
        })
        .collect()
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let cap = commands::enum_cap()?;
    match cli.command {
        Command::Solve { mdp, mode, out } => {
            let result = commands::cmd_solve(&mdp, mode.into())?;
            let text = format!("{}\n", serde_json::to_string_pretty(&result).expect("solve output serializes"));
            match out {
                Some(path) => write_file(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Attack { config, mdp, seed, out } => {
            let exp = experiment(&config, mdp.as_deref(), seed)?;
            let path = output_path(out, &exp)?;
            let result = commands::cmd_attack(&exp, cap)?;
            write_file(&path, &result.csv()?)?;
            write_file(&sibling(&path, "", "json"), &result.json())
        }
        Command::Verify { seed, out, checks, force_fail } => {
            let ids = parse_checks(&checks)?;
            let cfg = RunConfig { force_fail, ..RunConfig::default() };
            let report = commands::cmd_verify(seed, &ids, &cfg);
            let text = commands::report_json(&report);
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
            for c in &report.checks {
                eprintln!("{} {}", c.status(), c.name);
            }
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed { failed, total: report.checks.len() });
            }
            Ok(())
        }
        Command::Polytope { mdp, n, seed, config, out } => {
            let exp = config.as_deref().map(|c| experiment(c, mdp.as_deref(), None)).transpose()?;
            let model_mdp = match (&exp, &mdp) {
                (Some(exp), _) => exp.mdp.clone(),
                (None, Some(reference)) => load_mdp(reference)?.0,
                (None, None) => return Err(CliError::Input("polytope needs --mdp or --config".into())),
            };
            if model_mdp.num_states > 3 {
                eprintln!("warning: {} states cannot be plotted directly", model_mdp.num_states);
            }
            let result = commands::cmd_polytope(&model_mdp, n, seed, exp.as_ref(), cap)?;
            write_file(&out, &result.policies)?;
            if let Some(adv) = result.adversarial {
                write_file(&sibling(&out, "_adv", "csv"), &adv)?;
            }
            Ok(())
        }
        Command::Learncurve { config, mdp, out } => {
            let exp = experiment(&config, mdp.as_deref(), None)?;
            let path = output_path(out, &exp)?;
            let result = commands::cmd_learncurve(&exp, cap)?;
            write_file(&path, &result.curves)?;
            write_file(&sibling(&path, "_summary", "csv"), &result.summary)
        }
    }
}
