//! Command-line runner.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 the solver or
//! supply rule failed, 3 bad configuration or usage.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::econ::{validate_config, EconomyConfig, Severity};
use crate::equilibrium::{solve, Regime, SteadyStateEquilibrium};
use crate::error::{Error, Result};
use crate::output::{format_float, write_json};
use crate::policy::{supply_path, SupplyRule, TaxSchedule};
use crate::scenario::{golden_checks, ScenarioFile};
use crate::welfare::{
    evaluate, linspace, oracle_report, proposition_report, sweep_tax_parallel, Check, CheckStatus,
    PropositionReport, WelfareReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tokenomics", version, about = "Token economy steady states, tax sweeps and supply paths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one steady state and write equilibrium.json, welfare.json and summary.txt.
    Scenario(ScenarioArgs),
    /// Sweep the burn rate and write sweep.csv and sweep.json.
    Sweep(SweepArgs),
    /// Simulate a token-supply rule and write path.csv.
    Path(PathArgs),
    /// Run the proposition checks, oracle cross-checks and pinned goldens.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to the burning regime that fits the configuration.
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
    #[arg(long, default_value_t = 0.0)]
    pub theta_min: f64,
    #[arg(long)]
    pub theta_max: f64,
    #[arg(long)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    FixedSupply,
    FriedmanTarget,
    TaxAndBurn,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub rule: RuleArg,
    /// Burn rate for tax-and-burn.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "M0", default_value_t = 1.0)]
    pub m0: f64,
    #[arg(long = "q0", default_value_t = 1.0)]
    pub q0: f64,
    #[arg(long = "T")]
    pub periods: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also write the report to <out>/verify.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_SOLVER
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Scenario(a) => run_scenario(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Path(a) => run_supply_path(&a),
        Command::Verify(a) => run_verify(&a),
    }
}

/// Reads a scenario, rejecting configurations with invariant violations.
fn load(path: &Path) -> Result<(ScenarioFile, EconomyConfig)> {
    let file = ScenarioFile::load(path)?;
    let cfg = file.economy();
    let mut errors = Vec::new();
    for v in validate_config(&cfg) {
        match v.severity {
            Severity::Error => errors.push(v),
            Severity::Warning => warn!("{}: {v}", path.display()),
        }
    }
    if !errors.is_empty() {
        return Err(Error::InvalidConfig(errors));
    }
    info!("loaded scenario {:?} from {}", file.name, path.display());
    Ok((file, cfg))
}

fn default_regime(cfg: &EconomyConfig) -> Regime {
    let applicable = Regime::applicable(cfg);
    applicable
        .iter()
        .copied()
        .find(|&r| r != Regime::Friedman)
        .unwrap_or(applicable[0])
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", out.display())))
}

pub fn run_scenario(args: &ScenarioArgs) -> Result<i32> {
    let (_, cfg) = load(&args.config)?;
    let regime = args.regime.unwrap_or_else(|| default_regime(&cfg));
    let eq = solve(&cfg, regime, args.theta)?;
    let report = evaluate(&cfg, &eq)?;
    if eq.congestion_broken {
        warn!("high-state market is not congested at theta = {}", args.theta);
    }
    if eq.return_exceeds_risk_free {
        warn!(
            "expected token return {} exceeds r = {}: formal steady state only",
            eq.expected_return, cfg.r
        );
    }
    create_dir(&args.out)?;
    write_json(&args.out.join("equilibrium.json"), &eq)?;
    write_json(&args.out.join("welfare.json"), &report)?;
    let summary = summary_table(&eq, &report);
    fs::write(args.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}

fn summary_table(eq: &SteadyStateEquilibrium, report: &WelfareReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "regime              {}", eq.regime.name());
    let _ = writeln!(s, "theta               {}", format_float(eq.theta));
    let _ = writeln!(s, "expected return     {}", format_float(eq.expected_return));
    let _ = writeln!(s, "aggregate holdings  {}", format_float(eq.aggregate_holdings));
    let _ = writeln!(s, "welfare             {}", format_float(report.expected_flow_welfare));
    let _ = writeln!(s, "first-best gap      {}", format_float(report.first_best_gap));
    let _ = writeln!(s, "congestion broken   {}", eq.congestion_broken);
    let _ = writeln!(s, "return above r      {}", eq.return_exceeds_risk_free);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<6} {:>12} {:>24} {:>24} {:>24} {:>24}  activities",
        "state", "probability", "price", "tax", "token_return", "aggregate"
    );
    for o in &eq.states {
        let acts: Vec<String> = o.activities.iter().map(|&a| format_float(a)).collect();
        let _ = writeln!(
            s,
            "{:<6} {:>12} {:>24} {:>24} {:>24} {:>24}  {}{}",
            o.state.label(),
            o.probability,
            format_float(o.price),
            format_float(o.tax),
            format_float(o.token_return),
            format_float(o.aggregate_activity),
            acts.join(" "),
            if o.congested { "  (congested)" } else { "" },
        );
    }
    s
}

pub fn run_sweep(args: &SweepArgs) -> Result<i32> {
    if args.points < 2 {
        return Err(Error::Config(format!("--points must be at least 2, got {}", args.points)));
    }
    if !(args.theta_min >= 0.0 && args.theta_max > args.theta_min) {
        return Err(Error::Config(format!(
            "need 0 <= --theta-min < --theta-max, got [{}, {}]",
            args.theta_min, args.theta_max
        )));
    }
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let (_, cfg) = load(&args.config)?;
    let regime = args.regime.unwrap_or_else(|| default_regime(&cfg));
    let grid = linspace(args.theta_min, args.theta_max, args.points);
    let sweep = sweep_tax_parallel(&cfg, regime, &grid, args.jobs)?;
    create_dir(&args.out)?;
    let file = fs::File::create(args.out.join("sweep.csv"))?;
    sweep.write_csv(io::BufWriter::new(file))?;
    write_json(&args.out.join("sweep.json"), &sweep)?;
    match sweep.argmax_theta {
        Some(t) => println!("argmax theta {}", format_float(t)),
        None => println!("no strict equilibrium on the grid"),
    }
    if sweep.all_failed() {
        eprintln!("error: every sweep point failed");
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

pub fn run_supply_path(args: &PathArgs) -> Result<i32> {
    let rule = match (args.rule, args.theta) {
        (RuleArg::FixedSupply, None) => SupplyRule::FixedSupply,
        (RuleArg::FriedmanTarget, None) => SupplyRule::FriedmanTarget,
        (RuleArg::TaxAndBurn, Some(theta)) => SupplyRule::TaxAndBurn(TaxSchedule::flat(theta)),
        (RuleArg::TaxAndBurn, None) => {
            return Err(Error::Config("--rule tax-and-burn needs --theta".into()))
        }
        (_, Some(_)) => return Err(Error::Config("--theta only applies to --rule tax-and-burn".into())),
    };
    let (_, cfg) = load(&args.config)?;
    let path = supply_path(rule, &cfg, args.m0, args.q0, args.periods)?;
    create_dir(&args.out)?;
    let file = fs::File::create(args.out.join("path.csv"))?;
    path.write_csv(io::BufWriter::new(file))?;
    println!(
        "M_T / M_0 = {}",
        format_float(path.nominal[path.periods()] / path.nominal[0])
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    scenario: &'a str,
    passed: bool,
    checks: &'a [Check],
}

pub fn run_verify(args: &VerifyArgs) -> Result<i32> {
    let (file, cfg) = load(&args.config)?;
    let mut report: PropositionReport = proposition_report(&cfg);
    report.checks.extend(oracle_report(&cfg));
    report.checks.extend(golden_checks(&cfg, &file.goldens));

    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "skipped",
        };
        println!("{status:<8} {:<36} {}", c.name, c.detail);
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(
            &out.join("verify.json"),
            &VerifyReport {
                scenario: &file.name,
                passed: report.passed(),
                checks: &report.checks,
            },
        )?;
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}
