mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use orthotropic_core::acceptance::{criteria_for, CriterionOutcome, Workbench};
use orthotropic_core::estimates::moser_ledger;
use orthotropic_core::grid::write_field;
use orthotropic_core::solver::solve;
use orthotropic_core::Error;

use config::ExperimentConfig;

const SUMMARY_SCHEMA_VERSION: u32 = 1;
const DEFAULT_OUT: &str = "orthotropic-out";

#[derive(Parser, Debug)]
#[command(name = "orthotropic", version, about = "Regularized orthotropic parabolic solver and estimate checks")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides ORTHOTROPIC_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the sampled suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Space dimension (repeats the first anisotropy threshold). For `moser` it sets the ledger dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Growth exponent.
    #[arg(long, global = true, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Regularization for `solve` and the Caccioppoli solves.
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Last index of the exact exponent ledger.
    #[arg(long, global = true)]
    jmax: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve the regularized problem once and write the field.
    Solve,
    /// Convergence of the ε-sweep toward the reference solve.
    Sweep,
    /// Sampled inequality suites for the potentials and fluxes.
    VerifyLemmas,
    /// Energy estimate constant across the ε-sweep.
    VerifyEnergy,
    /// Caccioppoli inequalities on two grid levels.
    VerifyCaccioppoli,
    /// Sup-gradient bound across radii and ε.
    VerifyGradientBound,
    /// Exponent ledger and the recursion constants.
    Moser,
    /// Every acceptance check.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::VerifyLemmas => "verify-lemmas",
            Command::VerifyEnergy => "verify-energy",
            Command::VerifyCaccioppoli => "verify-caccioppoli",
            Command::VerifyGradientBound => "verify-gradient-bound",
            Command::Moser => "moser",
            Command::All => "all",
        }
    }
}

fn effective_config(cli: &Cli) -> orthotropic_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.n {
        if cli.command == Command::Moser {
            cfg.checks.ledger_n = Some(n);
        } else {
            let first = *cfg
                .problem
                .delta
                .first()
                .ok_or_else(|| Error::param("delta", "must not be empty"))?;
            cfg.problem.delta = vec![first; n];
        }
    }
    if let Some(p) = cli.p {
        cfg.problem.p = p;
    }
    if let Some(eps) = cli.epsilon {
        cfg.problem.epsilon = eps;
        cfg.checks.caccioppoli_epsilon = eps;
    }
    if let Some(j) = cli.jmax {
        cfg.checks.ledger_j_max = j;
    }
    if let Some(seed) = cli.seed {
        cfg.checks.seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(Error::param("threads", "must be positive"));
    }
    cfg.validate()?;
    if cli.command == Command::Moser {
        moser_ledger(cfg.ledger_n(), cfg.checks.ledger_j_max)?;
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("ORTHOTROPIC_OUT").map(PathBuf::from))
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> orthotropic_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

struct RunOutput {
    passed: bool,
    body: Value,
}

fn run_solve(cfg: &ExperimentConfig, out: &Path) -> orthotropic_core::Result<RunOutput> {
    let sc = cfg.scenario();
    let problem = sc.problem(cfg.problem.epsilon, &sc.data()?)?;
    let result = solve(&problem, &cfg.solver)?;
    let diag = fs::File::create(out.join("diagnostics.jsonl"))?;
    result.write_diagnostics_jsonl(BufWriter::new(diag))?;
    let mut files = vec![json!("diagnostics.jsonl")];
    if cfg.output.write_fields {
        let data = write_field(&result.solution, &out.join("solution.json"), cfg.output.field_format)?;
        files.push(json!("solution.json"));
        files.push(json!(data.file_name().and_then(|s| s.to_str()).unwrap_or_default()));
    }
    let d = &result.diagnostics;
    let converged = result.is_converged();
    println!(
        "solve: eps {} steps {} converged {} max residual {:.3e}",
        cfg.problem.epsilon,
        d.len(),
        converged,
        d.iter().map(|r| r.residual).fold(0.0, f64::max)
    );
    Ok(RunOutput {
        passed: converged,
        body: json!({
            "epsilon": cfg.problem.epsilon,
            "steps": d.len(),
            "converged": converged,
            "max_residual": d.iter().map(|r| r.residual).fold(0.0, f64::max),
            "newton_iterations": d.iter().map(|r| r.newton_iterations).sum::<usize>(),
            "cg_iterations": d.iter().map(|r| r.cg_iterations).sum::<usize>(),
            "final_energy": d.last().map(|r| r.energy_after),
            "files": files,
        }),
    })
}

fn run_checks(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> orthotropic_core::Result<RunOutput> {
    let ids = criteria_for(cmd.name()).unwrap_or(&[]);
    let bench = Workbench::new(cfg.acceptance());
    let outcomes: Vec<CriterionOutcome> = ids.iter().map(|&id| bench.run(id)).collect();
    for o in &outcomes {
        println!("{}", o.line());
        for (name, text) in &o.tables {
            fs::write(out.join(name), text)?;
        }
    }
    if cmd == Command::Moser {
        let ledger = moser_ledger(cfg.ledger_n(), cfg.checks.ledger_j_max)?;
        fs::write(out.join("moser_ledger.csv"), ledger.to_csv())?;
    }
    Ok(RunOutput {
        passed: outcomes.iter().all(|o| o.passed),
        body: json!({ "outcomes": outcomes }),
    })
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let out = output_dir(&cli, &cfg);
    match execute(&cli, &cfg, &out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli, cfg: &ExperimentConfig, out: &Path) -> orthotropic_core::Result<bool> {
    fs::create_dir_all(out)?;
    write_json(&out.join("effective_config.json"), cfg)?;
    let started = unix_seconds();
    let clock = Instant::now();
    let run = match cli.command {
        Command::Solve => run_solve(cfg, out)?,
        cmd => run_checks(cmd, cfg, out)?,
    };
    let mut summary = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "subcommand": cli.command.name(),
        "passed": run.passed,
    });
    if let (Value::Object(s), Value::Object(b)) = (&mut summary, run.body) {
        s.extend(b);
    }
    write_json(&out.join("summary.json"), &summary)?;
    write_json(
        &out.join("metadata.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": cli.command.name(),
            "started_unix_s": started,
            "finished_unix_s": unix_seconds(),
            "wall_time_s": clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        }),
    )?;
    println!("{}: {} ({})", cli.command.name(), if run.passed { "PASS" } else { "FAIL" }, out.display());
    Ok(run.passed)
}
