mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use nhcouple::analysis::DriftThresholds;
use nhcouple::harness::{builtin_scenarios, run_all, run_scenario, summary_table, write_outputs, RunOptions, Scenario};
use nhcouple::model::GroupTag;
use nhcouple::verify::{run_checks, CheckOptions, Fault};
use nhcouple::{FullState, SolverSettings, StepperKind, SystemId, SystemSpec};

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_STEP: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

const AFTER_HELP: &str = "\
Defaults: newton_tol = 1e-12 (relative to 1 + max|q̇|), newton_max_iter = 50,
constraint_tol = 1e-10, drift_factor = 1, drift floor = 1e-8·(1 + |I(0)|),
early window = first 10% of samples.

Exit codes: 0 success, 1 usage or configuration error, 2 a step failed,
3 verification mismatch.";

/// Benchmark harness for nonholonomically coupled mechanical systems.
#[derive(Debug, Parser)]
#[command(name = "nhcouple", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the catalog systems.
    List,
    /// Integrate one scenario and write its CSV and SVG files.
    Run(Box<RunArgs>),
    /// Run the 30 benchmark scenarios and print the bounded/drift table.
    Reproduce(ReproduceArgs),
    /// Run the self-check suite.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
#[command(after_help = "Numbers also accept pi, pi/<n> and <k>*pi. Vectors are comma separated.")]
struct RunArgs {
    /// Scenario file of `key = value` lines; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System id (see `nhcouple list`).
    #[arg(long)]
    system: Option<String>,
    /// Perturbation parameter [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    /// Method: dla<alpha>, dla01, lf, dd or ref<substeps> [default: dd].
    #[arg(long)]
    method: Option<String>,
    /// Step size [default: 0.1].
    #[arg(long)]
    dt: Option<String>,
    /// Final time [default: 100].
    #[arg(long)]
    t_end: Option<String>,
    /// Passenger position [default: 0,…,0].
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Driver position [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    /// Passenger velocity, must satisfy the constraint [default: 0,…,0].
    #[arg(long, allow_hyphen_values = true)]
    xdot0: Option<String>,
    /// Driver velocity [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    zdot0: Option<String>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every n-th step to the CSV [default: 1].
    #[arg(long)]
    log_every: Option<String>,
    /// Drift classification factor [default: 1].
    #[arg(long, allow_hyphen_values = true)]
    drift_factor: Option<String>,
    /// Newton tolerance [default: 1e-12].
    #[arg(long, allow_hyphen_values = true)]
    newton_tol: Option<String>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Worker threads (0 = one per processor).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Drift classification factor.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    drift_factor: f64,
    /// Newton tolerance.
    #[arg(long, default_value = "1e-12", allow_hyphen_values = true)]
    newton_tol: f64,
    /// Override the final time of every run (short horizons may misclassify).
    #[arg(long)]
    t_end: Option<f64>,
    /// Also write every run's CSV and SVG files below this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Newton tolerance.
    #[arg(long, default_value = "1e-12", allow_hyphen_values = true)]
    newton_tol: f64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let code = match cli.command {
        Command::List => {
            print!("{}", list_text());
            EXIT_OK
        }
        Command::Run(args) => cmd_run(&args),
        Command::Reproduce(args) => cmd_reproduce(&args),
        Command::Check(args) => cmd_check(&args),
    };
    ExitCode::from(code)
}

fn list_text() -> String {
    let mut out =
        format!("{:<22} {:>3} {:>3} {:>3}  {:<8} {:<10} {}\n", "system", "n_x", "r", "m", "group", "rho", "epsilon");
    for id in SystemId::ALL {
        let spec = SystemSpec::new(id, 0.0).expect("catalog system");
        let group = match spec.group_tag() {
            GroupTag::Trivial => "trivial".to_string(),
            g => g.to_string(),
        };
        out.push_str(&format!(
            "{:<22} {:>3} {:>3} {:>3}  {:<8} {:<10} {}\n",
            id,
            spec.n_x(),
            spec.r(),
            spec.m(),
            group,
            spec.rho_tag(),
            if id.uses_epsilon() { "yes" } else { "no" }
        ));
    }
    out
}

fn settings_with(newton_tol: f64) -> Result<SolverSettings, String> {
    let s = SolverSettings { newton_tol, ..SolverSettings::default() };
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// Everything `run` needs, after merging file and flags.
#[derive(Debug)]
struct RunPlan {
    scenario: Scenario,
    options: RunOptions,
    out: PathBuf,
}

fn merged_config(args: &RunArgs) -> Result<Config, String> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Config::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => Config::default(),
    };
    let flags: [(&str, &Option<String>); 12] = [
        ("system", &args.system),
        ("eps", &args.eps),
        ("method", &args.method),
        ("dt", &args.dt),
        ("t_end", &args.t_end),
        ("x0", &args.x0),
        ("z0", &args.z0),
        ("xdot0", &args.xdot0),
        ("zdot0", &args.zdot0),
        ("log_every", &args.log_every),
        ("drift_factor", &args.drift_factor),
        ("newton_tol", &args.newton_tol),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v.clone());
        }
    }
    if let Some(out) = &args.out {
        cfg.set("out", out.display().to_string());
    }
    Ok(cfg)
}

fn plan(cfg: &Config) -> Result<RunPlan, String> {
    let e = |e: config::ConfigError| e.to_string();
    let system: SystemId =
        cfg.get("system").ok_or("missing `system`")?.parse().map_err(|e: nhcouple::Error| e.to_string())?;
    let epsilon = cfg.number("eps").map_err(e)?.unwrap_or(0.0);
    let spec = SystemSpec::new(system, epsilon).map_err(|e| e.to_string())?;
    let method: StepperKind = cfg.get("method").unwrap_or("dd").parse().map_err(|e: nhcouple::Error| e.to_string())?;
    let n = spec.n_x();
    let x0 = cfg.vector("x0").map_err(e)?.unwrap_or_else(|| vec![0.0; n]);
    let xdot0 = cfg.vector("xdot0").map_err(e)?.unwrap_or_else(|| vec![0.0; n]);
    for (k, v) in [("x0", &x0), ("xdot0", &xdot0)] {
        if v.len() != n {
            return Err(format!("`{k}` needs {n} components for {system}, got {}", v.len()));
        }
    }
    let z0 = cfg.number("z0").map_err(e)?.unwrap_or(0.0);
    let zdot0 = cfg.number("zdot0").map_err(e)?.unwrap_or(1.0);
    let scenario = Scenario {
        system,
        epsilon,
        method,
        h: cfg.number("dt").map_err(e)?.unwrap_or(0.1),
        t_end: cfg.number("t_end").map_err(e)?.unwrap_or(100.0),
        initial: FullState::new(&x0, z0, &xdot0, zdot0),
        regime: None,
        log_every: cfg.integer("log_every").map_err(e)?.unwrap_or(1),
        track_latitude: spec.group_tag() == GroupTag::SO3,
    };
    let settings = settings_with(cfg.number("newton_tol").map_err(e)?.unwrap_or(1e-12))?;
    let thresholds = DriftThresholds {
        factor: cfg.number("drift_factor").map_err(e)?.unwrap_or(DriftThresholds::default().factor),
        ..DriftThresholds::default()
    };
    thresholds.validate().map_err(|e| e.to_string())?;
    scenario.validate(&settings).map_err(|e| e.to_string())?;
    let out = PathBuf::from(cfg.get("out").unwrap_or("out"));
    Ok(RunPlan { scenario, options: RunOptions { settings, thresholds }, out })
}

fn cmd_run(args: &RunArgs) -> u8 {
    let plan = match merged_config(args).and_then(|c| plan(&c)) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match run_scenario(&plan.scenario, &plan.options) {
        Ok(o) => o,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CONFIG;
        }
    };
    match write_outputs(&outcome, &plan.out) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_STEP;
        }
    }
    for r in outcome.invariant_reports.iter().chain(outcome.latitude_report.as_ref()) {
        println!("{:<9} {}  max error {:.3e}  slope {:.3e}", r.name, r.classification, r.max_error(), r.slope);
    }
    if let Some(err) = &outcome.failure {
        eprintln!("error: {err}");
        return EXIT_STEP;
    }
    EXIT_OK
}

fn cmd_reproduce(args: &ReproduceArgs) -> u8 {
    let settings = match settings_with(args.newton_tol) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let thresholds = DriftThresholds { factor: args.drift_factor, ..DriftThresholds::default() };
    if let Err(e) = thresholds.validate() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let mut scenarios = builtin_scenarios();
    if let Some(t) = args.t_end {
        for s in &mut scenarios {
            s.t_end = t;
        }
    }
    let options = RunOptions { settings, thresholds };
    let results = match run_all(&scenarios, &options, args.jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut outcomes = Vec::new();
    for (sc, r) in scenarios.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                eprintln!("error: {}: {e}", sc.label());
                return EXIT_CONFIG;
            }
        }
    }
    let mut code = EXIT_OK;
    if let Some(root) = &args.out {
        if let Err(e) = write_all(&outcomes, root) {
            eprintln!("error: {e}");
            code = EXIT_STEP;
        }
    }
    for o in &outcomes {
        let classes: Vec<String> = o
            .invariant_reports
            .iter()
            .chain(o.latitude_report.as_ref())
            .map(|r| format!("{}={}", r.name, r.classification))
            .collect();
        let status = match &o.failure {
            Some(e) => format!("FAILED: {e}"),
            None => classes.join(" "),
        };
        println!("{:<42} {status}", o.scenario.label());
    }
    println!();
    let table = summary_table(&outcomes.iter().collect::<Vec<_>>());
    print!("{}", table.render());
    println!("{}/60 symbols agree with the reference table", table.matching_symbols());
    if outcomes.iter().any(|o| o.failure.is_some()) {
        code = code.max(EXIT_STEP);
    }
    if !table.matches_reference() {
        for (m, col, got, want) in table.mismatches() {
            println!("mismatch: {:<6} column {}: got {got}, reference {want}", m.name(), col + 1);
        }
        code = EXIT_MISMATCH;
    }
    code
}

fn write_all(outcomes: &[nhcouple::harness::ScenarioOutcome], root: &Path) -> nhcouple::Result<()> {
    for o in outcomes {
        write_outputs(o, root)?;
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> u8 {
    let settings = match settings_with(args.newton_tol) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let fault = if args.inject_fault { Fault::LeapfrogSign } else { Fault::None };
    let results = run_checks(&CheckOptions { settings, fault });
    for r in &results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn list_has_six_systems() {
        let text = list_text();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().any(|l| l.starts_with("cvt_harmonic") && l.contains("SO3")));
        assert!(text.lines().any(|l| l.starts_with("knife_edge") && l.split_whitespace().nth(4) == Some("R")));
    }

    #[test]
    fn plan_defaults_and_errors() {
        let cfg = Config::parse("system = knife_edge\nz0 = pi/2").unwrap();
        let p = plan(&cfg).unwrap();
        assert_eq!(p.scenario.method, StepperKind::DiscreteGradient);
        assert!(!p.scenario.track_latitude);
        assert!(plan(&Config::default()).unwrap_err().contains("system"));
        let bad = Config::parse("system = knife_edge\nnewton_tol = 0").unwrap();
        assert!(plan(&bad).is_err());
        let short = Config::parse("system = vertical_disk\nx0 = 1").unwrap();
        assert!(plan(&short).unwrap_err().contains("components"));
    }
}
