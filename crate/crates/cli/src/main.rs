//! Command-line runner for the collapse thought-experiment scenarios.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use collapse_core::measure::CollapsePolicy;
use collapse_core::scenario::{
    self, EmitFormat, ScenarioConfig, ScenarioName, ScenarioSpec,
};

#[derive(Parser)]
#[command(
    name = "collapse-sim",
    about = "Seeded simulations of interferometric collapse thought experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available scenarios.
    List,
    /// Show a scenario's parameters and defaults.
    Describe { scenario: String },
    /// Run a scenario and print its expectation checks.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (may be omitted when --config supplies one).
    scenario: Option<String>,
    /// Parameter override, repeatable: --param name=value
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Which measurement policies to run.
    #[arg(long, default_value = "both", value_parser = ["collapse", "unitary", "both"])]
    policy: String,
    /// RNG seed for every stochastic part of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with {"name", "parameters", "seed"}; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory to write the report into.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Report format for --out.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::List => {
            for name in ScenarioName::ALL {
                println!("{:<20} {}", name.as_str(), name.summary());
            }
            Ok(true)
        }
        Command::Describe { scenario } => {
            let name = ScenarioName::parse(&scenario).map_err(|e| e.to_string())?;
            println!("{}: {}", name.as_str(), name.summary());
            let specs = scenario::parameter_specs(name);
            if specs.is_empty() {
                println!("  (no parameters)");
            } else {
                for p in specs {
                    println!("  --param {}=<value>   default {}   {}", p.name, p.default, p.help);
                }
            }
            Ok(true)
        }
        Command::Run(args) => run_command(args),
    }
}

fn parse_param(raw: &str) -> Result<(String, f64), String> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("--param `{raw}` is not of the form name=value"))?;
    let value: f64 = value
        .parse()
        .map_err(|e| format!("--param `{raw}`: {e}"))?;
    Ok((name.to_string(), value))
}

fn build_spec(args: &RunArgs) -> Result<ScenarioSpec, String> {
    let config: Option<ScenarioConfig> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Some(serde_json::from_str(&text).map_err(|e| format!("bad config file: {e}"))?)
        }
        None => None,
    };

    let name = args
        .scenario
        .clone()
        .or_else(|| config.as_ref().map(|c| c.name.clone()))
        .ok_or_else(|| "no scenario given (positional argument or --config)".to_string())?;

    // Config file values first, then command-line overrides on top.
    let mut overrides: BTreeMap<String, f64> = config
        .as_ref()
        .map(|c| c.parameters.clone())
        .unwrap_or_default();
    for raw in &args.params {
        let (key, value) = parse_param(raw)?;
        overrides.insert(key, value);
    }
    let seed = args
        .seed
        .or(config.as_ref().and_then(|c| c.seed))
        .unwrap_or(0);

    scenario::build(&name, &overrides, seed).map_err(|e| e.to_string())
}

fn run_command(args: RunArgs) -> Result<bool, String> {
    let spec = build_spec(&args)?;
    let policies: Vec<CollapsePolicy> = match args.policy.as_str() {
        "collapse" => vec![CollapsePolicy::Collapse],
        "unitary" => vec![CollapsePolicy::UnitaryOnly],
        _ => vec![CollapsePolicy::Collapse, CollapsePolicy::UnitaryOnly],
    };

    let report = scenario::run(&spec, &policies).map_err(|e| e.to_string())?;

    println!(
        "{} (seed {}, policies: {})",
        spec.name.as_str(),
        spec.seed,
        policies
            .iter()
            .map(|p| p.key())
            .collect::<Vec<_>>()
            .join(", ")
    );
    for e in &report.expectations {
        println!(
            "  [{}] {}  expected {:.6e}  actual {:.6e}  tol {:.1e}",
            if e.pass { "PASS" } else { "FAIL" },
            e.name,
            e.expected,
            e.actual,
            e.tolerance
        );
    }
    println!(
        "{}: {}/{} checks passed",
        if report.all_passed { "ok" } else { "FAILED" },
        report.expectations.iter().filter(|e| e.pass).count(),
        report.expectations.len()
    );

    if let Some(dir) = &args.out {
        let format = EmitFormat::parse(&args.format).map_err(|e| e.to_string())?;
        let written = scenario::emit(&report, format, dir).map_err(|e| e.to_string())?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(report.all_passed)
}
