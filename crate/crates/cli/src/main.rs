use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cohist::frameworks::{DEFAULT_ENUMERATION_BUDGET, DEFAULT_TRUTH_BUDGET};
use cohist_cli::{
    cmd_compatibility, cmd_consistency, cmd_demo, cmd_enumerate, cmd_probabilities,
    cmd_truth_functional, AnalysisReport, CliError, Demo, Settings,
};

/// Consistent-histories analyses of finite-dimensional quantum scenarios.
///
/// Exit status: 0 when the analysis is positive (consistent, compatible,
/// a truth assignment exists), 1 when it is negative, 2 on load or usage errors.
/// The dimension cap can be raised with COHIST_MAX_DIM.
#[derive(Debug, Parser)]
#[command(name = "cohist", version)]
struct Cli {
    /// Consistency threshold; overrides the scenario file and the default 1e-8 x N.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Require only Re D(a, b) = 0 off the diagonal.
    #[arg(long, global = true)]
    weak_condition: bool,
    /// Show diagonal weights of inconsistent families.
    #[arg(long, global = true)]
    raw_weights: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the consistency conditions of families (all when none are named).
    Consistency {
        scenario: PathBuf,
        #[arg(long = "family", short = 'f')]
        families: Vec<String>,
    },
    /// Probabilities of consistent families.
    Probabilities {
        scenario: PathBuf,
        #[arg(long = "family", short = 'f')]
        families: Vec<String>,
    },
    /// Pairwise compatibility under the single framework rule.
    Compatibility {
        scenario: PathBuf,
        #[arg(long = "family", short = 'f')]
        families: Vec<String>,
    },
    /// Enumerate consistent frameworks over a grid of candidate decompositions.
    Enumerate {
        scenario: PathBuf,
        /// `STEP:name,name,...`; repeat once per time slot.
        #[arg(long = "slot", required = true)]
        slots: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u64,
    },
    /// Search for a truth assignment respecting containment across families.
    TruthFunctional {
        scenario: PathBuf,
        #[arg(long = "family", short = 'f')]
        families: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_TRUTH_BUDGET)]
        budget: u64,
    },
    /// Build a model scenario and run its standard analysis.
    Demo {
        /// Where to write the generated scenario file. Defaults to
        /// `<output stem>.scenario.json` when --output is given.
        #[arg(long, global = true)]
        scenario_out: Option<PathBuf>,
        #[command(subcommand)]
        model: DemoModel,
    },
}

#[derive(Debug, Subcommand)]
enum DemoModel {
    /// One spin-1/2; directions are x, y, z, -x, ... or `a,b,c`.
    Spin {
        #[arg(long, default_value = "z", allow_hyphen_values = true)]
        init: String,
        #[arg(long, default_value = "x", allow_hyphen_values = true)]
        measure: String,
    },
    /// Spin measured by a pointer with an optional environment.
    SternGerlach {
        #[arg(long, default_value = "z", allow_hyphen_values = true)]
        w: String,
        /// Candidate measurement axes; repeat for several (default z, x, y).
        #[arg(long, allow_hyphen_values = true)]
        v: Vec<String>,
        #[arg(long, default_value_t = 0)]
        env: usize,
        #[arg(long, default_value = "z", allow_hyphen_values = true)]
        init: String,
    },
    /// Schroedinger cat coupled to environment qubits.
    Cat {
        #[arg(long, default_value_t = 5)]
        env: usize,
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        theta: f64,
    },
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn scenario_path(explicit: Option<PathBuf>, output: Option<&Path>) -> Option<PathBuf> {
    explicit.or_else(|| {
        output.map(|o| {
            let stem = o.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            o.with_file_name(format!("{stem}.scenario.json"))
        })
    })
}

fn run(cli: Cli) -> Result<AnalysisReport, CliError> {
    let settings = Settings {
        tol: cli.tol,
        weak_condition: cli.weak_condition,
        raw_weights: cli.raw_weights,
    };
    match cli.command {
        Command::Consistency { scenario, families } => cmd_consistency(&scenario, &families, &settings),
        Command::Probabilities { scenario, families } => cmd_probabilities(&scenario, &families, &settings),
        Command::Compatibility { scenario, families } => cmd_compatibility(&scenario, &families, &settings),
        Command::Enumerate { scenario, slots, budget } => cmd_enumerate(&scenario, &slots, budget, &settings),
        Command::TruthFunctional { scenario, families, budget } => {
            cmd_truth_functional(&scenario, &families, budget, &settings)
        }
        Command::Demo { scenario_out, model } => {
            let demo = match model {
                DemoModel::Spin { init, measure } => Demo::Spin { init, measure },
                DemoModel::SternGerlach { w, v, env, init } => Demo::SternGerlach {
                    w,
                    v: if v.is_empty() { vec!["z".into(), "x".into(), "y".into()] } else { v },
                    env,
                    init,
                },
                DemoModel::Cat { env, theta } => Demo::Cat { env, theta },
            };
            let (report, scenario) = cmd_demo(&demo, &settings)?;
            if let Some(path) = scenario_path(scenario_out, cli.output.as_deref()) {
                write(&path, &scenario.to_json())?;
            }
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    let output = cli.output.clone();
    let report = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let text = match format {
        Format::Table => report.to_table(),
        Format::Machine => report.to_machine(),
    };
    match output {
        Some(path) => {
            if let Err(e) = write(&path, &text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(report.exit_status as u8)
}
