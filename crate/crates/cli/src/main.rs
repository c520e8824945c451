//! `goagentnet`: run the FDR scenario, sweep bandwidths, validate configs,
//! export the knowledge graph or serve the agent bus over TCP.
//!
//! Exit codes: 0 success, 1 configuration/usage/IO error, 2 no feasible plan.

use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use goagentnet_core::protocol::{serve, Bus};
use goagentnet_core::registry::AgentProfile;
use goagentnet_core::scenario::{
    compare, load_scenario, run_arch, sweep, validate_document, write_comparison_csv, write_csv, Arch,
    ComparisonReport, RunReport, Scenario, ScenarioError, SimAgent,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "goagentnet", version, about = "Goal-oriented agent networking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan and execute one intent.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Intent text.
        #[arg(long, conflicts_with = "intent_file", required_unless_present = "intent_file")]
        intent: Option<String>,
        /// File holding the intent text.
        #[arg(long)]
        intent_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ArchArg::Goagentnet)]
        arch: ArchArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run an intent template over several bandwidths and write CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Intent text containing `{bandwidth}`.
        #[arg(long)]
        intent_template: String,
        /// Comma-separated bandwidths in Hz, e.g. `5e6,1e7,1e8`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        bandwidths: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ArchArg::Both)]
        arch: ArchArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario configuration and print every finding.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export the knowledge graph as Graphviz DOT.
    Graph {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the agent bus over TCP with simulated agents.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "127.0.0.1:7400")]
        listen: String,
    },
}

#[derive(Debug, clap::Args)]
struct ConfigArg {
    /// Scenario configuration; the built-in canonical FDR scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Scenario> {
        match &self.config {
            None => Ok(Scenario::canonical()),
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                load_scenario(&text).with_context(|| format!("invalid scenario {}", path.display()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchArg {
    Goagentnet,
    Baseline,
    Both,
}

impl ArchArg {
    fn archs(self) -> Vec<Arch> {
        match self {
            ArchArg::Goagentnet => vec![Arch::GoAgentNet],
            ArchArg::Baseline => vec![Arch::Baseline],
            ArchArg::Both => vec![Arch::Baseline, Arch::GoAgentNet],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// `out/report.csv` -> `out/report.comparison.csv`.
fn comparison_path(out: &Path, ext: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.comparison.{ext}"))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(reports: &[RunReport]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(buf)
}

fn comparison_csv_bytes(report: &ComparisonReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_comparison_csv(report, &mut buf)?;
    Ok(buf)
}

/// Write the reports and, when both architectures ran, the comparison next to them.
fn write_outputs(reports: &[RunReport], comparison: &ComparisonReport, out: Option<&Path>, format: Format) -> Result<()> {
    let both = !comparison.rows.is_empty();
    match format {
        Format::Csv => {
            emit(out, &csv_bytes(reports)?)?;
            if both {
                let bytes = comparison_csv_bytes(comparison)?;
                match out {
                    Some(path) => emit(Some(&comparison_path(path, "csv")), &bytes)?,
                    None => emit(None, &[b"\n".as_slice(), &bytes].concat())?,
                }
            }
        }
        Format::Json => {
            if both {
                let doc = serde_json::json!({ "reports": reports, "comparison": comparison });
                emit(out, &json_bytes(&doc)?)?;
                if let Some(path) = out {
                    emit(Some(&comparison_path(path, "json")), &json_bytes(comparison)?)?;
                }
            } else {
                emit(out, &json_bytes(&reports[0])?)?;
            }
        }
    }
    Ok(())
}

fn cmd_run(
    config: &ConfigArg,
    intent: Option<&str>,
    intent_file: Option<&Path>,
    arch: ArchArg,
    seed: u64,
    out: Option<&Path>,
    format: Format,
) -> Result<()> {
    let scenario = config.load()?;
    let intent = match (intent, intent_file) {
        (Some(text), _) => text.to_owned(),
        (None, Some(path)) => fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?,
        (None, None) => bail!("one of --intent or --intent-file is required"),
    };
    let reports = arch
        .archs()
        .into_iter()
        .map(|a| run_arch(&scenario, a, &intent, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut comparison = ComparisonReport::default();
    if let [base, goa] = &reports[..] {
        comparison.rows.push(compare(goa, base)?);
    }
    for r in &reports {
        log::info!("{}: {} ({}) S={} E_c={}", r.arch, r.plan.path_string(), r.plan.representation, r.measured.success, r.measured.comm_energy_j);
    }
    write_outputs(&reports, &comparison, out, format)
}

fn cmd_sweep(config: &ConfigArg, template: &str, bandwidths: &[f64], arch: ArchArg, seed: u64, out: Option<&Path>) -> Result<()> {
    let scenario = config.load()?;
    let result = sweep(&scenario, template, bandwidths, &arch.archs(), seed)?;
    write_outputs(&result.reports, &result.comparison, out, Format::Csv)
}

fn cmd_validate(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let findings = validate_document(&text);
    for f in &findings {
        println!("{f}");
    }
    if findings.is_empty() {
        println!("{}: ok", path.display());
    }
    Ok(findings.is_empty())
}

fn cmd_graph(config: &ConfigArg, out: Option<&Path>) -> Result<()> {
    let scenario = config.load()?;
    emit(out, scenario.registry.graph().to_dot().as_bytes())
}

fn cmd_serve(config: &ConfigArg, listen: &str) -> Result<()> {
    let scenario = config.load()?;
    let catalog: Vec<_> = scenario
        .knowledge
        .tasks()
        .flat_map(|t| scenario.knowledge.get_representations(t).unwrap_or_default().to_vec())
        .collect();
    let mut bus = Bus::new(scenario.registry.clone());
    for p in scenario.registry.graph().nodes() {
        bus.attach(p.id, Box::new(SimAgent::new(p.clone(), catalog.clone())))?;
    }
    bus.set_handler_factory(Box::new(move |p: &AgentProfile| Box::new(SimAgent::new(p.clone(), catalog.clone()))));
    let listener = TcpListener::bind(listen).with_context(|| format!("cannot listen on {listen}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve(listener, Arc::new(Mutex::new(bus)))?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .any(|e| e.downcast_ref::<ScenarioError>().is_some_and(ScenarioError::is_infeasible));
    if infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GOAGENTNET_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_FAILURE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run {
            config,
            intent,
            intent_file,
            arch,
            seed,
            out,
            format,
        } => cmd_run(config, intent.as_deref(), intent_file.as_deref(), *arch, *seed, out.as_deref(), *format),
        Command::Sweep {
            config,
            intent_template,
            bandwidths,
            arch,
            seed,
            out,
        } => cmd_sweep(config, intent_template, bandwidths, *arch, *seed, out.as_deref()),
        Command::Validate { config } => match cmd_validate(config) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_FAILURE),
            Err(e) => Err(e),
        },
        Command::Graph { config, out } => cmd_graph(config, out.as_deref()),
        Command::Serve { config, listen } => cmd_serve(config, listen),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
