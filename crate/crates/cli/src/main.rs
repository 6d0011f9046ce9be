use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use leverage_core::ingest::{
    build_report, csv_tables, ledger_to_jsonl, parse_ledger, render_csv, render_text,
    run_scenario_experiments, schedule_scenario, Artifact, ScenarioConfig,
};
use leverage_core::simulator::{run_simulation, trace_to_ledger, WorkflowTrace};
use leverage_core::window::{window_leverage, TaskOutcome};
use leverage_core::{Error, Execution};

#[derive(Parser)]
#[command(name = "leverage", version, about = "Leverage analytics for human-agent workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Time window as "t0,t1" in hours.
    #[arg(long, global = true, value_parser = parse_window)]
    window: Option<(f64, f64)>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-task and windowed leverage for a JSON Lines ledger.
    Analyze {
        ledger: PathBuf,
    },
    /// Runs the scenario's simulation and writes its event trace.
    Simulate {
        /// Also write the completed-task ledger here.
        #[arg(long)]
        ledger_out: Option<PathBuf>,
    },
    /// Solves a scheduler instance from the scenario.
    Schedule {
        #[arg(long)]
        instance: Option<String>,
        /// Also solve by exhaustive search and print both objectives.
        #[arg(long)]
        oracle: bool,
    },
    /// Runs the scenario's experiments.
    Experiment {
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Run replicas in a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Renders a JSON artifact written by another command.
    Report {
        input: PathBuf,
        /// CSV table to emit.
        #[arg(long)]
        table: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"t0,t1\", got {s:?}"))?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("t0: {e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("t1: {e}"))?;
    if t0.partial_cmp(&t1) != Some(std::cmp::Ordering::Less) {
        return Err(format!("window end {t1} must exceed start {t0}"));
    }
    Ok((t0, t1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn scenario(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let Some(path) = &cli.config else {
        return Err(Failure::Usage("this command needs --config PATH".into()));
    };
    let mut s = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn render(artifact: &Artifact, format: Format, table: Option<&str>) -> Result<String, Failure> {
    Ok(match format {
        Format::Json => artifact.to_json(),
        Format::Text => render_text(artifact),
        Format::Csv => render_csv(artifact, table).map_err(|e| match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Core(other),
        })?,
    })
}

fn ledger_csv(ledger: &[TaskOutcome]) -> String {
    let mut out =
        String::from("task_id,h_displaced,t_planning,t_interrupts,t_review,t_agent,completed_at\n");
    for o in ledger {
        let h = &o.operator_hours;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.task_id,
            o.h_displaced,
            h.t_planning,
            h.interrupt_total(),
            h.t_review,
            o.t_agent,
            o.completed_at
        ));
    }
    out
}

fn simulation_text(trace: &WorkflowTrace, ledger: &[TaskOutcome], horizon: f64) -> String {
    let mut out = format!(
        "{} events, {} tasks reviewed, {} truncated\n",
        trace.events.len(),
        ledger.len(),
        trace.truncated_tasks().len()
    );
    if let Ok(w) = window_leverage(ledger, 0.0, horizon) {
        out.push_str(&format!(
            "L_window over (0, {horizon}]: {:.4} ({:.4} h displaced, {:.4} operator hours)\n",
            w.l_window, w.total_h_displaced, w.t_operator
        ));
    }
    out
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Analyze { ledger } => {
            let ledger = parse_ledger(ledger)?;
            let scenario = match &cli.config {
                Some(_) => Some(scenario(cli)?),
                None => None,
            };
            let windows: Vec<(f64, f64)> = cli.window.into_iter().collect();
            let doc = build_report(&ledger, scenario.as_ref(), &windows)?;
            let format = cli.format.unwrap_or(Format::Json);
            if format != Format::Text {
                for w in &doc.warnings {
                    eprintln!("warning: {w}");
                }
            }
            emit(out, &render(&Artifact::Report(doc), format, None)?)
        }
        Command::Simulate { ledger_out } => {
            let s = scenario(cli)?;
            let config = s.sim_config()?;
            let trace = run_simulation(&config)?;
            let ledger = trace_to_ledger(&trace)?;
            if let Some(p) = ledger_out {
                emit(Some(p), &ledger_to_jsonl(&ledger))?;
            }
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => trace.to_jsonl(),
                Format::Csv => ledger_csv(&ledger),
                Format::Text => simulation_text(&trace, &ledger, config.horizon),
            };
            emit(out, &text)
        }
        Command::Schedule { instance, oracle } => {
            let s = scenario(cli)?;
            let window = cli.window.map(|(t0, t1)| t1 - t0);
            let doc = schedule_scenario(&s, instance.as_deref(), window, *oracle)?;
            let format = cli.format.unwrap_or(Format::Json);
            emit(out, &render(&Artifact::Schedule(doc), format, None)?)
        }
        Command::Experiment {
            replicas,
            repetitions,
            sequential,
        } => {
            let mut s = scenario(cli)?;
            if let Some(a) = s.experiments.asymmetry.as_mut() {
                if let Some(r) = replicas {
                    a.replicas = *r;
                }
                if let Some(r) = repetitions {
                    a.repetitions = *r;
                }
                eprintln!(
                    "asymmetry: {} repetitions of {} replicas",
                    a.repetitions, a.replicas
                );
            }
            s.validate()?;
            let exec = if *sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            let doc = run_scenario_experiments(&s, exec)?;
            let format = cli.format.unwrap_or(Format::Json);
            emit(out, &render(&Artifact::Experiment(doc), format, None)?)
        }
        Command::Report { input, table } => {
            let text = fs::read_to_string(input)
                .map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
            let artifact = Artifact::from_json(&text)?;
            let format = cli.format.unwrap_or(Format::Text);
            if table.is_some() && format != Format::Csv {
                return Err(Failure::Usage(format!(
                    "--table applies to --format csv (tables: {})",
                    csv_tables(&artifact).join(", ")
                )));
            }
            emit(out, &render(&artifact, format, table.as_deref())?)
        }
    }
}
