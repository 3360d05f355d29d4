// SPDX-License-Identifier: Apache-2.0

//! The `paramon` command line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::{self, GenConfig};
use crate::catalog::{self, CATALOG_ENV};
use crate::compile::{compile_spec, CompileError, CompiledSpec};
use crate::engine::{Algorithm, EngineConfig, Session};
use crate::logic::{self, Alphabet, SynthError, Template};
use crate::report::OutputFormat;
use crate::slicing::{slice_trace, ParameterInstance, SliceError};
use crate::spec::{Formalism, SpecError};
use crate::trace::{self, TraceError, TraceReader, TraceRecord};

#[derive(Debug, Parser)]
#[command(name = "paramon", version, about = "Parametric runtime verification of recorded event traces")]
#[command(after_help = "Specs given by name are looked up in the bundled catalog, or in the directory named by $PARAMON_CATALOG when set.")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a trace against specs; exit 0 when clean, 1 on violations, 2 on errors.
    Check(CheckArgs),
    /// Print a synthesized monitor template.
    Synth(SynthArgs),
    /// Print trace slices.
    Slice(SliceArgs),
    /// Time the algorithms on a generated or recorded trace.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TraceInput {
    /// Trace file in format v1.
    pub trace: Option<PathBuf>,
    /// Read the trace from standard input.
    #[arg(long, conflicts_with = "trace")]
    pub stdin: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Spec file, spec directory or catalog name; repeatable. Defaults to the whole catalog.
    #[arg(short, long = "spec", value_name = "SPEC")]
    pub specs: Vec<String>,
    #[command(flatten)]
    pub input: TraceInput,
    /// Monitoring algorithm: A (offline), B, C, C+ or D.
    #[arg(long, default_value = "D")]
    pub algo: Algorithm,
    /// Collect monitors whose bound objects died.
    #[arg(long)]
    pub mgc: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Maximum slice length for algorithm A.
    #[arg(long, value_name = "N")]
    pub slice_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spec file or catalog name.
    #[arg(required_unless_present = "formula")]
    pub spec: Option<String>,
    /// Formula to synthesize instead of a spec.
    #[arg(long, requires_all = ["formalism", "events"], conflicts_with = "spec")]
    pub formula: Option<String>,
    /// Formalism of --formula: fsm, ere, ftltl, ptltl or cfg.
    #[arg(long)]
    pub formalism: Option<String>,
    /// Comma-separated events of --formula.
    #[arg(long, value_delimiter = ',')]
    pub events: Vec<String>,
    /// Also print enable and coenable sets.
    #[arg(long)]
    pub dump_enable: bool,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[command(flatten)]
    pub input: TraceInput,
    /// Instance to slice for, e.g. `{file=File#f1}`; repeatable.
    #[arg(long = "theta", value_name = "INSTANCE")]
    pub thetas: Vec<String>,
    /// Spec whose template gives each slice a verdict; without --theta,
    /// prints every instance's slice.
    #[arg(short, long)]
    pub spec: Option<String>,
    #[arg(long, value_name = "N")]
    pub slice_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Spec file or catalog name.
    #[arg(short, long, default_value = "TOCTOU")]
    pub spec: String,
    /// Replay this trace instead of generating one.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub events: usize,
    /// Objects per parameter in the generated trace.
    #[arg(long, default_value_t = 10_000)]
    pub objects: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Death-record probability after each generated event.
    #[arg(long, default_value_t = 0.0)]
    pub death_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "B,C,C+,D")]
    pub algo: Vec<Algorithm>,
    /// Also time the offline algorithm A.
    #[arg(long)]
    pub with_a: bool,
    #[arg(long)]
    pub mgc: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Write the generated trace to this file.
    #[arg(long, value_name = "PATH")]
    pub emit_trace: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

fn load_specs(args: &[String]) -> Result<Vec<Arc<CompiledSpec>>, CliError> {
    let specs = if args.is_empty() {
        catalog::catalog()?
    } else {
        let mut all = Vec::new();
        for a in args {
            all.extend(catalog::resolve(a)?);
        }
        all
    };
    specs
        .into_iter()
        .map(|s| compile_spec(s).map(Arc::new).map_err(CliError::from))
        .collect()
}

fn load_one(arg: &str) -> Result<Arc<CompiledSpec>, CliError> {
    let mut specs = load_specs(&[arg.to_string()])?;
    if specs.len() != 1 {
        return Err(CliError::Usage(format!("`{arg}` names {} specs; expected one", specs.len())));
    }
    Ok(specs.remove(0))
}

fn open_input(input: &TraceInput) -> Result<Box<dyn BufRead>, CliError> {
    match (&input.trace, input.stdin) {
        (Some(path), _) => {
            let f = File::open(path).map_err(io_err(path.display().to_string()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        (None, true) => Ok(Box::new(BufReader::new(io::stdin()))),
        (None, false) => Err(CliError::Usage("give a trace file or --stdin".into())),
    }
}

/// Streams records into `f`, logging and counting malformed lines.
fn for_each_record(input: Box<dyn BufRead>, mut f: impl FnMut(Result<TraceRecord, ()>)) -> Result<(), CliError> {
    for item in TraceReader::new(input)? {
        match item {
            Ok(r) => f(Ok(r)),
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                log::warn!("skipping malformed record: {e}");
                f(Err(()));
            }
        }
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    if args.algo == Algorithm::A && args.input.stdin {
        return Err(CliError::Usage("algorithm A needs a complete trace file, not a stream".into()));
    }
    let specs = load_specs(&args.specs)?;
    let input = open_input(&args.input)?;
    let mut session = Session::new(
        specs,
        EngineConfig {
            algorithm: args.algo,
            mgc: args.mgc,
            slice_cap: args.slice_cap,
        },
    );
    for_each_record(input, |r| match r {
        Ok(rec) => session.process(&rec),
        Err(()) => session.note_malformed(),
    })?;
    let report = session.finish();
    out.write_all(report.render(args.format).as_bytes())
        .map_err(io_err("stdout"))?;
    Ok(if report.has_violations() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    let text = match (&args.spec, &args.formula) {
        (Some(spec), _) => {
            let compiled = load_one(spec)?;
            let mut text = compiled.template.listing();
            if args.dump_enable {
                text.push_str(&compiled.dump_tables());
            }
            text
        }
        (None, Some(formula)) => {
            if args.dump_enable {
                return Err(CliError::Usage("--dump-enable needs a spec with parameters".into()));
            }
            let tag = args.formalism.as_deref().unwrap_or_default();
            let formalism = Formalism::parse(tag).ok_or_else(|| CliError::Usage(format!("unknown formalism `{tag}`")))?;
            let events = Alphabet::new(args.events.iter().map(String::as_str));
            let template = match formalism {
                Formalism::Fsm => Template::Automaton(logic::parse_fsm(formula, &events)?),
                Formalism::Ere => Template::Automaton(logic::compile_ere(formula, &events)?),
                Formalism::Ftltl => Template::Automaton(logic::compile_ftltl(formula, &events)?),
                Formalism::Ptltl => Template::Automaton(logic::compile_ptltl(formula, &events)?),
                Formalism::Cfg => Template::Derivative(logic::compile_cfg(formula, &events)?),
            };
            template.listing()
        }
        (None, None) => return Err(CliError::Usage("give a spec or --formula".into())),
    };
    out.write_all(text.as_bytes()).map_err(io_err("stdout"))?;
    Ok(ExitCode::SUCCESS)
}

fn render_slice(events: &[String]) -> String {
    if events.is_empty() {
        "ε".into()
    } else {
        events.join(" ")
    }
}

fn cmd_slice(args: &SliceArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    let spec = args.spec.as_deref().map(load_one).transpose()?;
    let input = open_input(&args.input)?;
    let mut text = String::new();
    if args.thetas.is_empty() {
        let Some(spec) = spec else {
            return Err(CliError::Usage("give --theta or --spec".into()));
        };
        let mut session = Session::new(
            vec![spec],
            EngineConfig {
                algorithm: Algorithm::A,
                mgc: false,
                slice_cap: args.slice_cap,
            },
        );
        for_each_record(input, |r| match r {
            Ok(rec) => session.process(&rec),
            Err(()) => session.note_malformed(),
        })?;
        for (theta, events, category) in session.offline_slices(0).unwrap_or_default() {
            text.push_str(&format!("{theta}: {} -> {category}\n", render_slice(&events)));
        }
    } else {
        let thetas: Vec<ParameterInstance> = args.thetas.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
        let mut records = Vec::new();
        for_each_record(input, |r| {
            if let Ok(rec) = r {
                records.push(rec);
            }
        })?;
        let trace = trace::to_parametric(&records);
        for theta in &thetas {
            let mut slice: Vec<String> = slice_trace(&trace, theta).into_iter().map(String::from).collect();
            if let Some(cap) = args.slice_cap {
                slice.truncate(cap);
            }
            match &spec {
                Some(spec) => {
                    let template = &spec.template;
                    slice.retain(|e| template.alphabet().contains(e));
                    let state = slice.iter().fold(template.initial(), |s, e| {
                        template.next(s, template.alphabet().id(e).expect("filtered to the alphabet"))
                    });
                    text.push_str(&format!(
                        "{theta}: {} -> {}\n",
                        render_slice(&slice),
                        template.category(state).name()
                    ));
                }
                None => text.push_str(&format!("{theta}: {}\n", render_slice(&slice))),
            }
        }
    }
    out.write_all(text.as_bytes()).map_err(io_err("stdout"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    if !(0.0..=1.0).contains(&args.death_rate) {
        return Err(CliError::Usage("--death-rate must be within [0, 1]".into()));
    }
    let spec = load_one(&args.spec)?;
    let text = match &args.trace {
        Some(path) => std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?,
        None => {
            let cfg = GenConfig {
                events: args.events,
                objects: args.objects,
                seed: args.seed,
                death_rate: args.death_rate,
            };
            trace::write_trace(&bench::generate(&spec, &cfg), "paramon-bench")
        }
    };
    if let Some(path) = &args.emit_trace {
        std::fs::write(path, &text).map_err(io_err(path.display().to_string()))?;
    }
    let mut algos = Vec::new();
    if args.with_a {
        algos.push(Algorithm::A);
    }
    for a in &args.algo {
        if !algos.contains(a) {
            algos.push(*a);
        }
    }
    let result = bench::run_bench(&[spec], &text, &algos, args.mgc, args.reps);
    let rendered = match args.format {
        OutputFormat::Text => result.render_table(),
        OutputFormat::Machine => result.render_json(),
    };
    out.write_all(rendered.as_bytes()).map_err(io_err("stdout"))?;
    Ok(ExitCode::SUCCESS)
}

/// Runs a parsed command line, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Slice(a) => cmd_slice(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    log::debug!("catalog override variable: {CATALOG_ENV}");
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("paramon: {e}");
            ExitCode::from(2)
        }
    }
}
