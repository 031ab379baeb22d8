use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mln_core::compiler::{assign_tasks, explain, monolithic_plan, LogicalPlan};
use mln_core::logic::{ground, GroundDatabase};
use mln_core::master::{run_map, run_marginal, ConvergenceStats, MasterConfig, StepSchedule};
use mln_core::parser::{parse_with_evidence, MlnProgram};
use mln_core::relational::{choose_plan, explain_plan, CostModelParams};
use mln_core::solvers::{engine_database, register_dmos};
use mln_core::Error;

#[derive(Parser)]
#[command(name = "mln", version, about = "Markov logic inference by dual decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the logical plan and the materialization plan of each view.
    Compile(Input),
    /// Run MAP or marginal inference and write one row per query tuple.
    Infer(InferArgs),
}

#[derive(Args)]
struct Input {
    /// MLN program.
    #[arg(short = 'i', long = "input")]
    program: PathBuf,
    /// Evidence file.
    #[arg(short = 'e', long)]
    evidence: Option<PathBuf>,
    /// Use one generic task for the whole program.
    #[arg(long)]
    monolithic: bool,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    input: Input,
    /// Query relations to output (comma separated); all query relations by default.
    #[arg(short = 'q', long, value_delimiter = ',')]
    query: Vec<String>,
    /// Output file; standard output by default.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Map)]
    mode: Mode,
    /// Maximum master iterations.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    iters: u64,
    /// Initial step size; decays as step / (1 + k/10).
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-iteration TSV log.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Concurrent task solves.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Map,
    Marginal,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Infeasible(_)) { 3 } else { 2 };
        Failure { code, msg: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure { code: 2, msg: format!("{}: {e}", path.display()) }
}

fn load(input: &Input) -> Result<(MlnProgram<f64>, GroundDatabase<f64>, LogicalPlan), Failure> {
    let text = fs::read_to_string(&input.program).map_err(|e| io_failure(&input.program, e))?;
    let evidence = match &input.evidence {
        Some(p) => fs::read_to_string(p).map_err(|e| io_failure(p, e))?,
        None => String::new(),
    };
    let program = parse_with_evidence::<f64>(&text, &evidence)?;
    let db = ground(&program)?;
    let plan = if input.monolithic { monolithic_plan(&program) } else { assign_tasks(&program) };
    Ok((program, db, plan))
}

fn compile(input: &Input) -> Result<String, Failure> {
    let (program, db, plan) = load(input)?;
    let mut out = explain(&plan);
    let engine = engine_database(&program, &db);
    let params = CostModelParams::default();
    for task in &plan.tasks {
        for view in register_dmos(&program, &plan, task, &engine) {
            let chosen = choose_plan(&view, &engine, &params)?;
            out.push_str(&format!("task {}: ", task.name));
            out.push_str(&explain_plan(&view, &chosen));
        }
    }
    Ok(out)
}

/// Every tuple of the chosen query relations over their domains, sorted.
fn query_tuples(program: &MlnProgram<f64>, names: &[String]) -> Result<Vec<(String, Vec<String>)>, Failure> {
    for n in names {
        if !program.schema(n).is_some_and(|s| s.is_query()) {
            return Err(Failure { code: 2, msg: format!("`{n}` is not a query relation") });
        }
    }
    let mut rows = Vec::new();
    for schema in program.query_relations().filter(|s| names.is_empty() || names.contains(&s.name)) {
        let domains: Vec<Vec<String>> = schema
            .domains
            .iter()
            .map(|d| program.domains.get(d).map(|d| d.constants.iter().cloned().collect()).unwrap_or_default())
            .collect();
        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for dom in &domains {
            tuples = tuples.into_iter().flat_map(|t| dom.iter().map(move |c| [t.clone(), vec![c.clone()]].concat())).collect();
        }
        rows.extend(tuples.into_iter().map(|t| (schema.name.clone(), t)));
    }
    rows.sort();
    Ok(rows)
}

fn write_trace(path: &Path, stats: &ConvergenceStats<f64>) -> Result<(), Failure> {
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(|e| io_failure(path, e))?);
    stats.write_trace(&mut f).and_then(|_| f.flush()).map_err(|e| io_failure(path, e))
}

fn infer(args: &InferArgs) -> Result<String, Failure> {
    let (program, db, plan) = load(&args.input)?;
    let tuples = query_tuples(&program, &args.query)?;
    let config = MasterConfig::<f64> {
        max_iters: args.iters as usize,
        schedule: StepSchedule::decaying(args.step),
        seed: args.seed,
        workers: args.workers as usize,
        ..MasterConfig::default()
    };
    let (values, stats): (BTreeMap<usize, String>, _) = match args.mode {
        Mode::Map => {
            let out = run_map(&db, &plan, &config)?;
            if !out.cost.is_finite() {
                return Err(Failure { code: 3, msg: "no world satisfies the hard rules".into() });
            }
            let v = out.world.iter().enumerate().map(|(a, &b)| (a, if b { "1" } else { "0" }.to_string())).collect();
            (v, out.stats)
        }
        Mode::Marginal => {
            let out = run_marginal(&db, &plan, &config)?;
            (out.marginals.iter().enumerate().map(|(a, p)| (a, format!("{p:.6}"))).collect(), out.stats)
        }
    };
    if let Some(path) = &args.trace {
        write_trace(path, &stats)?;
    }
    let default = if args.mode == Mode::Map { "0" } else { "0.500000" };
    let mut out = String::new();
    for (rel, t) in tuples {
        let refs: Vec<&str> = t.iter().map(String::as_str).collect();
        let v = db.lookup(&rel, &refs).and_then(|a| values.get(&a)).map_or(default, String::as_str);
        out.push_str(&rel);
        for a in &t {
            out.push('\t');
            out.push_str(a);
        }
        out.push('\t');
        out.push_str(v);
        out.push('\n');
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match &cli.command {
        Command::Compile(input) => (compile(input), None),
        Command::Infer(args) => (infer(args), args.output.as_deref()),
    };
    let written = result.and_then(|text| match output {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure { code: 2, msg: e.to_string() }),
    });
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mln: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
