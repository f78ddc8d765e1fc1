//! Command line driver: argument parsing, reports and subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value as Json};

use minisol::ast::{BaseType, Contract, SourceLoc};
use minisol::diag::Diagnostic;
use minisol::infer::{initial_sigma, query_script, validity_script, Reason, Status, Verdict};
use minisol::interp::{EventKind, ExecEvent, ExecOutcome, Interpreter, NoObserver, Store, Value};
use minisol::pipeline::{analyze, load, Analysis, FrontendError, Options};
use minisol::solver::{Solver, SolverConfig};
use minisol::templates::{path_string, Templates};
use minisol::typecheck::{generate_with, GenOptions, Mode, ObKind, TypeError};

pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "minisol", version, about = "Overflow-safety checker for MiniSol contracts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a contract whose invariants are annotated.
    Check(AnalyzeArgs),
    /// Infer contract invariants and local types, then check.
    Infer(AnalyzeArgs),
    /// Execute the constructor and optionally one function.
    Run(RunArgs),
    /// Print the SMT-LIB scripts the checker would send.
    EmitSmt(EmitArgs),
    /// Print the generated obligations, one per line.
    EmitObligations(EmitArgs),
    /// Print the template families of every map sort in the contract.
    EmitTemplates(EmitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub file: PathBuf,
    /// Solver binary (defaults to $MINISOL_SOLVER, then z3 on PATH).
    #[arg(long)]
    pub solver: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Treat every overflow check as a hard constraint during inference.
    #[arg(long)]
    pub no_soft: bool,
    /// Restrict templates to flat maps of uints.
    #[arg(long)]
    pub no_nested: bool,
    /// Skip inference; unknown predicates become true.
    #[arg(long)]
    pub no_infer: bool,
    /// Assume earlier overflow checks for hard constraints too.
    #[arg(long)]
    pub uniform_assumptions: bool,
    /// Run inference queries sequentially, each assuming the current solution.
    #[arg(long)]
    pub accumulate_sigma: bool,
    /// Keep array-sorted arguments in CHC queries.
    #[arg(long)]
    pub chc_arrays: bool,
    /// Accepted for interface stability; analysis is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub file: PathBuf,
    /// Function to call after the constructor.
    #[arg(long = "fn")]
    pub func: Option<String>,
    /// Comma separated function arguments (numbers, true, false).
    #[arg(long, default_value = "")]
    pub args: String,
    /// Comma separated constructor arguments; missing ones default to the sender.
    #[arg(long, default_value = "")]
    pub ctor_args: String,
    #[arg(long, default_value = "1")]
    pub sender: BigUint,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print every execution event, not only outcomes.
    #[arg(long)]
    pub trace: bool,
    /// Do not insert runtime overflow checks.
    #[arg(long)]
    pub unguarded: bool,
}

#[derive(Args, Debug)]
pub struct EmitArgs {
    pub file: PathBuf,
    /// Emit for inference (Horn queries) instead of checking.
    #[arg(long)]
    pub infer: bool,
    #[arg(long)]
    pub no_nested: bool,
}

/// Failure that ends the process with a non-zero code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct VerdictRow {
    pub function: String,
    pub line: u32,
    pub column: u32,
    pub op: String,
    pub status: Status,
    pub reason: Reason,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub soft_total: usize,
    pub safe_count: usize,
    pub solver_queries: usize,
    pub wall_time_ms: u64,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema: u32,
    pub contract_name: String,
    pub mode: String,
    pub verdicts: Vec<VerdictRow>,
    pub hard_failures: Vec<Diagnostic>,
    pub stats: Stats,
}

impl Report {
    pub fn new(c: &Contract, mode: Mode, a: &Analysis, queries: usize, wall: Duration) -> Report {
        let verdicts: Vec<VerdictRow> = a.verdicts.iter().map(row).collect();
        let safe_count = verdicts.iter().filter(|v| v.status == Status::Safe).count();
        Report {
            schema: SCHEMA,
            contract_name: c.name.clone(),
            mode: mode_name(mode).into(),
            stats: Stats {
                soft_total: verdicts.len(),
                safe_count,
                solver_queries: queries,
                wall_time_ms: wall.as_millis() as u64,
            },
            verdicts,
            hard_failures: a.hard_failures.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self, file: &str) -> String {
        let mut out = format!("contract {} ({})\n", self.contract_name, self.mode);
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "{}:{}:{}: {} `{}` {} ({})",
                file,
                v.line,
                v.column,
                v.function,
                v.op,
                v.status.as_str(),
                v.reason.as_str()
            );
        }
        for d in &self.hard_failures {
            let _ = writeln!(out, "{}", d.render(file));
        }
        let s = &self.stats;
        let _ = writeln!(
            out,
            "{} of {} arithmetic sites safe, {} solver queries, {} ms",
            s.safe_count, s.soft_total, s.solver_queries, s.wall_time_ms
        );
        out
    }
}

fn row(v: &Verdict) -> VerdictRow {
    VerdictRow {
        function: v.function.clone(),
        line: v.site.line,
        column: v.site.col,
        op: v.op.symbol().into(),
        status: v.status,
        reason: v.reason,
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Check => "check",
        Mode::Infer => "infer",
    }
}

fn read_contract(file: &Path) -> Result<Contract, Failure> {
    let src = std::fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let name = file.display().to_string();
    load(&src).map_err(|e| match e {
        FrontendError::Parse(p) => usage(format!("{name}:{p}")),
        FrontendError::Invalid(ds) => usage(ds.iter().map(|d| d.render(&name)).collect::<Vec<_>>().join("\n")),
        FrontendError::Fold(f) => usage(format!("{name}:{}: constant `{}` overflows", f.loc, f.text)),
    })
}

fn type_failure(file: &Path, e: TypeError) -> Failure {
    let d = Diagnostic::error(e.loc(), "type-error", e.to_string());
    Failure { code: 2, message: d.render(&file.display().to_string()) }
}

/// Runs check or infer and builds the report.
pub fn analyze_file(a: &AnalyzeArgs, mode: Mode) -> Result<Report, Failure> {
    let c = read_contract(&a.file)?;
    let cfg = SolverConfig::resolve(a.solver.as_deref(), Duration::from_millis(a.timeout_ms))
        .map_err(|e| usage(e.to_string()))?;
    let solver = Solver::new(cfg);
    let mut opts = Options::new(mode);
    opts.nested = !a.no_nested;
    opts.infer.no_soft = a.no_soft;
    opts.infer.no_infer = a.no_infer;
    opts.infer.uniform_assumptions = a.uniform_assumptions;
    opts.infer.accumulate_sigma = a.accumulate_sigma;
    opts.infer.chc_arrays = a.chc_arrays;
    let start = Instant::now();
    let analysis = analyze(&c, opts, &solver).map_err(|e| type_failure(&a.file, e))?;
    Ok(Report::new(&c, mode, &analysis, solver.query_count(), start.elapsed()))
}

fn cmd_analyze(a: &AnalyzeArgs, mode: Mode) -> Result<Output, Failure> {
    let report = analyze_file(a, mode)?;
    let stdout = match a.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(&a.file.display().to_string()),
    };
    let code = if report.hard_failures.is_empty() { 0 } else { 2 };
    Ok(Output { code, stdout })
}

fn parse_args(text: &str, params: &[minisol::ast::Param], sender: &BigUint, defaults: bool) -> Result<Vec<Value>, Failure> {
    let given: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if given.len() > params.len() || (!defaults && given.len() != params.len()) {
        return Err(usage(format!("expected {} arguments, got {}", params.len(), given.len())));
    }
    params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let Some(s) = given.get(i) else {
                return match p.ty.base {
                    BaseType::Bool => Ok(Value::Bool(false)),
                    _ => Ok(Value::Nat(sender.clone())),
                };
            };
            match &p.ty.base {
                BaseType::UInt => s
                    .parse::<BigUint>()
                    .ok()
                    .filter(|n| n <= &*minisol::MAX_INT)
                    .map(Value::Nat)
                    .ok_or_else(|| usage(format!("`{s}` is not a uint"))),
                BaseType::Bool => match *s {
                    "true" => Ok(Value::Bool(true)),
                    "false" => Ok(Value::Bool(false)),
                    _ => Err(usage(format!("`{s}` is not a bool"))),
                },
                t => Err(usage(format!("parameter `{}` of type {t} cannot be given on the command line", p.name))),
            }
        })
        .collect()
}

fn loc_json(l: SourceLoc) -> Json {
    json!({ "line": l.line, "column": l.col })
}

fn event_json(e: &ExecEvent) -> Json {
    match &e.kind {
        EventKind::OverflowWouldOccur { op, lhs, rhs } => json!({
            "event": "overflow-would-occur",
            "site": loc_json(e.site),
            "op": op.symbol(),
            "lhs": lhs.to_string(),
            "rhs": rhs.to_string(),
        }),
        EventKind::DivByZero => json!({ "event": "div-by-zero", "site": loc_json(e.site) }),
    }
}

fn store_json(s: &Store) -> Json {
    Json::Object(s.iter().map(|(k, v)| (k.clone(), Json::String(v.to_string()))).collect())
}

fn outcome_lines(phase: &str, o: &ExecOutcome, trace: bool, out: &mut String) {
    if trace {
        for e in o.events() {
            out.push_str(&event_json(e).to_string());
            out.push('\n');
        }
    }
    let j = match o {
        ExecOutcome::Completed { store, ret, .. } => json!({
            "phase": phase,
            "outcome": "completed",
            "ret": ret.to_string(),
            "store": store_json(store),
        }),
        ExecOutcome::Aborted { site, cause, .. } => json!({
            "phase": phase,
            "outcome": "aborted",
            "cause": cause.as_str(),
            "site": loc_json(*site),
        }),
    };
    out.push_str(&j.to_string());
    out.push('\n');
}

fn cmd_run(a: &RunArgs) -> Result<Output, Failure> {
    let c = read_contract(&a.file)?;
    let guards: Vec<SourceLoc> = if a.unguarded {
        Vec::new()
    } else {
        let templates = Templates::new(c.struct_table(), true);
        let cs = generate_with(&c, GenOptions::new(Mode::Check), &templates).map_err(|e| type_failure(&a.file, e))?;
        cs.soft().map(|o| o.site).collect()
    };
    let it = Interpreter::new(&c, guards);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let ctor_params = c.ctor.as_ref().map(|k| k.params.as_slice()).unwrap_or(&[]);
    let ctor_args = parse_args(&a.ctor_args, ctor_params, &a.sender, true)?;
    let mut out = String::new();
    let first = it.run_constructor(ctor_args, a.sender.clone(), &mut rng, &mut NoObserver);
    outcome_lines("constructor", &first, a.trace, &mut out);
    let ExecOutcome::Completed { store, .. } = &first else {
        return Ok(Output { code: 0, stdout: out });
    };
    if let Some(name) = &a.func {
        let f = c.function(name).ok_or_else(|| usage(format!("no function `{name}`")))?;
        let args = parse_args(&a.args, &f.params, &a.sender, false)?;
        let o = it.run_function(name, args, a.sender.clone(), store, &mut rng, &mut NoObserver);
        outcome_lines(name, &o, a.trace, &mut out);
    }
    Ok(Output { code: 0, stdout: out })
}

/// Obligations of the contract in the requested mode.
fn obligations(e: &EmitArgs) -> Result<(Contract, Templates, minisol::typecheck::ConstraintSet), Failure> {
    let c = read_contract(&e.file)?;
    let templates = Templates::new(c.struct_table(), !e.no_nested);
    let mode = if e.infer { Mode::Infer } else { Mode::Check };
    let cs = generate_with(&c, GenOptions { mode, nested: !e.no_nested }, &templates)
        .map_err(|err| type_failure(&e.file, err))?;
    Ok((c, templates, cs))
}

fn cmd_emit_obligations(e: &EmitArgs) -> Result<Output, Failure> {
    let (_, _, cs) = obligations(e)?;
    let stdout = cs.obligations.iter().map(|o| format!("{o}\n")).collect();
    Ok(Output { code: 0, stdout })
}

fn cmd_emit_smt(e: &EmitArgs) -> Result<Output, Failure> {
    let (_, templates, cs) = obligations(e)?;
    let mut out = String::new();
    if e.infer {
        for ob in cs.soft() {
            let _ = writeln!(out, "; query for {ob}");
            match query_script(&cs, &templates, Default::default(), ob) {
                Some(s) => out.push_str(&s),
                None => out.push_str("; not expressible as a Horn query\n"),
            }
        }
        return Ok(Output { code: 0, stdout: out });
    }
    let sigma = initial_sigma(&cs);
    for ob in &cs.obligations {
        let with_prior = matches!(ob.kind, ObKind::Soft(_)) || cs.mode == Mode::Check;
        let _ = writeln!(out, "; {ob}");
        match validity_script(ob, &cs, &templates, &sigma, with_prior) {
            Ok(Some(s)) => out.push_str(&s),
            Ok(None) => out.push_str("; trivially valid\n"),
            Err(msg) => {
                let _ = writeln!(out, "; cannot encode: {msg}");
            }
        }
    }
    Ok(Output { code: 0, stdout: out })
}

fn map_sorts(t: &BaseType, out: &mut Vec<BaseType>, structs: &minisol::ast::StructTable) {
    match t {
        BaseType::Map(v) => {
            if !out.contains(v) {
                out.push((**v).clone());
            }
            map_sorts(v, out, structs);
        }
        BaseType::Struct(name) => {
            if let Some(fields) = structs.fields(name) {
                for (_, ft) in fields {
                    map_sorts(ft, out, structs);
                }
            }
        }
        _ => {}
    }
}

fn cmd_emit_templates(e: &EmitArgs) -> Result<Output, Failure> {
    let c = read_contract(&e.file)?;
    let structs = c.struct_table();
    let templates = Templates::new(structs.clone(), !e.no_nested);
    let mut sorts = Vec::new();
    for sv in &c.state_vars {
        map_sorts(&sv.ty.base, &mut sorts, &structs);
    }
    let mut out = String::new();
    for s in sorts {
        let _ = writeln!(out, "map(_ => {s}):");
        for m in templates.family(&s) {
            let _ = writeln!(out, "  ({}, {}, {})", m.h1, m.h2, path_string(&m.path));
        }
    }
    Ok(Output { code: 0, stdout: out })
}

pub fn execute(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Check(a) => cmd_analyze(a, Mode::Check),
        Command::Infer(a) => cmd_analyze(a, Mode::Infer),
        Command::Run(a) => cmd_run(a),
        Command::EmitSmt(e) => cmd_emit_smt(e),
        Command::EmitObligations(e) => cmd_emit_obligations(e),
        Command::EmitTemplates(e) => cmd_emit_templates(e),
    }
}

/// Parses `args` and executes; usage errors exit 1, hard failures exit 2.
pub fn main_with<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 { (0, text, String::new()) } else { (1, String::new(), text) };
        }
    };
    match execute(&cli) {
        Ok(o) => (o.code, o.stdout, String::new()),
        Err(f) => (f.code, String::new(), f.message + "\n"),
    }
}
