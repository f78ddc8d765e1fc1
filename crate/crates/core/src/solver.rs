//! External SMT/CHC solver driven over SMT-LIB 2 text, one process per query.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::logic::sexp::{parse_all, Sexp};

pub const SOLVER_ENV: &str = "MINISOL_SOLVER";

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub timeout: Duration,
    pub extra_args: Vec<String>,
}

impl SolverConfig {
    /// Picks the solver: explicit path, then `$MINISOL_SOLVER`, then `z3` on PATH.
    pub fn resolve(explicit: Option<&Path>, timeout: Duration) -> Result<SolverConfig, SolverError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(SOLVER_ENV) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => find_on_path("z3").ok_or_else(|| SolverError::NotFound("z3".into()))?,
            },
        };
        if !path.exists() {
            if let Some(found) = path.to_str().and_then(find_on_path) {
                return Ok(SolverConfig { path: found, timeout, extra_args: Vec::new() });
            }
            return Err(SolverError::NotFound(path.display().to_string()));
        }
        Ok(SolverConfig { path, timeout, extra_args: Vec::new() })
    }
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    if name.contains('/') {
        return None;
    }
    std::env::var_os("PATH")
        .into_iter()
        .flat_map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnknownReason {
    Timeout,
    SolverUnknown,
    IoError(String),
}

impl UnknownReason {
    pub fn as_str(&self) -> &str {
        match self {
            UnknownReason::Timeout => "timeout",
            UnknownReason::SolverUnknown => "solver-unknown",
            UnknownReason::IoError(_) => "io-error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidityResult {
    Valid,
    Invalid(Option<String>),
    Unknown(UnknownReason),
}

/// Interpretation of one predicate in a CHC model: formal names and body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredModel {
    pub formals: Vec<String>,
    pub body: Sexp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChcResult {
    Sat(BTreeMap<String, PredModel>),
    Unsat,
    Unknown(UnknownReason),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver `{0}` not found (use --solver or set MINISOL_SOLVER)")]
    NotFound(String),
    #[error("unexpected solver response: {0}")]
    Protocol(String),
    #[error("cannot read model: {0}")]
    ModelParse(String),
}

/// Solver handle; counts the queries it has run.
pub struct Solver {
    pub cfg: SolverConfig,
    queries: AtomicUsize,
}

enum Raw {
    Output(String),
    Timeout,
    Io(String),
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Self {
        Solver { cfg, queries: AtomicUsize::new(0) }
    }

    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    fn run(&self, script: &str) -> Raw {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let child = Command::new(&self.cfg.path)
            .args(["-in", "-smt2"])
            .args(&self.cfg.extra_args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn();
        let mut child = match child {
            Ok(c) => c,
            Err(e) => return Raw::Io(e.to_string()),
        };
        let mut stdin = child.stdin.take().unwrap();
        let input = script.to_string();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        let mut stdout = child.stdout.take().unwrap();
        let reader = std::thread::spawn(move || {
            let mut out = String::new();
            let _ = stdout.read_to_string(&mut out);
            out
        });
        let deadline = Instant::now() + self.cfg.timeout;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = writer.join();
                    let _ = reader.join();
                    return Raw::Timeout;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(2)),
                Err(e) => return Raw::Io(e.to_string()),
            }
        }
        let _ = writer.join();
        Raw::Output(reader.join().unwrap_or_default())
    }

    /// `unsat` of the script (which asserts the negated formula) means valid.
    pub fn check_validity(&self, script: &str) -> Result<ValidityResult, SolverError> {
        if script.trim().is_empty() {
            return Err(SolverError::Protocol("empty script".into()));
        }
        let out = match self.run(script) {
            Raw::Output(o) => o,
            Raw::Timeout => return Ok(ValidityResult::Unknown(UnknownReason::Timeout)),
            Raw::Io(e) => return Ok(ValidityResult::Unknown(UnknownReason::IoError(e))),
        };
        let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("unsat") => Ok(ValidityResult::Valid),
            Some("sat") => Ok(ValidityResult::Invalid(None)),
            Some("unknown") | Some("timeout") => Ok(ValidityResult::Unknown(UnknownReason::SolverUnknown)),
            other => Err(SolverError::Protocol(other.unwrap_or("no output").to_string())),
        }
    }

    pub fn solve_chc(&self, script: &str) -> Result<ChcResult, SolverError> {
        if script.trim().is_empty() {
            return Err(SolverError::Protocol("empty script".into()));
        }
        let out = match self.run(script) {
            Raw::Output(o) => o,
            Raw::Timeout => return Ok(ChcResult::Unknown(UnknownReason::Timeout)),
            Raw::Io(e) => return Ok(ChcResult::Unknown(UnknownReason::IoError(e))),
        };
        let all = parse_all(&out).map_err(SolverError::Protocol)?;
        match all.first().and_then(Sexp::atom) {
            Some("unsat") => Ok(ChcResult::Unsat),
            Some("unknown") | Some("timeout") => Ok(ChcResult::Unknown(UnknownReason::SolverUnknown)),
            Some("sat") => {
                let model = all.get(1).ok_or_else(|| SolverError::ModelParse("missing model".into()))?;
                Ok(ChcResult::Sat(read_model(model)?))
            }
            _ => Err(SolverError::Protocol(out.lines().next().unwrap_or("no output").to_string())),
        }
    }
}

fn read_model(model: &Sexp) -> Result<BTreeMap<String, PredModel>, SolverError> {
    let bad = |s: &Sexp| SolverError::ModelParse(s.to_string());
    let items = model.list().ok_or_else(|| bad(model))?;
    // some solver versions wrap the model as (model ...)
    let items = match items.first().and_then(Sexp::atom) {
        Some("model") => &items[1..],
        _ => items,
    };
    let mut out = BTreeMap::new();
    for item in items {
        let parts = item.list().ok_or_else(|| bad(item))?;
        match parts {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(formals), _ret, body] if kw == "define-fun" => {
                let formals = formals
                    .iter()
                    .map(|f| match f.list() {
                        Some([Sexp::Atom(x), _]) => Ok(x.clone()),
                        _ => Err(bad(f)),
                    })
                    .collect::<Result<_, _>>()?;
                out.insert(name.clone(), PredModel { formals, body: body.clone() });
            }
            _ => return Err(bad(item)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_spacer_style_model() {
        let all = parse_all("sat\n((define-fun I ((x!0 Real)) Bool (<= x!0 3.0)))").unwrap();
        let m = read_model(&all[1]).unwrap();
        assert_eq!(m["I"].formals, vec!["x!0".to_string()]);
        assert!(read_model(&parse_all("(foo)").unwrap()[0]).is_err());
    }
}
