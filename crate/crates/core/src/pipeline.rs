//! End-to-end analysis: parse, validate, fold, type, infer, finalize.

use thiserror::Error;

use crate::ast::Contract;
use crate::diag::Diagnostic;
use crate::fold::{fold_constants, ConstantOverflow};
use crate::infer::{finalize, infer_types, initial_sigma, InferOptions, InferOutcome, Sigma, Verdict};
use crate::parser::{parse_contract, ParseError};
use crate::solver::Solver;
use crate::templates::Templates;
use crate::typecheck::{generate_with, ConstraintSet, GenOptions, Mode, TypeError};
use crate::validate::validate;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("contract is not well formed")]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Fold(#[from] ConstantOverflow),
}

/// Parses, validates and constant-folds a contract.
pub fn load(src: &str) -> Result<Contract, FrontendError> {
    let c = parse_contract(src)?;
    let diags = validate(&c);
    if !diags.is_empty() {
        return Err(FrontendError::Invalid(diags));
    }
    Ok(fold_constants(&c)?)
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub mode: Mode,
    pub nested: bool,
    pub infer: InferOptions,
}

impl Options {
    pub fn new(mode: Mode) -> Self {
        Options { mode, nested: true, infer: InferOptions::default() }
    }
}

pub struct Analysis {
    pub cs: ConstraintSet,
    pub templates: Templates,
    pub sigma: Sigma,
    pub inference: Option<InferOutcome>,
    pub verdicts: Vec<Verdict>,
    pub hard_failures: Vec<Diagnostic>,
}

pub fn analyze(c: &Contract, opts: Options, solver: &Solver) -> Result<Analysis, TypeError> {
    let templates = Templates::new(c.struct_table(), opts.nested);
    let cs = generate_with(c, GenOptions { mode: opts.mode, nested: opts.nested }, &templates)?;
    let inference = match opts.mode {
        Mode::Infer if !opts.infer.no_infer => Some(infer_types(&cs, &templates, solver, opts.infer)),
        _ => None,
    };
    let sigma = inference.as_ref().map(|i| i.sigma.clone()).unwrap_or_else(|| initial_sigma(&cs));
    let fin = finalize(&cs, &templates, &sigma, solver, opts.infer, inference.as_ref());
    Ok(Analysis { cs, templates, sigma, inference, verdicts: fin.verdicts, hard_failures: fin.hard_failures })
}
