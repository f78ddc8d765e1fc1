//! Invariant inference (one CHC query per soft obligation) and the final
//! verdict pass.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::Serialize;

use crate::ast::{BaseType, BinOp, Ident, SourceLoc, Term};
use crate::diag::Diagnostic;
use crate::logic::encode::pred_slots;
use crate::logic::formula::Formula as F;
use crate::logic::horn::{obligation_clause, prepare, HornClause, HornSystem};
use crate::logic::sexp::Sexp;
use crate::logic::{to_validity_script, Encoder, Slot};
use crate::solver::{ChcResult, PredModel, Solver, ValidityResult};
use crate::templates::Templates;
use crate::typecheck::{ConstraintSet, Context, Mode, ObKind, Obligation, UnknownPred};

/// Solutions for unknown predicates, as terms over their formals.
pub type Sigma = BTreeMap<Ident, Term>;

#[derive(Clone, Copy, Debug, Default)]
pub struct InferOptions {
    pub no_soft: bool,
    pub no_infer: bool,
    pub uniform_assumptions: bool,
    pub accumulate_sigma: bool,
    pub chc_arrays: bool,
}

#[derive(Clone, Debug, Default)]
pub struct InferOutcome {
    pub sigma: Sigma,
    /// Soft obligations whose inference query was satisfiable.
    pub sat: BTreeSet<usize>,
    /// Soft obligations whose inference query ended in unknown or an error.
    pub unknown: BTreeSet<usize>,
}

pub const CODE_INVARIANT: &str = "invariant-violation";

/// Starting point: every unknown is `true`.
pub fn initial_sigma(cs: &ConstraintSet) -> Sigma {
    cs.preds.iter().map(|p| (p.name.clone(), Term::Bool(true))).collect()
}

/// Replaces every application of an unknown with its solution.
pub fn apply_sigma(t: &Term, cs: &ConstraintSet, sigma: &Sigma) -> Term {
    t.replace(&mut |n| match n {
        Term::Pred(name, args) => {
            let p = cs.pred(name)?;
            let sol = sigma.get(name).cloned().unwrap_or(Term::Bool(true));
            Some(p.instantiate(&sol, args))
        }
        _ => None,
    })
}

fn map_ctx(ctx: &Context, f: &dyn Fn(&Term) -> Term) -> Context {
    let mut c = ctx.clone();
    for b in &mut c.env {
        b.ty.qual = f(&b.ty.qual);
    }
    c.guards = c.guards.iter().map(f).collect();
    c.facts = c.facts.iter().map(f).collect();
    c.prior = c.prior.iter().map(f).collect();
    c
}

/// Conjoins the current solution next to each unknown in assumption position.
fn strengthen_assumptions(ob: &Obligation, cs: &ConstraintSet, sigma: &Sigma) -> Obligation {
    let f = |t: &Term| {
        t.replace(&mut |n| match n {
            Term::Pred(..) => Some(Term::and_all([n.clone(), apply_sigma(n, cs, sigma)])),
            _ => None,
        })
    };
    Obligation { ctx: map_ctx(&ob.ctx, &f), ..ob.clone() }
}

struct HornBuilder<'a> {
    cs: &'a ConstraintSet,
    templates: &'a Templates,
    opts: InferOptions,
    slots: BTreeMap<Ident, Vec<Vec<Slot>>>,
}

impl<'a> HornBuilder<'a> {
    fn new(cs: &'a ConstraintSet, templates: &'a Templates, opts: InferOptions) -> Self {
        let slots = cs
            .preds
            .iter()
            .map(|p| {
                (p.name.clone(), p.params.iter().map(|(_, t)| pred_slots(t, templates, opts.chc_arrays)).collect())
            })
            .collect();
        HornBuilder { cs, templates, opts, slots }
    }

    fn clause(&self, ob: &Obligation, with_prior: bool) -> Option<HornClause> {
        let mut enc = Encoder::new(self.templates).with_preds(&self.cs.preds, self.opts.chc_arrays);
        let c = obligation_clause(&mut enc, ob, with_prior).ok()?;
        Some(prepare(c, &enc.decls.funs, self.opts.chc_arrays))
    }

    fn system(&self, clauses: Vec<HornClause>) -> HornSystem {
        let enc = Encoder::new(self.templates).with_preds(&self.cs.preds, self.opts.chc_arrays);
        let preds = self.cs.preds.iter().map(|p| (p.name.clone(), enc.pred_signature(&p.name).unwrap())).collect();
        HornSystem { preds, clauses }
    }

    fn hard_clauses(&self, sigma: Option<&Sigma>) -> Vec<HornClause> {
        self.cs
            .hard()
            .filter_map(|h| {
                let h = match sigma {
                    Some(s) => strengthen_assumptions(h, self.cs, s),
                    None => h.clone(),
                };
                self.clause(&h, self.opts.uniform_assumptions)
            })
            .collect()
    }

    /// Reads a model back into terms over each predicate's formals.
    fn read(&self, model: &BTreeMap<String, PredModel>) -> Option<Sigma> {
        let mut out = Sigma::new();
        for p in &self.cs.preds {
            let t = match model.get(&p.name) {
                Some(pm) => normalize_qualifier(&model_term(p, &self.slots[&p.name], pm).ok()?),
                None => Term::Bool(true),
            };
            out.insert(p.name.clone(), t);
        }
        Some(out)
    }
}

/// HORN script for the inference query of one soft obligation.
pub fn query_script(cs: &ConstraintSet, templates: &Templates, opts: InferOptions, soft: &Obligation) -> Option<String> {
    let b = HornBuilder::new(cs, templates, opts);
    let mut clauses = b.hard_clauses(None);
    clauses.push(b.clause(soft, true)?);
    Some(b.system(clauses).to_script())
}

fn conjoin(sigma: &mut Sigma, model: Sigma) {
    for (p, t) in model {
        if t.is_true() {
            continue;
        }
        let cur = sigma.entry(p).or_insert(Term::Bool(true));
        if !cur.conjuncts().contains(&&t) {
            *cur = Term::and_all([cur.clone(), t]);
        }
    }
}

type Linear = (BTreeMap<Term, BigRational>, BigRational);

/// Linear form of an arithmetic term: coefficients of non-arithmetic atoms
/// plus a constant.
fn linear(t: &Term) -> Option<Linear> {
    let zero = || BigRational::from_integer(0.into());
    Some(match t {
        Term::Nat(_) | Term::Rat(_) => (BTreeMap::new(), const_value(t)?),
        Term::Bin(BinOp::Add | BinOp::Sub, a, b) => {
            let (mut xs, c) = linear(a)?;
            let (ys, d) = linear(b)?;
            let sign = if matches!(t, Term::Bin(BinOp::Sub, ..)) { -BigRational::one() } else { BigRational::one() };
            for (y, k) in ys {
                *xs.entry(y).or_insert_with(zero) += k * &sign;
            }
            xs.retain(|_, k| *k != zero());
            (xs, c + d * sign)
        }
        Term::Bin(BinOp::Mul, a, b) => {
            let (xa, ca) = linear(a)?;
            let (xb, cb) = linear(b)?;
            let (xs, c, k) = match (xa.is_empty(), xb.is_empty()) {
                (true, _) => (xb, cb, ca),
                (_, true) => (xa, ca, cb),
                _ => return None,
            };
            let xs: BTreeMap<Term, BigRational> =
                xs.into_iter().map(|(x, v)| (x, v * &k)).filter(|(_, v)| *v != zero()).collect();
            (xs, c * k)
        }
        Term::Bin(op, ..) if op.is_arith() => return None,
        Term::Bool(_) | Term::Not(_) | Term::Pred(..) => return None,
        Term::Bin(..) => return None,
        atom => (BTreeMap::from([(atom.clone(), BigRational::one())]), zero()),
    })
}

fn side(xs: Vec<(Term, BigInt)>, c: BigInt) -> Term {
    let mut parts: Vec<Term> = xs
        .into_iter()
        .map(|(x, k)| if k == BigInt::one() { x } else { Term::mul(rat_term(BigRational::from_integer(k)), x) })
        .collect();
    if c != BigInt::from(0) || parts.is_empty() {
        parts.push(rat_term(BigRational::from_integer(c)));
    }
    parts.into_iter().reduce(Term::add).unwrap()
}

/// Rewrites linear comparisons to `positive side op positive side` with
/// integer coefficients; leaves everything else alone.
pub fn normalize_qualifier(t: &Term) -> Term {
    match t {
        Term::Bin(BinOp::And, ..) => {
            let mut seen: Vec<Term> = Vec::new();
            for c in t.conjuncts() {
                let n = normalize_qualifier(c);
                if !n.is_true() && !seen.contains(&n) {
                    seen.push(n);
                }
            }
            Term::and_all(seen)
        }
        Term::Bin(BinOp::Or, a, b) => Term::bin(BinOp::Or, normalize_qualifier(a), normalize_qualifier(b)),
        Term::Not(a) => Term::not(normalize_qualifier(a)),
        Term::Bin(op, a, b) if op.is_order() || matches!(op, BinOp::Eq | BinOp::Ne) => {
            let (Some((xa, ca)), Some((xb, cb))) = (linear(a), linear(b)) else { return t.clone() };
            let mut xs = xa;
            for (y, k) in xb {
                *xs.entry(y).or_insert_with(|| BigRational::from_integer(0.into())) -= k;
            }
            let c = ca - cb;
            let scale = xs
                .values()
                .chain(std::iter::once(&c))
                .fold(BigInt::one(), |acc, k| num_integer::Integer::lcm(&acc, k.denom()));
            let to_int = |k: &BigRational| (k * BigRational::from_integer(scale.clone())).to_integer();
            let zero = BigInt::from(0);
            let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
            for (x, k) in &xs {
                let k = to_int(k);
                if k > zero {
                    lhs.push((x.clone(), k));
                } else if k < zero {
                    rhs.push((x.clone(), -k));
                }
            }
            let c = to_int(&c);
            let (lc, rc) = if c > zero { (c, zero) } else { (zero.clone(), -c) };
            if lhs.is_empty() && rhs.is_empty() {
                return t.clone();
            }
            Term::bin(*op, side(lhs, lc), side(rhs, rc))
        }
        _ => t.clone(),
    }
}

/// With full state access the state unknowns only occur together, so their
/// conjuncts can be moved freely. Each conjunct goes to the unknown of the
/// last state variable it mentions.
fn rebalance(cs: &ConstraintSet, sigma: &mut Sigma) {
    let state: Vec<&UnknownPred> = cs.preds.iter().filter(|p| p.name.starts_with("I_")).collect();
    if !cs.full_state_access || state.is_empty() || state.len() != cs.state_types.len() {
        return;
    }
    let names: Vec<Ident> = cs.state_types.iter().map(|(x, _)| x.clone()).collect();
    let mut conjuncts: Vec<Term> = Vec::new();
    for p in &state {
        let sol = sigma.get(&p.name).cloned().unwrap_or(Term::Bool(true));
        let closed = sol.subst_nu(&Term::Var(names[p.nu_index].clone()));
        for c in closed.conjuncts() {
            if !c.is_true() && !conjuncts.contains(c) {
                conjuncts.push(c.clone());
            }
        }
    }
    let mut parts: Vec<Vec<Term>> = vec![Vec::new(); state.len()];
    for c in conjuncts {
        let fv = c.free_vars();
        let k = names.iter().rposition(|x| fv.contains(x)).unwrap_or(names.len() - 1);
        parts[k].push(c);
    }
    for (p, cs_k) in state.iter().zip(parts) {
        let own = BTreeMap::from([(names[p.nu_index].clone(), Term::Nu)]);
        sigma.insert(p.name.clone(), Term::and_all(cs_k).subst_vars(&own));
    }
}

/// Soft obligations one at a time: each query holds every hard clause plus
/// the goal `prior ⟹ c`; satisfiable queries strengthen Σ.
pub fn infer_types(cs: &ConstraintSet, templates: &Templates, solver: &Solver, opts: InferOptions) -> InferOutcome {
    let mut out = InferOutcome { sigma: initial_sigma(cs), ..Default::default() };
    let soft: Vec<&Obligation> = cs.soft().collect();
    if opts.no_infer || soft.is_empty() {
        return out;
    }
    let b = HornBuilder::new(cs, templates, opts);

    if opts.no_soft {
        let mut clauses = b.hard_clauses(None);
        for s in &soft {
            match b.clause(s, opts.uniform_assumptions) {
                Some(c) => clauses.push(c),
                None => {
                    out.unknown.extend(soft.iter().map(|s| s.id));
                    return out;
                }
            }
        }
        match solver.solve_chc(&b.system(clauses).to_script()) {
            Ok(ChcResult::Sat(m)) => match b.read(&m) {
                Some(s) => {
                    conjoin(&mut out.sigma, s);
                    out.sat.extend(soft.iter().map(|s| s.id));
                }
                None => out.unknown.extend(soft.iter().map(|s| s.id)),
            },
            Ok(ChcResult::Unsat) => {}
            _ => out.unknown.extend(soft.iter().map(|s| s.id)),
        }
        rebalance(cs, &mut out.sigma);
        return out;
    }

    let run = |s: &Obligation, hard: &[HornClause]| -> (usize, Option<Option<Sigma>>) {
        let Some(goal) = b.clause(s, true) else { return (s.id, None) };
        let mut clauses = hard.to_vec();
        clauses.push(goal);
        match solver.solve_chc(&b.system(clauses).to_script()) {
            Ok(ChcResult::Sat(m)) => (s.id, b.read(&m).map(Some)),
            Ok(ChcResult::Unsat) => (s.id, Some(None)),
            _ => (s.id, None),
        }
    };
    let record = |out: &mut InferOutcome, (id, r): (usize, Option<Option<Sigma>>)| match r {
        Some(Some(m)) => {
            out.sat.insert(id);
            conjoin(&mut out.sigma, m);
        }
        Some(None) => {}
        None => {
            out.unknown.insert(id);
        }
    };

    if opts.accumulate_sigma {
        for s in soft {
            let hard = b.hard_clauses(Some(&out.sigma));
            let s2 = strengthen_assumptions(s, cs, &out.sigma);
            let r = run(&s2, &hard);
            record(&mut out, r);
        }
    } else {
        // queries do not depend on Σ, so they can run concurrently; results
        // are folded in obligation order
        let hard = b.hard_clauses(None);
        let results: Vec<_> = soft.par_iter().map(|s| run(s, &hard)).collect();
        for r in results {
            record(&mut out, r);
        }
    }
    rebalance(cs, &mut out.sigma);
    out
}

/// Converts a predicate interpretation from a model into a term over the
/// predicate's formals (`v` at the value position).
pub fn model_term(p: &UnknownPred, slots: &[Vec<Slot>], pm: &PredModel) -> Result<Term, String> {
    let mut env = BTreeMap::new();
    let flat: Vec<(usize, &Slot)> = slots.iter().enumerate().flat_map(|(i, ss)| ss.iter().map(move |s| (i, s))).collect();
    if flat.len() != pm.formals.len() {
        return Err(format!("arity mismatch for {}", p.name));
    }
    for ((i, slot), x) in flat.into_iter().zip(&pm.formals) {
        if let Some(h) = &slot.template {
            env.insert(x.clone(), h.subst_hole(&p.formal_term(i)));
        }
    }
    sexp_term(&pm.body, &env)
}

fn number(a: &str) -> Option<BigRational> {
    let (int, frac) = a.split_once('.').unwrap_or((a, ""));
    if int.is_empty() || !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = BigInt::from(10u8).pow(frac.len() as u32);
    Some(BigRational::new(digits, scale))
}

fn rat_term(r: BigRational) -> Term {
    if r.is_integer() && r.to_integer() == BigInt::from(crate::MAX_INT.clone()) {
        Term::MaxInt
    } else if r.is_integer() && !r.is_negative() {
        Term::Nat(r.to_integer().to_biguint().unwrap_or_else(BigUint::default))
    } else {
        Term::Rat(r)
    }
}

fn const_value(t: &Term) -> Option<BigRational> {
    match t {
        Term::Nat(n) => Some(BigRational::from_integer(BigInt::from(n.clone()))),
        Term::Rat(r) => Some(r.clone()),
        _ => None,
    }
}

fn sexp_term(s: &Sexp, env: &BTreeMap<String, Term>) -> Result<Term, String> {
    let bad = || format!("unsupported model construct `{s}`");
    match s {
        Sexp::Atom(a) => match a.as_str() {
            "true" => Ok(Term::Bool(true)),
            "false" => Ok(Term::Bool(false)),
            a => match number(a) {
                Some(r) => Ok(rat_term(r)),
                None => env.get(a).cloned().ok_or_else(bad),
            },
        },
        Sexp::List(xs) => {
            let (head, args) = match xs.split_first() {
                Some((Sexp::Atom(h), args)) => (h.as_str(), args),
                _ => return Err(bad()),
            };
            if head == "let" {
                let [Sexp::List(binds), body] = args else { return Err(bad()) };
                let mut inner = env.clone();
                for b in binds {
                    let Some([Sexp::Atom(x), e]) = b.list() else { return Err(bad()) };
                    inner.insert(x.clone(), sexp_term(e, env)?);
                }
                return sexp_term(body, &inner);
            }
            let ts = args.iter().map(|a| sexp_term(a, env)).collect::<Result<Vec<_>, _>>()?;
            let chain = |op: BinOp, ts: Vec<Term>| -> Result<Term, String> {
                if ts.len() < 2 {
                    return Err(bad());
                }
                let pairs: Vec<Term> = ts.windows(2).map(|w| Term::bin(op, w[0].clone(), w[1].clone())).collect();
                Ok(Term::and_all(pairs))
            };
            match head {
                "and" => Ok(Term::and_all(ts)),
                "or" => Ok(ts.into_iter().reduce(|a, b| Term::bin(BinOp::Or, a, b)).unwrap_or(Term::Bool(false))),
                "not" if ts.len() == 1 => Ok(Term::not(ts.into_iter().next().unwrap())),
                "=>" if ts.len() == 2 => {
                    let mut it = ts.into_iter();
                    Ok(Term::implies(it.next().unwrap(), it.next().unwrap()))
                }
                "=" => chain(BinOp::Eq, ts),
                "<=" => chain(BinOp::Le, ts),
                ">=" => chain(BinOp::Ge, ts),
                "<" => chain(BinOp::Lt, ts),
                ">" => chain(BinOp::Gt, ts),
                "+" => ts.into_iter().reduce(Term::add).ok_or_else(bad),
                "*" => ts.into_iter().reduce(Term::mul).ok_or_else(bad),
                "-" if ts.len() == 1 => {
                    let t = ts.into_iter().next().unwrap();
                    match const_value(&t) {
                        Some(r) => Ok(rat_term(-r)),
                        None => Ok(Term::mul(Term::Rat(-BigRational::one()), t)),
                    }
                }
                "-" => ts.into_iter().reduce(Term::sub).ok_or_else(bad),
                "/" if ts.len() == 2 => match (const_value(&ts[0]), const_value(&ts[1])) {
                    (Some(a), Some(b)) if b != BigRational::from_integer(0.into()) => Ok(rat_term(a / b)),
                    _ => Err(bad()),
                },
                "ite" if ts.len() == 3 => {
                    let mut it = ts.into_iter();
                    let (c, a, b) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                    Ok(Term::bin(
                        BinOp::Or,
                        Term::and_all([c.clone(), a]),
                        Term::and_all([Term::not(c), b]),
                    ))
                }
                "select" if ts.len() == 2 => {
                    let mut it = ts.into_iter();
                    Ok(Term::index(it.next().unwrap(), it.next().unwrap()))
                }
                _ => Err(bad()),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "SAFE")]
    Safe,
    #[serde(rename = "NEEDS_CHECK")]
    NeedsCheck,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Safe => "SAFE",
            Status::NeedsCheck => "NEEDS_CHECK",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    DischargedInInference,
    DischargedInFinalize,
    SolverUnknown,
    Invalid,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::DischargedInInference => "discharged-in-inference",
            Reason::DischargedInFinalize => "discharged-in-finalize",
            Reason::SolverUnknown => "solver-unknown",
            Reason::Invalid => "invalid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub function: Ident,
    pub site: SourceLoc,
    pub op: BinOp,
    pub status: Status,
    pub reason: Reason,
    pub obligation: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Check {
    Valid,
    Invalid,
    Unknown,
}

/// The validity query of an obligation under Σ, as a script. `None` when
/// the consequent is trivially true.
pub fn validity_script(
    ob: &Obligation,
    cs: &ConstraintSet,
    templates: &Templates,
    sigma: &Sigma,
    with_prior: bool,
) -> Result<Option<String>, String> {
    let f = |t: &Term| apply_sigma(t, cs, sigma);
    let goal = f(&ob.consequent);
    if goal.is_true() {
        return Ok(None);
    }
    let ctx = map_ctx(&ob.ctx, &f);
    let mut enc = Encoder::new(templates);
    let hyp = enc.context(&ctx, with_prior).map_err(|e| e.to_string())?;
    let goal = enc.formula(&goal).map_err(|e| e.to_string())?;
    let formula = F::implies(F::and(hyp), goal);
    to_validity_script(&enc.decls, &formula).map(Some).map_err(|e| e.to_string())
}

fn check(solver: &Solver, script: Result<Option<String>, String>) -> Check {
    match script {
        Ok(None) => Check::Valid,
        Ok(Some(s)) => match solver.check_validity(&s) {
            Ok(ValidityResult::Valid) => Check::Valid,
            Ok(ValidityResult::Invalid(_)) => Check::Invalid,
            _ => Check::Unknown,
        },
        Err(_) => Check::Unknown,
    }
}

#[derive(Clone, Debug)]
pub struct Finalized {
    pub verdicts: Vec<Verdict>,
    pub hard_failures: Vec<Diagnostic>,
}

/// Re-validates every obligation with Σ substituted and assigns verdicts.
/// `inference` is the outcome of [`infer_types`] when it ran; a soft site is
/// then SAFE only if its inference query was satisfiable as well.
pub fn finalize(
    cs: &ConstraintSet,
    templates: &Templates,
    sigma: &Sigma,
    solver: &Solver,
    opts: InferOptions,
    inference: Option<&InferOutcome>,
) -> Finalized {
    let with_prior = |ob: &Obligation| {
        ob.kind.is_soft() || cs.mode == Mode::Check || opts.uniform_assumptions
    };
    let results: Vec<Check> = cs
        .obligations
        .par_iter()
        .map(|ob| check(solver, validity_script(ob, cs, templates, sigma, with_prior(ob))))
        .collect();

    let mut hard_failures = Vec::new();
    for ob in cs.hard() {
        let msg = match results[ob.id] {
            Check::Valid => continue,
            Check::Invalid => "may not hold",
            Check::Unknown => "could not be established",
        };
        let goal = apply_sigma(&ob.consequent, cs, sigma);
        let ObKind::Hard(kind) = &ob.kind else { unreachable!() };
        hard_failures.push(Diagnostic::error(
            ob.site,
            CODE_INVARIANT,
            format!("in `{}`: {} {msg}: {goal}", ob.func, kind.to_string().trim_start_matches("hard:")),
        ));
    }

    let mut verdicts = Vec::new();
    for ob in cs.soft() {
        let ObKind::Soft(op) = ob.kind else { unreachable!() };
        let relied = cs.relied_on(ob);
        let mut checks = vec![&results[ob.id]];
        checks.extend(relied.iter().map(|&h| &results[h]));
        let all_valid = checks.iter().all(|c| **c == Check::Valid);
        let any_unknown = checks.iter().any(|c| **c == Check::Unknown);
        let (status, reason) = match inference {
            Some(inf) if all_valid && inf.sat.contains(&ob.id) => (Status::Safe, Reason::DischargedInInference),
            Some(inf) if all_valid && inf.unknown.contains(&ob.id) => (Status::NeedsCheck, Reason::SolverUnknown),
            Some(_) if all_valid => (Status::NeedsCheck, Reason::Invalid),
            None if all_valid => (Status::Safe, Reason::DischargedInFinalize),
            _ if any_unknown => (Status::NeedsCheck, Reason::SolverUnknown),
            _ => (Status::NeedsCheck, Reason::Invalid),
        };
        verdicts.push(Verdict { function: ob.func.clone(), site: ob.site, op, status, reason, obligation: ob.id });
    }
    if opts.no_soft && verdicts.iter().any(|v| v.status == Status::NeedsCheck) {
        for v in &mut verdicts {
            if v.status == Status::Safe {
                v.status = Status::NeedsCheck;
                v.reason = Reason::Invalid;
            }
        }
    }
    Finalized { verdicts, hard_failures }
}

/// Validity of `Σ(p) ⟹ target`, with `target` written over the predicate's
/// formal names and `v`.
pub fn sigma_implies(
    pred: &UnknownPred,
    sigma: &Term,
    target: &Term,
    templates: &Templates,
    solver: &Solver,
) -> Option<ValidityResult> {
    let nu_name = pred.params[pred.nu_index].0.clone();
    let close = |t: &Term| t.subst_nu(&Term::Var(nu_name.clone()));
    let mut enc = Encoder::new(templates);
    let mut hyp = Vec::new();
    for (x, base) in &pred.params {
        enc.bind(x, base);
    }
    for (x, base) in &pred.params {
        if *base != BaseType::Unit {
            hyp.push(enc.type_bounds(&Term::Var(x.clone()), base).ok()?);
        }
    }
    hyp.push(enc.formula(&close(sigma)).ok()?);
    let goal = enc.formula(&close(target)).ok()?;
    let script = to_validity_script(&enc.decls, &F::implies(F::and(hyp), goal)).ok()?;
    solver.check_validity(&script).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::sexp::parse_all;

    #[test]
    fn reads_model_bodies() {
        let p = UnknownPred {
            name: "I_3".into(),
            params: vec![
                ("owner".into(), BaseType::UInt),
                ("bals".into(), BaseType::map(BaseType::UInt)),
                ("tot".into(), BaseType::UInt),
            ],
            nu_index: 2,
        };
        let templates = Templates::new(Default::default(), true);
        let slots: Vec<Vec<Slot>> = p.params.iter().map(|(_, t)| pred_slots(t, &templates, false)).collect();
        let body = &parse_all("(let ((a!1 (+ x!1 (* (- 1.0) x!2)))) (and (<= a!1 0.0) (>= x!0 (/ 1.0 2.0))))")
            .unwrap()[0];
        let pm = PredModel { formals: vec!["x!0".into(), "x!1".into(), "x!2".into()], body: body.clone() };
        let t = model_term(&p, &slots, &pm).unwrap();
        use crate::interp::{aggregate::map_of, eval_term, Value};
        let bals = map_of(Value::nat(0), [(1, Value::nat(3))]);
        let env = |x: &str| match x {
            "owner" => Some(Value::nat(1)),
            "bals" => Some(bals.clone()),
            _ => None,
        };
        let holds = |tot: u64| eval_term(&t, &env, Some(&Value::nat(tot))).unwrap().as_bool();
        assert_eq!(holds(3), Some(true), "{t}");
        assert_eq!(holds(2), Some(false), "{t}");
    }
}
