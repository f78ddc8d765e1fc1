//! Refinement typing of contracts, producing subtyping obligations.
//!
//! Every arithmetic site yields one soft obligation (its overflow-safety
//! predicate). Everything the type system must establish (commit invariants,
//! join and loop annotations, call arguments, return types, assertions) yields
//! a hard obligation. Each obligation carries a snapshot of its context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::*;
use crate::templates::Templates;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// State variables keep their written annotations (missing means `true`).
    Check,
    /// Unannotated state variables and phi variables get unknown predicates.
    Infer,
}

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    pub mode: Mode,
    pub nested: bool,
}

impl GenOptions {
    pub fn new(mode: Mode) -> Self {
        GenOptions { mode, nested: true }
    }
}

/// A resolved refinement type; `qual` speaks about `Term::Nu`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RType {
    pub base: BaseType,
    pub qual: Term,
}

impl RType {
    pub fn top(base: BaseType) -> RType {
        RType { base, qual: Term::Bool(true) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub name: Ident,
    pub ty: RType,
}

/// Typing context at a program point.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub env: Vec<Binding>,
    /// Path conditions (branch conditions, requires, passed asserts).
    pub guards: Vec<Term>,
    /// Refinements of evaluated subexpressions that are not bound to a name.
    pub facts: Vec<Term>,
    /// Overflow-safety predicates of earlier arithmetic sites.
    pub prior: Vec<Term>,
    pub locked: bool,
}

impl Context {
    pub fn lookup(&self, x: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|b| b.name == x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HardKind {
    Commit(Ident),
    Assert,
    Join(Ident),
    LoopEntry(Ident),
    LoopPreserve(Ident),
    CallArg { func: Ident, param: Ident },
    Return,
    Let(Ident),
}

impl fmt::Display for HardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HardKind::Commit(x) => write!(f, "hard:commit({x})"),
            HardKind::Assert => write!(f, "hard:assert"),
            HardKind::Join(x) => write!(f, "hard:join({x})"),
            HardKind::LoopEntry(x) => write!(f, "hard:loop-entry({x})"),
            HardKind::LoopPreserve(x) => write!(f, "hard:loop-preserve({x})"),
            HardKind::CallArg { func, param } => write!(f, "hard:call-arg({func}.{param})"),
            HardKind::Return => write!(f, "hard:return"),
            HardKind::Let(x) => write!(f, "hard:let({x})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObKind {
    Soft(BinOp),
    Hard(HardKind),
}

impl ObKind {
    pub fn is_soft(&self) -> bool {
        matches!(self, ObKind::Soft(_))
    }
}

impl fmt::Display for ObKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObKind::Soft(op) => write!(f, "soft({})", op.symbol()),
            ObKind::Hard(h) => write!(f, "{h}"),
        }
    }
}

/// `ctx ⊢ {ν | true} <: {ν | consequent}`, i.e. the context implies the consequent.
#[derive(Clone, Debug)]
pub struct Obligation {
    pub id: usize,
    /// Function name, or `constructor`.
    pub func: Ident,
    pub seq: usize,
    pub site: SourceLoc,
    pub kind: ObKind,
    pub ctx: Context,
    pub consequent: Term,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} {} {} {}", self.func, self.seq, self.kind, self.site, self.consequent)
    }
}

/// Unknown refinement predicate. Its formals are `params`; the one at
/// `nu_index` stands for the refined value itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownPred {
    pub name: Ident,
    pub params: Vec<(Ident, BaseType)>,
    pub nu_index: usize,
}

impl UnknownPred {
    /// Formal name as used in solutions: `v` at the value position.
    pub fn formal_term(&self, i: usize) -> Term {
        if i == self.nu_index {
            Term::Nu
        } else {
            Term::Var(self.params[i].0.clone())
        }
    }

    /// Instantiates a solution written over the formals with actual arguments.
    pub fn instantiate(&self, solution: &Term, args: &[Term]) -> Term {
        let map: BTreeMap<Ident, Term> = self
            .params
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.nu_index)
            .map(|(i, (x, _))| (x.clone(), args[i].clone()))
            .collect();
        let nu = args[self.nu_index].clone();
        // rename formals apart first so actuals mentioning formal names are safe
        let fresh: BTreeMap<Ident, Term> =
            map.keys().map(|x| (x.clone(), Term::Var(format!("{x}#formal")))).collect();
        let renamed = solution.subst_vars(&fresh).subst_nu(&nu);
        let back: BTreeMap<Ident, Term> = map.into_iter().map(|(x, t)| (format!("{x}#formal"), t)).collect();
        renamed.subst_vars(&back)
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintSet {
    pub obligations: Vec<Obligation>,
    pub preds: Vec<UnknownPred>,
    /// Declared (or unknown) types of state variables, over state-variable names.
    pub state_types: Vec<(Ident, RType)>,
    /// Functions called (directly) by each function.
    pub calls: BTreeMap<Ident, BTreeSet<Ident>>,
    pub mode: Mode,
    /// Every fetch and commit touches all state variables, so the state
    /// unknowns are only ever assumed and established together.
    pub full_state_access: bool,
}

impl ConstraintSet {
    pub fn soft(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| o.kind.is_soft())
    }

    pub fn hard(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| !o.kind.is_soft())
    }

    pub fn pred(&self, name: &str) -> Option<&UnknownPred> {
        self.preds.iter().find(|p| p.name == name)
    }

    fn callees(&self, f: &str) -> BTreeSet<Ident> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![f.to_string()];
        while let Some(g) = stack.pop() {
            if seen.insert(g.clone()) {
                stack.extend(self.calls.get(&g).into_iter().flatten().cloned());
            }
        }
        seen
    }

    /// Hard obligations whose validity a soft obligation's verdict depends on:
    /// every commit invariant, the hard obligations of its own function and of
    /// everything it (transitively) calls, and argument obligations at every
    /// call into those functions.
    pub fn relied_on(&self, ob: &Obligation) -> Vec<usize> {
        let reach = self.callees(&ob.func);
        self.hard()
            .filter(|h| match &h.kind {
                ObKind::Hard(HardKind::Commit(_)) => true,
                ObKind::Hard(HardKind::CallArg { func, .. }) if reach.contains(func) => true,
                _ => reach.contains(&h.func),
            })
            .map(|h| h.id)
            .collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("{loc}: {message}")]
    LockViolation { loc: SourceLoc, message: String },
    #[error("{loc}: branches disagree on whether state is fetched")]
    JoinLockMismatch { loc: SourceLoc },
    #[error("{loc}: {message}")]
    Malformed { loc: SourceLoc, message: String },
}

impl TypeError {
    pub fn loc(&self) -> SourceLoc {
        match self {
            TypeError::LockViolation { loc, .. }
            | TypeError::JoinLockMismatch { loc }
            | TypeError::Malformed { loc, .. } => *loc,
        }
    }
}

/// Type-implied range facts: scalar uint leaves lie in [0, MaxInt], aggregates
/// are nonnegative.
pub fn bounds(t: &Term, base: &BaseType, templates: &Templates) -> Term {
    match base {
        BaseType::UInt => Term::and_all([Term::le(Term::nat(0), t.clone()), Term::le(t.clone(), Term::MaxInt)]),
        BaseType::Map(_) | BaseType::Struct(_) => Term::and_all(templates.uint_templates(base).iter().flat_map(
            |(h, _)| {
                let v = h.fill(t);
                let mut out = vec![Term::le(Term::nat(0), v.clone())];
                if !h.has_sum() {
                    out.push(Term::le(v, Term::MaxInt));
                }
                out
            },
        )),
        _ => Term::Bool(true),
    }
}

pub fn generate_constraints(c: &Contract, opts: GenOptions) -> Result<ConstraintSet, TypeError> {
    let templates = Templates::new(c.struct_table(), opts.nested);
    generate_with(c, opts, &templates)
}

pub fn generate_with(c: &Contract, opts: GenOptions, templates: &Templates) -> Result<ConstraintSet, TypeError> {
    let mut g = Gen {
        c,
        opts,
        templates,
        obligations: Vec::new(),
        preds: Vec::new(),
        state_types: Vec::new(),
        calls: BTreeMap::new(),
        func: String::new(),
        seq: 0,
        fresh: 0,
        full_state_access: true,
    };
    g.state_types();
    if let Some(ctor) = &c.ctor {
        g.begin("constructor");
        let mut ctx = g.entry_ctx(&ctor.params);
        ctx.locked = true;
        g.block(&mut ctx, &ctor.body)?;
        if ctx.locked {
            return Err(TypeError::LockViolation {
                loc: ctor.loc,
                message: "constructor must commit every state variable".into(),
            });
        }
    }
    for f in &c.functions {
        g.begin(&f.name);
        let mut ctx = g.entry_ctx(&f.params);
        g.block(&mut ctx, &f.body)?;
        if ctx.locked {
            return Err(TypeError::LockViolation {
                loc: f.loc,
                message: format!("`{}` returns with fetched state that was never committed", f.name),
            });
        }
        let (base, t) = g.expr_fact(&mut ctx, &f.ret_expr)?;
        debug_assert_eq!(base, f.ret.base);
        if let Some(q) = &f.ret.qual {
            g.hard(&ctx, f.ret_expr.loc, HardKind::Return, q.subst_nu(&t));
        }
    }
    Ok(ConstraintSet {
        obligations: g.obligations,
        preds: g.preds,
        state_types: g.state_types,
        calls: g.calls,
        mode: opts.mode,
        full_state_access: g.full_state_access,
    })
}

/// Result of typing an expression: `{base | ν = term ∧ refine}`.
struct Typed {
    base: BaseType,
    term: Term,
    refine: Term,
}

struct Gen<'a> {
    c: &'a Contract,
    opts: GenOptions,
    templates: &'a Templates,
    obligations: Vec<Obligation>,
    preds: Vec<UnknownPred>,
    state_types: Vec<(Ident, RType)>,
    calls: BTreeMap<Ident, BTreeSet<Ident>>,
    func: Ident,
    seq: usize,
    fresh: usize,
    full_state_access: bool,
}

impl<'a> Gen<'a> {
    fn state_types(&mut self) {
        let params: Vec<(Ident, BaseType)> =
            self.c.state_vars.iter().map(|s| (s.name.clone(), s.ty.base.clone())).collect();
        for (i, sv) in self.c.state_vars.iter().enumerate() {
            let qual = match (&sv.ty.qual, self.opts.mode) {
                (Some(q), _) => q.clone(),
                (None, Mode::Check) => Term::Bool(true),
                (None, Mode::Infer) => {
                    let p = UnknownPred { name: format!("I_{}", i + 1), params: params.clone(), nu_index: i };
                    let args = (0..params.len()).map(|j| p.formal_term(j)).collect();
                    let app = Term::Pred(p.name.clone(), args);
                    self.preds.push(p);
                    app
                }
            };
            self.state_types.push((sv.name.clone(), RType { base: sv.ty.base.clone(), qual }));
        }
    }

    fn begin(&mut self, func: &str) {
        self.func = func.to_string();
        self.seq = 0;
        self.calls.entry(func.to_string()).or_default();
    }

    fn entry_ctx(&self, params: &[Param]) -> Context {
        let mut ctx = Context::default();
        ctx.env.push(Binding { name: SENDER.into(), ty: RType::top(BaseType::UInt) });
        for p in params {
            // unannotated parameters are unconstrained inputs in both modes
            let qual = p.ty.qual.clone().unwrap_or(Term::Bool(true));
            ctx.env.push(Binding { name: p.name.clone(), ty: RType { base: p.ty.base.clone(), qual } });
        }
        ctx
    }

    fn push(&mut self, ctx: &Context, site: SourceLoc, kind: ObKind, consequent: Term) {
        self.seq += 1;
        self.obligations.push(Obligation {
            id: self.obligations.len(),
            func: self.func.clone(),
            seq: self.seq,
            site,
            kind,
            ctx: ctx.clone(),
            consequent,
        });
    }

    fn hard(&mut self, ctx: &Context, site: SourceLoc, kind: HardKind, consequent: Term) {
        if consequent.is_true() {
            return;
        }
        self.push(ctx, site, ObKind::Hard(kind), consequent);
    }

    fn soft(&mut self, ctx: &mut Context, site: SourceLoc, op: BinOp, consequent: Term) {
        self.push(ctx, site, ObKind::Soft(op), consequent.clone());
        ctx.prior.push(consequent);
    }

    fn state_qual(&self, i: usize) -> &RType {
        &self.state_types[i].1
    }

    /// Unknown predicate for a phi variable over `v` and everything in scope.
    fn phi_pred(&mut self, ctx: &Context, phi: &Phi) -> Term {
        let mut params = vec![("v".to_string(), phi.ty.base.clone())];
        let mut seen = BTreeSet::new();
        for b in ctx.env.iter().rev() {
            if b.ty.base != BaseType::Unit && seen.insert(b.name.clone()) {
                params.push((b.name.clone(), b.ty.base.clone()));
            }
        }
        params[1..].reverse();
        let p = UnknownPred { name: format!("P_{}_{}", self.func, phi.var), params, nu_index: 0 };
        let args = (0..p.params.len()).map(|j| p.formal_term(j)).collect();
        let app = Term::Pred(p.name.clone(), args);
        self.preds.push(p);
        app
    }

    fn phi_type(&mut self, ctx: &Context, phi: &Phi) -> RType {
        let qual = match (&phi.ty.qual, self.opts.mode) {
            (Some(q), _) => q.clone(),
            (None, Mode::Check) => Term::Bool(true),
            (None, Mode::Infer) => self.phi_pred(ctx, phi),
        };
        RType { base: phi.ty.base.clone(), qual }
    }

    fn block(&mut self, ctx: &mut Context, b: &Block) -> Result<(), TypeError> {
        for s in b {
            self.stmt(ctx, s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, ctx: &mut Context, s: &Stmt) -> Result<(), TypeError> {
        match &s.kind {
            StmtKind::Let { var, ty, init } => {
                let t = self.expr(ctx, init)?;
                if let Some(q) = &ty.qual {
                    let mut c2 = ctx.clone();
                    c2.facts.push(t.refine.subst_nu(&t.term));
                    self.hard(&c2, s.loc, HardKind::Let(var.clone()), q.subst_nu(&t.term));
                }
                let qual = Term::and_all([Term::eq(Term::Nu, t.term), t.refine]);
                ctx.env.push(Binding { name: var.clone(), ty: RType { base: t.base, qual } });
            }
            StmtKind::Skip => {}
            StmtKind::Assume(e) => {
                let (_, t) = self.expr_fact(ctx, e)?;
                ctx.guards.push(t);
            }
            StmtKind::Assert(e) => {
                let (_, t) = self.expr_fact(ctx, e)?;
                self.hard(ctx, s.loc, HardKind::Assert, t.clone());
                ctx.guards.push(t);
            }
            StmtKind::If { cond, then_branch, else_branch, join } => {
                let (_, c) = self.expr_fact(ctx, cond)?;
                let mut ct = ctx.clone();
                ct.guards.push(c.clone());
                self.block(&mut ct, then_branch)?;
                let mut ce = ctx.clone();
                ce.guards.push(Term::not(c.clone()));
                self.block(&mut ce, else_branch)?;
                if ct.locked != ce.locked {
                    return Err(TypeError::JoinLockMismatch { loc: s.loc });
                }
                let types: Vec<RType> = join.iter().map(|p| self.phi_type(ctx, p)).collect();
                let left: BTreeMap<Ident, Term> =
                    join.iter().map(|p| (p.var.clone(), Term::Var(p.left.clone()))).collect();
                let right: BTreeMap<Ident, Term> =
                    join.iter().map(|p| (p.var.clone(), Term::Var(p.right.clone()))).collect();
                for (p, ty) in join.iter().zip(&types) {
                    let q = ty.qual.subst_vars(&left).subst_nu(&left[&p.var]);
                    self.hard(&ct, p.loc, HardKind::Join(p.var.clone()), q);
                    let q = ty.qual.subst_vars(&right).subst_nu(&right[&p.var]);
                    self.hard(&ce, p.loc, HardKind::Join(p.var.clone()), q);
                }
                let n = ctx.prior.len();
                let then_prior: Vec<Term> = ct.prior[n..].to_vec();
                let else_prior: Vec<Term> = ce.prior[n..].to_vec();
                ctx.prior.extend(then_prior.into_iter().map(|q| Term::implies(c.clone(), q)));
                ctx.prior.extend(else_prior.into_iter().map(|q| Term::implies(Term::not(c.clone()), q)));
                ctx.locked = ct.locked;
                for (p, ty) in join.iter().zip(types) {
                    ctx.env.push(Binding { name: p.var.clone(), ty });
                }
            }
            StmtKind::While { join, cond, body } => {
                let types: Vec<RType> = join.iter().map(|p| self.phi_type(ctx, p)).collect();
                let entry: BTreeMap<Ident, Term> =
                    join.iter().map(|p| (p.var.clone(), Term::Var(p.left.clone()))).collect();
                for (p, ty) in join.iter().zip(&types) {
                    let q = ty.qual.subst_vars(&entry).subst_nu(&entry[&p.var]);
                    self.hard(ctx, p.loc, HardKind::LoopEntry(p.var.clone()), q);
                }
                for (p, ty) in join.iter().zip(&types) {
                    ctx.env.push(Binding { name: p.var.clone(), ty: ty.clone() });
                }
                let (_, c) = self.expr_fact(ctx, cond)?;
                let mut cb = ctx.clone();
                cb.guards.push(c.clone());
                self.block(&mut cb, body)?;
                if cb.locked != ctx.locked {
                    return Err(TypeError::JoinLockMismatch { loc: s.loc });
                }
                let back: BTreeMap<Ident, Term> =
                    join.iter().map(|p| (p.var.clone(), Term::Var(p.right.clone()))).collect();
                for (p, ty) in join.iter().zip(&types) {
                    let q = ty.qual.subst_vars(&back).subst_nu(&back[&p.var]);
                    self.hard(&cb, p.loc, HardKind::LoopPreserve(p.var.clone()), q);
                }
                ctx.guards.push(Term::not(c));
            }
            StmtKind::Fetch(pairs) => {
                if ctx.locked {
                    return Err(TypeError::LockViolation { loc: s.loc, message: "fetch while state is already fetched".into() });
                }
                self.full_state_access &= pairs.len() == self.c.state_vars.len();
                let rename: BTreeMap<Ident, Term> = pairs.iter().map(|(sv, x)| (sv.clone(), Term::Var(x.clone()))).collect();
                for (sv, x) in pairs {
                    let i = self.state_index(sv, s.loc)?;
                    let ty = self.state_qual(i).clone();
                    ctx.env.push(Binding {
                        name: x.clone(),
                        ty: RType { base: ty.base, qual: ty.qual.subst_vars(&rename) },
                    });
                }
                ctx.locked = true;
            }
            StmtKind::Commit(pairs) => {
                if !ctx.locked {
                    return Err(TypeError::LockViolation { loc: s.loc, message: "commit without a matching fetch".into() });
                }
                self.full_state_access &= pairs.len() == self.c.state_vars.len();
                let mut terms = BTreeMap::new();
                for (e, sv) in pairs {
                    let (_, t) = self.expr_fact(ctx, e)?;
                    terms.insert(sv.clone(), t);
                }
                for (_, sv) in pairs {
                    let i = self.state_index(sv, s.loc)?;
                    let q = self.state_qual(i).qual.subst_vars(&terms).subst_nu(&terms[sv]);
                    self.hard(ctx, s.loc, HardKind::Commit(sv.clone()), q);
                }
                ctx.locked = false;
            }
            StmtKind::Call { var, ty, func, args } => {
                let f = self.c.function(func).ok_or_else(|| TypeError::Malformed {
                    loc: s.loc,
                    message: format!("unknown function `{func}`"),
                })?;
                if ctx.locked && !f.is_pure {
                    return Err(TypeError::LockViolation {
                        loc: s.loc,
                        message: format!("call to `{func}` while state is fetched"),
                    });
                }
                self.calls.entry(self.func.clone()).or_default().insert(func.clone());
                let mut actuals = BTreeMap::new();
                for (p, a) in f.params.iter().zip(args) {
                    let (_, t) = self.expr_fact(ctx, a)?;
                    actuals.insert(p.name.clone(), t);
                }
                for p in &f.params {
                    if let Some(q) = &p.ty.qual {
                        let q = q.subst_vars(&actuals).subst_nu(&actuals[&p.name]);
                        self.hard(
                            ctx,
                            s.loc,
                            HardKind::CallArg { func: func.clone(), param: p.name.clone() },
                            q,
                        );
                    }
                }
                let ret = f.ret.qual.clone().unwrap_or(Term::Bool(true)).subst_vars(&actuals);
                if let Some(q) = &ty.qual {
                    let fresh = Term::Var(format!("{var}#ret"));
                    let mut c2 = ctx.clone();
                    c2.facts.push(ret.subst_nu(&fresh));
                    c2.env.push(Binding { name: format!("{var}#ret"), ty: RType::top(ty.base.clone()) });
                    self.hard(&c2, s.loc, HardKind::Let(var.clone()), q.subst_nu(&fresh));
                }
                ctx.env.push(Binding { name: var.clone(), ty: RType { base: f.ret.base.clone(), qual: ret } });
            }
        }
        Ok(())
    }

    fn state_index(&self, sv: &str, loc: SourceLoc) -> Result<usize, TypeError> {
        self.c.state_vars.iter().position(|s| s.name == sv).ok_or_else(|| TypeError::Malformed {
            loc,
            message: format!("`{sv}` is not a state variable"),
        })
    }

    /// Types `e` and records its refinement as a fact about its term.
    fn expr_fact(&mut self, ctx: &mut Context, e: &Expr) -> Result<(BaseType, Term), TypeError> {
        let t = self.expr(ctx, e)?;
        self.note(ctx, &t);
        Ok((t.base, t.term))
    }

    fn note(&self, ctx: &mut Context, t: &Typed) {
        if !t.refine.is_true() {
            ctx.facts.push(t.refine.subst_nu(&t.term));
        }
        if !matches!(t.term, Term::Var(_) | Term::Nat(_) | Term::Bool(_) | Term::Unit) {
            let b = bounds(&t.term, &t.base, self.templates);
            if !b.is_true() {
                ctx.facts.push(b);
            }
        }
    }

    fn sub(&mut self, ctx: &mut Context, e: &Expr) -> Result<Typed, TypeError> {
        let t = self.expr(ctx, e)?;
        self.note(ctx, &t);
        Ok(t)
    }

    fn malformed(loc: SourceLoc, what: &str) -> TypeError {
        TypeError::Malformed { loc, message: format!("ill-sorted {what}; run validation first") }
    }

    fn expr(&mut self, ctx: &mut Context, e: &Expr) -> Result<Typed, TypeError> {
        let structs = self.templates.structs();
        let simple = |base, term| Typed { base, term, refine: Term::Bool(true) };
        Ok(match &e.kind {
            ExprKind::Nat(n) => simple(BaseType::UInt, Term::Nat(n.clone())),
            ExprKind::Bool(b) => simple(BaseType::Bool, Term::Bool(*b)),
            ExprKind::Unit => simple(BaseType::Unit, Term::Unit),
            ExprKind::Var(x) => {
                let b = ctx.lookup(x).ok_or_else(|| Self::malformed(e.loc, "variable"))?;
                simple(b.ty.base.clone(), Term::Var(x.clone()))
            }
            ExprKind::Havoc(t) => {
                self.fresh += 1;
                let name = format!("havoc#{}", self.fresh);
                ctx.env.push(Binding { name: name.clone(), ty: RType::top(t.clone()) });
                simple(t.clone(), Term::Var(name))
            }
            ExprKind::Not(a) => {
                let a = self.sub(ctx, a)?;
                simple(BaseType::Bool, Term::not(a.term))
            }
            ExprKind::Bin(op, a, b) => {
                let a = self.sub(ctx, a)?;
                let b = self.sub(ctx, b)?;
                let term = Term::bin(*op, a.term.clone(), b.term.clone());
                match op {
                    BinOp::Add | BinOp::Mul => {
                        self.soft(ctx, e.loc, *op, Term::le(term.clone(), Term::MaxInt));
                        simple(BaseType::UInt, term)
                    }
                    BinOp::Sub => {
                        self.soft(ctx, e.loc, *op, Term::le(b.term, a.term));
                        simple(BaseType::UInt, term)
                    }
                    BinOp::Div => {
                        self.soft(ctx, e.loc, *op, Term::lt(Term::nat(0), b.term.clone()));
                        // floor division: e2 * v <= e1 < (v + 1) * e2
                        let refine = Term::and_all([
                            Term::le(Term::mul(b.term.clone(), Term::Nu), a.term.clone()),
                            Term::lt(a.term, Term::mul(Term::add(Term::Nu, Term::one()), b.term)),
                        ]);
                        Typed { base: BaseType::UInt, term, refine }
                    }
                    _ => simple(BaseType::Bool, term),
                }
            }
            ExprKind::Index(m, k) => {
                let m = self.sub(ctx, m)?;
                let k = self.sub(ctx, k)?;
                let BaseType::Map(vt) = m.base else { return Err(Self::malformed(e.loc, "index")) };
                let refine = Term::and_all(self.templates.family(&vt).iter().map(|f| {
                    Term::le(f.h2.fill(&Term::Nu), f.h1.fill(&m.term))
                }));
                Typed { base: *vt, term: Term::index(m.term, k.term), refine }
            }
            ExprKind::FieldIndex(s, x) => {
                let s = self.sub(ctx, s)?;
                let ft = crate::sorts::field_sort(&s.base, x, structs)
                    .map_err(|_| Self::malformed(e.loc, "field access"))?;
                simple(ft, Term::field(s.term, x))
            }
            ExprKind::Update(m, k, v) => {
                let m = self.sub(ctx, m)?;
                let k = self.sub(ctx, k)?;
                let v = self.sub(ctx, v)?;
                let BaseType::Map(vt) = &m.base else { return Err(Self::malformed(e.loc, "update")) };
                let old = Term::index(m.term.clone(), k.term.clone());
                let refine = Term::and_all(self.templates.family(vt).iter().map(|f| {
                    Term::eq(
                        f.h1.fill(&Term::Nu),
                        Term::add(Term::sub(f.h1.fill(&m.term), f.h2.fill(&old)), f.h2.fill(&v.term)),
                    )
                }));
                let term = Term::Update(Box::new(m.term), Box::new(k.term), Box::new(v.term));
                Typed { base: m.base, term, refine }
            }
            ExprKind::FieldUpdate(s, x, v) => {
                let s = self.sub(ctx, s)?;
                let v = self.sub(ctx, v)?;
                let term = Term::FieldUpdate(Box::new(s.term), x.clone(), Box::new(v.term));
                simple(s.base, term)
            }
            ExprKind::MapConst(vt, es) => {
                let mut entries = Vec::new();
                for (k, v) in es {
                    let v = self.sub(ctx, v)?;
                    entries.push((k.clone(), v.term));
                }
                let refine = Term::and_all(self.templates.family(vt).iter().map(|f| {
                    let total = entries
                        .iter()
                        .map(|(_, v)| f.h2.fill(v))
                        .reduce(Term::add)
                        .unwrap_or(Term::nat(0));
                    Term::eq(f.h1.fill(&Term::Nu), total)
                }));
                Typed { base: BaseType::map(vt.clone()), term: Term::MapConst(vt.clone(), entries), refine }
            }
            ExprKind::StructConst(name, fs) => {
                let mut fields = Vec::new();
                for (x, v) in fs {
                    let v = self.sub(ctx, v)?;
                    fields.push((x.clone(), v.term));
                }
                simple(BaseType::Struct(name.clone()), Term::StructConst(name.clone(), fields))
            }
        })
    }
}
