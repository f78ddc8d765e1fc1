//! Big-step execution of contract transactions with overflow-event tracking.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;
use serde::Serialize;

use super::aggregate::eval_term;
use super::value::{havoc_val, zero_val, MapVal, Value};
use crate::ast::*;
use crate::MAX_INT;

pub type Store = BTreeMap<Ident, Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortCause {
    RequireFailed,
    RuntimeOverflowCheck,
    AssertFailed,
    Stuck,
}

impl AbortCause {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortCause::RequireFailed => "require-failed",
            AbortCause::RuntimeOverflowCheck => "runtime-overflow-check",
            AbortCause::AssertFailed => "assert-failed",
            AbortCause::Stuck => "stuck",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// The mathematical result of `op` leaves the uint range.
    OverflowWouldOccur { op: BinOp, lhs: BigUint, rhs: BigUint },
    DivByZero,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecEvent {
    pub site: SourceLoc,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecOutcome {
    Completed { store: Store, ret: Value, events: Vec<ExecEvent> },
    Aborted { site: SourceLoc, cause: AbortCause, events: Vec<ExecEvent> },
}

impl ExecOutcome {
    pub fn events(&self) -> &[ExecEvent] {
        match self {
            ExecOutcome::Completed { events, .. } | ExecOutcome::Aborted { events, .. } => events,
        }
    }
}

/// Hooks for checking runtime properties while a transaction executes.
pub trait Observer {
    /// Called after every evaluated map update `after = before[key <- entry]`.
    fn map_update(&mut self, _before: &Value, _key: &BigUint, _entry: &Value, _after: &Value) {}
    /// Called with the new store after every executed commit.
    fn commit(&mut self, _store: &Store) {}
}

pub struct NoObserver;
impl Observer for NoObserver {}

struct Abort {
    site: SourceLoc,
    cause: AbortCause,
}

type Env = BTreeMap<Ident, Value>;

/// Executes transactions against a contract. Sites in `guards` behave as if
/// a runtime overflow check had been inserted there.
pub struct Interpreter<'c> {
    contract: &'c Contract,
    structs: StructTable,
    guards: BTreeSet<SourceLoc>,
    /// Upper bound on loop iterations plus calls per transaction.
    pub fuel: u64,
}

struct Run<'a, 'c> {
    it: &'a Interpreter<'c>,
    rng: &'a mut dyn RngCore,
    obs: &'a mut dyn Observer,
    events: Vec<ExecEvent>,
    store: Store,
    fuel: u64,
}

impl<'c> Interpreter<'c> {
    pub fn new(contract: &'c Contract, guards: impl IntoIterator<Item = SourceLoc>) -> Self {
        Interpreter { contract, structs: contract.struct_table(), guards: guards.into_iter().collect(), fuel: 10_000 }
    }

    pub fn structs(&self) -> &StructTable {
        &self.structs
    }

    /// Store holding the zero value of every state variable.
    pub fn zero_store(&self) -> Store {
        self.contract
            .state_vars
            .iter()
            .map(|sv| (sv.name.clone(), zero_val(&sv.ty.base, &self.structs)))
            .collect()
    }

    pub fn run_constructor(
        &self,
        args: Vec<Value>,
        sender: BigUint,
        rng: &mut dyn RngCore,
        obs: &mut dyn Observer,
    ) -> ExecOutcome {
        let store = self.zero_store();
        let Some(ctor) = &self.contract.ctor else {
            return ExecOutcome::Completed { store, ret: Value::Unit, events: Vec::new() };
        };
        let mut run = Run { it: self, rng, obs, events: Vec::new(), store, fuel: self.fuel };
        let mut env = bind_params(&ctor.params, args, sender);
        let r = run.block(&ctor.body, &mut env);
        run.finish(r.map(|_| Value::Unit))
    }

    pub fn run_function(
        &self,
        name: &str,
        args: Vec<Value>,
        sender: BigUint,
        store: &Store,
        rng: &mut dyn RngCore,
        obs: &mut dyn Observer,
    ) -> ExecOutcome {
        let f = self.contract.function(name).expect("function exists");
        // parameter refinements of an entry point are checked on entry
        let env = bind_params(&f.params, args.clone(), sender.clone());
        let lookup = |x: &str| env.get(x).cloned();
        for p in &f.params {
            let Some(q) = &p.ty.qual else { continue };
            let ok = eval_term(q, &lookup, env.get(&p.name)).ok().and_then(|v| v.as_bool());
            if ok != Some(true) {
                return ExecOutcome::Aborted { site: f.loc, cause: AbortCause::RequireFailed, events: Vec::new() };
            }
        }
        let mut run = Run { it: self, rng, obs, events: Vec::new(), store: store.clone(), fuel: self.fuel };
        let r = run.call(f, args, sender);
        run.finish(r)
    }
}

fn bind_params(params: &[Param], args: Vec<Value>, sender: BigUint) -> Env {
    let mut env = Env::new();
    env.insert(SENDER.to_string(), Value::Nat(sender));
    for (p, a) in params.iter().zip(args) {
        env.insert(p.name.clone(), a);
    }
    env
}

impl<'a, 'c> Run<'a, 'c> {
    fn finish(self, r: Result<Value, Abort>) -> ExecOutcome {
        match r {
            Ok(ret) => ExecOutcome::Completed { store: self.store, ret, events: self.events },
            Err(a) => ExecOutcome::Aborted { site: a.site, cause: a.cause, events: self.events },
        }
    }

    fn burn(&mut self, site: SourceLoc) -> Result<(), Abort> {
        if self.fuel == 0 {
            return Err(Abort { site, cause: AbortCause::Stuck });
        }
        self.fuel -= 1;
        Ok(())
    }

    fn call(&mut self, f: &FunDecl, args: Vec<Value>, sender: BigUint) -> Result<Value, Abort> {
        self.burn(f.loc)?;
        let mut env = bind_params(&f.params, args, sender);
        self.block(&f.body, &mut env)?;
        self.expr(&f.ret_expr, &env)
    }

    fn block(&mut self, b: &Block, env: &mut Env) -> Result<(), Abort> {
        for s in b {
            self.stmt(s, env)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, env: &mut Env) -> Result<(), Abort> {
        match &s.kind {
            StmtKind::Let { var, init, .. } => {
                let v = self.expr(init, env)?;
                env.insert(var.clone(), v);
            }
            StmtKind::Skip => {}
            StmtKind::Assert(e) => {
                if !self.cond(e, env)? {
                    return Err(Abort { site: s.loc, cause: AbortCause::AssertFailed });
                }
            }
            StmtKind::Assume(e) => {
                if !self.cond(e, env)? {
                    return Err(Abort { site: s.loc, cause: AbortCause::RequireFailed });
                }
            }
            StmtKind::If { cond, then_branch, else_branch, join } => {
                let c = self.cond(cond, env)?;
                let mut inner = env.clone();
                self.block(if c { then_branch } else { else_branch }, &mut inner)?;
                for p in join {
                    let src = if c { &p.left } else { &p.right };
                    let v = inner.get(src).cloned().expect("validated phi argument");
                    env.insert(p.var.clone(), v);
                }
            }
            StmtKind::While { join, cond, body } => {
                for p in join {
                    let v = env.get(&p.left).cloned().expect("validated phi argument");
                    env.insert(p.var.clone(), v);
                }
                while self.cond(cond, env)? {
                    self.burn(s.loc)?;
                    let mut inner = env.clone();
                    self.block(body, &mut inner)?;
                    for p in join {
                        let v = inner.get(&p.right).cloned().expect("validated phi argument");
                        env.insert(p.var.clone(), v);
                    }
                }
            }
            StmtKind::Fetch(pairs) => {
                for (sv, x) in pairs {
                    env.insert(x.clone(), self.store[sv].clone());
                }
            }
            StmtKind::Commit(pairs) => {
                let mut vals = Vec::new();
                for (e, sv) in pairs {
                    vals.push((sv.clone(), self.expr(e, env)?));
                }
                for (sv, v) in vals {
                    self.store.insert(sv, v);
                }
                self.obs.commit(&self.store);
            }
            StmtKind::Call { var, func, args, .. } => {
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(a, env)?);
                }
                let f = self.it.contract.function(func).expect("validated call");
                let sender = env[SENDER].as_nat().expect("sender is a uint").clone();
                let v = self.call(f, vals, sender)?;
                env.insert(var.clone(), v);
            }
        }
        Ok(())
    }

    fn cond(&mut self, e: &Expr, env: &Env) -> Result<bool, Abort> {
        Ok(self.expr(e, env)?.as_bool().expect("validated condition"))
    }

    fn nat(&mut self, e: &Expr, env: &Env) -> Result<BigUint, Abort> {
        Ok(self.expr(e, env)?.as_nat().expect("validated uint").clone())
    }

    fn expr(&mut self, e: &Expr, env: &Env) -> Result<Value, Abort> {
        Ok(match &e.kind {
            ExprKind::Nat(n) => Value::Nat(n.clone()),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Unit => Value::Unit,
            ExprKind::Var(x) => env.get(x).cloned().expect("validated variable"),
            ExprKind::Havoc(t) => havoc_val(t, &self.it.structs, &mut self.rng),
            ExprKind::Not(a) => Value::Bool(!self.cond(a, env)?),
            ExprKind::Bin(op, a, b) => {
                let x = self.expr(a, env)?;
                let y = self.expr(b, env)?;
                self.binop(*op, x, y, e.loc)?
            }
            ExprKind::MapConst(t, es) => {
                let mut m = MapVal { default: Box::new(zero_val(t, &self.it.structs)), entries: BTreeMap::new() };
                for (k, v) in es {
                    let v = self.expr(v, env)?;
                    m.set(k.clone(), v);
                }
                Value::Map(m)
            }
            ExprKind::StructConst(s, fs) => {
                let mut given = BTreeMap::new();
                for (x, v) in fs {
                    given.insert(x.clone(), self.expr(v, env)?);
                }
                let decl = self.it.structs.fields(s).expect("validated struct");
                Value::Struct(
                    s.clone(),
                    decl.iter().map(|(x, _)| (x.clone(), given.remove(x).expect("validated field"))).collect(),
                )
            }
            ExprKind::Index(m, k) => {
                let m = self.expr(m, env)?;
                let k = self.nat(k, env)?;
                match m {
                    Value::Map(mv) => mv.get(&k).clone(),
                    _ => unreachable!("validated index"),
                }
            }
            ExprKind::FieldIndex(s, x) => self.expr(s, env)?.field(x).cloned().expect("validated field"),
            ExprKind::Update(m, k, v) => {
                let before = self.expr(m, env)?;
                let k = self.nat(k, env)?;
                let entry = self.expr(v, env)?;
                let Value::Map(mut mv) = before.clone() else { unreachable!("validated update") };
                mv.set(k.clone(), entry.clone());
                let after = Value::Map(mv);
                self.obs.map_update(&before, &k, &entry, &after);
                after
            }
            ExprKind::FieldUpdate(s, x, v) => {
                let sv = self.expr(s, env)?;
                let nv = self.expr(v, env)?;
                let Value::Struct(name, mut fs) = sv else { unreachable!("validated field update") };
                if let Some(slot) = fs.iter_mut().find(|(f, _)| f == x) {
                    slot.1 = nv;
                }
                Value::Struct(name, fs)
            }
        })
    }

    fn binop(&mut self, op: BinOp, x: Value, y: Value, site: SourceLoc) -> Result<Value, Abort> {
        if let (BinOp::Eq | BinOp::Ne, false) = (op, matches!(x, Value::Nat(_))) {
            return Ok(Value::Bool((x == y) == (op == BinOp::Eq)));
        }
        if op.is_logic() {
            let (p, q) = (x.as_bool().expect("bool"), y.as_bool().expect("bool"));
            return Ok(Value::Bool(if op == BinOp::And { p && q } else { p || q }));
        }
        let (p, q) = (x.as_nat().expect("uint").clone(), y.as_nat().expect("uint").clone());
        let guarded = self.it.guards.contains(&site);
        let event = |kind| ExecEvent { site, kind };
        let over = |op| EventKind::OverflowWouldOccur { op, lhs: p.clone(), rhs: q.clone() };
        Ok(match op {
            BinOp::Add | BinOp::Mul => {
                let r = if op == BinOp::Add { &p + &q } else { &p * &q };
                if r > *MAX_INT {
                    self.events.push(event(over(op)));
                    if guarded {
                        return Err(Abort { site, cause: AbortCause::RuntimeOverflowCheck });
                    }
                }
                Value::Nat(r)
            }
            BinOp::Sub => {
                if p < q {
                    self.events.push(event(over(op)));
                    let cause = if guarded { AbortCause::RuntimeOverflowCheck } else { AbortCause::Stuck };
                    return Err(Abort { site, cause });
                }
                Value::Nat(p - q)
            }
            BinOp::Div => {
                if q.is_zero() {
                    self.events.push(event(EventKind::DivByZero));
                    let cause = if guarded { AbortCause::RuntimeOverflowCheck } else { AbortCause::Stuck };
                    return Err(Abort { site, cause });
                }
                Value::Nat(p / q)
            }
            BinOp::Eq => Value::Bool(p == q),
            BinOp::Ne => Value::Bool(p != q),
            BinOp::Ge => Value::Bool(p >= q),
            BinOp::Le => Value::Bool(p <= q),
            BinOp::Gt => Value::Bool(p > q),
            BinOp::Lt => Value::Bool(p < q),
            BinOp::And | BinOp::Or => unreachable!(),
        })
    }
}
