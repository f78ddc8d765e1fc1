//! Syntax trees for MiniSol contracts and refinement terms.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;

pub type Ident = String;

/// Name of the implicit sender parameter every function and constructor receives.
pub const SENDER: &str = "msg_sender";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLoc {
    pub line: u32,
    pub col: u32,
}

impl SourceLoc {
    pub fn new(line: u32, col: u32) -> Self {
        SourceLoc { line, col }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseType {
    UInt,
    Bool,
    Unit,
    Map(Box<BaseType>),
    Struct(Ident),
}

impl BaseType {
    pub fn map(of: BaseType) -> BaseType {
        BaseType::Map(Box::new(of))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, BaseType::UInt | BaseType::Bool | BaseType::Unit)
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseType::UInt => write!(f, "uint"),
            BaseType::Bool => write!(f, "bool"),
            BaseType::Unit => write!(f, "unit"),
            BaseType::Map(t) => write!(f, "map({t})"),
            BaseType::Struct(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Ge => ">=",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    pub fn is_order(self) -> bool {
        matches!(self, BinOp::Ge | BinOp::Le | BinOp::Gt | BinOp::Lt)
    }

    pub fn is_logic(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// Binding strength used by the parser and printer; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Ge | BinOp::Le | BinOp::Gt | BinOp::Lt => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }
}

/// Refinement-language terms. `Nu` is the bound value variable (written `v`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Nat(BigUint),
    /// Rational constant; only produced when reading back solver models.
    Rat(BigRational),
    Bool(bool),
    Unit,
    Nu,
    MaxInt,
    Hole,
    Var(Ident),
    Bin(BinOp, Box<Term>, Box<Term>),
    Not(Box<Term>),
    Index(Box<Term>, Box<Term>),
    Field(Box<Term>, Ident),
    Update(Box<Term>, Box<Term>, Box<Term>),
    FieldUpdate(Box<Term>, Ident, Box<Term>),
    MapConst(BaseType, Vec<(BigUint, Term)>),
    StructConst(Ident, Vec<(Ident, Term)>),
    Sum(Box<Term>),
    Fld(Ident, Box<Term>),
    Flatten(Box<Term>),
    /// Application of an unknown refinement predicate.
    Pred(Ident, Vec<Term>),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn nat(n: u64) -> Term {
        Term::Nat(BigUint::from(n))
    }

    pub fn bin(op: BinOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Mul, a, b)
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Eq, a, b)
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Le, a, b)
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Lt, a, b)
    }

    pub fn not(a: Term) -> Term {
        match a {
            Term::Bool(b) => Term::Bool(!b),
            other => Term::Not(Box::new(other)),
        }
    }

    pub fn index(m: Term, k: Term) -> Term {
        Term::Index(Box::new(m), Box::new(k))
    }

    pub fn field(s: Term, x: &str) -> Term {
        Term::Field(Box::new(s), x.to_string())
    }

    pub fn sum(t: Term) -> Term {
        Term::Sum(Box::new(t))
    }

    /// `a ==> b`, written as `!a || b` since the surface language has no implication.
    pub fn implies(a: Term, b: Term) -> Term {
        Term::bin(BinOp::Or, Term::not(a), b)
    }

    /// Right-nested conjunction dropping literal `true`s.
    pub fn and_all(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut parts: Vec<Term> = parts.into_iter().filter(|t| !t.is_true()).collect();
        match parts.len() {
            0 => Term::Bool(true),
            _ => {
                let mut acc = parts.pop().unwrap();
                while let Some(t) = parts.pop() {
                    acc = Term::bin(BinOp::And, t, acc);
                }
                acc
            }
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Bool(true))
    }

    /// Top-level conjuncts of a term.
    pub fn conjuncts(&self) -> Vec<&Term> {
        match self {
            Term::Bin(BinOp::And, a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Term::Bool(true) => vec![],
            t => vec![t],
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Nat(_)
            | Term::Rat(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Nu
            | Term::MaxInt
            | Term::Hole
            | Term::Var(_) => vec![],
            Term::Bin(_, a, b) | Term::Index(a, b) | Term::FieldUpdate(a, _, b) => vec![a, b],
            Term::Not(a) | Term::Field(a, _) | Term::Sum(a) | Term::Fld(_, a) | Term::Flatten(a) => {
                vec![a]
            }
            Term::Update(a, b, c) => vec![a, b, c],
            Term::MapConst(_, es) => es.iter().map(|(_, t)| t).collect(),
            Term::StructConst(_, fs) => fs.iter().map(|(_, t)| t).collect(),
            Term::Pred(_, args) => args.iter().collect(),
        }
    }

    /// Rebuilds the term bottom-up, replacing any node for which `f` returns `Some`.
    /// Replacements are not revisited.
    pub fn replace(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        let mut r = |t: &Term| Box::new(t.replace(f));
        match self {
            Term::Nat(_)
            | Term::Rat(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Nu
            | Term::MaxInt
            | Term::Hole
            | Term::Var(_) => self.clone(),
            Term::Bin(op, a, b) => Term::Bin(*op, r(a), r(b)),
            Term::Not(a) => Term::Not(r(a)),
            Term::Index(a, b) => Term::Index(r(a), r(b)),
            Term::Field(a, x) => Term::Field(r(a), x.clone()),
            Term::Update(a, b, c) => Term::Update(r(a), r(b), r(c)),
            Term::FieldUpdate(a, x, b) => Term::FieldUpdate(r(a), x.clone(), r(b)),
            Term::MapConst(t, es) => Term::MapConst(
                t.clone(),
                es.iter().map(|(k, v)| (k.clone(), v.replace(f))).collect(),
            ),
            Term::StructConst(s, fs) => Term::StructConst(
                s.clone(),
                fs.iter().map(|(x, v)| (x.clone(), v.replace(f))).collect(),
            ),
            Term::Sum(a) => Term::Sum(r(a)),
            Term::Fld(x, a) => Term::Fld(x.clone(), r(a)),
            Term::Flatten(a) => Term::Flatten(r(a)),
            Term::Pred(p, args) => Term::Pred(p.clone(), args.iter().map(|a| a.replace(f)).collect()),
        }
    }

    pub fn subst_nu(&self, with: &Term) -> Term {
        self.replace(&mut |t| matches!(t, Term::Nu).then(|| with.clone()))
    }

    pub fn subst_hole(&self, with: &Term) -> Term {
        self.replace(&mut |t| matches!(t, Term::Hole).then(|| with.clone()))
    }

    /// Simultaneous substitution of variables.
    pub fn subst_vars(&self, map: &BTreeMap<Ident, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        self.replace(&mut |t| match t {
            Term::Var(x) => map.get(x).cloned(),
            _ => None,
        })
    }

    pub fn any(&self, pred: &dyn Fn(&Term) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn mentions_nu(&self) -> bool {
        self.any(&|t| matches!(t, Term::Nu))
    }

    pub fn has_pred(&self) -> bool {
        self.any(&|t| matches!(t, Term::Pred(..)))
    }

    pub fn free_vars(&self) -> Vec<Ident> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Ident>) {
        if let Term::Var(x) = self {
            if !out.contains(x) {
                out.push(x.clone());
            }
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    pub fn one() -> Term {
        Term::Nat(BigUint::one())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Nat(BigUint),
    Bool(bool),
    Unit,
    Var(Ident),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Map constant; entries kept in ascending key order.
    MapConst(BaseType, Vec<(BigUint, Expr)>),
    StructConst(Ident, Vec<(Ident, Expr)>),
    Index(Box<Expr>, Box<Expr>),
    FieldIndex(Box<Expr>, Ident),
    Update(Box<Expr>, Box<Expr>, Box<Expr>),
    FieldUpdate(Box<Expr>, Ident, Box<Expr>),
    Havoc(BaseType),
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SourceLoc) -> Expr {
        Expr { kind, loc }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Nat(_)
            | ExprKind::Bool(_)
            | ExprKind::Unit
            | ExprKind::Var(_)
            | ExprKind::Havoc(_) => vec![],
            ExprKind::Bin(_, a, b) | ExprKind::Index(a, b) | ExprKind::FieldUpdate(a, _, b) => {
                vec![a, b]
            }
            ExprKind::Not(a) | ExprKind::FieldIndex(a, _) => vec![a],
            ExprKind::Update(a, b, c) => vec![a, b, c],
            ExprKind::MapConst(_, es) => es.iter().map(|(_, e)| e).collect(),
            ExprKind::StructConst(_, fs) => fs.iter().map(|(_, e)| e).collect(),
        }
    }

    /// Copy with every source location zeroed, for structural comparison.
    pub fn without_locs(&self) -> Expr {
        strip_expr(self)
    }

    /// Converts a havoc-free expression to the corresponding term.
    pub fn to_term(&self) -> Option<Term> {
        let b = |e: &Expr| e.to_term().map(Box::new);
        Some(match &self.kind {
            ExprKind::Nat(n) => Term::Nat(n.clone()),
            ExprKind::Bool(v) => Term::Bool(*v),
            ExprKind::Unit => Term::Unit,
            ExprKind::Var(x) => Term::Var(x.clone()),
            ExprKind::Bin(op, l, r) => Term::Bin(*op, b(l)?, b(r)?),
            ExprKind::Not(e) => Term::Not(b(e)?),
            ExprKind::MapConst(t, es) => Term::MapConst(
                t.clone(),
                es.iter()
                    .map(|(k, e)| e.to_term().map(|v| (k.clone(), v)))
                    .collect::<Option<_>>()?,
            ),
            ExprKind::StructConst(s, fs) => Term::StructConst(
                s.clone(),
                fs.iter()
                    .map(|(x, e)| e.to_term().map(|v| (x.clone(), v)))
                    .collect::<Option<_>>()?,
            ),
            ExprKind::Index(m, k) => Term::Index(b(m)?, b(k)?),
            ExprKind::FieldIndex(s, x) => Term::Field(b(s)?, x.clone()),
            ExprKind::Update(m, k, v) => Term::Update(b(m)?, b(k)?, b(v)?),
            ExprKind::FieldUpdate(s, x, v) => Term::FieldUpdate(b(s)?, x.clone(), b(v)?),
            ExprKind::Havoc(_) => return None,
        })
    }

    /// Visits every arithmetic operation in evaluation order (operands first).
    pub fn arith_sites(&self, out: &mut Vec<(SourceLoc, BinOp)>) {
        for c in self.children() {
            c.arith_sites(out);
        }
        if let ExprKind::Bin(op, _, _) = &self.kind {
            if op.is_arith() {
                out.push((self.loc, *op));
            }
        }
    }
}

/// A base type with an optional refinement. `None` means unannotated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefType {
    pub base: BaseType,
    pub qual: Option<Term>,
}

impl RefType {
    pub fn plain(base: BaseType) -> RefType {
        RefType { base, qual: None }
    }

    pub fn refined(base: BaseType, qual: Term) -> RefType {
        RefType { base, qual: Some(qual) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phi {
    pub var: Ident,
    pub ty: RefType,
    pub left: Ident,
    pub right: Ident,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: SourceLoc,
}

pub type Block = Vec<Stmt>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Let { var: Ident, ty: RefType, init: Expr },
    Skip,
    Assert(Expr),
    /// `require(e)`.
    Assume(Expr),
    If { cond: Expr, then_branch: Block, else_branch: Block, join: Vec<Phi> },
    While { join: Vec<Phi>, cond: Expr, body: Block },
    /// Pairs of (state variable, fresh local).
    Fetch(Vec<(Ident, Ident)>),
    /// Pairs of (value, state variable).
    Commit(Vec<(Expr, Ident)>),
    Call { var: Ident, ty: RefType, func: Ident, args: Vec<Expr> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: Ident,
    pub ty: RefType,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub ret: RefType,
    pub body: Block,
    pub ret_expr: Expr,
    pub is_pure: bool,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ctor {
    pub params: Vec<Param>,
    pub body: Block,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateVar {
    pub name: Ident,
    pub ty: RefType,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructDecl {
    pub name: Ident,
    pub fields: Vec<(Ident, BaseType)>,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    pub name: Ident,
    pub structs: Vec<StructDecl>,
    pub state_vars: Vec<StateVar>,
    pub ctor: Option<Ctor>,
    pub functions: Vec<FunDecl>,
}

impl Contract {
    pub fn struct_table(&self) -> StructTable {
        StructTable::new(&self.structs)
    }

    pub fn function(&self, name: &str) -> Option<&FunDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|s| s.name == name)
    }

    /// Copy with every source location zeroed, for structural comparison.
    pub fn without_locs(&self) -> Contract {
        let z = SourceLoc::default();
        let params = |ps: &[Param]| {
            ps.iter().map(|p| Param { loc: z, ..p.clone() }).collect::<Vec<_>>()
        };
        Contract {
            name: self.name.clone(),
            structs: self.structs.iter().map(|s| StructDecl { loc: z, ..s.clone() }).collect(),
            state_vars: self
                .state_vars
                .iter()
                .map(|s| StateVar { loc: z, ..s.clone() })
                .collect(),
            ctor: self.ctor.as_ref().map(|c| Ctor {
                params: params(&c.params),
                body: strip_block(&c.body),
                loc: z,
            }),
            functions: self
                .functions
                .iter()
                .map(|f| FunDecl {
                    name: f.name.clone(),
                    params: params(&f.params),
                    ret: f.ret.clone(),
                    body: strip_block(&f.body),
                    ret_expr: strip_expr(&f.ret_expr),
                    is_pure: f.is_pure,
                    loc: z,
                })
                .collect(),
        }
    }
}

fn strip_block(b: &Block) -> Block {
    b.iter().map(strip_stmt).collect()
}

fn strip_phis(ps: &[Phi]) -> Vec<Phi> {
    ps.iter().map(|p| Phi { loc: SourceLoc::default(), ..p.clone() }).collect()
}

fn strip_stmt(s: &Stmt) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Let { var, ty, init } => {
            StmtKind::Let { var: var.clone(), ty: ty.clone(), init: strip_expr(init) }
        }
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Assert(e) => StmtKind::Assert(strip_expr(e)),
        StmtKind::Assume(e) => StmtKind::Assume(strip_expr(e)),
        StmtKind::If { cond, then_branch, else_branch, join } => StmtKind::If {
            cond: strip_expr(cond),
            then_branch: strip_block(then_branch),
            else_branch: strip_block(else_branch),
            join: strip_phis(join),
        },
        StmtKind::While { join, cond, body } => StmtKind::While {
            join: strip_phis(join),
            cond: strip_expr(cond),
            body: strip_block(body),
        },
        StmtKind::Fetch(ps) => StmtKind::Fetch(ps.clone()),
        StmtKind::Commit(ps) => {
            StmtKind::Commit(ps.iter().map(|(e, x)| (strip_expr(e), x.clone())).collect())
        }
        StmtKind::Call { var, ty, func, args } => StmtKind::Call {
            var: var.clone(),
            ty: ty.clone(),
            func: func.clone(),
            args: args.iter().map(strip_expr).collect(),
        },
    };
    Stmt { kind, loc: SourceLoc::default() }
}

fn strip_expr(e: &Expr) -> Expr {
    let b = |e: &Expr| Box::new(strip_expr(e));
    let kind = match &e.kind {
        ExprKind::Bin(op, l, r) => ExprKind::Bin(*op, b(l), b(r)),
        ExprKind::Not(a) => ExprKind::Not(b(a)),
        ExprKind::MapConst(t, es) => {
            ExprKind::MapConst(t.clone(), es.iter().map(|(k, v)| (k.clone(), strip_expr(v))).collect())
        }
        ExprKind::StructConst(s, fs) => {
            ExprKind::StructConst(s.clone(), fs.iter().map(|(x, v)| (x.clone(), strip_expr(v))).collect())
        }
        ExprKind::Index(m, k) => ExprKind::Index(b(m), b(k)),
        ExprKind::FieldIndex(s, x) => ExprKind::FieldIndex(b(s), x.clone()),
        ExprKind::Update(m, k, v) => ExprKind::Update(b(m), b(k), b(v)),
        ExprKind::FieldUpdate(s, x, v) => ExprKind::FieldUpdate(b(s), x.clone(), b(v)),
        other => other.clone(),
    };
    Expr { kind, loc: SourceLoc::default() }
}

/// Struct declarations by name.
#[derive(Clone, Debug, Default)]
pub struct StructTable {
    structs: BTreeMap<Ident, Vec<(Ident, BaseType)>>,
}

impl StructTable {
    pub fn new(decls: &[StructDecl]) -> StructTable {
        StructTable {
            structs: decls.iter().map(|d| (d.name.clone(), d.fields.clone())).collect(),
        }
    }

    pub fn from_fields(entries: impl IntoIterator<Item = (Ident, Vec<(Ident, BaseType)>)>) -> Self {
        StructTable { structs: entries.into_iter().collect() }
    }

    pub fn fields(&self, name: &str) -> Option<&[(Ident, BaseType)]> {
        self.structs.get(name).map(|v| v.as_slice())
    }

    pub fn field_type(&self, name: &str, field: &str) -> Option<&BaseType> {
        self.fields(name)?.iter().find(|(f, _)| f == field).map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.structs.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &Ident> {
        self.structs.keys()
    }
}
