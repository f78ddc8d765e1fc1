//! Static well-formedness: scoping, SSA, sorts, fetch/commit coverage and struct
//! acyclicity.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::sorts::{check_type, sort_of, FnEnv};

/// Code used for ill-sorted or ill-scoped refinement annotations.
pub const ANNOTATION: &str = "annotation";

pub fn validate(c: &Contract) -> Vec<Diagnostic> {
    let mut v = Validator { c, structs: c.struct_table(), diags: Vec::new(), binders: BTreeMap::new() };
    v.contract();
    v.diags
}

pub fn annotation_sort_errors(c: &Contract) -> Vec<Diagnostic> {
    validate(c).into_iter().filter(|d| d.code == ANNOTATION).collect()
}

#[derive(Clone, Default)]
struct Scope {
    vars: Vec<(Ident, BaseType)>,
}

impl Scope {
    fn get(&self, x: &str) -> Option<BaseType> {
        self.vars.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t.clone())
    }
    fn push(&mut self, x: &str, t: BaseType) {
        self.vars.push((x.to_string(), t));
    }
}

struct Validator<'a> {
    c: &'a Contract,
    structs: StructTable,
    diags: Vec<Diagnostic>,
    /// SSA binders of the current body.
    binders: BTreeMap<Ident, SourceLoc>,
}

impl<'a> Validator<'a> {
    fn err(&mut self, loc: SourceLoc, code: &'static str, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(loc, code, msg));
    }

    fn contract(&mut self) {
        self.structs_ok();
        let mut seen = BTreeSet::new();
        let svs: Vec<(Ident, BaseType)> =
            self.c.state_vars.iter().map(|s| (s.name.clone(), s.ty.base.clone())).collect();
        for sv in &self.c.state_vars {
            if !seen.insert(sv.name.clone()) {
                self.err(sv.loc, "duplicate", format!("state variable `{}` declared twice", sv.name));
            }
            self.type_ok(&sv.ty.base, sv.loc);
            let scope = Scope { vars: svs.clone() };
            self.annotation(&sv.ty, &scope, sv.loc);
        }
        if let Some(ctor) = &self.c.ctor {
            let scope = self.params(&ctor.params);
            self.block(&ctor.body, scope, false);
        }
        let mut fnames = BTreeSet::new();
        for f in &self.c.functions {
            if !fnames.insert(f.name.clone()) {
                self.err(f.loc, "duplicate", format!("function `{}` declared twice", f.name));
            }
            let scope = self.params(&f.params);
            self.type_ok(&f.ret.base, f.loc);
            self.annotation(&f.ret, &scope, f.loc);
            let scope = self.block(&f.body, scope, f.is_pure);
            if let Some(t) = self.expr(&f.ret_expr, &scope) {
                if t != f.ret.base {
                    self.err(
                        f.ret_expr.loc,
                        "sort",
                        format!("`{}` returns {}, declared {}", f.name, t, f.ret.base),
                    );
                }
            }
        }
    }

    fn structs_ok(&mut self) {
        let mut names = BTreeSet::new();
        for s in &self.c.structs {
            if !names.insert(s.name.clone()) {
                self.err(s.loc, "struct", format!("struct `{}` declared twice", s.name));
            }
            let mut fs = BTreeSet::new();
            for (f, t) in &s.fields {
                if !fs.insert(f.clone()) {
                    self.err(s.loc, "struct", format!("field `{f}` declared twice in `{}`", s.name));
                }
                self.type_ok(t, s.loc);
            }
        }
        // struct definitions must not refer to themselves, directly or through maps
        for s in &self.c.structs {
            let mut stack = vec![BaseType::Struct(s.name.clone())];
            let mut visited = BTreeSet::new();
            while let Some(t) = stack.pop() {
                match t {
                    BaseType::Map(inner) => stack.push(*inner),
                    BaseType::Struct(n) => {
                        if !visited.insert(n.clone()) {
                            continue;
                        }
                        for (_, ft) in self.structs.fields(&n).unwrap_or(&[]) {
                            if mentions_struct(ft, &s.name) {
                                self.err(s.loc, "struct", format!("struct `{}` is recursive", s.name));
                                return;
                            }
                            stack.push(ft.clone());
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    fn type_ok(&mut self, t: &BaseType, loc: SourceLoc) {
        if let Err(m) = check_type(t, &self.structs) {
            self.err(loc, "sort", m);
        }
    }

    fn params(&mut self, ps: &[Param]) -> Scope {
        self.binders.clear();
        self.binders.insert(SENDER.to_string(), SourceLoc::default());
        let mut scope = Scope::default();
        scope.push(SENDER, BaseType::UInt);
        for p in ps {
            self.type_ok(&p.ty.base, p.loc);
            self.annotation(&p.ty, &scope, p.loc);
            self.bind(&p.name, p.loc);
            scope.push(&p.name, p.ty.base.clone());
        }
        scope
    }

    fn bind(&mut self, x: &str, loc: SourceLoc) {
        if let Some(prev) = self.binders.get(x) {
            let msg = if *prev == SourceLoc::default() {
                format!("`{x}` is reserved")
            } else {
                format!("`{x}` is bound twice (first at {prev}, again at {loc})")
            };
            self.err(loc, "ssa", msg);
        } else {
            self.binders.insert(x.to_string(), loc);
        }
    }

    /// Sort-checks a refinement annotation in `scope` with `v` of the base type.
    fn annotation(&mut self, t: &RefType, scope: &Scope, loc: SourceLoc) {
        let Some(q) = &t.qual else { return };
        let env = FnEnv { vars: |x: &str| scope.get(x), nu: Some(t.base.clone()), hole: None };
        match sort_of(q, &env, &self.structs) {
            Ok(BaseType::Bool) => {}
            Ok(other) => self.err(loc, ANNOTATION, format!("refinement has sort {other}, expected bool")),
            Err(m) => self.err(loc, ANNOTATION, m),
        }
        if q.has_pred() {
            self.err(loc, ANNOTATION, "unknown predicates cannot be written in source");
        }
    }

    fn expr(&mut self, e: &Expr, scope: &Scope) -> Option<BaseType> {
        let mut havocs = Vec::new();
        let t = expr_as_term(e, &mut havocs);
        for (_, ht, loc) in &havocs {
            self.type_ok(ht, *loc);
        }
        let lookup = |x: &str| {
            havocs
                .iter()
                .find(|(n, _, _)| n == x)
                .map(|(_, t, _)| t.clone())
                .or_else(|| scope.get(x))
        };
        let env = FnEnv { vars: lookup, nu: None, hole: None };
        match sort_of(&t, &env, &self.structs) {
            Ok(s) => Some(s),
            Err(m) => {
                let code = if m.starts_with("unbound") { "scope" } else { "sort" };
                self.err(e.loc, code, m);
                None
            }
        }
    }

    fn expect_bool(&mut self, e: &Expr, scope: &Scope) {
        if let Some(t) = self.expr(e, scope) {
            if t != BaseType::Bool {
                self.err(e.loc, "sort", format!("condition has sort {t}, expected bool"));
            }
        }
    }

    fn block(&mut self, b: &Block, mut scope: Scope, pure: bool) -> Scope {
        for s in b {
            scope = self.stmt(s, scope, pure);
        }
        scope
    }

    fn state_list<'b>(&mut self, names: impl Iterator<Item = &'b Ident>, loc: SourceLoc, what: &'static str) {
        let names: Vec<&Ident> = names.collect();
        for sv in &self.c.state_vars {
            let n = names.iter().filter(|x| ***x == sv.name).count();
            if n != 1 {
                self.err(loc, what, format!("{what} must list state variable `{}` exactly once", sv.name));
            }
        }
        for x in names {
            if self.c.state_var(x).is_none() {
                self.err(loc, what, format!("`{x}` is not a state variable"));
            }
        }
    }

    fn stmt(&mut self, s: &Stmt, mut scope: Scope, pure: bool) -> Scope {
        match &s.kind {
            StmtKind::Let { var, ty, init } => {
                self.type_ok(&ty.base, s.loc);
                if let Some(t) = self.expr(init, &scope) {
                    if t != ty.base {
                        self.err(s.loc, "sort", format!("`{var}` declared {}, initializer has sort {t}", ty.base));
                    }
                }
                self.annotation(ty, &scope, s.loc);
                self.bind(var, s.loc);
                scope.push(var, ty.base.clone());
            }
            StmtKind::Skip => {}
            StmtKind::Assert(e) | StmtKind::Assume(e) => self.expect_bool(e, &scope),
            StmtKind::If { cond, then_branch, else_branch, join } => {
                self.expect_bool(cond, &scope);
                let st = self.block(then_branch, scope.clone(), pure);
                let se = self.block(else_branch, scope.clone(), pure);
                let mut phi_scope = scope.clone();
                for p in join {
                    phi_scope.push(&p.var, p.ty.base.clone());
                }
                for p in join {
                    self.type_ok(&p.ty.base, p.loc);
                    self.phi_arg(&p.left, &st, p);
                    self.phi_arg(&p.right, &se, p);
                    self.annotation(&p.ty, &phi_scope, p.loc);
                }
                for p in join {
                    self.bind(&p.var, p.loc);
                    scope.push(&p.var, p.ty.base.clone());
                }
            }
            StmtKind::While { join, cond, body } => {
                let mut inner = scope.clone();
                for p in join {
                    self.type_ok(&p.ty.base, p.loc);
                    self.phi_arg(&p.left, &scope, p);
                    inner.push(&p.var, p.ty.base.clone());
                }
                for p in join {
                    self.annotation(&p.ty, &inner, p.loc);
                    self.bind(&p.var, p.loc);
                }
                self.expect_bool(cond, &inner);
                let end = self.block(body, inner.clone(), pure);
                for p in join {
                    self.phi_arg(&p.right, &end, p);
                }
                scope = inner;
            }
            StmtKind::Fetch(pairs) => {
                if pure {
                    self.err(s.loc, "pure", "pure functions cannot fetch state");
                }
                self.state_list(pairs.iter().map(|(sv, _)| sv), s.loc, "fetch");
                for (sv, x) in pairs {
                    self.bind(x, s.loc);
                    if let Some(decl) = self.c.state_var(sv) {
                        scope.push(x, decl.ty.base.clone());
                    }
                }
            }
            StmtKind::Commit(pairs) => {
                if pure {
                    self.err(s.loc, "pure", "pure functions cannot commit state");
                }
                self.state_list(pairs.iter().map(|(_, sv)| sv), s.loc, "commit");
                for (e, sv) in pairs {
                    let t = self.expr(e, &scope);
                    if let (Some(t), Some(decl)) = (t, self.c.state_var(sv)) {
                        if t != decl.ty.base {
                            self.err(e.loc, "sort", format!("committing {t} to `{sv}` of sort {}", decl.ty.base));
                        }
                    }
                }
            }
            StmtKind::Call { var, ty, func, args } => {
                let arg_sorts: Vec<Option<BaseType>> = args.iter().map(|a| self.expr(a, &scope)).collect();
                match self.c.function(func) {
                    None => self.err(s.loc, "call", format!("unknown function `{func}`")),
                    Some(f) => {
                        if pure && !f.is_pure {
                            self.err(s.loc, "pure", format!("pure function calls impure `{func}`"));
                        }
                        if f.params.len() != args.len() {
                            self.err(
                                s.loc,
                                "call",
                                format!("`{func}` takes {} arguments, given {}", f.params.len(), args.len()),
                            );
                        } else {
                            for ((p, a), t) in f.params.iter().zip(args).zip(&arg_sorts) {
                                if let Some(t) = t {
                                    if *t != p.ty.base {
                                        self.err(a.loc, "sort", format!("argument `{}` expects {}, given {t}", p.name, p.ty.base));
                                    }
                                }
                            }
                        }
                        if f.ret.base != ty.base {
                            self.err(s.loc, "sort", format!("`{func}` returns {}, bound as {}", f.ret.base, ty.base));
                        }
                    }
                }
                self.annotation(ty, &scope, s.loc);
                self.bind(var, s.loc);
                scope.push(var, ty.base.clone());
            }
        }
        scope
    }

    fn phi_arg(&mut self, x: &str, scope: &Scope, p: &Phi) {
        match scope.get(x) {
            None => self.err(p.loc, "scope", format!("`{x}` is not in scope for phi `{}`", p.var)),
            Some(t) if t != p.ty.base => {
                self.err(p.loc, "sort", format!("phi `{}` of sort {} joins `{x}` of sort {t}", p.var, p.ty.base))
            }
            _ => {}
        }
    }
}

fn mentions_struct(t: &BaseType, name: &str) -> bool {
    match t {
        BaseType::Map(inner) => mentions_struct(inner, name),
        BaseType::Struct(n) => n == name,
        _ => false,
    }
}

/// Term view of an expression with each `havoc T` replaced by a placeholder variable.
fn expr_as_term(e: &Expr, havocs: &mut Vec<(Ident, BaseType, SourceLoc)>) -> Term {
    let mut b = |x: &Expr| Box::new(expr_as_term(x, havocs));
    match &e.kind {
        ExprKind::Havoc(t) => {
            let name = format!("havoc#{}", havocs.len());
            havocs.push((name.clone(), t.clone(), e.loc));
            Term::Var(name)
        }
        ExprKind::Nat(n) => Term::Nat(n.clone()),
        ExprKind::Bool(v) => Term::Bool(*v),
        ExprKind::Unit => Term::Unit,
        ExprKind::Var(x) => Term::Var(x.clone()),
        ExprKind::Bin(op, l, r) => Term::Bin(*op, b(l), b(r)),
        ExprKind::Not(a) => Term::Not(b(a)),
        ExprKind::Index(m, k) => Term::Index(b(m), b(k)),
        ExprKind::FieldIndex(s, x) => Term::Field(b(s), x.clone()),
        ExprKind::Update(m, k, v) => Term::Update(b(m), b(k), b(v)),
        ExprKind::FieldUpdate(s, x, v) => Term::FieldUpdate(b(s), x.clone(), b(v)),
        ExprKind::MapConst(t, es) => {
            Term::MapConst(t.clone(), es.iter().map(|(k, v)| (k.clone(), expr_as_term(v, havocs))).collect())
        }
        ExprKind::StructConst(s, fs) => {
            Term::StructConst(s.clone(), fs.iter().map(|(x, v)| (x.clone(), expr_as_term(v, havocs))).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_contract;

    fn diags(src: &str) -> Vec<Diagnostic> {
        validate(&parse_contract(src).expect("parses"))
    }

    #[test]
    fn ssa_violation_names_both_locations() {
        let src = "contract C {\n fun f() {\n  let x : uint = 1;\n  let x : uint = 2;\n }\n}";
        let d = diags(src);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "ssa");
        assert!(d[0].message.contains("3:3") && d[0].message.contains("4:3"), "{}", d[0].message);
    }

    #[test]
    fn ssa_spans_branches() {
        let src = "contract C { fun f() { if (true) { let y : uint = 1; } else { let y : uint = 2; } } }";
        assert_eq!(diags(src)[0].code, "ssa");
    }

    #[test]
    fn fetch_must_cover_all_state() {
        let src = "contract C { a : uint; b : uint; fun f() { fetch a as a1; commit a1 to a; } }";
        let d = diags(src);
        assert!(d.iter().any(|d| d.code == "fetch"));
        assert!(d.iter().any(|d| d.code == "commit"));
    }

    #[test]
    fn unbound_and_ill_sorted() {
        let d = diags("contract C { fun f() { let x : uint = y + true; } }");
        assert!(d.iter().any(|d| d.code == "scope"));
        let d = diags("contract C { fun f() { let x : bool = 1 + 2; } }");
        assert!(d.iter().any(|d| d.code == "sort"));
    }

    #[test]
    fn recursive_struct_rejected() {
        let d = diags("contract C { struct S { m : map(S); } }");
        assert!(d.iter().any(|d| d.code == "struct"));
    }

    #[test]
    fn programmatic_ill_sorted_annotation() {
        let mut c = parse_contract("contract C { owner : uint; }").unwrap();
        c.state_vars[0].ty.qual = Some(crate::parser::parse_term("sum(v) <= 1").unwrap());
        let d = validate(&c);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, ANNOTATION);
        assert!(d[0].message.contains("sum"));
    }

    #[test]
    fn phi_arguments_come_from_their_branch() {
        let src = "contract C { fun f() { if (true) { let a : uint = 1; } else { let b : uint = 2; } join { c : uint = phi(b, a) } } }";
        assert_eq!(diags(src).iter().filter(|d| d.code == "scope").count(), 2);
    }
}
