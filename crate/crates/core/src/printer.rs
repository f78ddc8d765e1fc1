//! Surface-syntax printing. `parse_contract(print_contract(c))` reproduces `c`
//! up to source locations.

use std::fmt::{self, Write};

use crate::ast::*;

const ATOM: u8 = 10;

fn paren(s: String, need: bool) -> String {
    if need {
        format!("({s})")
    } else {
        s
    }
}

fn var_name(x: &str) -> &str {
    if x == SENDER {
        "msg.sender"
    } else {
        x
    }
}

/// Returns the printed term and its binding strength.
fn term(t: &Term) -> (String, u8) {
    let post = |a: &Term| {
        let (s, p) = term(a);
        paren(s, p < ATOM)
    };
    let full = |a: &Term| term(a).0;
    match t {
        Term::Nat(n) => (n.to_string(), ATOM),
        Term::Rat(r) => {
            if r.is_integer() && *r.numer() >= 0.into() {
                (r.numer().to_string(), ATOM)
            } else if *r.numer() < 0.into() {
                (format!("0 - {}", term(&Term::Rat(-r.clone())).0), BinOp::Sub.precedence())
            } else {
                (format!("{} / {}", r.numer(), r.denom()), BinOp::Div.precedence())
            }
        }
        Term::Bool(b) => (b.to_string(), ATOM),
        Term::Unit => ("()".into(), ATOM),
        Term::Nu => ("v".into(), ATOM),
        Term::MaxInt => ("maxint".into(), ATOM),
        Term::Hole => ("□".into(), ATOM),
        Term::Var(x) => (var_name(x).into(), ATOM),
        Term::Bin(op, a, b) => {
            let p = op.precedence();
            let (sa, pa) = term(a);
            let (sb, pb) = term(b);
            (format!("{} {} {}", paren(sa, pa < p), op.symbol(), paren(sb, pb <= p)), p)
        }
        Term::Not(a) => (format!("!{}", post(a)), ATOM - 1),
        Term::Index(m, k) => (format!("{}[{}]", post(m), full(k)), ATOM),
        Term::Field(s, x) => (format!("{}[.{x}]", post(s)), ATOM),
        Term::Update(m, k, v) => (format!("{}[{} <- {}]", post(m), full(k), full(v)), ATOM),
        Term::FieldUpdate(s, x, v) => (format!("{}[.{x} <- {}]", post(s), full(v)), ATOM),
        Term::MapConst(ty, es) => {
            let body: Vec<String> = es.iter().map(|(k, v)| format!("{k} -> {}", full(v))).collect();
            (format!("map({ty}){{{}}}", body.join(", ")), ATOM)
        }
        Term::StructConst(s, fs) => {
            let body: Vec<String> = fs.iter().map(|(x, v)| format!("{x}: {}", full(v))).collect();
            (format!("{s}{{{}}}", body.join(", ")), ATOM)
        }
        Term::Sum(a) => (format!("sum({})", full(a)), ATOM),
        Term::Fld(x, a) => (format!("fld({x}, {})", full(a)), ATOM),
        Term::Flatten(a) => (format!("flatten({})", full(a)), ATOM),
        Term::Pred(p, args) => {
            let args: Vec<String> = args.iter().map(full).collect();
            (format!("{p}({})", args.join(", ")), ATOM)
        }
    }
}

pub fn print_term(t: &Term) -> String {
    term(t).0
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

fn expr(e: &Expr) -> (String, u8) {
    let post = |a: &Expr| {
        let (s, p) = expr(a);
        paren(s, p < ATOM)
    };
    let full = |a: &Expr| expr(a).0;
    match &e.kind {
        ExprKind::Nat(n) => (n.to_string(), ATOM),
        ExprKind::Bool(b) => (b.to_string(), ATOM),
        ExprKind::Unit => ("()".into(), ATOM),
        ExprKind::Var(x) => (var_name(x).into(), ATOM),
        ExprKind::Bin(op, a, b) => {
            let p = op.precedence();
            let (sa, pa) = expr(a);
            let (sb, pb) = expr(b);
            (format!("{} {} {}", paren(sa, pa < p), op.symbol(), paren(sb, pb <= p)), p)
        }
        ExprKind::Not(a) => (format!("!{}", post(a)), ATOM - 1),
        ExprKind::Index(m, k) => (format!("{}[{}]", post(m), full(k)), ATOM),
        ExprKind::FieldIndex(s, x) => (format!("{}[.{x}]", post(s)), ATOM),
        ExprKind::Update(m, k, v) => (format!("{}[{} <- {}]", post(m), full(k), full(v)), ATOM),
        ExprKind::FieldUpdate(s, x, v) => (format!("{}[.{x} <- {}]", post(s), full(v)), ATOM),
        ExprKind::MapConst(ty, es) => {
            let body: Vec<String> = es.iter().map(|(k, v)| format!("{k} -> {}", full(v))).collect();
            (format!("map({ty}){{{}}}", body.join(", ")), ATOM)
        }
        ExprKind::StructConst(s, fs) => {
            let body: Vec<String> = fs.iter().map(|(x, v)| format!("{x}: {}", full(v))).collect();
            (format!("{s}{{{}}}", body.join(", ")), ATOM)
        }
        // havoc binds like a prefix operator; parenthesize under postfix forms
        ExprKind::Havoc(t) => (format!("havoc {t}"), ATOM - 1),
    }
}

pub fn print_expr(e: &Expr) -> String {
    expr(e).0
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

pub fn print_ref_type(t: &RefType) -> String {
    match &t.qual {
        None => t.base.to_string(),
        Some(q) => format!("{} sat {{ {} }}", t.base, print_term(q)),
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{} : {}", p.name, print_ref_type(&p.ty)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn phis(ps: &[Phi]) -> String {
    ps.iter()
        .map(|p| format!("{} : {} = phi({}, {})", p.var, print_ref_type(&p.ty), p.left, p.right))
        .collect::<Vec<_>>()
        .join(", ")
}

fn block(out: &mut String, b: &Block, depth: usize) {
    for s in b {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match &s.kind {
        StmtKind::Let { var, ty, init } => {
            let _ = writeln!(out, "{pad}let {var} : {} = {};", print_ref_type(ty), print_expr(init));
        }
        StmtKind::Skip => {
            let _ = writeln!(out, "{pad}skip;");
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "{pad}assert({});", print_expr(e));
        }
        StmtKind::Assume(e) => {
            let _ = writeln!(out, "{pad}require({});", print_expr(e));
        }
        StmtKind::If { cond, then_branch, else_branch, join } => {
            let _ = writeln!(out, "{pad}if ({}) {{", print_expr(cond));
            block(out, then_branch, depth + 1);
            let _ = writeln!(out, "{pad}}} else {{");
            block(out, else_branch, depth + 1);
            if join.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} join {{ {} }}", phis(join));
            }
        }
        StmtKind::While { join, cond, body } => {
            let _ = writeln!(out, "{pad}while join {{ {} }} ({}) {{", phis(join), print_expr(cond));
            block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Fetch(ps) => {
            let list: Vec<String> = ps.iter().map(|(sv, x)| format!("{sv} as {x}")).collect();
            let _ = writeln!(out, "{pad}fetch {};", list.join(", "));
        }
        StmtKind::Commit(ps) => {
            let list: Vec<String> = ps.iter().map(|(e, sv)| format!("{} to {sv}", print_expr(e))).collect();
            let _ = writeln!(out, "{pad}commit {};", list.join(", "));
        }
        StmtKind::Call { var, ty, func, args } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            let _ = writeln!(out, "{pad}call {var} : {} = {func}({});", print_ref_type(ty), args.join(", "));
        }
    }
}

pub fn print_contract(c: &Contract) -> String {
    let mut out = format!("contract {} {{\n", c.name);
    for s in &c.structs {
        let _ = writeln!(out, "  struct {} {{", s.name);
        for (f, t) in &s.fields {
            let _ = writeln!(out, "    {f} : {t};");
        }
        let _ = writeln!(out, "  }}");
    }
    for sv in &c.state_vars {
        let _ = writeln!(out, "  {} : {};", sv.name, print_ref_type(&sv.ty));
    }
    if let Some(ctor) = &c.ctor {
        let _ = writeln!(out, "\n  constructor({}) {{", params(&ctor.params));
        block(&mut out, &ctor.body, 2);
        let _ = writeln!(out, "  }}");
    }
    for f in &c.functions {
        let pure = if f.is_pure { "pure " } else { "" };
        let _ = writeln!(
            out,
            "\n  {pure}fun {}({}) -> {} {{",
            f.name,
            params(&f.params),
            print_ref_type(&f.ret)
        );
        block(&mut out, &f.body, 2);
        let _ = writeln!(out, "    return {};", print_expr(&f.ret_expr));
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}
