//! Translation of refinement terms and typing contexts into formulas.
//!
//! A value of base type T is represented by one formula per scalar leaf of T:
//! structs are flattened per field path, maps become arrays over reals (one
//! per leaf path below the map), and uints are reals.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::formula::{zero_of, Formula as F, Sort};
use crate::ast::{BaseType, BinOp, Ident, StructTable, Term};
use crate::interp::sum_chain;
use crate::templates::{AccessPath, Templates};
use crate::typecheck::{bounds, Context, RType, UnknownPred};
use crate::MAX_INT;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("unknown predicate `{0}` cannot appear in a validity query")]
    UnknownPredicatePresent(String),
    #[error("cannot encode `{0}`")]
    Unsupported(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

pub const MAX_INT_SYM: &str = "MaxInt";
pub const IDIV: &str = "idiv";

/// Symbols a formula refers to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Decls {
    pub vars: BTreeMap<String, Sort>,
    pub funs: BTreeMap<String, (Vec<Sort>, Sort)>,
}

/// Scalar leaves of a base type with their encoded sorts, in field order.
pub fn leaf_layout(base: &BaseType, structs: &StructTable) -> Vec<(AccessPath, Sort)> {
    match base {
        BaseType::UInt => vec![(vec![], Sort::Real)],
        BaseType::Bool => vec![(vec![], Sort::Bool)],
        BaseType::Unit => vec![],
        BaseType::Map(t) => leaf_layout(t, structs).into_iter().map(|(p, s)| (p, Sort::array(s))).collect(),
        BaseType::Struct(name) => structs
            .fields(name)
            .unwrap_or_default()
            .iter()
            .flat_map(|(x, t)| {
                leaf_layout(t, structs).into_iter().map(move |(mut p, s)| {
                    p.insert(0, x.clone());
                    (p, s)
                })
            })
            .collect(),
    }
}

pub fn leaf_name(x: &str, path: &[Ident]) -> String {
    if path.is_empty() {
        x.to_string()
    } else {
        format!("{x}__{}", path.join("__"))
    }
}

/// Name of the uninterpreted Sum symbol for a path and map nesting depth.
pub fn sum_symbol(path: &[Ident], depth: usize) -> String {
    let p = if path.is_empty() { "eps".to_string() } else { path.join(".") };
    format!("sum__{p}__{}uint", "map_".repeat(depth))
}

/// One argument position of an unknown predicate after flattening a formal
/// of base type T: a uint or bool observation (a template over the formal),
/// or, when arrays are kept, a raw array leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    /// Term over `□` giving the slot's value, when one exists.
    pub template: Option<Term>,
    /// Index into the leaf layout for array slots.
    pub leaf: Option<usize>,
    pub sort: Sort,
}

pub fn pred_slots(base: &BaseType, templates: &Templates, arrays: bool) -> Vec<Slot> {
    let mut out: Vec<Slot> = templates
        .uint_templates(base)
        .into_iter()
        .map(|(h, _)| Slot { template: Some(h.term), leaf: None, sort: Sort::Real })
        .collect();
    for (i, (path, sort)) in leaf_layout(base, templates.structs()).into_iter().enumerate() {
        match &sort {
            Sort::Bool => {
                let t = path.iter().fold(Term::Hole, |acc, x| Term::field(acc, x));
                out.push(Slot { template: Some(t), leaf: None, sort });
            }
            Sort::Array(_) if arrays => {
                let template = match (path.as_slice(), sort.depth(), base) {
                    ([], 1, _) => Some(Term::Hole),
                    ([x], 1, BaseType::Map(_)) => Some(Term::Fld(x.clone(), Box::new(Term::Hole))),
                    _ => None,
                };
                out.push(Slot { template, leaf: Some(i), sort });
            }
            _ => {}
        }
    }
    out
}

struct Enc {
    base: BaseType,
    leaves: Vec<F>,
}

pub struct Encoder<'a> {
    templates: &'a Templates,
    sorts: BTreeMap<Ident, BaseType>,
    pub decls: Decls,
    preds: BTreeMap<Ident, (UnknownPred, Vec<Vec<Slot>>)>,
}

fn rat(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

impl<'a> Encoder<'a> {
    pub fn new(templates: &'a Templates) -> Self {
        Encoder { templates, sorts: BTreeMap::new(), decls: Decls::default(), preds: BTreeMap::new() }
    }

    /// Allows applications of these unknown predicates (Horn mode).
    pub fn with_preds(mut self, preds: &[UnknownPred], arrays: bool) -> Self {
        for p in preds {
            let slots = p.params.iter().map(|(_, t)| pred_slots(t, self.templates, arrays)).collect();
            self.preds.insert(p.name.clone(), (p.clone(), slots));
        }
        self
    }

    pub fn pred_signature(&self, name: &str) -> Option<Vec<Sort>> {
        self.preds.get(name).map(|(_, slots)| slots.iter().flatten().map(|s| s.sort.clone()).collect())
    }

    pub fn templates(&self) -> &Templates {
        self.templates
    }

    pub fn bind(&mut self, x: &str, base: &BaseType) {
        self.sorts.insert(x.to_string(), base.clone());
    }

    pub fn base_of(&self, x: &str) -> Option<&BaseType> {
        self.sorts.get(x)
    }

    fn declare_var(&mut self, name: String, sort: Sort) -> F {
        self.decls.vars.insert(name.clone(), sort);
        F::Var(name)
    }

    fn declare_fun(&mut self, name: &str, args: Vec<Sort>, ret: Sort) {
        self.decls.funs.insert(name.to_string(), (args, ret));
    }

    /// Encodes a boolean-valued term.
    pub fn formula(&mut self, t: &Term) -> Result<F, EncodeError> {
        let e = self.enc(t)?;
        match (e.base, e.leaves.len()) {
            (BaseType::Bool, 1) => Ok(e.leaves.into_iter().next().unwrap()),
            _ => Err(EncodeError::Unsupported(t.to_string())),
        }
    }

    /// Encodes a uint-valued term.
    pub fn scalar(&mut self, t: &Term) -> Result<F, EncodeError> {
        let e = self.enc(t)?;
        match (e.base, e.leaves.len()) {
            (BaseType::UInt, 1) => Ok(e.leaves.into_iter().next().unwrap()),
            _ => Err(EncodeError::Unsupported(t.to_string())),
        }
    }

    /// `bounds(t)` for a term of the given base type.
    pub fn type_bounds(&mut self, t: &Term, base: &BaseType) -> Result<F, EncodeError> {
        let b = bounds(t, base, self.templates);
        self.formula(&b)
    }

    /// Binding, guard, fact and (optionally) prior-safety conjuncts of a context.
    pub fn context(&mut self, ctx: &Context, with_prior: bool) -> Result<Vec<F>, EncodeError> {
        for b in &ctx.env {
            self.bind(&b.name, &b.ty.base);
        }
        let mut out = Vec::new();
        for b in &ctx.env {
            let x = Term::Var(b.name.clone());
            let q = b.ty.qual.subst_nu(&x);
            if !q.is_true() {
                out.push(self.formula(&q)?);
            }
            let bd = self.type_bounds(&x, &b.ty.base)?;
            if bd != F::Bool(true) {
                out.push(bd);
            }
        }
        for g in &ctx.guards {
            out.push(self.formula(g)?);
        }
        for f in &ctx.facts {
            out.push(self.formula(f)?);
        }
        if with_prior {
            for p in &ctx.prior {
                out.push(self.formula(p)?);
            }
        }
        Ok(out)
    }

    /// `ctx ∧ lhs[ν ↦ n] ⟹ rhs[ν ↦ n]` for a fresh value symbol n.
    pub fn subtyping(&mut self, ctx: &Context, lhs: &RType, rhs: &RType) -> Result<F, EncodeError> {
        let mut hyp = self.context(ctx, true)?;
        let nu = Term::Var("nu!".into());
        self.bind("nu!", &lhs.base);
        hyp.push(self.formula(&lhs.qual.subst_nu(&nu))?);
        hyp.push(self.type_bounds(&nu, &lhs.base)?);
        let goal = self.formula(&rhs.qual.subst_nu(&nu))?;
        Ok(F::implies(F::and(hyp), goal))
    }

    fn leaves_of_var(&mut self, x: &str) -> Result<Enc, EncodeError> {
        let base = self.sorts.get(x).cloned().ok_or_else(|| EncodeError::Unbound(x.to_string()))?;
        let layout = leaf_layout(&base, self.templates.structs());
        let leaves = layout.into_iter().map(|(p, s)| self.declare_var(leaf_name(x, &p), s)).collect();
        Ok(Enc { base, leaves })
    }

    fn field_range(&self, base: &BaseType, x: &str) -> Option<(usize, usize, BaseType)> {
        let BaseType::Struct(s) = base else { return None };
        let structs = self.templates.structs();
        let mut off = 0;
        for (f, t) in structs.fields(s)? {
            let n = leaf_layout(t, structs).len();
            if f == x {
                return Some((off, n, t.clone()));
            }
            off += n;
        }
        None
    }

    fn enc(&mut self, t: &Term) -> Result<Enc, EncodeError> {
        let unsupported = || EncodeError::Unsupported(t.to_string());
        let scalar = |base, f| Enc { base, leaves: vec![f] };
        Ok(match t {
            Term::Nat(n) => scalar(BaseType::UInt, F::Num(rat(BigInt::from(n.clone())))),
            Term::Rat(r) => scalar(BaseType::UInt, F::Num(r.clone())),
            Term::Bool(b) => scalar(BaseType::Bool, F::Bool(*b)),
            Term::Unit => Enc { base: BaseType::Unit, leaves: vec![] },
            Term::MaxInt => {
                let v = self.declare_var(MAX_INT_SYM.into(), Sort::Real);
                scalar(BaseType::UInt, v)
            }
            Term::Nu | Term::Hole => return Err(unsupported()),
            Term::Var(x) => self.leaves_of_var(x)?,
            Term::Bin(op, a, b) => {
                let (a, b) = (self.enc(a)?, self.enc(b)?);
                let one = |e: Enc| e.leaves.into_iter().next().ok_or_else(unsupported);
                match op {
                    BinOp::Eq | BinOp::Ne => {
                        if a.leaves.len() != b.leaves.len() {
                            return Err(unsupported());
                        }
                        let eq = F::and(a.leaves.into_iter().zip(b.leaves).map(|(x, y)| F::eq(x, y)));
                        scalar(BaseType::Bool, if *op == BinOp::Eq { eq } else { F::not(eq) })
                    }
                    BinOp::And => scalar(BaseType::Bool, F::and([one(a)?, one(b)?])),
                    BinOp::Or => scalar(BaseType::Bool, F::or([one(a)?, one(b)?])),
                    BinOp::Le => scalar(BaseType::Bool, F::le(one(a)?, one(b)?)),
                    // uint operands are integral, so a < b is a + 1 <= b
                    BinOp::Lt => scalar(BaseType::Bool, F::le(F::add(one(a)?, F::num(1)), one(b)?)),
                    BinOp::Ge => scalar(BaseType::Bool, F::le(one(b)?, one(a)?)),
                    BinOp::Gt => scalar(BaseType::Bool, F::le(F::add(one(b)?, F::num(1)), one(a)?)),
                    BinOp::Add => scalar(BaseType::UInt, F::add(one(a)?, one(b)?)),
                    BinOp::Sub => scalar(BaseType::UInt, F::sub(one(a)?, one(b)?)),
                    BinOp::Mul => scalar(BaseType::UInt, F::mul(one(a)?, one(b)?)),
                    BinOp::Div => {
                        self.declare_fun(IDIV, vec![Sort::Real, Sort::Real], Sort::Real);
                        scalar(BaseType::UInt, F::App(IDIV.into(), vec![one(a)?, one(b)?]))
                    }
                }
            }
            Term::Not(a) => {
                let a = self.formula(a)?;
                scalar(BaseType::Bool, F::not(a))
            }
            Term::Index(m, k) => {
                let m = self.enc(m)?;
                let k = self.scalar(k)?;
                let BaseType::Map(vt) = m.base else { return Err(unsupported()) };
                Enc { base: *vt, leaves: m.leaves.into_iter().map(|l| F::select(l, k.clone())).collect() }
            }
            Term::Field(s, x) => {
                let s = self.enc(s)?;
                let (off, n, ft) = self.field_range(&s.base, x).ok_or_else(unsupported)?;
                Enc { base: ft, leaves: s.leaves[off..off + n].to_vec() }
            }
            Term::Update(m, k, v) => {
                let m = self.enc(m)?;
                let k = self.scalar(k)?;
                let v = self.enc(v)?;
                if m.leaves.len() != v.leaves.len() {
                    return Err(unsupported());
                }
                let leaves = m.leaves.into_iter().zip(v.leaves).map(|(l, x)| F::store(l, k.clone(), x)).collect();
                Enc { base: m.base, leaves }
            }
            Term::FieldUpdate(s, x, v) => {
                let mut s = self.enc(s)?;
                let v = self.enc(v)?;
                let (off, n, _) = self.field_range(&s.base, x).ok_or_else(unsupported)?;
                s.leaves.splice(off..off + n, v.leaves);
                s
            }
            Term::MapConst(vt, entries) => {
                let base = BaseType::map(vt.clone());
                let layout = leaf_layout(&base, self.templates.structs());
                let mut leaves: Vec<F> = layout.iter().map(|(_, s)| zero_of(s)).collect();
                for (k, v) in entries {
                    let v = self.enc(v)?;
                    let k = F::Num(rat(BigInt::from(k.clone())));
                    leaves = leaves.into_iter().zip(v.leaves).map(|(l, x)| F::store(l, k.clone(), x)).collect();
                }
                Enc { base, leaves }
            }
            Term::StructConst(name, fields) => {
                let decl = self.templates.structs().fields(name).ok_or_else(unsupported)?.to_vec();
                let mut leaves = Vec::new();
                for (x, _) in decl {
                    let (_, v) = fields.iter().find(|(f, _)| *f == x).ok_or_else(unsupported)?;
                    leaves.extend(self.enc(v)?.leaves);
                }
                Enc { base: BaseType::Struct(name.clone()), leaves }
            }
            Term::Sum(inner) => {
                let (path, base) = sum_chain(inner).ok_or_else(unsupported)?;
                let e = self.enc(base)?;
                let layout = leaf_layout(&e.base, self.templates.structs());
                let i = layout.iter().position(|(p, _)| *p == path).ok_or_else(unsupported)?;
                let sort = layout[i].1.clone();
                if sort.depth() == 0 || !matches!(self.element(&sort), Sort::Real) {
                    return Err(unsupported());
                }
                let name = sum_symbol(&path, sort.depth());
                self.declare_fun(&name, vec![sort], Sort::Real);
                scalar(BaseType::UInt, F::App(name, vec![e.leaves[i].clone()]))
            }
            Term::Fld(x, inner) => {
                let e = self.enc(inner)?;
                let BaseType::Map(vt) = &e.base else { return Err(unsupported()) };
                let (off, n, ft) = self.field_range(vt, x).ok_or_else(unsupported)?;
                Enc { base: BaseType::map(ft), leaves: e.leaves[off..off + n].to_vec() }
            }
            Term::Flatten(_) => return Err(unsupported()),
            Term::Pred(name, args) => {
                let (_, slots) = self
                    .preds
                    .get(name)
                    .cloned()
                    .ok_or_else(|| EncodeError::UnknownPredicatePresent(name.clone()))?;
                let mut fargs = Vec::new();
                for (a, slots) in args.iter().zip(&slots) {
                    let whole = if slots.iter().any(|s| s.template.is_none() || s.sort.is_array()) {
                        Some(self.enc(a)?.leaves)
                    } else {
                        None
                    };
                    for s in slots {
                        match (&s.leaf, &s.template) {
                            (Some(i), _) => fargs.push(whole.as_ref().unwrap()[*i].clone()),
                            (None, Some(h)) => {
                                let v = h.subst_hole(a);
                                fargs.push(if s.sort == Sort::Bool { self.formula(&v)? } else { self.scalar(&v)? });
                            }
                            (None, None) => return Err(unsupported()),
                        }
                    }
                }
                scalar(BaseType::Bool, F::App(name.clone(), fargs))
            }
        })
    }

    fn element<'s>(&self, s: &'s Sort) -> &'s Sort {
        match s {
            Sort::Array(inner) => self.element(inner),
            s => s,
        }
    }
}

/// SMT-LIB decimal literal of MaxInt.
pub fn max_int_literal() -> F {
    F::Num(rat(BigInt::from(MAX_INT.clone())))
}

/// Validity script: satisfiability of the negation. `unsat` means valid.
pub fn to_validity_script(decls: &Decls, f: &F) -> Result<String, EncodeError> {
    if let Some(p) = find_app(f, &|n| !decls.funs.contains_key(n)) {
        return Err(EncodeError::UnknownPredicatePresent(p));
    }
    let mut s = String::from("(set-logic QF_AUFNRA)\n");
    for (x, sort) in &decls.vars {
        s += &format!("(declare-fun {} () {sort})\n", super::formula::symbol(x));
    }
    for (name, (args, ret)) in &decls.funs {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        s += &format!("(declare-fun {} ({}) {ret})\n", super::formula::symbol(name), args.join(" "));
    }
    if decls.vars.contains_key(MAX_INT_SYM) {
        s += &format!("(assert (= {MAX_INT_SYM} {}))\n", max_int_literal());
    }
    s += &format!("(assert (not {f}))\n(check-sat)\n");
    Ok(s)
}

fn find_app(f: &F, bad: &dyn Fn(&str) -> bool) -> Option<String> {
    if let F::App(n, _) = f {
        if bad(n) {
            return Some(n.clone());
        }
    }
    f.children().into_iter().find_map(|c| find_app(c, bad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;
    use crate::typecheck::Binding;

    fn templates() -> Templates {
        let structs = StructTable::from_fields([(
            "User".to_string(),
            vec![("bal".to_string(), BaseType::UInt), ("frozen".to_string(), BaseType::Bool)],
        )]);
        Templates::new(structs, true)
    }

    #[test]
    fn layouts() {
        let t = templates();
        let u = BaseType::map(BaseType::map(BaseType::Struct("User".into())));
        let l = leaf_layout(&u, t.structs());
        assert_eq!(l.len(), 2);
        assert_eq!(l[0].0, vec!["bal".to_string()]);
        assert_eq!(l[0].1, Sort::array(Sort::array(Sort::Real)));
        assert_eq!(l[1].1, Sort::array(Sort::array(Sort::Bool)));
    }

    #[test]
    fn bounds_of_types() {
        let t = templates();
        let mut e = Encoder::new(&t);
        e.bind("x", &BaseType::UInt);
        e.bind("b", &BaseType::Bool);
        e.bind("m", &BaseType::map(BaseType::UInt));
        let x = e.type_bounds(&Term::var("x"), &BaseType::UInt).unwrap();
        assert_eq!(x.to_string(), "(and (<= 0.0 x) (<= x MaxInt))");
        assert_eq!(e.type_bounds(&Term::var("b"), &BaseType::Bool).unwrap(), F::Bool(true));
        let m = e.type_bounds(&Term::var("m"), &BaseType::map(BaseType::UInt)).unwrap();
        assert_eq!(m.to_string(), "(<= 0.0 (sum__eps__map_uint m))");
    }

    #[test]
    fn nested_sum_and_struct_update() {
        let t = templates();
        let mut e = Encoder::new(&t);
        e.bind("usrs", &BaseType::map(BaseType::map(BaseType::Struct("User".into()))));
        e.bind("u", &BaseType::Struct("User".into()));
        let f = e.formula(&parse_term("sum(fld(bal, flatten(usrs))) <= 3").unwrap()).unwrap();
        assert_eq!(f.to_string(), "(<= (sum__bal__map_map_uint usrs__bal) 3.0)");
        let f = e.formula(&parse_term("u[.bal <- 4] == u").unwrap()).unwrap();
        assert_eq!(f.to_string(), "(and (= 4.0 u__bal) (= u__frozen u__frozen))");
    }

    #[test]
    fn environment_example() {
        // a = b + c, guard c >= d
        let t = templates();
        let uint = |q: &str| RType { base: BaseType::UInt, qual: parse_term(q).unwrap() };
        let ctx = Context {
            env: vec![
                Binding { name: "b".into(), ty: uint("true") },
                Binding { name: "c".into(), ty: uint("true") },
                Binding { name: "d".into(), ty: uint("true") },
                Binding { name: "a".into(), ty: uint("v == b + c") },
            ],
            guards: vec![parse_term("c >= d").unwrap()],
            ..Default::default()
        };
        let mut e = Encoder::new(&t);
        let parts = e.context(&ctx, true).unwrap();
        let text: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
        assert!(text.contains(&"(= a (+ b c))".to_string()));
        assert!(text.contains(&"(<= d c)".to_string()));
        let script = to_validity_script(&e.decls, &F::and(parts)).unwrap();
        assert!(script.starts_with("(set-logic QF_AUFNRA)\n(declare-fun MaxInt () Real)\n"));
    }

    #[test]
    fn preds_rejected_in_validity() {
        let mut d = Decls::default();
        d.vars.insert("x".into(), Sort::Real);
        let f = F::App("I_1".into(), vec![F::var("x")]);
        assert_eq!(to_validity_script(&d, &f), Err(EncodeError::UnknownPredicatePresent("I_1".into())));
    }
}
