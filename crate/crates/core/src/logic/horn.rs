//! Horn clauses over unknown predicates and their preparation for a CHC
//! solver.
//!
//! CHC engines handle arrays and uninterpreted functions poorly, so by default
//! clauses are made array-free: array definitions are inlined, reads over
//! writes are resolved, and remaining aggregate/select/division applications
//! are replaced by fresh reals constrained only by congruence.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::encode::{max_int_literal, Decls, EncodeError, Encoder, MAX_INT_SYM};
use super::formula::{symbol, Formula as F, Sort};
use crate::typecheck::Obligation;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HornError {
    #[error("clause is not in Horn form: {0}")]
    NonHornShape(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornClause {
    pub vars: BTreeMap<String, Sort>,
    pub body: Vec<F>,
    /// A predicate application, `false`, or (before preparation) any formula.
    pub head: F,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HornSystem {
    pub preds: BTreeMap<String, Vec<Sort>>,
    pub clauses: Vec<HornClause>,
}

impl HornSystem {
    pub fn to_script(&self) -> String {
        let mut s = String::from("(set-logic HORN)\n");
        s += &format!("(define-fun {MAX_INT_SYM} () Real {})\n", max_int_literal());
        for (p, sorts) in &self.preds {
            let sorts: Vec<String> = sorts.iter().map(|x| x.to_string()).collect();
            s += &format!("(declare-fun {} ({}) Bool)\n", symbol(p), sorts.join(" "));
        }
        for c in &self.clauses {
            let body = F::and(c.body.iter().cloned());
            let imp = format!("(=> {body} {})", c.head);
            if c.vars.is_empty() {
                s += &format!("(assert {imp})\n");
            } else {
                let vs: Vec<String> = c.vars.iter().map(|(x, t)| format!("({} {t})", symbol(x))).collect();
                s += &format!("(assert (forall ({}) {imp}))\n", vs.join(" "));
            }
        }
        s += "(check-sat)\n(get-model)\n";
        s
    }
}

/// Builds the clause `context ⟹ consequent` for an obligation. The encoder
/// must have been set up with the unknown predicates.
pub fn obligation_clause(enc: &mut Encoder, ob: &Obligation, with_prior: bool) -> Result<HornClause, HornError> {
    enc.decls = Decls::default();
    let body = enc.context(&ob.ctx, with_prior)?;
    let head = enc.formula(&ob.consequent)?;
    let mut vars = enc.decls.vars.clone();
    vars.remove(MAX_INT_SYM);
    let clause = HornClause { vars, body, head };
    let funs = enc.decls.funs.clone();
    let is_pred = |n: &str| !funs.contains_key(n);
    for b in &clause.body {
        if !is_top_pred(b, &is_pred) && has_pred(b, &is_pred) {
            return Err(HornError::NonHornShape(b.to_string()));
        }
    }
    if !is_top_pred(&clause.head, &is_pred) && has_pred(&clause.head, &is_pred) {
        return Err(HornError::NonHornShape(clause.head.to_string()));
    }
    Ok(clause)
}

fn is_top_pred(f: &F, is_pred: &dyn Fn(&str) -> bool) -> bool {
    matches!(f, F::App(n, _) if is_pred(n))
}

fn has_pred(f: &F, is_pred: &dyn Fn(&str) -> bool) -> bool {
    f.any(&|g| matches!(g, F::App(n, _) if is_pred(n)))
}

/// Sort of a formula given variable and function signatures.
pub fn sort_of(f: &F, vars: &BTreeMap<String, Sort>, funs: &BTreeMap<String, (Vec<Sort>, Sort)>) -> Sort {
    match f {
        F::Num(_) | F::Add(..) | F::Sub(..) | F::Mul(..) => Sort::Real,
        F::Bool(_) | F::Cmp(..) | F::And(_) | F::Or(_) | F::Not(_) | F::Implies(..) => Sort::Bool,
        F::Var(x) => vars.get(x).cloned().unwrap_or(Sort::Real),
        F::Ite(_, a, _) => sort_of(a, vars, funs),
        F::Select(a, _) => match sort_of(a, vars, funs) {
            Sort::Array(e) => *e,
            s => s,
        },
        F::Store(a, _, _) => sort_of(a, vars, funs),
        F::Const(s, _) => s.clone(),
        F::App(n, _) => funs.get(n).map(|(_, r)| r.clone()).unwrap_or(Sort::Bool),
    }
}

/// Turns an encoded clause into the shape CHC solvers accept: predicate
/// arguments are variables, the head is a predicate or `false`, and (unless
/// `keep_arrays`) no array or uninterpreted-function terms remain.
pub fn prepare(clause: HornClause, funs: &BTreeMap<String, (Vec<Sort>, Sort)>, keep_arrays: bool) -> HornClause {
    let HornClause { mut vars, body, mut head } = clause;
    let is_uf = |n: &str| funs.contains_key(n);
    let mut body = match F::and(body) {
        F::And(xs) => xs,
        F::Bool(true) => vec![],
        b => vec![b],
    };

    if !keep_arrays {
        inline_array_defs(&mut vars, &mut body, &mut head);
        body = body.iter().map(|b| normalize(b, &vars, funs)).collect();
        head = normalize(&head, &vars, funs);
    }

    // abstract uninterpreted applications (and array reads)
    let mut ab = Abstractor { vars: &mut vars, funs, keep_arrays, memo: Vec::new() };
    body = body.iter().map(|b| ab.rewrite(b)).collect();
    head = ab.rewrite(&head);
    let memo = std::mem::take(&mut ab.memo);
    for (i, (_, gi, si, hi)) in memo.iter().enumerate() {
        for (_, gj, sj, hj) in &memo[i + 1..] {
            if si == sj {
                let same = F::and(hi.iter().zip(hj).map(|(a, b)| F::eq(a.clone(), b.clone())));
                body.push(F::implies(same, F::eq(F::var(gi), F::var(gj))));
            }
        }
    }

    if !keep_arrays {
        let arrayish = |f: &F, vars: &BTreeMap<String, Sort>| {
            f.any(&|g| match g {
                F::Var(x) => vars.get(x).is_some_and(|s| s.is_array()),
                F::Store(..) | F::Const(..) => true,
                _ => false,
            })
        };
        body.retain(|b| !arrayish(b, &vars));
        if arrayish(&head, &vars) {
            head = F::Bool(false);
        }
    }

    // predicate arguments must be variables
    let mut fresh = 0;
    let mut extra = Vec::new();
    let mut flatten_args = |f: F, vars: &mut BTreeMap<String, Sort>, extra: &mut Vec<F>| -> F {
        match f {
            F::App(n, args) if !is_uf(&n) => {
                let args = args
                    .into_iter()
                    .map(|a| match a {
                        F::Var(_) => a,
                        a => {
                            let x = format!("h!{fresh}");
                            fresh += 1;
                            vars.insert(x.clone(), sort_of(&a, vars, funs));
                            extra.push(F::eq(F::var(&x), a));
                            F::var(x)
                        }
                    })
                    .collect();
                F::App(n, args)
            }
            f => f,
        }
    };
    body = body.into_iter().map(|b| flatten_args(b, &mut vars, &mut extra)).collect();
    head = flatten_args(head, &mut vars, &mut extra);
    body.extend(extra);

    if !matches!(&head, F::App(n, _) if !is_uf(n)) && head != F::Bool(false) {
        body.push(F::not(head));
        head = F::Bool(false);
    }

    let mut used = BTreeSet::new();
    for b in &body {
        b.vars(&mut used);
    }
    head.vars(&mut used);
    let vars = vars.into_iter().filter(|(x, _)| used.contains(x) && x != MAX_INT_SYM).collect();
    HornClause { vars, body, head }
}

fn inline_array_defs(vars: &mut BTreeMap<String, Sort>, body: &mut Vec<F>, head: &mut F) {
    loop {
        let def = body.iter().enumerate().find_map(|(i, b)| match b {
            F::Cmp(super::formula::Cmp::Eq, l, r) => match (&**l, &**r) {
                (F::Var(x), t) | (t, F::Var(x))
                    if vars.get(x).is_some_and(|s| s.is_array()) && !t.mentions(x) =>
                {
                    Some((i, x.clone(), t.clone()))
                }
                _ => None,
            },
            _ => None,
        });
        let Some((i, x, t)) = def else { break };
        body.remove(i);
        let map = BTreeMap::from([(x.clone(), t)]);
        for b in body.iter_mut() {
            *b = b.subst(&map);
        }
        *head = head.subst(&map);
        vars.remove(&x);
    }
}

/// Read-over-write and if-lifting for array terms.
fn normalize(f: &F, vars: &BTreeMap<String, Sort>, funs: &BTreeMap<String, (Vec<Sort>, Sort)>) -> F {
    f.map_bottom_up(&mut |n| simplify_node(n, vars, funs))
}

fn simplify_node(n: F, vars: &BTreeMap<String, Sort>, funs: &BTreeMap<String, (Vec<Sort>, Sort)>) -> F {
    match n {
        F::Select(a, j) => match *a {
            F::Store(a, i, v) => {
                let rest = simplify_node(F::Select(a, j.clone()), vars, funs);
                F::ite(F::eq(*i, *j), *v, rest)
            }
            F::Const(_, c) => *c,
            F::Ite(c, a, b) => F::ite(
                *c,
                simplify_node(F::Select(a, j.clone()), vars, funs),
                simplify_node(F::Select(b, j), vars, funs),
            ),
            a => F::Select(Box::new(a), j),
        },
        F::App(name, args) if funs.contains_key(&name) => {
            // lift conditionals over array arguments out of the application
            let pos = args.iter().position(|a| matches!(a, F::Ite(..)) && sort_of(a, vars, funs).is_array());
            match pos {
                Some(p) => {
                    let F::Ite(c, x, y) = args[p].clone() else { unreachable!() };
                    let mut ax = args.clone();
                    ax[p] = *x;
                    let mut ay = args;
                    ay[p] = *y;
                    F::ite(
                        *c,
                        simplify_node(F::App(name.clone(), ax), vars, funs),
                        simplify_node(F::App(name, ay), vars, funs),
                    )
                }
                None => F::App(name, args),
            }
        }
        n => n,
    }
}

struct Abstractor<'a> {
    vars: &'a mut BTreeMap<String, Sort>,
    funs: &'a BTreeMap<String, (Vec<Sort>, Sort)>,
    keep_arrays: bool,
    /// (term, variable, skeleton, scalar holes)
    memo: Vec<(F, String, F, Vec<F>)>,
}

impl Abstractor<'_> {
    fn rewrite(&mut self, f: &F) -> F {
        f.map_bottom_up(&mut |n| self.abstract_node(n))
    }

    fn abstract_node(&mut self, n: F) -> F {
        let target = match &n {
            F::App(name, _) => self.funs.contains_key(name),
            F::Select(..) => !self.keep_arrays && !sort_of(&n, self.vars, self.funs).is_array(),
            _ => false,
        };
        if !target {
            return n;
        }
        if let Some((_, g, _, _)) = self.memo.iter().find(|(t, ..)| *t == n) {
            return F::var(g);
        }
        let sort = sort_of(&n, self.vars, self.funs);
        let g = format!("g!{}", self.memo.len());
        self.vars.insert(g.clone(), sort);
        let mut holes = Vec::new();
        let skel = self.skeleton(&n, true, &mut holes);
        self.memo.push((n, g.clone(), skel, holes));
        F::var(g)
    }

    /// Replaces maximal scalar subterms below the root with a placeholder.
    fn skeleton(&self, f: &F, root: bool, holes: &mut Vec<F>) -> F {
        if !root && !sort_of(f, self.vars, self.funs).is_array() {
            holes.push(f.clone());
            return F::var("□");
        }
        match f {
            F::Select(a, i) => F::select(self.skeleton(a, false, holes), self.skeleton(i, false, holes)),
            F::Store(a, i, v) => F::store(
                self.skeleton(a, false, holes),
                self.skeleton(i, false, holes),
                self.skeleton(v, false, holes),
            ),
            F::Ite(c, a, b) => F::ite(
                self.skeleton(c, false, holes),
                self.skeleton(a, false, holes),
                self.skeleton(b, false, holes),
            ),
            F::Const(s, c) => F::Const(s.clone(), Box::new(self.skeleton(c, false, holes))),
            F::App(n, args) => F::App(n.clone(), args.iter().map(|a| self.skeleton(a, false, holes)).collect()),
            f => f.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funs() -> BTreeMap<String, (Vec<Sort>, Sort)> {
        BTreeMap::from([("sum__eps__map_uint".to_string(), (vec![Sort::array(Sort::Real)], Sort::Real))])
    }

    fn sum(a: F) -> F {
        F::App("sum__eps__map_uint".into(), vec![a])
    }

    #[test]
    fn eliminates_arrays() {
        let vars = BTreeMap::from([
            ("b1".to_string(), Sort::array(Sort::Real)),
            ("b2".to_string(), Sort::array(Sort::Real)),
            ("k".to_string(), Sort::Real),
            ("t".to_string(), Sort::Real),
        ]);
        let upd = F::store(F::var("b1"), F::var("k"), F::add(F::select(F::var("b1"), F::var("k")), F::num(1)));
        let clause = HornClause {
            vars,
            body: vec![
                F::App("I".into(), vec![sum(F::var("b1")), F::var("t")]),
                F::eq(F::var("b2"), upd),
                F::le(F::select(F::var("b2"), F::var("k")), sum(F::var("b2"))),
            ],
            head: F::App("I".into(), vec![sum(F::var("b2")), F::add(F::var("t"), F::num(1))]),
        };
        let c = prepare(clause, &funs(), false);
        let text = HornSystem { preds: BTreeMap::from([("I".into(), vec![Sort::Real, Sort::Real])]), clauses: vec![c] }
            .to_script();
        assert!(!text.contains("Array"), "{text}");
        assert!(!text.contains("select"), "{text}");
        assert!(text.contains("(I g!0 t)"), "{text}");
        assert!(text.contains("(I g!"), "{text}");
    }

    #[test]
    fn non_pred_head_moves_to_body() {
        let clause = HornClause {
            vars: BTreeMap::from([("x".to_string(), Sort::Real)]),
            body: vec![F::App("I".into(), vec![F::var("x")])],
            head: F::le(F::var("x"), F::num(3)),
        };
        let c = prepare(clause, &BTreeMap::new(), false);
        assert_eq!(c.head, F::Bool(false));
        assert_eq!(c.body[1].to_string(), "(not (<= x 3.0))");
    }

    #[test]
    fn congruence_between_reads() {
        let vars = BTreeMap::from([
            ("m".to_string(), Sort::array(Sort::Real)),
            ("i".to_string(), Sort::Real),
            ("j".to_string(), Sort::Real),
        ]);
        let clause = HornClause {
            vars,
            body: vec![F::eq(F::var("i"), F::var("j"))],
            head: F::eq(F::select(F::var("m"), F::var("i")), F::select(F::var("m"), F::var("j"))),
        };
        let c = prepare(clause, &BTreeMap::new(), false);
        let body: Vec<String> = c.body.iter().map(|b| b.to_string()).collect();
        assert!(body.contains(&"(=> (= i j) (= g!0 g!1))".to_string()), "{body:?}");
    }
}
