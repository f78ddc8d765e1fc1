//! Sorted quantifier-free formulas and their SMT-LIB 2 rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Map keys are always reals, so arrays only record their element sort.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Real,
    Bool,
    Array(Box<Sort>),
}

impl Sort {
    pub fn array(of: Sort) -> Sort {
        Sort::Array(Box::new(of))
    }

    pub fn is_array(&self) -> bool {
        matches!(self, Sort::Array(_))
    }

    /// Number of array layers above the element sort.
    pub fn depth(&self) -> usize {
        match self {
            Sort::Array(s) => 1 + s.depth(),
            _ => 0,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Real => write!(f, "Real"),
            Sort::Bool => write!(f, "Bool"),
            Sort::Array(s) => write!(f, "(Array Real {s})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Eq,
    Le,
    Lt,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Num(BigRational),
    Bool(bool),
    Var(String),
    Add(Box<Formula>, Box<Formula>),
    Sub(Box<Formula>, Box<Formula>),
    Mul(Box<Formula>, Box<Formula>),
    Cmp(Cmp, Box<Formula>, Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Ite(Box<Formula>, Box<Formula>, Box<Formula>),
    Select(Box<Formula>, Box<Formula>),
    Store(Box<Formula>, Box<Formula>, Box<Formula>),
    /// Constant array of the given array sort.
    Const(Sort, Box<Formula>),
    /// Application of an uninterpreted function or unknown predicate.
    App(String, Vec<Formula>),
}

use Formula as F;

impl Formula {
    pub fn num(n: impl Into<BigInt>) -> F {
        F::Num(BigRational::from_integer(n.into()))
    }

    pub fn var(x: impl Into<String>) -> F {
        F::Var(x.into())
    }

    pub fn add(a: F, b: F) -> F {
        F::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: F, b: F) -> F {
        F::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: F, b: F) -> F {
        F::Mul(Box::new(a), Box::new(b))
    }

    pub fn cmp(c: Cmp, a: F, b: F) -> F {
        F::Cmp(c, Box::new(a), Box::new(b))
    }

    pub fn eq(a: F, b: F) -> F {
        F::cmp(Cmp::Eq, a, b)
    }

    pub fn le(a: F, b: F) -> F {
        F::cmp(Cmp::Le, a, b)
    }

    pub fn lt(a: F, b: F) -> F {
        F::cmp(Cmp::Lt, a, b)
    }

    pub fn not(a: F) -> F {
        match a {
            F::Bool(b) => F::Bool(!b),
            F::Not(x) => *x,
            a => F::Not(Box::new(a)),
        }
    }

    pub fn implies(a: F, b: F) -> F {
        match (&a, &b) {
            (F::Bool(true), _) => b,
            (_, F::Bool(true)) => F::Bool(true),
            _ => F::Implies(Box::new(a), Box::new(b)),
        }
    }

    pub fn ite(c: F, a: F, b: F) -> F {
        F::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn select(a: F, i: F) -> F {
        F::Select(Box::new(a), Box::new(i))
    }

    pub fn store(a: F, i: F, v: F) -> F {
        F::Store(Box::new(a), Box::new(i), Box::new(v))
    }

    /// Flattening conjunction that drops `true` and collapses on `false`.
    pub fn and(parts: impl IntoIterator<Item = F>) -> F {
        let mut out = Vec::new();
        for p in parts {
            match p {
                F::Bool(true) => {}
                F::Bool(false) => return F::Bool(false),
                F::And(xs) => out.extend(xs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => F::Bool(true),
            1 => out.pop().unwrap(),
            _ => F::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = F>) -> F {
        let mut out = Vec::new();
        for p in parts {
            match p {
                F::Bool(false) => {}
                F::Bool(true) => return F::Bool(true),
                F::Or(xs) => out.extend(xs),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => F::Bool(false),
            1 => out.pop().unwrap(),
            _ => F::Or(out),
        }
    }

    pub fn children(&self) -> Vec<&F> {
        match self {
            F::Num(_) | F::Bool(_) | F::Var(_) => vec![],
            F::Add(a, b) | F::Sub(a, b) | F::Mul(a, b) | F::Cmp(_, a, b) | F::Implies(a, b) | F::Select(a, b) => {
                vec![a, b]
            }
            F::And(xs) | F::Or(xs) | F::App(_, xs) => xs.iter().collect(),
            F::Not(a) | F::Const(_, a) => vec![a],
            F::Ite(a, b, c) | F::Store(a, b, c) => vec![a, b, c],
        }
    }

    /// Rebuilds the formula bottom-up, letting `f` rewrite each node after
    /// its children have been rebuilt.
    pub fn map_bottom_up(&self, f: &mut dyn FnMut(F) -> F) -> F {
        let r = |x: &F, f: &mut dyn FnMut(F) -> F| Box::new(x.map_bottom_up(f));
        let node = match self {
            F::Num(_) | F::Bool(_) | F::Var(_) => self.clone(),
            F::Add(a, b) => F::Add(r(a, f), r(b, f)),
            F::Sub(a, b) => F::Sub(r(a, f), r(b, f)),
            F::Mul(a, b) => F::Mul(r(a, f), r(b, f)),
            F::Cmp(c, a, b) => F::Cmp(*c, r(a, f), r(b, f)),
            F::And(xs) => F::And(xs.iter().map(|x| x.map_bottom_up(f)).collect()),
            F::Or(xs) => F::Or(xs.iter().map(|x| x.map_bottom_up(f)).collect()),
            F::App(n, xs) => F::App(n.clone(), xs.iter().map(|x| x.map_bottom_up(f)).collect()),
            F::Not(a) => F::Not(r(a, f)),
            F::Implies(a, b) => F::Implies(r(a, f), r(b, f)),
            F::Ite(a, b, c) => F::Ite(r(a, f), r(b, f), r(c, f)),
            F::Select(a, b) => F::Select(r(a, f), r(b, f)),
            F::Store(a, b, c) => F::Store(r(a, f), r(b, f), r(c, f)),
            F::Const(s, a) => F::Const(s.clone(), r(a, f)),
        };
        f(node)
    }

    pub fn subst(&self, map: &BTreeMap<String, F>) -> F {
        self.map_bottom_up(&mut |n| match &n {
            F::Var(x) => map.get(x).cloned().unwrap_or(n),
            _ => n,
        })
    }

    pub fn any(&self, p: &dyn Fn(&F) -> bool) -> bool {
        p(self) || self.children().into_iter().any(|c| c.any(p))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        if let F::Var(x) = self {
            out.insert(x.clone());
        }
        for c in self.children() {
            c.vars(out);
        }
    }

    pub fn mentions(&self, x: &str) -> bool {
        self.any(&|f| matches!(f, F::Var(y) if y == x))
    }
}

fn symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

/// Renders an identifier as an SMT-LIB symbol, quoting when needed.
pub fn symbol(s: &str) -> String {
    if !s.is_empty() && s.chars().all(symbol_char) && !s.starts_with(|c: char| c.is_ascii_digit()) {
        s.to_string()
    } else {
        format!("|{s}|")
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.is_negative() {
        write!(f, "(- ")?;
        write_num(f, &-r.clone())?;
        return write!(f, ")");
    }
    if r.denom().is_one() {
        write!(f, "{}.0", r.numer())
    } else {
        write!(f, "(/ {}.0 {}.0)", r.numer(), r.denom())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, xs: &[&F]| -> fmt::Result {
            write!(f, "({head}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        };
        match self {
            F::Num(r) => write_num(f, r),
            F::Bool(b) => write!(f, "{b}"),
            F::Var(x) => write!(f, "{}", symbol(x)),
            F::Add(a, b) => list(f, "+", &[a, b]),
            F::Sub(a, b) => list(f, "-", &[a, b]),
            F::Mul(a, b) => list(f, "*", &[a, b]),
            F::Cmp(c, a, b) => list(f, c.symbol(), &[a, b]),
            F::And(xs) if xs.is_empty() => write!(f, "true"),
            F::Or(xs) if xs.is_empty() => write!(f, "false"),
            F::And(xs) => list(f, "and", &xs.iter().collect::<Vec<_>>()),
            F::Or(xs) => list(f, "or", &xs.iter().collect::<Vec<_>>()),
            F::Not(a) => list(f, "not", &[a]),
            F::Implies(a, b) => list(f, "=>", &[a, b]),
            F::Ite(a, b, c) => list(f, "ite", &[a, b, c]),
            F::Select(a, b) => list(f, "select", &[a, b]),
            F::Store(a, b, c) => list(f, "store", &[a, b, c]),
            F::Const(s, a) => write!(f, "((as const {s}) {a})"),
            F::App(n, xs) if xs.is_empty() => write!(f, "{}", symbol(n)),
            F::App(n, xs) => list(f, &symbol(n), &xs.iter().collect::<Vec<_>>()),
        }
    }
}

/// Zero element of a sort: 0, false, or the constant array of zeros.
pub fn zero_of(s: &Sort) -> F {
    match s {
        Sort::Real => F::Num(BigRational::zero()),
        Sort::Bool => F::Bool(false),
        Sort::Array(inner) => F::Const(s.clone(), Box::new(zero_of(inner))),
    }
}
