//! Concrete aggregation and evaluation of refinement terms over runtime values.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use super::value::{MapVal, Value};
use crate::ast::{BinOp, Ident, Term};
use crate::templates::AccessPath;
use crate::MAX_INT;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AggError {
    #[error("const_sum is undefined for path `{path}` on {value}")]
    Domain { path: String, value: String },
    #[error("cannot evaluate `{0}`")]
    Eval(String),
}

/// Concrete value of the Sum aggregation along access path `w`.
pub fn const_sum(w: &[Ident], v: &Value) -> Result<BigUint, AggError> {
    let domain = || AggError::Domain { path: w.join("."), value: v.to_string() };
    match v {
        Value::Nat(n) if w.is_empty() => Ok(n.clone()),
        Value::Map(m) => {
            if !const_sum(w, &m.default)?.is_zero() {
                return Err(domain());
            }
            m.entries.values().try_fold(BigUint::zero(), |acc, e| Ok(acc + const_sum(w, e)?))
        }
        Value::Struct(_, _) if !w.is_empty() => {
            let field = v.field(&w[0]).ok_or_else(domain)?;
            const_sum(&w[1..], field)
        }
        _ => Err(domain()),
    }
}

/// Result of evaluating a refinement term. Arithmetic is exact over rationals
/// so that terms like `a - b` with `a < b` keep their mathematical value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermVal {
    Num(BigRational),
    Data(Value),
}

impl TermVal {
    fn num(&self) -> Option<&BigRational> {
        match self {
            TermVal::Num(r) => Some(r),
            _ => None,
        }
    }

    fn from_value(v: Value) -> TermVal {
        match v {
            Value::Nat(n) => TermVal::Num(BigRational::from_integer(BigInt::from(n))),
            other => TermVal::Data(other),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            TermVal::Data(Value::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    fn into_value(self) -> Option<Value> {
        match self {
            TermVal::Num(r) => {
                (r.is_integer() && !r.is_negative()).then(|| Value::Nat(r.to_integer().to_biguint().unwrap()))
            }
            TermVal::Data(v) => Some(v),
        }
    }
}

fn err(t: &Term) -> AggError {
    AggError::Eval(t.to_string())
}

/// Evaluates `t` with variables looked up in `env` and `v` bound to `nu`.
/// Aggregates are computed with [`const_sum`]. Terms that leave the naturals
/// inside a data structure, or hit an unknown predicate, are errors.
pub fn eval_term(
    t: &Term,
    env: &dyn Fn(&str) -> Option<Value>,
    nu: Option<&Value>,
) -> Result<TermVal, AggError> {
    let ev = |t: &Term| eval_term(t, env, nu);
    let val = |t: &Term| ev(t)?.into_value().ok_or_else(|| err(t));
    let nat = |t: &Term| match val(t)? {
        Value::Nat(n) => Ok(n),
        _ => Err(err(t)),
    };
    Ok(match t {
        Term::Nat(n) => TermVal::Num(BigRational::from_integer(BigInt::from(n.clone()))),
        Term::Rat(r) => TermVal::Num(r.clone()),
        Term::Bool(b) => TermVal::Data(Value::Bool(*b)),
        Term::Unit => TermVal::Data(Value::Unit),
        Term::MaxInt => TermVal::Num(BigRational::from_integer(BigInt::from(MAX_INT.clone()))),
        Term::Nu => TermVal::from_value(nu.ok_or_else(|| err(t))?.clone()),
        Term::Var(x) => TermVal::from_value(env(x).ok_or_else(|| err(t))?),
        Term::Hole | Term::Pred(..) => return Err(err(t)),
        Term::Bin(op, a, b) => {
            let (x, y) = (ev(a)?, ev(b)?);
            let bool_of = |v: &TermVal| v.as_bool().ok_or_else(|| err(t));
            let b = |v: bool| TermVal::Data(Value::Bool(v));
            match op {
                BinOp::And => b(bool_of(&x)? && bool_of(&y)?),
                BinOp::Or => b(bool_of(&x)? || bool_of(&y)?),
                BinOp::Eq => b(x == y),
                BinOp::Ne => b(x != y),
                _ => {
                    let (p, q) = (x.num().ok_or_else(|| err(t))?, y.num().ok_or_else(|| err(t))?);
                    match op {
                        BinOp::Add => TermVal::Num(p + q),
                        BinOp::Sub => TermVal::Num(p - q),
                        BinOp::Mul => TermVal::Num(p * q),
                        BinOp::Div => {
                            // integer division on naturals, as in the program semantics
                            if q.is_zero() || !p.is_integer() || !q.is_integer() {
                                return Err(err(t));
                            }
                            let d = p.to_integer().div_floor(&q.to_integer());
                            TermVal::Num(BigRational::from_integer(d))
                        }
                        BinOp::Ge => b(p >= q),
                        BinOp::Le => b(p <= q),
                        BinOp::Gt => b(p > q),
                        BinOp::Lt => b(p < q),
                        _ => unreachable!(),
                    }
                }
            }
        }
        Term::Not(a) => TermVal::Data(Value::Bool(!ev(a)?.as_bool().ok_or_else(|| err(t))?)),
        Term::Index(m, k) => match val(m)? {
            Value::Map(mv) => TermVal::from_value(mv.get(&nat(k)?).clone()),
            _ => return Err(err(t)),
        },
        Term::Field(s, x) => TermVal::from_value(val(s)?.field(x).ok_or_else(|| err(t))?.clone()),
        Term::Update(m, k, v) => match val(m)? {
            Value::Map(mut mv) => {
                mv.set(nat(k)?, val(v)?);
                TermVal::Data(Value::Map(mv))
            }
            _ => return Err(err(t)),
        },
        Term::FieldUpdate(s, x, v) => match val(s)? {
            Value::Struct(name, mut fs) => {
                let nv = val(v)?;
                let slot = fs.iter_mut().find(|(f, _)| f == x).ok_or_else(|| err(t))?;
                slot.1 = nv;
                TermVal::Data(Value::Struct(name, fs))
            }
            _ => return Err(err(t)),
        },
        Term::MapConst(..) | Term::StructConst(..) => return Err(err(t)),
        Term::Sum(inner) => {
            let (path, base) = sum_chain(inner).ok_or_else(|| err(t))?;
            let n = const_sum(&path, &val(base)?)?;
            TermVal::Num(BigRational::from_integer(BigInt::from(n)))
        }
        Term::Fld(..) | Term::Flatten(_) => return Err(err(t)),
    })
}

/// Splits the argument of a `sum` into its access path and the underlying
/// term: `fld(b, flatten(x))` gives (`[b]`, `x`), `x[.a]` gives (`[a]`, `x`).
pub fn sum_chain(t: &Term) -> Option<(AccessPath, &Term)> {
    let mut path = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Fld(x, inner) | Term::Field(inner, x) => {
                path.push(x.clone());
                cur = inner;
            }
            Term::Flatten(inner) => cur = inner,
            _ => break,
        }
    }
    path.reverse();
    Some((path, cur))
}

/// Builds a map value from (key, value) pairs over the given default.
pub fn map_of(default: Value, entries: impl IntoIterator<Item = (u64, Value)>) -> Value {
    let mut m = MapVal { default: Box::new(default), entries: Default::default() };
    for (k, v) in entries {
        m.set(BigUint::from(k), v);
    }
    Value::Map(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(fields: &[(&str, Value)]) -> Value {
        Value::Struct("S".into(), fields.iter().map(|(x, v)| (x.to_string(), v.clone())).collect())
    }

    fn zero_s() -> Value {
        s(&[("x_a", Value::nat(0)), ("x_b", Value::nat(0))])
    }

    #[test]
    fn struct_entries() {
        let v = map_of(zero_s(), (1..=10).map(|i| (i, s(&[("x_a", Value::nat(i)), ("x_b", Value::nat(1))]))));
        assert_eq!(const_sum(&["x_a".into()], &v).unwrap(), BigUint::from(55u32));
        assert_eq!(const_sum(&["x_b".into()], &v).unwrap(), BigUint::from(10u32));
    }

    #[test]
    fn nested_maps() {
        let zero_a = s(&[("a", map_of(Value::nat(0), []))]);
        let a = |es: Vec<(u64, u64)>| s(&[("a", map_of(Value::nat(0), es.into_iter().map(|(k, v)| (k, Value::nat(v)))))]);
        let sub = a(vec![(4, 6), (10, 3)]);
        let usrs = map_of(zero_a, [(1, a(vec![(5, 11)])), (2, sub.clone())]);
        assert_eq!(const_sum(&["a".into()], &usrs).unwrap(), BigUint::from(20u32));
        assert_eq!(const_sum(&["a".into()], &sub).unwrap(), BigUint::from(9u32));
    }

    #[test]
    fn empty_and_errors() {
        assert_eq!(const_sum(&[], &map_of(Value::nat(0), [])).unwrap(), BigUint::zero());
        assert!(const_sum(&["a".into()], &Value::nat(3)).is_err());
        assert!(const_sum(&[], &Value::Bool(true)).is_err());
    }

    #[test]
    fn evaluates_sum_annotations() {
        let bals = map_of(Value::nat(0), [(1, Value::nat(3)), (2, Value::nat(4))]);
        let q = crate::parser::parse_term("sum(v) <= tot && v[2] == 4").unwrap();
        let env = |x: &str| (x == "tot").then(|| Value::nat(7));
        assert_eq!(eval_term(&q, &env, Some(&bals)).unwrap().as_bool(), Some(true));
        let env = |x: &str| (x == "tot").then(|| Value::nat(6));
        assert_eq!(eval_term(&q, &env, Some(&bals)).unwrap().as_bool(), Some(false));
    }

    #[test]
    fn chains() {
        let t = crate::parser::parse_term("fld(bal, flatten(x))").unwrap();
        let (p, b) = sum_chain(&t).unwrap();
        assert_eq!(p, vec!["bal".to_string()]);
        assert_eq!(b, &Term::var("x"));
    }
}
