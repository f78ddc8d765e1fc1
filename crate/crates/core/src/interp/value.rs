use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;

use crate::ast::{BaseType, Ident, StructTable};

/// Runtime values. Maps are total: keys absent from `entries` hold `default`,
/// and `entries` never stores a value equal to `default`, so structural
/// equality is extensional equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Nat(BigUint),
    Bool(bool),
    Unit,
    Map(MapVal),
    Struct(Ident, Vec<(Ident, Value)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapVal {
    pub default: Box<Value>,
    pub entries: BTreeMap<BigUint, Value>,
}

impl MapVal {
    pub fn get(&self, k: &BigUint) -> &Value {
        self.entries.get(k).unwrap_or(&self.default)
    }

    pub fn set(&mut self, k: BigUint, v: Value) {
        if v == *self.default {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, v);
        }
    }
}

impl Value {
    pub fn nat(n: u64) -> Value {
        Value::Nat(BigUint::from(n))
    }

    pub fn as_nat(&self) -> Option<&BigUint> {
        match self {
            Value::Nat(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn field(&self, x: &str) -> Option<&Value> {
        match self {
            Value::Struct(_, fs) => fs.iter().find(|(f, _)| f == x).map(|(_, v)| v),
            _ => None,
        }
    }

    /// Sort of a value. Map sorts are read off their default, which is
    /// always the zero value of the element sort.
    pub fn sort(&self) -> BaseType {
        match self {
            Value::Nat(_) => BaseType::UInt,
            Value::Bool(_) => BaseType::Bool,
            Value::Unit => BaseType::Unit,
            Value::Map(m) => BaseType::map(m.default.sort()),
            Value::Struct(s, _) => BaseType::Struct(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nat(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => write!(f, "()"),
            Value::Map(m) => {
                write!(f, "map({}){{", m.default.sort())?;
                for (i, (k, v)) in m.entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k} -> {v}")?;
                }
                write!(f, "}}")
            }
            Value::Struct(s, fs) => {
                write!(f, "{s}{{")?;
                for (i, (x, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

pub fn zero_val(t: &BaseType, structs: &StructTable) -> Value {
    match t {
        BaseType::UInt => Value::nat(0),
        BaseType::Bool => Value::Bool(false),
        BaseType::Unit => Value::Unit,
        BaseType::Map(inner) => Value::Map(MapVal {
            default: Box::new(zero_val(inner, structs)),
            entries: BTreeMap::new(),
        }),
        BaseType::Struct(s) => Value::Struct(
            s.clone(),
            structs
                .fields(s)
                .unwrap_or(&[])
                .iter()
                .map(|(x, ft)| (x.clone(), zero_val(ft, structs)))
                .collect(),
        ),
    }
}

/// Random value of a sort: uints uniform in [0, 2^64 - 1], maps with a few
/// small keys.
pub fn havoc_val<R: Rng>(t: &BaseType, structs: &StructTable, rng: &mut R) -> Value {
    match t {
        BaseType::UInt => Value::Nat(BigUint::from(rng.gen::<u64>())),
        BaseType::Bool => Value::Bool(rng.gen()),
        BaseType::Unit => Value::Unit,
        BaseType::Map(inner) => {
            let mut m = MapVal { default: Box::new(zero_val(inner, structs)), entries: BTreeMap::new() };
            for _ in 0..rng.gen_range(0..4) {
                let k = BigUint::from(rng.gen_range(0u32..8));
                m.set(k, havoc_val(inner, structs, rng));
            }
            Value::Map(m)
        }
        BaseType::Struct(s) => Value::Struct(
            s.clone(),
            structs
                .fields(s)
                .unwrap_or(&[])
                .iter()
                .map(|(x, ft)| (x.clone(), havoc_val(ft, structs, rng)))
                .collect(),
        ),
    }
}
