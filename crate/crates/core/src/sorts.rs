//! Sort inference for refinement terms.

use crate::ast::{BaseType, BinOp, StructTable, Term};

/// Looks up the sort of a variable; `None` for unbound names.
pub trait SortEnv {
    fn var_sort(&self, name: &str) -> Option<BaseType>;
    fn nu_sort(&self) -> Option<BaseType>;
    fn hole_sort(&self) -> Option<BaseType> {
        None
    }
}

pub struct FnEnv<F: Fn(&str) -> Option<BaseType>> {
    pub vars: F,
    pub nu: Option<BaseType>,
    pub hole: Option<BaseType>,
}

impl<F: Fn(&str) -> Option<BaseType>> SortEnv for FnEnv<F> {
    fn var_sort(&self, name: &str) -> Option<BaseType> {
        (self.vars)(name)
    }
    fn nu_sort(&self) -> Option<BaseType> {
        self.nu.clone()
    }
    fn hole_sort(&self) -> Option<BaseType> {
        self.hole.clone()
    }
}

pub fn sort_of(t: &Term, env: &dyn SortEnv, structs: &StructTable) -> Result<BaseType, String> {
    use BaseType::*;
    let s = |t: &Term| sort_of(t, env, structs);
    match t {
        Term::Nat(_) | Term::Rat(_) | Term::MaxInt => Ok(UInt),
        Term::Bool(_) | Term::Pred(..) => Ok(Bool),
        Term::Unit => Ok(Unit),
        Term::Nu => env.nu_sort().ok_or_else(|| "`v` is not available here".to_string()),
        Term::Hole => env.hole_sort().ok_or_else(|| "unexpected hole".to_string()),
        Term::Var(x) => env.var_sort(x).ok_or_else(|| format!("unbound variable `{x}`")),
        Term::Bin(op, a, b) => {
            let (sa, sb) = (s(a)?, s(b)?);
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    expect(&sa, &UInt, op.symbol())?;
                    expect(&sb, &UInt, op.symbol())?;
                    Ok(UInt)
                }
                BinOp::Ge | BinOp::Le | BinOp::Gt | BinOp::Lt => {
                    expect(&sa, &UInt, op.symbol())?;
                    expect(&sb, &UInt, op.symbol())?;
                    Ok(Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    if sa != sb {
                        return Err(format!("`{}` compares {sa} with {sb}", op.symbol()));
                    }
                    Ok(Bool)
                }
                BinOp::And | BinOp::Or => {
                    expect(&sa, &Bool, op.symbol())?;
                    expect(&sb, &Bool, op.symbol())?;
                    Ok(Bool)
                }
            }
        }
        Term::Not(a) => {
            expect(&s(a)?, &Bool, "!")?;
            Ok(Bool)
        }
        Term::Index(m, k) => {
            expect(&s(k)?, &UInt, "map index")?;
            match s(m)? {
                Map(t) => Ok(*t),
                other => Err(format!("indexing a value of sort {other}")),
            }
        }
        Term::Field(st, x) => field_sort(&s(st)?, x, structs),
        Term::Update(m, k, v) => {
            expect(&s(k)?, &UInt, "map index")?;
            match s(m)? {
                Map(t) => {
                    expect(&s(v)?, &t, "map update")?;
                    Ok(Map(t))
                }
                other => Err(format!("updating a value of sort {other} as a map")),
            }
        }
        Term::FieldUpdate(st, x, v) => {
            let sst = s(st)?;
            let tx = field_sort(&sst, x, structs)?;
            expect(&s(v)?, &tx, "field update")?;
            Ok(sst)
        }
        Term::MapConst(t, es) => {
            check_type(t, structs)?;
            for (_, v) in es {
                expect(&s(v)?, t, "map constant entry")?;
            }
            Ok(Map(Box::new(t.clone())))
        }
        Term::StructConst(name, fs) => {
            struct_const_fields(name, fs.iter().map(|(x, _)| x.as_str()), structs)?;
            for (x, v) in fs {
                let tx = structs.field_type(name, x).expect("checked above");
                expect(&s(v)?, tx, "struct field")?;
            }
            Ok(Struct(name.clone()))
        }
        Term::Sum(a) => match s(a)? {
            Map(t) if *t == UInt => Ok(UInt),
            other => Err(format!("sum applied to {other}")),
        },
        Term::Flatten(a) => match s(a)? {
            Map(t) => match *t {
                Map(inner) => Ok(Map(inner)),
                other => Err(format!("flatten applied to map({other})")),
            },
            other => Err(format!("flatten applied to {other}")),
        },
        Term::Fld(x, a) => match s(a)? {
            Map(t) => match *t {
                Struct(name) => Ok(Map(Box::new(field_sort(&Struct(name), x, structs)?))),
                other => Err(format!("fld applied to map({other})")),
            },
            other => Err(format!("fld applied to {other}")),
        },
    }
}

fn expect(got: &BaseType, want: &BaseType, what: &str) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what} expects {want}, found {got}"))
    }
}

pub fn field_sort(s: &BaseType, x: &str, structs: &StructTable) -> Result<BaseType, String> {
    match s {
        BaseType::Struct(name) => structs
            .field_type(name, x)
            .cloned()
            .ok_or_else(|| format!("struct {name} has no field `{x}`")),
        other => Err(format!("field access `.{x}` on {other}")),
    }
}

/// Checks that a struct constant lists every field exactly once.
pub fn struct_const_fields<'a>(
    name: &str,
    given: impl Iterator<Item = &'a str>,
    structs: &StructTable,
) -> Result<(), String> {
    let fields = structs.fields(name).ok_or_else(|| format!("unknown struct `{name}`"))?;
    let given: Vec<&str> = given.collect();
    for (f, _) in fields {
        if given.iter().filter(|g| **g == f).count() != 1 {
            return Err(format!("struct constant {name} must give field `{f}` exactly once"));
        }
    }
    if let Some(g) = given.iter().find(|g| !fields.iter().any(|(f, _)| f == *g)) {
        return Err(format!("struct {name} has no field `{g}`"));
    }
    Ok(())
}

pub fn check_type(t: &BaseType, structs: &StructTable) -> Result<(), String> {
    match t {
        BaseType::Map(inner) => check_type(inner, structs),
        BaseType::Struct(s) if !structs.contains(s) => Err(format!("unknown struct `{s}`")),
        _ => Ok(()),
    }
}
