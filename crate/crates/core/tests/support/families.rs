//! Brute-force template oracle: apply every aggregate constructor over every
//! field name in the table, keep the well-sorted results that produce a uint,
//! and pair them by access path.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use minisol::ast::{BaseType, SourceLoc, StructDecl, StructTable, Term};

pub const NAMES: [&str; 4] = ["bal", "frozen", "acc", "owner"];

#[derive(Clone, Debug)]
enum Wrap {
    Sum,
    Flatten,
    Fld(String),
    Field(String),
}

fn step(w: &Wrap, sort: &BaseType, structs: &StructTable) -> Option<BaseType> {
    let field_of = |s: &str, x: &str| {
        structs.fields(s)?.iter().find(|(f, _)| f == x).map(|(_, t)| t.clone())
    };
    match (w, sort) {
        (Wrap::Sum, BaseType::Map(t)) if **t == BaseType::UInt => Some(BaseType::UInt),
        (Wrap::Flatten, BaseType::Map(t)) => match t.as_ref() {
            BaseType::Map(inner) => Some(BaseType::Map(inner.clone())),
            _ => None,
        },
        (Wrap::Fld(x), BaseType::Map(t)) => match t.as_ref() {
            BaseType::Struct(s) => field_of(s, x).map(BaseType::map),
            _ => None,
        },
        (Wrap::Field(x), BaseType::Struct(s)) => field_of(s, x),
        _ => None,
    }
}

fn build(ws: &[Wrap]) -> (Term, Vec<String>) {
    let mut t = Term::Hole;
    let mut path = Vec::new();
    for w in ws {
        t = match w {
            Wrap::Sum => Term::sum(t),
            Wrap::Flatten => Term::Flatten(Box::new(t)),
            Wrap::Fld(x) => {
                path.push(x.clone());
                Term::Fld(x.clone(), Box::new(t))
            }
            Wrap::Field(x) => {
                path.push(x.clone());
                Term::field(t, x)
            }
        };
    }
    (t, path)
}

pub fn brute_force(hole: &BaseType, structs: &StructTable, names: &[String]) -> BTreeSet<(String, Vec<String>)> {
    let mut alphabet = vec![Wrap::Sum, Wrap::Flatten];
    for x in names {
        alphabet.push(Wrap::Fld(x.clone()));
        alphabet.push(Wrap::Field(x.clone()));
    }
    let mut out = BTreeSet::new();
    let mut frontier: Vec<(Vec<Wrap>, BaseType)> = vec![(vec![], hole.clone())];
    for _ in 0..=12 {
        let mut next = Vec::new();
        for (ws, sort) in &frontier {
            if *sort == BaseType::UInt {
                let (t, p) = build(ws);
                out.insert((t.to_string(), p));
            }
            for w in &alphabet {
                if let Some(s) = step(w, sort, structs) {
                    let mut ws2 = ws.clone();
                    ws2.push(w.clone());
                    next.push((ws2, s));
                }
            }
        }
        frontier = next;
    }
    assert!(frontier.is_empty(), "enumeration bound too small");
    out
}

pub fn depth(t: &BaseType, structs: &StructTable) -> usize {
    match t {
        BaseType::Map(inner) => 1 + depth(inner, structs),
        BaseType::Struct(s) => {
            1 + structs.fields(s).unwrap_or(&[]).iter().map(|(_, f)| depth(f, structs)).max().unwrap_or(0)
        }
        _ => 0,
    }
}

/// Random struct table (each struct only refers to earlier ones) and a random
/// value sort of depth at most 4.
pub fn random_sort(seed: u64) -> (Vec<StructDecl>, BaseType) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = NAMES;
    let mut decls: Vec<StructDecl> = Vec::new();
    for i in 0..rng.gen_range(1..4) {
        let table = StructTable::new(&decls);
        let mut fields = Vec::new();
        for x in names.iter().take(rng.gen_range(1..4)) {
            let t = loop {
                let t = random_base(&mut rng, &decls, 2);
                if depth(&t, &table) <= 2 {
                    break t;
                }
            };
            fields.push((x.to_string(), t));
        }
        decls.push(StructDecl { name: format!("S{i}"), fields, loc: SourceLoc::default() });
    }
    let table = StructTable::new(&decls);
    loop {
        let t = random_base(&mut rng, &decls, 3);
        if depth(&t, &table) <= 3 && !t.is_scalar() {
            return (decls, t);
        }
    }
}

fn random_base(rng: &mut ChaCha8Rng, decls: &[StructDecl], fuel: u32) -> BaseType {
    let pick = if fuel == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..6) };
    match pick {
        0 | 1 => BaseType::UInt,
        2 => BaseType::Bool,
        3 | 4 => BaseType::map(random_base(rng, decls, fuel - 1)),
        _ if decls.is_empty() => BaseType::UInt,
        _ => BaseType::Struct(decls[rng.gen_range(0..decls.len())].name.clone()),
    }
}


/// Family members expected for maps with values of `value_sort`.
pub fn expected_family(value_sort: &BaseType, structs: &StructTable) -> BTreeSet<(String, String, Vec<String>)> {
    let names: Vec<String> = NAMES.iter().map(|s| s.to_string()).collect();
    let h1s = brute_force(&BaseType::map(value_sort.clone()), structs, &names);
    let h2s = brute_force(value_sort, structs, &names);
    let mut out = BTreeSet::new();
    for (t1, p1) in &h1s {
        for (t2, p2) in &h2s {
            if p1 == p2 {
                out.insert((t1.clone(), t2.clone(), p1.clone()));
            }
        }
    }
    out
}
