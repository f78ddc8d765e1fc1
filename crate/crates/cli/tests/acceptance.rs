//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion.
//! Run with `cargo test -p minisol-cli --test acceptance -- --nocapture` to see the table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use minisol::ast::{BaseType, Contract, SourceLoc, StructDecl, StructTable, Term};
use minisol::infer::{sigma_implies, Status, Verdict};
use minisol::interp::{
    const_sum, eval_term, havoc_val, EventKind, ExecOutcome, Interpreter, Observer, Store, Value,
};
use minisol::logic::{to_validity_script, Encoder};
use minisol::parse_term;
use minisol::pipeline::{analyze, load, Analysis, Options};
use minisol::solver::{Solver, SolverConfig, ValidityResult};
use minisol::templates::{template_family, Templates};
use minisol::typecheck::{Binding, Context, Mode, RType};
use minisol::MAX_INT;

#[path = "../../core/tests/support/families.rs"]
mod families;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "msol"))
        .collect();
    v.sort();
    v
}

fn source(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

fn solver() -> Solver {
    Solver::new(SolverConfig::resolve(None, Duration::from_secs(10)).expect("an SMT solver (z3) is required"))
}

fn run(src: &str, mode: Mode, tweak: impl FnOnce(&mut Options)) -> (Contract, Analysis) {
    let c = load(src).unwrap();
    let mut opts = Options::new(mode);
    tweak(&mut opts);
    let a = analyze(&c, opts, &solver()).unwrap();
    (c, a)
}

/// Location of the binary operator ` op ` on the unique line containing `snippet`.
fn site(src: &str, snippet: &str, op: &str) -> SourceLoc {
    let mut hits = src.lines().enumerate().filter(|(_, l)| l.contains(snippet));
    let (i, line) = hits.next().unwrap_or_else(|| panic!("no line with {snippet}"));
    assert!(hits.next().is_none(), "{snippet} is ambiguous");
    let col = line.find(&format!(" {op} ")).unwrap_or_else(|| panic!("no {op} in {line}")) + 2;
    SourceLoc::new(i as u32 + 1, col as u32)
}

type VerdictSet = BTreeSet<(SourceLoc, &'static str)>;

fn verdict_set(vs: &[Verdict]) -> VerdictSet {
    vs.iter().map(|v| (v.site, v.status.as_str())).collect()
}

fn expect(pairs: &[(SourceLoc, Status)]) -> VerdictSet {
    pairs.iter().map(|(l, s)| (*l, s.as_str())).collect()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.2}s, limit {}s", e.as_secs_f64(), limit.as_secs()))
}

fn erc20_expected(src: &str, require_sub: bool) -> VerdictSet {
    let s = Status::Safe;
    let n = Status::NeedsCheck;
    expect(&[
        (site(src, "require(tot1 +", "+"), n),
        (site(src, "let tot2", "+"), s),
        (site(src, "let bals2", "+"), s),
        (site(src, "let bals4", "-"), if require_sub { s } else { n }),
        (site(src, "let bals5", "+"), s),
    ])
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let src = source("erc20.msol");
    let (_, a) = run(&src, Mode::Check, |_| {});
    let got = verdict_set(&a.verdicts);
    let ok = got == erc20_expected(&src, true) && a.hard_failures.is_empty();
    let (fast, time) = within(t, Duration::from_secs(30));
    outcome(ok && fast, format!("erc20 check: 4 SAFE, require-internal addition NEEDS_CHECK, exact set; {time}"))
}

fn state_pred<'a>(a: &'a Analysis, var: &str) -> &'a minisol::typecheck::UnknownPred {
    a.cs.preds.iter().find(|p| p.name.starts_with("I_") && p.params[p.nu_index].0 == var).unwrap()
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let src = source("erc20_auto.msol");
    let s = solver();
    let c = load(&src).unwrap();
    let a = analyze(&c, Options::new(Mode::Infer), &s).unwrap();
    let p = state_pred(&a, "tot");
    let implied = sigma_implies(p, &a.sigma[&p.name], &parse_term("sum(bals) <= v").unwrap(), &a.templates, &s);
    let verdicts_ok = verdict_set(&a.verdicts) == erc20_expected(&src, true);
    let (fast, time) = within(t, Duration::from_secs(120));
    outcome(
        implied == Some(ValidityResult::Valid) && verdicts_ok && fast,
        format!(
            "erc20 infer: Σ({}) = {} implies sum(bals) <= tot: {:?}; verdicts match criterion 1: {verdicts_ok}; {time}",
            p.name, a.sigma[&p.name], implied
        ),
    )
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let src = source("nested.msol");
    let s = solver();
    let c = load(&src).unwrap();
    let target = site(&src, "let u1", "+");
    let a = analyze(&c, Options::new(Mode::Infer), &s).unwrap();
    let status = |a: &Analysis| a.verdicts.iter().find(|v| v.site == target).map(|v| v.status);
    let p = state_pred(&a, "tot");
    let goal = parse_term("sum(fld(bal, flatten(usrs))) <= v").unwrap();
    let implied = sigma_implies(p, &a.sigma[&p.name], &goal, &a.templates, &s);
    let mut flat = Options::new(Mode::Infer);
    flat.nested = false;
    let b = analyze(&c, flat, &s).unwrap();
    let ok = status(&a) == Some(Status::Safe)
        && implied == Some(ValidityResult::Valid)
        && status(&b) == Some(Status::NeedsCheck);
    let (fast, time) = within(t, Duration::from_secs(120));
    outcome(
        ok && fast,
        format!(
            "nested infer: site {target} {:?} with Σ implying sum(fld(bal, flatten(usrs))) <= tot ({implied:?}); --no-nested {:?}; {time}",
            status(&a),
            status(&b)
        ),
    )
}

fn criterion_4() -> Outcome {
    let src = source("erc20_noreq.msol");
    let (_, a) = run(&src, Mode::Infer, |_| {});
    let (_, b) = run(&src, Mode::Infer, |o| o.infer.no_soft = true);
    let default_ok = verdict_set(&a.verdicts) == erc20_expected(&src, false);
    let all_sites: BTreeSet<SourceLoc> = erc20_expected(&src, false).iter().map(|(l, _)| *l).collect();
    let no_soft_ok = verdict_set(&b.verdicts) == all_sites.iter().map(|l| (*l, "NEEDS_CHECK")).collect();
    outcome(
        default_ok && no_soft_ok,
        format!("transfer require removed: default discharges mint sites ({default_ok}); --no-soft all NEEDS_CHECK ({no_soft_ok}); exact sets"),
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let s = solver();
    let templates = Templates::new(StructTable::default(), true);
    let uint = |q: &str| RType { base: BaseType::UInt, qual: parse_term(q).unwrap() };
    let query = |guards: Vec<Term>| {
        let ctx = Context {
            env: vec![
                Binding { name: "b".into(), ty: uint("true") },
                Binding { name: "c".into(), ty: uint("true") },
                Binding { name: "d".into(), ty: uint("true") },
                Binding { name: "a".into(), ty: uint("v == b + c") },
            ],
            guards,
            ..Default::default()
        };
        let mut enc = Encoder::new(&templates);
        let f = enc.subtyping(&ctx, &uint("v == a"), &uint("v >= d")).unwrap();
        s.check_validity(&to_validity_script(&enc.decls, &f).unwrap()).unwrap()
    };
    let with = query(vec![parse_term("c >= d").unwrap()]);
    let without = query(vec![]);
    let (fast, time) = within(t, Duration::from_secs(2));
    outcome(
        with == ValidityResult::Valid && matches!(without, ValidityResult::Invalid(_)) && fast,
        format!("{{v = a}} <: {{v >= d}}: with guard {with:?}, without {without:?}; {time}"),
    )
}

fn criterion_6() -> Outcome {
    let s = |name: &str, fields: Vec<(&str, Value)>| {
        Value::Struct(name.into(), fields.into_iter().map(|(x, v)| (x.to_string(), v)).collect())
    };
    let zero_s = s("S", vec![("x_a", Value::nat(0)), ("x_b", Value::nat(0))]);
    let mut m = minisol::interp::MapVal { default: Box::new(zero_s), entries: BTreeMap::new() };
    for i in 1..=10u64 {
        m.set(BigUint::from(i), s("S", vec![("x_a", Value::nat(i)), ("x_b", Value::nat(1))]));
    }
    let v = Value::Map(m);
    let path = |x: &str| vec![x.to_string()];
    let a = const_sum(&path("x_a"), &v).unwrap();
    let b = const_sum(&path("x_b"), &v).unwrap();
    let inner = |es: &[(u64, u64)]| {
        let mut m = minisol::interp::MapVal { default: Box::new(Value::nat(0)), entries: BTreeMap::new() };
        for (k, n) in es {
            m.set(BigUint::from(*k), Value::nat(*n));
        }
        s("T", vec![("a", Value::Map(m))])
    };
    let zero_t = inner(&[]);
    let mut n = minisol::interp::MapVal { default: Box::new(zero_t), entries: BTreeMap::new() };
    n.set(BigUint::from(1u32), inner(&[(5, 11)]));
    n.set(BigUint::from(2u32), inner(&[(4, 6), (10, 3)]));
    let total = const_sum(&path("a"), &Value::Map(n.clone())).unwrap();
    let second = const_sum(&path("a"), n.get(&BigUint::from(2u32))).unwrap();
    let got = [a, b, total, second];
    let want = [55u32, 10, 20, 9].map(BigUint::from);
    outcome(got == want, format!("const_sum gives {got:?}, expected [55, 10, 20, 9] exactly"))
}

fn criterion_7() -> Outcome {
    let table = StructTable::new(&[StructDecl {
        name: "User".into(),
        fields: vec![("bal".into(), BaseType::UInt), ("frozen".into(), BaseType::UInt)],
        loc: SourceLoc::default(),
    }]);
    let flat = template_family(&BaseType::UInt, &table);
    let flat_ok = flat.len() == 1
        && flat[0].h1.to_string() == "sum(□)"
        && flat[0].h2.to_string() == "□"
        && flat[0].path.is_empty();
    let user = template_family(&BaseType::Struct("User".into()), &table);
    let mut mismatches = 0;
    for seed in 0..100u64 {
        let (decls, sort) = families::random_sort(seed);
        let structs = StructTable::new(&decls);
        let got: BTreeSet<_> = template_family(&sort, &structs)
            .iter()
            .map(|m| (m.h1.to_string(), m.h2.to_string(), m.path.clone()))
            .collect();
        if got != families::expected_family(&sort, &structs) {
            mismatches += 1;
        }
    }
    outcome(
        flat_ok && user.len() == 2 && mismatches == 0,
        format!(
            "map(uint) family exact: {flat_ok}; map(User{{bal, frozen}}) members: {}; random sorts: 100, mismatches: {mismatches}",
            user.len()
        ),
    )
}

/// Checks the runtime invariants while transactions execute.
struct Oracle<'a> {
    structs: &'a StructTable,
    annotations: Vec<(String, Term)>,
    violations: Vec<String>,
    updates: usize,
    commits: usize,
}

impl Observer for Oracle<'_> {
    fn map_update(&mut self, before: &Value, key: &BigUint, entry: &Value, after: &Value) {
        self.updates += 1;
        let Value::Map(m) = before else { return };
        let old = m.get(key).clone();
        for f in template_family(&m.default.sort(), self.structs) {
            let sum = |v: &Value| const_sum(&f.path, v).map(BigInt::from);
            match (sum(after), sum(before), sum(&old), sum(entry)) {
                (Ok(a), Ok(b), Ok(o), Ok(e)) if a == &b - &o + &e => {}
                r => self.violations.push(format!("update equation fails for {} at key {key}: {r:?}", f.h1)),
            }
        }
    }

    fn commit(&mut self, store: &Store) {
        self.commits += 1;
        let lookup = |x: &str| store.get(x).cloned();
        for (sv, q) in &self.annotations {
            let ok = eval_term(q, &lookup, store.get(sv)).ok().and_then(|v| v.as_bool());
            if ok != Some(true) {
                self.violations.push(format!("`{q}` does not hold for {sv} at commit"));
            }
        }
    }
}

fn random_nat(rng: &mut ChaCha8Rng) -> BigUint {
    match rng.gen_range(0..10) {
        0..=3 => BigUint::from(rng.gen_range(0u32..10)),
        4 | 5 => BigUint::from(rng.gen_range(0u32..1000)),
        6 | 7 => BigUint::from(rng.gen::<u64>()),
        _ => &*MAX_INT - rng.gen_range(0u32..4),
    }
}

fn random_arg(t: &BaseType, structs: &StructTable, rng: &mut ChaCha8Rng) -> Value {
    match t {
        BaseType::UInt => Value::Nat(random_nat(rng)),
        other => havoc_val(other, structs, rng),
    }
}

struct FuzzStats {
    runs: usize,
    txs: usize,
    updates: usize,
    commits: usize,
    aborts: usize,
    violations: Vec<String>,
}

/// With `claim_all_safe`, every site is treated as SAFE and left unguarded;
/// the oracle must then find violations (negative control).
fn fuzz(path: &Path, runs: u64, claim_all_safe: bool) -> FuzzStats {
    let src = std::fs::read_to_string(path).unwrap();
    let (c, a) = run(&src, Mode::Infer, |_| {});
    let claimed = |v: &&Verdict| claim_all_safe || v.status == Status::Safe;
    let safe: BTreeSet<SourceLoc> = a.verdicts.iter().filter(claimed).map(|v| v.site).collect();
    let guards: Vec<SourceLoc> = a.verdicts.iter().filter(|v| !claimed(v)).map(|v| v.site).collect();
    let it = Interpreter::new(&c, guards);
    let structs = c.struct_table();
    // declared annotations plus inferred contract invariants
    let mut annotations: Vec<(String, Term)> = Vec::new();
    for (i, sv) in c.state_vars.iter().enumerate() {
        match &sv.ty.qual {
            Some(q) => annotations.push((sv.name.clone(), q.clone())),
            None => {
                if let Some(t) = a.sigma.get(&format!("I_{}", i + 1)) {
                    annotations.push((sv.name.clone(), t.clone()));
                }
            }
        }
    }
    let mut stats = FuzzStats { runs: 0, txs: 0, updates: 0, commits: 0, aborts: 0, violations: Vec::new() };
    let check_events = |o: &ExecOutcome, what: &str, stats: &mut FuzzStats| {
        for e in o.events() {
            if safe.contains(&e.site) {
                let kind = match &e.kind {
                    EventKind::OverflowWouldOccur { op, lhs, rhs } => format!("{lhs} {} {rhs}", op.symbol()),
                    EventKind::DivByZero => "division by zero".into(),
                };
                stats.violations.push(format!("{what}: SAFE site {} overflowed ({kind})", e.site));
            }
        }
    };
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut oracle = Oracle { structs: &structs, annotations: annotations.clone(), violations: vec![], updates: 0, commits: 0 };
        let owner = BigUint::from(rng.gen_range(1u32..4));
        let ctor_args = c
            .ctor
            .as_ref()
            .map(|k| k.params.iter().map(|_| Value::Nat(owner.clone())).collect())
            .unwrap_or_default();
        let first = it.run_constructor(ctor_args, owner.clone(), &mut rng, &mut oracle);
        check_events(&first, "constructor", &mut stats);
        let ExecOutcome::Completed { mut store, .. } = first else {
            stats.violations.push(format!("seed {seed}: constructor aborted"));
            continue;
        };
        for _ in 0..rng.gen_range(1..8) {
            if c.functions.is_empty() {
                break;
            }
            let f = &c.functions[rng.gen_range(0..c.functions.len())];
            let args = f.params.iter().map(|p| random_arg(&p.ty.base, &structs, &mut rng)).collect();
            let sender = if rng.gen_bool(0.5) { owner.clone() } else { BigUint::from(rng.gen_range(1u32..5)) };
            let before = store.clone();
            let o = it.run_function(&f.name, args, sender, &store, &mut rng, &mut oracle);
            stats.txs += 1;
            check_events(&o, &format!("seed {seed} {}", f.name), &mut stats);
            match o {
                ExecOutcome::Completed { store: s, .. } => store = s,
                ExecOutcome::Aborted { .. } => {
                    stats.aborts += 1;
                    if store != before {
                        stats.violations.push(format!("seed {seed}: aborted {} changed the store", f.name));
                    }
                }
            }
        }
        stats.runs += 1;
        stats.updates += oracle.updates;
        stats.commits += oracle.commits;
        stats.violations.extend(oracle.violations.into_iter().map(|v| format!("seed {seed}: {v}")));
    }
    stats
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut violations = Vec::new();
    let mut enough = true;
    for path in corpus_files() {
        let s = fuzz(&path, 1000, false);
        enough &= s.runs >= 1000;
        lines.push(format!(
            "{}: {} runs, {} txs, {} aborts, {} map updates, {} commits",
            path.file_name().unwrap().to_string_lossy(),
            s.runs,
            s.txs,
            s.aborts,
            s.updates,
            s.commits
        ));
        violations.extend(s.violations);
    }
    let (fast, time) = within(t, Duration::from_secs(300));
    let control = fuzz(&corpus_dir().join("erc20_noreq.msol"), 200, true).violations.len();
    lines.push(format!("control: erc20_noreq with every site claimed SAFE and unguarded: {control} violations found"));
    for v in violations.iter().take(5) {
        lines.push(format!("violation: {v}"));
    }
    outcome(
        enough && violations.is_empty() && control > 0 && fast,
        format!("{} violations; {time}\n      {}", violations.len(), lines.join("\n      ")),
    )
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_minisol");
    let report = |p: &Path| {
        let out = Command::new(bin).arg("infer").arg(p).output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        text.lines().filter(|l| !l.contains("\"wallTimeMs\"")).collect::<Vec<_>>().join("\n")
    };
    let mut differing = Vec::new();
    let files = corpus_files();
    for p in &files {
        let (a, b) = (report(p), report(p));
        if a != b || !a.contains("\"schema\": 1") {
            differing.push(p.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    outcome(
        differing.is_empty(),
        format!("two `infer` runs per contract over {} contracts, differing reports: {differing:?}", files.len()),
    )
}

#[test]
fn acceptance() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = Vec::new();
    for (n, f) in criteria {
        let o = f();
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
