use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use minisol::ast::BaseType;
use minisol::logic::{to_validity_script, Encoder, Formula as F, HornClause, HornSystem, Sort};
use minisol::parse_term;
use minisol::solver::{ChcResult, Solver, SolverConfig, SolverError, UnknownReason, ValidityResult};
use minisol::templates::Templates;
use minisol::typecheck::{Binding, Context, RType};
use minisol::StructTable;

fn solver(timeout: Duration) -> Solver {
    Solver::new(SolverConfig::resolve(None, timeout).expect("an SMT solver (z3) is required for these tests"))
}

fn uint(q: &str) -> RType {
    RType { base: BaseType::UInt, qual: parse_term(q).unwrap() }
}

/// `a = b + c` under guard `c >= d`, checking `{v = a} <: {v >= d}`.
fn subtyping_query(with_guard: bool) -> String {
    let t = Templates::new(StructTable::default(), true);
    let ctx = Context {
        env: vec![
            Binding { name: "b".into(), ty: uint("true") },
            Binding { name: "c".into(), ty: uint("true") },
            Binding { name: "d".into(), ty: uint("true") },
            Binding { name: "a".into(), ty: uint("v == b + c") },
        ],
        guards: if with_guard { vec![parse_term("c >= d").unwrap()] } else { vec![] },
        ..Default::default()
    };
    let mut enc = Encoder::new(&t);
    let f = enc.subtyping(&ctx, &uint("v == a"), &uint("v >= d")).unwrap();
    to_validity_script(&enc.decls, &f).unwrap()
}

#[test]
fn subtyping_follows_the_guard() {
    let s = solver(Duration::from_secs(10));
    assert_eq!(s.check_validity(&subtyping_query(true)).unwrap(), ValidityResult::Valid);
    assert!(matches!(s.check_validity(&subtyping_query(false)).unwrap(), ValidityResult::Invalid(_)));
    assert_eq!(s.query_count(), 2);
}

fn counter_system(bound: i64) -> HornSystem {
    // I(0); I(x) /\ x < 10 => I(x + 1); I(x) => x <= bound
    let x = || F::var("x");
    let vars: BTreeMap<String, Sort> = [("x".to_string(), Sort::Real)].into();
    let app = |a: F| F::App("I".into(), vec![a]);
    HornSystem {
        preds: [("I".to_string(), vec![Sort::Real])].into(),
        clauses: vec![
            HornClause { vars: BTreeMap::new(), body: vec![], head: app(F::num(0)) },
            HornClause {
                vars: vars.clone(),
                body: vec![app(x()), F::lt(x(), F::num(10))],
                head: app(F::add(x(), F::num(1))),
            },
            HornClause {
                vars,
                body: vec![app(x()), F::not(F::le(x(), F::num(bound)))],
                head: F::Bool(false),
            },
        ],
    }
}

#[test]
fn chc_sat_returns_a_model() {
    let s = solver(Duration::from_secs(10));
    match s.solve_chc(&counter_system(10).to_script()).unwrap() {
        ChcResult::Sat(m) => {
            assert_eq!(m["I"].formals.len(), 1);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(s.solve_chc(&counter_system(9).to_script()).unwrap(), ChcResult::Unsat);
}

#[test]
fn two_clause_contradiction_is_unsat() {
    let s = solver(Duration::from_secs(10));
    let sys = HornSystem {
        preds: [("P".to_string(), vec![])].into(),
        clauses: vec![
            HornClause { vars: BTreeMap::new(), body: vec![], head: F::App("P".into(), vec![]) },
            HornClause { vars: BTreeMap::new(), body: vec![F::App("P".into(), vec![])], head: F::Bool(false) },
        ],
    };
    assert_eq!(s.solve_chc(&sys.to_script()).unwrap(), ChcResult::Unsat);
}

#[test]
fn empty_scripts_are_protocol_errors() {
    let s = solver(Duration::from_secs(10));
    assert!(matches!(s.check_validity(""), Err(SolverError::Protocol(_))));
    assert!(matches!(s.solve_chc("  \n"), Err(SolverError::Protocol(_))));
    assert_eq!(s.query_count(), 0);
}

#[test]
fn slow_queries_time_out() {
    let s = solver(Duration::from_millis(1));
    let script = subtyping_query(true);
    assert_eq!(s.check_validity(&script).unwrap(), ValidityResult::Unknown(UnknownReason::Timeout));
}

#[test]
fn missing_solver_is_reported() {
    let r = SolverConfig::resolve(Some(Path::new("/nonexistent/solver")), Duration::from_secs(1));
    assert!(matches!(r, Err(SolverError::NotFound(_))));
}
