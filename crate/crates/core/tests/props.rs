use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use minisol::ast::{BaseType, BinOp, Expr, ExprKind, SourceLoc, StructTable, Term};
use minisol::fold::fold_constants;
use minisol::interp::{ExecOutcome, Interpreter, NoObserver, Value};
use minisol::parser::{parse_contract, parse_expr, parse_term};
use minisol::printer::{print_contract, print_expr, print_term};
use minisol::templates::template_family;
use minisol::MAX_INT;

const OPS: [BinOp; 12] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Le,
    BinOp::Lt,
    BinOp::Ge,
    BinOp::Gt,
    BinOp::And,
    BinOp::Or,
];

fn nat() -> impl Strategy<Value = BigUint> {
    prop_oneof![
        (0u64..50).prop_map(BigUint::from),
        any::<u64>().prop_map(BigUint::from),
        (0u32..3).prop_map(|d| &*MAX_INT - d),
    ]
}

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "tot", "bals", "msg_sender"]).prop_map(String::from)
}

fn field() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "bal"]).prop_map(String::from)
}

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, SourceLoc::default())
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        nat().prop_map(|n| e(ExprKind::Nat(n))),
        any::<bool>().prop_map(|b| e(ExprKind::Bool(b))),
        ident().prop_map(|x| e(ExprKind::Var(x))),
        Just(e(ExprKind::Havoc(BaseType::UInt))),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let b = |x: Expr| Box::new(x);
        prop_oneof![
            (prop::sample::select(OPS.to_vec()), inner.clone(), inner.clone())
                .prop_map(move |(op, l, r)| e(ExprKind::Bin(op, b(l), b(r)))),
            inner.clone().prop_map(move |a| e(ExprKind::Not(b(a)))),
            (inner.clone(), inner.clone()).prop_map(move |(m, k)| e(ExprKind::Index(b(m), b(k)))),
            (inner.clone(), field()).prop_map(move |(s, x)| e(ExprKind::FieldIndex(b(s), x))),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(move |(m, k, v)| e(ExprKind::Update(b(m), b(k), b(v)))),
            (inner.clone(), field(), inner.clone())
                .prop_map(move |(s, x, v)| e(ExprKind::FieldUpdate(b(s), x, b(v)))),
            prop::collection::btree_map(0u64..20, inner.clone(), 0..3).prop_map(|es| {
                let es = es.into_iter().map(|(k, v)| (BigUint::from(k), v)).collect();
                e(ExprKind::MapConst(BaseType::UInt, es))
            }),
            (inner.clone(), inner).prop_map(|(x, y)| {
                e(ExprKind::StructConst("User".into(), vec![("x".into(), x), ("bal".into(), y)]))
            }),
        ]
    })
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        nat().prop_map(Term::Nat),
        any::<bool>().prop_map(Term::Bool),
        ident().prop_map(Term::Var),
        Just(Term::Nu),
        Just(Term::MaxInt),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (prop::sample::select(OPS.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Term::bin(op, l, r)),
            inner.clone().prop_map(Term::not),
            inner.clone().prop_map(Term::sum),
            (field(), inner.clone()).prop_map(|(x, a)| Term::Fld(x, Box::new(a))),
            inner.clone().prop_map(|a| Term::Flatten(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(m, k)| Term::index(m, k)),
            (inner, field()).prop_map(|(s, x)| Term::field(s, &x)),
        ]
    })
}

proptest! {
    #[test]
    fn expressions_round_trip(x in expr()) {
        let printed = print_expr(&x);
        let back = parse_expr(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        prop_assert_eq!(back.without_locs(), x);
    }

    #[test]
    fn terms_round_trip(t in term()) {
        let printed = print_term(&t);
        let back = parse_term(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        prop_assert_eq!(back, t);
    }
}

#[test]
fn corpus_contracts_round_trip() {
    let dir = format!("{}/../../corpus", env!("CARGO_MANIFEST_DIR"));
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let c = parse_contract(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let printed = print_contract(&c);
        let back = parse_contract(&printed).unwrap_or_else(|err| panic!("{}: {err}\n{printed}", path.display()));
        assert_eq!(back.without_locs(), c.without_locs(), "{}", path.display());
        assert_eq!(print_contract(&back), printed);
    }
}

#[path = "support/families.rs"]
mod families;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn families_match_brute_force(seed in any::<u64>()) {
        let (decls, value_sort) = families::random_sort(seed);
        let structs = StructTable::new(&decls);
        prop_assert!(families::depth(&BaseType::map(value_sort.clone()), &structs) <= 4);
        let expected = families::expected_family(&value_sort, &structs);
        let family = template_family(&value_sort, &structs);
        let got: BTreeSet<_> = family.iter().map(|m| (m.h1.to_string(), m.h2.to_string(), m.path.clone())).collect();
        prop_assert_eq!(got.len(), family.len(), "duplicate family members");
        prop_assert_eq!(got, expected);
        for w in family.windows(2) {
            let key = |m: &minisol::templates::FamilyMember| (m.path.clone(), m.h1.term.size());
            prop_assert!(key(&w[0]) <= key(&w[1]), "family not in canonical order");
        }
    }
}

// Folding literal arithmetic never changes what a program computes.

fn arith() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        3 => (0u64..12).prop_map(|n| e(ExprKind::Nat(BigUint::from(n)))),
        1 => (0u32..2).prop_map(|d| e(ExprKind::Nat(&*MAX_INT - d))),
        2 => prop::sample::select(vec!["p", "q"]).prop_map(|x| e(ExprKind::Var(x.into()))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]), inner.clone(), inner)
            .prop_map(|(op, l, r)| e(ExprKind::Bin(op, Box::new(l), Box::new(r))))
    })
}

proptest! {
    #[test]
    fn folding_preserves_results(x in arith(), p in 0u64..20, q in 0u64..20) {
        let src = format!(
            "contract F {{\n  z : uint;\n  constructor() {{\n    commit 0 to z;\n  }}\n  pure fun f(p : uint, q : uint) -> uint {{\n    return {};\n  }}\n}}",
            print_expr(&x)
        );
        let c = parse_contract(&src).unwrap();
        let run = |c: &minisol::ast::Contract| {
            let it = Interpreter::new(c, []);
            let args = vec![Value::nat(p), Value::nat(q)];
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            it.run_function("f", args, BigUint::from(1u32), &it.zero_store(), &mut rng, &mut NoObserver)
        };
        let original = run(&c);
        match fold_constants(&c) {
            Ok(folded) => prop_assert_eq!(run(&folded), original),
            Err(_) => prop_assert!(
                matches!(original, ExecOutcome::Aborted { .. }) || !original.events().is_empty(),
                "folding rejected a constant that evaluates cleanly"
            ),
        }
    }
}
