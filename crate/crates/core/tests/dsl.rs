mod common;

use common::{dsl_golden, Golden, GOLDEN_BINDING};
use nslab::dsl::{parse, BinOp, Bindings, Expr, Func, Var};
use proptest::prelude::*;

#[test]
fn golden_suite() {
    let (x, t, xi, chi) = GOLDEN_BINDING;
    let b = Bindings::xt(x, t).with_xi(xi).with_chi(chi);
    let cases = dsl_golden();
    assert_eq!(cases.len(), 20);
    assert_eq!(cases.iter().filter(|c| matches!(c.1, Golden::Error(_))).count(), 5);
    for (src, want) in cases {
        match (want, parse(src)) {
            (Golden::Value(v), Ok(e)) => {
                let got = e.eval(&b).unwrap();
                assert!((got - v).abs() <= 1e-14 * v.abs().max(1.0), "{src}: {got} vs {v}");
            }
            (Golden::Error(msg), Err(e)) => assert_eq!(e.to_string(), msg, "{src}"),
            (_, r) => panic!("{src}: unexpected {r:?}"),
        }
    }
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..4000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        prop_oneof![Just(Var::X), Just(Var::T), Just(Var::Xi), Just(Var::Chi)].prop_map(Expr::Var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 3, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let f1 = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Ln),
            Just(Func::Abs),
            Just(Func::Frac),
            Just(Func::Step)
        ];
        let f2 = prop_oneof![Just(Func::Min), Just(Func::Max)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::bin(o, a, b)),
            (f1, inner.clone()).prop_map(|(f, a)| Expr::call(f, vec![a])),
            (f2, inner.clone(), inner).prop_map(|(f, a, b)| Expr::call(f, vec![a, b])),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_round_trip(e in expr()) {
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e, "{}", printed);
    }

    #[test]
    fn evaluation_is_pure(e in expr(), x in 0.0f64..1.0, t in 0.0f64..1.0, xi in 0.0f64..1.0, chi in -1.0f64..1.0) {
        let b = Bindings::xt(x, t).with_xi(xi).with_chi(chi);
        let first = e.eval(&b);
        let noise = parse("sin(x)*t").unwrap().eval(&Bindings::xt(0.3, 0.2));
        let second = e.eval(&b);
        prop_assert!(noise.is_ok());
        match (first, second) {
            (Ok(a), Ok(c)) => prop_assert_eq!(a.to_bits(), c.to_bits()),
            (a, c) => prop_assert_eq!(a, c),
        }
    }

    #[test]
    fn substitution_matches_binding(e in expr(), x in 0.0f64..1.0, xi in 0.0f64..1.0) {
        let s = e.substitute(Var::Xi, &Expr::Num(xi));
        prop_assert!(!s.uses(Var::Xi));
        let b = Bindings::xt(x, 0.5).with_chi(0.25);
        match (e.eval(&b.with_xi(xi)), s.eval(&b)) {
            (Ok(a), Ok(c)) => prop_assert_eq!(a.to_bits(), c.to_bits()),
            (a, c) => prop_assert_eq!(a.is_err(), c.is_err()),
        }
    }
}
