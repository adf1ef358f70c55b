use colombeau::association::catalog;
use colombeau::expr::{compile, parse, Coeff, Expr, Symbol};
use colombeau::mollifier::Mollifier;
use num_rational::Ratio;
use proptest::prelude::*;

fn symbol() -> impl Strategy<Value = Symbol> {
    let exponent = prop_oneof![
        (-3i64..4).prop_map(Ratio::from_integer),
        (1i64..7, 2i64..5).prop_map(|(n, d)| Ratio::new(n, d)),
    ];
    prop_oneof![
        (0usize..=4).prop_map(Symbol::D),
        Just(Symbol::H),
        Just(Symbol::Hc),
        exponent.clone().prop_map(Symbol::Xp),
        exponent.prop_map(Symbol::Xm),
        (1usize..4).prop_map(Symbol::X),
        (1usize..4).prop_map(Symbol::Xsgn),
        Just(Symbol::LnP),
        Just(Symbol::LnM),
        Just(Symbol::LnAbs),
        Just(Symbol::LnSgn),
        (1usize..4).prop_map(Symbol::Xi0p),
        (1usize..4).prop_map(Symbol::Xi0m),
    ]
}

fn coeff() -> impl Strategy<Value = Coeff> {
    (-9i64..10, 1i64..7, any::<bool>(), 0u32..3).prop_map(|(n, d, i, pi)| Coeff {
        ratio: Ratio::new(n, d),
        i,
        pi,
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    symbol()
        .prop_map(Expr::Atom)
        .prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                (coeff(), inner.clone()).prop_map(|(c, e)| Expr::scale(c, e)),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Product),
                prop::collection::vec(inner, 2..4).prop_map(Expr::Sum),
            ]
        })
}

#[test]
fn catalog_expressions_roundtrip() {
    for case in catalog() {
        for v in &case.variants {
            let e = parse(v.expr).unwrap();
            assert_eq!(parse(&e.print()).unwrap(), e, "{}", v.expr);
            if let Some(t) = v.target {
                let e = parse(t).unwrap();
                assert_eq!(parse(&e.print()).unwrap(), e, "{t}");
            }
        }
    }
}

/// Expressions cheap enough to compile and evaluate pointwise many times.
fn operand() -> impl Strategy<Value = Expr> {
    let atom = prop_oneof![
        (0usize..=3).prop_map(Symbol::D),
        Just(Symbol::H),
        Just(Symbol::Hc),
        Just(Symbol::Xp(Ratio::from_integer(1))),
        Just(Symbol::Xm(Ratio::new(1, 2))),
        Just(Symbol::X(2)),
        Just(Symbol::LnAbs),
        Just(Symbol::Xi0m(1)),
    ]
    .prop_map(Expr::Atom);
    prop_oneof![
        atom.clone(),
        (coeff(), atom.clone()).prop_map(|(c, e)| Expr::scale(c, e)),
        prop::collection::vec(atom, 2..3).prop_map(Expr::Product),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(e in expr()) {
        let text = e.print();
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("`{text}`: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn compile_is_additive(a in operand(), b in operand(), s in 1e-3..0.5f64, x in -2.0..2.0f64) {
        let m = Mollifier::default();
        let sum = compile(&Expr::Sum(vec![a.clone(), b.clone()]), &m).unwrap();
        let (ra, rb) = (compile(&a, &m).unwrap(), compile(&b, &m).unwrap());
        let lhs = sum.eval(s, x).unwrap();
        let (va, vb) = (ra.eval(s, x).unwrap(), rb.eval(s, x).unwrap());
        let scale = va.norm().max(vb.norm()).max(1.0);
        prop_assert!((lhs - (va + vb)).norm() <= 1e-12 * scale, "{} + {}: {} vs {}", a.print(), b.print(), lhs, va + vb);
    }
}
