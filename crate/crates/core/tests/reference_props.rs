use colombeau::reference::{eval_reference, RefAtom, ReferenceDistribution};
use colombeau::testfn::{catalog, TestFunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn ev(u: &ReferenceDistribution, psi: &TestFunction) -> Complex64 {
    eval_reference(u, psi).unwrap()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

#[test]
fn x_neg_splits_into_half_lines() {
    for psi in catalog() {
        for p in 1..=3 {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let whole = ev(&ReferenceDistribution::x_neg(p).unwrap(), &psi);
            let plus = ev(&ReferenceDistribution::xplus_neg(p).unwrap(), &psi);
            let minus = ev(&ReferenceDistribution::xminus_neg(p).unwrap(), &psi);
            assert!(
                close(whole, plus + sign * minus, 1e-12),
                "p={p} {}",
                psi.name()
            );
            let sgn = ev(&ReferenceDistribution::x_neg_sgn(p).unwrap(), &psi);
            assert!(
                close(sgn, plus - sign * minus, 1e-12),
                "p={p} {}",
                psi.name()
            );
        }
    }
}

#[test]
fn i0_combinations_differ_by_delta_terms() {
    let pi = std::f64::consts::PI;
    for psi in catalog() {
        let d = psi.derivatives_at_zero();
        let x2 = ev(&ReferenceDistribution::x_neg(2).unwrap(), &psi);
        let up = ev(&ReferenceDistribution::x_i0(2, true).unwrap(), &psi);
        let down = ev(&ReferenceDistribution::x_i0(2, false).unwrap(), &psi);
        // (x ± i0)^-2 = x^-2 ± iπ δ'
        assert!(close(up, x2 - Complex64::new(0.0, pi * d[1]), 1e-12));
        assert!(close(down, x2 + Complex64::new(0.0, pi * d[1]), 1e-12));
        let x1 = ev(&ReferenceDistribution::x_neg(1).unwrap(), &psi);
        let up1 = ev(&ReferenceDistribution::x_i0(1, true).unwrap(), &psi);
        assert!(close(up1, x1 - Complex64::new(0.0, pi * d[0]), 1e-12));
    }
}

fn poly() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 1..5)
}

fn atom() -> impl Strategy<Value = RefAtom> {
    prop_oneof![
        (0usize..3).prop_map(RefAtom::Delta),
        (1usize..3).prop_map(RefAtom::XPlusNeg),
        (1usize..3).prop_map(RefAtom::XMinusNeg),
        (1usize..3).prop_map(RefAtom::XNeg),
        Just(RefAtom::LnAbs),
        Just(RefAtom::LnPlus),
        Just(RefAtom::Theta),
        Just(RefAtom::ThetaCheck),
        (-0.5..2.0f64).prop_map(RefAtom::XPlusPow),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mirror_matches_reflected_test_function(p in 1usize..4, c in poly()) {
        let psi = TestFunction::new("p", c, 4.0).unwrap();
        let minus = ev(&ReferenceDistribution::xminus_neg(p).unwrap(), &psi);
        let plus = ev(&ReferenceDistribution::xplus_neg(p).unwrap(), &psi.mirrored());
        prop_assert!(close(minus, plus, 1e-10));
    }

    #[test]
    fn linear_in_terms(a in atom(), b in atom(), ca in -3.0..3.0f64, cb in -3.0..3.0f64, ci in -1.0..1.0f64) {
        let psi = catalog().remove(2);
        let (za, zb) = (Complex64::new(ca, ci), Complex64::new(cb, 0.0));
        let u = ReferenceDistribution::term(za, a).unwrap() + ReferenceDistribution::term(zb, b).unwrap();
        let split = za * ev(&ReferenceDistribution::atom(a).unwrap(), &psi)
            + zb * ev(&ReferenceDistribution::atom(b).unwrap(), &psi);
        prop_assert!(close(ev(&u, &psi), split, 1e-12));
    }

    #[test]
    fn linear_in_psi(a in atom(), p in poly(), q in poly(), s in -2.0..2.0f64) {
        let n = p.len().max(q.len());
        let sum: Vec<f64> = (0..n)
            .map(|i| p.get(i).copied().unwrap_or(0.0) + s * q.get(i).copied().unwrap_or(0.0))
            .collect();
        let u = ReferenceDistribution::atom(a).unwrap();
        let lhs = ev(&u, &TestFunction::new("s", sum, 4.0).unwrap());
        let rhs = ev(&u, &TestFunction::new("p", p, 4.0).unwrap())
            + s * ev(&u, &TestFunction::new("q", q, 4.0).unwrap());
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }
}
