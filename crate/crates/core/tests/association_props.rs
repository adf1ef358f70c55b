use colombeau::association::{evaluate, sweep, verify_case, SweepPlan, Verdict};
use colombeau::expr::{compile, parse};
use colombeau::mollifier::Mollifier;
use colombeau::testfn::{catalog, psi_b};

fn rep(src: &str) -> colombeau::representatives::Representative {
    compile(&parse(src).unwrap(), &Mollifier::default()).unwrap()
}

#[test]
fn sweeps_are_linear() {
    let plan = SweepPlan::geometric(2f64.powi(-3), 2f64.powi(-10), 0.5).unwrap();
    let psis = catalog();
    let a = sweep(&rep("Xm^-2 * H"), &psis, &plan).unwrap();
    let b = sweep(&rep("LnP * D'"), &psis, &plan).unwrap();
    let ab = sweep(&rep("Xm^-2 * H - 3 LnP * D'"), &psis, &plan).unwrap();
    for ((sa, sb), sab) in a.iter().zip(&b).zip(&ab) {
        for ((pa, pb), pab) in sa.iter().zip(sb).zip(sab) {
            let want = pa.value - 3.0 * pb.value;
            let slack = pa.error
                + 3.0 * pb.error
                + pab.error
                + 1e-12 * (pa.value.norm() + 3.0 * pb.value.norm());
            assert!(
                (pab.value - want).norm() <= slack,
                "sigma {}: {} vs {}",
                pa.sigma,
                pab.value,
                want
            );
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let plan = SweepPlan::default();
    let first = verify_case("COR2", &Mollifier::default(), &catalog(), &plan).unwrap();
    let second = verify_case("COR2", &Mollifier::default(), &catalog(), &plan).unwrap();
    assert_eq!(first, second);
}

#[test]
fn verdicts_are_stable_under_grid_and_tolerance_changes() {
    let psis = [psi_b()];
    let plans = [
        SweepPlan::default(),
        SweepPlan::geometric(2f64.powi(-4), 2f64.powi(-11), 0.5).unwrap(),
        SweepPlan::geometric(2f64.powi(-5), 2f64.powi(-12), 0.5).unwrap(),
        SweepPlan::default().with_tol(1e-10),
    ];
    for (expr, divergent) in [
        ("Xm^-2 * H - LnP * D'", false),
        ("Xp^1 * D'''' + H * D'''", false),
        ("LnP * D'", true),
    ] {
        let verdicts: Vec<Verdict> = plans
            .iter()
            .map(|p| {
                evaluate(expr, None, &Mollifier::default(), &psis, p)
                    .unwrap()
                    .remove(0)
                    .verdict
            })
            .collect();
        for v in &verdicts {
            assert_eq!(v.is_divergent(), divergent, "{expr}: {v}");
        }
        if !divergent {
            let l0 = verdicts[0].limit().unwrap();
            for v in &verdicts[1..] {
                let l = v.limit().unwrap_or_else(|| panic!("{expr}: {v}"));
                assert!((l - l0).norm() < 1e-3 * l0.norm(), "{expr}: {l} vs {l0}");
            }
        }
    }
}

#[test]
fn reflection_with_the_wrong_sign_is_not_associated() {
    // x -> -x maps H.D''' to -Hc.D'''; keeping "+" does not converge
    let r = evaluate(
        "Xm^1 * D'''' + Hc * D'''",
        None,
        &Mollifier::default(),
        &[psi_b()],
        &SweepPlan::default(),
    )
    .unwrap()
    .remove(0);
    assert!(r.verdict.limit().is_none(), "{}", r.verdict);
}

#[test]
fn unbalanced_factors_diverge_and_the_target_is_reported() {
    let psis = catalog();
    let reports = evaluate(
        "Xm^-2 * H",
        Some("-D"),
        &Mollifier::default(),
        &psis,
        &SweepPlan::default(),
    )
    .unwrap();
    for r in reports {
        assert!(r.verdict.is_divergent(), "{}", r.verdict);
        let t = r.target.unwrap();
        assert_eq!(t.expression, "-D");
        assert!(t.rel.is_infinite());
    }
}
