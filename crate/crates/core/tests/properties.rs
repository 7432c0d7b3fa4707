//! Structural invariants checked on random inputs.

use proptest::prelude::*;
use tchange::foliation::{beta, lift_s, LeafPoint};
use tchange::supath::{pcf_path, quad_cycle, SuLeg, SuPath};
use tchange::{
    Bump, CatSuspension, CoboundaryTerm, FlowModel, LegKind, PhasePoint, TangentVector, TimeChange, TimeChangeSpec,
};

const TOL: f64 = 1e-13;

fn bump() -> TimeChange {
    TimeChange::new(TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap())
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, s)| PhasePoint::new(a, b, s))
}

fn kind() -> impl Strategy<Value = LegKind> {
    prop_oneof![Just(LegKind::Stable), Just(LegKind::Unstable)]
}

fn leg() -> impl Strategy<Value = SuLeg> {
    (kind(), -0.05..0.05f64).prop_map(|(kind, u)| SuLeg { kind, u })
}

fn bumps() -> impl Strategy<Value = Vec<Bump>> {
    let one =
        (0.0..0.1f64, -2i64..=2, -2i64..=2, -3.0..3.0f64).prop_map(|(eps, a, b, phase)| Bump { eps, k: [a, b], phase });
    prop::collection::vec(one, 0..3)
}

fn close(a: &TangentVector, b: &TangentVector, tol: f64) -> bool {
    let scale = 1.0 + a.norm().max(b.norm());
    (a.xi_s - b.xi_s).abs() <= tol * scale
        && (a.xi_u - b.xi_u).abs() <= tol * scale
        && (a.xi_c - b.xi_c).abs() <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn model_flow_is_a_group(p in point(), s in -8.0..8.0f64, t in -8.0..8.0f64) {
        let m = CatSuspension::new();
        prop_assert!(m.dist(&m.flow(&m.flow(&p, s), t), &m.flow(&p, s + t)) <= 1e-12);
        prop_assert!(m.dist(&m.flow(&m.flow(&p, t), -t), &p) <= 1e-12);
    }

    #[test]
    fn model_dflow_is_a_cocycle(p in point(), s in -5.0..5.0f64, t in -5.0..5.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let m = CatSuspension::new();
        let v = TangentVector::new(a, b, 0.3);
        let two = m.dflow(&m.flow(&p, s), m.dflow(&p, v, s), t);
        prop_assert!(close(&two, &m.dflow(&p, v, s + t), 1e-12));
    }

    #[test]
    fn dist_is_symmetric(p in point(), q in point()) {
        let m = CatSuspension::new();
        prop_assert_eq!(m.dist(&p, &q), m.dist(&q, &p));
        prop_assert_eq!(m.dist(&p, &p), 0.0);
    }

    #[test]
    fn alpha_is_a_cocycle(p in point(), s in -5.0..5.0f64, t in -5.0..5.0f64) {
        let tc = bump();
        let q = tc.flow_tau(&p, s, TOL).unwrap();
        let lhs = tc.alpha(&p, t + s, TOL).unwrap().value;
        let rhs = tc.alpha(&p, s, TOL).unwrap().value + tc.alpha(&q, t, TOL).unwrap().value;
        prop_assert!((lhs - rhs).abs() <= 1e-8);
    }

    #[test]
    fn v_and_alpha_are_inverse(p in point(), t in -5.0..5.0f64) {
        let tc = bump();
        let a = tc.alpha(&p, t, TOL).unwrap().value;
        prop_assert!((tc.v_cocycle(&p, a, TOL).unwrap().value - t).abs() <= 1e-8);
        let v = tc.v_cocycle(&p, t, TOL).unwrap().value;
        prop_assert!((tc.alpha(&p, v, TOL).unwrap().value - t).abs() <= 1e-8);
    }

    #[test]
    fn alpha_is_increasing_and_bracketed(p in point(), t in 0.01..5.0f64, dt in 0.01..1.0f64) {
        let tc = bump();
        let a = tc.alpha(&p, t, TOL).unwrap().value;
        prop_assert!(tc.alpha(&p, t + dt, TOL).unwrap().value > a);
        let slack = 1e-12;
        prop_assert!(a >= t / tc.tau_max() - slack && a <= t / tc.tau_min() + slack);
        let b = tc.alpha(&p, -t, TOL).unwrap().value;
        prop_assert!(b <= -t / tc.tau_max() + slack && b >= -t / tc.tau_min() - slack);
    }

    #[test]
    fn time_changed_flow_is_a_group(c0 in 1.0..2.0f64, extra in bumps(), p in point(), s in -4.0..4.0f64, t in -4.0..4.0f64) {
        let tc = TimeChange::new(TimeChangeSpec::new(c0, extra, vec![]).unwrap());
        let m = tc.model();
        let two = tc.flow_tau(&tc.flow_tau(&p, s, TOL).unwrap(), t, TOL).unwrap();
        prop_assert!(m.dist(&two, &tc.flow_tau(&p, s + t, TOL).unwrap()) <= 1e-8);
    }

    #[test]
    fn density_is_bracketed(c0 in 1.0..2.0f64, extra in bumps(), p in point()) {
        let tc = TimeChange::new(TimeChangeSpec::new(c0, extra, vec![]).unwrap());
        let d = tc.density(&p);
        prop_assert!(d >= tc.tau_min() / tc.tau0() - 1e-12 && d <= tc.tau_max() / tc.tau0() + 1e-12);
    }

    #[test]
    fn beta_is_additive_along_a_leaf(p in point(), k in kind(), u1 in -0.05..0.05f64, u2 in -0.05..0.05f64) {
        let tc = bump();
        let b = |x: PhasePoint, u: f64| beta(&tc, &LeafPoint::new(x, k, u).unwrap(), TOL).unwrap().value;
        let y = tc.model().leg(&p, k, u1);
        prop_assert!((b(p, u1 + u2) - b(p, u1) - b(y, u2)).abs() <= 1e-10);
    }

    #[test]
    fn pcf_is_odd_under_reversal(p in point(), legs in prop::collection::vec(leg(), 1..5)) {
        let tc = bump();
        let path = SuPath::new(p, legs).unwrap();
        let there = pcf_path(&tc, &path, TOL).unwrap();
        let back = pcf_path(&tc, &path.reversed(tc.model()), TOL).unwrap();
        prop_assert!((there + back).abs() <= 1e-11);
    }

    #[test]
    fn quadrilaterals_close(p in point(), u in -0.1..0.1f64, v in -0.1..0.1f64) {
        let m = CatSuspension::new();
        let q = quad_cycle(p, u, v).unwrap();
        prop_assert!(q.is_cycle(&m));
        prop_assert_eq!(q.legs().len(), 4);
    }

    #[test]
    fn cycle_pcf_ignores_coboundary_terms(p in point(), u in -0.08..0.08f64, v in -0.08..0.08f64, amp in 0.0..0.05f64, a in -2i64..=2, phase in -3.0..3.0f64) {
        let plain = TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap();
        let with = TimeChangeSpec::new(1.0, plain.bumps().to_vec(), vec![CoboundaryTerm { amp, k: [a, 1], phase }]).unwrap();
        let cycle = quad_cycle(p, u, v).unwrap();
        let x = pcf_path(&TimeChange::new(plain), &cycle, TOL).unwrap();
        let y = pcf_path(&TimeChange::new(with), &cycle, TOL).unwrap();
        prop_assert!((x - y).abs() <= 1e-10, "{} vs {}", x, y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    /// `Dg^tau_T L_x e_s = lambda^-n L_y e_s` with `n` the roof crossings and
    /// `|n - alpha| <= 1`, so the stable exponent tracks `-log(lambda) alpha`
    /// up to one crossing and the lift distortion at both ends.
    #[test]
    fn stable_exponent_stays_linked_to_alpha(p in point(), t in 5.0..20.0f64) {
        let tc = bump();
        let m = tc.model();
        let (alpha, y) = tc.alpha_and_point(&p, t, TOL).unwrap();
        let lx = lift_s(&tc, &p, TangentVector::stable(), TOL).unwrap();
        let ly = lift_s(&tc, &y, TangentVector::stable(), TOL).unwrap();
        let nu = tc.dflow_tau(&p, lx, t, TOL).unwrap().norm() / lx.norm();
        let n = m.crossings(&p, alpha.value) as f64;
        let distortion = (ly.norm() / lx.norm()).ln();
        let log_lambda = m.log_lambda();
        // the image's flow component carries absolute rounding near 1e-15.
        prop_assert!((nu.ln() + n * log_lambda - distortion).abs() <= 1e-5);
        prop_assert!((n - alpha.value).abs() <= 1.0);
        prop_assert!((nu.ln() + log_lambda * alpha.value).abs() <= log_lambda + distortion.abs() + 1e-5);
    }
}
