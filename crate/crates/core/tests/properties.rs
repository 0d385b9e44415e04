mod common;

use bilag::cherry::{rotation_number, CircleDiffeo, CircleMap, Conjugated, SyntheticCherryMap};
use bilag::expr::{approx_equal, Domain, Expr};
use bilag::geometry::{
    exterior_derivative, is_lagrangian, lie_bracket, pullback_form, pushforward_field, BiLagrangianStructure, Chart,
    DiffeoSpec, DifferentialForm, FoliationFrame, Samples, VectorField,
};
use bilag::hess::{
    compare_tables, hess_connection, hess_verify, pushforward_connection, pushforward_structure, uniqueness_probe,
    HESS_TOL,
};
use bilag::lifts::{
    cotangent_lift_diffeo, lift_field, lift_form, lift_scalar, tautological_and_canonical, LiftKind, LiftedChart,
};
use common::*;
use proptest::prelude::*;

const XY: &[&str] = &["x", "y"];
const PQ: &[&str] = &["p", "q"];
const XYZ: &[&str] = &["x", "y", "z"];

fn plane() -> bilag::geometry::ChartRef {
    Chart::euclidean("R2", XY, -1.0, 1.0)
}

fn field(c: &bilag::geometry::ChartRef, comps: &[String]) -> VectorField {
    VectorField::new(c.clone(), comps.iter().map(|s| p(s)).collect()).unwrap()
}

fn shear(h: &str) -> DiffeoSpec {
    let c = r2();
    DiffeoSpec::new(
        c.clone(),
        c,
        vec![p("p"), p(&format!("q + ({h})"))],
        Some(vec![p("p"), p(&format!("q - ({h})"))]),
    )
    .unwrap()
}

fn is_zero_form(a: &DifferentialForm) -> bool {
    a.terms().all(|(_, c)| same(c, &Expr::zero(), &a.chart.domain, 30))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_central_difference(src in expr_strategy(XY), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = p(&src);
        let names = vec!["x".to_string(), "y".to_string()];
        let h = 1e-4;
        let d = e.diff("x").eval(&names, &[x, y]).unwrap();
        let fd = (e.eval(&names, &[x + h, y]).unwrap() - e.eval(&names, &[x - h, y]).unwrap()) / (2.0 * h);
        let scale = 1.0 + d.abs() + e.eval(&names, &[x, y]).unwrap().abs();
        prop_assert!((d - fd).abs() <= 10.0 * h * h * scale * 100.0, "{src}: {d} vs {fd}");
    }

    #[test]
    fn approx_equal_is_reflexive_and_symmetric(a in expr_strategy(XY), b in expr_strategy(XY)) {
        let dom = Domain::boxed(XY, -1.0, 1.0);
        let (ea, eb) = (p(&a), p(&b));
        prop_assert!(approx_equal(&ea, &ea, &dom, 20, 1e-9).unwrap().equal);
        let ab = approx_equal(&ea, &eb, &dom, 20, 1e-9).unwrap().equal;
        let ba = approx_equal(&eb, &ea, &dom, 20, 1e-9).unwrap().equal;
        prop_assert_eq!(ab, ba);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn d_squared_vanishes(c in prop::collection::vec(expr_strategy(XYZ), 3), f in expr_strategy(XYZ)) {
        let chart = Chart::euclidean("R3", XYZ, -1.0, 1.0);
        let a = DifferentialForm::one_form(&chart, c.iter().map(|s| p(s)).collect()).unwrap();
        prop_assert!(is_zero_form(&exterior_derivative(&exterior_derivative(&a).unwrap()).unwrap()));
        let g = DifferentialForm::function(&chart, p(&f));
        prop_assert!(is_zero_form(&exterior_derivative(&exterior_derivative(&g).unwrap()).unwrap()));
    }

    #[test]
    fn pullback_commutes_with_d(c in prop::collection::vec(expr_strategy(PQ), 2), k in 0usize..3) {
        let (_, map, inv) = SYMPLECTOMORPHISMS[k];
        let ch = r2();
        let psi = DiffeoSpec::new(ch.clone(), ch.clone(), map.iter().map(|s| p(s)).collect(), Some(inv.iter().map(|s| p(s)).collect())).unwrap();
        let a = DifferentialForm::one_form(&ch, c.iter().map(|s| p(s)).collect()).unwrap();
        let lhs = pullback_form(&psi, &exterior_derivative(&a).unwrap()).unwrap();
        let rhs = exterior_derivative(&pullback_form(&psi, &a).unwrap()).unwrap();
        prop_assert!(forms_same(&lhs, &rhs, 30));
    }

    #[test]
    fn pushforward_preserves_brackets(x in prop::collection::vec(expr_strategy(PQ), 2), y in prop::collection::vec(expr_strategy(PQ), 2), h in expr_strategy(&["p"])) {
        let ch = r2();
        let psi = shear(&h);
        let (fx, fy) = (field(&ch, &x), field(&ch, &y));
        let lhs = pushforward_field(&psi, &lie_bracket(&fx, &fy).unwrap()).unwrap();
        let rhs = lie_bracket(&pushforward_field(&psi, &fx).unwrap(), &pushforward_field(&psi, &fy).unwrap()).unwrap();
        prop_assert!(fields_same(&lhs, &rhs, 30));
    }

    #[test]
    fn single_planar_fields_are_lagrangian(a in expr_strategy(PQ), b in expr_strategy(PQ)) {
        let ch = r2();
        let e = VectorField::new(ch.clone(), vec![p(&format!("2 + sin({a})")), p(&b)]).unwrap();
        let f = FoliationFrame::new(ch.clone(), vec![e]).unwrap();
        let r = is_lagrangian(&f, &DifferentialForm::canonical(&ch).unwrap(), Samples::new(20)).unwrap();
        prop_assert!(r.pass && r.max_pairing == 0.0, "{r:?}");
    }
}

/// Random planar structure `(dq∧dp, {∂p + f ∂q}, {g ∂p + ∂q})` with `|f|, |g| ≤ 0.3`.
fn random_structure(f: &str, g: &str) -> BiLagrangianStructure {
    planar_structure(&r2(), "1", &format!("0.3*sin({f})"), &format!("0.3*cos({g})"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hess_connection_verifies(f in expr_strategy(PQ), g in expr_strategy(PQ)) {
        let b = random_structure(&f, &g);
        let h = hess_connection(&b, Samples::new(20)).unwrap();
        let r = hess_verify(&h, &b, Samples::new(30), HESS_TOL).unwrap();
        prop_assert!(r.pass, "{r:?}");
        prop_assert!(h.preserves_halves());
        let probe = uniqueness_probe(&h, &b, Samples::new(30)).unwrap();
        prop_assert!(probe < 1e-6, "probe {probe:e}");
    }

    #[test]
    fn curvature_is_antisymmetric(f in expr_strategy(PQ), g in expr_strategy(PQ)) {
        let b = random_structure(&f, &g);
        let h = hess_connection(&b, Samples::new(20)).unwrap();
        let frame = b.frame();
        for ((i, j, k), r) in h.curvature().unwrap() {
            let (ei, ej, ek) = (&frame[i], &frame[j], &frame[k]);
            let nabla = |x: &VectorField, y: &VectorField| h.combine(&h.covariant_coeffs(x, y));
            let swapped = nabla(ej, &nabla(ei, ek))
                .sub(&nabla(ei, &nabla(ej, ek)))
                .unwrap()
                .sub(&nabla(&lie_bracket(ej, ei).unwrap(), ek))
                .unwrap();
            let neg = r.scale(&Expr::int(-1));
            prop_assert!(fields_same(&swapped, &neg, 20), "R({j},{i}){k}");
        }
    }

    #[test]
    fn connections_push_forward(f in expr_strategy(PQ), g in expr_strategy(PQ), h in expr_strategy(&["p"])) {
        let b = random_structure(&f, &g);
        let psi = shear(&h);
        let pushed = pushforward_connection(&psi, &hess_connection(&b, Samples::new(20)).unwrap()).unwrap();
        let direct = hess_connection(&pushforward_structure(&psi, &b).unwrap(), Samples::new(20)).unwrap();
        prop_assert!(compare_tables(&pushed, &direct, Samples::new(30)).unwrap() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lifted_brackets(x in prop::collection::vec(expr_strategy(XY), 2), y in prop::collection::vec(expr_strategy(XY), 2)) {
        let ch = plane();
        let l = LiftedChart::tangent(&ch).unwrap();
        let (fx, fy) = (field(&ch, &x), field(&ch, &y));
        let c = |v: &VectorField| lift_field(v, LiftKind::Complete, &l).unwrap();
        let lhs = lie_bracket(&c(&fx), &c(&fy)).unwrap();
        prop_assert!(fields_same(&lhs, &c(&lie_bracket(&fx, &fy).unwrap()), 30));
    }

    #[test]
    fn lift_product_rules(f in expr_strategy(XY), g in expr_strategy(XY), x in prop::collection::vec(expr_strategy(XY), 2), a in prop::collection::vec(expr_strategy(XY), 2)) {
        let ch = plane();
        let l = LiftedChart::tangent(&ch).unwrap();
        let dom = &l.chart.domain;
        let (f, g) = (p(&f), p(&g));
        let fx = field(&ch, &x);
        let alpha = DifferentialForm::one_form(&ch, a.iter().map(|s| p(s)).collect()).unwrap();
        let sv = |e: &Expr| lift_scalar(e, LiftKind::Vertical, &l).unwrap();
        let sc = |e: &Expr| lift_scalar(e, LiftKind::Complete, &l).unwrap();
        let fg = &f * &g;
        prop_assert!(same(&sv(&fg), &(&sv(&f) * &sv(&g)), dom, 30));
        prop_assert!(same(&sc(&fg), &(&(&sc(&f) * &sv(&g)) + &(&sv(&f) * &sc(&g))), dom, 30));
        let (xv, xc) = (lift_field(&fx, LiftKind::Vertical, &l).unwrap(), lift_field(&fx, LiftKind::Complete, &l).unwrap());
        let fxs = fx.scale(&f);
        prop_assert!(fields_same(&lift_field(&fxs, LiftKind::Vertical, &l).unwrap(), &xv.scale(&sv(&f)), 30));
        let rule = xv.scale(&sc(&f)).add(&xc.scale(&sv(&f))).unwrap();
        prop_assert!(fields_same(&lift_field(&fxs, LiftKind::Complete, &l).unwrap(), &rule, 30));
        let (av, ac) = (lift_form(&alpha, LiftKind::Vertical, &l).unwrap(), lift_form(&alpha, LiftKind::Complete, &l).unwrap());
        let fa = alpha.scale(&f);
        prop_assert!(forms_same(&lift_form(&fa, LiftKind::Vertical, &l).unwrap(), &av.scale(&sv(&f)), 30));
        let rule = av.scale(&sc(&f)).add(&ac.scale(&sv(&f))).unwrap();
        prop_assert!(forms_same(&lift_form(&fa, LiftKind::Complete, &l).unwrap(), &rule, 30));
    }

    #[test]
    fn lift_pairing(w in expr_strategy(XY), a in prop::collection::vec(expr_strategy(XY), 2), x in prop::collection::vec(expr_strategy(XY), 2), y in prop::collection::vec(expr_strategy(XY), 2)) {
        let ch = plane();
        let l = LiftedChart::tangent(&ch).unwrap();
        let dom = &l.chart.domain;
        let (fx, fy) = (field(&ch, &x), field(&ch, &y));
        let c = |v: &VectorField| lift_field(v, LiftKind::Complete, &l).unwrap();
        let mut omega = DifferentialForm::zero(&ch, 2);
        omega.add_term(&[0, 1], p(&w)).unwrap();
        let wc = lift_form(&omega, LiftKind::Complete, &l).unwrap();
        let lhs = wc.apply(&[&c(&fx), &c(&fy)]).unwrap();
        let rhs = lift_scalar(&omega.apply(&[&fx, &fy]).unwrap(), LiftKind::Complete, &l).unwrap();
        prop_assert!(same(&lhs, &rhs, dom, 30));
        let alpha = DifferentialForm::one_form(&ch, a.iter().map(|s| p(s)).collect()).unwrap();
        let lhs = lift_form(&alpha, LiftKind::Complete, &l).unwrap().apply(&[&c(&fy)]).unwrap();
        let rhs = lift_scalar(&alpha.apply(&[&fy]).unwrap(), LiftKind::Complete, &l).unwrap();
        prop_assert!(same(&lhs, &rhs, dom, 30));
    }

    #[test]
    fn cotangent_lifts_preserve_theta(h in expr_strategy(&["p"]), k in expr_strategy(&["q"])) {
        // (p, q) ↦ (p, q + h(p)) followed by (p, q) ↦ (p + k(q), q).
        let ch = r2();
        let sheared = format!("q + ({h})");
        let map = vec![p(&format!("p + ({})", k.replace('q', &format!("({sheared})")))), p(&sheared)];
        let back_q = format!("q - ({})", h.replace('p', &format!("(p - ({}))", k)));
        let inverse = vec![p(&format!("p - ({k})")), p(&back_q)];
        let psi = DiffeoSpec::new(ch.clone(), ch.clone(), map, Some(inverse)).unwrap();
        prop_assume!(psi.check_inverse(Samples::new(20)).unwrap() < 1e-9);
        let (hat, src, tgt) = cotangent_lift_diffeo(&psi).unwrap();
        let (theta_src, dtheta_src) = tautological_and_canonical(&src).unwrap();
        let (theta_tgt, dtheta_tgt) = tautological_and_canonical(&tgt).unwrap();
        prop_assert!(forms_same(&pullback_form(&hat, &theta_tgt).unwrap(), &theta_src, 30));
        prop_assert!(forms_same(&pullback_form(&hat, &dtheta_tgt).unwrap(), &dtheta_src, 30));
    }
}

struct Standard {
    shift: f64,
    k: f64,
}

impl CircleMap for Standard {
    fn lift(&self, x: f64) -> Option<f64> {
        Some(x + self.shift + self.k * (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI))
    }
}

fn wobble(eps: f64, phase: f64) -> CircleDiffeo {
    CircleDiffeo::new(p(&format!("x + {eps}*sin(2*pi*x + {phase})/(2*pi)")), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conjugation_is_a_left_action(e1 in -0.5f64..0.5, e2 in -0.5f64..0.5, t1 in 0.0f64..6.0, t2 in 0.0f64..6.0, a in 0.1f64..0.4, len in 0.05f64..0.3, c in 0.0f64..1.0) {
        let f = SyntheticCherryMap::new(a, a + len, c, 2.0, 3.0, 1.0).unwrap();
        let (phi1, phi2) = (wobble(e1, t1), wobble(e2, t2));
        let both = phi2.compose(&phi1).unwrap();
        let inner = Conjugated { phi: &phi1, map: &f };
        let twice = Conjugated { phi: &phi2, map: &inner };
        let once = Conjugated { phi: &both, map: &f };
        let mut mismatched = 0;
        for i in 0..200 {
            let x = (i as f64 + 0.5) / 200.0;
            match (twice.lift(x), once.lift(x)) {
                (Some(u), Some(v)) => prop_assert!((u - v).abs() <= 1e-6, "x = {x}: {u} vs {v}"),
                (None, None) => {}
                _ => mismatched += 1,
            }
        }
        prop_assert!(mismatched <= 1);
    }

    #[test]
    fn rotation_number_is_conjugation_invariant(shift in 0.0f64..1.0, k in 0.0f64..0.9, e in -0.5f64..0.5, t in 0.0f64..6.0) {
        let f = Standard { shift, k };
        let phi = wobble(e, t);
        let g = Conjugated { phi: &phi, map: &f };
        // Each orbit average is within 1/n of the rotation number.
        let r1 = rotation_number(&f, None, 20_000).unwrap();
        let r2 = rotation_number(&g, None, 20_000).unwrap();
        prop_assert!((r1.value - r2.value).abs() <= 1e-4, "{} vs {}", r1.value, r2.value);
    }
}
