#![allow(dead_code)]

use std::path::PathBuf;

use bilag::expr::{approx_equal, parse, Domain, Expr, SYMBOLIC_TOL};
use bilag::geometry::{BiLagrangianStructure, Chart, ChartRef, DifferentialForm, FoliationFrame, VectorField};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn p(s: &str) -> Expr {
    parse(s).unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

pub fn r2() -> ChartRef {
    Chart::euclidean("R2", &["p", "q"], -1.0, 1.0)
}

/// Polynomial/trig expression over `vars`, as source text.
pub fn expr_strategy(vars: &'static [&'static str]) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vars.to_vec()).prop_map(str::to_string),
        (-3i32..=3).prop_map(|c| format!("({c})")),
        (1u32..=9).prop_map(|c| format!("0.{c}")),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

/// Seeded counterpart of [`expr_strategy`].
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => vars[rng.gen_range(0..vars.len())].to_string(),
            1 => format!("({})", rng.gen_range(-3..=3)),
            _ => format!("0.{}", rng.gen_range(1..=9)),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, vars, depth - 1);
    match rng.gen_range(0..6) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 => format!("({})*({})", sub(rng), sub(rng)),
        3 => format!("sin({})", sub(rng)),
        4 => format!("cos({})", sub(rng)),
        _ => format!("({})^2", sub(rng)),
    }
}

pub fn same(a: &Expr, b: &Expr, dom: &Domain, samples: usize) -> bool {
    approx_equal(a, b, dom, samples, SYMBOLIC_TOL).unwrap().equal
}

pub fn assert_same(a: &Expr, b: &Expr, dom: &Domain, samples: usize, what: &str) {
    let c = approx_equal(a, b, dom, samples, SYMBOLIC_TOL).unwrap();
    assert!(c.equal, "{what}: {a} vs {b} (error {:e} at {:?})", c.max_scaled_error, c.witness);
}

pub fn fields_same(a: &VectorField, b: &VectorField, samples: usize) -> bool {
    a.comps.iter().zip(&b.comps).all(|(x, y)| same(x, y, &a.chart.domain, samples))
}

pub fn forms_same(a: &DifferentialForm, b: &DifferentialForm, samples: usize) -> bool {
    let mut keys: Vec<Vec<usize>> = a.terms().map(|(k, _)| k.clone()).collect();
    keys.extend(b.terms().map(|(k, _)| k.clone()));
    keys.iter().all(|k| same(&a.component(k), &b.component(k), &a.chart.domain, samples))
}

/// `(dq∧dp, {a ∂p + f ∂q}, {g ∂p + ∂q})`; bi-Lagrangian whenever `a ≠ f g`.
pub fn planar_structure(c: &ChartRef, a: &str, f: &str, g: &str) -> BiLagrangianStructure {
    BiLagrangianStructure::new(
        DifferentialForm::canonical(c).unwrap(),
        FoliationFrame::new(c.clone(), vec![VectorField::new(c.clone(), vec![p(a), p(f)]).unwrap()]).unwrap(),
        FoliationFrame::new(c.clone(), vec![VectorField::new(c.clone(), vec![p(g), p("1")]).unwrap()]).unwrap(),
    )
    .unwrap()
}

/// The three nonlinear symplectomorphisms of `(ℝ², dq∧dp)` with inverses.
pub const SYMPLECTOMORPHISMS: [(&str, [&str; 2], [&str; 2]); 3] = [
    ("quadratic shear", ["p", "q + p^2"], ["p", "q - p^2"]),
    ("sine shear", ["p + sin(q)", "q"], ["p - sin(q)", "q"]),
    (
        "composite",
        ["p + q^3", "q + (p + q^3)^2"],
        ["p - (q - p^2)^3", "q - p^2"],
    ),
];
