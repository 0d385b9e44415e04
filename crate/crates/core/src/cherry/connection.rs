use serde::Serialize;

use crate::expr::{Compiled, Expr};
use crate::geometry::{BiLagrangianStructure, ChartRef, DifferentialForm, FoliationFrame, Samples, VectorField};
use crate::hess::{hess_connection, hess_verify, ConnectionTable, HessReport};

use super::field::{CherryField, PlanarField};
use super::return_map::{first_return_map, ReturnOptions};
use super::CherryError;

/// Radius of the disks removed around the singularities.
pub const EXCLUSION_RADIUS: f64 = 0.05;
const SING_MATCH_TOL: f64 = 1e-6;
const TRANSVERSAL_TOL: f64 = 1e-8;
const CHERRY_HESS_TOL: f64 = 1e-6;
const SAME_MAP_TOL: f64 = 1e-3;
const CONNECTION_TOL: f64 = 1e-3;

/// Hess connection of a transversal pair `(X, Y)` on the punctured torus with
/// `ω = dx∧dy`, and its restriction to the circle `y = circle_y`.
#[derive(Debug, Clone, Serialize)]
pub struct CherryConnection {
    #[serde(skip)]
    pub table: ConnectionTable,
    pub report: HessReport,
    pub circle_y: f64,
    pub xs: Vec<f64>,
    /// `[Γ^X_XX, Γ^X_YX, Γ^Y_XY, Γ^Y_YY]` in the frame `(X, Y)`; the other
    /// four vanish because both foliations are preserved.
    pub frame_coefficients: Vec<[f64; 4]>,
    /// Coordinate Christoffel symbols `Γ[i][j][k]` with `∇_{∂i}∂j = Γ[i][j][k] ∂k`.
    pub christoffel: Vec<[[[f64; 2]; 2]; 2]>,
}

fn check_singularities(x: &CherryField, y: &CherryField) -> Result<Vec<[f64; 2]>, CherryError> {
    let (sx, sy) = (x.singularities(), y.singularities());
    let close = |a: [f64; 2], b: [f64; 2]| {
        a.iter().zip(&b).all(|(u, v)| {
            let d = (u - v).rem_euclid(1.0);
            d.min(1.0 - d) <= SING_MATCH_TOL
        })
    };
    if sx.len() != sy.len() || !sx.iter().all(|s| sy.iter().any(|t| close(s.location, t.location))) {
        return Err(CherryError::Precondition(format!(
            "singularities differ: {:?} vs {:?}",
            sx.iter().map(|s| s.location).collect::<Vec<_>>(),
            sy.iter().map(|s| s.location).collect::<Vec<_>>()
        )));
    }
    Ok(sx.iter().map(|s| s.location).collect())
}

fn punctured(zeros: &[[f64; 2]]) -> ChartRef {
    CherryField::torus().punctured("T2*", zeros.iter().map(|z| (z.to_vec(), EXCLUSION_RADIUS)).collect())
}

/// Builds the Hess connection of `(F_X, F_Y)` and samples it on `S¹×{circle_y}`.
pub fn cherry_pair_hess(
    x: &CherryField,
    y: &CherryField,
    circle_y: f64,
    grid: usize,
    samples: Samples,
) -> Result<CherryConnection, CherryError> {
    let zeros = check_singularities(x, y)?;
    let chart = punctured(&zeros);
    let xs: Vec<f64> = (0..grid).map(|k| k as f64 / grid as f64).collect();
    if let Some(p) = xs.iter().find(|&&s| chart.is_excluded(&[s, circle_y])) {
        return Err(CherryError::Precondition(format!(
            "circle y = {circle_y} meets an excluded disk at x = {p}"
        )));
    }
    let n = 64;
    for k in 0..n * n {
        let p = [(k % n) as f64 / n as f64, (k / n) as f64 / n as f64];
        if chart.is_excluded(&p) {
            continue;
        }
        let (u, v) = (x.eval(p), y.eval(p));
        let det = u[0] * v[1] - u[1] * v[0];
        if !(det.abs() > TRANSVERSAL_TOL) {
            return Err(CherryError::Precondition(format!("X and Y are not transversal at {p:?} (det = {det:e})")));
        }
    }
    let xf = VectorField::new(chart.clone(), x.field.comps.clone())?;
    let yf = VectorField::new(chart.clone(), y.field.comps.clone())?;
    let mut omega = DifferentialForm::zero(&chart, 2);
    omega.add_term(&[0, 1], Expr::one())?;
    let b = BiLagrangianStructure::new(
        omega,
        FoliationFrame::new(chart.clone(), vec![xf])?,
        FoliationFrame::new(chart.clone(), vec![yf])?,
    )?;
    let table = hess_connection(&b, samples)?;
    let report = hess_verify(&table, &b, samples, CHERRY_HESS_TOL)?;
    let g = &table.gamma;
    let mut exprs = vec![g[0][0][0].clone(), g[1][0][0].clone(), g[0][1][1].clone(), g[1][1][1].clone()];
    for i in 0..2 {
        for j in 0..2 {
            let di = VectorField::coordinate(&chart, i);
            let dj = VectorField::coordinate(&chart, j);
            exprs.extend(table.combine(&table.covariant_coeffs(&di, &dj)).comps);
        }
    }
    let tape = Compiled::new(&exprs, chart.coords())?;
    let mut frame_coefficients = Vec::with_capacity(grid);
    let mut christoffel = Vec::with_capacity(grid);
    for &s in &xs {
        let v = tape.eval(&[s, circle_y])?;
        frame_coefficients.push([v[0], v[1], v[2], v[3]]);
        let mut c = [[[0.0; 2]; 2]; 2];
        for (idx, val) in v[4..].iter().enumerate() {
            c[idx / 4][(idx / 2) % 2][idx % 2] = *val;
        }
        christoffel.push(c);
    }
    Ok(CherryConnection {
        table,
        report,
        circle_y,
        xs,
        frame_coefficients,
        christoffel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateOutcome {
    pub index: usize,
    /// Why the candidate was left out of the comparison.
    pub excluded: Option<String>,
    pub map_distance: f64,
    /// Depends on the generators, not only on the foliations.
    pub frame_distance: Option<f64>,
    pub christoffel_distance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellDefinednessReport {
    pub circle_y: f64,
    pub tol: f64,
    pub candidates: Vec<CandidateOutcome>,
}

fn sup<const N: usize>(a: &[[f64; N]], b: &[[f64; N]]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// For candidate pairs generating the same return map as the reference, the
/// sup distance between circle-restricted connection coefficients. This is
/// sample evidence only.
pub fn well_definedness_sample(
    candidates: &[(&CherryField, &CherryField)],
    reference: (&CherryField, &CherryField),
    circle_y: f64,
    grid: usize,
    opts: ReturnOptions,
    samples: Samples,
) -> Result<WellDefinednessReport, CherryError> {
    let ref_map = first_return_map(reference.0, grid, opts)?;
    let ref_conn = cherry_pair_hess(reference.0, reference.1, circle_y, grid, samples)?;
    let flat_chr = |c: &CherryConnection| -> Vec<[f64; 8]> {
        c.christoffel
            .iter()
            .map(|t| {
                let mut o = [0.0; 8];
                for (k, v) in t.iter().flatten().flatten().enumerate() {
                    o[k] = *v;
                }
                o
            })
            .collect()
    };
    let ref_chr = flat_chr(&ref_conn);
    let mut out = Vec::with_capacity(candidates.len());
    for (index, (cx, cy)) in candidates.iter().enumerate() {
        let excluded = |reason: String, map_distance: f64| CandidateOutcome {
            index,
            excluded: Some(reason),
            map_distance,
            frame_distance: None,
            christoffel_distance: None,
            pass: None,
        };
        let map = match first_return_map(cx, grid, opts) {
            Ok(m) => m,
            Err(e) => {
                out.push(excluded(format!("return map failed: {e}"), f64::INFINITY));
                continue;
            }
        };
        let map_distance = ref_map
            .xs
            .iter()
            .map(|&s| match (ref_map.total(s), map.total(s)) {
                (Some(u), Some(v)) => {
                    let d = (u - v).rem_euclid(1.0);
                    d.min(1.0 - d)
                }
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        if !(map_distance <= SAME_MAP_TOL) {
            out.push(excluded(format!("generates a different map (distance {map_distance:e})"), map_distance));
            continue;
        }
        let conn = match cherry_pair_hess(cx, cy, circle_y, grid, samples) {
            Ok(c) => c,
            Err(e) => {
                out.push(excluded(format!("connection failed: {e}"), map_distance));
                continue;
            }
        };
        let christoffel_distance = sup(&flat_chr(&conn), &ref_chr);
        out.push(CandidateOutcome {
            index,
            excluded: None,
            map_distance,
            frame_distance: Some(sup(&conn.frame_coefficients, &ref_conn.frame_coefficients)),
            christoffel_distance: Some(christoffel_distance),
            pass: Some(christoffel_distance <= CONNECTION_TOL),
        });
    }
    Ok(WellDefinednessReport {
        circle_y,
        tol: CONNECTION_TOL,
        candidates: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cherry::{make_cherry_field, CherryParams};
    use crate::expr::parse;

    fn field(u: &str, v: &str) -> CherryField {
        CherryField::from_field(VectorField::new(CherryField::torus(), vec![parse(u).unwrap(), parse(v).unwrap()]).unwrap())
            .unwrap()
    }

    #[test]
    fn constant_pair_is_flat() {
        let c = cherry_pair_hess(&field("1", "0.3"), &field("1", "0.7"), 0.0, 32, Samples::new(20)).unwrap();
        assert!(c.report.pass);
        assert!(c.frame_coefficients.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn shear_pair_matches_hand_solution() {
        // X = ∂x, Y = g∂x + ∂y with g = sin(2πx): [X, Y] = g'∂x = g' X, and
        // ω(X, Y) = 1, so ∇_X Y = 0, ∇_Y X = −g' X, ∇_X X = 0, ∇_Y Y = g' Y.
        let c = cherry_pair_hess(&field("1", "0"), &field("sin(2*pi*x)", "1"), 0.25, 16, Samples::new(20)).unwrap();
        assert!(c.report.pass);
        for (s, v) in c.xs.iter().zip(&c.frame_coefficients) {
            let gp = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * s).cos();
            assert!(v[0].abs() < 1e-9 && (v[1] + gp).abs() < 1e-9 && v[2].abs() < 1e-9 && (v[3] - gp).abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn default_pair_verifies() {
        let x = make_cherry_field(CherryParams::default()).unwrap();
        let y = make_cherry_field(CherryParams { tilt: 0.3, ..Default::default() }).unwrap();
        let c = cherry_pair_hess(&x, &y, 0.0, 64, Samples::new(30)).unwrap();
        assert!(c.report.pass, "{:?}", c.report);
        assert!(cherry_pair_hess(&x, &x, 0.0, 64, Samples::new(30)).is_err());
        assert!(matches!(cherry_pair_hess(&x, &y, 0.5, 64, Samples::new(30)), Err(CherryError::Precondition(_))));
    }

    #[test]
    fn rescaled_generator_keeps_the_connection() {
        let x = make_cherry_field(CherryParams::default()).unwrap();
        let y = make_cherry_field(CherryParams { tilt: 0.3, ..Default::default() }).unwrap();
        let x2 = x.scaled(2.0).unwrap();
        let y5 = make_cherry_field(CherryParams { tilt: 0.5, ..Default::default() }).unwrap();
        let other = make_cherry_field(CherryParams { alpha: 0.4, ..Default::default() }).unwrap();
        let r = well_definedness_sample(
            &[(&x2, &y), (&other, &y)],
            (&x, &y),
            0.4,
            64,
            ReturnOptions::default(),
            Samples::new(20),
        )
        .unwrap();
        let c = &r.candidates[0];
        assert!(c.christoffel_distance.unwrap() < 1e-9 && c.frame_distance.unwrap() > 1.0, "{c:?}");
        assert_eq!(c.pass, Some(true));
        assert!(r.candidates[1].excluded.is_some());
        let r = well_definedness_sample(&[(&x, &y5)], (&x, &y), 0.4, 64, ReturnOptions::default(), Samples::new(20)).unwrap();
        assert_eq!(r.candidates[0].pass, Some(false));
    }
}
