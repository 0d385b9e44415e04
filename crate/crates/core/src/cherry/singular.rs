use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::field::PlanarField;
use super::CherryError;

const GRID: usize = 128;
const HYPERBOLIC_TOL: f64 = 1e-6;
const ZERO_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    Sink,
    Source,
    Saddle,
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Singularity {
    pub location: [f64; 2],
    pub kind: SingularityKind,
    /// `(re, im)` pairs.
    pub eigenvalues: [[f64; 2]; 2],
}

fn eigenvalues(j: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [[tr / 2.0 - r, 0.0], [tr / 2.0 + r, 0.0]]
    } else {
        let r = (-disc).sqrt();
        [[tr / 2.0, -r], [tr / 2.0, r]]
    }
}

fn kind(ev: [[f64; 2]; 2]) -> SingularityKind {
    let re = [ev[0][0], ev[1][0]];
    if re.iter().any(|r| r.abs() <= HYPERBOLIC_TOL) {
        SingularityKind::NonHyperbolic
    } else if re.iter().all(|&r| r < 0.0) {
        SingularityKind::Sink
    } else if re.iter().all(|&r| r > 0.0) {
        SingularityKind::Source
    } else {
        SingularityKind::Saddle
    }
}

fn newton(f: &dyn PlanarField, mut p: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..60 {
        let v = f.eval(p);
        if !(v[0].is_finite() && v[1].is_finite()) {
            return None;
        }
        if v[0].abs().max(v[1].abs()) < 1e-14 {
            break;
        }
        let j = f.jacobian(p);
        let m = Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
        let step = m.svd(true, true).solve(&Vector2::new(v[0], v[1]), 1e-12).ok()?;
        let norm = step.norm();
        // keep each step within a fraction of the fundamental domain
        let damp = if norm > 0.05 { 0.05 / norm } else { 1.0 };
        p[0] -= damp * step[0];
        p[1] -= damp * step[1];
        if norm < 1e-15 {
            break;
        }
    }
    let v = f.eval(p);
    (v[0].abs().max(v[1].abs()) < ZERO_TOL).then(|| [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)])
}

fn periodic_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Zeros of a torus field on `[0,1)²`: cells where both components change
/// sign seed a Newton polish, and each zero is typed by its Jacobian spectrum.
pub fn classify_singularities(f: &dyn PlanarField) -> Result<Vec<Singularity>, CherryError> {
    let h = 1.0 / GRID as f64;
    let vals: Vec<[f64; 2]> = (0..GRID * GRID).map(|k| f.eval([(k % GRID) as f64 * h, (k / GRID) as f64 * h])).collect();
    let at = |i: usize, j: usize| vals[(j % GRID) * GRID + i % GRID];
    let mut candidates = Vec::new();
    for j in 0..GRID {
        for i in 0..GRID {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let changes = |c: usize| {
                let lo = corners.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
                lo < 0.0 && hi > 0.0
            };
            if changes(0) && changes(1) {
                candidates.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
            }
        }
    }
    let mut zeros: Vec<[f64; 2]> = Vec::new();
    for &c in &candidates {
        if let Some(z) = newton(f, c) {
            if zeros.iter().all(|w| periodic_distance(*w, z) > 1e-6) {
                zeros.push(z);
            }
        }
    }
    if zeros.is_empty() {
        if let Some(&c) = candidates.first() {
            return Err(CherryError::NoConvergence(c));
        }
    }
    zeros.sort_by(|a, b| a.partial_cmp(b).expect("finite zeros"));
    Ok(zeros
        .into_iter()
        .map(|z| {
            let ev = eigenvalues(f.jacobian(z));
            Singularity {
                location: z,
                kind: kind(ev),
                eigenvalues: ev,
            }
        })
        .collect())
}
