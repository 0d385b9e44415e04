use std::collections::HashMap;

use serde::Serialize;

use crate::expr::Expr;

use super::circle::{analyze_flat, rotation_number, CircleDiffeo, CircleMap, CircleMapSample, Conjugated};
use super::field::{CherryField, PlanarField, PushedField, TorusMap};
use super::ode::{dp_step, Stepper};
use super::CherryError;

/// Distance to the sink below which a trajectory counts as captured.
pub const CAPTURE_RADIUS: f64 = 1e-3;
pub const EQUIVARIANCE_TOL: f64 = 5e-4;
const CROSSING_TOL: f64 = 1e-10;
const MAX_STEP: f64 = 0.05;
const CAPTURED_LIMIT: f64 = 0.95;
const ROTATION_ITERATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnOptions {
    pub tmax: f64,
    pub tol: f64,
}

impl Default for ReturnOptions {
    fn default() -> ReturnOptions {
        ReturnOptions { tmax: 500.0, tol: 1e-10 }
    }
}

fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// First return from `S¹×{0}` to `S¹×{1}`: the lift of the crossing point,
/// or `None` when the orbit is captured by the sink, stalls, or runs past
/// `tmax`.
pub struct ReturnMap<'a> {
    pub field: &'a dyn PlanarField,
    pub sink: Option<[f64; 2]>,
    pub opts: ReturnOptions,
}

impl ReturnMap<'_> {
    fn crossing(&self, prev: [f64; 2], h: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, h);
        let mut y = prev;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            y = dp_step(self.field, prev, mid, self.opts.tol).0;
            if (y[1] - 1.0).abs() <= CROSSING_TOL {
                break;
            }
            if y[1] < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        y[0]
    }
}

impl CircleMap for ReturnMap<'_> {
    fn lift(&self, x: f64) -> Option<f64> {
        let mut st = Stepper::new(self.field, [x, 0.0], self.opts.tol);
        while st.t <= self.opts.tmax {
            let prev = st.y;
            let (h, y) = st.advance(MAX_STEP)?;
            if y[1] >= 1.0 {
                return Some(self.crossing(prev, h));
            }
            if self.sink.is_some_and(|s| torus_distance(y, s) < CAPTURE_RADIUS) {
                return None;
            }
        }
        None
    }
}

pub(crate) fn sample_return_map(
    field: &dyn PlanarField,
    sink: Option<[f64; 2]>,
    grid: usize,
    opts: ReturnOptions,
) -> Result<CircleMapSample, CherryError> {
    let map = ReturnMap { field, sink, opts };
    let sample = CircleMapSample::sample(&map, grid)?;
    let captured = sample.captured();
    if captured as f64 > CAPTURED_LIMIT * grid as f64 {
        return Err(CherryError::NotCherry { captured, grid });
    }
    sample.monotone_check()?;
    let mut sample = if captured > 0 {
        let an = analyze_flat(&map, &sample)?;
        sample.with_analysis(&an)
    } else {
        sample
    };
    let fill = sample.flat.zip(sample.c);
    sample.rotation = Some(rotation_number(&sample, fill, ROTATION_ITERATES)?);
    Ok(sample)
}

/// Samples the first-return map of `X` on a grid of `S¹×{0}`; when part of
/// the grid is captured, the flat piece, `c` and exponents are attached.
pub fn first_return_map(x: &CherryField, grid: usize, opts: ReturnOptions) -> Result<CircleMapSample, CherryError> {
    sample_return_map(x, x.sink(), grid, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceReport {
    pub distance: f64,
    pub pass: bool,
    pub tol: f64,
    pub grid: usize,
    /// Grid points captured in exactly one of the two pipelines.
    pub capture_mismatches: usize,
}

fn section_restriction(psi: &TorusMap) -> Result<CircleDiffeo, CherryError> {
    let coords = psi.spec.source.coords();
    let sub = HashMap::from([
        (coords[0].clone(), Expr::var(CircleDiffeo::VAR)),
        (coords[1].clone(), Expr::zero()),
    ]);
    let inverse = psi.spec.inverse.as_ref().map(|inv| inv[0].substitute(&sub));
    CircleDiffeo::new(psi.spec.map[0].substitute(&sub), inverse)
}

/// Compares the return map of `ψ_*X` with `φ ∘ f ∘ φ⁻¹`, where `f` is the
/// return map of `X` and `φ = ψ|S¹×{0}`.
pub fn equivariance_check(
    x: &CherryField,
    psi: &TorusMap,
    grid: usize,
    opts: ReturnOptions,
) -> Result<EquivarianceReport, CherryError> {
    for i in 0..64 {
        let s = i as f64 / 64.0;
        let (p0, p1) = (psi.apply([s, 0.0]), psi.apply([s, 1.0]));
        if !(p0[1].abs() < 1e-9 && (p1[1] - 1.0).abs() < 1e-9 && (p1[0] - p0[0]).abs() < 1e-9) {
            return Err(CherryError::Precondition(format!(
                "map does not preserve the sections S¹×{{0}}, S¹×{{1}} (at x = {s})"
            )));
        }
    }
    let phi = section_restriction(psi)?;
    let base = sample_return_map(x, x.sink(), grid, opts)?;
    let fmap = ReturnMap {
        field: x,
        sink: x.sink(),
        opts,
    };
    let conj = CircleMapSample::sample(&Conjugated { phi: &phi, map: &fmap }, grid)?;
    let pushed = PushedField { map: psi, base: x };
    let pushed_sink = x.sink().map(|s| {
        let p = psi.apply(s);
        [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)]
    });
    let direct = CircleMapSample::sample(&ReturnMap { field: &pushed, sink: pushed_sink, opts }, grid)?;
    let c = base.c.map(|c| phi.apply(c));
    let circ = |u: f64, v: f64| {
        let d = (u - v).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    let mut distance: f64 = 0.0;
    let mut mismatches = 0;
    for (a, b) in direct.values.iter().zip(&conj.values) {
        let d = match (a, b) {
            (Some(u), Some(v)) => circ(*u, *v),
            (None, None) => 0.0,
            (Some(v), None) | (None, Some(v)) => {
                mismatches += 1;
                c.map_or(f64::INFINITY, |c| circ(*v, c))
            }
        };
        distance = distance.max(d);
    }
    Ok(EquivarianceReport {
        distance,
        pass: distance <= EQUIVARIANCE_TOL,
        tol: EQUIVARIANCE_TOL,
        grid,
        capture_mismatches: mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cherry::{make_cherry_field, CherryParams};
    use crate::expr::parse;
    use crate::geometry::{DiffeoSpec, VectorField};

    fn constant(a: f64) -> CherryField {
        CherryField::from_field(VectorField::new(CherryField::torus(), vec![Expr::one(), Expr::float(a)]).unwrap()).unwrap()
    }

    #[test]
    fn constant_field_is_a_rotation() {
        let a = (5f64.sqrt() - 1.0) / 2.0;
        let s = first_return_map(&constant(a), 64, ReturnOptions::default()).unwrap();
        assert!(s.flat.is_none());
        for (x, v) in s.xs.iter().zip(&s.values) {
            assert!((v.unwrap() - (x + 1.0 / a)).abs() < 1e-8);
        }
        let r = s.rotation.unwrap();
        assert!((r.value - 1.0 / a).abs() < 1e-6);
        assert!(matches!(
            first_return_map(&constant(a), 2, ReturnOptions::default()),
            Err(CherryError::GridTooSmall(2))
        ));
    }

    #[test]
    fn default_field_has_flat_piece() {
        let f = make_cherry_field(CherryParams::default()).unwrap();
        let s = first_return_map(&f, 128, ReturnOptions::default()).unwrap();
        let flat = s.flat.unwrap();
        assert!(flat.length() > 0.01);
        let ex = s.exponents.clone().unwrap();
        assert!((ex.l1 / ex.l2 - 1.0).abs() < 0.15);
        s.monotone_check().unwrap();
    }

    #[test]
    fn identity_and_translation_are_equivariant() {
        let f = make_cherry_field(CherryParams::default()).unwrap();
        let t = CherryField::torus();
        let id = TorusMap::new(DiffeoSpec::identity(&t)).unwrap();
        let r = equivariance_check(&f, &id, 64, ReturnOptions::default()).unwrap();
        assert_eq!(r.distance, 0.0);
        let shift = DiffeoSpec::new(t.clone(), t.clone(), vec![parse("x+0.3").unwrap(), parse("y").unwrap()], None).unwrap();
        let r = equivariance_check(&f, &TorusMap::new(shift).unwrap(), 64, ReturnOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        let tilt = DiffeoSpec::new(t.clone(), t, vec![parse("x").unwrap(), parse("y+0.1*sin(2*pi*x)").unwrap()], None).unwrap();
        assert!(matches!(
            equivariance_check(&f, &TorusMap::new(tilt).unwrap(), 64, ReturnOptions::default()),
            Err(CherryError::Precondition(_))
        ));
    }
}
