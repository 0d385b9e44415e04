use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{Compiled, Expr};
use crate::numeric;

use super::CherryError;

/// Distances from a flat boundary used for exponent regression.
pub const FIT_RANGE: [f64; 2] = [1e-4, 1e-3];
const FIT_POINTS: usize = 12;
const MIN_R2: f64 = 0.9;
const REFINE_TOL: f64 = 1e-8;
const IMAGE_TOL: f64 = 1e-3;
const ROTATION_SEEDS: usize = 10;
const MIN_GRID: usize = 64;

/// A degree-one circle map given through its lift on `[0,1)`.
pub trait CircleMap: Sync {
    /// Lift value at `x ∈ [0,1)`, or `None` inside the flat piece.
    fn lift(&self, x: f64) -> Option<f64>;
}

fn split(x: f64) -> (f64, f64) {
    let mut k = x.floor();
    let mut r = x - k;
    if r >= 1.0 {
        r -= 1.0;
        k += 1.0;
    }
    (r, k)
}

/// Lift at any real `x`, using `F(x + 1) = F(x) + 1`.
pub(crate) fn lift_at(m: &dyn CircleMap, x: f64) -> Option<f64> {
    let (r, k) = split(x);
    m.lift(r).map(|v| v + k)
}

/// An arc `(a, b)` of the circle with `0 ≤ a < 1` and `a < b < a + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatPiece {
    pub a: f64,
    pub b: f64,
}

impl FlatPiece {
    pub fn new(a: f64, b: f64) -> Result<FlatPiece, CherryError> {
        let (a0, k) = split(a);
        let b0 = b - k;
        if !(b0 > a0 && b0 < a0 + 1.0) {
            return Err(CherryError::Precondition(format!("({a}, {b}) is not a proper arc")));
        }
        Ok(FlatPiece { a: a0, b: b0 })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        let u = (x - self.a).rem_euclid(1.0);
        u > 0.0 && u < self.length()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub l1: f64,
    pub l2: f64,
    pub r2_left: f64,
    pub r2_right: f64,
    pub fit_range: [f64; 2],
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatAnalysis {
    pub flat: FlatPiece,
    /// Lift of the image point, as the limit from the left of `a`.
    pub c: f64,
    /// Limit from the right of `b`, on the same branch as `c`.
    pub c_right: f64,
    pub consistent: bool,
    pub exponents: ExponentEstimate,
    pub refine_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationEstimate {
    pub value: f64,
    pub spread: f64,
    pub iterates: usize,
    pub seeds: usize,
}

/// A sampled circle map on the grid `x_i = i/n`, with the analysis results
/// attached as they become available. Between grid points it interpolates
/// linearly, using the flat boundary when known.
#[derive(Debug, Clone, Serialize)]
pub struct CircleMapSample {
    pub xs: Vec<f64>,
    /// Lift values; `None` marks captured points.
    pub values: Vec<Option<f64>>,
    pub flat: Option<FlatPiece>,
    pub c: Option<f64>,
    pub exponents: Option<ExponentEstimate>,
    pub rotation: Option<RotationEstimate>,
    #[serde(skip)]
    nodes: Vec<(f64, f64)>,
}

impl CircleMapSample {
    pub fn sample(map: &dyn CircleMap, grid: usize) -> Result<CircleMapSample, CherryError> {
        if grid < MIN_GRID {
            return Err(CherryError::GridTooSmall(grid));
        }
        let xs: Vec<f64> = (0..grid).map(|i| i as f64 / grid as f64).collect();
        let values = xs.par_iter().map(|&x| map.lift(x)).collect();
        Ok(CircleMapSample::from_values(xs, values))
    }

    pub fn from_values(xs: Vec<f64>, values: Vec<Option<f64>>) -> CircleMapSample {
        let mut s = CircleMapSample {
            xs,
            values,
            flat: None,
            c: None,
            exponents: None,
            rotation: None,
            nodes: Vec::new(),
        };
        s.rebuild();
        s
    }

    pub fn grid(&self) -> usize {
        self.xs.len()
    }

    pub fn captured(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Integer part of each lift value.
    pub fn branches(&self) -> Vec<Option<i64>> {
        self.values.iter().map(|v| v.map(|y| y.floor() as i64)).collect()
    }

    pub fn with_flat(mut self, flat: FlatPiece, c: f64) -> CircleMapSample {
        self.flat = Some(flat);
        self.c = Some(c);
        self.rebuild();
        self
    }

    pub fn with_analysis(mut self, an: &FlatAnalysis) -> CircleMapSample {
        self.exponents = Some(an.exponents.clone());
        self.with_flat(an.flat, an.c)
    }

    /// Fills the flat piece with `c`.
    pub fn total(&self, x: f64) -> Option<f64> {
        total_lift(self, self.flat.zip(self.c), x)
    }

    /// Adjacent non-captured values must not decrease, across the seam too.
    pub fn monotone_check(&self) -> Result<(), CherryError> {
        let pts: Vec<(f64, f64)> = self.xs.iter().zip(&self.values).filter_map(|(&x, v)| v.map(|y| (x, y))).collect();
        for w in pts.windows(2) {
            if w[1].1 < w[0].1 - 1e-10 {
                return Err(CherryError::NonMonotone(w[1].0));
            }
        }
        if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
            if first.1 + 1.0 < last.1 - 1e-10 {
                return Err(CherryError::NonMonotone(0.0));
            }
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        let mut pts: Vec<(f64, f64)> = self
            .xs
            .iter()
            .zip(&self.values)
            .filter_map(|(&x, v)| v.map(|y| (x, y)))
            .filter(|(x, _)| !self.flat.is_some_and(|f| f.contains(*x)))
            .collect();
        if let (Some(f), Some(c)) = (self.flat, self.c) {
            pts.push((f.a, c));
            let (b, k) = split(f.b);
            pts.push((b, c - k));
        }
        pts.sort_by(|p, q| p.0.total_cmp(&q.0));
        pts.dedup_by(|p, q| p.0 == q.0);
        if let (Some(&first), Some(&last)) = (pts.first(), pts.last()) {
            pts.insert(0, (last.0 - 1.0, last.1 - 1.0));
            pts.push((first.0 + 1.0, first.1 + 1.0));
        }
        self.nodes = pts;
    }
}

impl CircleMap for CircleMapSample {
    fn lift(&self, x: f64) -> Option<f64> {
        match self.flat {
            Some(f) if f.contains(x) => return None,
            None => {
                let n = self.grid();
                if self.values[((x * n as f64).round() as usize) % n].is_none() {
                    return None;
                }
            }
            _ => {}
        }
        if self.nodes.len() < 2 {
            return None;
        }
        let i = self.nodes.partition_point(|p| p.0 <= x).clamp(1, self.nodes.len() - 1);
        let (p, q) = (self.nodes[i - 1], self.nodes[i]);
        Some(p.1 + (q.1 - p.1) * (x - p.0) / (q.0 - p.0))
    }
}

fn total_lift(m: &dyn CircleMap, fill: Option<(FlatPiece, f64)>, x: f64) -> Option<f64> {
    let (r, k) = split(x);
    match (m.lift(r), fill) {
        (Some(v), _) => Some(v + k),
        (None, Some((f, c))) if f.contains(r) => Some(if r >= f.a { c } else { c - 1.0 } + k),
        _ => None,
    }
}

fn fit(ds: &[f64], ys: &[Option<f64>], c: f64) -> (f64, f64) {
    let (lx, ly): (Vec<f64>, Vec<f64>) = ds
        .iter()
        .zip(ys)
        .filter_map(|(&d, y)| y.map(|v| (d, (v - c).abs())))
        .filter(|(_, v)| *v > 0.0)
        .map(|(d, v)| (d.ln(), v.ln()))
        .unzip();
    if lx.len() < 3 {
        return (f64::NAN, 0.0);
    }
    let (slope, _, r2) = numeric::linear_fit(&lx, &ly);
    (slope, r2)
}

/// Locates the flat piece from the captured grid points, refines its ends by
/// bisection, takes `c` as the one-sided limit at `a`, and regresses the
/// critical exponents over [`FIT_RANGE`].
pub fn analyze_flat(map: &dyn CircleMap, sample: &CircleMapSample) -> Result<FlatAnalysis, CherryError> {
    let n = sample.grid();
    let cap: Vec<bool> = sample.values.iter().map(Option::is_none).collect();
    if !cap.contains(&true) {
        return Err(CherryError::NoFlatPiece("capture set is empty".into()));
    }
    if !cap.contains(&false) {
        return Err(CherryError::NoFlatPiece("every grid point is captured".into()));
    }
    let mut best = (0, 0);
    for s in (0..n).filter(|&i| cap[i] && !cap[(i + n - 1) % n]) {
        let len = (0..n).take_while(|k| cap[(s + k) % n]).count();
        if len > best.1 {
            best = (s, len);
        }
    }
    let (s, len) = best;
    let h = 1.0 / n as f64;
    let captured = |x: f64| lift_at(map, x).is_none();
    let (mut lo, mut hi) = ((s as f64 - 1.0) * h, s as f64 * h);
    while hi - lo > REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        if captured(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (a_out, a) = (lo, 0.5 * (lo + hi));
    let (mut lo, mut hi) = ((s + len - 1) as f64 * h, (s + len) as f64 * h);
    while hi - lo > REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        if captured(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (b_out, b) = (hi, 0.5 * (lo + hi));
    let c_left = lift_at(map, a_out).expect("outside the capture set");
    let c_right = lift_at(map, b_out).expect("outside the capture set");
    let ds: Vec<f64> = (0..FIT_POINTS)
        .map(|k| FIT_RANGE[0] * (FIT_RANGE[1] / FIT_RANGE[0]).powf(k as f64 / (FIT_POINTS - 1) as f64))
        .collect();
    let left: Vec<Option<f64>> = ds.par_iter().map(|d| lift_at(map, a - d)).collect();
    let right: Vec<Option<f64>> = ds.par_iter().map(|d| lift_at(map, b + d)).collect();
    let (l1, r2_left) = fit(&ds, &left, c_left);
    let (l2, r2_right) = fit(&ds, &right, c_right);
    let k = a.floor();
    Ok(FlatAnalysis {
        flat: FlatPiece::new(a, b)?,
        c: c_left - k,
        c_right: c_right - k,
        consistent: (c_left - c_right).abs() <= IMAGE_TOL,
        exponents: ExponentEstimate {
            l1,
            l2,
            r2_left,
            r2_right,
            fit_range: FIT_RANGE,
            reliable: r2_left >= MIN_R2 && r2_right >= MIN_R2 && l1 > 0.0 && l2 > 0.0,
        },
        refine_tol: REFINE_TOL,
    })
}

/// Average lift displacement over `iterates` steps from ten seeds; the flat
/// piece, when given, is mapped to `c`.
pub fn rotation_number(
    map: &dyn CircleMap,
    fill: Option<(FlatPiece, f64)>,
    iterates: usize,
) -> Result<RotationEstimate, CherryError> {
    let m = 1024;
    let mut prev: Option<f64> = None;
    let mut first = None;
    for i in 0..m {
        let x = i as f64 / m as f64;
        let v = total_lift(map, fill, x)
            .ok_or_else(|| CherryError::Precondition(format!("map undefined at {x} and no flat fill given")))?;
        if prev.is_some_and(|p| v < p - 1e-10) {
            return Err(CherryError::NonMonotone(x));
        }
        first.get_or_insert(v);
        prev = Some(v);
    }
    if let (Some(f), Some(l)) = (first, prev) {
        if f + 1.0 < l - 1e-10 {
            return Err(CherryError::NonMonotone(0.0));
        }
    }
    let n = iterates.max(1);
    let rates: Vec<f64> = (0..ROTATION_SEEDS)
        .into_par_iter()
        .map(|s| {
            let x0 = s as f64 / ROTATION_SEEDS as f64;
            let (mut x, mut turns) = (x0, 0i64);
            for _ in 0..n {
                let y = total_lift(map, fill, x).unwrap_or(f64::NAN);
                let (r, k) = split(y);
                x = r;
                turns += k as i64;
            }
            (turns as f64 + x - x0) / n as f64
        })
        .collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(CherryError::Precondition("orbit left the domain of the map".into()));
    }
    Ok(RotationEstimate {
        value: rates.iter().sum::<f64>() / rates.len() as f64,
        spread: hi - lo,
        iterates: n,
        seeds: ROTATION_SEEDS,
    })
}

/// An orientation-preserving circle diffeomorphism given by the lift
/// expression `φ(x)` with `φ(x + 1) = φ(x) + 1`.
#[derive(Debug, Clone)]
pub struct CircleDiffeo {
    pub expr: Expr,
    pub inverse: Option<Expr>,
    tape: Compiled,
    inv_tape: Option<Compiled>,
}

impl CircleDiffeo {
    pub const VAR: &'static str = "x";

    pub fn new(expr: Expr, inverse: Option<Expr>) -> Result<CircleDiffeo, CherryError> {
        let vars = [Self::VAR.to_string()];
        for e in std::iter::once(&expr).chain(&inverse) {
            if let Some(v) = e.variables().into_iter().find(|v| v != Self::VAR) {
                return Err(CherryError::Precondition(format!("circle map uses unknown variable `{v}`")));
            }
        }
        let tape = Compiled::new(&[expr.clone(), expr.diff(Self::VAR)], &vars)?;
        let inv_tape = match &inverse {
            Some(e) => Some(Compiled::new(std::slice::from_ref(e), &vars)?),
            None => None,
        };
        let phi = CircleDiffeo {
            expr,
            inverse,
            tape,
            inv_tape,
        };
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            let v = phi.tape.eval(&[x])?;
            if !(v[1] > 0.0) {
                return Err(CherryError::NonMonotone(x));
            }
            let shift = phi.apply(x + 1.0) - v[0];
            if (shift - 1.0).abs() > 1e-9 {
                return Err(CherryError::Precondition(format!("φ(x+1) − φ(x) = {shift} at x = {x}, expected 1")));
            }
        }
        Ok(phi)
    }

    pub fn identity() -> CircleDiffeo {
        let x = Expr::var(Self::VAR);
        CircleDiffeo::new(x.clone(), Some(x)).expect("identity is a circle diffeomorphism")
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.tape.eval_one(0, &[x]).unwrap_or(f64::NAN)
    }

    /// Expression inverse when available, otherwise monotone bisection to 1e-12.
    pub fn apply_inverse(&self, y: f64) -> f64 {
        if let Some(t) = &self.inv_tape {
            return t.eval_one(0, &[y]).unwrap_or(f64::NAN);
        }
        let (mut lo, mut hi) = (y - 1.0, y + 1.0);
        while self.apply(lo) > y {
            lo -= 1.0;
        }
        while self.apply(hi) < y {
            hi += 1.0;
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &CircleDiffeo) -> Result<CircleDiffeo, CherryError> {
        let sub = |e: &Expr, inner: &Expr| e.substitute(&HashMap::from([(Self::VAR.to_string(), inner.clone())]));
        let inverse = match (&first.inverse, &self.inverse) {
            (Some(f), Some(s)) => Some(sub(f, s)),
            _ => None,
        };
        CircleDiffeo::new(sub(&self.expr, &first.expr), inverse)
    }

    pub fn map_flat(&self, f: FlatPiece) -> Result<FlatPiece, CherryError> {
        FlatPiece::new(self.apply(f.a), self.apply(f.b))
    }
}

/// `φ ∘ f ∘ φ⁻¹`.
pub struct Conjugated<'a> {
    pub phi: &'a CircleDiffeo,
    pub map: &'a dyn CircleMap,
}

impl CircleMap for Conjugated<'_> {
    fn lift(&self, y: f64) -> Option<f64> {
        lift_at(self.map, self.phi.apply_inverse(y)).map(|v| self.phi.apply(v))
    }
}

/// Samples `φ ∘ f ∘ φ⁻¹` on the grid of `source` and transports its flat
/// piece and image point.
pub fn conjugate_map(
    phi: &CircleDiffeo,
    f: &dyn CircleMap,
    source: &CircleMapSample,
) -> Result<CircleMapSample, CherryError> {
    let out = CircleMapSample::sample(&Conjugated { phi, map: f }, source.grid())?;
    Ok(match (source.flat, source.c) {
        (Some(flat), Some(c)) => out.with_flat(phi.map_flat(flat)?, phi.apply(c)),
        _ => out,
    })
}

/// `f₁` up to `b₁`, `f₂` after it; flat piece `(a₁, b₂)`.
pub struct Glued<'a> {
    pub f1: &'a dyn CircleMap,
    pub f2: &'a dyn CircleMap,
    pub split: f64,
    pub flat: FlatPiece,
    pub c: f64,
}

impl CircleMap for Glued<'_> {
    fn lift(&self, x: f64) -> Option<f64> {
        if x <= self.split {
            self.f1.lift(x)
        } else {
            self.f2.lift(x)
        }
    }
}

/// Glues two maps whose flat pieces overlap and share their image point.
pub fn glue_maps<'a>(
    f1: &'a dyn CircleMap,
    an1: &FlatAnalysis,
    f2: &'a dyn CircleMap,
    an2: &FlatAnalysis,
) -> Result<Glued<'a>, CherryError> {
    let bad = |m: String| Err(CherryError::Precondition(m));
    if (an1.c - an2.c).abs() > 1e-6 {
        return bad(format!("f1(U1) = f2(U2) fails: c1 = {}, c2 = {}", an1.c, an2.c));
    }
    let (u1, u2) = (an1.flat, an2.flat);
    if u2.b >= 1.0 {
        return bad("flat pieces must not contain 0".into());
    }
    if !(u1.a <= u2.a) {
        return bad(format!("a1 <= a2 fails: {} > {}", u1.a, u2.a));
    }
    if !(u2.a <= u1.b) {
        return bad(format!("a2 <= b1 fails: {} > {}", u2.a, u1.b));
    }
    if !(u1.b <= u2.b) {
        return bad(format!("b1 <= b2 fails: {} > {}", u1.b, u2.b));
    }
    match (f1.lift(0.0), f2.lift(0.0)) {
        (Some(p), Some(q)) if (p - q).abs() <= 1e-6 => {}
        (p, q) => return bad(format!("maps disagree at x = 0: {p:?} vs {q:?}")),
    }
    Ok(Glued {
        f1,
        f2,
        split: u1.b,
        flat: FlatPiece::new(u1.a, u2.b)?,
        c: an1.c,
    })
}

/// `c + g(s)` on the arc from `b` to `a + 1`, with
/// `g(s) = s^ℓ₂ / (s^ℓ₂ + κ(1 − s)^ℓ₁)`: exponent `ℓ₁` at `a`, `ℓ₂` at `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCherryMap {
    pub flat: FlatPiece,
    pub c: f64,
    pub l1: f64,
    pub l2: f64,
    pub kappa: f64,
}

impl SyntheticCherryMap {
    pub fn new(a: f64, b: f64, c: f64, l1: f64, l2: f64, kappa: f64) -> Result<SyntheticCherryMap, CherryError> {
        if !(l1 > 0.0 && l2 > 0.0 && kappa > 0.0) {
            return Err(CherryError::Parameters("exponents and kappa must be positive".into()));
        }
        Ok(SyntheticCherryMap {
            flat: FlatPiece::new(a, b)?,
            c,
            l1,
            l2,
            kappa,
        })
    }

    /// `κ` for which the lift at `x` equals `target`.
    pub fn kappa_for(a: f64, b: f64, c: f64, l1: f64, l2: f64, x: f64, target: f64) -> Result<f64, CherryError> {
        let probe = SyntheticCherryMap::new(a, b, c, l1, l2, 1.0)?;
        let (s, shift) = probe.arc_param(x).ok_or_else(|| CherryError::Precondition("x lies in the flat piece".into()))?;
        let g = target - c - shift;
        if !(g > 0.0 && g < 1.0) {
            return Err(CherryError::Precondition(format!("target {target} is out of range")));
        }
        Ok(s.powf(l2) * (1.0 - g) / (g * (1.0 - s).powf(l1)))
    }

    fn arc_param(&self, x: f64) -> Option<(f64, f64)> {
        let len = 1.0 - self.flat.length();
        let u = (x - self.flat.b).rem_euclid(1.0);
        if u >= len {
            return None;
        }
        Some((u / len, x - self.flat.b - u))
    }
}

impl CircleMap for SyntheticCherryMap {
    fn lift(&self, x: f64) -> Option<f64> {
        let (s, shift) = self.arc_param(x)?;
        let p = s.powf(self.l2);
        Some(self.c + shift + p / (p + self.kappa * (1.0 - s).powf(self.l1)))
    }
}
