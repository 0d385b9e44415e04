use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::expr::{parse, Compiled, Expr, ExprError, Scratch};
use crate::geometry::{Chart, ChartRef, DiffeoSpec, VectorField};

use super::singular::{classify_singularities, Singularity, SingularityKind};
use super::CherryError;

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

fn eval_tape<const N: usize>(tape: &Compiled, p: [f64; 2]) -> [f64; N] {
    let mut out = [f64::NAN; N];
    SCRATCH.with(|s| {
        if tape.eval_into(&p, &mut s.borrow_mut(), &mut out).is_err() {
            out = [f64::NAN; N];
        }
    });
    out
}

/// A planar vector field evaluated in lift coordinates of the torus.
pub trait PlanarField: Sync {
    fn eval(&self, p: [f64; 2]) -> [f64; 2];

    /// `J[i][j] = ∂V^i/∂x^j`, by central differences unless overridden.
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let mut a = p;
            let mut b = p;
            a[c] += h;
            b[c] -= h;
            let (fa, fb) = (self.eval(a), self.eval(b));
            for r in 0..2 {
                j[r][c] = (fa[r] - fb[r]) / (2.0 * h);
            }
        }
        j
    }
}

/// Parameters of the Cherry family: the constant field `(1, α)` with a plug
/// centred at `center` that creates a sink and a saddle on the line through
/// the centre in direction `(1, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CherryParams {
    pub alpha: f64,
    pub center: [f64; 2],
    pub radius: f64,
    /// Plug depth `K`; zeros exist for `K > 1`.
    pub depth: f64,
    /// Contraction rate transverse to the base direction.
    pub sink_strength: f64,
    /// Rotation applied to the whole field, in radians.
    pub tilt: f64,
    pub scale: f64,
}

impl Default for CherryParams {
    fn default() -> CherryParams {
        CherryParams {
            alpha: (5f64.sqrt() - 1.0) / 2.0,
            center: [0.5, 0.5],
            radius: 0.2,
            depth: 2.0,
            sink_strength: 100.0,
            tilt: 0.0,
            scale: 1.0,
        }
    }
}

impl CherryParams {
    fn validate(&self) -> Result<(), CherryError> {
        let bad = |m: String| Err(CherryError::Parameters(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.radius >= 0.0) {
            return bad(format!("radius = {} must be non-negative", self.radius));
        }
        if self.radius > 0.0 && self.center.iter().any(|&c| !(c - self.radius > 0.0 && c + self.radius < 1.0)) {
            return bad("plug disk must lie strictly inside the fundamental domain".into());
        }
        if !(self.depth >= 0.0 && self.sink_strength >= 0.0) {
            return bad("depth and sink_strength must be non-negative".into());
        }
        if !(self.scale > 0.0 && self.tilt.is_finite()) {
            return bad("scale must be positive and tilt finite".into());
        }
        Ok(())
    }

    fn components(&self) -> Result<[Expr; 2], CherryError> {
        let a = self.alpha;
        let mut v = if self.radius == 0.0 {
            [Expr::one(), Expr::float(a)]
        } else {
            let [x0, y0] = self.center;
            let s2 = (self.radius / 4.0).powi(2);
            let d = |v: &str, c: f64| format!("sin(2*pi*({v}-({c})))/(2*pi)");
            let half = |v: &str, c: f64| format!("(sin(pi*({v}-({c})))/pi)^2");
            let g = format!("exp(-({}+{})/({s2}))", half("x", x0), half("y", y0));
            let w = format!("(({})*{}+{})/({})", -a, d("x", x0), d("y", y0), 1.0 + a * a);
            let (k, b) = (self.depth, self.sink_strength);
            [
                parse(&format!("(1-({k})*{g})+({})*{w}*{g}", b * a)).map_err(ExprError::from)?,
                parse(&format!("(1-({k})*{g})*({a})-({b})*{w}*{g}")).map_err(ExprError::from)?,
            ]
        };
        if self.tilt != 0.0 {
            let (s, c) = (Expr::float(self.tilt.sin()), Expr::float(self.tilt.cos()));
            v = [&(&v[0] * &c) - &(&v[1] * &s), &(&v[0] * &s) + &(&v[1] * &c)];
        }
        if self.scale != 1.0 {
            let k = Expr::float(self.scale);
            v = [&v[0] * &k, &v[1] * &k];
        }
        Ok(v)
    }
}

/// A vector field on the torus `[0,1)²` with its zeros classified.
#[derive(Debug, Clone)]
pub struct CherryField {
    pub params: Option<CherryParams>,
    pub field: VectorField,
    tape: Compiled,
    singularities: Vec<Singularity>,
}

impl CherryField {
    /// Wraps an arbitrary torus field; no Cherry invariants are enforced.
    pub fn from_field(field: VectorField) -> Result<CherryField, CherryError> {
        if field.dim() != 2 {
            return Err(CherryError::Parameters(format!("expected a planar field, got dimension {}", field.dim())));
        }
        let coords = field.chart.coords().to_vec();
        let mut exprs = field.comps.clone();
        for c in &field.comps {
            for v in &coords {
                exprs.push(c.diff(v));
            }
        }
        let tape = Compiled::new(&exprs, &coords)?;
        let mut f = CherryField {
            params: None,
            field,
            tape,
            singularities: Vec::new(),
        };
        f.singularities = classify_singularities(&f)?;
        Ok(f)
    }

    pub fn torus() -> ChartRef {
        Chart::torus("T2", &["x", "y"])
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn sink(&self) -> Option<[f64; 2]> {
        self.singularities.iter().find(|s| s.kind == SingularityKind::Sink).map(|s| s.location)
    }

    /// The same field multiplied by a positive constant.
    pub fn scaled(&self, k: f64) -> Result<CherryField, CherryError> {
        let mut f = CherryField::from_field(self.field.scale(&Expr::float(k)))?;
        f.params = self.params.map(|p| CherryParams { scale: p.scale * k, ..p });
        Ok(f)
    }
}

impl PlanarField for CherryField {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let v: [f64; 6] = eval_tape(&self.tape, p);
        [v[0], v[1]]
    }

    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let v: [f64; 6] = eval_tape(&self.tape, p);
        [[v[2], v[3]], [v[4], v[5]]]
    }
}

/// Builds a member of the Cherry family and checks that it has exactly one
/// hyperbolic sink and one hyperbolic saddle.
pub fn make_cherry_field(params: CherryParams) -> Result<CherryField, CherryError> {
    params.validate()?;
    let comps = params.components()?;
    let mut f = CherryField::from_field(VectorField::new(CherryField::torus(), comps.to_vec())?)?;
    f.params = Some(params);
    let zeros = f.singularities.len();
    let reject = |reason: String| Err(CherryError::Rejected { reason, zeros });
    if let Some(s) = f.singularities.iter().find(|s| s.kind == SingularityKind::NonHyperbolic) {
        return reject(format!("non-hyperbolic zero at {:?} with eigenvalues {:?}", s.location, s.eigenvalues));
    }
    if zeros != 2 {
        return reject(format!("found {zeros} zeros, expected a sink and a saddle"));
    }
    let kinds: Vec<SingularityKind> = f.singularities.iter().map(|s| s.kind).collect();
    if !(kinds.contains(&SingularityKind::Sink) && kinds.contains(&SingularityKind::Saddle)) {
        return reject(format!("zeros are {kinds:?}, expected a sink and a saddle"));
    }
    Ok(f)
}

/// A torus diffeomorphism in lift coordinates, with compiled Jacobian and
/// either an expression inverse or a Newton inverse.
#[derive(Debug, Clone)]
pub struct TorusMap {
    pub spec: DiffeoSpec,
    tape: Compiled,
    inverse: Option<Compiled>,
}

impl TorusMap {
    pub fn new(spec: DiffeoSpec) -> Result<TorusMap, CherryError> {
        if spec.dim() != 2 {
            return Err(CherryError::Parameters("torus map must be planar".into()));
        }
        let coords = spec.source.coords().to_vec();
        let mut exprs = spec.map.clone();
        for row in spec.jacobian() {
            exprs.extend(row);
        }
        let tape = Compiled::new(&exprs, &coords)?;
        let inverse = match &spec.inverse {
            Some(inv) => Some(Compiled::new(inv, spec.target.coords())?),
            None => None,
        };
        Ok(TorusMap { spec, tape, inverse })
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let v: [f64; 6] = eval_tape(&self.tape, p);
        [v[0], v[1]]
    }

    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let v: [f64; 6] = eval_tape(&self.tape, p);
        [[v[2], v[3]], [v[4], v[5]]]
    }

    pub fn inverse(&self, q: [f64; 2]) -> Result<[f64; 2], CherryError> {
        if let Some(t) = &self.inverse {
            return Ok(eval_tape(t, q));
        }
        let mut p = q;
        for _ in 0..60 {
            let v: [f64; 6] = eval_tape(&self.tape, p);
            let r = [v[0] - q[0], v[1] - q[1]];
            if r[0].abs().max(r[1].abs()) < 1e-14 {
                return Ok(p);
            }
            let det = v[2] * v[5] - v[3] * v[4];
            if !(det.abs() > 1e-14) {
                break;
            }
            p[0] -= (v[5] * r[0] - v[3] * r[1]) / det;
            p[1] -= (-v[4] * r[0] + v[2] * r[1]) / det;
        }
        let v = self.apply(p);
        if (v[0] - q[0]).abs().max((v[1] - q[1]).abs()) < 1e-12 {
            Ok(p)
        } else {
            Err(CherryError::NoConvergence(q))
        }
    }
}

/// `ψ_*X` evaluated pointwise: `Dψ(ψ⁻¹(q)) X(ψ⁻¹(q))`.
pub struct PushedField<'a> {
    pub map: &'a TorusMap,
    pub base: &'a dyn PlanarField,
}

impl PlanarField for PushedField<'_> {
    fn eval(&self, q: [f64; 2]) -> [f64; 2] {
        let Ok(p) = self.map.inverse(q) else {
            return [f64::NAN; 2];
        };
        let j = self.map.jacobian(p);
        let x = self.base.eval(p);
        [j[0][0] * x[0] + j[0][1] * x[1], j[1][0] * x[0] + j[1][1] * x[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_field_has_sink_and_saddle() {
        let f = make_cherry_field(CherryParams::default()).unwrap();
        let s = f.singularities();
        assert_eq!(s.len(), 2);
        // predicted offsets ±σ√(ln K) along (1, α)/|(1, α)|
        let p = CherryParams::default();
        let r = p.radius / 4.0 * p.depth.ln().sqrt();
        let n = (1.0 + p.alpha * p.alpha).sqrt();
        let sink = f.sink().unwrap();
        assert!((sink[0] - (0.5 - r / n)).abs() < 1e-3 && (sink[1] - (0.5 - r * p.alpha / n)).abs() < 1e-3);
        for z in s {
            assert!(f.eval(z.location).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn far_from_plug_is_constant() {
        let p = CherryParams::default();
        let f = make_cherry_field(p).unwrap();
        let v = f.eval([0.02, 0.03]);
        assert!((v[0] - 1.0).abs() < 1e-6 && (v[1] - p.alpha).abs() < 1e-6);
    }

    #[test]
    fn rejections() {
        let none = make_cherry_field(CherryParams { radius: 0.0, ..Default::default() });
        assert!(matches!(none, Err(CherryError::Rejected { zeros: 0, .. })));
        let flat = make_cherry_field(CherryParams { sink_strength: 0.0, ..Default::default() });
        match flat {
            Err(CherryError::Rejected { reason, .. }) => assert!(reason.contains("non-hyperbolic"), "{reason}"),
            other => panic!("{other:?}"),
        }
        assert!(make_cherry_field(CherryParams { alpha: 1.5, ..Default::default() }).is_err());
        assert!(make_cherry_field(CherryParams { center: [0.1, 0.5], ..Default::default() }).is_err());
    }

    #[test]
    fn tilt_and_scale_keep_zeros() {
        let base = make_cherry_field(CherryParams::default()).unwrap();
        let tilted = make_cherry_field(CherryParams { tilt: 0.3, ..Default::default() }).unwrap();
        let doubled = base.scaled(2.0).unwrap();
        for f in [&tilted, &doubled] {
            let s = f.singularities();
            assert_eq!(s.len(), 2);
            for z in s {
                assert!(base.singularities().iter().any(|w| {
                    (w.location[0] - z.location[0]).abs() + (w.location[1] - z.location[1]).abs() < 1e-8
                }));
            }
        }
        let v = base.eval([0.3, 0.7]);
        let w = doubled.eval([0.3, 0.7]);
        assert!((2.0 * v[0] - w[0]).abs() < 1e-12);
    }

    #[test]
    fn pushed_field_by_translation() {
        let f = make_cherry_field(CherryParams::default()).unwrap();
        let t = CherryField::torus();
        let spec = DiffeoSpec::new(
            t.clone(),
            t,
            vec![parse("x+0.3").unwrap(), parse("y").unwrap()],
            None,
        )
        .unwrap();
        let psi = TorusMap::new(spec).unwrap();
        let pushed = PushedField { map: &psi, base: &f };
        let a = pushed.eval([0.8, 0.45]);
        let b = f.eval([0.5, 0.45]);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}
