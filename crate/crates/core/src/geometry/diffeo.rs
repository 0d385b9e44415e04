use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::field::same_chart;
use super::form::det_expr;
use super::{ChartRef, DifferentialForm, GeometryError, Samples, VectorField};
use crate::expr::{Compiled, Expr};

/// Diffeomorphism `ψ: source → target` given by component expressions in the
/// source coordinates, with an optional inverse in the target coordinates.
#[derive(Debug, Clone)]
pub struct DiffeoSpec {
    pub source: ChartRef,
    pub target: ChartRef,
    pub map: Vec<Expr>,
    pub inverse: Option<Vec<Expr>>,
}

impl DiffeoSpec {
    pub fn new(
        source: ChartRef,
        target: ChartRef,
        map: Vec<Expr>,
        inverse: Option<Vec<Expr>>,
    ) -> Result<DiffeoSpec, GeometryError> {
        if map.len() != target.dim() || source.dim() != target.dim() {
            return Err(GeometryError::Dimension(format!(
                "map has {} components between charts of dimension {} and {}",
                map.len(),
                source.dim(),
                target.dim()
            )));
        }
        if let Some(inv) = &inverse {
            if inv.len() != source.dim() {
                return Err(GeometryError::Dimension("inverse has wrong component count".into()));
            }
        }
        Ok(DiffeoSpec {
            source,
            target,
            map,
            inverse,
        })
    }

    pub fn identity(chart: &ChartRef) -> DiffeoSpec {
        let comps: Vec<Expr> = chart.coords().iter().map(Expr::var).collect();
        DiffeoSpec {
            source: chart.clone(),
            target: chart.clone(),
            map: comps.clone(),
            inverse: Some(comps),
        }
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    /// The inverse as a spec, when an inverse expression is present.
    pub fn inverted(&self) -> Result<DiffeoSpec, GeometryError> {
        let inv = self.inverse.clone().ok_or(GeometryError::MissingInverse)?;
        Ok(DiffeoSpec {
            source: self.target.clone(),
            target: self.source.clone(),
            map: inv,
            inverse: Some(self.map.clone()),
        })
    }

    /// `∂ψ^j/∂x^i` as `[j][i]`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.map.iter().map(|f| self.source.coords().iter().map(|x| f.diff(x)).collect()).collect()
    }

    /// Substitution sending source coordinates to `ψ⁻¹(y)`.
    pub fn inverse_substitution(&self) -> Result<HashMap<String, Expr>, GeometryError> {
        let inv = self.inverse.as_ref().ok_or(GeometryError::MissingInverse)?;
        Ok(self.source.coords().iter().cloned().zip(inv.iter().cloned()).collect())
    }

    /// Substitution sending target coordinates to `ψ(x)`.
    pub fn forward_substitution(&self) -> HashMap<String, Expr> {
        self.target.coords().iter().cloned().zip(self.map.iter().cloned()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut p = x.to_vec();
        self.source.domain.reduce(&mut p);
        let mut y = Compiled::new(&self.map, self.source.coords())?.eval(&p)?;
        self.target.domain.reduce(&mut y);
        Ok(y)
    }

    /// `ψ⁻¹(y)`: the inverse expression if present, otherwise Newton iteration
    /// from `y` itself (suitable for near-identity maps).
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut q = y.to_vec();
        self.target.domain.reduce(&mut q);
        if let Some(inv) = &self.inverse {
            let mut x = Compiled::new(inv, self.target.coords())?.eval(&q)?;
            self.source.domain.reduce(&mut x);
            return Ok(x);
        }
        self.newton_inverse(&q, &q)
    }

    /// Solve `ψ(x) = y` by Newton's method from `guess`; periodic components
    /// are compared modulo 1.
    pub fn newton_inverse(&self, y: &[f64], guess: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let m = self.dim();
        let mut exprs = self.map.clone();
        for row in self.jacobian() {
            exprs.extend(row);
        }
        let tape = Compiled::new(&exprs, self.source.coords())?;
        let mut x = guess.to_vec();
        for _ in 0..60 {
            let v = tape.eval(&x)?;
            let mut r = DVector::zeros(m);
            for j in 0..m {
                let mut d = v[j] - y[j];
                if self.target.domain.periodic[j] {
                    d -= d.round();
                }
                r[j] = d;
            }
            if r.norm() < 1e-14 {
                break;
            }
            let jac = DMatrix::from_fn(m, m, |j, i| v[m + j * m + i]);
            let step = jac
                .lu()
                .solve(&r)
                .ok_or_else(|| GeometryError::Singular("Jacobian singular in Newton inverse".into()))?;
            for i in 0..m {
                x[i] -= step[i];
            }
        }
        let check = tape.eval(&x)?;
        let res: f64 = (0..m)
            .map(|j| {
                let mut d = check[j] - y[j];
                if self.target.domain.periodic[j] {
                    d -= d.round();
                }
                d.abs()
            })
            .fold(0.0, f64::max);
        if !(res < 1e-10) {
            return Err(GeometryError::Singular(format!("Newton inverse did not converge (residual {res:e})")));
        }
        self.source.domain.reduce(&mut x);
        Ok(x)
    }

    /// Max distance between `ψ(ψ⁻¹(y))` and `y` over sampled target points.
    pub fn check_inverse(&self, samples: Samples) -> Result<f64, GeometryError> {
        let mut worst: f64 = 0.0;
        for y in samples.points(&self.target) {
            let x = self.apply_inverse(&y)?;
            let back = self.apply(&x)?;
            worst = worst.max(self.target.distance(&back, &y));
        }
        Ok(worst)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &DiffeoSpec) -> Result<DiffeoSpec, GeometryError> {
        same_chart(&first.target, &self.source)?;
        let fwd: HashMap<String, Expr> = self.source.coords().iter().cloned().zip(first.map.iter().cloned()).collect();
        let map = self.map.iter().map(|e| e.substitute(&fwd)).collect();
        let inverse = match (&self.inverse, &first.inverse) {
            (Some(a), Some(b)) => {
                let back: HashMap<String, Expr> = first.target.coords().iter().cloned().zip(a.iter().cloned()).collect();
                Some(b.iter().map(|e| e.substitute(&back)).collect())
            }
            _ => None,
        };
        Ok(DiffeoSpec {
            source: first.source.clone(),
            target: self.target.clone(),
            map,
            inverse,
        })
    }
}

/// `(ψ_*X)^j(y) = (∂ψ^j/∂x^i X^i)∘ψ⁻¹(y)`.
pub fn pushforward_field(psi: &DiffeoSpec, x: &VectorField) -> Result<VectorField, GeometryError> {
    same_chart(&psi.source, &x.chart)?;
    let sub = psi.inverse_substitution()?;
    let jac = psi.jacobian();
    let comps = jac
        .iter()
        .map(|row| {
            let e = crate::expr::sum(row.iter().zip(&x.comps).filter(|(a, b)| !a.is_zero() && !b.is_zero()).map(|(a, b)| a * b));
            e.substitute(&sub)
        })
        .collect();
    VectorField::new(psi.target.clone(), comps)
}

/// `(ψ*α)_I(x) = Σ_J α_J(ψ(x)) det(∂ψ^J/∂x^I)` for `α` on the target chart.
pub fn pullback_form(psi: &DiffeoSpec, a: &DifferentialForm) -> Result<DifferentialForm, GeometryError> {
    same_chart(&psi.target, &a.chart)?;
    let m = psi.source.dim();
    if a.degree > m {
        return Err(GeometryError::Dimension("form degree exceeds dimension".into()));
    }
    let sub = psi.forward_substitution();
    let jac = psi.jacobian();
    let mut out = DifferentialForm::zero(&psi.source, a.degree);
    let tuples = increasing_tuples(m, a.degree);
    for (jdx, c) in a.terms() {
        let c = c.substitute(&sub);
        for idx in &tuples {
            let minor: Vec<Vec<Expr>> = jdx.iter().map(|&j| idx.iter().map(|&i| jac[j][i].clone()).collect()).collect();
            let d = det_expr(&minor);
            if !d.is_zero() {
                out.add_term(idx, &c * &d)?;
            }
        }
    }
    Ok(out)
}

pub(crate) fn increasing_tuples(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, parse, SYMBOLIC_TOL};
    use crate::geometry::{exterior_derivative, lie_bracket, Chart};

    fn exprs(s: &[&str]) -> Vec<Expr> {
        s.iter().map(|t| parse(t).unwrap()).collect()
    }

    fn r2() -> ChartRef {
        Chart::euclidean("R2", &["p", "q"], -1.0, 1.0)
    }

    #[test]
    fn linear_scaling() {
        let c = Chart::euclidean("R", &["x"], -1.0, 1.0);
        let psi = DiffeoSpec::new(c.clone(), c.clone(), exprs(&["2*x"]), Some(exprs(&["x/2"]))).unwrap();
        let pushed = pushforward_field(&psi, &VectorField::coordinate(&c, 0)).unwrap();
        assert_eq!(pushed.comps[0].as_const().unwrap().value(), 2.0);
        let pulled = pullback_form(&psi, &DifferentialForm::dx(&c, 0)).unwrap();
        assert_eq!(pulled.component(&[0]).as_const().unwrap().value(), 2.0);
    }

    #[test]
    fn shear_pushforward_matches_jacobian() {
        let c = r2();
        let psi = DiffeoSpec::new(c.clone(), c.clone(), exprs(&["p+q", "q"]), Some(exprs(&["p-q", "q"]))).unwrap();
        let pushed = pushforward_field(&psi, &VectorField::coordinate(&c, 1)).unwrap();
        // Jacobian column for ∂q is (1, 1)
        for e in &pushed.comps {
            assert_eq!(e.as_const().unwrap().value(), 1.0);
        }
    }

    #[test]
    fn symplectic_shear_preserves_form() {
        let c = r2();
        let psi = DiffeoSpec::new(c.clone(), c.clone(), exprs(&["p", "q+p^2"]), Some(exprs(&["p", "q-p^2"]))).unwrap();
        let w = DifferentialForm::canonical(&c).unwrap();
        let pulled = pullback_form(&psi, &w).unwrap();
        let a = pulled.component(&[1, 0]);
        assert!(approx_equal(&a, &Expr::one(), &c.domain, 50, SYMBOLIC_TOL).unwrap().equal);
    }

    #[test]
    fn pullback_commutes_with_d() {
        let c = r2();
        let psi = DiffeoSpec::new(c.clone(), c.clone(), exprs(&["p+sin(q)", "q"]), Some(exprs(&["p-sin(q)", "q"]))).unwrap();
        let a = DifferentialForm::one_form(&c, exprs(&["p*q^2", "cos(p)"])).unwrap();
        let lhs = pullback_form(&psi, &exterior_derivative(&a).unwrap()).unwrap();
        let rhs = exterior_derivative(&pullback_form(&psi, &a).unwrap()).unwrap();
        assert!(approx_equal(&lhs.component(&[0, 1]), &rhs.component(&[0, 1]), &c.domain, 50, SYMBOLIC_TOL).unwrap().equal);
    }

    #[test]
    fn pushforward_respects_brackets() {
        let c = r2();
        let psi = DiffeoSpec::new(c.clone(), c.clone(), exprs(&["p+q^3", "q"]), Some(exprs(&["p-q^3", "q"]))).unwrap();
        let x = VectorField::new(c.clone(), exprs(&["q", "p^2"])).unwrap();
        let y = VectorField::new(c.clone(), exprs(&["sin(p)", "1"])).unwrap();
        let lhs = pushforward_field(&psi, &lie_bracket(&x, &y).unwrap()).unwrap();
        let rhs = lie_bracket(&pushforward_field(&psi, &x).unwrap(), &pushforward_field(&psi, &y).unwrap()).unwrap();
        for j in 0..2 {
            assert!(approx_equal(&lhs.comps[j], &rhs.comps[j], &c.domain, 50, 1e-8).unwrap().equal);
        }
    }

    #[test]
    fn newton_inverse_on_torus() {
        let t = Chart::torus("T2", &["x", "y"]);
        let psi = DiffeoSpec::new(t.clone(), t.clone(), exprs(&["x + 0.05*sin(2*pi*x)/(2*pi)", "y"]), None).unwrap();
        assert!(psi.check_inverse(Samples::new(20)).unwrap() < 1e-10);
        assert!(matches!(pushforward_field(&psi, &VectorField::coordinate(&t, 0)), Err(GeometryError::MissingInverse)));
    }
}
