use std::collections::HashMap;

use super::{ChartRef, GeometryError};
use crate::expr::{sum, Compiled, Expr};

/// Vector field `X = X^i ∂_i` on a chart.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub chart: ChartRef,
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: ChartRef, comps: Vec<Expr>) -> Result<VectorField, GeometryError> {
        if comps.len() != chart.dim() {
            return Err(GeometryError::Dimension(format!(
                "vector field has {} components on a {}-dimensional chart",
                comps.len(),
                chart.dim()
            )));
        }
        Ok(VectorField { chart, comps })
    }

    pub fn zero(chart: &ChartRef) -> VectorField {
        VectorField {
            chart: chart.clone(),
            comps: vec![Expr::zero(); chart.dim()],
        }
    }

    /// Coordinate field `∂/∂x^i`.
    pub fn coordinate(chart: &ChartRef, i: usize) -> VectorField {
        let mut comps = vec![Expr::zero(); chart.dim()];
        comps[i] = Expr::one();
        VectorField {
            chart: chart.clone(),
            comps,
        }
    }

    /// Coordinate field by name.
    pub fn partial(chart: &ChartRef, coord: &str) -> Result<VectorField, GeometryError> {
        let i = chart
            .index(coord)
            .ok_or_else(|| GeometryError::Invalid(format!("no coordinate `{coord}` on chart {}", chart.name)))?;
        Ok(VectorField::coordinate(chart, i))
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Directional derivative `X(f) = X^i ∂f/∂x^i`.
    pub fn apply(&self, f: &Expr) -> Expr {
        sum(self
            .chart
            .coords()
            .iter()
            .zip(&self.comps)
            .filter(|(_, c)| !c.is_zero())
            .map(|(x, c)| c * &f.diff(x)))
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().map(|c| f * c).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn substitute(&self, map: &HashMap<String, Expr>, chart: &ChartRef) -> VectorField {
        VectorField {
            chart: chart.clone(),
            comps: self.comps.iter().map(|c| c.substitute(map)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    pub fn compile(&self) -> Result<Compiled, GeometryError> {
        Ok(Compiled::new(&self.comps, self.chart.coords())?)
    }

    /// Components at a point (periodic coordinates reduced first).
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut p = point.to_vec();
        self.chart.domain.reduce(&mut p);
        Ok(self.compile()?.eval(&p)?)
    }
}

pub(crate) fn same_chart(a: &ChartRef, b: &ChartRef) -> Result<(), GeometryError> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(GeometryError::ChartMismatch(a.name.clone(), b.name.clone()))
    }
}

/// `[X,Y]^j = X^i ∂_i Y^j − Y^i ∂_i X^j`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, GeometryError> {
    same_chart(&x.chart, &y.chart)?;
    let comps = (0..x.dim()).map(|j| &x.apply(&y.comps[j]) - &y.apply(&x.comps[j])).collect();
    Ok(VectorField {
        chart: x.chart.clone(),
        comps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, parse, SYMBOLIC_TOL};
    use crate::geometry::Chart;

    fn r2() -> ChartRef {
        Chart::euclidean("R2", &["p", "q"], -1.0, 1.0)
    }

    fn vf(c: &ChartRef, s: [&str; 2]) -> VectorField {
        VectorField::new(c.clone(), s.iter().map(|t| parse(t).unwrap()).collect()).unwrap()
    }

    /// Finite-difference flow commutator: `[X,Y]` at `x0` from central
    /// differences of the component functions, independent of symbolic diff.
    fn fd_bracket(x: &VectorField, y: &VectorField, x0: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        let m = x0.len();
        let xv = x.eval(x0).unwrap();
        let yv = y.eval(x0).unwrap();
        let dir = |f: &VectorField, v: &[f64]| -> Vec<f64> {
            let plus: Vec<f64> = x0.iter().zip(v).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x0.iter().zip(v).map(|(a, b)| a - h * b).collect();
            let fp = f.eval(&plus).unwrap();
            let fm = f.eval(&minus).unwrap();
            (0..m).map(|j| (fp[j] - fm[j]) / (2.0 * h)).collect()
        };
        let dy = dir(y, &xv);
        let dx = dir(x, &yv);
        (0..m).map(|j| dy[j] - dx[j]).collect()
    }

    #[test]
    fn coordinate_fields_commute() {
        let c = r2();
        let b = lie_bracket(&VectorField::coordinate(&c, 0), &VectorField::coordinate(&c, 1)).unwrap();
        assert!(b.is_zero());
    }

    #[test]
    fn bracket_examples_match_fd_oracle() {
        let c = r2();
        let cases = [
            (vf(&c, ["1", "0"]), vf(&c, ["q", "0"]), ["0", "0"]),
            (vf(&c, ["0", "1"]), vf(&c, ["q*p", "0"]), ["p", "0"]),
        ];
        for (x, y, expected) in cases {
            let b = lie_bracket(&x, &y).unwrap();
            for (bc, ec) in b.comps.iter().zip(expected) {
                assert!(approx_equal(bc, &parse(ec).unwrap(), &c.domain, 50, SYMBOLIC_TOL).unwrap().equal);
            }
            for pt in c.sample_points(10, 3) {
                let fd = fd_bracket(&x, &y, &pt);
                let sym = b.eval(&pt).unwrap();
                for j in 0..2 {
                    assert!((fd[j] - sym[j]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn chart_mismatch_rejected() {
        let a = r2();
        let b = Chart::euclidean("other", &["p", "q"], 0.0, 1.0);
        let r = lie_bracket(&VectorField::coordinate(&a, 0), &VectorField::coordinate(&b, 0));
        assert!(matches!(r, Err(GeometryError::ChartMismatch(..))));
    }
}
