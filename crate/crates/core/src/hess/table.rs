use crate::expr::{sum, Compiled, Expr};
use crate::geometry::{lie_bracket, ChartRef, Samples, VectorField};

use super::HessError;

/// Christoffel symbols in a frame: `∇_{E_i} E_j = Σ_k gamma[i][j][k] E_k`.
#[derive(Debug, Clone)]
pub struct ConnectionTable {
    pub chart: ChartRef,
    pub frame: Vec<VectorField>,
    pub gamma: Vec<Vec<Vec<Expr>>>,
    /// Rows of the inverse frame matrix: `coframe[k] · V` is the `E_k`
    /// coefficient of `V`.
    coframe: Vec<Vec<Expr>>,
}

/// Gauss–Jordan inverse of a square expression matrix. Pivots are chosen by
/// magnitude at `reference`, so the result is valid wherever those pivots
/// stay away from zero.
pub fn invert_symbolic(a: &[Vec<Expr>], vars: &[String], reference: &[f64]) -> Result<Vec<Vec<Expr>>, HessError> {
    let n = a.len();
    let mut m: Vec<Vec<Expr>> = a.to_vec();
    let mut inv: Vec<Vec<Expr>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect())
        .collect();
    let value = |e: &Expr| e.eval(vars, reference).unwrap_or(0.0);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, value(&m[r][col]).abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > 1e-12) {
            return Err(HessError::Singular {
                what: "frame matrix".into(),
                point: reference.to_vec(),
            });
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col].clone();
        if !p.is_one() {
            for j in 0..n {
                m[col][j] = &m[col][j] / &p;
                inv[col][j] = &inv[col][j] / &p;
            }
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for j in 0..n {
                if !m[col][j].is_zero() {
                    m[r][j] = &m[r][j] - &(&f * &m[col][j]);
                }
                if !inv[col][j].is_zero() {
                    inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
                }
            }
        }
    }
    Ok(inv)
}

fn reference_point(chart: &ChartRef) -> Vec<f64> {
    chart
        .sample_points(1, crate::expr::DEFAULT_SEED)
        .into_iter()
        .next()
        .unwrap_or_else(|| chart.domain.center())
}

impl ConnectionTable {
    pub fn new(chart: ChartRef, frame: Vec<VectorField>, gamma: Vec<Vec<Vec<Expr>>>) -> Result<ConnectionTable, HessError> {
        let n = frame.len();
        if n != chart.dim() || gamma.len() != n || gamma.iter().any(|g| g.len() != n || g.iter().any(|h| h.len() != n)) {
            return Err(HessError::Geometry(crate::geometry::GeometryError::Dimension(format!(
                "connection table needs a frame of {} fields and an {n}x{n}x{n} coefficient array",
                chart.dim()
            ))));
        }
        let a: Vec<Vec<Expr>> = (0..n).map(|r| frame.iter().map(|f| f.comps[r].clone()).collect()).collect();
        let coframe = invert_symbolic(&a, chart.coords(), &reference_point(&chart))?;
        Ok(ConnectionTable {
            chart,
            frame,
            gamma,
            coframe,
        })
    }

    /// Table with the same frame and all coefficients zero.
    pub fn zero(chart: ChartRef, frame: Vec<VectorField>) -> Result<ConnectionTable, HessError> {
        let n = frame.len();
        ConnectionTable::new(chart, frame, vec![vec![vec![Expr::zero(); n]; n]; n])
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn coframe(&self) -> &[Vec<Expr>] {
        &self.coframe
    }

    /// Frame coefficients of a field.
    pub fn expand(&self, v: &VectorField) -> Vec<Expr> {
        self.coframe
            .iter()
            .map(|row| sum(row.iter().zip(&v.comps).filter(|(a, b)| !a.is_zero() && !b.is_zero()).map(|(a, b)| a * b)))
            .collect()
    }

    /// `Σ_k c_k E_k` in coordinate components.
    pub fn combine(&self, coeffs: &[Expr]) -> VectorField {
        let m = self.chart.dim();
        let comps = (0..m)
            .map(|r| {
                sum(coeffs
                    .iter()
                    .zip(&self.frame)
                    .filter(|(c, e)| !c.is_zero() && !e.comps[r].is_zero())
                    .map(|(c, e)| c * &e.comps[r]))
            })
            .collect();
        VectorField {
            chart: self.chart.clone(),
            comps,
        }
    }

    /// Max scaled residual of `combine(expand(v)) - v` over samples.
    pub fn expansion_residual(&self, v: &VectorField, samples: Samples) -> Result<f64, HessError> {
        let back = self.combine(&self.expand(v));
        let exprs: Vec<Expr> = back.comps.iter().chain(&v.comps).cloned().collect();
        let tape = Compiled::new(&exprs, self.chart.coords())?;
        let m = self.chart.dim();
        let mut worst: f64 = 0.0;
        for mut p in samples.points(&self.chart) {
            self.chart.domain.reduce(&mut p);
            let vals = tape.eval(&p)?;
            let norm = vals[m..].iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let diff = (0..m).fold(0.0f64, |a, r| a.max((vals[r] - vals[m + r]).abs()));
            worst = worst.max(diff / (1.0 + norm));
        }
        Ok(worst)
    }

    /// Frame coefficients of `∇_X Y` by the Leibniz rule.
    pub fn covariant_coeffs(&self, x: &VectorField, y: &VectorField) -> Vec<Expr> {
        let n = self.dim();
        let xc = self.expand(x);
        let yc = self.expand(y);
        let mut out = vec![Expr::zero(); n];
        for i in 0..n {
            if xc[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if yc[j].is_zero() {
                    continue;
                }
                let d = self.frame[i].apply(&yc[j]);
                if !d.is_zero() {
                    out[j] = &out[j] + &(&xc[i] * &d);
                }
                for k in 0..n {
                    let g = &self.gamma[i][j][k];
                    if !g.is_zero() {
                        out[k] = &out[k] + &(&(&xc[i] * &yc[j]) * g);
                    }
                }
            }
        }
        out
    }

    /// `∇_X Y` with `X`, `Y` expanded in the frame.
    pub fn covariant_derivative(&self, x: &VectorField, y: &VectorField, samples: Samples) -> Result<VectorField, HessError> {
        for v in [x, y] {
            crate::geometry::same_chart(&self.chart, &v.chart)?;
            let r = self.expansion_residual(v, samples)?;
            if r > 1e-8 {
                return Err(HessError::Expansion {
                    residual: r,
                    point: Vec::new(),
                });
            }
        }
        Ok(self.combine(&self.covariant_coeffs(x, y)))
    }

    /// `T(E_i, E_j)` for `i < j`, in coordinate components.
    pub fn torsion(&self) -> Result<Vec<((usize, usize), VectorField)>, HessError> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let coeffs: Vec<Expr> = (0..n).map(|k| &self.gamma[i][j][k] - &self.gamma[j][i][k]).collect();
                let t = self.combine(&coeffs).sub(&lie_bracket(&self.frame[i], &self.frame[j])?)?;
                out.push(((i, j), t));
            }
        }
        Ok(out)
    }

    /// Frame coefficients `R^m_{ijk}` of `R(E_i,E_j)E_k`, for `i < j`.
    pub fn curvature_coeffs(&self) -> Result<Vec<((usize, usize, usize), Vec<Expr>)>, HessError> {
        let n = self.dim();
        let g = &self.gamma;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = self.expand(&lie_bracket(&self.frame[i], &self.frame[j])?);
                for k in 0..n {
                    let coeffs = (0..n)
                        .map(|m| {
                            let mut terms = vec![self.frame[i].apply(&g[j][k][m]), -self.frame[j].apply(&g[i][k][m])];
                            for l in 0..n {
                                if !g[j][k][l].is_zero() && !g[i][l][m].is_zero() {
                                    terms.push(&g[j][k][l] * &g[i][l][m]);
                                }
                                if !g[i][k][l].is_zero() && !g[j][l][m].is_zero() {
                                    terms.push(-(&g[i][k][l] * &g[j][l][m]));
                                }
                                if !c[l].is_zero() && !g[l][k][m].is_zero() {
                                    terms.push(-(&c[l] * &g[l][k][m]));
                                }
                            }
                            sum(terms)
                        })
                        .collect();
                    out.push(((i, j, k), coeffs));
                }
            }
        }
        Ok(out)
    }

    /// `R(E_i,E_j)E_k` for `i < j`, in coordinate components.
    pub fn curvature(&self) -> Result<Vec<((usize, usize, usize), VectorField)>, HessError> {
        Ok(self
            .curvature_coeffs()?
            .into_iter()
            .map(|(idx, c)| (idx, self.combine(&c)))
            .collect())
    }

    /// Largest curvature frame coefficient over the samples.
    pub fn max_curvature(&self, samples: Samples) -> Result<f64, HessError> {
        let exprs: Vec<Expr> = self.curvature_coeffs()?.into_iter().flat_map(|(_, c)| c).collect();
        max_abs(&exprs, &self.chart, samples)
    }

    /// All curvature components vanish at the samples (within `tol`).
    pub fn is_flat(&self, samples: Samples, tol: f64) -> Result<bool, HessError> {
        Ok(self.max_curvature(samples)? <= tol)
    }

    /// Whether `gamma[i][j][k] = 0` whenever `E_j` and `E_k` lie in
    /// different halves of the frame.
    pub fn preserves_halves(&self) -> bool {
        let n = self.dim();
        let h = n / 2;
        (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| (j < h) == (k < h) || self.gamma[i][j][k].is_zero())))
    }
}

pub(crate) fn max_abs(exprs: &[Expr], chart: &ChartRef, samples: Samples) -> Result<f64, HessError> {
    if exprs.is_empty() {
        return Ok(0.0);
    }
    let tape = Compiled::new(exprs, chart.coords())?;
    let mut worst: f64 = 0.0;
    for mut p in samples.points(chart) {
        chart.domain.reduce(&mut p);
        for v in tape.eval(&p)? {
            worst = worst.max(if v.is_nan() { f64::INFINITY } else { v.abs() });
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, parse};
    use crate::geometry::Chart;

    #[test]
    fn symbolic_inverse_is_inverse() {
        let c = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let a = vec![
            vec![parse("1").unwrap(), parse("q*p").unwrap()],
            vec![parse("0").unwrap(), parse("1").unwrap()],
        ];
        let inv = invert_symbolic(&a, c.coords(), &[0.3, 0.2]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let prod = sum((0..2).map(|k| &inv[i][k] * &a[k][j]));
                let id = if i == j { Expr::one() } else { Expr::zero() };
                assert!(approx_equal(&prod, &id, &c.domain, 20, 1e-12).unwrap().equal);
            }
        }
    }

    #[test]
    fn singular_frame_rejected() {
        let c = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let f = VectorField::coordinate(&c, 0);
        assert!(matches!(
            ConnectionTable::zero(c.clone(), vec![f.clone(), f]),
            Err(HessError::Singular { .. })
        ));
    }
}
