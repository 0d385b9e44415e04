use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::expr::{Compiled, Expr};
use crate::geometry::{BiLagrangianStructure, ChartRef, Samples};
use crate::numeric;

use super::table::ConnectionTable;
use super::HessError;

/// Default pass threshold for the three Hess residuals.
pub const HESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessReport {
    pub pass: bool,
    pub torsion: f64,
    pub parallel: f64,
    pub preservation: f64,
    pub tol: f64,
    pub samples: usize,
}

/// Pointwise values of everything the residuals need.
struct Tapes {
    m: usize,
    nf: usize,
    frame: Compiled,
    dframe: Compiled,
    gamma: Compiled,
    omega: Compiled,
    domega: Compiled,
}

impl Tapes {
    fn new(c: &ConnectionTable, b: &BiLagrangianStructure) -> Result<Tapes, HessError> {
        let coords = c.chart.coords();
        let m = c.chart.dim();
        let frame: Vec<Expr> = c.frame.iter().flat_map(|f| f.comps.iter().cloned()).collect();
        let dframe: Vec<Expr> = frame.iter().flat_map(|e| coords.iter().map(|x| e.diff(x))).collect();
        let gamma: Vec<Expr> = c.gamma.iter().flatten().flatten().cloned().collect();
        let w = b.omega.matrix()?;
        let omega: Vec<Expr> = w.iter().flatten().cloned().collect();
        let domega: Vec<Expr> = omega.iter().flat_map(|e| coords.iter().map(|x| e.diff(x))).collect();
        Ok(Tapes {
            m,
            nf: c.frame.len(),
            frame: Compiled::new(&frame, coords)?,
            dframe: Compiled::new(&dframe, coords)?,
            gamma: Compiled::new(&gamma, coords)?,
            omega: Compiled::new(&omega, coords)?,
            domega: Compiled::new(&domega, coords)?,
        })
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Torsion, `∇ω` and preservation residuals of `c` against `b`, each scaled by
/// the magnitude of the terms it compares.
pub fn hess_verify(
    c: &ConnectionTable,
    b: &BiLagrangianStructure,
    samples: Samples,
    tol: f64,
) -> Result<HessReport, HessError> {
    crate::geometry::same_chart(&c.chart, &b.chart)?;
    let t = Tapes::new(c, b)?;
    let (m, nf) = (t.m, t.nf);
    let half = b.f1.len();
    let (mut tor, mut par, mut pres): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let pts = samples.points(&c.chart);
    for p in &pts {
        let mut x = p.clone();
        c.chart.domain.reduce(&mut x);
        let fv = t.frame.eval(&x)?;
        let dv = t.dframe.eval(&x)?;
        let gv = t.gamma.eval(&x)?;
        let wv = t.omega.eval(&x)?;
        let dwv = t.domega.eval(&x)?;
        let e: Vec<DVector<f64>> = (0..nf).map(|i| DVector::from_column_slice(&fv[i * m..(i + 1) * m])).collect();
        // de[i] is the Jacobian of E_i: (r, l) = ∂_l E_i^r
        let de: Vec<DMatrix<f64>> = (0..nf)
            .map(|i| DMatrix::from_fn(m, m, |r, l| dv[(i * m + r) * m + l]))
            .collect();
        let w = DMatrix::from_row_slice(m, m, &wv);
        let dw: Vec<DMatrix<f64>> = (0..m).map(|l| DMatrix::from_fn(m, m, |a, bb| dwv[(a * m + bb) * m + l])).collect();
        let g = |i: usize, j: usize, k: usize| gv[(i * nf + j) * nf + k];
        let nabla = |i: usize, j: usize| -> DVector<f64> {
            (0..nf).fold(DVector::zeros(m), |acc, k| acc + &e[k] * g(i, j, k))
        };
        let nab: Vec<Vec<DVector<f64>>> = (0..nf).map(|i| (0..nf).map(|j| nabla(i, j)).collect()).collect();

        for i in 0..nf {
            for j in i + 1..nf {
                let br = &de[j] * &e[i] - &de[i] * &e[j];
                let tv = &nab[i][j] - &nab[j][i] - &br;
                let scale = 1.0 + inf_norm(&nab[i][j]).max(inf_norm(&nab[j][i])).max(inf_norm(&br));
                tor = tor.max(inf_norm(&tv) / scale);
            }
        }

        let omega = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &w * v)[(0, 0)];
        for i in 0..nf {
            for j in 0..nf {
                for k in 0..nf {
                    // E_i(ω(E_j,E_k)) by the product rule on components
                    let dj = &de[j] * &e[i];
                    let dk = &de[k] * &e[i];
                    let dww = (0..m).fold(DMatrix::zeros(m, m), |acc, l| acc + &dw[l] * e[i][l]);
                    let deriv = omega(&dj, &e[k]) + (e[j].transpose() * &dww * &e[k])[(0, 0)] + omega(&e[j], &dk);
                    let t1 = omega(&nab[i][j], &e[k]);
                    let t2 = omega(&e[j], &nab[i][k]);
                    let scale = 1.0 + deriv.abs().max(t1.abs()).max(t2.abs());
                    par = par.max((deriv - t1 - t2).abs() / scale);
                }
            }
        }

        let f1 = numeric::columns(&e[..half].iter().map(|v| v.iter().copied().collect()).collect::<Vec<_>>(), m);
        let f2 = numeric::columns(&e[half..].iter().map(|v| v.iter().copied().collect()).collect::<Vec<_>>(), m);
        for i in 0..nf {
            for j in 0..nf {
                let span = if j < half { &f1 } else { &f2 };
                let v: Vec<f64> = nab[i][j].iter().copied().collect();
                let r = numeric::span_residual(span, &v) / (1.0 + inf_norm(&nab[i][j]));
                pres = pres.max(r);
            }
        }
    }
    let nanless = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    let (tor, par, pres) = (nanless(tor), nanless(par), nanless(pres));
    Ok(HessReport {
        pass: tor <= tol && par <= tol && pres <= tol,
        torsion: tor,
        parallel: par,
        preservation: pres,
        tol,
        samples: pts.len(),
    })
}

/// Max scaled difference between two coefficient tables with equal frames.
pub fn compare_tables(a: &ConnectionTable, b: &ConnectionTable, samples: Samples) -> Result<f64, HessError> {
    crate::geometry::same_chart(&a.chart, &b.chart)?;
    if a.dim() != b.dim() {
        return Ok(f64::INFINITY);
    }
    let ea: Vec<Expr> = a.gamma.iter().flatten().flatten().cloned().collect();
    let eb: Vec<Expr> = b.gamma.iter().flatten().flatten().cloned().collect();
    let ta = Compiled::new(&ea, a.chart.coords())?;
    let tb = Compiled::new(&eb, b.chart.coords())?;
    let mut worst: f64 = 0.0;
    for mut p in samples.points(&a.chart) {
        a.chart.domain.reduce(&mut p);
        let va = ta.eval(&p)?;
        let vb = tb.eval(&p)?;
        for (x, y) in va.iter().zip(&vb) {
            let d = (x - y).abs() / (1.0 + x.abs().max(y.abs()));
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    Ok(worst)
}

/// Numeric frame and the pairing as functions of a point, for the probe.
struct Probe<'a> {
    chart: &'a ChartRef,
    frame: Compiled,
    omega: Compiled,
    m: usize,
    nf: usize,
}

impl Probe<'_> {
    fn frame_at(&self, x: &[f64]) -> Result<Vec<DVector<f64>>, HessError> {
        let mut y = x.to_vec();
        self.chart.domain.reduce(&mut y);
        let v = self.frame.eval(&y)?;
        Ok((0..self.nf).map(|i| DVector::from_column_slice(&v[i * self.m..(i + 1) * self.m])).collect())
    }

    fn omega_at(&self, x: &[f64]) -> Result<DMatrix<f64>, HessError> {
        let mut y = x.to_vec();
        self.chart.domain.reduce(&mut y);
        Ok(DMatrix::from_row_slice(self.m, self.m, &self.omega.eval(&y)?))
    }

    /// Five-point derivative of `f` along `dir` at `x`.
    fn directional<T, F>(&self, x: &[f64], dir: &DVector<f64>, f: F) -> Result<T, HessError>
    where
        F: Fn(&[f64]) -> Result<T, HessError>,
        T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Clone,
    {
        let h = 1e-3;
        let at = |s: f64| -> Result<T, HessError> {
            let y: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + s * d).collect();
            f(&y)
        };
        let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
        Ok(((p1 - m1) * 8.0 + (m2 - p2)) * (1.0 / (12.0 * h)))
    }

    fn bracket(&self, x: &[f64], i: usize, j: usize, e: &[DVector<f64>]) -> Result<DVector<f64>, HessError> {
        let dj = self.directional(x, &e[i], |y| Ok(self.frame_at(y)?[j].clone()))?;
        let di = self.directional(x, &e[j], |y| Ok(self.frame_at(y)?[i].clone()))?;
        Ok(dj - di)
    }
}

/// Re-derive the tangential coefficients at each sample by finite differences
/// and a dense solve of `ω(∇_{E_i}E_j, E_{n+k}) = RHS`, and return the largest
/// scaled disagreement with `c`.
pub fn uniqueness_probe(c: &ConnectionTable, b: &BiLagrangianStructure, samples: Samples) -> Result<f64, HessError> {
    let m = c.chart.dim();
    let nf = c.frame.len();
    let n = nf / 2;
    let frame_exprs: Vec<Expr> = b.frame().iter().flat_map(|f| f.comps.iter().cloned()).collect();
    let probe = Probe {
        chart: &c.chart,
        frame: Compiled::new(&frame_exprs, c.chart.coords())?,
        omega: Compiled::new(&b.omega.matrix()?.into_iter().flatten().collect::<Vec<_>>(), c.chart.coords())?,
        m,
        nf,
    };
    let gamma: Vec<Expr> = c.gamma.iter().flatten().flatten().cloned().collect();
    let gtape = Compiled::new(&gamma, c.chart.coords())?;
    let mut worst: f64 = 0.0;
    for p in samples.points(&c.chart) {
        let mut x = p.clone();
        c.chart.domain.reduce(&mut x);
        let e = probe.frame_at(&x)?;
        let w = probe.omega_at(&x)?;
        let emat = numeric::columns(&e.iter().map(|v| v.iter().copied().collect()).collect::<Vec<_>>(), m);
        let lu = emat.clone().lu();
        let coeffs = |v: &DVector<f64>| -> Result<DVector<f64>, HessError> {
            lu.solve(v).ok_or_else(|| HessError::Singular {
                what: "frame matrix".into(),
                point: p.clone(),
            })
        };
        let pair = |y: &[f64], d: usize, k: usize| -> Result<f64, HessError> {
            let ey = probe.frame_at(y)?;
            let wy = probe.omega_at(y)?;
            Ok((ey[d].transpose() * wy * &ey[k])[(0, 0)])
        };
        let pmat = DMatrix::from_fn(n, n, |d, k| (e[d].transpose() * &w * &e[n + k])[(0, 0)]);
        let gv = gtape.eval(&x)?;
        let g = |i: usize, j: usize, k: usize| gv[(i * nf + j) * nf + k];

        // F1: unknown λ with Σ_d λ_d P[d][k] = E_a(P[j][k]) − ω(E_j, pr₂[E_a, E_{n+k}])
        for a in 0..n {
            for j in 0..n {
                let mut rhs = DVector::zeros(n);
                for k in 0..n {
                    let deriv = probe.directional(&x, &e[a], |y| pair(y, j, n + k))?;
                    let br = coeffs(&probe.bracket(&x, a, n + k, &e)?)?;
                    let pr2 = (n..nf).fold(DVector::zeros(m), |acc, l| acc + &e[l] * br[l]);
                    rhs[k] = deriv - (e[j].transpose() * &w * pr2)[(0, 0)];
                }
                let lambda = pmat
                    .transpose()
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| HessError::Singular {
                        what: "pairing ω(F1, F2)".into(),
                        point: p.clone(),
                    })?;
                for d in 0..n {
                    let got = g(a, j, d);
                    worst = worst.max((lambda[d] - got).abs() / (1.0 + lambda[d].abs()));
                }
            }
        }
        // F2: unknown μ with Σ_e P[d][e] μ_e = E_{n+b}(P[d][j]) − ω(pr₁[E_{n+b}, E_d], E_{n+j})
        for bb in 0..n {
            for j in 0..n {
                let mut rhs = DVector::zeros(n);
                for d in 0..n {
                    let deriv = probe.directional(&x, &e[n + bb], |y| pair(y, d, n + j))?;
                    let br = coeffs(&probe.bracket(&x, n + bb, d, &e)?)?;
                    let pr1 = (0..n).fold(DVector::zeros(m), |acc, l| acc + &e[l] * br[l]);
                    rhs[d] = deriv - (pr1.transpose() * &w * &e[n + j])[(0, 0)];
                }
                let mu = pmat.clone().lu().solve(&rhs).ok_or_else(|| HessError::Singular {
                    what: "pairing ω(F1, F2)".into(),
                    point: p.clone(),
                })?;
                for k in 0..n {
                    let got = g(n + bb, n + j, n + k);
                    worst = worst.max((mu[k] - got).abs() / (1.0 + mu[k].abs()));
                }
            }
        }
    }
    Ok(worst)
}
