use crate::expr::{sum, Expr};
use crate::geometry::{
    lie_bracket, pullback_form, pushforward_field, validate_bilagrangian, BiLagrangianStructure, DiffeoSpec,
    FoliationFrame, Samples,
};
use crate::numeric;

use super::table::{invert_symbolic, ConnectionTable};
use super::HessError;

/// The Hess connection in the frame `F1 ++ F2`.
///
/// Mixed coefficients come from projected brackets
/// (`∇_{X₁}Y₂ = pr₂[X₁,Y₂]`, `∇_{Y₂}X₁ = pr₁[Y₂,X₁]`); tangential ones from
/// `∇ω = 0` solved through the pairing `P_{de} = ω(E_d, E_{n+e})`.
pub fn hess_connection(b: &BiLagrangianStructure, samples: Samples) -> Result<ConnectionTable, HessError> {
    let report = validate_bilagrangian(b, samples);
    if !report.pass {
        return Err(HessError::NotBiLagrangian(report.reasons.join("; ")));
    }
    let n = b.half_dim();
    let frame = b.frame();
    let base = ConnectionTable::zero(b.chart.clone(), frame.clone())?;
    let nn = 2 * n;
    let mut gamma = vec![vec![vec![Expr::zero(); nn]; nn]; nn];

    // mixed parts
    for a in 0..n {
        for bb in 0..n {
            let c = base.expand(&lie_bracket(&frame[a], &frame[n + bb])?);
            for k in 0..n {
                gamma[a][n + bb][n + k] = c[n + k].clone();
                gamma[n + bb][a][k] = -&c[k];
            }
        }
    }

    let pairing: Vec<Vec<Expr>> = (0..n)
        .map(|d| (0..n).map(|e| b.omega.apply(&[&frame[d], &frame[n + e]])).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    for p in samples.points(&b.chart) {
        let mut q = p.clone();
        b.chart.domain.reduce(&mut q);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| pairing[i][j].eval(b.chart.coords(), &q).unwrap_or(f64::NAN));
        let s = numeric::min_singular_value(&m);
        if !(s > 1e-10) {
            return Err(HessError::Singular {
                what: "pairing ω(F1, F2)".into(),
                point: p,
            });
        }
    }
    let reference = samples.points(&b.chart).into_iter().next().unwrap_or_else(|| b.chart.domain.center());
    let pinv = invert_symbolic(&pairing, b.chart.coords(), &reference)?;

    // F1 tangential: Σ_d λ^d P[d][e] = E_a(P[c][e]) − Σ_k Γ^{n+k}_{a,n+e} P[c][k]
    for a in 0..n {
        for c in 0..n {
            let rhs: Vec<Expr> = (0..n)
                .map(|e| {
                    let mut t = vec![frame[a].apply(&pairing[c][e])];
                    for k in 0..n {
                        let g = &gamma[a][n + e][n + k];
                        if !g.is_zero() {
                            t.push(-(g * &pairing[c][k]));
                        }
                    }
                    sum(t)
                })
                .collect();
            for d in 0..n {
                gamma[a][c][d] = sum((0..n).map(|e| &rhs[e] * &pinv[e][d]));
            }
        }
    }
    // F2 tangential: Σ_e P[d][e] μ^e = E_{n+b}(P[d][c]) − Σ_k Γ^k_{n+b,d} P[k][c]
    for bb in 0..n {
        for c in 0..n {
            let rhs: Vec<Expr> = (0..n)
                .map(|d| {
                    let mut t = vec![frame[n + bb].apply(&pairing[d][c])];
                    for k in 0..n {
                        let g = &gamma[n + bb][d][k];
                        if !g.is_zero() {
                            t.push(-(g * &pairing[k][c]));
                        }
                    }
                    sum(t)
                })
                .collect();
            for e in 0..n {
                gamma[n + bb][n + c][n + e] = sum((0..n).map(|d| &pinv[e][d] * &rhs[d]));
            }
        }
    }
    ConnectionTable::new(b.chart.clone(), frame, gamma)
}

/// `((ψ⁻¹)*ω, ψ_*F1, ψ_*F2)`.
pub fn pushforward_structure(psi: &DiffeoSpec, b: &BiLagrangianStructure) -> Result<BiLagrangianStructure, HessError> {
    let inv = psi.inverted()?;
    let omega = pullback_form(&inv, &b.omega)?;
    let push = |f: &FoliationFrame| -> Result<FoliationFrame, HessError> {
        let fields = f.fields.iter().map(|x| pushforward_field(psi, x)).collect::<Result<Vec<_>, _>>()?;
        Ok(FoliationFrame::new(psi.target.clone(), fields)?)
    };
    Ok(BiLagrangianStructure::new(omega, push(&b.f1)?, push(&b.f2)?)?)
}

/// `∇^ψ_X Y = ψ_*∇_{ψ⁻¹_*X} ψ⁻¹_*Y` in the pushed frame: coefficients are
/// composed with `ψ⁻¹`.
pub fn pushforward_connection(psi: &DiffeoSpec, c: &ConnectionTable) -> Result<ConnectionTable, HessError> {
    crate::geometry::same_chart(&psi.source, &c.chart)?;
    let sub = psi.inverse_substitution()?;
    let frame = c.frame.iter().map(|e| pushforward_field(psi, e)).collect::<Result<Vec<_>, _>>()?;
    let gamma = c
        .gamma
        .iter()
        .map(|gi| gi.iter().map(|gij| gij.iter().map(|g| g.substitute(&sub)).collect()).collect())
        .collect();
    ConnectionTable::new(psi.target.clone(), frame, gamma)
}
