use std::collections::HashMap;

use crate::expr::{sum, Expr};
use crate::geometry::{same_chart, DiffeoSpec, DifferentialForm, FoliationFrame, TensorField, VectorField};
use crate::hess::ConnectionTable;

use super::{BundleKind, LiftError, LiftedChart};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKind {
    Vertical,
    Complete,
}

/// `f^v = f∘π`, `f^c = v^i ∂f/∂x^i`.
pub fn lift_scalar(f: &Expr, kind: LiftKind, l: &LiftedChart) -> Result<Expr, LiftError> {
    l.expect(BundleKind::Tangent)?;
    Ok(match kind {
        LiftKind::Vertical => f.clone(),
        LiftKind::Complete => complete(f, l),
    })
}

fn complete(f: &Expr, l: &LiftedChart) -> Expr {
    sum(l
        .base
        .coords()
        .iter()
        .enumerate()
        .map(|(i, x)| (i, f.diff(x)))
        .filter(|(_, d)| !d.is_zero())
        .map(|(i, d)| &l.fiber(i) * &d))
}

/// `X^v = X^i ∂/∂v^i`, `X^c = X^i ∂/∂x^i + (X^i)^c ∂/∂v^i`.
pub fn lift_field(x: &VectorField, kind: LiftKind, l: &LiftedChart) -> Result<VectorField, LiftError> {
    l.expect(BundleKind::Tangent)?;
    same_chart(&x.chart, &l.base)?;
    let m = l.base_dim();
    let mut comps = vec![Expr::zero(); 2 * m];
    for i in 0..m {
        match kind {
            LiftKind::Vertical => comps[m + i] = x.comps[i].clone(),
            LiftKind::Complete => {
                comps[i] = x.comps[i].clone();
                comps[m + i] = complete(&x.comps[i], l);
            }
        }
    }
    Ok(VectorField::new(l.chart.clone(), comps)?)
}

/// Vertical and complete lifts of a k-form: `α^v = Σ α_I dx^I`,
/// `α^c = Σ (α_I)^c dx^I + Σ α_I Σ_s dx^{i_1}∧…∧dv^{i_s}∧…∧dx^{i_k}`.
pub fn lift_form(a: &DifferentialForm, kind: LiftKind, l: &LiftedChart) -> Result<DifferentialForm, LiftError> {
    l.expect(BundleKind::Tangent)?;
    same_chart(&a.chart, &l.base)?;
    let m = l.base_dim();
    let mut w = DifferentialForm::zero(&l.chart, a.degree);
    for (idx, c) in a.terms() {
        match kind {
            LiftKind::Vertical => w.add_term(idx, c.clone())?,
            LiftKind::Complete => {
                w.add_term(idx, complete(c, l))?;
                for s in 0..idx.len() {
                    let mut j = idx.clone();
                    j[s] += m;
                    w.add_term(&j, c.clone())?;
                }
            }
        }
    }
    Ok(w)
}

/// Lift of a covariant tensor: the complete lift has `(T_I)^c` on all-base
/// slots and `T_I` on slots with exactly one fiber index; the vertical lift
/// keeps only the all-base slots.
pub fn lift_tensor(t: &TensorField, kind: LiftKind, l: &LiftedChart) -> Result<TensorField, LiftError> {
    l.expect(BundleKind::Tangent)?;
    same_chart(&t.chart, &l.base)?;
    let m = l.base_dim();
    let mut out = TensorField::zero(&l.chart, t.rank);
    for k in 0..out.comps.len() {
        let idx = out.multi_index(k);
        let fibers: Vec<usize> = (0..idx.len()).filter(|&s| idx[s] >= m).collect();
        let base_idx: Vec<usize> = idx.iter().map(|&i| i % m).collect();
        let c = t.get(&base_idx);
        out.comps[k] = match (kind, fibers.len()) {
            (LiftKind::Vertical, 0) => c.clone(),
            (LiftKind::Complete, 0) => complete(c, l),
            (LiftKind::Complete, 1) => c.clone(),
            _ => Expr::zero(),
        };
    }
    Ok(out)
}

/// Frame `{E_i^c} ∪ {E_i^v}`.
pub fn lift_foliation_complete(f: &FoliationFrame, l: &LiftedChart) -> Result<FoliationFrame, LiftError> {
    same_chart(&f.chart, &l.base)?;
    let mut fields = Vec::with_capacity(2 * f.len());
    for kind in [LiftKind::Complete, LiftKind::Vertical] {
        for e in &f.fields {
            fields.push(lift_field(e, kind, l)?);
        }
    }
    Ok(FoliationFrame::new(l.chart.clone(), fields)?)
}

/// Order of the lifted frame: each half `H` of the base frame becomes
/// `H^c ++ H^v`. Returns `(base index, is_vertical)` per lifted slot.
pub(crate) fn lifted_slots(n: usize) -> Vec<(usize, bool)> {
    let h = n / 2;
    let mut slots = Vec::with_capacity(2 * n);
    for half in [0..h, h..n] {
        slots.extend(half.clone().map(|i| (i, false)));
        slots.extend(half.map(|i| (i, true)));
    }
    slots
}

/// Complete lift of a connection in the frame built by [`lifted_slots`]:
/// `∇_{E_i^c}E_j^c = (Γ^k_ij)^c E_k^v + Γ^k_ij E_k^c`,
/// `∇_{E_i^c}E_j^v = ∇_{E_i^v}E_j^c = Γ^k_ij E_k^v`, `∇_{E_i^v}E_j^v = 0`.
pub fn lift_connection_complete(c: &ConnectionTable, l: &LiftedChart) -> Result<ConnectionTable, LiftError> {
    same_chart(&c.chart, &l.base)?;
    let n = c.dim();
    let slots = lifted_slots(n);
    let pos: HashMap<(usize, bool), usize> = slots.iter().enumerate().map(|(p, &s)| (s, p)).collect();
    let frame = slots
        .iter()
        .map(|&(i, v)| lift_field(&c.frame[i], if v { LiftKind::Vertical } else { LiftKind::Complete }, l))
        .collect::<Result<Vec<_>, _>>()?;
    let nn = 2 * n;
    let mut gamma = vec![vec![vec![Expr::zero(); nn]; nn]; nn];
    for (a, &(i, vi)) in slots.iter().enumerate() {
        for (b, &(j, vj)) in slots.iter().enumerate() {
            for k in 0..n {
                let g = &c.gamma[i][j][k];
                if g.is_zero() {
                    continue;
                }
                match (vi, vj) {
                    (false, false) => {
                        gamma[a][b][pos[&(k, true)]] = complete(g, l);
                        gamma[a][b][pos[&(k, false)]] = g.clone();
                    }
                    (true, true) => {}
                    _ => gamma[a][b][pos[&(k, true)]] = g.clone(),
                }
            }
        }
    }
    Ok(ConnectionTable::new(l.chart.clone(), frame, gamma)?)
}

/// `ψ^c(x, v) = (ψ(x), Dψ(x) v)`.
pub fn tangent_lift_diffeo(psi: &DiffeoSpec) -> Result<(DiffeoSpec, LiftedChart, LiftedChart), LiftError> {
    let src = LiftedChart::tangent(&psi.source)?;
    let tgt = if psi.target.same_as(&psi.source) {
        src.clone()
    } else {
        LiftedChart::tangent(&psi.target)?
    };
    let m = psi.dim();
    let jac = psi.jacobian();
    let mut map = psi.map.clone();
    for row in &jac {
        map.push(sum((0..m).filter(|&i| !row[i].is_zero()).map(|i| &row[i] * &src.fiber(i))));
    }
    let inverse = match psi.inverted() {
        Ok(inv) => {
            let ij = inv.jacobian();
            let mut comps = inv.map.clone();
            for row in &ij {
                comps.push(sum((0..m).filter(|&j| !row[j].is_zero()).map(|j| &row[j] * &tgt.fiber(j))));
            }
            Some(comps)
        }
        Err(_) => None,
    };
    let spec = DiffeoSpec::new(src.chart.clone(), tgt.chart.clone(), map, inverse)?;
    Ok((spec, src, tgt))
}
