use std::collections::BTreeSet;

use crate::expr::{sum, Compiled, Expr};
use crate::geometry::{
    exterior_derivative, is_symplectic, same_chart, DiffeoSpec, DifferentialForm, FoliationFrame, Samples, VectorField,
    SPAN_TOL,
};
use crate::numeric;

use super::{BundleKind, LiftError, LiftedChart};

/// `(θ, dθ)` with `θ = Σ ξ_i dx^i`.
pub fn tautological_and_canonical(l: &LiftedChart) -> Result<(DifferentialForm, DifferentialForm), LiftError> {
    l.expect(BundleKind::Cotangent)?;
    let m = l.base_dim();
    let mut comps = vec![Expr::zero(); 2 * m];
    for (i, c) in comps.iter_mut().enumerate().take(m) {
        *c = l.fiber(i);
    }
    let theta = DifferentialForm::one_form(&l.chart, comps)?;
    let dtheta = exterior_derivative(&theta)?;
    Ok((theta, dtheta))
}

/// `ω̃ = π*ω + dθ`.
pub fn omega_tilde(omega: &DifferentialForm, l: &LiftedChart, samples: Samples) -> Result<DifferentialForm, LiftError> {
    l.expect(BundleKind::Cotangent)?;
    same_chart(&omega.chart, &l.base)?;
    let r = is_symplectic(omega, samples)?;
    if !r.pass {
        return Err(LiftError::Precondition(format!(
            "base form is not symplectic: {}",
            r.reason.unwrap_or_default()
        )));
    }
    let index_map: Vec<usize> = (0..l.base_dim()).collect();
    let pulled = omega.embed(&l.chart, &index_map);
    let (_, dtheta) = tautological_and_canonical(l)?;
    Ok(pulled.add(&dtheta)?)
}

/// Conormal frame in an adapted chart: a frame spanned by the coordinate
/// fields `∂/∂x^i, i ∈ S` lifts to `{∂/∂x^i : i ∈ S} ∪ {∂/∂ξ_j : j ∉ S}`.
pub fn conormal_foliation(f: &FoliationFrame, l: &LiftedChart, samples: Samples) -> Result<FoliationFrame, LiftError> {
    l.expect(BundleKind::Cotangent)?;
    same_chart(&f.chart, &l.base)?;
    let m = l.base_dim();
    let k = f.len();
    let support: BTreeSet<usize> = f
        .fields
        .iter()
        .flat_map(|e| e.comps.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i))
        .collect();
    let not_adapted = || {
        LiftError::Precondition(
            "frame is not spanned by coordinate fields in this chart; change to adapted coordinates first".into(),
        )
    };
    if support.len() != k {
        return Err(not_adapted());
    }
    for p in samples.points(&f.chart) {
        if numeric::rank(&f.matrix_at(&p)?, SPAN_TOL) != k {
            return Err(not_adapted());
        }
    }
    let mut fields: Vec<VectorField> = support.iter().map(|&i| VectorField::coordinate(&l.chart, i)).collect();
    fields.extend((0..m).filter(|j| !support.contains(j)).map(|j| VectorField::coordinate(&l.chart, l.fiber_index(j))));
    Ok(FoliationFrame::new(l.chart.clone(), fields)?)
}

/// Cotangent lift of a field, `X̂ = X^i ∂/∂x^i − ξ_j ∂_i X^j ∂/∂ξ_i`, whose
/// flow is the cotangent lift of the flow of `X`.
pub fn cotangent_lift_field(x: &VectorField, l: &LiftedChart) -> Result<VectorField, LiftError> {
    l.expect(BundleKind::Cotangent)?;
    same_chart(&x.chart, &l.base)?;
    let m = l.base_dim();
    let coords = l.base.coords();
    let mut comps = x.comps.clone();
    for i in 0..m {
        comps.push(-sum((0..m).map(|j| &l.fiber(j) * &x.comps[j].diff(&coords[i])).filter(|e| !e.is_zero())));
    }
    Ok(VectorField::new(l.chart.clone(), comps)?)
}

/// Conormal frame of a Lagrangian foliation in arbitrary coordinates: the
/// cotangent lifts of the frame fields together with the vertical fields
/// `(ι_E ω)_i ∂/∂ξ_i`, which span the annihilator of the leaves.
pub fn conormal_frame(f: &FoliationFrame, omega: &DifferentialForm, l: &LiftedChart) -> Result<FoliationFrame, LiftError> {
    l.expect(BundleKind::Cotangent)?;
    same_chart(&f.chart, &l.base)?;
    let m = l.base_dim();
    let mut fields = Vec::with_capacity(2 * f.len());
    for e in &f.fields {
        fields.push(cotangent_lift_field(e, l)?);
    }
    for e in &f.fields {
        let a = omega.interior(e)?;
        let mut comps = vec![Expr::zero(); m];
        comps.extend((0..m).map(|i| a.component(&[i])));
        fields.push(VectorField::new(l.chart.clone(), comps)?);
    }
    Ok(FoliationFrame::new(l.chart.clone(), fields)?)
}

/// `ψ̂(x, ξ) = (ψ(x), ξ ∘ Dψ⁻¹(ψ(x)))`.
pub fn cotangent_lift_diffeo(psi: &DiffeoSpec) -> Result<(DiffeoSpec, LiftedChart, LiftedChart), LiftError> {
    let inv = psi.inverted().map_err(|_| LiftError::Precondition("cotangent lift needs an inverse expression".into()))?;
    let src = LiftedChart::cotangent(&psi.source)?;
    let tgt = if psi.target.same_as(&psi.source) {
        src.clone()
    } else {
        LiftedChart::cotangent(&psi.target)?
    };
    let m = psi.dim();
    let fwd = psi.forward_substitution();
    let back = inv.forward_substitution();
    let jinv = inv.jacobian();
    let jac = psi.jacobian();
    let mut map = psi.map.clone();
    for j in 0..m {
        map.push(sum((0..m).filter(|&i| !jinv[i][j].is_zero()).map(|i| &src.fiber(i) * &jinv[i][j].substitute(&fwd))));
    }
    let mut inverse = inv.map.clone();
    for i in 0..m {
        inverse.push(sum((0..m).filter(|&j| !jac[j][i].is_zero()).map(|j| &tgt.fiber(j) * &jac[j][i].substitute(&back))));
    }
    let spec = DiffeoSpec::new(src.chart.clone(), tgt.chart.clone(), map, Some(inverse))?;
    Ok((spec, src, tgt))
}

/// Max scaled difference of two forms' coefficients over samples.
pub(crate) fn form_distance(a: &DifferentialForm, b: &DifferentialForm, samples: Samples) -> Result<f64, LiftError> {
    same_chart(&a.chart, &b.chart)?;
    let diff = a.sub(b)?;
    let keys: Vec<Vec<usize>> = a.terms().map(|(k, _)| k.clone()).chain(b.terms().map(|(k, _)| k.clone())).collect();
    if diff.is_zero() {
        return Ok(0.0);
    }
    let mut exprs: Vec<Expr> = diff.terms().map(|(_, c)| c.clone()).collect();
    exprs.extend(keys.iter().map(|k| a.component(k)));
    exprs.extend(keys.iter().map(|k| b.component(k)));
    let nd = diff.terms().count();
    let tape = Compiled::new(&exprs, a.chart.coords())?;
    let mut worst: f64 = 0.0;
    for mut p in samples.points(&a.chart) {
        a.chart.domain.reduce(&mut p);
        let v = tape.eval(&p)?;
        let scale = 1.0 + v[nd..].iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let d = v[..nd].iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        worst = worst.max(d / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{frobenius_check, is_lagrangian, pullback_form, Chart};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn canonical_forms() {
        let r = Chart::euclidean("R", &["x"], -1.0, 1.0);
        let l = LiftedChart::cotangent(&r).unwrap();
        let (theta, dtheta) = tautological_and_canonical(&l).unwrap();
        assert_eq!(theta.component(&[0]).to_string(), "xi1");
        // dθ = dξ∧dx
        assert!(dtheta.component(&[1, 0]).is_one());
        let r2 = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let l2 = LiftedChart::cotangent(&r2).unwrap();
        let (_, dtheta) = tautological_and_canonical(&l2).unwrap();
        assert!(dtheta.component(&[2, 0]).is_one() && dtheta.component(&[3, 1]).is_one());
        assert!(exterior_derivative(&dtheta).unwrap().is_zero());
        assert!(is_symplectic(&dtheta, Samples::new(20)).unwrap().pass);
        let tl = super::super::LiftedChart::tangent(&r2).unwrap();
        assert!(tautological_and_canonical(&tl).is_err());
    }

    #[test]
    fn omega_tilde_assembly() {
        let r2 = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let l = LiftedChart::cotangent(&r2).unwrap();
        let w = omega_tilde(&DifferentialForm::canonical(&r2).unwrap(), &l, Samples::new(10)).unwrap();
        assert!(w.component(&[1, 0]).is_one() && w.component(&[2, 0]).is_one() && w.component(&[3, 1]).is_one());
        assert!(is_symplectic(&w, Samples::new(20)).unwrap().pass);
        assert!(omega_tilde(&DifferentialForm::zero(&r2, 2), &l, Samples::new(10)).is_err());
    }

    #[test]
    fn conormal_of_coordinate_foliations() {
        let r2 = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let l = LiftedChart::cotangent(&r2).unwrap();
        let s = Samples::new(20);
        let n1 = conormal_foliation(&FoliationFrame::coordinate(&r2, &[0]), &l, s).unwrap();
        let n2 = conormal_foliation(&FoliationFrame::coordinate(&r2, &[1]), &l, s).unwrap();
        assert!(n1.fields[0].comps[0].is_one() && n1.fields[1].comps[3].is_one());
        assert!(n2.fields[0].comps[1].is_one() && n2.fields[1].comps[2].is_one());
        let (_, dtheta) = tautological_and_canonical(&l).unwrap();
        assert!(is_lagrangian(&n1, &dtheta, s).unwrap().pass && is_lagrangian(&n2, &dtheta, s).unwrap().pass);
        let skew = FoliationFrame::new(r2.clone(), vec![VectorField::new(r2.clone(), vec![p("q*p"), p("1")]).unwrap()]).unwrap();
        assert!(matches!(conormal_foliation(&skew, &l, s), Err(LiftError::Precondition(_))));
    }

    #[test]
    fn general_conormal_is_lagrangian_and_involutive() {
        let r2 = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let l = LiftedChart::cotangent(&r2).unwrap();
        let s = Samples::new(30);
        let w = DifferentialForm::canonical(&r2).unwrap();
        let skew = FoliationFrame::new(r2.clone(), vec![VectorField::new(r2.clone(), vec![p("q*p"), p("1")]).unwrap()]).unwrap();
        let n = conormal_frame(&skew, &w, &l).unwrap();
        let (_, dtheta) = tautological_and_canonical(&l).unwrap();
        assert!(is_lagrangian(&n, &dtheta, s).unwrap().pass);
        assert!(frobenius_check(&n, s).unwrap().involutive);
    }

    #[test]
    fn cotangent_lift_preserves_theta() {
        let r = Chart::euclidean("R", &["x"], -1.0, 1.0);
        let psi = DiffeoSpec::new(r.clone(), r.clone(), vec![p("2*x")], Some(vec![p("x/2")])).unwrap();
        let (lift, _, _) = cotangent_lift_diffeo(&psi).unwrap();
        let half = crate::expr::approx_equal(&lift.map[1], &p("xi1/2"), &lift.source.domain, 20, 1e-12).unwrap();
        assert!(half.equal);
        let r2 = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let shear = DiffeoSpec::new(r2.clone(), r2.clone(), vec![p("p+q"), p("q")], Some(vec![p("p-q"), p("q")])).unwrap();
        let (lift, l, _) = cotangent_lift_diffeo(&shear).unwrap();
        let (theta, dtheta) = tautological_and_canonical(&l).unwrap();
        let s = Samples::new(30);
        assert!(form_distance(&pullback_form(&lift, &theta).unwrap(), &theta, s).unwrap() < 1e-9);
        assert!(form_distance(&pullback_form(&lift, &dtheta).unwrap(), &dtheta, s).unwrap() < 1e-9);
    }
}
