use crate::expr::{sum, Expr};
use crate::geometry::{
    same_chart, validate_bilagrangian, BiLagrangianStructure, DiffeoSpec, DifferentialForm, FoliationFrame, Samples,
};
use crate::hess::{invert_symbolic, pushforward_structure};

use super::cotangent::{conormal_foliation, conormal_frame, omega_tilde, tautological_and_canonical};
use super::tangent::{lift_foliation_complete, lift_form, LiftKind};
use super::{BundleKind, LiftError, LiftedChart, LiftedStructureId};

/// A lifted bi-Lagrangian structure together with the bundle chart it lives on.
#[derive(Debug, Clone)]
pub struct LiftedStructure {
    pub id: LiftedStructureId,
    pub lifted: LiftedChart,
    pub structure: BiLagrangianStructure,
}

/// `(x, v) ↦ (x, ω_x(v, ·))` from `tangent` to `cotangent`, i.e.
/// `ξ_j = v^i ω_ij`.
pub fn musical_map(omega: &DifferentialForm, tangent: &LiftedChart, cotangent: &LiftedChart) -> Result<DiffeoSpec, LiftError> {
    tangent.expect(BundleKind::Tangent)?;
    cotangent.expect(BundleKind::Cotangent)?;
    same_chart(&omega.chart, &tangent.base)?;
    same_chart(&omega.chart, &cotangent.base)?;
    let m = tangent.base_dim();
    let w = omega.matrix()?;
    let reference = omega.chart.sample_points(1, crate::expr::DEFAULT_SEED).remove(0);
    let winv = invert_symbolic(&w, omega.chart.coords(), &reference)?;
    let base: Vec<Expr> = omega.chart.coords().iter().map(Expr::var).collect();
    let mut map = base.clone();
    let mut inverse = base;
    for j in 0..m {
        map.push(sum((0..m).filter(|&i| !w[i][j].is_zero()).map(|i| &tangent.fiber(i) * &w[i][j])));
    }
    for i in 0..m {
        inverse.push(sum((0..m).filter(|&j| !winv[j][i].is_zero()).map(|j| &cotangent.fiber(j) * &winv[j][i])));
    }
    Ok(DiffeoSpec::new(tangent.chart.clone(), cotangent.chart.clone(), map, Some(inverse))?)
}

/// Pushes a structure on `TM` to `T*M` through the musical map of `omega`.
pub fn musical_transport(
    omega: &DifferentialForm,
    b: &BiLagrangianStructure,
    tangent: &LiftedChart,
    cotangent: &LiftedChart,
) -> Result<BiLagrangianStructure, LiftError> {
    same_chart(&b.chart, &tangent.chart)?;
    let flat = musical_map(omega, tangent, cotangent)?;
    Ok(pushforward_structure(&flat, b)?)
}

fn conormal(
    f: &FoliationFrame,
    omega: &DifferentialForm,
    l: &LiftedChart,
    samples: Samples,
) -> Result<FoliationFrame, LiftError> {
    match conormal_foliation(f, l, samples) {
        Ok(frame) => Ok(frame),
        Err(LiftError::Precondition(_)) => conormal_frame(f, omega, l),
        Err(e) => Err(e),
    }
}

/// Builds lifted structure `i` over a valid base structure.
pub fn build_lifted_structure(
    b: &BiLagrangianStructure,
    i: LiftedStructureId,
    samples: Samples,
) -> Result<LiftedStructure, LiftError> {
    let report = validate_bilagrangian(b, samples);
    if !report.pass {
        return Err(LiftError::Precondition(format!(
            "base structure is not bi-Lagrangian: {}",
            report.reasons.join("; ")
        )));
    }
    let lifted = LiftedChart::new(&b.chart, i.bundle())?;
    let structure = match i.get() {
        1 | 2 => {
            let omega = if i.get() == 1 {
                tautological_and_canonical(&lifted)?.1
            } else {
                omega_tilde(&b.omega, &lifted, samples)?
            };
            let f1 = conormal(&b.f1, &b.omega, &lifted, samples)?;
            let f2 = conormal(&b.f2, &b.omega, &lifted, samples)?;
            BiLagrangianStructure::new(omega, f1, f2)?
        }
        _ => BiLagrangianStructure::new(
            lift_form(&b.omega, LiftKind::Complete, &lifted)?,
            lift_foliation_complete(&b.f1, &lifted)?,
            lift_foliation_complete(&b.f2, &lifted)?,
        )?,
    };
    Ok(LiftedStructure { id: i, lifted, structure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, parse, SYMBOLIC_TOL};
    use crate::geometry::{Chart, ChartRef, VectorField};
    use crate::hess::{compare_tables, hess_connection};
    use crate::lifts::lift_connection_complete;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn r2() -> ChartRef {
        Chart::euclidean("R2", &["p", "q"], -1.0, 1.0)
    }

    fn curved() -> BiLagrangianStructure {
        let c = r2();
        let e1 = VectorField::new(c.clone(), vec![p("1"), p("0")]).unwrap();
        let e2 = VectorField::new(c.clone(), vec![p("q*p"), p("1")]).unwrap();
        BiLagrangianStructure::new(
            DifferentialForm::canonical(&c).unwrap(),
            FoliationFrame::new(c.clone(), vec![e1]).unwrap(),
            FoliationFrame::new(c, vec![e2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn musical_map_on_canonical_base() {
        let c = r2();
        let w = DifferentialForm::canonical(&c).unwrap();
        let t = LiftedChart::tangent(&c).unwrap();
        let ct = LiftedChart::cotangent(&c).unwrap();
        let flat = musical_map(&w, &t, &ct).unwrap();
        // ω(v,·) = v_q dp − v_p dq
        let dom = &t.chart.domain;
        assert!(approx_equal(&flat.map[2], &p("v_q"), dom, 20, SYMBOLIC_TOL).unwrap().equal);
        assert!(approx_equal(&flat.map[3], &p("-v_p"), dom, 20, SYMBOLIC_TOL).unwrap().equal);
        assert!(flat.check_inverse(Samples::new(20)).unwrap() < 1e-12);
    }

    #[test]
    fn transported_structure_validates() {
        let b = curved();
        let s = Samples::new(20);
        let l3 = build_lifted_structure(&b, LiftedStructureId::new(3).unwrap(), s).unwrap();
        let ct = LiftedChart::cotangent(&b.chart).unwrap();
        let moved = musical_transport(&b.omega, &l3.structure, &l3.lifted, &ct).unwrap();
        assert!(validate_bilagrangian(&moved, s).pass);
    }

    #[test]
    fn canonical_lifts() {
        let b = BiLagrangianStructure::canonical(&r2()).unwrap();
        let s = Samples::new(20);
        for i in 1..=3 {
            let l = build_lifted_structure(&b, LiftedStructureId::new(i).unwrap(), s).unwrap();
            assert!(validate_bilagrangian(&l.structure, s).pass, "lift {i}");
            let h = hess_connection(&l.structure, s).unwrap();
            if i != 2 {
                assert!(h.is_flat(s, 1e-8).unwrap(), "lift {i}");
            }
        }
        let l1 = build_lifted_structure(&b, LiftedStructureId::new(1).unwrap(), s).unwrap();
        assert!(l1.structure.f1.fields[1].comps[3].is_one());
        assert!(l1.structure.f2.fields[1].comps[2].is_one());
        assert!(LiftedStructureId::new(4).is_err());
    }

    #[test]
    fn curved_lifts() {
        let b = curved();
        let s = Samples::new(20);
        let l1 = build_lifted_structure(&b, LiftedStructureId::new(1).unwrap(), s).unwrap();
        assert!(validate_bilagrangian(&l1.structure, s).pass);
        assert!(hess_connection(&l1.structure, s).unwrap().is_flat(s, 1e-7).unwrap());
        let l2 = build_lifted_structure(&b, LiftedStructureId::new(2).unwrap(), s).unwrap();
        assert!(validate_bilagrangian(&l2.structure, s).pass);
        let l3 = build_lifted_structure(&b, LiftedStructureId::new(3).unwrap(), s).unwrap();
        let direct = hess_connection(&l3.structure, s).unwrap();
        let lifted = lift_connection_complete(&hess_connection(&b, s).unwrap(), &l3.lifted).unwrap();
        assert!(compare_tables(&direct, &lifted, s).unwrap() < 1e-8);
    }
}
