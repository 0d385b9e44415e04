use serde::Serialize;

use crate::geometry::{pullback_form, pushforward_field, same_chart, BiLagrangianStructure, DiffeoSpec, FoliationFrame, Samples, SPAN_TOL};
use crate::hess::pushforward_structure;
use crate::numeric;

use super::cotangent::{cotangent_lift_diffeo, form_distance};
use super::structures::build_lifted_structure;
use super::tangent::tangent_lift_diffeo;
use super::{LiftError, LiftedStructureId};

/// Tolerance on `ψ*ω − ω` for accepting `ψ` as a symplectomorphism.
const SYMPLECTO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationInclusion {
    pub included: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramReport {
    pub lift: u8,
    pub foliations: [FoliationInclusion; 2],
    pub forms_agree: bool,
    pub form_error: f64,
    pub commutes: bool,
}

fn inclusion(pushed: &FoliationFrame, target: &FoliationFrame, samples: Samples) -> Result<FoliationInclusion, LiftError> {
    let m = target.chart.dim();
    let src = pushed.compile()?;
    let tgt = target.compile()?;
    let mut worst: f64 = 0.0;
    for p in samples.points(&target.chart) {
        let a = crate::geometry::frame_matrix(&tgt, m, target.len(), &target.chart, &p)?;
        let b = crate::geometry::frame_matrix(&src, m, pushed.len(), &target.chart, &p)?;
        for c in b.column_iter() {
            let v: Vec<f64> = c.iter().copied().collect();
            let r = numeric::span_residual(&a, &v) / (1.0 + c.norm());
            worst = worst.max(r);
        }
    }
    Ok(FoliationInclusion {
        included: worst <= SPAN_TOL,
        residual: worst,
    })
}

/// Checks whether lifting commutes with pushing forward by a
/// symplectomorphism `ψ` of the base, for lifted structure `i`.
pub fn diagram_commutes(
    b: &BiLagrangianStructure,
    psi: &DiffeoSpec,
    i: LiftedStructureId,
    samples: Samples,
) -> Result<DiagramReport, LiftError> {
    same_chart(&psi.source, &b.chart)?;
    same_chart(&psi.target, &b.chart)?;
    let err = form_distance(&pullback_form(psi, &b.omega)?, &b.omega, samples)?;
    if !(err <= SYMPLECTO_TOL) {
        return Err(LiftError::Precondition(format!(
            "map is not a symplectomorphism: |ψ*ω − ω| = {err:e}"
        )));
    }
    let source = build_lifted_structure(b, i, samples)?;
    let target = build_lifted_structure(&pushforward_structure(psi, b)?, i, samples)?;
    let (lifted_map, _, _) = if i.get() == 3 {
        tangent_lift_diffeo(psi)?
    } else {
        cotangent_lift_diffeo(psi)?
    };
    let push = |f: &FoliationFrame| -> Result<FoliationFrame, LiftError> {
        let fields = f.fields.iter().map(|x| pushforward_field(&lifted_map, x)).collect::<Result<Vec<_>, _>>()?;
        Ok(FoliationFrame::new(target.lifted.chart.clone(), fields)?)
    };
    let f1 = inclusion(&push(&source.structure.f1)?, &target.structure.f1, samples)?;
    let f2 = inclusion(&push(&source.structure.f2)?, &target.structure.f2, samples)?;
    let pulled = pullback_form(&lifted_map, &target.structure.omega)?;
    let form_error = form_distance(&pulled, &source.structure.omega, samples)?;
    let forms_agree = form_error <= SYMPLECTO_TOL;
    let commutes = forms_agree && (f1.included || f2.included);
    Ok(DiagramReport {
        lift: i.get(),
        foliations: [f1, f2],
        forms_agree,
        form_error,
        commutes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{Chart, ChartRef};

    fn r2() -> ChartRef {
        Chart::euclidean("R2", &["p", "q"], -1.0, 1.0)
    }

    fn map(c: &ChartRef, f: [&str; 2], g: [&str; 2]) -> DiffeoSpec {
        DiffeoSpec::new(
            c.clone(),
            c.clone(),
            f.iter().map(|s| parse(s).unwrap()).collect(),
            Some(g.iter().map(|s| parse(s).unwrap()).collect()),
        )
        .unwrap()
    }

    #[test]
    fn identity_commutes_for_all_lifts() {
        let c = r2();
        let b = BiLagrangianStructure::canonical(&c).unwrap();
        for i in 1..=3 {
            let r = diagram_commutes(&b, &DiffeoSpec::identity(&c), LiftedStructureId::new(i).unwrap(), Samples::new(10)).unwrap();
            assert!(r.commutes && r.foliations.iter().all(|f| f.included), "lift {i}");
        }
    }

    #[test]
    fn translation_commutes_on_tangent_lift() {
        let c = r2();
        let b = BiLagrangianStructure::canonical(&c).unwrap();
        let t = map(&c, ["p+0.5", "q"], ["p-0.5", "q"]);
        let r = diagram_commutes(&b, &t, LiftedStructureId::new(3).unwrap(), Samples::new(10)).unwrap();
        assert!(r.commutes);
    }

    #[test]
    fn shear_reports_per_instance() {
        let c = r2();
        let b = BiLagrangianStructure::canonical(&c).unwrap();
        let shear = map(&c, ["p", "q+p^2"], ["p", "q-p^2"]);
        for i in 1..=3 {
            let r = diagram_commutes(&b, &shear, LiftedStructureId::new(i).unwrap(), Samples::new(10)).unwrap();
            assert!(r.forms_agree, "lift {i}");
            assert!(r.foliations.iter().all(|f| f.residual.is_finite()));
        }
    }

    #[test]
    fn rejects_non_symplectic_maps() {
        let c = r2();
        let b = BiLagrangianStructure::canonical(&c).unwrap();
        let scale = map(&c, ["2*p", "q"], ["p/2", "q"]);
        let r = diagram_commutes(&b, &scale, LiftedStructureId::new(1).unwrap(), Samples::new(10));
        assert!(matches!(r, Err(LiftError::Precondition(_))));
    }
}
