use serde::Serialize;

use super::field::same_chart;
use super::foliation::frame_matrix;
use super::{
    exterior_derivative, lie_bracket, BiLagrangianStructure, DifferentialForm, FoliationFrame, GeometryError, Samples,
};
use crate::expr::{approx_equal_at, Compiled, Expr, SYMBOLIC_TOL};
use crate::numeric;

/// Threshold for span residuals, ranks and transversality margins.
pub const SPAN_TOL: f64 = 1e-8;
const DET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymplecticReport {
    pub pass: bool,
    pub closed: bool,
    pub min_abs_det: f64,
    pub reason: Option<String>,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrobeniusReport {
    pub involutive: bool,
    pub max_residual: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianReport {
    pub pass: bool,
    /// Smallest measured rank over the samples.
    pub rank: usize,
    pub expected_rank: usize,
    pub max_pairing: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiLagrangianReport {
    pub pass: bool,
    pub symplectic: bool,
    pub f1_involutive: bool,
    pub f2_involutive: bool,
    pub f1_lagrangian: bool,
    pub f2_lagrangian: bool,
    pub transversal: bool,
    pub min_transversal_singular_value: f64,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedReport {
    pub adapted: bool,
    pub f1_aligned: bool,
    pub f2_aligned: bool,
    pub omega_canonical: bool,
}

fn reduced(chart: &super::Chart, p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    chart.domain.reduce(&mut q);
    q
}

/// Closedness (`dω ≈ 0`) and pointwise nondegeneracy (`|det ω| > 1e-10`).
pub fn is_symplectic(omega: &DifferentialForm, samples: Samples) -> Result<SymplecticReport, GeometryError> {
    let chart = &omega.chart;
    let fail = |closed, reason: String, witness| SymplecticReport {
        pass: false,
        closed,
        min_abs_det: 0.0,
        reason: Some(reason),
        witness,
    };
    if omega.degree != 2 {
        return Ok(fail(false, format!("degree {} is not 2", omega.degree), None));
    }
    if chart.dim() % 2 != 0 {
        return Ok(fail(false, format!("odd dimension {}", chart.dim()), None));
    }
    let pts = samples.points(chart);
    let mut closed = true;
    let mut witness = None;
    if omega.degree < chart.dim() {
        let d = exterior_derivative(omega)?;
        for (_, c) in d.terms() {
            let cmp = approx_equal_at(c, &Expr::zero(), &chart.domain, &pts, SYMBOLIC_TOL)?;
            if !cmp.equal {
                closed = false;
                witness = cmp.witness;
                break;
            }
        }
    }
    if !closed {
        return Ok(fail(false, "dω is not zero".into(), witness));
    }
    let mut min_det = f64::INFINITY;
    for p in &pts {
        let det = numeric::det(&omega.matrix_at(p)?).abs();
        min_det = min_det.min(det);
        if !(det > DET_TOL) {
            return Ok(SymplecticReport {
                pass: false,
                closed,
                min_abs_det: det,
                reason: Some(format!("degenerate: |det ω| = {det:e}")),
                witness: Some(p.clone()),
            });
        }
    }
    Ok(SymplecticReport {
        pass: true,
        closed,
        min_abs_det: min_det,
        reason: None,
        witness: None,
    })
}

/// Involutivity: every `[E_i, E_j]` lies in the pointwise span of the frame.
pub fn frobenius_check(f: &FoliationFrame, samples: Samples) -> Result<FrobeniusReport, GeometryError> {
    let k = f.len();
    let m = f.chart.dim();
    let frame = f.compile()?;
    let mut brackets = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            brackets.extend(lie_bracket(&f.fields[i], &f.fields[j])?.comps);
        }
    }
    let btape = Compiled::new(&brackets, f.chart.coords())?;
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for p in samples.points(&f.chart) {
        let a = frame_matrix(&frame, m, k, &f.chart, &p)?;
        let r = numeric::rank(&a, SPAN_TOL);
        if r < k {
            return Err(GeometryError::RankDeficient {
                point: p,
                rank: r,
                expected: k,
            });
        }
        if brackets.is_empty() {
            continue;
        }
        let bv = btape.eval(&reduced(&f.chart, &p))?;
        for b in bv.chunks(m) {
            let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let res = numeric::span_residual(&a, b) / (1.0 + norm);
            if res > worst {
                worst = res;
                if res > SPAN_TOL && witness.is_none() {
                    witness = Some(p.clone());
                }
            }
        }
    }
    Ok(FrobeniusReport {
        involutive: worst <= SPAN_TOL,
        max_residual: worst,
        witness,
    })
}

/// Half-dimensional rank and `ω(E_i, E_j) ≈ 0` at every sample.
pub fn is_lagrangian(
    f: &FoliationFrame,
    omega: &DifferentialForm,
    samples: Samples,
) -> Result<LagrangianReport, GeometryError> {
    same_chart(&f.chart, &omega.chart)?;
    let m = f.chart.dim();
    let n = m / 2;
    let k = f.len();
    let frame = f.compile()?;
    let mut min_rank = usize::MAX;
    let mut max_pair: f64 = 0.0;
    for p in samples.points(&f.chart) {
        let a = frame_matrix(&frame, m, k, &f.chart, &p)?;
        let r = numeric::rank(&a, SPAN_TOL);
        min_rank = min_rank.min(r);
        if r != n || m % 2 != 0 {
            return Ok(LagrangianReport {
                pass: false,
                rank: r,
                expected_rank: n,
                max_pairing: max_pair,
                reason: Some(format!("frame rank {r} at {p:?}, expected {n}")),
            });
        }
        let w = omega.matrix_at(&p)?;
        let scale = 1.0 + w.amax() * a.column_iter().map(|c| c.norm()).fold(0.0, f64::max).powi(2);
        let g = a.transpose() * &w * &a;
        max_pair = max_pair.max(g.amax() / scale);
    }
    if k == 0 {
        min_rank = 0;
    }
    let pass = max_pair <= SPAN_TOL && min_rank == n;
    Ok(LagrangianReport {
        pass,
        rank: min_rank,
        expected_rank: n,
        max_pairing: max_pair,
        reason: (!pass).then(|| format!("ω does not vanish on the frame (max {max_pair:e})")),
    })
}

/// All sub-checks of a bi-Lagrangian structure; failures are recorded, never raised.
pub fn validate_bilagrangian(b: &BiLagrangianStructure, samples: Samples) -> BiLagrangianReport {
    let mut reasons = Vec::new();
    let symplectic = match is_symplectic(&b.omega, samples) {
        Ok(r) => {
            if let Some(why) = r.reason {
                reasons.push(format!("symplectic: {why}"));
            }
            r.pass
        }
        Err(e) => {
            reasons.push(format!("symplectic: {e}"));
            false
        }
    };
    let mut invol = |f: &FoliationFrame, tag: &str| match frobenius_check(f, samples) {
        Ok(r) => {
            if !r.involutive {
                reasons.push(format!("{tag} not involutive (residual {:e})", r.max_residual));
            }
            r.involutive
        }
        Err(e) => {
            reasons.push(format!("{tag}: {e}"));
            false
        }
    };
    let f1_involutive = invol(&b.f1, "F1");
    let f2_involutive = invol(&b.f2, "F2");
    let mut lag = |f: &FoliationFrame, tag: &str| match is_lagrangian(f, &b.omega, samples) {
        Ok(r) => {
            if let Some(why) = r.reason {
                reasons.push(format!("{tag} not Lagrangian: {why}"));
            }
            r.pass
        }
        Err(e) => {
            reasons.push(format!("{tag}: {e}"));
            false
        }
    };
    let f1_lagrangian = lag(&b.f1, "F1");
    let f2_lagrangian = lag(&b.f2, "F2");
    let (transversal, min_sv) = match transversality(b, samples) {
        Ok(s) => (s > SPAN_TOL, s),
        Err(e) => {
            reasons.push(format!("transversality: {e}"));
            (false, 0.0)
        }
    };
    if !transversal && reasons.iter().all(|r| !r.starts_with("transversality")) {
        reasons.push(format!("not transversal (smallest singular value {min_sv:e})"));
    }
    BiLagrangianReport {
        pass: symplectic && f1_involutive && f2_involutive && f1_lagrangian && f2_lagrangian && transversal,
        symplectic,
        f1_involutive,
        f2_involutive,
        f1_lagrangian,
        f2_lagrangian,
        transversal,
        min_transversal_singular_value: min_sv,
        reasons,
    }
}

/// Smallest singular value of the combined `F1 ++ F2` frame over the samples.
fn transversality(b: &BiLagrangianStructure, samples: Samples) -> Result<f64, GeometryError> {
    let m = b.chart.dim();
    let combined = FoliationFrame::new(b.chart.clone(), b.frame())?;
    if combined.len() != m {
        return Ok(0.0);
    }
    let tape = combined.compile()?;
    let mut min_sv = f64::INFINITY;
    for p in samples.points(&b.chart) {
        let a = frame_matrix(&tape, m, m, &b.chart, &p)?;
        min_sv = min_sv.min(numeric::min_singular_value(&a));
    }
    Ok(min_sv)
}

/// Whether the chart itself is adapted: `F1 = span{∂p}`, `F2 = span{∂q}`,
/// `ω = Σ dq^i∧dp^i`.
pub fn adapted_chart_check(b: &BiLagrangianStructure, samples: Samples) -> Result<AdaptedReport, GeometryError> {
    let m = b.chart.dim();
    let n = m / 2;
    let pts = samples.points(&b.chart);
    let aligned = |f: &FoliationFrame, range: std::ops::Range<usize>| -> Result<bool, GeometryError> {
        if f.len() != n {
            return Ok(false);
        }
        let tape = f.compile()?;
        let coord = numeric::columns(
            &range
                .clone()
                .map(|i| (0..m).map(|r| if r == i { 1.0 } else { 0.0 }).collect())
                .collect::<Vec<_>>(),
            m,
        );
        for p in &pts {
            let a = frame_matrix(&tape, m, n, &b.chart, p)?;
            if numeric::rank(&a, SPAN_TOL) != n {
                return Ok(false);
            }
            for col in a.column_iter() {
                let v: Vec<f64> = col.iter().copied().collect();
                let norm = col.norm();
                if numeric::span_residual(&coord, &v) / (1.0 + norm) > SPAN_TOL {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let f1_aligned = aligned(&b.f1, 0..n)?;
    let f2_aligned = aligned(&b.f2, n..m)?;
    let canon = DifferentialForm::canonical(&b.chart)?;
    let mut omega_canonical = true;
    for i in 0..m {
        for j in i + 1..m {
            let cmp = approx_equal_at(&b.omega.component(&[i, j]), &canon.component(&[i, j]), &b.chart.domain, &pts, SYMBOLIC_TOL)?;
            omega_canonical &= cmp.equal;
        }
    }
    Ok(AdaptedReport {
        adapted: f1_aligned && f2_aligned && omega_canonical,
        f1_aligned,
        f2_aligned,
        omega_canonical,
    })
}
