use nalgebra::DMatrix;

use super::field::same_chart;
use super::{ChartRef, DifferentialForm, GeometryError, VectorField};
use crate::expr::Compiled;

/// Local frame of vector fields spanning a distribution.
#[derive(Debug, Clone)]
pub struct FoliationFrame {
    pub chart: ChartRef,
    pub fields: Vec<VectorField>,
}

impl FoliationFrame {
    pub fn new(chart: ChartRef, fields: Vec<VectorField>) -> Result<FoliationFrame, GeometryError> {
        for f in &fields {
            same_chart(&chart, &f.chart)?;
        }
        Ok(FoliationFrame { chart, fields })
    }

    /// Frame of coordinate fields `∂/∂x^i` for the given indices.
    pub fn coordinate(chart: &ChartRef, indices: &[usize]) -> FoliationFrame {
        FoliationFrame {
            chart: chart.clone(),
            fields: indices.iter().map(|&i| VectorField::coordinate(chart, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Tape evaluating all frame components, field-major.
    pub fn compile(&self) -> Result<Compiled, GeometryError> {
        let exprs: Vec<_> = self.fields.iter().flat_map(|f| f.comps.iter().cloned()).collect();
        Ok(Compiled::new(&exprs, self.chart.coords())?)
    }

    /// Columns are the frame vectors at `point`.
    pub fn matrix_at(&self, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let tape = self.compile()?;
        frame_matrix(&tape, self.chart.dim(), self.len(), &self.chart, point)
    }
}

pub(crate) fn frame_matrix(
    tape: &Compiled,
    m: usize,
    k: usize,
    chart: &ChartRef,
    point: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    let mut p = point.to_vec();
    chart.domain.reduce(&mut p);
    let v = tape.eval(&p)?;
    Ok(DMatrix::from_fn(m, k, |i, j| v[j * m + i]))
}

/// Symplectic form with two foliation frames on one chart.
#[derive(Debug, Clone)]
pub struct BiLagrangianStructure {
    pub chart: ChartRef,
    pub omega: DifferentialForm,
    pub f1: FoliationFrame,
    pub f2: FoliationFrame,
}

impl BiLagrangianStructure {
    pub fn new(
        omega: DifferentialForm,
        f1: FoliationFrame,
        f2: FoliationFrame,
    ) -> Result<BiLagrangianStructure, GeometryError> {
        same_chart(&omega.chart, &f1.chart)?;
        same_chart(&omega.chart, &f2.chart)?;
        if omega.degree != 2 {
            return Err(GeometryError::Dimension(format!("ω has degree {}", omega.degree)));
        }
        Ok(BiLagrangianStructure {
            chart: omega.chart.clone(),
            omega,
            f1,
            f2,
        })
    }

    /// `(Σ dq^i∧dp^i, {∂p}, {∂q})` on a chart ordered `(p…, q…)`.
    pub fn canonical(chart: &ChartRef) -> Result<BiLagrangianStructure, GeometryError> {
        let n = chart.dim() / 2;
        BiLagrangianStructure::new(
            DifferentialForm::canonical(chart)?,
            FoliationFrame::coordinate(chart, &(0..n).collect::<Vec<_>>()),
            FoliationFrame::coordinate(chart, &(n..2 * n).collect::<Vec<_>>()),
        )
    }

    pub fn half_dim(&self) -> usize {
        self.chart.dim() / 2
    }

    /// Concatenated frame `F1 ++ F2`.
    pub fn frame(&self) -> Vec<VectorField> {
        self.f1.fields.iter().chain(&self.f2.fields).cloned().collect()
    }
}
