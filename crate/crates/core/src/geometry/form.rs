use std::collections::{BTreeMap, HashMap};

use super::field::same_chart;
use super::{ChartRef, GeometryError, VectorField};
use crate::expr::{sum, Compiled, Expr};

/// Differential k-form `Σ_I c_I dx^{i_1}∧…∧dx^{i_k}` over increasing index
/// tuples `I`. Zero coefficients are not stored.
#[derive(Debug, Clone)]
pub struct DifferentialForm {
    pub chart: ChartRef,
    pub degree: usize,
    coeffs: BTreeMap<Vec<usize>, Expr>,
}

/// Sign of the permutation sorting `idx`, or `None` on a repeated index.
fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    if v.len() < 2 {
        return Some((v, sign));
    }
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

fn signed(e: &Expr, sign: f64) -> Expr {
    if sign < 0.0 {
        -e
    } else {
        e.clone()
    }
}

/// Symbolic determinant by cofactor expansion (small sizes only).
pub(crate) fn det_expr(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        n => sum((0..n).filter(|&j| !m[0][j].is_zero()).map(|j| {
            let minor: Vec<Vec<Expr>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, e)| e.clone()).collect())
                .collect();
            let t = &m[0][j] * &det_expr(&minor);
            if j % 2 == 1 {
                -t
            } else {
                t
            }
        })),
    }
}

impl DifferentialForm {
    pub fn zero(chart: &ChartRef, degree: usize) -> DifferentialForm {
        DifferentialForm {
            chart: chart.clone(),
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// Degree-0 form.
    pub fn function(chart: &ChartRef, f: Expr) -> DifferentialForm {
        let mut w = DifferentialForm::zero(chart, 0);
        w.add_term(&[], f).expect("empty index");
        w
    }

    /// `dx^i`.
    pub fn dx(chart: &ChartRef, i: usize) -> DifferentialForm {
        let mut w = DifferentialForm::zero(chart, 1);
        w.add_term(&[i], Expr::one()).expect("valid index");
        w
    }

    /// 1-form `Σ α_i dx^i`.
    pub fn one_form(chart: &ChartRef, comps: Vec<Expr>) -> Result<DifferentialForm, GeometryError> {
        if comps.len() != chart.dim() {
            return Err(GeometryError::Dimension(format!(
                "1-form has {} components on a {}-dimensional chart",
                comps.len(),
                chart.dim()
            )));
        }
        let mut w = DifferentialForm::zero(chart, 1);
        for (i, c) in comps.into_iter().enumerate() {
            w.add_term(&[i], c)?;
        }
        Ok(w)
    }

    /// `Σ dq^i ∧ dp^i` on coordinates ordered `(p¹..pⁿ, q¹..qⁿ)`.
    pub fn canonical(chart: &ChartRef) -> Result<DifferentialForm, GeometryError> {
        let m = chart.dim();
        if m % 2 != 0 {
            return Err(GeometryError::Dimension(format!("canonical form needs even dimension, got {m}")));
        }
        let n = m / 2;
        let mut w = DifferentialForm::zero(chart, 2);
        for i in 0..n {
            w.add_term(&[n + i, i], Expr::one())?;
        }
        Ok(w)
    }

    /// Add `c · dx^{idx[0]}∧…`; `idx` may be in any order.
    pub fn add_term(&mut self, idx: &[usize], c: Expr) -> Result<(), GeometryError> {
        if idx.len() != self.degree {
            return Err(GeometryError::Dimension(format!(
                "term of degree {} added to a {}-form",
                idx.len(),
                self.degree
            )));
        }
        if self.degree > self.chart.dim() || idx.iter().any(|&i| i >= self.chart.dim()) {
            return Err(GeometryError::Dimension("form index out of range".into()));
        }
        let Some((key, sign)) = sort_sign(idx) else {
            return Ok(());
        };
        let c = signed(&c, sign);
        let new = match self.coeffs.remove(&key) {
            Some(old) => &old + &c,
            None => c,
        };
        if !new.is_zero() {
            self.coeffs.insert(key, new);
        }
        Ok(())
    }

    /// Antisymmetric component `α_{i_1…i_k}` for any index order.
    pub fn component(&self, idx: &[usize]) -> Expr {
        match sort_sign(idx) {
            Some((key, sign)) => self.coeffs.get(&key).map(|c| signed(c, sign)).unwrap_or_else(Expr::zero),
            None => Expr::zero(),
        }
    }

    /// Stored `(increasing tuple, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, f: &Expr) -> DifferentialForm {
        let mut w = DifferentialForm::zero(&self.chart, self.degree);
        for (k, c) in &self.coeffs {
            w.add_term(k, f * c).expect("same shape");
        }
        w
    }

    pub fn add(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        if self.degree != other.degree {
            return Err(GeometryError::Dimension("adding forms of different degree".into()));
        }
        let mut w = self.clone();
        for (k, c) in &other.coeffs {
            w.add_term(k, c.clone())?;
        }
        Ok(w)
    }

    pub fn sub(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeometryError> {
        self.add(&other.scale(&Expr::int(-1)))
    }

    pub fn wedge(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        let deg = self.degree + other.degree;
        if deg > self.chart.dim() {
            return Err(GeometryError::Dimension(format!("wedge degree {deg} exceeds dimension")));
        }
        let mut w = DifferentialForm::zero(&self.chart, deg);
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                let idx: Vec<usize> = i.iter().chain(j.iter()).copied().collect();
                w.add_term(&idx, a * b)?;
            }
        }
        Ok(w)
    }

    /// Value on `k` vector fields: `Σ_I α_I det(V_j^{i_l})`.
    pub fn apply(&self, vs: &[&VectorField]) -> Result<Expr, GeometryError> {
        if vs.len() != self.degree {
            return Err(GeometryError::Dimension(format!(
                "{}-form applied to {} vectors",
                self.degree,
                vs.len()
            )));
        }
        for v in vs {
            same_chart(&self.chart, &v.chart)?;
        }
        Ok(sum(self.coeffs.iter().map(|(idx, c)| {
            let m: Vec<Vec<Expr>> = idx.iter().map(|&i| vs.iter().map(|v| v.comps[i].clone()).collect()).collect();
            c * &det_expr(&m)
        })))
    }

    /// Interior product `ι_X α`.
    pub fn interior(&self, x: &VectorField) -> Result<DifferentialForm, GeometryError> {
        same_chart(&self.chart, &x.chart)?;
        if self.degree == 0 {
            return Err(GeometryError::Dimension("interior product of a function".into()));
        }
        let mut w = DifferentialForm::zero(&self.chart, self.degree - 1);
        for (idx, c) in &self.coeffs {
            for (pos, &i) in idx.iter().enumerate() {
                if x.comps[i].is_zero() {
                    continue;
                }
                let rest: Vec<usize> = idx.iter().enumerate().filter(|(p, _)| *p != pos).map(|(_, &j)| j).collect();
                let t = &x.comps[i] * c;
                w.add_term(&rest, if pos % 2 == 1 { -t } else { t })?;
            }
        }
        Ok(w)
    }

    /// Full antisymmetric coefficient matrix of a 2-form.
    pub fn matrix(&self) -> Result<Vec<Vec<Expr>>, GeometryError> {
        if self.degree != 2 {
            return Err(GeometryError::Dimension(format!("matrix of a {}-form", self.degree)));
        }
        let m = self.chart.dim();
        Ok((0..m).map(|i| (0..m).map(|j| self.component(&[i, j])).collect()).collect())
    }

    pub fn substitute(&self, map: &HashMap<String, Expr>, chart: &ChartRef) -> DifferentialForm {
        let mut w = DifferentialForm::zero(chart, self.degree);
        for (k, c) in &self.coeffs {
            w.add_term(k, c.substitute(map)).expect("same shape");
        }
        w
    }

    /// Same coefficients on another chart of equal dimension whose leading
    /// coordinates carry the same names (used for pulling back along projections).
    pub fn embed(&self, chart: &ChartRef, index_map: &[usize]) -> DifferentialForm {
        let mut w = DifferentialForm::zero(chart, self.degree);
        for (k, c) in &self.coeffs {
            let idx: Vec<usize> = k.iter().map(|&i| index_map[i]).collect();
            w.add_term(&idx, c.clone()).expect("valid embedding");
        }
        w
    }

    pub fn compile(&self) -> Result<(Vec<Vec<usize>>, Compiled), GeometryError> {
        let keys: Vec<Vec<usize>> = self.coeffs.keys().cloned().collect();
        let exprs: Vec<Expr> = self.coeffs.values().cloned().collect();
        Ok((keys, Compiled::new(&exprs, self.chart.coords())?))
    }

    /// Numeric antisymmetric matrix of a 2-form at a point.
    pub fn matrix_at(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>, GeometryError> {
        if self.degree != 2 {
            return Err(GeometryError::Dimension(format!("matrix of a {}-form", self.degree)));
        }
        let m = self.chart.dim();
        let mut p = point.to_vec();
        self.chart.domain.reduce(&mut p);
        let (keys, tape) = self.compile()?;
        let vals = tape.eval(&p)?;
        let mut a = nalgebra::DMatrix::zeros(m, m);
        for (k, v) in keys.iter().zip(vals) {
            a[(k[0], k[1])] = v;
            a[(k[1], k[0])] = -v;
        }
        Ok(a)
    }
}

/// `(dα)_{j_0…j_k} = Σ_l (-1)^l ∂_{j_l} α_{j_0…ĵ_l…j_k}`.
pub fn exterior_derivative(a: &DifferentialForm) -> Result<DifferentialForm, GeometryError> {
    let m = a.chart.dim();
    if a.degree + 1 > m {
        return Err(GeometryError::Dimension(format!(
            "d of a {}-form on a {m}-dimensional chart",
            a.degree
        )));
    }
    let mut w = DifferentialForm::zero(&a.chart, a.degree + 1);
    let coords = a.chart.coords();
    for (idx, c) in &a.coeffs {
        for (j, x) in coords.iter().enumerate() {
            let dc = c.diff(x);
            if dc.is_zero() {
                continue;
            }
            let mut full = vec![j];
            full.extend_from_slice(idx);
            w.add_term(&full, dc)?;
        }
    }
    Ok(w)
}

/// Covariant tensor field of valence `r`, stored as the full component array
/// `T_{i_1…i_r}` in row-major index order.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub chart: ChartRef,
    pub rank: usize,
    pub comps: Vec<Expr>,
}

impl TensorField {
    pub fn zero(chart: &ChartRef, rank: usize) -> TensorField {
        TensorField {
            chart: chart.clone(),
            rank,
            comps: vec![Expr::zero(); chart.dim().pow(rank as u32)],
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let m = self.chart.dim();
        idx.iter().fold(0, |acc, &i| acc * m + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let m = self.chart.dim();
        let mut idx = vec![0; self.rank];
        for slot in idx.iter_mut().rev() {
            *slot = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.comps[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], e: Expr) {
        let k = self.flat_index(idx);
        self.comps[k] = e;
    }

    pub fn from_one_form(a: &DifferentialForm) -> Result<TensorField, GeometryError> {
        if a.degree != 1 {
            return Err(GeometryError::Dimension("expected a 1-form".into()));
        }
        let mut t = TensorField::zero(&a.chart, 1);
        for i in 0..a.chart.dim() {
            t.comps[i] = a.component(&[i]);
        }
        Ok(t)
    }

    /// The k-form viewed as an antisymmetric covariant tensor.
    pub fn from_form(a: &DifferentialForm) -> TensorField {
        let mut t = TensorField::zero(&a.chart, a.degree);
        for k in 0..t.comps.len() {
            let idx = t.multi_index(k);
            t.comps[k] = a.component(&idx);
        }
        t
    }

    /// Antisymmetric part read back as a form (assumes `self` is alternating).
    pub fn to_form(&self) -> DifferentialForm {
        let mut w = DifferentialForm::zero(&self.chart, self.rank);
        for k in 0..self.comps.len() {
            let idx = self.multi_index(k);
            if idx.windows(2).all(|p| p[0] < p[1]) {
                w.add_term(&idx, self.comps[k].clone()).expect("valid index");
            }
        }
        w
    }

    pub fn tensor(&self, other: &TensorField) -> Result<TensorField, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        let mut t = TensorField::zero(&self.chart, self.rank + other.rank);
        let n2 = other.comps.len();
        for (i, a) in self.comps.iter().enumerate() {
            for (j, b) in other.comps.iter().enumerate() {
                t.comps[i * n2 + j] = a * b;
            }
        }
        Ok(t)
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField, GeometryError> {
        same_chart(&self.chart, &other.chart)?;
        if self.rank != other.rank {
            return Err(GeometryError::Dimension("adding tensors of different valence".into()));
        }
        Ok(TensorField {
            chart: self.chart.clone(),
            rank: self.rank,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, f: &Expr) -> TensorField {
        TensorField {
            chart: self.chart.clone(),
            rank: self.rank,
            comps: self.comps.iter().map(|c| f * c).collect(),
        }
    }

    /// `T(X_1,…,X_r)`.
    pub fn apply(&self, vs: &[&VectorField]) -> Result<Expr, GeometryError> {
        if vs.len() != self.rank {
            return Err(GeometryError::Dimension("wrong number of arguments".into()));
        }
        Ok(sum(self.comps.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| {
            let idx = self.multi_index(k);
            idx.iter().zip(vs).fold(c.clone(), |acc, (&i, v)| &acc * &v.comps[i])
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{approx_equal, parse, SYMBOLIC_TOL};
    use crate::geometry::Chart;

    fn same(a: &Expr, b: &Expr, c: &ChartRef) -> bool {
        approx_equal(a, b, &c.domain, 50, SYMBOLIC_TOL).unwrap().equal
    }

    #[test]
    fn canonical_sign_convention() {
        let c = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let w = DifferentialForm::canonical(&c).unwrap();
        let dp = VectorField::coordinate(&c, 0);
        let dq = VectorField::coordinate(&c, 1);
        assert_eq!(w.apply(&[&dq, &dp]).unwrap().as_const().unwrap().value(), 1.0);
        assert_eq!(w.apply(&[&dp, &dq]).unwrap().as_const().unwrap().value(), -1.0);
    }

    #[test]
    fn d_of_tautological_form() {
        let c = Chart::euclidean("T*R", &["x", "xi"], -1.0, 1.0);
        let theta = DifferentialForm::one_form(&c, vec![parse("xi").unwrap(), Expr::zero()]).unwrap();
        let dtheta = exterior_derivative(&theta).unwrap();
        let expected = DifferentialForm::dx(&c, 1).wedge(&DifferentialForm::dx(&c, 0)).unwrap();
        assert!(same(&dtheta.component(&[0, 1]), &expected.component(&[0, 1]), &c));
    }

    #[test]
    fn d_examples() {
        let c = Chart::euclidean("R2", &["x", "y"], -1.0, 1.0);
        let a = DifferentialForm::one_form(&c, vec![Expr::zero(), parse("x").unwrap()]).unwrap();
        let da = exterior_derivative(&a).unwrap();
        // coefficient oracle: d(a_y dy) = ∂_x a_y dx∧dy
        assert!(same(&da.component(&[0, 1]), &parse("1").unwrap(), &c));
        let w = DifferentialForm::canonical(&c).unwrap();
        assert!(matches!(exterior_derivative(&w), Err(GeometryError::Dimension(_))));
        let c3 = Chart::euclidean("R3", &["p", "q", "z"], -1.0, 1.0);
        let mut w3 = DifferentialForm::zero(&c3, 2);
        w3.add_term(&[1, 0], Expr::one()).unwrap();
        assert!(exterior_derivative(&w3).unwrap().is_zero());
    }

    #[test]
    fn interior_matches_apply() {
        let c = Chart::euclidean("R3", &["x", "y", "z"], -1.0, 1.0);
        let mut w = DifferentialForm::zero(&c, 2);
        w.add_term(&[0, 1], parse("x*z").unwrap()).unwrap();
        w.add_term(&[2, 1], parse("sin(y)").unwrap()).unwrap();
        let x = VectorField::new(c.clone(), vec![parse("y").unwrap(), parse("1").unwrap(), parse("x^2").unwrap()]).unwrap();
        let y = VectorField::new(c.clone(), vec![parse("z").unwrap(), parse("x").unwrap(), parse("2").unwrap()]).unwrap();
        let ix = w.interior(&x).unwrap();
        assert!(same(&ix.apply(&[&y]).unwrap(), &w.apply(&[&x, &y]).unwrap(), &c));
    }

    #[test]
    fn tensor_round_trip() {
        let c = Chart::euclidean("R2", &["p", "q"], -1.0, 1.0);
        let w = DifferentialForm::canonical(&c).unwrap();
        let t = TensorField::from_form(&w);
        let back = t.to_form();
        assert!(same(&back.component(&[1, 0]), &Expr::one(), &c));
        let dp = VectorField::coordinate(&c, 0);
        let dq = VectorField::coordinate(&c, 1);
        assert!(same(&t.apply(&[&dq, &dp]).unwrap(), &Expr::one(), &c));
    }
}
