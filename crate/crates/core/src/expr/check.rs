use super::{Compiled, Domain, Expr, ExprError};

/// Relative tolerance for identities of symbolic origin.
pub const SYMBOLIC_TOL: f64 = 1e-9;
/// Relative tolerance for quantities produced by ODE integration.
pub const ODE_TOL: f64 = 1e-4;
/// Seed used when callers do not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed_b11a;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub equal: bool,
    /// First sample where the sides disagreed.
    pub witness: Option<Vec<f64>>,
    /// Largest scaled discrepancy `|a-b| / (1 + max(|a|,|b|))` seen.
    pub max_scaled_error: f64,
    pub samples_used: usize,
}

/// Randomized pointwise identity check with the default seed.
pub fn approx_equal(e1: &Expr, e2: &Expr, dom: &Domain, samples: usize, tol: f64) -> Result<Comparison, ExprError> {
    if samples == 0 {
        return Err(ExprError::Invalid("samples must be >= 1".into()));
    }
    let pts = dom.samples(samples, DEFAULT_SEED);
    approx_equal_at(e1, e2, dom, &pts, tol)
}

/// Identity check at explicit points.
pub fn approx_equal_at(
    e1: &Expr,
    e2: &Expr,
    dom: &Domain,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<Comparison, ExprError> {
    if points.is_empty() {
        return Err(ExprError::Invalid("samples must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(ExprError::Invalid("tolerance must be positive".into()));
    }
    let tape = Compiled::new(&[e1.clone(), e2.clone()], &dom.vars)?;
    let mut both_failed = 0;
    let mut used = 0;
    let mut max_err: f64 = 0.0;
    let mut witness = None;
    for p in points {
        let mut q = p.clone();
        dom.reduce(&mut q);
        let mut r = tape.eval_all(&q).into_iter();
        match (r.next().unwrap(), r.next().unwrap()) {
            (Err(_), Err(_)) => both_failed += 1,
            (Ok(a), Ok(b)) => {
                used += 1;
                let err = (a - b).abs() / (1.0 + a.abs().max(b.abs()));
                let bad = !(err <= tol);
                max_err = max_err.max(if err.is_nan() { f64::INFINITY } else { err });
                if bad && witness.is_none() {
                    witness = Some(p.clone());
                }
            }
            _ => {
                used += 1;
                max_err = f64::INFINITY;
                if witness.is_none() {
                    witness = Some(p.clone());
                }
            }
        }
    }
    if 2 * both_failed > points.len() {
        return Err(ExprError::Inconclusive {
            failed: both_failed,
            total: points.len(),
        });
    }
    Ok(Comparison {
        equal: witness.is_none(),
        witness,
        max_scaled_error: max_err,
        samples_used: used,
    })
}
