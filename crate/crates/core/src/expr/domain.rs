use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Expr, ExprError};

/// Sampling region: per-variable bounds with optional unit periodicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub vars: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
}

impl Domain {
    pub fn new(vars: Vec<String>, bounds: Vec<(f64, f64)>, periodic: Vec<bool>) -> Result<Domain, ExprError> {
        if vars.len() != bounds.len() || vars.len() != periodic.len() {
            return Err(ExprError::Invalid("domain field lengths differ".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(ExprError::Invalid(format!("bad bounds for `{}`", vars[i])));
            }
            if periodic[i] && (lo != 0.0 || hi != 1.0) {
                return Err(ExprError::Invalid(format!("periodic `{}` must have bounds [0,1)", vars[i])));
            }
        }
        Ok(Domain { vars, bounds, periodic })
    }

    /// Same bounds on every variable, none periodic.
    pub fn boxed(vars: &[&str], lo: f64, hi: f64) -> Domain {
        Domain {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            bounds: vec![(lo, hi); vars.len()],
            periodic: vec![false; vars.len()],
        }
    }

    /// Unit-periodic box `[0,1)^n`.
    pub fn torus(vars: &[&str]) -> Domain {
        Domain {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            bounds: vec![(0.0, 1.0); vars.len()],
            periodic: vec![true; vars.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn index_of(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    /// Reduce periodic coordinates into `[0,1)`.
    pub fn reduce(&self, point: &mut [f64]) {
        for (x, &p) in point.iter_mut().zip(&self.periodic) {
            if p {
                *x = x.rem_euclid(1.0);
            }
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// `n` uniform samples from a deterministic seed.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                self.bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                    .collect()
            })
            .collect()
    }

    /// Partial derivative restricted to declared variables.
    pub fn diff(&self, e: &Expr, var: &str) -> Result<Expr, ExprError> {
        if self.index_of(var).is_none() {
            return Err(ExprError::UnknownVariable(var.to_string()));
        }
        Ok(e.diff(var))
    }

    /// Evaluate after reducing periodic coordinates.
    pub fn eval(&self, e: &Expr, point: &[f64]) -> Result<f64, ExprError> {
        if point.len() != self.dim() {
            return Err(ExprError::Invalid(format!(
                "point has {} coordinates, domain has {}",
                point.len(),
                self.dim()
            )));
        }
        let mut p = point.to_vec();
        self.reduce(&mut p);
        e.eval(&self.vars, &p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn periodic_reduction_before_eval() {
        let d = Domain::torus(&["x"]);
        let e = parse("x").unwrap();
        assert!((d.eval(&e, &[1.25]).unwrap() - 0.25).abs() < 1e-15);
        assert!((d.eval(&e, &[-0.25]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_periodic_bounds() {
        let r = Domain::new(vec!["x".into()], vec![(0.0, 2.0)], vec![true]);
        assert!(r.is_err());
    }

    #[test]
    fn diff_requires_declared_variable() {
        let d = Domain::boxed(&["x"], 0.0, 1.0);
        assert!(matches!(d.diff(&parse("x").unwrap(), "y"), Err(ExprError::UnknownVariable(_))));
    }

    #[test]
    fn samples_are_deterministic() {
        let d = Domain::boxed(&["x", "y"], -1.0, 1.0);
        assert_eq!(d.samples(5, 7), d.samples(5, 7));
        assert_ne!(d.samples(5, 7), d.samples(5, 8));
    }
}
