use std::sync::Arc;

use crate::expr::{Domain, ExprError};

/// A single coordinate chart: ordered coordinate names plus a sampling domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub domain: Domain,
    /// Disks removed from the sampling region (punctures), as `(center, radius)`.
    /// Distances respect periodic coordinates.
    pub excluded: Vec<(Vec<f64>, f64)>,
}

pub type ChartRef = Arc<Chart>;

impl Chart {
    pub fn new(name: impl Into<String>, domain: Domain) -> Result<ChartRef, ExprError> {
        if domain.dim() == 0 {
            return Err(ExprError::Invalid("chart dimension must be >= 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &domain.vars {
            if !seen.insert(v) {
                return Err(ExprError::Invalid(format!("duplicate coordinate `{v}`")));
            }
            if matches!(v.as_str(), "sin" | "cos" | "exp" | "log" | "pi") {
                return Err(ExprError::Invalid(format!("reserved coordinate name `{v}`")));
            }
        }
        Ok(Arc::new(Chart {
            name: name.into(),
            domain,
            excluded: Vec::new(),
        }))
    }

    /// Euclidean box chart with identical bounds on every coordinate.
    pub fn euclidean(name: &str, coords: &[&str], lo: f64, hi: f64) -> ChartRef {
        Chart::new(name, Domain::boxed(coords, lo, hi)).expect("valid euclidean chart")
    }

    /// The unit-periodic chart `[0,1)^n`.
    pub fn torus(name: &str, coords: &[&str]) -> ChartRef {
        Chart::new(name, Domain::torus(coords)).expect("valid torus chart")
    }

    pub fn coords(&self) -> &[String] {
        &self.domain.vars
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn index(&self, coord: &str) -> Option<usize> {
        self.domain.index_of(coord)
    }

    /// Same chart with punctures removed from its sampling region.
    pub fn punctured(&self, name: &str, excluded: Vec<(Vec<f64>, f64)>) -> ChartRef {
        Arc::new(Chart {
            name: name.to_string(),
            domain: self.domain.clone(),
            excluded,
        })
    }

    /// Distance between two points, wrapping periodic coordinates.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.domain.periodic)
            .map(|((x, y), &per)| {
                let d = (x - y).abs();
                let d = if per { d.rem_euclid(1.0).min(1.0 - d.rem_euclid(1.0)) } else { d };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_excluded(&self, point: &[f64]) -> bool {
        self.excluded.iter().any(|(c, r)| self.distance(point, c) < *r)
    }

    /// Check points: the domain center followed by seeded uniform samples,
    /// skipping anything inside a puncture; exactly `n` points are returned.
    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut pts = Vec::with_capacity(n);
        let center = self.domain.center();
        if n > 0 && !self.is_excluded(&center) {
            pts.push(center);
        }
        let mut round = 0u64;
        while pts.len() < n {
            let batch = self.domain.samples(n, seed.wrapping_add(round));
            for p in batch {
                if pts.len() < n && !self.is_excluded(&p) {
                    pts.push(p);
                }
            }
            round += 1;
            if round > 1000 {
                break;
            }
        }
        pts
    }

    pub fn same_as(&self, other: &Chart) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}
