//! Uniform time grids for increment statistics.

use crate::{Error, Result};

/// Uniform grid `t_i = t1 + i delta`, `i = 0..=n`, `delta = (t2-t1)/n`.
/// Endpoints are exact; interior points are within one rounding unit of
/// uniform spacing and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t1: f64,
    t2: f64,
    n: usize,
    delta: f64,
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t1: f64, t2: f64, n: usize) -> Result<Self> {
        if !(t1 >= 0.0 && t1.is_finite()) {
            return Err(Error::Domain(format!("t1 must be finite and >= 0, got {t1}")));
        }
        if !(t2 > t1 && t2.is_finite()) {
            return Err(Error::Domain(format!("t2 must be finite and > t1 = {t1}, got {t2}")));
        }
        if n < 1 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let span = t2 - t1;
        let points: Vec<f64> = (0..=n)
            .map(|i| {
                if i == n {
                    t2
                } else {
                    t1 + span * (i as f64 / n as f64)
                }
            })
            .collect();
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "grid of {n} steps on [{t1}, {t2}] collapses below f64 resolution"
            )));
        }
        Ok(TimeGrid {
            t1,
            t2,
            n,
            delta: span / n as f64,
            points,
        })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn span(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}
