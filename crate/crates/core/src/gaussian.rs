//! Exact simulation of the linear solution at a fixed spatial point.
//!
//! With additive noise the solution is a centered Gaussian process in time
//! whose covariance is available in closed form, so trajectories on a grid
//! can be drawn exactly: factor the covariance matrix once, then multiply
//! the factor into fresh standard normals per replication.

use crate::covariance::cov_linear;
use crate::grid::TimeGrid;
use crate::model::AlphaModel;
use crate::{rng, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Hard cap on the factorization dimension; above this the dense factor no
/// longer fits comfortably in memory.
const MAX_DIM: usize = 16_384;

/// Relative jitter ladder tried in order when the clean factorization hits a
/// nonpositive pivot. The matrix is positive definite in exact arithmetic,
/// so jitter only compensates rounding on large, fine grids.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

/// One simulated trajectory on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalPath {
    pub replication: usize,
    pub values: Vec<f64>,
}

impl TemporalPath {
    /// Squared increments of the trajectory, one per grid step.
    pub fn squared_increments(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .collect()
    }
}

/// Samples exact trajectories of the linear solution on a time grid.
#[derive(Debug)]
pub struct LinearSampler {
    model: AlphaModel,
    grid: TimeGrid,
    /// Lower triangular factor in packed rows; row i holds entries 0..=i.
    factor: Vec<Vec<f64>>,
    /// The grid starts at time zero, where the solution vanishes surely; the
    /// factor then covers only the remaining coordinates.
    pinned_zero: bool,
    jitter: f64,
}

impl LinearSampler {
    pub fn new(model: AlphaModel, grid: &TimeGrid) -> Result<Self> {
        let points = grid.points();
        if points.len() > MAX_DIM {
            return Err(Error::Config(format!(
                "n: grid has {} points, the dense factorization is capped at {MAX_DIM}",
                points.len()
            )));
        }
        let pinned_zero = grid.t1() == 0.0;
        let active: Vec<f64> = if pinned_zero {
            points[1..].to_vec()
        } else {
            points.to_vec()
        };
        let entry = |i: usize, j: usize| cov_linear(&model, active[i], active[j]).expect("grid times are valid");
        let (factor, jitter) = factor_with_jitter(active.len(), &entry)?;
        Ok(LinearSampler {
            model,
            grid: grid.clone(),
            factor,
            pinned_zero,
            jitter,
        })
    }

    pub fn model(&self) -> &AlphaModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Jitter added to the diagonal before the factorization succeeded;
    /// zero when the matrix factored cleanly.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draws one exact trajectory.
    pub fn sample(&self, rng: &mut impl Rng, replication: usize) -> TemporalPath {
        let dim = self.factor.len();
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = Vec::with_capacity(self.grid.points().len());
        if self.pinned_zero {
            values.push(0.0);
        }
        for row in &self.factor {
            values.push(row.iter().zip(&z).map(|(l, z)| l * z).sum());
        }
        TemporalPath { replication, values }
    }

    /// Draws `reps` trajectories on the current rayon pool, one derived
    /// random stream per replication.
    pub fn replications(&self, base_seed: u64, reps: usize) -> Vec<TemporalPath> {
        rng::replicate(base_seed, reps, |i, mut stream| self.sample(&mut stream, i))
    }
}

/// Crout factorization with on-demand matrix entries and a jitter ladder.
/// Returns the packed lower triangle and the jitter that was needed.
fn factor_with_jitter(
    dim: usize,
    entry: &impl Fn(usize, usize) -> f64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let max_diag = (0..dim).map(|i| entry(i, i)).fold(0.0_f64, f64::max);
    let mut worst_pivot = f64::INFINITY;
    for scale in JITTER_LADDER {
        let jitter = scale * max_diag;
        match try_factor(dim, entry, jitter) {
            Ok(factor) => return Ok((factor, jitter)),
            Err(pivot) => worst_pivot = worst_pivot.min(pivot),
        }
    }
    Err(Error::Factorization(format!(
        "covariance matrix of dimension {dim} kept a nonpositive pivot ({worst_pivot:.3e}) \
         under diagonal jitter up to {:.1e} relative",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// One Crout pass; on failure returns the offending pivot value.
fn try_factor(
    dim: usize,
    entry: &impl Fn(usize, usize) -> f64,
    jitter: f64,
) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let mut s = entry(i, j);
            for k in 0..j {
                s -= row[k] * l[j][k];
            }
            row[j] = s / l[j][j];
        }
        let mut s = entry(i, i) + jitter;
        for k in 0..i {
            s -= row[k] * row[k];
        }
        if s > 0.0 && s.is_finite() {
            row[i] = s.sqrt();
        } else {
            return Err(s);
        }
        l.push(row);
    }
    Ok(l)
}
