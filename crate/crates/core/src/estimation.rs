//! Parameter estimators built on the quadratic variation statistic: the
//! noise level sigma^2 of the constant-coefficient model and the drift mu of
//! the drifted model with known sigma(.).

use crate::gaussian::LinearSampler;
use crate::grid::TimeGrid;
use crate::model::AlphaModel;
use crate::solver::{solve_path, Sigma, SolverConfig};
use crate::variation::weighted_qv;
use crate::{rng, Error, Result};

/// Which estimator a sweep or report row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Sigma2,
    Mu,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Sigma2 => "sigma2",
            EstimatorKind::Mu => "mu",
        })
    }
}

/// Ensemble summary for one estimator at one grid size.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimatorResult {
    pub estimator: EstimatorKind,
    pub alpha: f64,
    pub truth: f64,
    pub n: usize,
    pub replications: usize,
    pub estimate_mean: f64,
    /// Mean of |estimate - truth| / truth over the ensemble.
    pub rel_error_mean: f64,
    pub rel_error_sd: f64,
}

impl EstimatorResult {
    pub(crate) fn summarize(
        estimator: EstimatorKind,
        model: &AlphaModel,
        truth: f64,
        n: usize,
        estimates: &[f64],
    ) -> Self {
        let reps = estimates.len() as f64;
        let estimate_mean = estimates.iter().sum::<f64>() / reps;
        let rel: Vec<f64> = estimates.iter().map(|e| (e - truth).abs() / truth).collect();
        let rel_error_mean = rel.iter().sum::<f64>() / reps;
        let rel_error_sd = if estimates.len() > 1 {
            (rel.iter().map(|r| (r - rel_error_mean) * (r - rel_error_mean)).sum::<f64>()
                / (reps - 1.0))
                .sqrt()
        } else {
            0.0
        };
        EstimatorResult {
            estimator,
            alpha: model.alpha,
            truth,
            n,
            replications: estimates.len(),
            estimate_mean,
            rel_error_mean,
            rel_error_sd,
        }
    }
}

/// Noise level estimate for a constant-sigma trajectory: the normalized
/// variation statistic divided by its sigma = 1 limit.
pub fn estimate_sigma2(model: &AlphaModel, grid: &TimeGrid, values: &[f64]) -> Result<f64> {
    let statistic = weighted_qv(model, grid, values)?;
    if statistic == 0.0 {
        return Err(Error::Degenerate(
            "all increments vanish; sigma^2 has no scale to read".into(),
        ));
    }
    Ok(statistic / (model.c_qv * grid.span().powf(model.beta)))
}

/// Drift estimate for a trajectory with known diffusion coefficient;
/// `sigma_sq` holds sigma^2(u(t_i, x)) at the left endpoint of each step.
pub fn estimate_mu(
    model: &AlphaModel,
    grid: &TimeGrid,
    values: &[f64],
    sigma_sq: &[f64],
) -> Result<f64> {
    if values.len() != grid.points().len() {
        return Err(Error::Domain(format!(
            "trajectory has {} values but the grid has {} points",
            values.len(),
            grid.points().len()
        )));
    }
    if sigma_sq.len() != grid.n() {
        return Err(Error::Domain(format!(
            "needs one sigma^2 value per step: got {} for {} steps",
            sigma_sq.len(),
            grid.n()
        )));
    }
    let sum_sq: f64 = values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    if sum_sq == 0.0 {
        return Err(Error::Degenerate(
            "all increments vanish; the drift ratio divides by zero".into(),
        ));
    }
    let weight: f64 = sigma_sq.iter().sum();
    if !(weight > 0.0) {
        return Err(Error::Degenerate(
            "sigma^2 record sums to zero; the coefficient must stay positive".into(),
        ));
    }
    let n = grid.n() as f64;
    let ratio = model.c_qv * grid.span().powf(model.beta) * n.powf(-model.beta) * weight / sum_sq;
    Ok(ratio.powf(model.alpha))
}

/// Runs the Monte Carlo consistency harness for one estimator across grid
/// sizes. For sigma^2 the paths are exact draws of the constant-coefficient
/// model scaled to the requested level; for mu they come from the solver
/// with sigma = 1.
pub fn consistency_sweep(
    model: &AlphaModel,
    truth: f64,
    ns: &[usize],
    replications: usize,
    which: EstimatorKind,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("ns: must be strictly increasing, got {ns:?}")));
    }
    if !(truth > 0.0 && truth.is_finite()) {
        return Err(Error::Config(format!("truth: must be positive, got {truth}")));
    }
    if replications == 0 {
        return Err(Error::Config("replications: must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(ns.len());
    match which {
        EstimatorKind::Sigma2 => {
            let level = truth.sqrt();
            for (slot, &n) in ns.iter().enumerate() {
                let grid = TimeGrid::new(0.0, 1.0, n)?;
                let sampler = LinearSampler::new(*model, &grid)?;
                let stream_base = rng::derive_seed(seed, slot as u64);
                let estimates: Vec<f64> = sampler
                    .replications(stream_base, replications)
                    .iter()
                    .map(|path| {
                        let scaled: Vec<f64> = path.values.iter().map(|v| v * level).collect();
                        estimate_sigma2(model, &grid, &scaled)
                    })
                    .collect::<Result<_>>()?;
                out.push(EstimatorResult::summarize(which, model, truth, n, &estimates));
            }
        }
        EstimatorKind::Mu => {
            let max_n = *ns.last().unwrap();
            let dt = 1.0 / (4 * max_n) as f64;
            let margin = 5.0 * truth.powf(1.0 / model.alpha);
            let config = SolverConfig {
                model: *model,
                mu: truth,
                domain_half_length: margin.max(5.0).ceil(),
                modes: 1024,
                dt,
                t_end: 1.0,
                sigma: Sigma::Constant { level: 1.0 },
                seed,
            };
            for (slot, &n) in ns.iter().enumerate() {
                let grid = TimeGrid::new(0.0, 1.0, n)?;
                let stream_base = rng::derive_seed(seed, slot as u64);
                let estimates: Vec<f64> = rng::replicate(stream_base, replications, |i, _| {
                    let mut cfg = config.clone();
                    cfg.seed = rng::derive_seed(stream_base, i as u64);
                    let bundle = solve_path(&cfg, &grid, &[0.0])?;
                    let path = &bundle.paths[0];
                    estimate_mu(model, &grid, &path.values, &bundle.sigma_sq[0][..n])
                })
                .into_iter()
                .collect::<Result<_>>()?;
                out.push(EstimatorResult::summarize(which, model, truth, n, &estimates));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::qv_limit_linear;

    fn model(alpha: f64) -> AlphaModel {
        AlphaModel::new(alpha).unwrap()
    }

    #[test]
    fn sigma2_scales_exactly_with_the_path_square() {
        let m = model(1.5);
        let grid = TimeGrid::new(0.0, 1.0, 128).unwrap();
        let sampler = LinearSampler::new(m, &grid).unwrap();
        let path = sampler.replications(4, 1).remove(0);
        let base = estimate_sigma2(&m, &grid, &path.values).unwrap();
        let doubled: Vec<f64> = path.values.iter().map(|v| 2.0 * v).collect();
        let scaled = estimate_sigma2(&m, &grid, &doubled).unwrap();
        assert_eq!(scaled.to_bits(), (4.0 * base).to_bits());
    }

    #[test]
    fn degenerate_paths_are_reported() {
        let m = model(1.5);
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let flat = vec![1.0; 17];
        assert!(matches!(
            estimate_sigma2(&m, &grid, &flat),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            estimate_mu(&m, &grid, &flat, &[1.0; 16]),
            Err(Error::Degenerate(_))
        ));
        let wiggly: Vec<f64> = (0..=16).map(|i| (i % 2) as f64).collect();
        assert!(matches!(
            estimate_mu(&m, &grid, &wiggly, &[0.0; 16]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn plugging_the_limit_into_mu_returns_truth() {
        for &(alpha, mu) in &[(1.25, 0.5f64), (1.5, 1.0), (1.75, 2.0)] {
            let m = model(alpha);
            let n = 256usize;
            let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
            // A sawtooth with every squared increment equal to the limiting
            // mean square: sum_sq is then exactly the limit value for
            // drift mu and sigma = 1.
            let target_sum = qv_limit_linear(&m, &grid) * (n as f64).powf(1.0 / m.alpha)
                / mu.powf(1.0 / m.alpha);
            let step = (target_sum / n as f64).sqrt();
            let values: Vec<f64> = (0..=n).map(|i| (i % 2) as f64 * step).collect();
            let est = estimate_mu(&m, &grid, &values, &vec![1.0; n]).unwrap();
            assert!(
                (est - mu).abs() <= 1e-10 * mu,
                "alpha = {alpha}: plug-in estimate {est} vs {mu}"
            );
        }
    }

    #[test]
    fn mu_does_not_need_the_constant_sigma_value() {
        let m = model(1.5);
        let grid = TimeGrid::new(0.0, 1.0, 256).unwrap();
        let sampler = LinearSampler::new(m, &grid).unwrap();
        let path = sampler.replications(9, 1).remove(0);
        let base = estimate_mu(&m, &grid, &path.values, &vec![1.0; 256]).unwrap();
        let tripled: Vec<f64> = path.values.iter().map(|v| 3.0 * v).collect();
        let same = estimate_mu(&m, &grid, &tripled, &vec![9.0; 256]).unwrap();
        assert!(
            (base - same).abs() <= 1e-12 * base,
            "sigma = 1 gives {base}, sigma = 3 gives {same}"
        );
    }

    #[test]
    fn single_step_grid_still_produces_a_positive_estimate() {
        let m = model(1.5);
        let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let est = estimate_mu(&m, &grid, &[0.0, 0.7], &[1.0]).unwrap();
        assert!(est.is_finite() && est > 0.0);
    }

    #[test]
    fn sigma2_sweep_tightens_with_n() {
        let m = model(1.5);
        let results = consistency_sweep(&m, 1.0, &[64, 256, 1024], 300, EstimatorKind::Sigma2, 42)
            .unwrap();
        assert_eq!(results.len(), 3);
        let errs: Vec<f64> = results.iter().map(|r| r.rel_error_mean).collect();
        let inversions = errs.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "relative errors {errs:?}");
        assert!(errs[2] < 0.08, "final relative error {}", errs[2]);
        assert!((results[2].estimate_mean - 1.0).abs() < 0.03);
        for r in &results {
            assert_eq!(r.replications, 300);
            assert!(r.estimate_mean > 0.0);
        }
    }

    #[test]
    fn sigma2_sweep_levels_are_recovered() {
        let m = model(1.75);
        let results =
            consistency_sweep(&m, 0.25, &[512], 300, EstimatorKind::Sigma2, 7).unwrap();
        assert!((results[0].estimate_mean - 0.25).abs() < 0.03 * 0.25);
    }

    #[test]
    fn mu_sweep_runs_and_stays_positive() {
        let m = model(1.5);
        let results = consistency_sweep(&m, 1.0, &[16, 64], 60, EstimatorKind::Mu, 3).unwrap();
        assert_eq!(results.len(), 2);
        for r in &results {
            assert!(r.estimate_mean.is_finite() && r.estimate_mean > 0.0);
        }
        assert!(results[1].rel_error_mean < 0.5);
    }

    #[test]
    fn sweep_validates_its_inputs() {
        let m = model(1.5);
        assert!(matches!(
            consistency_sweep(&m, 1.0, &[], 10, EstimatorKind::Sigma2, 0),
            Err(Error::Config(m)) if m.starts_with("ns")
        ));
        assert!(matches!(
            consistency_sweep(&m, 1.0, &[256, 256], 10, EstimatorKind::Sigma2, 0),
            Err(Error::Config(m)) if m.starts_with("ns")
        ));
        assert!(matches!(
            consistency_sweep(&m, -2.0, &[256], 10, EstimatorKind::Sigma2, 0),
            Err(Error::Config(m)) if m.starts_with("truth")
        ));
        assert!(matches!(
            consistency_sweep(&m, 1.0, &[256], 0, EstimatorKind::Sigma2, 0),
            Err(Error::Config(m)) if m.starts_with("replications")
        ));
    }

    #[test]
    fn two_seeds_give_independent_but_sound_runs() {
        let m = model(1.5);
        let a = consistency_sweep(&m, 1.0, &[256], 200, EstimatorKind::Sigma2, 1).unwrap();
        let b = consistency_sweep(&m, 1.0, &[256], 200, EstimatorKind::Sigma2, 2).unwrap();
        assert_ne!(a[0].estimate_mean.to_bits(), b[0].estimate_mean.to_bits());
        assert!((a[0].estimate_mean - 1.0).abs() < 0.05);
        assert!((b[0].estimate_mean - 1.0).abs() < 0.05);
    }
}
