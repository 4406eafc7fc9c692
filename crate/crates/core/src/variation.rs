//! Quadratic variation statistics and their convergence targets.
//!
//! The normalized statistic of a trajectory on an n-step grid is
//! `n^{-1/alpha} sum (u(t_{i+1}) - u(t_i))^2`. For additive noise it
//! converges to a constant depending only on the window span; with a state
//! dependent diffusion coefficient the limit weights each step by
//! `sigma^2(u(t_i, x))`.

use crate::grid::TimeGrid;
use crate::model::AlphaModel;
use crate::{Error, Result};

/// Kind of limiting target a statistic is held against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Constant limit of the additive-noise model.
    LinearConstantTarget,
    /// Per-trajectory Riemann sum of sigma^2 along the path.
    NonlinearIntegralTarget,
}

/// One trajectory's statistic next to its limiting target.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VariationResult {
    pub alpha: f64,
    pub n: usize,
    pub statistic: f64,
    pub target: f64,
    pub abs_error: f64,
    pub kind: TargetKind,
}

impl VariationResult {
    fn new(model: &AlphaModel, grid: &TimeGrid, statistic: f64, target: f64, kind: TargetKind) -> Self {
        VariationResult {
            alpha: model.alpha,
            n: grid.n(),
            statistic,
            target,
            abs_error: (statistic - target).abs(),
            kind,
        }
    }
}

/// Statistic of one trajectory against the constant limit of the
/// additive-noise model.
pub fn compare_linear(model: &AlphaModel, grid: &TimeGrid, values: &[f64]) -> Result<VariationResult> {
    let statistic = weighted_qv(model, grid, values)?;
    let target = crate::covariance::qv_limit_linear(model, grid);
    Ok(VariationResult::new(model, grid, statistic, target, TargetKind::LinearConstantTarget))
}

/// Statistic of one trajectory against the Riemann sum of its own sigma^2
/// record.
pub fn compare_nonlinear(
    model: &AlphaModel,
    grid: &TimeGrid,
    values: &[f64],
    sigma_sq: &[f64],
) -> Result<VariationResult> {
    let statistic = weighted_qv(model, grid, values)?;
    let target = qv_target_nonlinear(model, grid, sigma_sq)?;
    Ok(VariationResult::new(model, grid, statistic, target, TargetKind::NonlinearIntegralTarget))
}

/// Normalized quadratic variation `n^{-1/alpha} sum of squared increments`
/// of one trajectory sampled on `grid`.
pub fn weighted_qv(model: &AlphaModel, grid: &TimeGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.points().len() {
        return Err(Error::Domain(format!(
            "trajectory has {} values but the grid has {} points",
            values.len(),
            grid.points().len()
        )));
    }
    let sum: f64 = values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(sum / (grid.n() as f64).powf(1.0 / model.alpha))
}

/// Convergence target of the normalized statistic when the diffusion
/// coefficient along the trajectory took the values `sigma_sq` at the left
/// endpoint of each step.
pub fn qv_target_nonlinear(model: &AlphaModel, grid: &TimeGrid, sigma_sq: &[f64]) -> Result<f64> {
    if sigma_sq.len() != grid.n() {
        return Err(Error::Domain(format!(
            "needs one sigma^2 value per step: got {} for {} steps",
            sigma_sq.len(),
            grid.n()
        )));
    }
    let sum: f64 = sigma_sq.iter().sum();
    Ok(model.c_qv * grid.span().powf(-1.0 / model.alpha) * grid.delta() * sum)
}

/// Spatial average of the normalized statistic over trajectories observed at
/// several points of the same field.
pub fn averaged_qv(model: &AlphaModel, grid: &TimeGrid, paths: &[Vec<f64>]) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::Domain("averaging needs at least one trajectory".into()));
    }
    let mut acc = 0.0;
    for values in paths {
        acc += weighted_qv(model, grid, values)?;
    }
    Ok(acc / paths.len() as f64)
}

/// Least squares slope of `log2 error` against `log2 n`.
///
/// Nonpositive errors carry no rate information and are dropped; fewer than
/// three usable points leave the fit meaningless.
pub fn fit_log_slope(ns: &[usize], errors: &[f64]) -> Result<f64> {
    if ns.len() != errors.len() {
        return Err(Error::Analysis(format!(
            "{} sizes against {} errors",
            ns.len(),
            errors.len()
        )));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .filter(|&(_, &e)| e > 0.0 && e.is_finite())
        .map(|(&n, &e)| ((n as f64).log2(), e.log2()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Analysis(format!(
            "only {} usable points for the rate fit, need at least 3",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Analysis("all sizes in the rate fit coincide".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::qv_limit_linear;
    use crate::gaussian::LinearSampler;

    #[test]
    fn constant_sigma_target_reduces_to_linear_limit() {
        for &alpha in &[1.25, 1.5, 1.75, 2.0] {
            let model = AlphaModel::new(alpha).unwrap();
            for &(t1, t2, n) in &[(0.0, 1.0, 64usize), (0.5, 2.5, 100)] {
                let grid = TimeGrid::new(t1, t2, n).unwrap();
                let target = qv_target_nonlinear(&model, &grid, &vec![1.0; n]).unwrap();
                let limit = qv_limit_linear(&model, &grid);
                assert!(
                    (target - limit).abs() <= 1e-12 * limit,
                    "alpha = {alpha}: {target} vs {limit}"
                );
            }
        }
    }

    #[test]
    fn statistic_of_a_hand_path() {
        let model = AlphaModel::new(1.5).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let stat = weighted_qv(&model, &grid, &[0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((stat - 2.0 / 3.0f64.powf(2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn length_mismatches_are_domain_errors() {
        let model = AlphaModel::new(1.5).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            weighted_qv(&model, &grid, &[0.0; 4]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            qv_target_nonlinear(&model, &grid, &[1.0; 5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            averaged_qv(&model, &grid, &[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn average_equals_mean_of_single_statistics() {
        let model = AlphaModel::new(1.25).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let a: Vec<f64> = (0..=8).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..=8).map(|i| (i as f64 * 0.7).cos()).collect();
        let avg = averaged_qv(&model, &grid, &[a.clone(), b.clone()]).unwrap();
        let one = weighted_qv(&model, &grid, &a).unwrap();
        let two = weighted_qv(&model, &grid, &b).unwrap();
        assert!((avg - 0.5 * (one + two)).abs() <= 1e-15 * avg.abs());
    }

    #[test]
    fn exact_paths_concentrate_at_the_limit() {
        let model = AlphaModel::new(1.5).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 512).unwrap();
        let sampler = LinearSampler::new(model, &grid).unwrap();
        let paths = sampler.replications(2024, 200);
        let stats: Vec<f64> = paths
            .iter()
            .map(|p| weighted_qv(&model, &grid, &p.values).unwrap())
            .collect();
        let mean = stats.iter().sum::<f64>() / stats.len() as f64;
        let limit = qv_limit_linear(&model, &grid);
        assert!(
            (mean - limit).abs() <= 0.03 * limit,
            "mean statistic {mean} vs limit {limit}"
        );
    }

    #[test]
    fn slope_fit_recovers_synthetic_rate() {
        let ns = [256usize, 512, 1024, 2048, 4096];
        let errors: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.4)).collect();
        let slope = fit_log_slope(&ns, &errors).unwrap();
        assert!((slope + 0.4).abs() < 1e-12);
    }

    #[test]
    fn comparisons_record_exact_absolute_error() {
        let model = AlphaModel::new(1.5).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let values = [0.0, 0.3, -0.1, 0.4, 0.2];
        let lin = compare_linear(&model, &grid, &values).unwrap();
        assert_eq!(lin.kind, TargetKind::LinearConstantTarget);
        assert_eq!(lin.abs_error, (lin.statistic - lin.target).abs());
        assert_eq!(lin.n, 4);
        assert!(lin.statistic >= 0.0);
        let non = compare_nonlinear(&model, &grid, &values, &[1.0, 2.0, 0.5, 1.5]).unwrap();
        assert_eq!(non.kind, TargetKind::NonlinearIntegralTarget);
        assert_eq!(non.statistic, lin.statistic);
        assert_eq!(non.abs_error, (non.statistic - non.target).abs());
        let constant = compare_nonlinear(&model, &grid, &values, &[1.0; 4]).unwrap();
        assert!((constant.target - lin.target).abs() <= 1e-12 * lin.target);
    }

    #[test]
    fn slope_fit_rejects_degenerate_inputs() {
        assert!(matches!(
            fit_log_slope(&[256, 512], &[0.1, 0.05]),
            Err(Error::Analysis(_))
        ));
        assert!(matches!(
            fit_log_slope(&[256, 512, 1024], &[0.1, 0.0, -0.2]),
            Err(Error::Analysis(_))
        ));
        assert!(matches!(
            fit_log_slope(&[256, 512, 1024], &[0.1, 0.05]),
            Err(Error::Analysis(_))
        ));
    }
}
