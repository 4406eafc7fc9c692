//! Experiment drivers shared by the command line runner and the acceptance
//! suite. Each driver runs one named experiment, checks its contract through
//! named assertions and renders a deterministic CSV body: rerunning with the
//! same configuration reproduces the bytes exactly.

use crate::estimation::{self, EstimatorKind, EstimatorResult};
use crate::gaussian::LinearSampler;
use crate::grid::TimeGrid;
use crate::kernel::KernelEvaluator;
use crate::model::AlphaModel;
use crate::solver::{self, Sigma, SolverConfig};
use crate::variation::{self, fit_log_slope};
use crate::{rng, Error, Result};
use std::f64::consts::PI;

/// The experiments the runner knows, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    KernelValidate,
    LinearQv,
    NonlinearQv,
    AveragedQv,
    Rate,
    EstimateSigma2,
    EstimateMu,
    HolderCheck,
}

pub const ALL_KINDS: [ExperimentKind; 8] = [
    ExperimentKind::KernelValidate,
    ExperimentKind::LinearQv,
    ExperimentKind::NonlinearQv,
    ExperimentKind::AveragedQv,
    ExperimentKind::Rate,
    ExperimentKind::EstimateSigma2,
    ExperimentKind::EstimateMu,
    ExperimentKind::HolderCheck,
];

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KernelValidate => "kernel-validate",
            ExperimentKind::LinearQv => "linear-qv",
            ExperimentKind::NonlinearQv => "nonlinear-qv",
            ExperimentKind::AveragedQv => "averaged-qv",
            ExperimentKind::Rate => "rate",
            ExperimentKind::EstimateSigma2 => "estimate-sigma2",
            ExperimentKind::EstimateMu => "estimate-mu",
            ExperimentKind::HolderCheck => "holder-check",
        }
    }

    /// Header of the CSV this experiment writes; stable so that a table run
    /// with zero cells can still emit a well-formed file.
    pub fn csv_header(self) -> &'static str {
        match self {
            ExperimentKind::KernelValidate => "alpha,check,worst_residual,tolerance,passed",
            ExperimentKind::LinearQv
            | ExperimentKind::NonlinearQv
            | ExperimentKind::AveragedQv
            | ExperimentKind::Rate => {
                "alpha,n,m,replications,source,statistic_mean,target_mean,l1_error,slope"
            }
            ExperimentKind::EstimateSigma2 | ExperimentKind::EstimateMu => {
                "estimator,alpha,truth,n,replications,estimate_mean,rel_error_mean,rel_error_sd"
            }
            ExperimentKind::HolderCheck => "alpha,p,axis,slope,target,tolerance,passed",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_KINDS
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = ALL_KINDS.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "experiment: unknown kind {s:?}; expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

/// One named contract check with a human-readable outcome.
#[derive(Debug, Clone)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Assertion { name: name.to_string(), passed, detail }
    }
}

/// What one experiment run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub assertions: Vec<Assertion>,
    /// Named scalar results, in a fixed order, for programmatic consumers.
    pub metrics: Vec<(String, f64)>,
    /// Full CSV body including the header line.
    pub csv: String,
}

impl ExperimentOutcome {
    fn new(kind: ExperimentKind) -> Self {
        let mut csv = String::from(kind.csv_header());
        csv.push('\n');
        ExperimentOutcome { kind, assertions: Vec::new(), metrics: Vec::new(), csv }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.assertions.iter().find(|a| !a.passed)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    fn push_metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn check_replications(replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(Error::Config("replications: must be at least 1".into()));
    }
    Ok(())
}

/// Increasing sizes where every entry divides the largest, so coarser grids
/// are exact subsamples of the finest and replications can share one run.
fn check_nested_sizes(field: &str, ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Config(format!("{field}: need at least one value")));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{field}: must be strictly increasing and positive, got {ns:?}"
        )));
    }
    let last = *ns.last().unwrap();
    if let Some(bad) = ns.iter().find(|&&n| last % n != 0) {
        return Err(Error::Config(format!(
            "{field}: {bad} does not divide the largest value {last}, so the \
             grids cannot be nested"
        )));
    }
    Ok(())
}

/// Kernel sanity panel: self-similarity, the semigroup identity, unit mass
/// and, at alpha = 2, the Gaussian closed form.
pub fn kernel_validate(alphas: &[f64]) -> Result<ExperimentOutcome> {
    if alphas.is_empty() {
        return Err(Error::Config("alphas: need at least one value".into()));
    }
    let mut out = ExperimentOutcome::new(ExperimentKind::KernelValidate);
    let times = [0.1f64, 1.0, 10.0];
    let xs: Vec<f64> = (0..=80).map(|i| -10.0 + 0.25 * i as f64).collect();

    let check = |out: &mut ExperimentOutcome, alpha: f64, name: &str, worst: f64, tol: f64| {
        let passed = worst <= tol;
        out.csv.push_str(&format!("{alpha},{name},{worst:e},{tol:e},{passed}\n"));
        out.assertions.push(Assertion::new(
            &format!("alpha-{alpha}-{name}"),
            passed,
            format!("worst residual {worst:.3e}, tolerance {tol:.0e}"),
        ));
    };

    for &alpha in alphas {
        let model = AlphaModel::new(alpha)?;
        let eval = KernelEvaluator::new(model);

        let mut worst = 0.0f64;
        for &t in &times {
            let scale = t.powf(-1.0 / alpha);
            for &x in &xs {
                let lhs = eval.green_function(t, x)?;
                let rhs = scale * eval.green_function(1.0, x * scale)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
        check(&mut out, alpha, "scaling", worst, 2e-8);

        let mut worst = 0.0f64;
        for &(t, s) in &[(0.5, 0.5), (1.0, 1.0), (0.4, 1.6)] {
            for &x in &[0.0, 1.0, 2.5, 5.0] {
                worst = worst.max(eval.check_semigroup(t, s, x)?);
            }
        }
        check(&mut out, alpha, "semigroup", worst, 2e-6);

        let mut worst = 0.0f64;
        for &t in &times {
            worst = worst.max((eval.normalization(t)? - 1.0).abs());
        }
        check(&mut out, alpha, "normalization", worst, 1e-7);

        if alpha == 2.0 {
            let mut worst = 0.0f64;
            for &t in &times {
                for &x in &xs {
                    let gauss = (4.0 * PI * t).sqrt().recip() * (-x * x / (4.0 * t)).exp();
                    worst = worst.max((eval.green_function(t, x)? - gauss).abs());
                }
            }
            check(&mut out, alpha, "gaussian-closed-form", worst, 1e-8);
        }
    }
    Ok(out)
}

/// Variation statistic of exact additive-noise paths against its constant
/// limit.
pub fn linear_qv(
    model: &AlphaModel,
    t1: f64,
    t2: f64,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    check_replications(replications)?;
    let grid = TimeGrid::new(t1, t2, n)?;
    let sampler = LinearSampler::new(*model, &grid)?;
    let mut out = ExperimentOutcome::new(ExperimentKind::LinearQv);

    let mut stats = Vec::with_capacity(replications);
    let mut target = 0.0;
    let mut l1_sum = 0.0;
    for path in sampler.replications(seed, replications) {
        let r = variation::compare_linear(model, &grid, &path.values)?;
        stats.push(r.statistic);
        target = r.target;
        l1_sum += r.abs_error;
    }
    let stat_mean = mean(&stats);
    let stat_var = sample_variance(&stats);
    let l1 = l1_sum / replications as f64;
    let rel = (stat_mean - target).abs() / target;

    out.csv.push_str(&format!(
        "{},{},1,{},exact,{},{},{},\n",
        model.alpha, n, replications, stat_mean, target, l1
    ));
    out.push_metric("statistic_mean", stat_mean);
    out.push_metric("statistic_variance", stat_var);
    out.push_metric("target", target);
    out.push_metric("l1_error", l1);
    out.assertions.push(Assertion::new(
        "ensemble-mean-within-3pct",
        rel <= 0.03,
        format!("mean statistic {stat_mean:.6} vs limit {target:.6}: off by {:.2}%", 100.0 * rel),
    ));
    Ok(out)
}

/// Variation statistic of solver paths with state-dependent sigma against the
/// per-trajectory integral target, across nested grid sizes. Every size reads
/// the same underlying trajectories, so the error comparison is paired.
pub fn nonlinear_qv(
    config: &SolverConfig,
    t1: f64,
    t2: f64,
    ns: &[usize],
    replications: usize,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    check_replications(replications)?;
    check_nested_sizes("ns", ns)?;
    let n_max = *ns.last().unwrap();
    let grid_max = TimeGrid::new(t1, t2, n_max)?;
    let grids: Vec<TimeGrid> = ns.iter().map(|&n| TimeGrid::new(t1, t2, n)).collect::<Result<_>>()?;
    let model = config.model;

    let per_rep = rng::replicate(config.seed, replications, |i, _| {
        let mut cfg = config.clone();
        cfg.seed = rng::derive_seed(config.seed, i as u64);
        let bundle = solver::solve_path(&cfg, &grid_max, &[0.0])?;
        let values = &bundle.paths[0].values;
        let sigma_sq = &bundle.sigma_sq[0];
        ns.iter()
            .zip(&grids)
            .map(|(&n, grid)| {
                let stride = n_max / n;
                let sub_values: Vec<f64> = values.iter().step_by(stride).copied().collect();
                let sub_sigma: Vec<f64> =
                    sigma_sq.iter().step_by(stride).take(n).copied().collect();
                let r = variation::compare_nonlinear(&model, grid, &sub_values, &sub_sigma)?;
                Ok((r.statistic, r.target, r.abs_error))
            })
            .collect::<Result<Vec<_>>>()
    });
    let per_rep: Vec<Vec<(f64, f64, f64)>> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut out = ExperimentOutcome::new(ExperimentKind::NonlinearQv);
    let mut l1_by_n = Vec::with_capacity(ns.len());
    for (slot, &n) in ns.iter().enumerate() {
        let stats: Vec<f64> = per_rep.iter().map(|r| r[slot].0).collect();
        let targets: Vec<f64> = per_rep.iter().map(|r| r[slot].1).collect();
        let errs: Vec<f64> = per_rep.iter().map(|r| r[slot].2).collect();
        let l1 = mean(&errs);
        l1_by_n.push(l1);
        out.csv.push_str(&format!(
            "{},{},1,{},solver,{},{},{},\n",
            model.alpha, n, replications, mean(&stats), mean(&targets), l1
        ));
        out.push_metric(format!("l1_error_n{n}"), l1);
    }
    if ns.len() >= 2 {
        let (first, last) = (l1_by_n[0], *l1_by_n.last().unwrap());
        let ratio = first / last;
        out.push_metric("l1_contraction", ratio);
        out.assertions.push(Assertion::new(
            "l1-error-contracts-by-1.5x",
            ratio >= 1.5,
            format!(
                "mean |statistic - target| {:.3e} at n = {} vs {:.3e} at n = {}: ratio {:.2}",
                first,
                ns[0],
                last,
                n_max,
                ratio
            ),
        ));
    }
    Ok(out)
}

/// Spatially averaged variation statistic over m observation points, for a
/// nested family of m. The averaged error should shrink roughly like a
/// power of m while single-point noise would keep it flat.
pub fn averaged_qv(
    config: &SolverConfig,
    t1: f64,
    t2: f64,
    n: usize,
    ms: &[usize],
    replications: usize,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    check_replications(replications)?;
    check_nested_sizes("ms", ms)?;
    let m_max = *ms.last().unwrap();
    if config.cell() * m_max as f64 >= 1.0 {
        return Err(Error::Config(format!(
            "modes: grid cell {} cannot separate {} observation points per unit \
             length; raise modes or lower the largest m",
            config.cell(),
            m_max
        )));
    }
    let grid = TimeGrid::new(t1, t2, n)?;
    let points: Vec<f64> = (0..m_max)
        .map(|j| config.nearest_grid_x(j as f64 / m_max as f64))
        .collect();
    let model = config.model;

    let per_rep = rng::replicate(config.seed, replications, |i, _| {
        let mut cfg = config.clone();
        cfg.seed = rng::derive_seed(config.seed, i as u64);
        let bundle = solver::solve_path(&cfg, &grid, &points)?;
        ms.iter()
            .map(|&m| {
                let stride = m_max / m;
                let members: Vec<Vec<f64>> = (0..m)
                    .map(|j| bundle.paths[j * stride].values.clone())
                    .collect();
                let stat = variation::averaged_qv(&model, &grid, &members)?;
                let mut target = 0.0;
                for j in 0..m {
                    let sig = &bundle.sigma_sq[j * stride][..n];
                    target += variation::qv_target_nonlinear(&model, &grid, sig)?;
                }
                target /= m as f64;
                Ok((stat, target, (stat - target).abs()))
            })
            .collect::<Result<Vec<_>>>()
    });
    let per_rep: Vec<Vec<(f64, f64, f64)>> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut out = ExperimentOutcome::new(ExperimentKind::AveragedQv);
    let mut l1_by_m = Vec::with_capacity(ms.len());
    for (slot, &m) in ms.iter().enumerate() {
        let stats: Vec<f64> = per_rep.iter().map(|r| r[slot].0).collect();
        let targets: Vec<f64> = per_rep.iter().map(|r| r[slot].1).collect();
        let errs: Vec<f64> = per_rep.iter().map(|r| r[slot].2).collect();
        let l1 = mean(&errs);
        l1_by_m.push(l1);
        out.csv.push_str(&format!(
            "{},{},{},{},solver,{},{},{},\n",
            model.alpha, n, m, replications, mean(&stats), mean(&targets), l1
        ));
        out.push_metric(format!("l1_error_m{m}"), l1);
    }
    if ms.len() >= 3 {
        let slope = fit_log_slope(ms, &l1_by_m)?;
        let bound = (1.0 - model.alpha) / 2.0 + 0.2;
        out.csv.push_str(&format!(
            "{},{},,{},solver,,,,{}\n",
            model.alpha, n, replications, slope
        ));
        out.push_metric("slope", slope);
        out.push_metric("slope_bound", bound);
        out.assertions.push(Assertion::new(
            "averaged-error-slope-below-bound",
            slope <= bound,
            format!("fitted slope {slope:.3} in m, bound {bound:.3}"),
        ));
    }
    Ok(out)
}

/// Convergence-rate fit for exact additive-noise paths on dyadic grid sizes.
/// One fine path per replication serves every size through subsampling.
pub fn rate(
    model: &AlphaModel,
    t1: f64,
    t2: f64,
    ns: &[usize],
    replications: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    check_nested_sizes("ns", ns)?;
    if ns.len() < 4 {
        return Err(Error::Config(format!(
            "ns: a rate fit needs at least 4 sizes, got {}",
            ns.len()
        )));
    }
    if let Some(bad) = ns.iter().find(|&&n| !n.is_power_of_two()) {
        return Err(Error::Config(format!("ns: sizes must be powers of two, got {bad}")));
    }
    if replications < 200 {
        return Err(Error::Config(format!(
            "replications: a rate fit needs at least 200, got {replications}"
        )));
    }
    let n_max = *ns.last().unwrap();
    let grid_max = TimeGrid::new(t1, t2, n_max)?;
    let grids: Vec<TimeGrid> = ns.iter().map(|&n| TimeGrid::new(t1, t2, n)).collect::<Result<_>>()?;
    let sampler = LinearSampler::new(*model, &grid_max)?;
    let target = crate::covariance::qv_limit_linear(model, &grid_max);

    let mut stat_sums = vec![0.0; ns.len()];
    let mut l1_sums = vec![0.0; ns.len()];
    for path in sampler.replications(seed, replications) {
        for (slot, (&n, grid)) in ns.iter().zip(&grids).enumerate() {
            let stride = n_max / n;
            let sub: Vec<f64> = path.values.iter().step_by(stride).copied().collect();
            let stat = variation::weighted_qv(model, grid, &sub)?;
            stat_sums[slot] += stat;
            l1_sums[slot] += (stat - target).abs();
        }
    }
    let reps = replications as f64;
    let l1_by_n: Vec<f64> = l1_sums.iter().map(|s| s / reps).collect();
    let slope = fit_log_slope(ns, &l1_by_n)?;
    let bound = (1.0 - model.alpha) / (2.0 * model.alpha) + 0.15;

    let mut out = ExperimentOutcome::new(ExperimentKind::Rate);
    for (slot, &n) in ns.iter().enumerate() {
        out.csv.push_str(&format!(
            "{},{},1,{},exact,{},{},{},\n",
            model.alpha,
            n,
            replications,
            stat_sums[slot] / reps,
            target,
            l1_by_n[slot]
        ));
        out.push_metric(format!("l1_error_n{n}"), l1_by_n[slot]);
    }
    out.csv.push_str(&format!("{},,1,{},exact,,,,{}\n", model.alpha, replications, slope));
    out.push_metric("slope", slope);
    out.push_metric("slope_bound", bound);
    out.assertions.push(Assertion::new(
        "rate-slope-below-bound",
        slope <= bound,
        format!("fitted slope {slope:.3}, theoretical bound {bound:.3}"),
    ));
    Ok(out)
}

/// Monte Carlo consistency of the noise-level estimator across grid sizes.
pub fn estimate_sigma2(
    model: &AlphaModel,
    truth: f64,
    ns: &[usize],
    replications: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let rows = estimation::consistency_sweep(
        model,
        truth,
        ns,
        replications,
        EstimatorKind::Sigma2,
        seed,
    )?;
    let mut out = ExperimentOutcome::new(ExperimentKind::EstimateSigma2);
    for row in &rows {
        push_estimator_row(&mut out, row);
    }
    let last = rows.last().unwrap();
    let rel = (last.estimate_mean - truth).abs() / truth;
    out.push_metric("final_estimate_mean", last.estimate_mean);
    out.push_metric("final_rel_error_mean", last.rel_error_mean);
    out.assertions.push(Assertion::new(
        "final-mean-within-3pct",
        rel <= 0.03,
        format!(
            "mean estimate {:.5} at n = {} vs truth {}: off by {:.2}%",
            last.estimate_mean,
            last.n,
            truth,
            100.0 * rel
        ),
    ));
    if rows.len() >= 2 {
        let inversions = rows
            .windows(2)
            .filter(|w| w[1].rel_error_mean > w[0].rel_error_mean)
            .count();
        out.assertions.push(Assertion::new(
            "error-shrinks-with-n",
            inversions <= 1,
            format!("{inversions} upward steps in rel_error_mean across {} sizes", rows.len()),
        ));
    }
    Ok(out)
}

/// Monte Carlo accuracy of the drift estimator on solver paths with the
/// configured diffusion coefficient, which must have a positive floor.
pub fn estimate_mu(
    config: &SolverConfig,
    t1: f64,
    t2: f64,
    n: usize,
    replications: usize,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    check_replications(replications)?;
    if config.sigma.positive_floor().is_none() {
        return Err(Error::Config(
            "sigma: the drift estimator needs a coefficient with a positive \
             floor; use a constant level > 0 or the bounded-smooth preset"
                .into(),
        ));
    }
    let grid = TimeGrid::new(t1, t2, n)?;
    let model = config.model;
    let estimates: Vec<f64> = rng::replicate(config.seed, replications, |i, _| {
        let mut cfg = config.clone();
        cfg.seed = rng::derive_seed(config.seed, i as u64);
        let bundle = solver::solve_path(&cfg, &grid, &[0.0])?;
        estimation::estimate_mu(&model, &grid, &bundle.paths[0].values, &bundle.sigma_sq[0][..n])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let row = EstimatorResult::summarize(EstimatorKind::Mu, &model, config.mu, n, &estimates);

    let mut out = ExperimentOutcome::new(ExperimentKind::EstimateMu);
    push_estimator_row(&mut out, &row);
    let rel = (row.estimate_mean - config.mu).abs() / config.mu;
    let tol = match config.sigma {
        Sigma::Constant { .. } => 0.10,
        _ => 0.15,
    };
    out.push_metric("estimate_mean", row.estimate_mean);
    out.push_metric("rel_error_of_mean", rel);
    out.assertions.push(Assertion::new(
        &format!("ensemble-mean-within-{}pct", (100.0 * tol) as u32),
        rel <= tol,
        format!(
            "mean estimate {:.5} vs truth {}: off by {:.2}%",
            row.estimate_mean,
            config.mu,
            100.0 * rel
        ),
    ));
    Ok(out)
}

fn push_estimator_row(out: &mut ExperimentOutcome, row: &EstimatorResult) {
    out.csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        row.estimator,
        row.alpha,
        row.truth,
        row.n,
        row.replications,
        row.estimate_mean,
        row.rel_error_mean,
        row.rel_error_sd
    ));
}

/// Regularity fingerprint of the solver field: fitted log-moment slopes in
/// time and space against the theoretical exponents for additive noise.
pub fn holder_check(config: &SolverConfig, replications: usize, p: u32) -> Result<ExperimentOutcome> {
    let (time_slope, space_slope) = solver::empirical_holder_check(config, replications, p)?;
    let alpha = config.model.alpha;
    let pf = p as f64;
    let time_target = pf * (alpha - 1.0) / (2.0 * alpha);
    let space_target = pf * (alpha - 1.0) / 2.0;
    let tol = 0.05 * pf;

    let mut out = ExperimentOutcome::new(ExperimentKind::HolderCheck);
    for (axis, slope, target) in
        [("time", time_slope, time_target), ("space", space_slope, space_target)]
    {
        let passed = (slope - target).abs() <= tol;
        out.csv.push_str(&format!("{alpha},{p},{axis},{slope},{target},{tol},{passed}\n"));
        out.push_metric(format!("{axis}_slope"), slope);
        out.assertions.push(Assertion::new(
            &format!("{axis}-slope-near-target"),
            passed,
            format!("fitted {slope:.4}, expected {target:.4} within {tol:.2}"),
        ));
    }
    Ok(out)
}
