//! Cross-checks of the closed-form covariance layer against independent
//! references: kernel quadrature for the variance diagonal, dense eigenvalue
//! decompositions for positive semidefiniteness, and randomized identities.

use fsheat::covariance::{
    cov_diagonal_quadrature, cov_linear, increment_cross, increment_variance_exact,
    pair_second_moment, qv_limit_linear,
};
use fsheat::grid::TimeGrid;
use fsheat::kernel::KernelEvaluator;
use fsheat::AlphaModel;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// The closed form for Var u(t, x) must agree with a double quadrature of the
/// squared kernel (space integral through the evaluator, time integral in the
/// substituted variable). The quadrature shares nothing with the closed form
/// beyond the kernel itself.
#[test]
fn variance_diagonal_matches_double_quadrature() {
    for &alpha in &[1.25, 1.5, 1.75, 2.0] {
        let model = AlphaModel::new(alpha).unwrap();
        let eval = KernelEvaluator::new(model);
        for &t in &[0.5, 1.0, 2.0] {
            let closed = cov_linear(&model, t, t).unwrap();
            let quad = cov_diagonal_quadrature(&eval, t).unwrap();
            let err = rel(quad, closed);
            assert!(
                err <= 1e-4,
                "alpha = {alpha}, t = {t}: quadrature {quad} vs closed form {closed} (rel {err:.2e})"
            );
        }
    }
}

/// The covariance function must define a valid Gaussian process: every
/// finite-dimensional covariance matrix is positive semidefinite up to
/// symmetric-eigensolver noise.
#[test]
fn covariance_matrices_are_positive_semidefinite() {
    let cases = [
        (1.25, 0.0, 1.0, 256usize),
        (1.5, 0.5, 2.0, 200),
        (1.75, 0.0, 1.0, 128),
        (2.0, 1.0, 3.0, 100),
    ];
    for &(alpha, t1, t2, n) in &cases {
        let model = AlphaModel::new(alpha).unwrap();
        let grid = TimeGrid::new(t1, t2, n).unwrap();
        let pts = grid.points();
        let m = DMatrix::from_fn(n + 1, n + 1, |i, j| {
            cov_linear(&model, pts[i], pts[j]).unwrap()
        });
        let eigenvalues = m.symmetric_eigen().eigenvalues;
        let lam_max = eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lam_min = eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(
            lam_min >= -1e-10 * lam_max,
            "alpha = {alpha}, [{t1}, {t2}], n = {n}: eigenvalues in [{lam_min:.3e}, {lam_max:.3e}]"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Symmetry of the closed form is bit-exact because both t + s and
    /// |t - s| are symmetric float expressions.
    #[test]
    fn covariance_is_bit_exact_symmetric(
        alpha in 1.01f64..=2.0,
        t in 1e-3f64..10.0,
        s in 1e-3f64..10.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let a = cov_linear(&model, t, s).unwrap();
        let b = cov_linear(&model, s, t).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    /// For fixed t the covariance s -> cov(t, s) increases on [0, t].
    #[test]
    fn covariance_grows_toward_the_diagonal(
        alpha in 1.01f64..=2.0,
        t in 0.1f64..10.0,
        f1 in 0.01f64..=1.0,
        f2 in 0.01f64..=1.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let a = cov_linear(&model, t, t * lo).unwrap();
        let b = cov_linear(&model, t, t * hi).unwrap();
        prop_assert!(a <= b, "cov(t, {}) = {a} > cov(t, {}) = {b}", t * lo, t * hi);
    }

    /// The increment variance sits strictly between zero and its stationary
    /// limit; the upper bound is midpoint concavity of x^beta in disguise.
    #[test]
    fn increment_variance_stays_below_stationary_limit(
        alpha in 1.05f64..=2.0,
        t in 0.1f64..10.0,
        frac in 1e-4f64..=1.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let delta = t * frac;
        let v2 = increment_variance_exact(&model, t, delta).unwrap();
        let limit = model.c_qv * delta.powf(model.beta);
        prop_assert!(v2 > 0.0, "variance {v2} not positive");
        prop_assert!(v2 < limit, "variance {v2} exceeds stationary limit {limit}");
    }

    /// The narrow-gap branch of the cross moment must agree with the plain
    /// second difference of covariances it was compressed from.
    #[test]
    fn cross_moment_matches_covariance_difference(
        alpha in 1.01f64..=2.0,
        t in 0.1f64..10.0,
        sfrac in 0.01f64..=0.99,
        dfrac in 0.01f64..=1.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let s = t * sfrac;
        let delta = (t - s) * dfrac;
        let compact = increment_cross(&model, t, s, delta).unwrap();
        let spelled = cov_linear(&model, t + delta, s + delta).unwrap()
            - cov_linear(&model, t + delta, s).unwrap()
            - cov_linear(&model, t, s + delta).unwrap()
            + cov_linear(&model, t, s).unwrap();
        let scale = cov_linear(&model, t + delta, t + delta).unwrap().max(1.0);
        prop_assert!(
            (compact - spelled).abs() <= 1e-11 * scale,
            "compact {compact} vs spelled {spelled} at scale {scale}"
        );
    }

    /// Cauchy-Schwarz for increments, through the public pair moment:
    /// E[X^2 Y^2] >= Var X Var Y exactly when the cross term is real.
    #[test]
    fn pair_moment_dominates_product_of_variances(
        alpha in 1.01f64..=2.0,
        t in 0.1f64..10.0,
        sfrac in 0.01f64..=0.99,
        dfrac in 0.01f64..=1.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let s = t * sfrac;
        let delta = (t - s) * dfrac;
        let joint = pair_second_moment(&model, t, s, delta).unwrap();
        let vt = increment_variance_exact(&model, t, delta).unwrap();
        let vs = increment_variance_exact(&model, s, delta).unwrap();
        prop_assert!(joint >= vt * vs * (1.0 - 1e-12));
        let cross = increment_cross(&model, t, s, delta).unwrap();
        prop_assert!(cross * cross <= vt * vs * (1.0 + 1e-9));
    }

    /// The quadratic variation limit depends on the window only through its
    /// span.
    #[test]
    fn qv_limit_is_translation_invariant(
        alpha in 1.01f64..=2.0,
        span in 0.1f64..10.0,
        shift in 0.0f64..5.0,
    ) {
        let model = AlphaModel::new(alpha).unwrap();
        let base = qv_limit_linear(&model, &TimeGrid::new(0.0, span, 16).unwrap());
        let moved = qv_limit_linear(&model, &TimeGrid::new(shift, shift + span, 16).unwrap());
        prop_assert!((base - moved).abs() <= 1e-12 * base.abs());
    }
}
