//! Stability-index parameter pack shared by every module.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::gamma::gamma;
use crate::{Error, Result};

/// Derived constants of the stability index `alpha`.
///
/// All second-moment formulas for the linear solution and all variation
/// limits are expressed through these five numbers, so they are computed
/// once and carried together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaModel {
    /// Stability index, in (1, 2]. `alpha = 2` is the Gaussian endpoint,
    /// admitted for cross-checks against the classical heat kernel.
    pub alpha: f64,
    /// `(alpha - 1) / alpha`: growth exponent of the stationary variance and
    /// of the increment variance in the step size.
    pub beta: f64,
    /// `Gamma(1/alpha) / (2^{1/alpha} pi (alpha - 1))`: variance scale of the
    /// linear solution, `E u0^2(t, x) = c_var t^beta`.
    pub c_var: f64,
    /// `Gamma(1/alpha) / (pi (alpha - 1))`: quadratic-variation limit scale.
    pub c_qv: f64,
    /// `2 alpha / (3 alpha - 1)`: exponent of the increment-localization
    /// window `t(delta) = t - delta^kappa` used in the nonlinear analysis.
    pub kappa: f64,
}

impl AlphaModel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (1, 2], got {alpha}"
            )));
        }
        let c_qv = gamma(1.0 / alpha) / (PI * (alpha - 1.0));
        // c_var is defined as c_qv * 2^{-1/alpha}; deriving it from c_qv
        // keeps the ratio identity exact to rounding.
        let c_var = c_qv * 0.5_f64.powf(1.0 / alpha);
        Ok(AlphaModel {
            alpha,
            beta: (alpha - 1.0) / alpha,
            c_var,
            c_qv,
            kappa: 2.0 * alpha / (3.0 * alpha - 1.0),
        })
    }
}
