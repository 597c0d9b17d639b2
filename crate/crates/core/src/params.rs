//! Problem parameters `(N, alpha, s)` and the exponents derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{DelabError, Result};

/// Validated `(N, alpha, s)` for
/// `-div(|x_N|^{2 alpha} grad u) = K |x_N|^{alpha p - s} |u|^{p-2} u`, `p = 2*(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    n: usize,
    alpha: f64,
    s: f64,
}

/// Exponents derived from [`ProblemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    /// Critical exponent `2*(s) = 2(N - s)/(N - 2)`.
    pub pstar: f64,
    /// Gradient weight exponent `2 alpha`.
    pub weight_a: f64,
    /// Nonlinearity weight exponent `alpha 2*(s) - s`.
    pub weight_b: f64,
    /// Decay / Kelvin exponent `N - 2 + 2 alpha`.
    pub decay_d: f64,
    /// Hardy coefficient `-alpha (alpha - 1)` after the substitution `v = x_N^alpha u`.
    pub hardy_lambda: f64,
    /// Radial-reduction exponent `(2 alpha - 1)/floor(2 alpha)`.
    pub tau: f64,
    /// Dimension of the reduced radial problem, `floor(2 alpha) + 2`.
    pub k_dim: usize,
    /// `alpha 2*(s) - s - 2 alpha`.
    pub beta: f64,
    /// Weight exponent of the reduced problem, `(beta - 2(tau - 1))/tau`.
    pub sigma_exp: f64,
}

impl ProblemParams {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn exponents(&self) -> DerivedExponents {
        derive_exponents(self)
    }

    /// Re-check for operations whose underlying result needs `s < 2`.
    pub fn require_subcritical(&self) -> Result<()> {
        if self.s < 2.0 {
            Ok(())
        } else {
            Err(DelabError::SOutOfRange(self.s))
        }
    }

    /// True for `alpha = 1`, `s = 1 + 2/N`, where the ground state is known in closed form.
    pub fn is_explicit_regime(&self) -> bool {
        (self.alpha - 1.0).abs() <= 1e-6 && (self.s - (1.0 + 2.0 / self.n as f64)).abs() <= 1e-6
    }

    pub fn require_explicit_regime(&self) -> Result<()> {
        if self.is_explicit_regime() {
            Ok(())
        } else {
            Err(DelabError::NotInExplicitRegime { alpha: self.alpha, s: self.s })
        }
    }

    /// Default regime: `N = 3`, `alpha = 1`, `s = 5/3`.
    pub fn explicit(n: usize) -> Result<Self> {
        validate_params(n, 1.0, 1.0 + 2.0 / n as f64)
    }
}

pub fn validate_params(n: usize, alpha: f64, s: f64) -> Result<ProblemParams> {
    if n < 3 {
        return Err(DelabError::DimensionTooSmall(n));
    }
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(DelabError::AlphaOutOfRange(alpha));
    }
    if !(0.0..=2.0).contains(&s) {
        return Err(DelabError::SOutOfRange(s));
    }
    Ok(ProblemParams { n, alpha, s })
}

pub fn derive_exponents(p: &ProblemParams) -> DerivedExponents {
    let n = p.n as f64;
    let alpha = p.alpha;
    let pstar = 2.0 * (n - p.s) / (n - 2.0);
    let weight_b = alpha * pstar - p.s;
    let floor2a = (2.0 * alpha).floor();
    let tau = (2.0 * alpha - 1.0) / floor2a;
    let beta = weight_b - 2.0 * alpha;
    DerivedExponents {
        pstar,
        weight_a: 2.0 * alpha,
        weight_b,
        decay_d: n - 2.0 + 2.0 * alpha,
        hardy_lambda: -alpha * (alpha - 1.0),
        tau,
        k_dim: floor2a as usize + 2,
        beta,
        sigma_exp: (beta - 2.0 * (tau - 1.0)) / tau,
    }
}
