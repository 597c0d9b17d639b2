//! Closed-form solutions and their exact derivatives.
//!
//! In the regime `alpha = 1`, `s = 1 + 2/N` the positive entire solutions are
//! the dilations and tangential translations of
//! `U(x', x_N) = (2N / ((1 + |x_N|)^2 + |x'|^2))^{N/2}`.
//! For every `(N, alpha)` the powers `|x|^{-l}` satisfy
//! `div(|x_N|^{2 alpha} grad |x|^{-l}) = l (l + 2 - N - 2 alpha) |x_N|^{2 alpha} |x|^{-l-2}`.

use crate::error::{DelabError, Result};
use crate::field::{dot, norm_sq, AnalyticField, Domain};
use crate::params::ProblemParams;

/// Dilation `lam` and tangential translation `zeta` of an entire solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParameters {
    pub lam: f64,
    pub zeta: Vec<f64>,
}

impl FamilyParameters {
    pub fn new(lam: f64, zeta: Vec<f64>) -> Result<Self> {
        if !(lam > 0.0) {
            return Err(DelabError::NonpositiveDilation(lam));
        }
        Ok(FamilyParameters { lam, zeta })
    }

    pub fn identity(n: usize) -> Self {
        FamilyParameters { lam: 1.0, zeta: vec![0.0; n - 1] }
    }

    /// Parameters of `family_transform(family_transform(u, self), other)`.
    pub fn then(&self, other: &FamilyParameters) -> FamilyParameters {
        FamilyParameters {
            lam: self.lam * other.lam,
            zeta: self.zeta.iter().zip(&other.zeta).map(|(z, w)| self.lam * w + z).collect(),
        }
    }
}

fn explicit_value(n: usize, x: &[f64]) -> f64 {
    let xn = x[n - 1].abs();
    let denom = (1.0 + xn).powi(2) + norm_sq(&x[..n - 1]);
    (2.0 * n as f64 / denom).powf(n as f64 / 2.0)
}

fn explicit_gradient(n: usize, x: &[f64]) -> Vec<f64> {
    let xn = x[n - 1];
    let denom = (1.0 + xn.abs()).powi(2) + norm_sq(&x[..n - 1]);
    let u = (2.0 * n as f64 / denom).powf(n as f64 / 2.0);
    let factor = -(n as f64) * u / denom;
    let mut g: Vec<f64> = x[..n - 1].iter().map(|&xi| factor * xi).collect();
    // |x_N| has no derivative on the hyperplane
    g.push(if xn == 0.0 { f64::NAN } else { factor * (1.0 + xn.abs()) * xn.signum() });
    g
}

/// The explicit ground state `U`.
#[allow(non_snake_case)]
pub fn explicit_U(p: &ProblemParams) -> Result<AnalyticField> {
    p.require_explicit_regime()?;
    let n = p.n();
    Ok(AnalyticField::new(*p, Domain::FullSpace, move |x| explicit_value(n, x))
        .with_gradient(move |x| explicit_gradient(n, x)))
}

/// `lam^{d/2} u(lam x' + zeta, lam x_N)` with `d = N - 2 + 2 alpha`.
pub fn family_transform(u: &AnalyticField, fp: &FamilyParameters) -> Result<AnalyticField> {
    let p = *u.params();
    let n = p.n();
    if !(fp.lam > 0.0) {
        return Err(DelabError::NonpositiveDilation(fp.lam));
    }
    if fp.zeta.len() != n - 1 {
        return Err(DelabError::DomainMismatch(format!(
            "translation has {} components, expected {}",
            fp.zeta.len(),
            n - 1
        )));
    }
    let lam = fp.lam;
    let amp = lam.powf(p.exponents().decay_d / 2.0);
    let zeta = fp.zeta.clone();
    let map = move |x: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| lam * v).collect();
        for (yi, z) in y.iter_mut().zip(&zeta) {
            *yi += z;
        }
        y
    };
    let f = u.value_fn();
    let map_v = map.clone();
    let out = AnalyticField::new(p, u.domain(), move |x| amp * f(&map_v(x)));
    Ok(match u.gradient_fn() {
        Some(g) => out.with_gradient(move |x| g(&map(x)).into_iter().map(|v| amp * lam * v).collect()),
        None => out,
    })
}

/// A member `lam^{N/2} U(lam x' + zeta, lam x_N)` of the explicit family.
pub fn family_member(p: &ProblemParams, fp: &FamilyParameters) -> Result<AnalyticField> {
    family_transform(&explicit_U(p)?, fp)
}

/// Boundary trace `u0 (1 + lam^2 |x' - x0|^2)^{-(N-2+2alpha)/2}` as a field of `x'`.
pub fn trace_profile(p: &ProblemParams, u0: f64, lam: f64, x0: &[f64]) -> Result<AnalyticField> {
    if !(u0 > 0.0) {
        return Err(DelabError::NonpositiveAmplitude(u0));
    }
    if !(lam > 0.0) {
        return Err(DelabError::NonpositiveDilation(lam));
    }
    if x0.len() != p.n() - 1 {
        return Err(DelabError::DomainMismatch(format!("x0 must have {} components", p.n() - 1)));
    }
    let half_d = p.exponents().decay_d / 2.0;
    let x0 = x0.to_vec();
    Ok(AnalyticField::new(*p, Domain::Hyperplane, move |x| {
        let r2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
        u0 * (1.0 + lam * lam * r2).powf(-half_d)
    }))
}

/// `c(l) = l (l + 2 - N - 2 alpha) = l (l - d)`.
pub fn power_divergence_coefficient(p: &ProblemParams, l: f64) -> f64 {
    l * (l - p.exponents().decay_d)
}

/// `|x|^{-l}` on the punctured space.
pub fn power_solution(p: &ProblemParams, l: f64) -> AnalyticField {
    AnalyticField::new(*p, Domain::PuncturedAtOrigin, move |x| norm_sq(x).powf(-l / 2.0))
        .with_gradient(move |x| {
            let r2 = norm_sq(x);
            let c = -l * r2.powf(-l / 2.0 - 1.0);
            x.iter().map(|v| c * v).collect()
        })
}

/// `V_1..V_N`: derivatives of the explicit family in `zeta_i` and in `lam` at the identity.
pub fn linearized_kernel(p: &ProblemParams) -> Result<Vec<AnalyticField>> {
    p.require_explicit_regime()?;
    let n = p.n();
    let mut out: Vec<AnalyticField> = (0..n - 1)
        .map(|i| {
            AnalyticField::new(*p, Domain::FullSpace, move |x| explicit_gradient(n, x)[i])
        })
        .collect();
    out.push(AnalyticField::new(*p, Domain::FullSpace, move |x| {
        let u = explicit_value(n, x);
        let xn = x[n - 1];
        let denom = (1.0 + xn.abs()).powi(2) + norm_sq(&x[..n - 1]);
        // x . grad U, with x_N d_N U = factor (1 + |x_N|) |x_N| continuous across x_N = 0
        let factor = -(n as f64) * u / denom;
        let x_grad = factor * (norm_sq(&x[..n - 1]) + (1.0 + xn.abs()) * xn.abs());
        0.5 * n as f64 * u + x_grad
    }));
    Ok(out)
}

/// `d/dr` of `u` along `x'`: `(x' . grad_{x'} u) / |x'|`.
pub fn radial_derivative(u: &AnalyticField, x: &[f64]) -> Option<f64> {
    let n = x.len();
    let g = u.gradient(x)?;
    let r = norm_sq(&x[..n - 1]).sqrt();
    Some(dot(&x[..n - 1], &g[..n - 1]) / r)
}
