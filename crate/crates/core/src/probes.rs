//! Numerical probes of qualitative properties of positive solutions:
//! Harnack ratios, the maximum principle, isolated singularities, decay,
//! gradient growth near the hyperplane, and the inversion radius.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DelabError, Result};
use crate::field::{norm, AnalyticField};
use crate::params::ProblemParams;
use crate::quadrature::{spherical_mean, SphereQuadrature};
use crate::wgrid::GridField;

/// Vertex lattice points per axis used for ball sampling.
pub const HARNACK_LATTICE: usize = 65;

fn sup_inf<I: Iterator<Item = f64>>(values: I) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        if !(v > 0.0) {
            return Err(DelabError::NonpositiveField(v));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return Err(DelabError::NonpositiveField(lo));
    }
    Ok(hi / lo)
}

/// `sup / inf` of `u` over the closed ball of radius `radius` about the origin.
pub fn harnack_ratio(u: &AnalyticField, radius: f64, _p: &ProblemParams) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(DelabError::NonpositiveRadius(radius));
    }
    let n = u.dim();
    let m = HARNACK_LATTICE;
    let step = 2.0 * radius / (m - 1) as f64;
    let total = m.pow(n as u32);
    let pts = (0..total).filter_map(|mut idx| {
        let mut x = vec![0.0; n];
        for c in x.iter_mut().rev() {
            *c = -radius + (idx % m) as f64 * step;
            idx /= m;
        }
        (norm(&x) <= radius * (1.0 + 1e-12)).then_some(x)
    });
    sup_inf(pts.map(|x| u.eval(&x)))
}

/// Grid version over cell centres inside the ball.
pub fn harnack_ratio_grid(u: &GridField, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(DelabError::NonpositiveRadius(radius));
    }
    let spec = u.spec;
    sup_inf((0..spec.len()).filter(|&i| norm(&spec.center_of(i)) <= radius).map(|i| u.values[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub pass: bool,
    /// `interior min - boundary min`.
    pub margin: f64,
    pub boundary_min: f64,
    pub interior_min: f64,
    pub boundary_constant: bool,
}

/// Compares the interior minimum of a field with its minimum on the outer cell layer.
pub fn boundary_min_probe(u: &GridField) -> MaxPrincipleReport {
    let spec = u.spec;
    let ring = spec.ring_mask();
    let (mut bmin, mut bmax, mut imin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for (v, &r) in u.values.iter().zip(&ring) {
        if r {
            bmin = bmin.min(*v);
            bmax = bmax.max(*v);
        } else {
            imin = imin.min(*v);
        }
    }
    let scale = bmax.abs().max(bmin.abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-8 * scale;
    let margin = imin - bmin;
    let boundary_constant = bmax - bmin <= tol;
    let pass = if boundary_constant { margin >= -tol } else { margin > tol };
    MaxPrincipleReport { pass, margin, boundary_min: bmin, interior_min: imin, boundary_constant }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityFit {
    /// Coefficient of `|x|^{-d}`.
    pub c_hat: f64,
    /// Regular part at the origin.
    pub b0_hat: f64,
    /// RMS misfit relative to the largest spherical mean.
    pub residual: f64,
    /// Set when the two-term model does not explain the means.
    pub misfit: bool,
}

pub const SINGULARITY_MISFIT_TOL: f64 = 1e-6;

fn sphere_means(u: &AnalyticField, radii: &[f64], degree: usize) -> Result<Vec<f64>> {
    if u.dim() != 3 {
        return Err(DelabError::UnsupportedDimension("spherical means are built for N = 3".into()));
    }
    radii
        .iter()
        .map(|&r| spherical_mean(|x| u.eval(x), &SphereQuadrature::new(r, degree)?))
        .collect()
}

/// Least squares of spherical means against `{r^{-d}, 1}`.
pub fn singularity_fit(u: &AnalyticField, radii: &[f64], p: &ProblemParams) -> Result<SingularityFit> {
    let d = p.exponents().decay_d;
    let means = sphere_means(u, radii, 8)?;
    let m = radii.len();
    let mut a = DMatrix::zeros(m, 2);
    for (i, &r) in radii.iter().enumerate() {
        a[(i, 0)] = r.powf(-d);
        a[(i, 1)] = 1.0;
    }
    let scales: Vec<f64> = (0..2).map(|c| a.column(c).norm()).collect();
    if m < 2 || scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(DelabError::IllConditionedFit(format!("{m} radii")));
    }
    for c in 0..2 {
        a.column_mut(c).unscale_mut(scales[c]);
    }
    let svd = a.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-12 * smax) {
        return Err(DelabError::IllConditionedFit(format!("condition number {:e}", smax / smin)));
    }
    let y = DVector::from_vec(means.clone());
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| DelabError::IllConditionedFit(e.to_string()))?;
    let c_hat = coef[0] / scales[0];
    let b0_hat = coef[1] / scales[1];
    let fitted = &a * &coef;
    let scale = means.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = ((&fitted - &y).norm_squared() / m as f64).sqrt() / scale;
    Ok(SingularityFit { c_hat, b0_hat, residual, misfit: residual > SINGULARITY_MISFIT_TOL })
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Log-log slope of spherical means over `radii`.
pub fn decay_exponent(u: &AnalyticField, radii: &[f64]) -> Result<f64> {
    if radii.len() < 2 {
        return Err(DelabError::IllConditionedFit("need at least two radii".into()));
    }
    let means = sphere_means(u, radii, 8)?;
    if let Some(m) = means.iter().find(|m| !(**m > 0.0)) {
        return Err(DelabError::NonpositiveSamples(*m));
    }
    Ok(loglog_slope(radii, &means))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    /// Fitted exponent `e` in `max |du/dx_N| ~ t^e`.
    pub exponent: f64,
    pub maxima: Vec<f64>,
    /// `exponent < -1 - 0.1`.
    pub violation: bool,
}

/// Growth of `max_{|x'| <= 1/2} |du/dx_N (x', t)|` as `t -> 0+`.
pub fn gradient_bound_probe(u: &AnalyticField, ts: &[f64]) -> Result<GradientBoundReport> {
    let n = u.dim();
    if n != 3 {
        return Err(DelabError::UnsupportedDimension("disk sampling is built for N = 3".into()));
    }
    let mut disk = vec![[0.0, 0.0]];
    for ri in 1..=8 {
        let r = 0.5 * ri as f64 / 8.0;
        for a in 0..16 {
            let th = std::f64::consts::PI * a as f64 / 8.0;
            disk.push([r * th.cos(), r * th.sin()]);
        }
    }
    let maxima: Vec<f64> = ts
        .iter()
        .map(|&t| {
            disk.iter()
                .map(|q| {
                    let x = [q[0], q[1], t];
                    let g = match u.gradient(&x) {
                        Some(g) => g[2],
                        None => {
                            let h = 1e-4 * t;
                            (u.eval(&[q[0], q[1], t + h]) - u.eval(&[q[0], q[1], t - h])) / (2.0 * h)
                        }
                    };
                    g.abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts.iter().zip(&maxima).filter(|(_, m)| **m > 0.0).map(|(t, m)| (*t, *m)).unzip();
    let exponent = if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { 0.0 };
    Ok(GradientBoundReport { exponent, violation: exponent < -1.1, maxima })
}

/// `(u(0) / u(b, 0))^{1/d}`.
pub fn inversion_radius_estimate(u: &AnalyticField, b: &[f64], p: &ProblemParams) -> Result<f64> {
    let n = u.dim();
    let mut xb = b.to_vec();
    xb.resize(n, 0.0);
    let ub = u.eval(&xb);
    if !(ub > 0.0) {
        return Err(DelabError::NonpositiveValue(ub));
    }
    Ok((u.eval(&vec![0.0; n]) / ub).powf(1.0 / p.exponents().decay_d))
}
