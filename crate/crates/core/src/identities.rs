//! Pohozaev-type identity on balls `B_sigma(0)` and the Kazdan–Warner
//! obstructions for `-div(|x_N|^{2a} grad u) = K |x_N|^b |u|^{p-2} u`.
//!
//! For a solution and `0 < sigma`:
//! ```text
//! (1/p) ∫_{B_σ} (x·∇K)|x_N|^b|u|^p - (1/p) ∫_{∂B_σ} (x·n) K |x_N|^b|u|^p = ∫_{∂B_σ} B
//! B = (d/2)|x_N|^{2a} u ∂_n u - (σ/2)|x_N|^{2a}|∇u|^2 + σ|x_N|^{2a}(∂_n u)^2,   d = N-2+2a
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{DelabError, Result};
use crate::field::{dot, norm, AnalyticField};
use crate::params::ProblemParams;
use crate::quadrature::{sphere_integral, SphereQuadrature};
use crate::wgrid::{power_integral, GridField, GridSpec};

/// Default sphere rule degree for the identity checks.
pub const DEFAULT_SPHERE_DEGREE: usize = 8;
/// Default cells per axis of the volume quadrature.
pub const DEFAULT_VOLUME_CELLS: usize = 64;

/// Integrand of the boundary term at `x` with `|x| = sigma`.
pub fn boundary_density_b(u: &AnalyticField, x: &[f64], sigma: f64, p: &ProblemParams) -> Result<f64> {
    let r = norm(x);
    if (r - sigma).abs() > 1e-9 * sigma {
        return Err(DelabError::PointNotOnSphere { norm: r, sigma });
    }
    let grad = u
        .gradient(x)
        .ok_or_else(|| DelabError::DomainMismatch("boundary density needs an exact gradient".into()))?;
    Ok(density_from_gradient(u.eval(x), &grad, x, sigma, p))
}

fn density_from_gradient(u: f64, grad: &[f64], x: &[f64], sigma: f64, p: &ProblemParams) -> f64 {
    let e = p.exponents();
    let w = x[x.len() - 1].abs().powf(e.weight_a);
    let r = norm(x);
    let dn = dot(x, grad) / r;
    let g2 = dot(grad, grad);
    w * (0.5 * e.decay_d * u * dn - 0.5 * sigma * g2 + sigma * dn * dn)
}

/// `∫_{∂B_σ} B` over the rule's sphere.
pub fn boundary_b_integral(u: &AnalyticField, q: &SphereQuadrature, p: &ProblemParams) -> Result<f64> {
    let sigma = q.sigma;
    let err = std::sync::OnceLock::new();
    let v = sphere_integral(
        |x| match boundary_density_b(u, x, sigma, p) {
            Ok(b) => b,
            Err(e) => {
                let _ = err.set(e);
                0.0
            }
        },
        q,
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Sphere integral of `B` for a gridded field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBoundaryReport {
    /// Sum over the nodes outside the band `|x_N| <= 2h`.
    pub integral: f64,
    /// `(band area) * max |B|` over the retained nodes.
    pub band_bound: f64,
    pub excluded_nodes: usize,
}

/// Finite-difference version of [`boundary_b_integral`] for grid samples:
/// values by trilinear interpolation, gradients by centred differences of step
/// `h` (one-sided where a centred stencil would leave the grid).
pub fn grid_boundary_b_integral(
    u: &GridField,
    sigma: f64,
    p: &ProblemParams,
    sphere_degree: usize,
) -> Result<GridBoundaryReport> {
    let q = SphereQuadrature::new(sigma, sphere_degree)?;
    let h = u.spec.spacing().iter().cloned().fold(0.0, f64::max);
    let band = 2.0 * h;
    let value = |x: &[f64]| u.interpolate(x);
    let mut integral = 0.0;
    let mut bmax = 0.0f64;
    let mut excluded_nodes = 0;
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        if x[2].abs() <= band {
            excluded_nodes += 1;
            continue;
        }
        let u0 = value(x).ok_or_else(|| DelabError::OutsideDomain(x.to_vec()))?;
        let mut grad = [0.0; 3];
        for i in 0..3 {
            let mut xp = *x;
            xp[i] += h;
            let mut xm = *x;
            xm[i] -= h;
            grad[i] = match (value(&xp), value(&xm)) {
                (Some(a), Some(b)) => (a - b) / (2.0 * h),
                (Some(a), None) => (a - u0) / h,
                (None, Some(b)) => (u0 - b) / h,
                (None, None) => return Err(DelabError::OutsideDomain(x.to_vec())),
            };
        }
        let b = density_from_gradient(u0, &grad, x, sigma, p);
        if !b.is_finite() {
            return Err(DelabError::NonFiniteSample(excluded_nodes));
        }
        bmax = bmax.max(b.abs());
        integral += w * b;
    }
    // area of the band |x_N| <= 2h on the sphere of radius sigma
    let band_area = 2.0 * std::f64::consts::PI * sigma * 2.0 * band.min(sigma);
    Ok(GridBoundaryReport { integral, band_bound: band_area * bmax, excluded_nodes })
}

/// Tensor midpoint rule over `[-R, R]^3` with the `|x_N|^b` weight
/// integrated exactly across each cell.
#[derive(Debug, Clone, Copy)]
pub struct VolumeQuadrature {
    pub spec: GridSpec,
}

impl VolumeQuadrature {
    pub fn new(cells: usize, half_width: f64) -> Result<Self> {
        Ok(VolumeQuadrature { spec: GridSpec::cube(cells, half_width)? })
    }

    /// `∫ f(x) |x_N|^b dx` over the cells accepted by `keep` (tested at the centre).
    pub fn integrate<F, K>(&self, b: f64, f: F, keep: K) -> f64
    where
        F: Fn(&[f64; 3]) -> f64 + Sync,
        K: Fn(&[f64; 3]) -> bool + Sync,
    {
        let spec = self.spec;
        let [hx, hy, hz] = spec.spacing();
        let zw: Vec<f64> = (0..spec.dims[2])
            .map(|k| {
                let z = spec.coord(2, k);
                hx * hy * power_integral(z - 0.5 * hz, z + 0.5 * hz, b)
            })
            .collect();
        crate::krylov::det_sum(spec.len(), |idx| {
            let c = spec.center_of(idx);
            if keep(&c) {
                zw[idx % spec.dims[2]] * f(&c)
            } else {
                0.0
            }
        })
    }
}

/// The three terms of the ball identity and their balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub sigma: f64,
    /// `(1/p) ∫_{B_σ} (x·∇K)|x_N|^b|u|^p`.
    pub volume_term: f64,
    /// `(1/p) ∫_{∂B_σ} (x·n) K |x_N|^b |u|^p`.
    pub boundary_k_term: f64,
    /// `∫_{∂B_σ} B`.
    pub boundary_b_term: f64,
    /// `volume_term - boundary_k_term - boundary_b_term`.
    pub residual: f64,
}

impl PohozaevReport {
    pub fn scale(&self) -> f64 {
        self.volume_term.abs().max(self.boundary_k_term.abs()).max(self.boundary_b_term.abs())
    }
}

pub fn pohozaev_check(
    u: &AnalyticField,
    k: &AnalyticField,
    sigma: f64,
    p: &ProblemParams,
    sphere_degree: usize,
    volume_cells: usize,
) -> Result<PohozaevReport> {
    if p.n() != 3 {
        return Err(DelabError::UnsupportedDimension("sphere and volume rules are built for N = 3".into()));
    }
    if !(sigma > 0.0) {
        return Err(DelabError::NonpositiveRadius(sigma));
    }
    let e = p.exponents();
    let q = SphereQuadrature::new(sigma, sphere_degree)?;
    let vq = VolumeQuadrature::new(volume_cells, sigma)?;
    let k_grad = k
        .gradient_fn()
        .ok_or_else(|| DelabError::DomainMismatch("K needs an exact gradient".into()))?;
    let pstar = e.pstar;
    let volume_term = vq.integrate(
        e.weight_b,
        |c| dot(c, &k_grad(c)) * u.eval(c).abs().powf(pstar),
        |c| norm(c) < sigma,
    ) / pstar;
    let boundary_k_term = sphere_integral(
        |x| sigma * k.eval(x) * x[2].abs().powf(e.weight_b) * u.eval(x).abs().powf(pstar),
        &q,
    )? / pstar;
    let boundary_b_term = boundary_b_integral(u, &q, p)?;
    Ok(PohozaevReport {
        sigma,
        volume_term,
        boundary_k_term,
        boundary_b_term,
        residual: volume_term - boundary_k_term - boundary_b_term,
    })
}

/// `∫_{∂B_σ} B` for `u = |x|^{-d} + A + ξ` at each `σ`.
pub fn pohozaev_limit_probe(
    amplitude: f64,
    xi: &AnalyticField,
    sigmas: &[f64],
    p: &ProblemParams,
    sphere_degree: usize,
) -> Result<Vec<f64>> {
    let d = p.exponents().decay_d;
    let w = crate::analytic::power_solution(p, d);
    let u = w.plus(&AnalyticField::constant(*p, amplitude)).plus(xi);
    sigmas
        .iter()
        .map(|&s| boundary_b_integral(&u, &SphereQuadrature::new(s, sphere_degree)?, p))
        .collect()
}

/// `-(1/2) A d^2 ∫_{∂B_1} |x_N|^{2a}`, the small-sphere limit of the probe.
pub fn pohozaev_limit_value(amplitude: f64, p: &ProblemParams, sphere_degree: usize) -> Result<f64> {
    let e = p.exponents();
    let q = SphereQuadrature::new(1.0, sphere_degree)?;
    let m = sphere_integral(|x| x[2].abs().powf(e.weight_a), &q)?;
    Ok(-0.5 * amplitude * e.decay_d * e.decay_d * m)
}

/// Value of a Kazdan–Warner integral with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KazdanWarnerReport {
    pub value: f64,
    /// `|I(n) - I(n/2)|` between the quadrature and its coarsening.
    pub quadrature_error: f64,
    /// Estimated contribution from outside the truncation box.
    pub tail_bound: f64,
    /// `|value| > 10 quadrature_error` and the tail cannot cancel the value:
    /// no solution can have this `K`.
    pub nonexistence: bool,
}

/// Integration box for the `R^N` integrals.
#[derive(Debug, Clone, Copy)]
pub struct WholeSpaceQuadrature {
    pub half_width: f64,
    pub cells: usize,
}

impl Default for WholeSpaceQuadrature {
    fn default() -> Self {
        WholeSpaceQuadrature { half_width: 8.0, cells: DEFAULT_VOLUME_CELLS }
    }
}

fn whole_space_integral<F>(f: F, p: &ProblemParams, quad: WholeSpaceQuadrature) -> Result<KazdanWarnerReport>
where
    F: Fn(&[f64; 3]) -> f64 + Sync,
{
    if p.n() != 3 {
        return Err(DelabError::UnsupportedDimension("volume rules are built for N = 3".into()));
    }
    let b = p.exponents().weight_b;
    let integral = |cells: usize| -> Result<f64> {
        Ok(VolumeQuadrature::new(cells, quad.half_width)?.integrate(b, &f, |_| true))
    };
    let fine = integral(quad.cells)?;
    let coarse = integral((quad.cells / 2).max(2) & !1)?;
    let tail = tail_bound(&f, b, quad.half_width);
    let quadrature_error = (fine - coarse).abs();
    Ok(KazdanWarnerReport {
        value: fine,
        quadrature_error,
        tail_bound: tail,
        nonexistence: fine.abs() > 10.0 * quadrature_error && fine.abs() > tail,
    })
}

/// Tail of `∫_{|x|>L} |f| |x_N|^b` from the decay rate of spherical maxima at `L/2` and `L`.
fn tail_bound<F>(f: &F, b: f64, l: f64) -> f64
where
    F: Fn(&[f64; 3]) -> f64,
{
    let q = SphereQuadrature::new(1.0, 16).expect("unit sphere");
    let shell_max = |r: f64| -> f64 {
        q.nodes
            .iter()
            .map(|n| {
                let x = [r * n[0], r * n[1], r * n[2]];
                (f(&x) * x[2].abs().powf(b)).abs()
            })
            .fold(0.0, f64::max)
    };
    let (m_half, m_full) = (shell_max(0.5 * l), shell_max(l));
    if m_full == 0.0 {
        return 0.0;
    }
    if m_half == 0.0 {
        return f64::INFINITY;
    }
    // |g(r)| <= m_full (L/r)^rate; tail = 4π m_full L^3/(rate - 3)
    let rate = (m_half / m_full).ln() / 2f64.ln();
    if rate <= 3.0 {
        return f64::INFINITY;
    }
    4.0 * std::f64::consts::PI * m_full * l.powi(3) / (rate - 3.0)
}

/// `∫ (x·∇K) |x_N|^b |u|^p`; vanishes for every solution.
pub fn kazdan_warner_radial(
    u: &AnalyticField,
    k: &AnalyticField,
    p: &ProblemParams,
    quad: WholeSpaceQuadrature,
) -> Result<KazdanWarnerReport> {
    let grad = k
        .gradient_fn()
        .ok_or_else(|| DelabError::DomainMismatch("K needs an exact gradient".into()))?;
    let pstar = p.exponents().pstar;
    whole_space_integral(|c| dot(c, &grad(c)) * u.eval(c).abs().powf(pstar), p, quad)
}

/// `∫ (∂K/∂x_i) |x_N|^b |u|^p` for a tangential axis `1 <= i <= N-1`.
pub fn kazdan_warner_translation(
    u: &AnalyticField,
    k: &AnalyticField,
    axis: usize,
    p: &ProblemParams,
    quad: WholeSpaceQuadrature,
) -> Result<KazdanWarnerReport> {
    let n = p.n();
    if axis == 0 || axis >= n {
        return Err(DelabError::AxisOutOfRange { axis, max: n - 1 });
    }
    let grad = k
        .gradient_fn()
        .ok_or_else(|| DelabError::DomainMismatch("K needs an exact gradient".into()))?;
    let pstar = p.exponents().pstar;
    whole_space_integral(|c| grad(c)[axis - 1] * u.eval(c).abs().powf(pstar), p, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{explicit_U, power_solution};
    use crate::field::Domain;
    use std::f64::consts::PI;

    fn p3() -> ProblemParams {
        ProblemParams::explicit(3).unwrap()
    }

    #[test]
    fn density_vanishes_on_power_solution() {
        let p = p3();
        let w = power_solution(&p, 3.0);
        for sigma in [0.3, 1.0, 2.5] {
            let x = [0.6 * sigma, 0.0, 0.8 * sigma];
            assert!(boundary_density_b(&w, &x, sigma, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn density_of_constant_is_zero() {
        let p = p3();
        let c = AnalyticField::constant(p, 3.0);
        assert_eq!(boundary_density_b(&c, &[0.0, 0.0, 1.0], 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn density_of_shifted_power() {
        let p = p3();
        let u = power_solution(&p, 3.0).plus(&AnalyticField::constant(p, 1.0));
        let b = boundary_density_b(&u, &[0.0, 0.0, 1.0], 1.0, &p).unwrap();
        assert!((b + 4.5).abs() < 1e-12);
        assert!(matches!(
            boundary_density_b(&u, &[0.0, 0.0, 1.1], 1.0, &p),
            Err(DelabError::PointNotOnSphere { .. })
        ));
    }

    #[test]
    fn zero_field_gives_zero_terms() {
        let p = p3();
        let zero = AnalyticField::constant(p, 0.0);
        let r = pohozaev_check(&zero, &AnalyticField::constant(p, 1.0), 1.0, &p, 8, 16).unwrap();
        assert_eq!((r.volume_term, r.boundary_k_term, r.boundary_b_term, r.residual), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn pure_power_boundary_term_is_zero() {
        let p = p3();
        let w = power_solution(&p, 3.0);
        let r = pohozaev_check(&w, &AnalyticField::constant(p, 1.0), 1.0, &p, 8, 16).unwrap();
        assert!(r.boundary_b_term.abs() < 1e-12);
    }

    #[test]
    fn constant_k_kills_detectors() {
        let p = p3();
        let u = explicit_U(&p).unwrap();
        let one = AnalyticField::constant(p, 1.0);
        let quad = WholeSpaceQuadrature { half_width: 8.0, cells: 16 };
        assert_eq!(kazdan_warner_radial(&u, &one, &p, quad).unwrap().value, 0.0);
        assert_eq!(kazdan_warner_translation(&u, &one, 1, &p, quad).unwrap().value, 0.0);
        let zero = AnalyticField::constant(p, 0.0);
        let k2 = AnalyticField::new(p, Domain::FullSpace, |x| x[0] * x[0])
            .with_gradient(|x| vec![2.0 * x[0], 0.0, 0.0]);
        assert_eq!(kazdan_warner_radial(&zero, &k2, &p, quad).unwrap().value, 0.0);
    }

    #[test]
    fn normal_axis_rejected() {
        let p = p3();
        let u = explicit_U(&p).unwrap();
        let one = AnalyticField::constant(p, 1.0);
        let quad = WholeSpaceQuadrature::default();
        assert_eq!(
            kazdan_warner_translation(&u, &one, 3, &p, quad).unwrap_err(),
            DelabError::AxisOutOfRange { axis: 3, max: 2 }
        );
    }

    #[test]
    fn limit_value() {
        let v = pohozaev_limit_value(1.0, &p3(), 8).unwrap();
        assert!((v + 6.0 * PI).abs() < 1e-10);
    }
}
