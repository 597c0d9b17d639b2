//! Gauss–Legendre rules and a product rule on spheres in `R^3`.

use std::f64::consts::PI;

use crate::error::{DelabError, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nodes and weights on `∂B_sigma(0) ⊂ R^3`.
///
/// Product rule: Gauss–Legendre in `z = x_3/sigma` on each hemisphere
/// separately (so integrands with a kink on `x_3 = 0` stay smooth on every
/// panel) times equispaced azimuth.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub sigma: f64,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SphereQuadrature {
    /// Exact for polynomials of degree `<= degree` (restricted to the sphere).
    pub fn new(sigma: f64, degree: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(DelabError::NonpositiveRadius(sigma));
        }
        let m = degree / 2 + 1;
        let n_phi = degree + 2;
        let (t, wt) = gauss_legendre(m);
        let mut nodes = Vec::with_capacity(2 * m * n_phi);
        let mut weights = Vec::with_capacity(2 * m * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for hemi in [-1.0, 1.0] {
            for (ti, wi) in t.iter().zip(&wt) {
                let z = hemi * 0.5 * (ti + 1.0);
                let rho = (1.0 - z * z).sqrt();
                for k in 0..n_phi {
                    let phi = (k as f64 + 0.5) * dphi;
                    nodes.push([sigma * rho * phi.cos(), sigma * rho * phi.sin(), sigma * z]);
                    weights.push(sigma * sigma * 0.5 * wi * dphi);
                }
            }
        }
        Ok(SphereQuadrature { sigma, nodes, weights, degree })
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `∑ w_i f(x_i)` over the sphere nodes.
pub fn sphere_integral<F>(f: F, q: &SphereQuadrature) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut acc = 0.0;
    for (i, (x, w)) in q.nodes.iter().zip(&q.weights).enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(DelabError::NonFiniteSample(i));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Mean of `f` over the sphere.
pub fn spherical_mean<F>(f: F, q: &SphereQuadrature) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    Ok(sphere_integral(f, q)? / q.area())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn sphere_area_and_moments() {
        let q = SphereQuadrature::new(1.0, 8).unwrap();
        assert!((q.area() - 4.0 * PI).abs() <= 1e-10 * 4.0 * PI);
        let z2 = sphere_integral(|x| x[2] * x[2], &q).unwrap();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12);
        let two = SphereQuadrature::new(2.0, 8).unwrap();
        let v = sphere_integral(|x| x[2] * x[2], &two).unwrap();
        assert!((v - 16.0 * 4.0 * PI / 3.0).abs() < 1e-10 * v);
        assert!((v - 67.02064327658225).abs() < 1e-9);
    }

    #[test]
    fn degree_eight_monomials() {
        // mean of x^a y^b z^c over S^2 via the Gamma-function formula
        fn dfact(n: i64) -> f64 {
            if n <= 0 { 1.0 } else { (n as f64) * dfact(n - 2) }
        }
        let q = SphereQuadrature::new(1.0, 8).unwrap();
        for a in 0..=8i64 {
            for b in 0..=(8 - a) {
                for c in 0..=(8 - a - b) {
                    let got = sphere_integral(|x| x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(c as i32), &q).unwrap();
                    let exact = if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
                        0.0
                    } else {
                        4.0 * PI * dfact(a - 1) * dfact(b - 1) * dfact(c - 1) / dfact(a + b + c + 1)
                    };
                    assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1e-3), "{a} {b} {c}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let q = SphereQuadrature::new(1.0, 4).unwrap();
        assert!(matches!(sphere_integral(|_| f64::NAN, &q), Err(DelabError::NonFiniteSample(0))));
        assert!(SphereQuadrature::new(0.0, 4).is_err());
    }
}
