//! Changes of variable between the anisotropic equation and its relatives.
//!
//! Naming convention: `u` is a field on the anisotropic side,
//! `v = x_N^alpha u` its Hardy-side image, and the ball / hyperbolic
//! pictures are lifts of `v`.

use crate::error::{DelabError, Result};
use crate::field::{norm_sq, AnalyticField, Domain};
use crate::params::ProblemParams;

/// Which equation a [`TransformedField`] is expected to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEquation {
    /// `-div(|x_N|^{2a} grad u) = K |x_N|^b |u|^{p-2} u` on `R^N`.
    Anisotropic,
    /// `-Lap v = lam_H v / x_N^2 + K |v|^{p-2} v / x_N^s` on the upper half-space.
    Hardy,
    /// `-Lap w = 4 lam_H w / (1-|x|^2)^2 + 2^s (K o H) |w|^{p-2} w / (1-|x|^2)^s` on the unit ball.
    Ball,
    /// `-Lap_H W = (lam_H + N(N-2)/4) W + K |W|^{p-2} W` on the upper half-space model.
    Hyperbolic,
    /// `-Lap u = tau^sigma |x|^sigma u^{p-1}` on `R^k`.
    RadialOde,
}

/// A field together with the equation it should satisfy.
#[derive(Debug, Clone)]
pub struct TransformedField {
    pub field: AnalyticField,
    pub target: TargetEquation,
    pub params: ProblemParams,
    /// Coefficient `K` in anisotropic coordinates; `None` means `K = 1`.
    pub coefficient: Option<AnalyticField>,
}

impl TransformedField {
    pub fn anisotropic(u: &AnalyticField) -> Self {
        TransformedField {
            field: u.clone(),
            target: TargetEquation::Anisotropic,
            params: *u.params(),
            coefficient: None,
        }
    }

    pub fn with_coefficient(mut self, k: AnalyticField) -> Self {
        self.coefficient = Some(k);
        self
    }

    fn k_at(&self, x: &[f64]) -> f64 {
        self.coefficient.as_ref().map_or(1.0, |k| k.eval(x))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.field.eval(x)
    }
}

/// `u_lam(x) = (lam/|x|)^d u(lam^2 x / |x|^2)`.
pub fn kelvin(u: &AnalyticField, lam: f64, p: &ProblemParams) -> Result<AnalyticField> {
    if !(lam > 0.0) {
        return Err(DelabError::NonpositiveDilation(lam));
    }
    let d = p.exponents().decay_d;
    let f = u.value_fn();
    Ok(AnalyticField::new(*p, Domain::PuncturedAtOrigin, move |x| {
        let r2 = norm_sq(x);
        let s = lam * lam / r2;
        let y: Vec<f64> = x.iter().map(|v| s * v).collect();
        (lam * lam / r2).powf(d / 2.0) * f(&y)
    }))
}

/// Kelvin transform with `lam = 1`.
pub fn inversion(u: &AnalyticField, p: &ProblemParams) -> Result<AnalyticField> {
    kelvin(u, 1.0, p)
}

/// `v = x_N^alpha u` on the upper half-space.
pub fn to_hardy(u: &AnalyticField, p: &ProblemParams) -> TransformedField {
    let alpha = p.alpha();
    let n = p.n();
    let f = u.value_fn();
    let field = AnalyticField::new(*p, Domain::HalfSpacePositive, move |x| {
        x[n - 1].max(0.0).powf(alpha) * f(x)
    });
    TransformedField { field, target: TargetEquation::Hardy, params: *p, coefficient: None }
}

/// Coefficient of the linear term of the Hardy-side equation.
pub fn hardy_coefficient(p: &ProblemParams) -> f64 {
    p.exponents().hardy_lambda
}

/// Mass coefficient `lam_H + N(N-2)/4` of the hyperbolic-space equation.
pub fn hyperbolic_mass(p: &ProblemParams) -> f64 {
    let n = p.n() as f64;
    hardy_coefficient(p) + n * (n - 2.0) / 4.0
}

/// `W = x_N^{(N-2)/2} v = x_N^{(N-2+2 alpha)/2} u`.
pub fn hyperbolic_lift(src: &TransformedField) -> Result<TransformedField> {
    let p = src.params;
    let n = p.n();
    let power = match src.target {
        TargetEquation::Anisotropic => p.exponents().decay_d / 2.0,
        TargetEquation::Hardy => (n as f64 - 2.0) / 2.0,
        other => {
            return Err(DelabError::DomainMismatch(format!("cannot lift a {other:?} field")));
        }
    };
    let f = src.field.value_fn();
    let field = AnalyticField::new(p, Domain::HalfSpacePositive, move |x| {
        x[n - 1].max(0.0).powf(power) * f(x)
    });
    Ok(TransformedField {
        field,
        target: TargetEquation::Hyperbolic,
        params: p,
        coefficient: src.coefficient.clone(),
    })
}

/// `H(x)` and `rho(x)` of the ball picture.
pub fn ball_chart(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let r2 = norm_sq(x);
    let denom = 1.0 + 2.0 * x[n - 1] + r2;
    if denom <= 1e-12 {
        return Err(DelabError::SingularPoint(denom));
    }
    let mut h: Vec<f64> = x[..n - 1].iter().map(|v| 2.0 * v / denom).collect();
    h.push((1.0 - r2) / denom);
    let rho = (2.0 / denom).powf((n as f64 - 2.0) / 2.0);
    Ok((h, rho))
}

/// `w = (v o H) rho` on the unit ball, from a Hardy-side (or anisotropic) field.
pub fn ball_map(src: &TransformedField) -> Result<TransformedField> {
    let hardy = match src.target {
        TargetEquation::Hardy => src.clone(),
        TargetEquation::Anisotropic => {
            let mut h = to_hardy(&src.field, &src.params);
            h.coefficient = src.coefficient.clone();
            h
        }
        other => return Err(DelabError::DomainMismatch(format!("cannot map a {other:?} field to the ball"))),
    };
    let f = hardy.field.value_fn();
    let field = AnalyticField::new(src.params, Domain::UnitBall, move |x| match ball_chart(x) {
        Ok((h, rho)) => f(&h) * rho,
        Err(_) => f64::NAN,
    });
    Ok(TransformedField {
        field,
        target: TargetEquation::Ball,
        params: src.params,
        coefficient: hardy.coefficient,
    })
}

/// Reduced radial problem `-Lap u = tau^sigma |x|^sigma u^{p-1}` on `R^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialReduction {
    pub tau: f64,
    pub k_dim: usize,
    pub sigma_exp: f64,
    /// `tau^sigma`.
    pub coefficient: f64,
    /// `(k + 2 + 2 sigma)/(k - 2)`, compared against `p - 1`.
    pub serrin_zou_exponent: f64,
}

pub fn radial_reduction(p: &ProblemParams) -> Result<RadialReduction> {
    p.require_subcritical()?;
    let e = p.exponents();
    let k = e.k_dim as f64;
    let r = RadialReduction {
        tau: e.tau,
        k_dim: e.k_dim,
        sigma_exp: e.sigma_exp,
        coefficient: e.tau.powf(e.sigma_exp),
        serrin_zou_exponent: (k + 2.0 + 2.0 * e.sigma_exp) / (k - 2.0),
    };
    if !(r.sigma_exp > -2.0) || !(r.serrin_zou_exponent > e.pstar - 1.0) {
        return Err(DelabError::DomainMismatch(format!(
            "reduction conditions fail: sigma = {}, (k+2+2sigma)/(k-2) = {}",
            r.sigma_exp, r.serrin_zou_exponent
        )));
    }
    Ok(r)
}

/// Wraps a radial profile `u(|y|)` on `R^k` for residual checks.
pub fn radial_field(p: &ProblemParams, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<TransformedField> {
    let red = radial_reduction(p)?;
    // field dimension follows the reduced problem, not N
    let field = AnalyticField::new(*p, Domain::FullSpace, move |y| profile(norm_sq(y).sqrt()));
    let field = field.with_dim(red.k_dim);
    Ok(TransformedField { field, target: TargetEquation::RadialOde, params: *p, coefficient: None })
}

fn second_difference_laplacian(f: &AnalyticField, x: &[f64], h: f64, u0: f64) -> f64 {
    let mut y = x.to_vec();
    let mut lap = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = f.eval(&y);
        y[i] = x[i] - h;
        let um = f.eval(&y);
        y[i] = x[i];
        lap += (up - 2.0 * u0 + um) / (h * h);
    }
    lap
}

fn signed_power(u: f64, q: f64) -> f64 {
    u.abs().powf(q - 1.0) * u
}

/// Centered-difference residual of the tagged target equation at `x`.
pub fn residual_at(tf: &TransformedField, x: &[f64], h: f64) -> Result<f64> {
    let p = tf.params;
    let e = p.exponents();
    let pm1 = e.pstar - 1.0;
    let n = x.len();
    let f = &tf.field;
    if n != f.dim() {
        return Err(DelabError::OutsideDomain(x.to_vec()));
    }
    let standoff = 2.0 * h;
    let check = |distance: f64| -> Result<()> {
        if distance > standoff {
            Ok(())
        } else {
            Err(DelabError::TooCloseToSingularSet { distance, required: standoff })
        }
    };
    let xn = x[n - 1];
    match tf.target {
        TargetEquation::Anisotropic => {
            if f.domain() == Domain::PuncturedAtOrigin {
                check(norm_sq(x).sqrt())?;
            }
            check(xn.abs())?;
            let a = e.weight_a;
            let w = |t: f64| t.abs().powf(a);
            let u0 = f.eval(x);
            let mut y = x.to_vec();
            let mut div = 0.0;
            for i in 0..n {
                let (wp, wm) = if i == n - 1 { (w(xn + 0.5 * h), w(xn - 0.5 * h)) } else { (w(xn), w(xn)) };
                y[i] = x[i] + h;
                let up = f.eval(&y);
                y[i] = x[i] - h;
                let um = f.eval(&y);
                y[i] = x[i];
                div += (wp * (up - u0) - wm * (u0 - um)) / (h * h);
            }
            Ok(-div - tf.k_at(x) * xn.abs().powf(e.weight_b) * signed_power(u0, pm1))
        }
        TargetEquation::Hardy => {
            if xn <= 0.0 {
                return Err(DelabError::OutsideDomain(x.to_vec()));
            }
            check(xn)?;
            let u0 = f.eval(x);
            let lap = second_difference_laplacian(f, x, h, u0);
            Ok(-lap - e.hardy_lambda / (xn * xn) * u0 - tf.k_at(x) * signed_power(u0, pm1) / xn.powf(p.s()))
        }
        TargetEquation::Hyperbolic => {
            if xn <= 0.0 {
                return Err(DelabError::OutsideDomain(x.to_vec()));
            }
            check(xn)?;
            let u0 = f.eval(x);
            let lap = second_difference_laplacian(f, x, h, u0);
            let mut y = x.to_vec();
            y[n - 1] = xn + h;
            let up = f.eval(&y);
            y[n - 1] = xn - h;
            let um = f.eval(&y);
            let dn = (up - um) / (2.0 * h);
            let lap_h = xn * xn * lap - (n as f64 - 2.0) * xn * dn;
            Ok(-lap_h - hyperbolic_mass(&p) * u0 - tf.k_at(x) * signed_power(u0, pm1))
        }
        TargetEquation::Ball => {
            let r2 = norm_sq(x);
            if r2 >= 1.0 {
                return Err(DelabError::OutsideDomain(x.to_vec()));
            }
            check(1.0 - r2.sqrt())?;
            let (hx, _) = ball_chart(x)?;
            let u0 = f.eval(x);
            let lap = second_difference_laplacian(f, x, h, u0);
            let q = 1.0 - r2;
            let k = tf.k_at(&hx);
            Ok(-lap - 4.0 * e.hardy_lambda / (q * q) * u0
                - 2f64.powf(p.s()) * k / q.powf(p.s()) * signed_power(u0, pm1))
        }
        TargetEquation::RadialOde => {
            let red = radial_reduction(&p)?;
            let r = norm_sq(x).sqrt();
            if red.sigma_exp < 0.0 {
                check(r)?;
            }
            let u0 = f.eval(x);
            let lap = second_difference_laplacian(f, x, h, u0);
            Ok(-lap - red.coefficient * r.powf(red.sigma_exp) * signed_power(u0, pm1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{explicit_U, power_solution};
    use crate::params::validate_params;

    fn p3() -> ProblemParams {
        ProblemParams::explicit(3).unwrap()
    }

    #[test]
    fn kelvin_examples() {
        let p = p3();
        let one = AnalyticField::constant(p, 1.0);
        let k = kelvin(&one, 1.0, &p).unwrap();
        assert!((k.eval(&[0.0, 0.0, 2.0]) - 0.125).abs() < 1e-15);
        let w = power_solution(&p, 3.0);
        let kw = kelvin(&w, 1.0, &p).unwrap();
        assert!((kw.eval(&[0.3, -1.2, 0.5]) - 1.0).abs() < 1e-13);
        assert_eq!(kelvin(&one, 0.0, &p).unwrap_err(), DelabError::NonpositiveDilation(0.0));
        let inv = inversion(&one, &p).unwrap();
        assert_eq!(inv.eval(&[0.0, 0.0, 2.0]), k.eval(&[0.0, 0.0, 2.0]));
    }

    #[test]
    fn hardy_and_lift_values() {
        let p = p3();
        let u = explicit_U(&p).unwrap();
        let v = to_hardy(&u, &p);
        assert_eq!(v.target, TargetEquation::Hardy);
        assert!((v.eval(&[0.0, 0.0, 1.0]) - 1.837117307087384).abs() < 1e-12);
        assert_eq!(hardy_coefficient(&p), 0.0);
        let w = hyperbolic_lift(&v).unwrap();
        assert!((w.eval(&[0.0, 0.0, 1.0]) - 1.837117307087384).abs() < 1e-12);
        let w2 = hyperbolic_lift(&TransformedField::anisotropic(&u)).unwrap();
        let x = [0.2, 0.1, 0.6];
        assert!((w.eval(&x) - w2.eval(&x)).abs() < 1e-12 * w.eval(&x));
        assert_eq!(hyperbolic_mass(&p), 0.75);
        let zero = AnalyticField::constant(p, 0.0);
        assert_eq!(to_hardy(&zero, &p).eval(&x), 0.0);
        assert_eq!(hyperbolic_lift(&to_hardy(&zero, &p)).unwrap().eval(&x), 0.0);
    }

    #[test]
    fn ball_chart_examples() {
        let (h, rho) = ball_chart(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0, 1.0]);
        assert!((rho - 2f64.sqrt()).abs() < 1e-15);
        let (h, rho) = ball_chart(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0, 0.0]);
        assert!((rho - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(ball_chart(&[0.0, 0.0, -1.0]), Err(DelabError::SingularPoint(_))));
    }

    #[test]
    fn ball_lands_in_upper_half_space() {
        for x in [[0.1, 0.2, 0.3], [-0.5, 0.3, -0.6], [0.0, 0.0, 0.99]] {
            let (h, _) = ball_chart(&x).unwrap();
            assert!(h[2] > 0.0);
        }
    }

    #[test]
    fn radial_reduction_examples() {
        let r = radial_reduction(&p3()).unwrap();
        assert!((r.tau - 0.5).abs() < 1e-12);
        assert_eq!(r.k_dim, 4);
        assert!(r.sigma_exp.abs() < 1e-12);
        assert!((r.coefficient - 1.0).abs() < 1e-12);
        assert!((r.serrin_zou_exponent - 3.0).abs() < 1e-12);
        let p2 = validate_params(3, 1.0, 2.0).unwrap();
        assert_eq!(radial_reduction(&p2).unwrap_err(), DelabError::SOutOfRange(2.0));
        let r = radial_reduction(&validate_params(3, 1.25, 1.0).unwrap()).unwrap();
        assert!((r.tau - 0.75).abs() < 1e-12);
        assert_eq!(r.k_dim, 4);
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let p = p3();
        let zero = AnalyticField::constant(p, 0.0);
        let x = [0.1, 0.2, 0.5];
        let tf = TransformedField::anisotropic(&zero);
        assert_eq!(residual_at(&tf, &x, 1e-3).unwrap(), 0.0);
        assert_eq!(residual_at(&to_hardy(&zero, &p), &x, 1e-3).unwrap(), 0.0);
        assert_eq!(residual_at(&hyperbolic_lift(&to_hardy(&zero, &p)).unwrap(), &x, 1e-3).unwrap(), 0.0);
        assert_eq!(residual_at(&ball_map(&to_hardy(&zero, &p)).unwrap(), &x, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn standoff_and_domain_errors() {
        let p = p3();
        let u = explicit_U(&p).unwrap();
        let v = to_hardy(&u, &p);
        assert!(matches!(residual_at(&v, &[0.0, 0.0, 0.001], 1e-3), Err(DelabError::TooCloseToSingularSet { .. })));
        assert!(matches!(residual_at(&v, &[0.0, 0.0, -0.5], 1e-3), Err(DelabError::OutsideDomain(_))));
        let b = ball_map(&v).unwrap();
        assert!(matches!(residual_at(&b, &[0.0, 0.0, 1.2], 1e-3), Err(DelabError::OutsideDomain(_))));
    }
}
