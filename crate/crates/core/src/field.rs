//! Closed-form scalar fields on subsets of `R^N`.

use std::fmt;
use std::sync::Arc;

use crate::error::{DelabError, Result};
use crate::params::ProblemParams;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Where a field is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    FullSpace,
    /// `x_N > 0`.
    HalfSpacePositive,
    /// `R^N \ {0}`.
    PuncturedAtOrigin,
    /// `|x| < 1`.
    UnitBall,
    /// The hyperplane `{x_N = 0}`; points are given as `x'` in `R^{N-1}`.
    Hyperplane,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::FullSpace | Domain::Hyperplane => true,
            Domain::HalfSpacePositive => x.last().is_some_and(|&t| t > 0.0),
            Domain::PuncturedAtOrigin => norm(x) > 0.0,
            Domain::UnitBall => norm(x) < 1.0,
        }
    }
}

/// A scalar field with an optional exact gradient.
#[derive(Clone)]
pub struct AnalyticField {
    dim: usize,
    domain: Domain,
    params: ProblemParams,
    value: ValueFn,
    gradient: Option<GradientFn>,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("params", &self.params)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl AnalyticField {
    pub fn new<F>(params: ProblemParams, domain: Domain, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let dim = match domain {
            Domain::Hyperplane => params.n() - 1,
            _ => params.n(),
        };
        AnalyticField { dim, domain, params, value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn without_gradient(mut self) -> Self {
        self.gradient = None;
        self
    }

    pub fn constant(params: ProblemParams, c: f64) -> Self {
        let n = params.n();
        AnalyticField::new(params, Domain::FullSpace, move |_| c).with_gradient(move |_| vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Evaluates without a domain check.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim || !self.domain.contains(x) {
            return Err(DelabError::OutsideDomain(x.to_vec()));
        }
        Ok(self.eval(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn value_fn(&self) -> ValueFn {
        Arc::clone(&self.value)
    }

    pub fn gradient_fn(&self) -> Option<GradientFn> {
        self.gradient.clone()
    }

    pub(crate) fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.value_fn();
        let out = AnalyticField {
            dim: self.dim,
            domain: self.domain,
            params: self.params,
            value: Arc::new(move |x| c * f(x)),
            gradient: None,
        };
        match self.gradient_fn() {
            Some(g) => out.with_gradient(move |x| g(x).into_iter().map(|v| c * v).collect()),
            None => out,
        }
    }

    /// `self + other`; gradient present only when both have one.
    pub fn plus(&self, other: &AnalyticField) -> Self {
        let (f, g) = (self.value_fn(), other.value_fn());
        let domain = if self.domain == Domain::FullSpace { other.domain } else { self.domain };
        let out = AnalyticField {
            dim: self.dim,
            domain,
            params: self.params,
            value: Arc::new(move |x| f(x) + g(x)),
            gradient: None,
        };
        match (self.gradient_fn(), other.gradient_fn()) {
            (Some(ga), Some(gb)) => out.with_gradient(move |x| {
                ga(x).into_iter().zip(gb(x)).map(|(a, b)| a + b).collect()
            }),
            _ => out,
        }
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient(f: &AnalyticField, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f.eval(&y);
            y[i] = x[i] - h;
            let fm = f.eval(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate_params;

    #[test]
    fn domain_membership() {
        assert!(Domain::HalfSpacePositive.contains(&[0.0, 0.0, 0.1]));
        assert!(!Domain::HalfSpacePositive.contains(&[0.0, 0.0, 0.0]));
        assert!(!Domain::PuncturedAtOrigin.contains(&[0.0, 0.0, 0.0]));
        assert!(!Domain::UnitBall.contains(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn try_eval_checks_domain() {
        let p = validate_params(3, 1.0, 1.0).unwrap();
        let f = AnalyticField::new(p, Domain::PuncturedAtOrigin, |x| 1.0 / norm(x));
        assert!(f.try_eval(&[0.0, 0.0, 0.0]).is_err());
        assert!(f.try_eval(&[1.0, 0.0]).is_err());
        assert_eq!(f.try_eval(&[0.0, 0.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn sum_and_scale() {
        let p = validate_params(3, 1.0, 1.0).unwrap();
        let one = AnalyticField::constant(p, 1.0);
        let lin = AnalyticField::new(p, Domain::FullSpace, |x| x[0]).with_gradient(|_| vec![1.0, 0.0, 0.0]);
        let g = lin.scaled(2.0).plus(&one);
        assert_eq!(g.eval(&[3.0, 0.0, 0.0]), 7.0);
        assert_eq!(g.gradient(&[0.0; 3]).unwrap(), vec![2.0, 0.0, 0.0]);
    }
}
