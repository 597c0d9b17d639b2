//! Constrained descent on the weighted Rayleigh quotient
//! `R(u) = E(u) / P(u)^{2/p}` over grid fields vanishing on the outer layer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::FamilyParameters;
use crate::error::{DelabError, Result};
use crate::krylov::{det_dot, pcg};
use crate::params::ProblemParams;
use crate::rng::Lcg64;
use crate::wgrid::{
    apply_l_raw, energy_operator_diagonal, energy_operator_raw, lp_cell_weights, weighted_energy_with,
    weighted_lp_with, FaceWeights, GridField, GridSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerConfig {
    pub max_iters: usize,
    /// Stop once `(R_old - R_new) / R_old` drops below this.
    pub tol_rel: f64,
    pub initial_step: f64,
    pub shrink: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    pub positivity: bool,
    /// Relative tolerance of the inner preconditioner solves.
    pub inner_tol: f64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig {
            max_iters: 500,
            tol_rel: 1e-9,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            positivity: true,
            inner_tol: 1e-10,
        }
    }
}

impl MinimizerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) || !(self.shrink > 0.0 && self.shrink < 1.0) || !(self.initial_step > 0.0) {
            return Err(DelabError::InvalidGrid(format!("invalid minimizer configuration {self:?}")));
        }
        Ok(())
    }
}

/// Fitted trace profile `u0 (1 + lam^2 |x' - x0|^2)^{-d/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub u0: f64,
    pub lam: f64,
    pub x0: Vec<f64>,
    /// Relative L2 misfit over the trace samples.
    pub misfit: f64,
}

impl ProfileFit {
    pub fn family(&self) -> Result<FamilyParameters> {
        FamilyParameters::new(self.lam, self.x0.iter().map(|c| -self.lam * c).collect())
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    /// Minimizer normalized to `P = 1`.
    pub field: GridField,
    pub rayleigh: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Rayleigh quotient after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub fitted_profile: Option<ProfileFit>,
}

struct Workspace {
    spec: GridSpec,
    fw: FaceWeights,
    cw: Vec<f64>,
    pstar: f64,
    vol: f64,
}

impl Workspace {
    fn new(spec: GridSpec, p: &ProblemParams) -> Result<Self> {
        let e = p.exponents();
        if !(e.weight_b > -1.0) {
            return Err(DelabError::WeightNotIntegrable(e.weight_b));
        }
        Ok(Workspace {
            spec,
            fw: FaceWeights::new(&spec, p.alpha()),
            cw: lp_cell_weights(&spec, e.weight_b),
            pstar: e.pstar,
            vol: spec.cell_volume(),
        })
    }

    fn energy(&self, u: &[f64]) -> f64 {
        weighted_energy_with(&self.spec, &self.fw, u)
    }

    fn lp(&self, u: &[f64]) -> f64 {
        weighted_lp_with(&self.spec, &self.cw, u, self.pstar)
    }

    fn rayleigh(&self, u: &[f64]) -> Result<f64> {
        let den = self.lp(u);
        if !(den > 0.0) || !den.is_finite() {
            return Err(DelabError::ZeroDenominator);
        }
        Ok(self.energy(u) / den.powf(2.0 / self.pstar))
    }

    fn normalize(&self, u: &mut [f64]) -> Result<()> {
        let den = self.lp(u);
        if !(den > 0.0) || !den.is_finite() {
            return Err(DelabError::ZeroDenominator);
        }
        let c = den.powf(-1.0 / self.pstar);
        u.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }

    /// `cw |u|^{p-2} u / vol`, the cell-averaged nonlinearity.
    fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        let d2 = self.spec.dims[2];
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.cw[i % d2] / self.vol * v.abs().powf(self.pstar - 2.0) * v)
            .collect()
    }
}

pub fn rayleigh(u: &GridField, p: &ProblemParams) -> Result<f64> {
    Workspace::new(u.spec, p)?.rayleigh(&u.values)
}

/// Default start `exp(-|x|^2)`.
pub fn default_initial_guess(spec: GridSpec) -> GridField {
    GridField::from_fn(spec, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp())
}

/// Uniform `(0, 1)` noise on interior cells, zero on the outer layer.
pub fn random_positive_guess(spec: GridSpec, seed: u64) -> GridField {
    let mut rng = Lcg64::new(seed);
    let ring = spec.ring_mask();
    let values = ring.iter().map(|&r| if r { 0.0 } else { rng.next_f64() }).collect();
    GridField { spec, values }
}

pub fn minimize_rayleigh(u0: &GridField, p: &ProblemParams, cfg: &MinimizerConfig) -> Result<GroundStateResult> {
    cfg.validate()?;
    let spec = u0.spec;
    let ws = Workspace::new(spec, p)?;
    let ring = spec.ring_mask();
    let free: Vec<bool> = ring.iter().map(|r| !r).collect();
    let diag = energy_operator_diagonal(&spec, &ws.fw);
    let apply = |v: &[f64], out: &mut [f64]| energy_operator_raw(&spec, &ws.fw, v, out);

    let mut u: Vec<f64> = u0.values.iter().zip(&ring).map(|(v, &r)| if r { 0.0 } else { *v }).collect();
    if cfg.positivity {
        u.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    ws.normalize(&mut u)?;
    let mut r = ws.rayleigh(&u)?;
    if !r.is_finite() {
        return Err(DelabError::NonFiniteSample(0));
    }
    let mut history = vec![r];
    let mut y = vec![0.0; u.len()];
    let mut gd = vec![0.0; u.len()];
    let mut converged = false;
    let mut iterations = 0;
    let cap = (10.0 * (spec.len() as f64).sqrt()).ceil() as usize;

    while iterations < cfg.max_iters {
        iterations += 1;
        // at P = 1: grad R = 2 vol (G u - E g), E = vol u^T G u
        let e = ws.energy(&u);
        let g = ws.nonlinearity(&u);
        pcg(apply, &diag, &free, &g, &mut y, cfg.inner_tol, cap)?;
        let d: Vec<f64> = y.iter().zip(&u).map(|(y, u)| e * y - u).collect();
        apply(&d, &mut gd);
        let slope = -2.0 * ws.vol * det_dot(&d, &gd);
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let mut t = cfg.initial_step;
        let mut accepted = None;
        while t > 1e-12 {
            let mut trial: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u + t * d).collect();
            if cfg.positivity {
                trial.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if let Ok(rt) = ws.rayleigh(&trial) {
                if rt <= r + cfg.sufficient_decrease * t * slope {
                    ws.normalize(&mut trial)?;
                    accepted = Some((trial, rt));
                    break;
                }
            }
            t *= cfg.shrink;
        }
        let Some((next, rn)) = accepted else {
            // no admissible decrease left at this resolution
            converged = true;
            break;
        };
        // keep the warm start consistent with the new scale
        let scale = 1.0 / e.max(f64::MIN_POSITIVE);
        y.iter_mut().for_each(|v| *v *= scale);
        let decrease = (r - rn) / r;
        u = next;
        r = rn;
        history.push(r);
        if decrease < cfg.tol_rel {
            converged = true;
            break;
        }
    }
    let field = GridField { spec, values: u };
    let fitted_profile = extract_trace(&field).ok().and_then(|t| fit_profile(&t, p).ok());
    Ok(GroundStateResult { field, rayleigh: r, iterations, converged, history, fitted_profile })
}

/// Rescaled solution `c u` with the discrete equation residual.
#[derive(Debug, Clone)]
pub struct RescaledSolution {
    pub field: GridField,
    /// `c` with `c^{p-2}` equal to the Lagrange multiplier.
    pub scale: f64,
    pub multiplier: f64,
    /// `||L v - w |v|^{p-2} v|| / ||L v||` over interior cells off the hyperplane band.
    pub relative_residual: f64,
}

pub fn rescale_to_solution(r: &GroundStateResult, p: &ProblemParams) -> Result<RescaledSolution> {
    if !r.converged {
        return Err(DelabError::NotConverged);
    }
    let spec = r.field.spec;
    let ws = Workspace::new(spec, p)?;
    let lp = ws.lp(&r.field.values);
    if !(lp > 0.0) {
        return Err(DelabError::ZeroDenominator);
    }
    // the multiplier equals E(u) once P(u) = 1
    let multiplier = ws.energy(&r.field.values) / lp.powf(2.0 / ws.pstar);
    let scale = multiplier.powf(1.0 / (ws.pstar - 2.0)) / lp.powf(1.0 / ws.pstar);
    let field = r.field.scaled(scale);
    let relative_residual = equation_residual(&field, p)?;
    Ok(RescaledSolution { field, scale, multiplier, relative_residual })
}

/// Relative residual of `L v = w |v|^{p-2} v` on cells with `|x_N| > h` at least
/// two layers inside the box (the energy quadrature treats the outer two layers
/// differently from `L`).
pub fn equation_residual(v: &GridField, p: &ProblemParams) -> Result<f64> {
    let spec = v.spec;
    let ws = Workspace::new(spec, p)?;
    let mut lv = vec![0.0; spec.len()];
    apply_l_raw(&spec, &ws.fw, &v.values, &mut lv);
    let g = ws.nonlinearity(&v.values);
    let hz = spec.spacing()[2];
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..spec.len() {
        let [i, j, k] = spec.unravel(idx);
        let deep = |a: usize, n: usize| a >= 2 && a + 2 < n;
        if !(deep(i, spec.dims[0]) && deep(j, spec.dims[1]) && deep(k, spec.dims[2])) || spec.coord(2, k).abs() <= hz {
            continue;
        }
        num += (lv[idx] - g[idx]).powi(2);
        den += lv[idx].powi(2);
    }
    if den == 0.0 {
        return Err(DelabError::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}

/// Samples of a field on a plane `x_N = const`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub height: f64,
}

/// The cell layer nearest the hyperplane on the side carrying the larger maximum.
pub fn extract_trace(u: &GridField) -> Result<Trace> {
    let spec = u.spec;
    let kz = spec.dims[2] / 2;
    let layer = |k: usize| -> Trace {
        let mut points = Vec::new();
        let mut values = Vec::new();
        for i in 0..spec.dims[0] {
            for j in 0..spec.dims[1] {
                let c = spec.center(i, j, k);
                points.push([c[0], c[1]]);
                values.push(u.at(i, j, k));
            }
        }
        Trace { points, values, height: spec.coord(2, k) }
    };
    let max_on = |range: std::ops::Range<usize>| {
        range
            .flat_map(|k| (0..spec.dims[0] * spec.dims[1]).map(move |ij| (ij, k)))
            .map(|(ij, k)| u.at(ij / spec.dims[1], ij % spec.dims[1], k))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let upper = max_on(kz..spec.dims[2]);
    let lower = max_on(0..kz);
    Ok(if upper >= lower { layer(kz) } else { layer(kz - 1) })
}

fn profile_model(d: f64, theta: &[f64; 4], x: &[f64; 2]) -> (f64, [f64; 4]) {
    let [u0, lam, a, b] = *theta;
    let (dx, dy) = (x[0] - a, x[1] - b);
    let r2 = dx * dx + dy * dy;
    let q = 1.0 + lam * lam * r2;
    let base = q.powf(-0.5 * d);
    let v = u0 * base;
    let dq = -0.5 * d * v / q;
    (v, [base, dq * 2.0 * lam * r2, dq * lam * lam * -2.0 * dx, dq * lam * lam * -2.0 * dy])
}

/// Levenberg–Marquardt fit of `u0 (1 + lam^2 |x' - x0|^2)^{-d/2}` to a trace.
pub fn fit_profile(trace: &Trace, p: &ProblemParams) -> Result<ProfileFit> {
    if p.n() != 3 {
        return Err(DelabError::UnsupportedDimension("trace fits are built for N = 3".into()));
    }
    let d = p.exponents().decay_d;
    let m = trace.values.len();
    let vmax = trace.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = trace.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if m < 4 || !(vmax > 0.0) {
        return Err(DelabError::DegenerateTrace("trace has no positive samples".into()));
    }
    if vmax - vmin <= 1e-12 * vmax.abs() {
        return Err(DelabError::DegenerateTrace("constant trace forces lam -> 0".into()));
    }
    let imax = trace.values.iter().position(|&v| v == vmax).unwrap_or(0);
    // cell area from the spread of the sample points
    let above = trace.values.iter().filter(|&&v| v >= 0.5 * vmax).count() as f64;
    let area = sample_cell_area(&trace.points);
    let r_half = (above * area / std::f64::consts::PI).sqrt().max(1e-12);
    let lam0 = (2f64.powf(2.0 / d) - 1.0).sqrt() / r_half;
    let mut theta = [vmax, lam0, trace.points[imax][0], trace.points[imax][1]];

    let residuals = |th: &[f64; 4]| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, 4);
        for (i, (x, v)) in trace.points.iter().zip(&trace.values).enumerate() {
            let (f, g) = profile_model(d, th, x);
            r[i] = f - v;
            for c in 0..4 {
                j[(i, c)] = g[c];
            }
        }
        (r, j)
    };
    let mut mu = 1e-3;
    let (mut r, mut jac) = residuals(&theta);
    let mut cost = r.norm_squared();
    for _ in 0..500 {
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut a = jtj.clone();
        for c in 0..4 {
            a[(c, c)] += mu * jtj[(c, c)].max(1e-300);
        }
        let Some(step) = a.lu().solve(&(-jtr)) else {
            mu *= 10.0;
            continue;
        };
        let cand = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2], theta[3] + step[3]];
        let (rc, jc) = residuals(&cand);
        let cc = rc.norm_squared();
        if cc.is_finite() && cc < cost {
            let rel = (cost - cc) / cost.max(1e-300);
            theta = cand;
            r = rc;
            jac = jc;
            cost = cc;
            mu = (mu * 0.3).max(1e-12);
            if rel < 1e-15 || cost < 1e-30 {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    let lam = theta[1].abs();
    if !(lam > 1e-8) {
        return Err(DelabError::DegenerateTrace(format!("fitted lam = {lam} is at the boundary")));
    }
    let norm = trace.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ProfileFit { u0: theta[0], lam, x0: vec![theta[2], theta[3]], misfit: cost.sqrt() / norm })
}

fn sample_cell_area(points: &[[f64; 2]]) -> f64 {
    let spacing = |axis: usize| -> f64 {
        let mut c: Vec<f64> = points.iter().map(|p| p[axis]).collect();
        c.sort_by(|a, b| a.total_cmp(b));
        c.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > 1e-12).fold(f64::INFINITY, f64::min)
    };
    let (hx, hy) = (spacing(0), spacing(1));
    if hx.is_finite() && hy.is_finite() {
        hx * hy
    } else {
        1.0
    }
}
