//! Cell-centred tensor grids on `[-L, L]^3` and the weighted operator
//! `-div(|x_N|^{2 alpha} grad u)` in flux form.
//!
//! Faces normal to `x_N` carry the exact mean of `|t|^{2 alpha}` over the
//! segment joining the two cell centres; faces normal to `x_1`, `x_2` carry
//! the centre value `|x_N|^{2 alpha}`. Cells outside the box are zero ghosts.

use rayon::prelude::*;

use crate::error::{DelabError, Result};
use crate::field::AnalyticField;
use crate::krylov::{det_sum, pcg, CgOutcome};
use crate::params::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dims: [usize; 3], half_width: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2 || d % 2 != 0) {
            return Err(DelabError::InvalidGrid(format!("dims {dims:?} must be even and >= 2")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(DelabError::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        Ok(GridSpec { dims, half_width })
    }

    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        Self::new([n; 3], half_width)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.dims.map(|d| 2.0 * self.half_width / d as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let ij = idx / self.dims[2];
        [ij / self.dims[1], ij % self.dims[1], k]
    }

    #[inline]
    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        let h = 2.0 * self.half_width / self.dims[axis] as f64;
        -self.half_width + (idx as f64 + 0.5) * h
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    pub fn center_of(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        self.center(i, j, k)
    }

    /// Cells with some index on the outer layer.
    #[inline]
    pub fn is_ring(&self, i: usize, j: usize, k: usize) -> bool {
        let [a, b, c] = self.dims;
        i == 0 || j == 0 || k == 0 || i + 1 == a || j + 1 == b || k + 1 == c
    }

    pub fn ring_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|idx| {
                let [i, j, k] = self.unravel(idx);
                self.is_ring(i, j, k)
            })
            .collect()
    }
}

/// Samples on a [`GridSpec`]; index order `(i1, i2, i3)` with `i3` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(DelabError::InvalidGrid(format!(
                "{} values for {} cells",
                values.len(),
                spec.len()
            )));
        }
        Ok(GridField { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridField { spec, values: vec![0.0; spec.len()] }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        GridField { spec, values: vec![c; spec.len()] }
    }

    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let values = (0..spec.len()).into_par_iter().map(|idx| f(spec.center_of(idx))).collect();
        GridField { spec, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridField { spec: self.spec, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Trilinear interpolation between cell centres; `None` outside their hull.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let h = self.spec.spacing();
        let mut lo = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (x[a] + self.spec.half_width) / h[a] - 0.5;
            let max = (self.spec.dims[a] - 1) as f64;
            if !(t >= 0.0 && t <= max) {
                return None;
            }
            let base = (t.floor() as usize).min(self.spec.dims[a] - 2);
            lo[a] = base;
            frac[a] = t - base as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let off = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
            let w: f64 = (0..3).map(|a| if off[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            if w != 0.0 {
                acc += w * self.at(lo[0] + off[0], lo[1] + off[1], lo[2] + off[2]);
            }
        }
        Some(acc)
    }
}

/// `int_a^b |t|^q dt` for `q > -1`.
pub fn power_integral(a: f64, b: f64, q: f64) -> f64 {
    let prim = |t: f64| t.signum() * t.abs().powf(q + 1.0) / (q + 1.0);
    prim(b) - prim(a)
}

/// Face and cell weights for one grid and one `alpha`.
#[derive(Debug, Clone)]
pub struct FaceWeights {
    /// `|z_k|^{2 alpha}` for faces normal to `x_1`, `x_2` at height `k`.
    pub tangential: Vec<f64>,
    /// Face `j` (between cells `j-1` and `j`, ghosts at `j = 0, nz`): mean of
    /// `|t|^{2 alpha}` over the segment joining the two centres.
    pub normal: Vec<f64>,
    /// Interior faces `j = 1..nz-1` for the energy quadrature: the outermost
    /// segments are extended to the box wall, `(1/h) int |t|^{2 alpha}`.
    pub energy_normal: Vec<f64>,
}

impl FaceWeights {
    pub fn new(spec: &GridSpec, alpha: f64) -> Self {
        let a = 2.0 * alpha;
        let nz = spec.dims[2];
        let hz = spec.spacing()[2];
        let z = |k: isize| -spec.half_width + (k as f64 + 0.5) * hz;
        let tangential = (0..nz).map(|k| spec.coord(2, k).abs().powf(a)).collect();
        let normal = (0..=nz as isize)
            .map(|j| power_integral(z(j - 1), z(j), a) / hz)
            .collect();
        let energy_normal = (0..=nz)
            .map(|j| {
                if j == 0 || j == nz {
                    return 0.0;
                }
                let lo = if j == 1 { -spec.half_width } else { z(j as isize - 1) };
                let hi = if j + 1 == nz { spec.half_width } else { z(j as isize) };
                power_integral(lo, hi, a) / hz
            })
            .collect();
        FaceWeights { tangential, normal, energy_normal }
    }
}

/// Length factor of the energy segment between cells `i`, `i+1` of `d`:
/// the outermost segments reach the wall.
#[inline]
fn end_factor(i: usize, d: usize) -> f64 {
    1.0 + if i == 0 { 0.5 } else { 0.0 } + if i + 2 == d { 0.5 } else { 0.0 }
}

pub fn sample(f: &AnalyticField, spec: &GridSpec) -> Result<GridField> {
    if f.dim() != 3 {
        return Err(DelabError::DomainMismatch(format!("gridded fields need N = 3, field has dim {}", f.dim())));
    }
    let out = GridField::from_fn(*spec, |c| f.eval(&c));
    if let Some(bad) = (0..spec.len()).find(|&idx| {
        let c = spec.center_of(idx);
        !f.domain().contains(&c) || !out.values[idx].is_finite()
    }) {
        return Err(DelabError::DomainMismatch(format!(
            "cell centre {:?} is outside the field's domain or gives a non-finite value",
            spec.center_of(bad)
        )));
    }
    Ok(out)
}

/// Discrete `-div(|x_N|^{2 alpha} grad u)` with zero ghost values outside the box.
pub fn apply_l(u: &GridField, p: &ProblemParams) -> GridField {
    let spec = u.spec;
    let fw = FaceWeights::new(&spec, p.alpha());
    let mut out = vec![0.0; spec.len()];
    apply_l_raw(&spec, &fw, &u.values, &mut out);
    GridField { spec, values: out }
}

pub(crate) fn apply_l_raw(spec: &GridSpec, fw: &FaceWeights, u: &[f64], out: &mut [f64]) {
    let [d0, d1, d2] = spec.dims;
    let [hx, hy, hz] = spec.spacing();
    let (ix2, iy2, iz2) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    out.par_chunks_mut(d1 * d2).enumerate().for_each(|(i, slab)| {
        for j in 0..d1 {
            for k in 0..d2 {
                let c = spec.index(i, j, k);
                let uc = u[c];
                let nb = |ok: bool, idx: usize| if ok { u[idx] } else { 0.0 };
                let wt = fw.tangential[k];
                let mut acc = wt * ix2 * (2.0 * uc - nb(i > 0, c.wrapping_sub(d1 * d2)) - nb(i + 1 < d0, c + d1 * d2));
                acc += wt * iy2 * (2.0 * uc - nb(j > 0, c.wrapping_sub(d2)) - nb(j + 1 < d1, c + d2));
                acc += iz2 * (fw.normal[k] * (uc - nb(k > 0, c.wrapping_sub(1)))
                    + fw.normal[k + 1] * (uc - nb(k + 1 < d2, c + 1)));
                slab[j * d2 + k] = acc;
            }
        }
    });
}

/// Diagonal of [`apply_l`].
pub(crate) fn l_diagonal(spec: &GridSpec, fw: &FaceWeights) -> Vec<f64> {
    let [hx, hy, hz] = spec.spacing();
    (0..spec.len())
        .map(|idx| {
            let k = spec.unravel(idx)[2];
            2.0 * fw.tangential[k] * (1.0 / (hx * hx) + 1.0 / (hy * hy))
                + (fw.normal[k] + fw.normal[k + 1]) / (hz * hz)
        })
        .collect()
}

/// Half-gradient of [`weighted_energy`] divided by the cell volume:
/// `E(u) = vol * u^T G u`.
pub(crate) fn energy_operator_raw(spec: &GridSpec, fw: &FaceWeights, u: &[f64], out: &mut [f64]) {
    let [d0, d1, d2] = spec.dims;
    let [hx, hy, hz] = spec.spacing();
    let (ix2, iy2, iz2) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    out.par_chunks_mut(d1 * d2).enumerate().for_each(|(i, slab)| {
        for j in 0..d1 {
            for k in 0..d2 {
                let c = spec.index(i, j, k);
                let uc = u[c];
                let wt = fw.tangential[k];
                let mut acc = 0.0;
                if i > 0 {
                    acc += wt * end_factor(i - 1, d0) * ix2 * (uc - u[c - d1 * d2]);
                }
                if i + 1 < d0 {
                    acc += wt * end_factor(i, d0) * ix2 * (uc - u[c + d1 * d2]);
                }
                if j > 0 {
                    acc += wt * end_factor(j - 1, d1) * iy2 * (uc - u[c - d2]);
                }
                if j + 1 < d1 {
                    acc += wt * end_factor(j, d1) * iy2 * (uc - u[c + d2]);
                }
                if k > 0 {
                    acc += fw.energy_normal[k] * iz2 * (uc - u[c - 1]);
                }
                if k + 1 < d2 {
                    acc += fw.energy_normal[k + 1] * iz2 * (uc - u[c + 1]);
                }
                slab[j * d2 + k] = acc;
            }
        }
    });
}

pub(crate) fn energy_operator_diagonal(spec: &GridSpec, fw: &FaceWeights) -> Vec<f64> {
    let [d0, d1, d2] = spec.dims;
    let [hx, hy, hz] = spec.spacing();
    (0..spec.len())
        .map(|idx| {
            let [i, j, k] = spec.unravel(idx);
            let wt = fw.tangential[k];
            let mut acc = 0.0;
            if i > 0 {
                acc += wt * end_factor(i - 1, d0) / (hx * hx);
            }
            if i + 1 < d0 {
                acc += wt * end_factor(i, d0) / (hx * hx);
            }
            if j > 0 {
                acc += wt * end_factor(j - 1, d1) / (hy * hy);
            }
            if j + 1 < d1 {
                acc += wt * end_factor(j, d1) / (hy * hy);
            }
            if k > 0 {
                acc += fw.energy_normal[k] / (hz * hz);
            }
            if k + 1 < d2 {
                acc += fw.energy_normal[k + 1] / (hz * hz);
            }
            acc
        })
        .collect()
}

/// `int |x_N|^{2 alpha} |grad u|^2` over the box by face differences.
pub fn weighted_energy(u: &GridField, p: &ProblemParams) -> f64 {
    let fw = FaceWeights::new(&u.spec, p.alpha());
    weighted_energy_with(&u.spec, &fw, &u.values)
}

pub(crate) fn weighted_energy_with(spec: &GridSpec, fw: &FaceWeights, u: &[f64]) -> f64 {
    let [d0, d1, d2] = spec.dims;
    let [hx, hy, hz] = spec.spacing();
    let (ix2, iy2, iz2) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    let slab_sum = |i: usize| -> f64 {
        let mut acc = 0.0;
        for j in 0..d1 {
            for k in 0..d2 {
                let c = spec.index(i, j, k);
                let uc = u[c];
                let wt = fw.tangential[k];
                if i + 1 < d0 {
                    let d = u[c + d1 * d2] - uc;
                    acc += wt * end_factor(i, d0) * ix2 * d * d;
                }
                if j + 1 < d1 {
                    let d = u[c + d2] - uc;
                    acc += wt * end_factor(j, d1) * iy2 * d * d;
                }
                if k + 1 < d2 {
                    let d = u[c + 1] - uc;
                    acc += fw.energy_normal[k + 1] * iz2 * d * d;
                }
            }
        }
        acc
    };
    let partial: Vec<f64> = (0..d0).into_par_iter().map(slab_sum).collect();
    partial.iter().sum::<f64>() * spec.cell_volume()
}

/// Per-height cell integrals `h_x h_y int_{cell} |t|^b dt`.
pub(crate) fn lp_cell_weights(spec: &GridSpec, b: f64) -> Vec<f64> {
    let [hx, hy, hz] = spec.spacing();
    (0..spec.dims[2])
        .map(|k| {
            let z = spec.coord(2, k);
            hx * hy * power_integral(z - 0.5 * hz, z + 0.5 * hz, b)
        })
        .collect()
}

/// `int |x_N|^{alpha 2*(s) - s} |u|^{2*(s)}` with the weight integrated exactly per cell.
pub fn weighted_lp(u: &GridField, p: &ProblemParams) -> Result<f64> {
    let e = p.exponents();
    if !(e.weight_b > -1.0) {
        return Err(DelabError::WeightNotIntegrable(e.weight_b));
    }
    let cw = lp_cell_weights(&u.spec, e.weight_b);
    Ok(weighted_lp_with(&u.spec, &cw, &u.values, e.pstar))
}

pub(crate) fn weighted_lp_with(spec: &GridSpec, cw: &[f64], u: &[f64], pstar: f64) -> f64 {
    let d2 = spec.dims[2];
    det_sum(u.len(), |idx| cw[idx % d2] * u[idx].abs().powf(pstar))
}

/// `J(u) = E(u)/2 - P(u)/2*(s)`.
pub fn energy_j(u: &GridField, p: &ProblemParams) -> Result<f64> {
    let pstar = p.exponents().pstar;
    Ok(0.5 * weighted_energy(u, p) - weighted_lp(u, p)? / pstar)
}

/// Outcome of [`solve_dirichlet_report`].
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub field: GridField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `L u = f` on interior cells with the outer layer held at `g`.
pub fn solve_dirichlet(g: &GridField, f: &GridField, p: &ProblemParams, tol: f64) -> Result<GridField> {
    solve_dirichlet_report(g, f, p, tol).map(|s| s.field)
}

pub fn solve_dirichlet_report(
    g: &GridField,
    f: &GridField,
    p: &ProblemParams,
    tol: f64,
) -> Result<DirichletSolution> {
    if g.spec != f.spec {
        return Err(DelabError::InvalidGrid("boundary data and source live on different grids".into()));
    }
    if !(tol > 0.0) {
        return Err(DelabError::InvalidGrid(format!("tolerance {tol} must be positive")));
    }
    let spec = g.spec;
    let fw = FaceWeights::new(&spec, p.alpha());
    let ring = spec.ring_mask();
    let free: Vec<bool> = ring.iter().map(|r| !r).collect();
    // lift: boundary data on the ring, zero inside
    let lift: Vec<f64> = g.values.iter().zip(&ring).map(|(v, &r)| if r { *v } else { 0.0 }).collect();
    let mut l_lift = vec![0.0; spec.len()];
    apply_l_raw(&spec, &fw, &lift, &mut l_lift);
    let rhs: Vec<f64> = f.values.iter().zip(&l_lift).map(|(f, l)| f - l).collect();
    let diag = l_diagonal(&spec, &fw);
    let mut x = vec![0.0; spec.len()];
    let cap = (10.0 * (spec.len() as f64).sqrt()).ceil() as usize;
    let CgOutcome { iterations, relative_residual } = pcg(
        |v, out| apply_l_raw(&spec, &fw, v, out),
        &diag,
        &free,
        &rhs,
        &mut x,
        tol,
        cap,
    )?;
    let values = x.iter().zip(&lift).map(|(a, b)| a + b).collect();
    Ok(DirichletSolution { field: GridField { spec, values }, iterations, relative_residual })
}
