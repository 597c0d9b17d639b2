//! Jacobi-preconditioned conjugate gradients on a masked set of unknowns.

use rayon::prelude::*;

use crate::error::{DelabError, Result};

const CHUNK: usize = 4096;

/// Sum in fixed-size chunks so the result does not depend on the thread count.
pub fn det_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&term).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    det_sum(a.len(), |i| a[i] * b[i])
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` on the entries where `free` is true; other entries of `x`
/// are held at zero. `apply` must be symmetric positive definite on the free set.
pub fn pcg<A>(
    apply: A,
    diag: &[f64],
    free: &[bool],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mask = |v: &mut [f64]| {
        v.par_iter_mut().zip(free.par_iter()).for_each(|(e, &f)| {
            if !f {
                *e = 0.0;
            }
        })
    };
    mask(x);
    let mut bm = b.to_vec();
    mask(&mut bm);
    let bnorm = det_dot(&bm, &bm).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = bm.iter().zip(&ax).map(|(b, a)| b - a).collect();
    mask(&mut r);
    let precond = |r: &[f64], z: &mut [f64]| {
        z.par_iter_mut().enumerate().for_each(|(i, zi)| {
            *zi = if free[i] && diag[i] > 0.0 { r[i] / diag[i] } else { 0.0 };
        })
    };
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut dir = z.clone();
    let mut rz = det_dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = det_dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(CgOutcome { iterations: it, relative_residual: rel });
        }
        apply(&dir, &mut q);
        mask(&mut q);
        let dq = det_dot(&dir, &q);
        if !(dq > 0.0) {
            break;
        }
        let step = rz / dq;
        x.par_iter_mut().zip(dir.par_iter()).for_each(|(xi, di)| *xi += step * di);
        r.par_iter_mut().zip(q.par_iter()).for_each(|(ri, qi)| *ri -= step * qi);
        rel = det_dot(&r, &r).sqrt() / bnorm;
        precond(&r, &mut z);
        let rz_new = det_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        dir.par_iter_mut().zip(z.par_iter()).for_each(|(di, zi)| *di = zi + beta * *di);
    }
    if rel <= tol {
        return Ok(CgOutcome { iterations: max_iter, relative_residual: rel });
    }
    Err(DelabError::NoConvergence { iterations: max_iter, residual: rel })
}
