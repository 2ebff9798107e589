//! Density-matrix estimation from normally ordered moments.
//!
//! Minimum-norm least squares gives a Hermitian estimate, eigenvalue
//! clipping makes it physical, and projected accelerated gradient descent
//! on the set {ρ ⪰ 0, Tr ρ = 1} then minimizes the moment residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::moments::{index_list, MomentTable};
use super::{normal_ordered, SingleModeState};
use crate::error::{Error, Result};

const MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub state: SingleModeState,
    /// ‖A vec ρ − m‖ of the returned state
    pub residual: f64,
    /// residual of the unconstrained least-squares estimate
    pub ls_residual: f64,
    /// residual right after eigenvalue clipping
    pub clipped_residual: f64,
    /// total weight of the negative eigenvalues removed by clipping
    pub clipped_mass: f64,
    pub iterations: usize,
    /// residual far above the statistical noise of the moments
    pub large_residual: bool,
}

fn design(order: usize, n_cut: usize) -> (Vec<(usize, usize)>, DMatrix<C64>) {
    let rows = index_list(order);
    let dim = n_cut * n_cut;
    let mut a = DMatrix::<C64>::zeros(rows.len(), dim);
    for (r, &(n, m)) in rows.iter().enumerate() {
        let op = normal_ordered(n, m, n_cut);
        // Tr(ρ O) = Σᵢⱼ ρᵢⱼ Oⱼᵢ, with vec ρ column-stacked
        for j in 0..n_cut {
            for i in 0..n_cut {
                a[(r, j * n_cut + i)] = op[(j, i)];
            }
        }
    }
    (rows, a)
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Euclidean projection of a real vector onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn rebuild(vecs: &DMatrix<C64>, vals: &[f64]) -> DMatrix<C64> {
    let d = DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&l| C64::new(l, 0.0))));
    hermitize(&(vecs * d * vecs.adjoint()))
}

fn project_physical(m: &DMatrix<C64>) -> DMatrix<C64> {
    let e = SymmetricEigen::new(hermitize(m));
    let vals: Vec<f64> = e.eigenvalues.iter().cloned().collect();
    rebuild(&e.eigenvectors, &project_simplex(&vals))
}

fn residual(a: &DMatrix<C64>, rho: &DMatrix<C64>, b: &DVector<C64>) -> f64 {
    let x = DVector::from_column_slice(rho.as_slice());
    (a * x - b).norm()
}

/// Estimate a physical state on Fock{0..n_cut−1} from `moments`.
pub fn reconstruct(moments: &MomentTable, n_cut: usize) -> Result<Reconstruction> {
    if n_cut < 2 {
        return Err(Error::domain("reconstruction needs n_cut >= 2"));
    }
    let (rows, a) = design(moments.order, n_cut);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&(n, m)| moments.get(n, m)));
    if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("moment table contains non-finite entries"));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x_ls = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|e| Error::Degenerate(format!("least-squares solve failed: {e}")))?;
    let rho_ls = hermitize(&DMatrix::from_column_slice(n_cut, n_cut, x_ls.as_slice()));
    let ls_residual = residual(&a, &rho_ls, &b);

    // one-shot clip: drop negative eigenvalues and renormalize
    let e = SymmetricEigen::new(rho_ls.clone());
    let clipped_mass: f64 = e.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let pos: Vec<f64> = e.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let tot: f64 = pos.iter().sum();
    let rho_clip = if tot > 0.0 {
        rebuild(&e.eigenvectors, &pos.iter().map(|l| l / tot).collect::<Vec<_>>())
    } else {
        project_physical(&rho_ls)
    };
    let clipped_residual = residual(&a, &rho_clip, &b);

    // accelerated projected gradient on ½‖A vec ρ − b‖²
    let lip = smax * smax;
    let ah = a.adjoint();
    let mut x = rho_clip.clone();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut best = (clipped_residual, rho_clip.clone());
    let mut iterations = 0;
    for it in 0..MAX_ITERS {
        iterations = it + 1;
        let r = &a * DVector::from_column_slice(y.as_slice()) - &b;
        let g = hermitize(&DMatrix::from_column_slice(n_cut, n_cut, (&ah * r).as_slice()));
        let x_new = project_physical(&(&y - g * C64::new(1.0 / lip, 0.0)));
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let step = (&x_new - &x).norm();
        y = &x_new + (&x_new - &x) * C64::new((t - 1.0) / t_new, 0.0);
        x = x_new;
        t = t_new;
        let res = residual(&a, &x, &b);
        if res < best.0 {
            best = (res, x.clone());
        }
        if step < 1e-13 {
            break;
        }
    }
    let (res, rho) = best;
    let noise_scale = rows.iter().map(|&(n, m)| moments.err(n, m).powi(2)).sum::<f64>().sqrt();
    let state = SingleModeState { rho };
    state.validate()?;
    Ok(Reconstruction {
        state,
        residual: res,
        ls_residual,
        clipped_residual,
        clipped_mass,
        iterations,
        large_residual: res > 5.0 * noise_scale + 1e-6,
    })
}
