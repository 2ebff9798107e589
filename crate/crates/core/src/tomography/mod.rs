//! Heterodyne tomography of a single itinerant mode: shot synthesis, field
//! moments, noise deconvolution, state reconstruction, Wigner functions.

pub mod moments;
pub mod reconstruct;
pub mod shots;
pub mod wigner;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use moments::{deconvolve, raw_moments, Deconvolved, MomentTable};
pub use reconstruct::{reconstruct, Reconstruction};
pub use shots::{synthesize_shots, IQShotBatch, ShotLabel};
pub use wigner::{wigner, wigner_at, GridSpec, WignerGrid};

use crate::error::{Error, Result};

pub const DEFAULT_N_CUT: usize = 5;
pub const DEFAULT_ORDER: usize = 4;

/// Truncated annihilation operator on Fock{0..n−1}.
pub fn annihilation(n: usize) -> DMatrix<C64> {
    crate::qubit::ops::annihilation(n)
}

/// a†ⁿ aᵐ on Fock{0..n_cut−1}. Exact on the truncated space because the
/// lowering part acts first.
pub fn normal_ordered(n: usize, m: usize, n_cut: usize) -> DMatrix<C64> {
    let a = annihilation(n_cut);
    let ad = a.adjoint();
    let mut op = DMatrix::<C64>::identity(n_cut, n_cut);
    for _ in 0..m {
        op = &a * op;
    }
    for _ in 0..n {
        op = &ad * op;
    }
    op
}

/// Density matrix of one bosonic mode on Fock{0..n_cut−1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleModeState {
    pub rho: DMatrix<C64>,
}

impl SingleModeState {
    /// Validated state (Hermitian 1e-10, trace 1e-9, eigenvalues ≥ −1e-9).
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        let s = SingleModeState { rho };
        s.validate()?;
        Ok(s)
    }

    pub fn n_cut(&self) -> usize {
        self.rho.nrows()
    }

    pub fn fock(n: usize, n_cut: usize) -> Result<Self> {
        if n >= n_cut {
            return Err(Error::domain(format!("Fock level {n} outside truncation {n_cut}")));
        }
        let mut rho = DMatrix::zeros(n_cut, n_cut);
        rho[(n, n)] = C64::new(1.0, 0.0);
        Ok(SingleModeState { rho })
    }

    pub fn vacuum(n_cut: usize) -> Self {
        Self::fock(0, n_cut).expect("n_cut >= 1")
    }

    /// Pure state from (unnormalized) Fock amplitudes.
    pub fn pure(coeffs: &[C64], n_cut: usize) -> Result<Self> {
        if coeffs.len() > n_cut {
            return Err(Error::domain("more amplitudes than the truncation allows"));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::domain("zero state vector"));
        }
        let mut psi = nalgebra::DVector::<C64>::zeros(n_cut);
        for (k, c) in coeffs.iter().enumerate() {
            psi[k] = c / norm;
        }
        Ok(SingleModeState { rho: &psi * psi.adjoint() })
    }

    /// Coherent state |β⟩ truncated and renormalized.
    pub fn coherent(beta: C64, n_cut: usize) -> Result<Self> {
        let mut c = Vec::with_capacity(n_cut);
        let mut term = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..n_cut {
            if n > 0 {
                term = term * beta / (n as f64).sqrt();
            }
            c.push(term);
        }
        Self::pure(&c, n_cut)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        let e = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
        idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
        let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.n_cut(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.nrows() != self.rho.ncols() || self.rho.nrows() == 0 {
            return Err(Error::domain("density matrix must be square and nonempty"));
        }
        let herm = self.hermiticity_error();
        let tr = self.rho.trace();
        let (vals, _) = self.eigen();
        let min = vals.first().copied().unwrap_or(0.0);
        if herm > 1e-10 || (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 || min < -1e-9 {
            return Err(Error::domain(format!(
                "non-physical state (herm {herm:.2e}, trace {tr}, min eig {min:.2e})"
            )));
        }
        Ok(())
    }

    /// Tr(ρ O).
    pub fn expect(&self, op: &DMatrix<C64>) -> C64 {
        (&self.rho * op).trace()
    }

    /// Exact ⟨a†ⁿaᵐ⟩.
    pub fn moment(&self, n: usize, m: usize) -> C64 {
        self.expect(&normal_ordered(n, m, self.n_cut()))
    }

    pub fn photon_number(&self) -> f64 {
        self.moment(1, 1).re
    }

    pub fn field_mean(&self) -> C64 {
        self.moment(0, 1)
    }

    /// Exact moment table to order `k`.
    pub fn moment_table(&self, k: usize) -> MomentTable {
        MomentTable::from_fn(k, |n, m| self.moment(n, m))
    }

    pub fn population(&self, n: usize) -> f64 {
        if n < self.n_cut() { self.rho[(n, n)].re } else { 0.0 }
    }
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = SymmetricEigen::new(h);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

/// Uhlmann fidelity (Tr√(√ρ σ √ρ))².
pub fn fidelity(rho: &SingleModeState, sigma: &SingleModeState) -> Result<f64> {
    if rho.n_cut() != sigma.n_cut() {
        return Err(Error::domain("fidelity of states with different truncations"));
    }
    let s = psd_sqrt(&rho.rho);
    let inner = &s * &sigma.rho * &s;
    let h = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let vals = SymmetricEigen::new(h).eigenvalues;
    // rounding noise on null directions would otherwise contribute √ε each
    let floor = 1e-12 * vals.iter().cloned().fold(0.0, f64::max);
    let tr: f64 = vals.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
