//! Field moments ⟨S*ⁿSᵐ⟩ with jackknife errors and deconvolution of the
//! added-noise mode.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::shots::IQShotBatch;
use crate::error::{Error, Result};

/// Jackknife blocks per batch.
pub const JACKKNIFE_BLOCKS: usize = 20;

/// Moments indexed by (n, m) with n + m ≤ order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub order: usize,
    /// row-major (order+1)², zero where n + m > order
    pub values: Vec<C64>,
    /// jackknife standard error of the real and imaginary parts combined
    pub stderr: Vec<f64>,
    /// leave-one-block-out estimates, one table per block
    #[serde(skip)]
    pub replicates: Vec<Vec<C64>>,
}

impl MomentTable {
    fn idx(order: usize, n: usize, m: usize) -> usize {
        n * (order + 1) + m
    }

    pub fn from_fn<F: Fn(usize, usize) -> C64>(order: usize, f: F) -> Self {
        let size = (order + 1) * (order + 1);
        let mut values = vec![C64::new(0.0, 0.0); size];
        for n in 0..=order {
            for m in 0..=(order - n) {
                values[Self::idx(order, n, m)] = f(n, m);
            }
        }
        MomentTable { order, values, stderr: vec![0.0; size], replicates: Vec::new() }
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        assert!(n + m <= self.order, "moment ({n},{m}) beyond order {}", self.order);
        self.values[Self::idx(self.order, n, m)]
    }

    pub fn err(&self, n: usize, m: usize) -> f64 {
        assert!(n + m <= self.order);
        self.stderr[Self::idx(self.order, n, m)]
    }

    /// (n, m) pairs with n + m ≤ order, ordered by total degree.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        index_list(self.order)
    }

    /// Check m₀₀ = 1 and mₘₙ = conj(mₙₘ).
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if (self.get(0, 0) - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::domain("moment (0,0) differs from 1"));
        }
        for (n, m) in self.indices() {
            if (self.get(m, n) - self.get(n, m).conj()).norm() > tol {
                return Err(Error::domain(format!("moments ({n},{m}) and ({m},{n}) are not conjugate")));
            }
        }
        Ok(())
    }
}

pub(crate) fn index_list(order: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for deg in 0..=order {
        for n in 0..=deg {
            out.push((n, deg - n));
        }
    }
    out
}

fn moments_of(shots: &[C64], order: usize) -> Vec<C64> {
    let size = (order + 1) * (order + 1);
    let mut acc = vec![C64::new(0.0, 0.0); size];
    let mut pc = vec![C64::new(1.0, 0.0); order + 1];
    let mut p = vec![C64::new(1.0, 0.0); order + 1];
    for &s in shots {
        for k in 1..=order {
            p[k] = p[k - 1] * s;
            pc[k] = p[k].conj();
        }
        for n in 0..=order {
            for m in 0..=(order - n) {
                acc[n * (order + 1) + m] += pc[n] * p[m];
            }
        }
    }
    acc
}

fn jackknife_stderr(full: &[C64], reps: &[Vec<C64>]) -> Vec<f64> {
    let b = reps.len() as f64;
    (0..full.len())
        .map(|i| {
            let mean: C64 = reps.iter().map(|r| r[i]).sum::<C64>() / b;
            let ss: f64 = reps.iter().map(|r| (r[i] - mean).norm_sqr()).sum();
            ((b - 1.0) / b * ss).sqrt()
        })
        .collect()
}

/// Empirical ⟨S*ⁿSᵐ⟩ to `order` with block-jackknife errors.
pub fn raw_moments(batch: &IQShotBatch, order: usize) -> Result<MomentTable> {
    batch.validate()?;
    let n = batch.len();
    if n < 2 * JACKKNIFE_BLOCKS {
        return Err(Error::Degenerate(format!("{n} shots are too few for moment estimation")));
    }
    let bounds: Vec<usize> = (0..=JACKKNIFE_BLOCKS).map(|b| b * n / JACKKNIFE_BLOCKS).collect();
    let block_sums: Vec<Vec<C64>> = (0..JACKKNIFE_BLOCKS)
        .map(|b| moments_of(&batch.shots[bounds[b]..bounds[b + 1]], order))
        .collect();
    let size = (order + 1) * (order + 1);
    let mut total = vec![C64::new(0.0, 0.0); size];
    for bs in &block_sums {
        for i in 0..size {
            total[i] += bs[i];
        }
    }
    let values: Vec<C64> = total.iter().map(|t| t / n as f64).collect();
    let replicates: Vec<Vec<C64>> = (0..JACKKNIFE_BLOCKS)
        .map(|b| {
            let count = (n - (bounds[b + 1] - bounds[b])) as f64;
            (0..size).map(|i| (total[i] - block_sums[b][i]) / count).collect()
        })
        .collect();
    let stderr = jackknife_stderr(&values, &replicates);
    let mut table = MomentTable { order, values, stderr, replicates };
    // entries beyond the order stay zero
    for nn in 0..=order {
        for mm in 0..=order {
            if nn + mm > order {
                let i = nn * (order + 1) + mm;
                table.values[i] = C64::new(0.0, 0.0);
                table.stderr[i] = 0.0;
                for r in table.replicates.iter_mut() {
                    r[i] = C64::new(0.0, 0.0);
                }
            }
        }
    }
    Ok(table)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Solve ⟨S*ⁿSᵐ⟩ = Σ C(n,i)C(m,j)⟨a†ⁱaʲ⟩⟨hⁿ⁻ⁱh†ᵐ⁻ʲ⟩ for the signal moments,
/// taking the noise moments from the vacuum reference.
fn solve(sig: &[C64], noise: &[C64], order: usize) -> Vec<C64> {
    let w = order + 1;
    let mut a = vec![C64::new(0.0, 0.0); w * w];
    for (n, m) in index_list(order) {
        let mut acc = sig[n * w + m];
        for i in 0..=n {
            for j in 0..=m {
                if i == n && j == m {
                    continue;
                }
                acc -= a[i * w + j] * noise[(n - i) * w + (m - j)] * (binom(n, i) * binom(m, j));
            }
        }
        a[n * w + m] = acc;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deconvolved {
    pub table: MomentTable,
    /// largest ratio of deconvolved to raw standard error
    pub noise_amplification: f64,
    pub warnings: Vec<String>,
}

/// Signal-mode moments ⟨a†ⁿaᵐ⟩ from signal and vacuum-reference tables.
pub fn deconvolve(signal: &MomentTable, reference: &MomentTable, order: usize) -> Result<Deconvolved> {
    if signal.order < order || reference.order < order {
        return Err(Error::domain(format!("moment tables must reach order {order}")));
    }
    let resize = |t: &MomentTable, v: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); (order + 1) * (order + 1)];
        for (n, m) in index_list(order) {
            out[n * (order + 1) + m] = v[n * (t.order + 1) + m];
        }
        out
    };
    let sig = resize(signal, &signal.values);
    let refm = resize(reference, &reference.values);
    let values = solve(&sig, &refm, order);
    let size = values.len();

    let mut replicates = Vec::new();
    let mut stderr = vec![0.0; size];
    if !signal.replicates.is_empty() && signal.replicates.len() == reference.replicates.len() {
        replicates = signal
            .replicates
            .iter()
            .zip(&reference.replicates)
            .map(|(s, r)| solve(&resize(signal, s), &resize(reference, r), order))
            .collect();
        stderr = jackknife_stderr(&values, &replicates);
    }

    let mut warnings = Vec::new();
    let mut amplification: f64 = 0.0;
    for (n, m) in index_list(order) {
        let raw = signal.err(n, m).max(1e-300);
        let i = n * (order + 1) + m;
        if stderr[i] > 0.0 {
            amplification = amplification.max(stderr[i] / raw);
        }
        if n + m > 0 && stderr[i] > values[i].norm().max(1.0) {
            warnings.push(format!("moment ({n},{m}) has standard error {:.3} exceeding its scale", stderr[i]));
        }
    }
    let mut table = MomentTable { order, values, stderr, replicates };
    table.values[0] = C64::new(1.0, 0.0);
    Ok(Deconvolved { table, noise_amplification: amplification, warnings })
}
