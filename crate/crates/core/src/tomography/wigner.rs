//! Wigner functions from the Fock-basis Laguerre expansion, with the
//! convention ∫W d²α = 1 and W(0) = (2/π)Σ(−1)ⁿρₙₙ.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::SingleModeState;
use crate::error::{Error, Result};

/// Generalized Laguerre polynomial L_n^{(k)}(x).
fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut l0 = 1.0;
    if n == 0 {
        return l0;
    }
    let mut l1 = 1.0 + k - x;
    for i in 1..n {
        let i_f = i as f64;
        let l2 = ((2.0 * i_f + 1.0 + k - x) * l1 - (i_f + k) * l0) / (i_f + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// W(α) for the operator |m⟩⟨n| with m ≥ n.
fn w_element(m: usize, n: usize, alpha: C64) -> C64 {
    let r2 = alpha.norm_sqr();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let pref = (0.5 * (ln_factorial(n) - ln_factorial(m))).exp();
    let pw = (alpha.conj() * 2.0).powu((m - n) as u32);
    pw * (2.0 / PI * sign * pref * (-2.0 * r2).exp() * laguerre(n, m - n, 4.0 * r2))
}

/// Wigner function at a single phase-space point.
pub fn wigner_at(state: &SingleModeState, alpha: C64) -> f64 {
    let d = state.n_cut();
    let mut acc = 0.0;
    for m in 0..d {
        acc += state.rho[(m, m)].re * w_element(m, m, alpha).re;
        for n in 0..m {
            acc += 2.0 * (state.rho[(m, n)] * w_element(m, n, alpha)).re;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// half-width of the square grid in |α| units
    pub extent: f64,
    /// points per axis
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { extent: 3.0, resolution: 121 }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        let n = self.resolution;
        (0..n).map(|k| -self.extent + 2.0 * self.extent * k as f64 / (n - 1) as f64).collect()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.extent / (self.resolution - 1) as f64
    }
}

/// Row-major grid: row index runs over Im α, column over Re α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.spec.resolution + col]
    }

    /// Riemann sum ΣW·Δx·Δy.
    pub fn integral(&self) -> f64 {
        let h = self.spec.step();
        self.values.iter().sum::<f64>() * h * h
    }

    /// Minimum value and its location α.
    pub fn min(&self) -> (f64, C64) {
        let axis = self.spec.axis();
        let n = self.spec.resolution;
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k, *v))
            .expect("grid is nonempty");
        (v, C64::new(axis[k % n], axis[k / n]))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// CSV matrix preceded by a `# extent=…,resolution=…` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# extent={},resolution={},rows=im,cols=re", self.spec.extent, self.spec.resolution)?;
        let n = self.spec.resolution;
        for r in 0..n {
            let line: Vec<String> = (0..n).map(|c| format!("{:.10e}", self.at(r, c))).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Evaluate W on a square grid.
pub fn wigner(state: &SingleModeState, spec: GridSpec) -> Result<WignerGrid> {
    if spec.resolution < 2 || !(spec.extent > 0.0) {
        return Err(Error::domain("Wigner grid needs extent > 0 and at least 2 points per axis"));
    }
    let axis = spec.axis();
    let mut values = Vec::with_capacity(spec.resolution * spec.resolution);
    for &y in &axis {
        for &x in &axis {
            values.push(wigner_at(state, C64::new(x, y)));
        }
    }
    Ok(WignerGrid { spec, values })
}
