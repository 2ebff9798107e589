use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled itinerant mode: complex field amplitude `amp` (√s⁻¹)
/// and photon flux `pop` (s⁻¹). `Σ pop·dt` is the photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalEnvelope {
    pub t0: f64,
    pub dt: f64,
    pub amp: Vec<C64>,
    pub pop: Vec<f64>,
}

/// Column exported by [`TemporalEnvelope::write_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeQuantity {
    /// photon flux, s⁻¹
    Flux,
    /// |amp|², s⁻¹
    CoherentFlux,
    AmpRe,
    AmpIm,
}

impl EnvelopeQuantity {
    fn header(self) -> &'static str {
        match self {
            EnvelopeQuantity::Flux => "photon_flux_per_s",
            EnvelopeQuantity::CoherentFlux => "coherent_flux_per_s",
            EnvelopeQuantity::AmpRe => "amp_re_per_sqrt_s",
            EnvelopeQuantity::AmpIm => "amp_im_per_sqrt_s",
        }
    }
}

impl TemporalEnvelope {
    pub fn zeros(t0: f64, dt: f64, n: usize) -> Self {
        TemporalEnvelope { t0, dt, amp: vec![C64::new(0.0, 0.0); n], pop: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.pop.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pop.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Σ pop·dt over the whole record.
    pub fn photon_number(&self) -> f64 {
        self.pop.iter().sum::<f64>() * self.dt
    }

    /// Σ |amp|²·dt, the coherent part of the photon number.
    pub fn coherent_number(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn peak_flux(&self) -> f64 {
        self.pop.iter().cloned().fold(0.0, f64::max)
    }

    /// Multiply the power by `gain` (amplitudes by √gain).
    pub fn attenuated(&self, gain: f64) -> Self {
        let s = gain.sqrt();
        TemporalEnvelope {
            t0: self.t0,
            dt: self.dt,
            amp: self.amp.iter().map(|a| a * s).collect(),
            pop: self.pop.iter().map(|p| p * gain).collect(),
        }
    }

    /// Mode function with Σ|u|²·dt = 1: √pop carrying the phase of `amp`
    /// where the coherent part is resolvable.
    pub fn mode_function(&self) -> Result<Vec<C64>> {
        let norm = self.photon_number();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("mode function of an empty envelope".into()));
        }
        let amp_floor = 1e-9 * self.amp.iter().map(|a| a.norm()).fold(0.0, f64::max).max(1e-300);
        Ok(self
            .pop
            .iter()
            .zip(&self.amp)
            .map(|(&p, a)| {
                let mag = (p.max(0.0) / norm).sqrt();
                if a.norm() > amp_floor { C64::from_polar(mag, a.arg()) } else { C64::new(mag, 0.0) }
            })
            .collect())
    }

    /// Check pop ≥ 0, photon number ≤ 1 and |amp|² ≤ pop within `tol`
    /// (relative to the peak flux).
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.amp.len() != self.pop.len() {
            return Err(Error::Format("amp and pop lengths differ".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("envelope dt must be positive"));
        }
        let scale = self.peak_flux().max(1e-300);
        for (k, (&p, a)) in self.pop.iter().zip(&self.amp).enumerate() {
            if p < -tol * scale {
                return Err(Error::domain(format!("negative flux at sample {k}")));
            }
            if a.norm_sqr() > p + tol * scale {
                return Err(Error::domain(format!("|amp|² exceeds flux at sample {k}")));
            }
        }
        if self.photon_number() > 1.0 + 1e-6 {
            return Err(Error::domain(format!("photon number {} exceeds 1", self.photon_number())));
        }
        Ok(())
    }

    /// Two-column CSV `(t_s, quantity)`.
    pub fn write_csv<W: Write>(&self, w: W, quantity: EnvelopeQuantity) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_s", quantity.header()])?;
        for k in 0..self.len() {
            let v = match quantity {
                EnvelopeQuantity::Flux => self.pop[k],
                EnvelopeQuantity::CoherentFlux => self.amp[k].norm_sqr(),
                EnvelopeQuantity::AmpRe => self.amp[k].re,
                EnvelopeQuantity::AmpIm => self.amp[k].im,
            };
            wr.write_record([format!("{:.12e}", self.time(k)), format!("{v:.12e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}
