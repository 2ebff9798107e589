//! Optical side of the transducer: Fabry–Perot filter banks, the optical
//! noise floor, pump-heating of the microwave mode, and the detection
//! efficiency budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_unit_interval, Error, Result};

/// Single-mode Fabry–Perot filter cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub fsr_hz: f64,
    /// full width at half maximum
    pub linewidth_hz: f64,
    pub peak_transmission: f64,
}

impl FilterSpec {
    pub fn new(fsr_hz: f64, linewidth_hz: f64, peak_transmission: f64) -> Result<Self> {
        let f = FilterSpec { fsr_hz, linewidth_hz, peak_transmission };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth_hz > 0.0 && self.linewidth_hz < self.fsr_hz && self.fsr_hz.is_finite()) {
            return Err(Error::domain(format!(
                "filter needs 0 < linewidth < FSR, got {} / {}",
                self.linewidth_hz, self.fsr_hz
            )));
        }
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return Err(Error::domain(format!("peak transmission must lie in (0, 1], got {}", self.peak_transmission)));
        }
        Ok(())
    }

    pub fn finesse(&self) -> f64 {
        self.fsr_hz / self.linewidth_hz
    }
}

/// Power transmission at `f_offset_hz` from the filter resonance.
pub fn airy_transmission(f_offset_hz: f64, spec: &FilterSpec) -> Result<f64> {
    if !f_offset_hz.is_finite() {
        return Err(Error::domain("filter offset must be finite"));
    }
    spec.validate()?;
    let c = 2.0 * spec.finesse() / PI;
    let s = (PI * f_offset_hz / spec.fsr_hz).sin();
    Ok(spec.peak_transmission / (1.0 + c * c * s * s))
}

/// On-resonance to off-resonance transmission ratio in dB.
pub fn suppression_db(f_offset_hz: f64, spec: &FilterSpec) -> Result<f64> {
    let t = airy_transmission(f_offset_hz, spec)?;
    Ok(10.0 * (spec.peak_transmission / t).log10())
}

/// Total suppression of independent cascaded cavities.
pub fn cascade_suppression(filters: &[FilterSpec], f_offset_hz: f64) -> Result<f64> {
    if filters.is_empty() {
        return Err(Error::domain("cascade needs at least one filter"));
    }
    filters.iter().map(|f| suppression_db(f_offset_hz, f)).sum()
}

/// Filter cavities cleaning the pump before the transducer.
pub fn reference_pump_bank() -> Vec<FilterSpec> {
    // 2.1 dB total insertion loss spread over three cavities
    let t = 10f64.powf(-0.21 / 3.0);
    vec![
        FilterSpec { fsr_hz: 16.8e9, linewidth_hz: 54.8e6, peak_transmission: t },
        FilterSpec { fsr_hz: 15.0e9, linewidth_hz: 48.8e6, peak_transmission: t },
        FilterSpec { fsr_hz: 15.9e9, linewidth_hz: 55.0e6, peak_transmission: t },
    ]
}

/// Filter cavities selecting the converted signal.
pub fn reference_signal_bank() -> Vec<FilterSpec> {
    // 3.6 dB total insertion loss spread over four cavities
    let t = 10f64.powf(-0.36 / 4.0);
    vec![
        FilterSpec { fsr_hz: 16.8e9, linewidth_hz: 54.8e6, peak_transmission: t },
        FilterSpec { fsr_hz: 15.0e9, linewidth_hz: 48.8e6, peak_transmission: t },
        FilterSpec { fsr_hz: 15.9e9, linewidth_hz: 55.0e6, peak_transmission: t },
        FilterSpec { fsr_hz: 14.2e9, linewidth_hz: 55.0e6, peak_transmission: t },
    ]
}

/// Pulse-synchronous optical noise: detector dark counts plus inelastic
/// scattering of the pump in the fiber, which scales with length and power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalNoiseModel {
    pub dark_per_pulse: f64,
    /// counts per pulse per metre per watt
    pub inelastic_coeff: f64,
    pub fiber_length_m: f64,
    pub peak_power_w: f64,
    pub gate_len_s: f64,
}

impl OpticalNoiseModel {
    /// Dark 0.6e-6 and inelastic 2.0e-6 counts per pulse at 20 m of fiber
    /// and 1.22 mW peak pump power.
    pub fn reference() -> Self {
        let length = 20.0;
        let power = 1.22e-3;
        OpticalNoiseModel {
            dark_per_pulse: 0.6e-6,
            inelastic_coeff: 2.0e-6 / (length * power),
            fiber_length_m: length,
            peak_power_w: power,
            gate_len_s: 200e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dark_per_pulse", self.dark_per_pulse),
            ("inelastic_coeff", self.inelastic_coeff),
            ("fiber_length_m", self.fiber_length_m),
            ("peak_power_w", self.peak_power_w),
            ("gate_len_s", self.gate_len_s),
        ] {
            ensure_nonnegative(name, v)?;
        }
        Ok(())
    }
}

pub fn optical_noise_per_pulse(model: &OpticalNoiseModel) -> Result<f64> {
    model.validate()?;
    Ok(model.dark_per_pulse + model.inelastic_coeff * model.fiber_length_m * model.peak_power_w)
}

/// Piecewise power law N_e = a·P^b for the pump-heated microwave mode, with
/// separate branches below and above `p_cross_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalOccupancyModel {
    pub amp_low: f64,
    pub exp_low: f64,
    pub amp_high: f64,
    pub exp_high: f64,
    pub p_cross_w: f64,
}

impl ThermalOccupancyModel {
    /// Fixes each branch amplitude so that it passes through one anchor
    /// (power in W, occupancy). The branches are independent fits, so the
    /// model may jump at the crossover.
    pub fn anchored(low: (f64, f64), exp_low: f64, high: (f64, f64), exp_high: f64, p_cross_w: f64) -> Result<Self> {
        for (p, n) in [low, high] {
            if !(p > 0.0) {
                return Err(Error::domain(format!("anchor power must be > 0, got {p}")));
            }
            ensure_nonnegative("anchor occupancy", n)?;
        }
        let m = ThermalOccupancyModel {
            amp_low: low.1 / low.0.powf(exp_low),
            exp_low,
            amp_high: high.1 / high.0.powf(exp_high),
            exp_high,
            p_cross_w,
        };
        m.validate()?;
        Ok(m)
    }

    /// 0.005 quanta at 0.2046 µW and 0.06 quanta at 4.093 µW, exponents
    /// 1.06 and 0.43, crossover 0.6 µW.
    pub fn reference() -> Self {
        Self::anchored((0.2046e-6, 0.005), 1.06, (4.093e-6, 0.06), 0.43, 0.6e-6).expect("reference anchors are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exp_low > 0.0 && self.exp_high > 0.0) {
            return Err(Error::domain("thermal power-law exponents must be > 0"));
        }
        ensure_nonnegative("amp_low", self.amp_low)?;
        ensure_nonnegative("amp_high", self.amp_high)?;
        ensure_nonnegative("p_cross_w", self.p_cross_w)?;
        Ok(())
    }
}

pub fn thermal_occupancy(p_diss_w: f64, model: &ThermalOccupancyModel) -> Result<f64> {
    ensure_nonnegative("p_diss", p_diss_w)?;
    model.validate()?;
    Ok(if p_diss_w <= model.p_cross_w {
        model.amp_low * p_diss_w.powf(model.exp_low)
    } else {
        model.amp_high * p_diss_w.powf(model.exp_high)
    })
}

/// Factors of the single-photon detection efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBudget {
    /// share of converted photons routed to the counting path
    pub path_fraction: f64,
    pub optical_chain_db: f64,
    pub temporal_mismatch: f64,
}

impl Default for DetectionBudget {
    fn default() -> Self {
        DetectionBudget { path_fraction: 0.5, optical_chain_db: 6.7, temporal_mismatch: 0.5 }
    }
}

/// η_det = path · η_ext · 10^(−dB/10) · mismatch.
pub fn detection_efficiency_budget(budget: &DetectionBudget, eta_ext: f64) -> Result<f64> {
    for (name, v) in [("path_fraction", budget.path_fraction), ("temporal_mismatch", budget.temporal_mismatch)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    ensure_unit_interval("eta_ext", eta_ext)?;
    ensure_nonnegative("optical_chain_db", budget.optical_chain_db)?;
    Ok(budget.path_fraction * eta_ext * 10f64.powf(-budget.optical_chain_db / 10.0) * budget.temporal_mismatch)
}

/// Efficiency per intracavity microwave quantum, η_det / N_cav.
pub fn cavity_referred_efficiency(eta_det: f64, n_cav: f64) -> Result<f64> {
    if !(n_cav > 0.0) {
        return Err(Error::domain(format!("intracavity photon number must be > 0, got {n_cav}")));
    }
    ensure_unit_interval("eta_det", eta_det)?;
    Ok(eta_det / n_cav)
}
