//! Device parameters and closed-form figures of merit of the electro-optic
//! transducer.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_unit_interval, Error, Result};

/// Free spectral range of the optical whispering-gallery resonator.
pub const OPTICAL_FSR_HZ: f64 = 8.9006e9;

/// Static transducer parameters. Linewidths and couplings are stored as
/// ordinary frequencies (value / 2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub f_o_hz: f64,
    pub kappa_o_hz: f64,
    pub eta_o: f64,
    pub g0_hz: f64,
    pub lambda_sq: f64,
    pub f_e_hz: f64,
    pub kappa_eo_hz: f64,
    pub eta_e: f64,
    pub n_p: f64,
    pub b_c_hz: f64,
    pub p_p_w: f64,
    pub pulse_len_s: f64,
}

/// Cooperativity that fixes the default pump photon number.
pub const DEFAULT_COOPERATIVITY: f64 = 4.1e-4;

impl DeviceParams {
    /// Measured device with the pump photon number chosen to reproduce the
    /// reported cooperativity.
    pub fn reference() -> Self {
        let mut p = DeviceParams {
            f_o_hz: 193e12,
            kappa_o_hz: 11.4e6,
            eta_o: 0.68,
            g0_hz: 2.9,
            lambda_sq: 0.44,
            f_e_hz: 8.9006e9,
            kappa_eo_hz: 1.4e6,
            eta_e: 0.44,
            n_p: 0.0,
            b_c_hz: 1.3e6,
            p_p_w: 1.22e-3,
            pulse_len_s: 200e-9,
        };
        p.n_p = pump_photons_for(DEFAULT_COOPERATIVITY, p.g0_hz, p.kappa_eo_hz, p.kappa_o_hz)
            .expect("reference rates are positive");
        p
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_o", self.eta_o), ("lambda_sq", self.lambda_sq), ("eta_e", self.eta_e)] {
            ensure_unit_interval(name, v)?;
        }
        for (name, v) in [
            ("f_o_hz", self.f_o_hz),
            ("kappa_o_hz", self.kappa_o_hz),
            ("g0_hz", self.g0_hz),
            ("f_e_hz", self.f_e_hz),
            ("kappa_eo_hz", self.kappa_eo_hz),
            ("n_p", self.n_p),
            ("b_c_hz", self.b_c_hz),
            ("p_p_w", self.p_p_w),
            ("pulse_len_s", self.pulse_len_s),
        ] {
            ensure_nonnegative(name, v)?;
        }
        Ok(())
    }

    /// True when the microwave mode sits within 1% of the optical FSR.
    pub fn frequency_matched(&self) -> bool {
        ((self.f_e_hz - OPTICAL_FSR_HZ) / OPTICAL_FSR_HZ).abs() <= 0.01
    }

    /// Pump duty cycle at a given repetition rate.
    pub fn duty(&self, rate_hz: f64) -> Result<f64> {
        ensure_nonnegative("rate_hz", rate_hz)?;
        let d = rate_hz * self.pulse_len_s;
        if d > 1.0 {
            return Err(Error::domain(format!("duty cycle {d} exceeds 1 at {rate_hz} Hz")));
        }
        Ok(d)
    }

    /// Evaluates every figure of merit at one repetition rate and microwave
    /// output noise `n_e`.
    pub fn derived(&self, rate_hz: f64, n_e: f64) -> Result<DerivedFigures> {
        self.validate()?;
        let c = cooperativity(self.g0_hz, self.n_p, self.kappa_eo_hz, self.kappa_o_hz)?;
        let eta_int = internal_efficiency(c)?;
        let eta_ext = external_efficiency(eta_int, self.eta_e, self.eta_o, self.lambda_sq)?;
        let duty = self.duty(rate_hz)?;
        let n_add = added_noise_referred(n_e, self.eta_e)?;
        let theta = throughput(self.b_c_hz, duty, eta_ext)?;
        let cap = capacity_upper_bound(theta, n_add)?;
        Ok(DerivedFigures {
            cooperativity: c,
            eta_int,
            eta_ext,
            n_add,
            theta_hz: theta,
            c_ub_hz: cap.value,
            quantum_enabled: cap.quantum_enabled,
        })
    }
}

/// Transmon-cavity parameters of the photon source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCavityParams {
    pub f_g_hz: f64,
    pub chi_hz: f64,
    pub kappa_hz: f64,
    pub kappa_e1_hz: f64,
    pub kappa_e2_hz: f64,
    pub t1_s: f64,
    pub t_phi_s: f64,
}

impl QubitCavityParams {
    pub fn reference() -> Self {
        QubitCavityParams {
            f_g_hz: 8.9076e9,
            chi_hz: -3.5e6,
            kappa_hz: 1.43e6,
            kappa_e1_hz: 0.1e6,
            kappa_e2_hz: 1.0e6,
            t1_s: 19e-6,
            t_phi_s: 14e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_hz", self.kappa_hz),
            ("kappa_e1_hz", self.kappa_e1_hz),
            ("kappa_e2_hz", self.kappa_e2_hz),
        ] {
            ensure_nonnegative(name, v)?;
        }
        if self.kappa_e1_hz + self.kappa_e2_hz > self.kappa_hz * (1.0 + 1e-12) {
            return Err(Error::domain("kappa_e1 + kappa_e2 exceeds total kappa"));
        }
        if !(self.t1_s > 0.0) || !(self.t_phi_s > 0.0) {
            return Err(Error::domain("T1 and T_phi must be positive"));
        }
        Ok(())
    }

    /// Cavity energy decay rate in rad/s.
    pub fn kappa_angular(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.kappa_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedFigures {
    pub cooperativity: f64,
    pub eta_int: f64,
    pub eta_ext: f64,
    pub n_add: f64,
    pub theta_hz: f64,
    pub c_ub_hz: f64,
    pub quantum_enabled: bool,
}

/// C = 4 n_p g0² / (κ_e κ_o).
pub fn cooperativity(g0_hz: f64, n_p: f64, kappa_eo_hz: f64, kappa_o_hz: f64) -> Result<f64> {
    for (name, v) in [("g0", g0_hz), ("n_p", n_p), ("kappa_eo", kappa_eo_hz), ("kappa_o", kappa_o_hz)] {
        ensure_nonnegative(name, v)?;
    }
    if n_p == 0.0 || g0_hz == 0.0 {
        return Ok(0.0);
    }
    if kappa_eo_hz == 0.0 || kappa_o_hz == 0.0 {
        return Err(Error::domain("cooperativity diverges for zero linewidth"));
    }
    Ok(4.0 * n_p * g0_hz * g0_hz / (kappa_eo_hz * kappa_o_hz))
}

/// Pump photon number giving cooperativity `c`.
pub fn pump_photons_for(c: f64, g0_hz: f64, kappa_eo_hz: f64, kappa_o_hz: f64) -> Result<f64> {
    ensure_nonnegative("cooperativity", c)?;
    if !(g0_hz > 0.0) {
        return Err(Error::domain("g0 must be positive to invert the cooperativity"));
    }
    Ok(c * kappa_eo_hz * kappa_o_hz / (4.0 * g0_hz * g0_hz))
}

/// η_int = 4C / (1 + C)².
pub fn internal_efficiency(c: f64) -> Result<f64> {
    ensure_nonnegative("cooperativity", c)?;
    if c.is_infinite() {
        return Ok(0.0);
    }
    Ok(4.0 * c / ((1.0 + c) * (1.0 + c)))
}

/// η_ext = Λ² η_e η_o η_int.
pub fn external_efficiency(eta_int: f64, eta_e: f64, eta_o: f64, lambda_sq: f64) -> Result<f64> {
    for (name, v) in [("eta_int", eta_int), ("eta_e", eta_e), ("eta_o", eta_o), ("lambda_sq", lambda_sq)] {
        ensure_unit_interval(name, v)?;
    }
    Ok(lambda_sq * eta_e * eta_o * eta_int)
}

/// Average optical power absorbed by the resonator.
pub fn dissipated_power(p_p_w: f64, lambda_sq: f64, eta_o: f64, duty: f64) -> Result<f64> {
    ensure_nonnegative("p_p", p_p_w)?;
    ensure_unit_interval("lambda_sq", lambda_sq)?;
    ensure_unit_interval("eta_o", eta_o)?;
    ensure_unit_interval("duty", duty)?;
    let r = 1.0 - 2.0 * lambda_sq * eta_o;
    Ok(p_p_w * (1.0 - r * r) * duty)
}

/// Θ = B_c D η_ext.
pub fn throughput(b_c_hz: f64, duty: f64, eta_ext: f64) -> Result<f64> {
    ensure_nonnegative("b_c", b_c_hz)?;
    ensure_unit_interval("duty", duty)?;
    ensure_unit_interval("eta_ext", eta_ext)?;
    Ok(b_c_hz * duty * eta_ext)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub value: f64,
    pub quantum_enabled: bool,
}

/// Upper bound on the quantum channel capacity for added noise `n_add`.
/// Returns zero with `quantum_enabled = false` once `n_add >= 1`.
pub fn capacity_upper_bound(theta_hz: f64, n_add: f64) -> Result<Capacity> {
    ensure_nonnegative("theta", theta_hz)?;
    ensure_nonnegative("n_add", n_add)?;
    if n_add >= 1.0 {
        return Ok(Capacity { value: 0.0, quantum_enabled: false });
    }
    // n ln n -> 0 as n -> 0
    let nlogn = if n_add > 0.0 { n_add * n_add.ln() } else { 0.0 };
    let factor = (1.0 - n_add + nlogn).max(0.0);
    Ok(Capacity {
        value: std::f64::consts::PI * theta_hz / std::f64::consts::LN_2 * factor,
        quantum_enabled: true,
    })
}

/// N_add = N_e / η_e.
pub fn added_noise_referred(n_e: f64, eta_e: f64) -> Result<f64> {
    ensure_nonnegative("n_e", n_e)?;
    if !(eta_e > 0.0 && eta_e <= 1.0) {
        return Err(Error::domain(format!("eta_e must lie in (0, 1], got {eta_e}")));
    }
    Ok(n_e / eta_e)
}

/// Fidelity of a heralded Bell state that succeeds with probability
/// snr / (snr + 1) and is maximally mixed otherwise.
pub fn bell_fidelity(snr: f64, f_rho: f64) -> Result<f64> {
    ensure_nonnegative("snr", snr)?;
    if !(0.25..=1.0).contains(&f_rho) {
        return Err(Error::domain(format!("F_rho must lie in [0.25, 1], got {f_rho}")));
    }
    let p = if snr.is_infinite() { 1.0 } else { snr / (snr + 1.0) };
    Ok(p * f_rho + (1.0 - p) * 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_pump_number_reproduces_cooperativity() {
        let d = DeviceParams::reference();
        // n_p = C κe κo / 4 g0²
        let oracle = 4.1e-4 * 1.4e6 * 11.4e6 / (4.0 * 2.9 * 2.9);
        assert_relative_eq!(d.n_p, oracle, max_relative = 1e-12);
        assert!((d.n_p - 1.95e8).abs() / 1.95e8 < 0.01);
        let c = cooperativity(d.g0_hz, d.n_p, d.kappa_eo_hz, d.kappa_o_hz).unwrap();
        assert_relative_eq!(c, 4.1e-4, max_relative = 1e-12);
    }

    #[test]
    fn reported_efficiencies() {
        let eta_int = internal_efficiency(4.1e-4).unwrap();
        assert!((eta_int - 1.6e-3).abs() / 1.6e-3 < 0.05);
        let eta_ext = external_efficiency(1.64e-3, 0.44, 0.68, 0.44).unwrap();
        assert!((eta_ext - 2.2e-4).abs() / 2.2e-4 < 0.10);
        assert_eq!(external_efficiency(eta_int, 1.0, 1.0, 1.0).unwrap(), eta_int);
        assert_eq!(external_efficiency(eta_int, 0.44, 0.68, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn trivial_limits() {
        assert_eq!(cooperativity(2.9, 0.0, 1.4e6, 11.4e6).unwrap(), 0.0);
        let c1 = cooperativity(2.9, 1e8, 1.4e6, 11.4e6).unwrap();
        let c2 = cooperativity(5.8, 1e8, 1.4e6, 11.4e6).unwrap();
        assert_relative_eq!(c2, 4.0 * c1, max_relative = 1e-14);
        assert_eq!(internal_efficiency(0.0).unwrap(), 0.0);
        assert_eq!(internal_efficiency(1.0).unwrap(), 1.0);
        assert!(cooperativity(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dissipated_power_examples() {
        let p = dissipated_power(1.22e-3, 0.44, 0.68, 4e-3).unwrap();
        let x: f64 = 2.0 * 0.44 * 0.68;
        let oracle = 1.22e-3 * (1.0 - (1.0 - x).powi(2)) * 4e-3;
        assert_relative_eq!(p, oracle, max_relative = 1e-14);
        assert!((p - 4.09e-6).abs() < 0.01e-6);
        assert_eq!(dissipated_power(1.22e-3, 0.44, 0.68, 0.0).unwrap(), 0.0);
        let full = dissipated_power(1.0, 1.0, 0.5, 0.3).unwrap();
        assert_relative_eq!(full, 0.3, max_relative = 1e-15);
    }

    #[test]
    fn throughput_examples() {
        assert_relative_eq!(throughput(1.3e6, 4e-3, 2.2e-4).unwrap(), 1.144, max_relative = 1e-12);
        assert_relative_eq!(throughput(1.3e6, 2e-4, 2.2e-4).unwrap(), 0.0572, max_relative = 1e-12);
        assert_eq!(throughput(1.3e6, 0.0, 2.2e-4).unwrap(), 0.0);
    }

    #[test]
    fn capacity_examples() {
        let c0 = capacity_upper_bound(1.0, 0.0).unwrap();
        assert_relative_eq!(c0.value, std::f64::consts::PI / std::f64::consts::LN_2, max_relative = 1e-15);
        let c = capacity_upper_bound(1.14, 0.12).unwrap();
        assert!((c.value - 3.2).abs() < 0.05, "{}", c.value);
        let c1 = capacity_upper_bound(1.14, 1.0).unwrap();
        assert_eq!(c1.value, 0.0);
        assert!(!c1.quantum_enabled);
        assert!(!capacity_upper_bound(1.0, 3.0).unwrap().quantum_enabled);
    }

    #[test]
    fn added_noise_examples() {
        assert!((added_noise_referred(0.00528, 0.44).unwrap() - 0.012).abs() < 1e-9);
        assert!((added_noise_referred(0.0528, 0.44).unwrap() - 0.12).abs() < 1e-9);
        assert_eq!(added_noise_referred(0.0, 0.44).unwrap(), 0.0);
        assert!(added_noise_referred(0.1, 0.0).is_err());
    }

    #[test]
    fn bell_examples() {
        assert!((bell_fidelity(5.1, 1.0).unwrap() - 0.877).abs() < 5e-4);
        assert_eq!(bell_fidelity(f64::INFINITY, 0.9).unwrap(), 0.9);
        assert_eq!(bell_fidelity(0.0, 0.8).unwrap(), 0.25);
        assert!(bell_fidelity(1.0, 0.2).is_err());
    }

    #[test]
    fn derived_figures_at_twenty_khz() {
        let d = DeviceParams::reference();
        let f = d.derived(20e3, 0.0528).unwrap();
        assert!(f.eta_ext <= f.eta_int);
        assert!((f.theta_hz - 1.14).abs() / 1.14 < 0.03);
        assert!(f.quantum_enabled);
        assert!(d.frequency_matched());
        assert!(d.duty(1e7).is_err());
    }

    proptest! {
        #[test]
        fn eta_int_symmetric_in_inverse_c(c in 1e-6f64..1e6) {
            let a = internal_efficiency(c).unwrap();
            let b = internal_efficiency(1.0 / c).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300) + 1e-300);
            prop_assert!(a <= 1.0);
        }

        #[test]
        fn capacity_linear_and_decreasing(theta in 0.0f64..100.0, n1 in 0.0f64..0.99, dn in 1e-4f64..0.5) {
            let n2 = (n1 + dn).min(0.999);
            prop_assume!(n2 > n1);
            let a = capacity_upper_bound(theta, n1).unwrap().value;
            let b = capacity_upper_bound(theta, n2).unwrap().value;
            prop_assert!(b <= a);
            if theta > 0.0 { prop_assert!(b < a); }
            let a2 = capacity_upper_bound(2.0 * theta, n1).unwrap().value;
            prop_assert!((a2 - 2.0 * a).abs() <= 1e-12 * a2.max(1e-300));
        }

        #[test]
        fn bell_monotone(s in 0.0f64..100.0, ds in 0.0f64..10.0, f in 0.25f64..1.0, df in 0.0f64..0.75) {
            let f2 = (f + df).min(1.0);
            let base = bell_fidelity(s, f).unwrap();
            prop_assert!(bell_fidelity(s + ds, f).unwrap() >= base - 1e-15);
            prop_assert!(bell_fidelity(s, f2).unwrap() >= base - 1e-15);
            prop_assert!((bell_fidelity(s, 0.25).unwrap() - 0.25).abs() < 1e-15);
            prop_assert!(base >= 0.25 - 1e-15 && base <= f + 1e-15);
        }

        #[test]
        fn dissipated_power_monotone(p in 0.0f64..1e-2, l in 0.0f64..1.0, e in 0.0f64..1.0, d in 0.0f64..1.0, k in 1.0f64..2.0) {
            prop_assume!(2.0 * l * e <= 1.0);
            let base = dissipated_power(p, l, e, d).unwrap();
            prop_assert!(base >= 0.0 && base <= p * d * (1.0 + 1e-12));
            prop_assert!(dissipated_power(p * k, l, e, d).unwrap() >= base);
            prop_assert!(dissipated_power(p, l, e, (d * k).min(1.0)).unwrap() >= base);
            let l2 = (l * k).min(0.5 / e.max(1e-12)).min(1.0);
            prop_assert!(dissipated_power(p, l2, e, d).unwrap() >= base * (1.0 - 1e-12));
        }

        #[test]
        fn figures_are_pure(c in 0.0f64..10.0) {
            prop_assert_eq!(internal_efficiency(c).unwrap().to_bits(), internal_efficiency(c).unwrap().to_bits());
        }
    }
}
