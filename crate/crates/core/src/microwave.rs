//! Propagation of the itinerant microwave mode: EO-cavity reflection and
//! loading, loss accounting, mode matching and heterodyne SNR.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Error, Result};
use crate::qubit::TemporalEnvelope;
use crate::spectral;

/// Single-port cavity seen in reflection.
///
/// H(ω) = η_e κ / (i(ω−Δ) + κ/2) is the absorbed part of the reflection,
/// A(ω) = √(η_e κ) / (i(ω−Δ) + κ/2) the intracavity field per unit input
/// field. For every ω: |1−H|² + (1−η_e) κ |A|² = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityResponse {
    pub eta_e: f64,
    /// total linewidth, rad/s
    pub kappa_eo: f64,
    pub detuning_hz: f64,
}

impl CavityResponse {
    pub fn from_linewidth_hz(eta_e: f64, linewidth_hz: f64, detuning_hz: f64) -> Result<Self> {
        let r = CavityResponse { eta_e, kappa_eo: 2.0 * PI * linewidth_hz, detuning_hz };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_e) {
            return Err(Error::domain(format!("eta_e must lie in [0, 1], got {}", self.eta_e)));
        }
        if !(self.kappa_eo > 0.0) || !self.detuning_hz.is_finite() {
            return Err(Error::domain("cavity linewidth must be positive and detuning finite"));
        }
        Ok(())
    }

    fn denom(&self, omega: f64) -> C64 {
        C64::new(self.kappa_eo / 2.0, omega - 2.0 * PI * self.detuning_hz)
    }

    pub fn h(&self, omega: f64) -> C64 {
        C64::new(self.eta_e * self.kappa_eo, 0.0) / self.denom(omega)
    }

    pub fn reflection(&self, omega: f64) -> C64 {
        C64::new(1.0, 0.0) - self.h(omega)
    }

    pub fn intracavity(&self, omega: f64) -> C64 {
        C64::new((self.eta_e * self.kappa_eo).sqrt(), 0.0) / self.denom(omega)
    }

    /// Internal loss rate (1−η_e)κ in s⁻¹.
    pub fn internal_loss_rate(&self) -> f64 {
        (1.0 - self.eta_e) * self.kappa_eo
    }
}

fn check_uniform(env: &TemporalEnvelope) -> Result<()> {
    if !(env.dt > 0.0) || !env.dt.is_finite() {
        return Err(Error::Format("envelope must be uniformly sampled with dt > 0".into()));
    }
    if env.amp.len() != env.pop.len() || env.is_empty() {
        return Err(Error::Format("envelope amp/pop lengths differ or are empty".into()));
    }
    Ok(())
}

/// Field carrying the envelope's photon flux: √pop with the phase of amp.
fn field_of(env: &TemporalEnvelope) -> Vec<C64> {
    let amp_floor = 1e-9 * env.amp.iter().map(|a| a.norm()).fold(0.0, f64::max).max(1e-300);
    env.pop
        .iter()
        .zip(&env.amp)
        .map(|(&p, a)| {
            let m = p.max(0.0).sqrt();
            if a.norm() > amp_floor { C64::from_polar(m, a.arg()) } else { C64::new(m, 0.0) }
        })
        .collect()
}

/// Envelope after reflection off the EO cavity. The output spans the full
/// zero-padded record, so Parseval holds exactly.
pub fn reflect(env: &TemporalEnvelope, resp: &CavityResponse) -> Result<TemporalEnvelope> {
    check_uniform(env)?;
    resp.validate()?;
    let r = |w: f64| resp.reflection(w);
    let field = spectral::filter(&field_of(env), env.dt, r);
    let amp = spectral::filter(&env.amp, env.dt, r);
    Ok(TemporalEnvelope { t0: env.t0, dt: env.dt, pop: field.iter().map(|z| z.norm_sqr()).collect(), amp })
}

/// Intracavity photon number versus time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl PopulationTrace {
    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Intracavity occupation N(t) = |a(t)|² loaded by `env`.
pub fn intracavity_population(env: &TemporalEnvelope, resp: &CavityResponse) -> Result<PopulationTrace> {
    check_uniform(env)?;
    resp.validate()?;
    let a = spectral::filter(&field_of(env), env.dt, |w| resp.intracavity(w));
    Ok(PopulationTrace { t0: env.t0, dt: env.dt, values: a.iter().map(|z| z.norm_sqr()).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowAverage {
    /// mean occupation inside the best window, per incident photon
    pub n_sp: f64,
    /// start of the best window (s)
    pub best_arrival_s: f64,
}

/// Best rectangular-window average of N(t), normalized per incident photon.
pub fn pump_window_average(trace: &PopulationTrace, window_s: f64, incident_photons: f64) -> Result<WindowAverage> {
    if !(window_s > 0.0) {
        return Err(Error::domain("pump window must be positive"));
    }
    if !(incident_photons > 0.0) {
        return Err(Error::domain("incident photon number must be positive"));
    }
    let n = trace.values.len();
    let m = ((window_s / trace.dt).round() as usize).max(1);
    if m > n {
        return Err(Error::domain(format!("window of {m} samples exceeds record of {n}")));
    }
    let mut sum: f64 = trace.values[..m].iter().sum();
    let mut best = (sum, 0usize);
    for start in 1..=(n - m) {
        sum += trace.values[start + m - 1] - trace.values[start - 1];
        if sum > best.0 {
            best = (sum, start);
        }
    }
    // re-sum the winner to shed running-sum drift
    let exact: f64 = trace.values[best.1..best.1 + m].iter().sum();
    Ok(WindowAverage {
        n_sp: exact / m as f64 / incident_photons,
        best_arrival_s: trace.t0 + best.1 as f64 * trace.dt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSegment {
    pub label: String,
    pub attenuation_db: f64,
}

/// Ordered microwave losses between the source cavity and the amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossLedger {
    /// fraction of the emitted photon leaving through the output port
    pub outcoupling: f64,
    pub segments: Vec<LossSegment>,
}

impl LossLedger {
    pub fn identity() -> Self {
        LossLedger { outcoupling: 1.0, segments: Vec::new() }
    }

    /// Source cavity → EO cavity → switch → JPA.
    pub fn reference(outcoupling: f64) -> Self {
        let seg = |label: &str, db: f64| LossSegment { label: label.to_string(), attenuation_db: db };
        LossLedger { outcoupling, segments: vec![seg("eo", 1.6), seg("switch", 1.6), seg("jpa", 1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.outcoupling) || self.outcoupling == 0.0 {
            return Err(Error::domain("outcoupling must lie in (0, 1]"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.attenuation_db >= 0.0) || !s.attenuation_db.is_finite() {
                return Err(Error::domain(format!("segment `{}` has invalid attenuation", s.label)));
            }
            if self.segments[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::domain(format!("duplicate ledger label `{}`", s.label)));
            }
        }
        Ok(())
    }

    /// Power transmission from the source to the end of segment `up_to`
    /// (all segments when `None`), including the outcoupling fraction.
    pub fn transmission(&self, up_to: Option<&str>) -> Result<f64> {
        self.validate()?;
        let count = match up_to {
            None => self.segments.len(),
            Some(label) => {
                self.segments
                    .iter()
                    .position(|s| s.label == label)
                    .ok_or_else(|| Error::domain(format!("unknown ledger label `{label}`")))?
                    + 1
            }
        };
        let db: f64 = self.segments[..count].iter().map(|s| s.attenuation_db).sum();
        Ok(self.outcoupling * 10f64.powf(-db / 10.0))
    }
}

/// Scale `env` by the ledger transmission; returns the scaled envelope and
/// the transmission used.
pub fn apply_ledger(env: &TemporalEnvelope, ledger: &LossLedger, up_to: Option<&str>) -> Result<(TemporalEnvelope, f64)> {
    let t = ledger.transmission(up_to)?;
    Ok((env.attenuated(t), t))
}

/// Σ pop·dt over samples with t − t0 in [0, T).
pub fn integrate_photons(env: &TemporalEnvelope, t_s: f64) -> Result<f64> {
    ensure_nonnegative("integration time", t_s)?;
    let n = (t_s / env.dt).round() as usize;
    if n > env.len() {
        return Err(Error::domain(format!("integration time {t_s} s exceeds the record")));
    }
    Ok(env.pop[..n].iter().sum::<f64>() * env.dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// w ∝ √pop, the matched filter for the field amplitude
    #[default]
    Amplitude,
    /// w ∝ pop
    Power,
}

/// Nonnegative integration weights with unit peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatchWeights {
    pub dt: f64,
    pub w: Vec<f64>,
}

impl ModeMatchWeights {
    pub fn new(dt: f64, w: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("weight spacing must be positive"));
        }
        if w.is_empty() || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::domain("weights must be nonempty, finite and nonnegative"));
        }
        let peak = w.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::Degenerate("all mode-matching weights are zero".into()));
        }
        Ok(ModeMatchWeights { dt, w: w.into_iter().map(|x| x / peak).collect() })
    }

    /// Weights from the first `window_s` of an off-resonant envelope.
    pub fn from_envelope(env: &TemporalEnvelope, window_s: f64, weighting: Weighting) -> Result<Self> {
        let n = (window_s / env.dt).round() as usize;
        if n == 0 || n > env.len() {
            return Err(Error::domain("weight window must be positive and within the record"));
        }
        let w = env.pop[..n]
            .iter()
            .map(|&p| match weighting {
                Weighting::Amplitude => p.max(0.0).sqrt(),
                Weighting::Power => p.max(0.0),
            })
            .collect();
        Self::new(env.dt, w)
    }

    pub fn window_s(&self) -> f64 {
        self.w.len() as f64 * self.dt
    }
}

/// Equivalent noise bandwidth ∫w² dt / (∫w dt)² in Hz.
pub fn enbw(weights: &ModeMatchWeights) -> Result<f64> {
    let s1: f64 = weights.w.iter().sum::<f64>() * weights.dt;
    let s2: f64 = weights.w.iter().map(|x| x * x).sum::<f64>() * weights.dt;
    if !(s1 > 0.0) {
        return Err(Error::Degenerate("weights integrate to zero".into()));
    }
    Ok(s2 / (s1 * s1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneSnr {
    pub snr: f64,
    /// mode-matched photon number at the amplifier
    pub signal_photons: f64,
    /// photons reaching the amplifier inside the weight window
    pub window_photons: f64,
    /// temporal overlap between weights and the field, in [0, 1]
    pub overlap: f64,
    pub enbw_hz: f64,
    /// noise quanta per mode times ENBW·T
    pub noise: f64,
    /// set when the noise floor vanished and `snr` was capped
    pub saturated: bool,
}

/// SNR cap returned when the noise floor vanishes.
pub const SNR_SATURATION: f64 = 1e12;

/// Heterodyne SNR of the mode-matched integrated signal with vacuum noise
/// of ½ quantum on top of `added_noise_quanta`.
pub fn predict_heterodyne_snr(
    env: &TemporalEnvelope,
    ledger: &LossLedger,
    added_noise_quanta: f64,
    weights: &ModeMatchWeights,
) -> Result<HeterodyneSnr> {
    predict_heterodyne_snr_with(env, ledger, added_noise_quanta, 0.5, weights)
}

pub fn predict_heterodyne_snr_with(
    env: &TemporalEnvelope,
    ledger: &LossLedger,
    added_noise_quanta: f64,
    vacuum_quanta: f64,
    weights: &ModeMatchWeights,
) -> Result<HeterodyneSnr> {
    ensure_nonnegative("added noise", added_noise_quanta)?;
    ensure_nonnegative("vacuum noise", vacuum_quanta)?;
    check_uniform(env)?;
    if (weights.dt - env.dt).abs() > 1e-9 * env.dt || weights.w.len() > env.len() {
        return Err(Error::domain("weights and envelope use different grids"));
    }
    let (scaled, _) = apply_ledger(env, ledger, None)?;
    let n = weights.w.len();
    let dt = env.dt;
    let u: Vec<f64> = scaled.pop[..n].iter().map(|&p| p.max(0.0).sqrt()).collect();
    let wu: f64 = weights.w.iter().zip(&u).map(|(w, u)| w * u).sum::<f64>() * dt;
    let ww: f64 = weights.w.iter().map(|w| w * w).sum::<f64>() * dt;
    let uu: f64 = u.iter().map(|u| u * u).sum::<f64>() * dt;
    let overlap = if uu > 0.0 { wu * wu / (ww * uu) } else { 0.0 };
    let signal = uu * overlap;
    let bw = enbw(weights)?;
    let noise = (added_noise_quanta + vacuum_quanta) * bw * weights.window_s();
    let (snr, saturated) = if noise <= f64::MIN_POSITIVE {
        (if signal > 0.0 { SNR_SATURATION } else { 0.0 }, true)
    } else {
        ((signal / noise).min(SNR_SATURATION), signal / noise > SNR_SATURATION)
    };
    Ok(HeterodyneSnr { snr, signal_photons: signal, window_photons: uu, overlap, enbw_hz: bw, noise, saturated })
}

/// Re-express an ENBW-referred SNR in a wider resolution bandwidth.
pub fn rescale_to_bandwidth(snr: f64, enbw_hz: f64, rbw_hz: f64) -> Result<f64> {
    if !(rbw_hz > 0.0) {
        return Err(Error::domain("resolution bandwidth must be positive"));
    }
    Ok(snr * enbw_hz / rbw_hz)
}
