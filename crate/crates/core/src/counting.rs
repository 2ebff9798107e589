//! Photon-counting statistics: Monte Carlo detector clicks for interleaved
//! signal/vacuum pulse trains, histograms, SNR estimates, squared-cosine
//! Rabi fits, and repetition-rate sweeps.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Error, Result};
use crate::figures::{dissipated_power, DeviceParams};
use crate::optical::{optical_noise_per_pulse, thermal_occupancy, OpticalNoiseModel, ThermalOccupancyModel};
use crate::rng::{stream, subseed};

/// Time-tagger resolution.
pub const TAG_RESOLUTION_S: f64 = 250e-12;
/// Pulses simulated per random stream.
pub const PULSES_PER_CHUNK: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub start_s: f64,
    pub len_s: f64,
}

impl Gate {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.len_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub trigger_rate_hz: f64,
    pub n_pulses: u64,
    /// even pulses carry the signal, odd pulses are vacuum references
    pub interleave: bool,
    pub gate: Gate,
    pub seed: u64,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.trigger_rate_hz > 0.0 && self.trigger_rate_hz.is_finite()) {
            return Err(Error::domain(format!("trigger rate must be > 0, got {}", self.trigger_rate_hz)));
        }
        if self.interleave && self.n_pulses < 2 {
            return Err(Error::domain("an interleaved run needs at least 2 pulses"));
        }
        if !(self.gate.len_s > 0.0) || !self.gate.start_s.is_finite() {
            return Err(Error::domain("gate length must be > 0"));
        }
        if self.gate.len_s * self.trigger_rate_hz > 1.0 {
            return Err(Error::domain("gate is longer than the trigger period"));
        }
        Ok(())
    }

    pub fn n_signal_pulses(&self) -> u64 {
        if self.interleave { self.n_pulses.div_ceil(2) } else { self.n_pulses }
    }

    pub fn n_vacuum_pulses(&self) -> u64 {
        self.n_pulses - self.n_signal_pulses()
    }

    pub fn channel_of(&self, pulse: u64) -> Channel {
        if !self.interleave || pulse % 2 == 0 { Channel::Signal } else { Channel::Vacuum }
    }
}

/// Arrival-time distribution of converted photons, piecewise constant on a
/// uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub t0: f64,
    pub dt: f64,
    cdf: Vec<f64>,
}

impl TimeProfile {
    /// Density samples at bin starts; normalized internally.
    pub fn from_density(t0: f64, dt: f64, density: &[f64]) -> Result<Self> {
        if density.is_empty() || !(dt > 0.0) {
            return Err(Error::domain("time profile needs samples and dt > 0"));
        }
        if density.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::domain("time profile must be nonnegative and finite"));
        }
        let total: f64 = density.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("time profile has zero weight"));
        }
        let mut acc = 0.0;
        let cdf = density
            .iter()
            .map(|d| {
                acc += d / total;
                acc
            })
            .collect();
        Ok(TimeProfile { t0, dt, cdf })
    }

    pub fn uniform(gate: Gate) -> Self {
        TimeProfile { t0: gate.start_s, dt: gate.len_s, cdf: vec![1.0] }
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * self.cdf.len() as f64
    }

    /// Inverse CDF, linear inside each bin.
    pub fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let lo = if k == 0 { 0.0 } else { self.cdf[k - 1] };
        let width = self.cdf[k] - lo;
        let frac = if width > 0.0 { ((u - lo) / width).clamp(0.0, 1.0) } else { 0.5 };
        self.t0 + (k as f64 + frac) * self.dt
    }

    /// Probability mass inside `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let cdf_at = |t: f64| {
            let x = ((t - self.t0) / self.dt).clamp(0.0, self.cdf.len() as f64);
            let k = x.floor() as usize;
            let lo = if k == 0 { 0.0 } else { self.cdf[k - 1] };
            if k >= self.cdf.len() {
                return 1.0;
            }
            lo + (self.cdf[k] - lo) * (x - k as f64)
        };
        (cdf_at(b) - cdf_at(a)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Signal,
    Vacuum,
}

impl Channel {
    fn as_str(self) -> &'static str {
        match self {
            Channel::Signal => "signal",
            Channel::Vacuum => "vacuum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub pulse: u64,
    pub channel: Channel,
    /// detection time after the trigger, multiple of the tag resolution
    pub t_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub gate: Gate,
    pub clicks: Vec<Click>,
    pub n_signal_pulses: u64,
    pub n_vacuum_pulses: u64,
    /// clicks during signal pulses (converted photons plus noise)
    pub raw_signal: u64,
    /// clicks during vacuum pulses
    pub noise: u64,
}

impl CountRecord {
    pub fn check_invariants(&self) -> Result<()> {
        let raw = self.clicks.iter().filter(|c| c.channel == Channel::Signal).count() as u64;
        let noise = self.clicks.len() as u64 - raw;
        if raw != self.raw_signal || noise != self.noise {
            return Err(Error::Format("count totals disagree with the time tags".into()));
        }
        if let Some(c) = self.clicks.iter().find(|c| !self.gate.contains(c.t_s)) {
            return Err(Error::Format(format!("click at {} s lies outside the gate", c.t_s)));
        }
        Ok(())
    }

    /// Time-tag CSV with columns pulse_index, channel, t_click_s.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["pulse_index", "channel", "t_click_s"])?;
        for c in &self.clicks {
            wr.write_record([c.pulse.to_string(), c.channel.as_str().to_string(), format!("{:.4e}", c.t_s)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn quantize(t: f64, gate: Gate) -> f64 {
    let lo = (gate.start_s / TAG_RESOLUTION_S).ceil();
    let hi = (gate.end_s() / TAG_RESOLUTION_S).floor();
    (t / TAG_RESOLUTION_S).round().clamp(lo, hi) * TAG_RESOLUTION_S
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_gap<R: Rng>(rng: &mut R, ln_q: f64) -> u64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let g = (u.ln() / ln_q).floor();
    if g.is_finite() && g < u64::MAX as f64 { g as u64 } else { u64::MAX }
}

/// Pulse indices in `[lo, hi)` where an event of probability `p` fires,
/// restricted to pulses accepted by `keep`.
fn bernoulli_hits<R: Rng>(rng: &mut R, p: f64, lo: u64, hi: u64, keep: impl Fn(u64) -> bool) -> Vec<u64> {
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    let ln_q = (-p).ln_1p();
    let mut k = lo;
    loop {
        let gap = geometric_gap(rng, ln_q);
        k = match k.checked_add(gap) {
            Some(v) if v < hi => v,
            _ => break,
        };
        if keep(k) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Click probability of a truncated Poisson process with mean `mu`.
fn at_least_one(mu: f64) -> f64 {
    -(-mu).exp_m1()
}

/// Monte Carlo detector record. Signal photons fire with probability
/// `eta_det` on signal pulses with times drawn from `profile`; noise is
/// Poissonian with mean `noise_per_pulse` on every pulse, uniform over the
/// gate. At most one click per pulse: the earlier one wins.
pub fn simulate_run(plan: &RunPlan, profile: &TimeProfile, eta_det: f64, noise_per_pulse: f64) -> Result<CountRecord> {
    plan.validate()?;
    for (name, p) in [("eta_det", eta_det), ("noise_per_pulse", noise_per_pulse)] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("{name} must lie in [0, 1), got {p}")));
        }
    }
    let eps = 1e-12;
    if profile.start() < plan.gate.start_s - eps || profile.end() > plan.gate.end_s() + eps {
        return Err(Error::domain("time profile extends outside the gate"));
    }
    let p_noise = at_least_one(noise_per_pulse);
    let n_chunks = plan.n_pulses.div_ceil(PULSES_PER_CHUNK);
    let noise_profile = TimeProfile::uniform(plan.gate);
    let mut clicks: Vec<Click> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            // separate streams keep the noise draws independent of the signal
            let mut sig_rng = stream(subseed(plan.seed, "signal"), chunk);
            let mut noise_rng = stream(subseed(plan.seed, "noise"), chunk);
            let lo = chunk * PULSES_PER_CHUNK;
            let hi = (lo + PULSES_PER_CHUNK).min(plan.n_pulses);
            let sig = bernoulli_hits(&mut sig_rng, eta_det, lo, hi, |k| plan.channel_of(k) == Channel::Signal);
            let noise = bernoulli_hits(&mut noise_rng, p_noise, lo, hi, |_| true);
            let mut events: Vec<(u64, f64)> = sig
                .into_iter()
                .map(|k| (k, profile.sample(sig_rng.random())))
                .chain(noise.into_iter().map(|k| (k, noise_profile.sample(noise_rng.random()))))
                .collect();
            events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            events.dedup_by_key(|e| e.0);
            events
                .into_iter()
                .map(|(k, t)| Click { pulse: k, channel: plan.channel_of(k), t_s: quantize(t, plan.gate) })
                .collect::<Vec<_>>()
        })
        .collect();
    clicks.sort_by_key(|c| c.pulse);
    let raw_signal = clicks.iter().filter(|c| c.channel == Channel::Signal).count() as u64;
    let noise = clicks.len() as u64 - raw_signal;
    Ok(CountRecord {
        gate: plan.gate,
        clicks,
        n_signal_pulses: plan.n_signal_pulses(),
        n_vacuum_pulses: plan.n_vacuum_pulses(),
        raw_signal,
        noise,
    })
}

/// Expected (raw_signal, noise) totals of [`simulate_run`].
pub fn expected_totals(plan: &RunPlan, eta_det: f64, noise_per_pulse: f64) -> (f64, f64) {
    let p_noise = at_least_one(noise_per_pulse);
    let p_sig = 1.0 - (1.0 - eta_det) * (1.0 - p_noise);
    (plan.n_signal_pulses() as f64 * p_sig, plan.n_vacuum_pulses() as f64 * p_noise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub start_s: f64,
    pub bin_width_s: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn errors(&self) -> Vec<f64> {
        self.counts.iter().map(|&n| (n as f64).sqrt()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.start_s + (k as f64 + 0.5) * self.bin_width_s
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_start_s", "bin_end_s", "counts", "error"])?;
        for (k, (&n, e)) in self.counts.iter().zip(self.errors()).enumerate() {
            let a = self.start_s + k as f64 * self.bin_width_s;
            wr.write_record([format!("{a:.6e}"), format!("{:.6e}", a + self.bin_width_s), n.to_string(), format!("{e:.6}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Histogram of the clicks of one channel (or all when `None`) over the gate.
pub fn bin_counts(record: &CountRecord, bin_width_s: f64, channel: Option<Channel>) -> Result<Histogram> {
    if !(bin_width_s > 0.0) {
        return Err(Error::domain(format!("bin width must be > 0, got {bin_width_s}")));
    }
    let n_bins = ((record.gate.len_s / bin_width_s).ceil() as usize).max(1);
    let mut counts = vec![0u64; n_bins];
    for c in record.clicks.iter().filter(|c| channel.is_none_or(|ch| ch == c.channel)) {
        let k = (((c.t_s - record.gate.start_s) / bin_width_s).floor().max(0.0) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { start_s: record.gate.start_s, bin_width_s, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub snr: f64,
    pub sigma: f64,
}

/// (raw − noise)/noise with first-order Poisson errors on both totals.
pub fn estimate_snr(raw_signal: f64, noise: f64) -> Result<SnrEstimate> {
    ensure_nonnegative("raw_signal", raw_signal)?;
    ensure_nonnegative("noise", noise)?;
    if noise == 0.0 {
        return Err(Error::UndefinedSnr("no noise counts".into()));
    }
    let snr = (raw_signal - noise) / noise;
    let sigma = (raw_signal / noise.powi(2) + raw_signal.powi(2) / noise.powi(3)).sqrt();
    Ok(SnrEstimate { snr, sigma })
}

/// Result of fitting A·cos²(θ/2 + φ) + c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub phase: f64,
    pub phase_err: f64,
    pub offset: f64,
    pub offset_err: f64,
    /// minima inside the sampled angle range
    pub minima: Vec<f64>,
    pub minima_err: f64,
    pub chi2: f64,
    /// covariance of the linear parameters (p0, p1, p2) of
    /// p0 + p1 cos θ + p2 sin θ
    pub covariance: [[f64; 3]; 3],
    pub params: [f64; 3],
}

impl RabiFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.params[0] + self.params[1] * theta.cos() + self.params[2] * theta.sin()
    }

    /// One-standard-deviation half width of the fitted curve at `theta`.
    pub fn band(&self, theta: f64) -> f64 {
        let g = [1.0, theta.cos(), theta.sin()];
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += g[i] * self.covariance[i][j] * g[j];
            }
        }
        v.max(0.0).sqrt()
    }

    /// Fringe contrast over the background, A / c, with propagated error.
    pub fn contrast(&self) -> Result<SnrEstimate> {
        if !(self.offset > 0.0) {
            return Err(Error::UndefinedSnr("fitted background is not positive".into()));
        }
        // A = 2R and c = p0 − R with R = √(p1² + p2²)
        let [p0, p1, p2] = self.params;
        let r = (p1 * p1 + p2 * p2).sqrt();
        let snr = 2.0 * r / (p0 - r);
        let dr = if r > 0.0 { [0.0, p1 / r, p2 / r] } else { [0.0; 3] };
        let c = p0 - r;
        let grad: Vec<f64> = (0..3)
            .map(|i| {
                let dc = if i == 0 { 1.0 } else { -dr[i] };
                (2.0 * dr[i] * c - 2.0 * r * dc) / (c * c)
            })
            .collect();
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += grad[i] * self.covariance[i][j] * grad[j];
            }
        }
        Ok(SnrEstimate { snr, sigma: v.max(0.0).sqrt() })
    }
}

/// Weighted least-squares squared-cosine fit, linearized as
/// p0 + p1 cos θ + p2 sin θ.
pub fn fit_rabi(angles: &[f64], counts: &[f64], errors: &[f64]) -> Result<RabiFit> {
    if angles.len() != counts.len() || angles.len() != errors.len() {
        return Err(Error::domain("angles, counts and errors must have equal length"));
    }
    if errors.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::domain("count errors must be positive and finite"));
    }
    let mut distinct: Vec<f64> = angles.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 distinct angles, got {}", distinct.len())));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for ((&th, &y), &e) in angles.iter().zip(counts).zip(errors) {
        let g = Vector3::new(1.0, th.cos(), th.sin());
        let w = 1.0 / (e * e);
        ata += g * g.transpose() * w;
        atb += g * (y * w);
    }
    let cov = ata
        .try_inverse()
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    let p = cov * atb;
    let (p0, p1, p2) = (p[0], p[1], p[2]);
    let r = (p1 * p1 + p2 * p2).sqrt();
    // A cos²(θ/2 + φ) + c = (A/2 + c) + (A/2) cos(θ + 2φ)
    let two_phi = (-p2).atan2(p1);
    let phase = two_phi / 2.0;
    let var = |g: [f64; 3]| -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += g[i] * cov[(i, j)] * g[j];
            }
        }
        v.max(0.0)
    };
    let (dr, dpsi) = if r > 0.0 {
        ([0.0, p1 / r, p2 / r], [0.0, p2 / (r * r), -p1 / (r * r)])
    } else {
        ([0.0; 3], [0.0; 3])
    };
    let amp_err = 2.0 * var(dr).sqrt();
    let offset_err = var([1.0, -dr[1], -dr[2]]).sqrt();
    let psi_err = var(dpsi).sqrt();
    // minima where θ + 2φ = π (mod 2π)
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let first = std::f64::consts::PI - two_phi;
    let period = 2.0 * std::f64::consts::PI;
    let mut m = first - ((first - lo) / period).floor() * period;
    let mut minima = Vec::new();
    while m <= hi + 1e-9 {
        if m >= lo - 1e-9 {
            minima.push(m);
        }
        m += period;
    }
    let chi2 = angles
        .iter()
        .zip(counts)
        .zip(errors)
        .map(|((&th, &y), &e)| ((p0 + p1 * th.cos() + p2 * th.sin() - y) / e).powi(2))
        .sum();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cov[(i, j)];
        }
    }
    Ok(RabiFit {
        amplitude: 2.0 * r,
        amplitude_err: amp_err,
        phase,
        phase_err: psi_err / 2.0,
        offset: p0 - r,
        offset_err,
        minima,
        minima_err: psi_err,
        chi2,
        covariance,
        params: [p0, p1, p2],
    })
}

/// Counts (or powers) per rotation angle with one-sigma errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiData {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// value of the noise-only reference point
    pub reference: f64,
    pub reference_error: f64,
}

impl RabiData {
    pub fn fit(&self) -> Result<RabiFit> {
        fit_rabi(&self.angles, &self.values, &self.errors)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["theta_rad", "value", "error"])?;
        for ((a, v), e) in self.angles.iter().zip(&self.values).zip(&self.errors) {
            wr.write_record([format!("{a:.6}"), format!("{v:.6e}"), format!("{e:.6e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Nine equally spaced rotations over [0, 4π].
pub fn default_rabi_angles() -> Vec<f64> {
    (0..9).map(|k| k as f64 * std::f64::consts::PI / 2.0).collect()
}

fn poisson_draw<R: Rng>(rng: &mut R, mean: f64) -> Result<f64> {
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng))
}

/// Photon-counting Rabi scan: at rotation θ each pulse clicks with mean
/// `eta_det · P(θ) + noise_per_pulse`, P(θ) = `single_emission`·cos²(θ/2).
pub fn simulate_optical_rabi(
    angles: &[f64],
    pulses_per_point: u64,
    eta_det: f64,
    single_emission: f64,
    noise_per_pulse: f64,
    seed: u64,
) -> Result<RabiData> {
    ensure_nonnegative("eta_det", eta_det)?;
    ensure_nonnegative("noise_per_pulse", noise_per_pulse)?;
    let n = pulses_per_point as f64;
    let mut values = Vec::with_capacity(angles.len());
    for (k, &th) in angles.iter().enumerate() {
        let mut rng = stream(subseed(seed, "optical-rabi"), k as u64);
        let p = crate::qubit::rabi_emission_probability(th, single_emission);
        values.push(poisson_draw(&mut rng, n * (eta_det * p + noise_per_pulse))?);
    }
    let mut rng = stream(subseed(seed, "optical-rabi"), angles.len() as u64);
    let reference = poisson_draw(&mut rng, n * noise_per_pulse)?;
    let errors = values.iter().map(|&v: &f64| v.sqrt().max(1.0)).collect();
    Ok(RabiData { angles: angles.to_vec(), values, errors, reference, reference_error: reference.sqrt().max(1.0) })
}

/// Heterodyne-power Rabi scan in units of the noise floor: each point is
/// the mean of `shots_per_point` power samples with mean 1 + snr·cos²(θ/2)
/// and the exponential-distribution spread of a thermal-like power.
pub fn simulate_microwave_rabi(angles: &[f64], shots_per_point: u64, snr: f64, seed: u64) -> Result<RabiData> {
    ensure_nonnegative("snr", snr)?;
    if shots_per_point == 0 {
        return Err(Error::domain("need at least one shot per point"));
    }
    let root_n = (shots_per_point as f64).sqrt();
    let draw = |k: u64, mean: f64| -> Result<(f64, f64)> {
        let mut rng = stream(subseed(seed, "microwave-rabi"), k);
        let sd = mean / root_n;
        let d = Normal::new(mean, sd).map_err(|e| Error::domain(e.to_string()))?;
        Ok((d.sample(&mut rng), sd))
    };
    let mut values = Vec::with_capacity(angles.len());
    let mut errors = Vec::with_capacity(angles.len());
    for (k, &th) in angles.iter().enumerate() {
        let (v, e) = draw(k as u64, 1.0 + snr * (th / 2.0).cos().powi(2))?;
        values.push(v);
        errors.push(e);
    }
    let (reference, reference_error) = draw(angles.len() as u64, 1.0)?;
    Ok(RabiData { angles: angles.to_vec(), values, errors, reference, reference_error })
}

/// Inputs of the repetition-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepModel {
    pub device: DeviceParams,
    pub noise: OpticalNoiseModel,
    pub thermal: ThermalOccupancyModel,
    /// detected photons per signal pulse
    pub eta_det: f64,
    /// intracavity microwave photons loaded per signal pulse
    pub n_cav: f64,
    /// signal and vacuum pulses per rate point, each
    pub pulses_per_channel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate_hz: f64,
    pub duty: f64,
    pub p_diss_w: f64,
    pub signal_per_pulse: f64,
    pub noise_per_pulse: f64,
    pub n_e: f64,
    pub n_add: f64,
    /// `None` when the noise vanishes
    pub snr: Option<f64>,
    pub snr_sigma: Option<f64>,
    pub throughput_hz: f64,
    pub c_ub_hz: f64,
}

pub fn sweep_rate(rates: &[f64], model: &SweepModel) -> Result<Vec<SweepRow>> {
    if !(model.n_cav > 0.0) {
        return Err(Error::domain("intracavity photon number must be > 0"));
    }
    if !(model.pulses_per_channel > 0.0) {
        return Err(Error::domain("pulses per channel must be > 0"));
    }
    let eta_cav = crate::optical::cavity_referred_efficiency(model.eta_det, model.n_cav)?;
    let optical = optical_noise_per_pulse(&model.noise)?;
    let d = &model.device;
    rates
        .iter()
        .map(|&rate| {
            if !(rate > 0.0) {
                return Err(Error::domain(format!("rate must be > 0, got {rate}")));
            }
            let duty = d.duty(rate)?;
            let p_diss = dissipated_power(d.p_p_w, d.lambda_sq, d.eta_o, duty)?;
            let n_e = thermal_occupancy(p_diss, &model.thermal)?;
            let noise = optical + eta_cav * n_e;
            let figs = d.derived(rate, n_e)?;
            let (snr, sigma) = if noise > 0.0 {
                let n = model.pulses_per_channel;
                let est = estimate_snr(n * (model.eta_det + noise), n * noise)?;
                (Some(est.snr), Some(est.sigma))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                rate_hz: rate,
                duty,
                p_diss_w: p_diss,
                signal_per_pulse: model.eta_det,
                noise_per_pulse: noise,
                n_e,
                n_add: figs.n_add,
                snr,
                snr_sigma: sigma,
                throughput_hz: figs.theta_hz,
                c_ub_hz: figs.c_ub_hz,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "rate_hz",
        "duty",
        "p_diss_w",
        "signal_per_pulse",
        "noise_per_pulse",
        "snr",
        "snr_sigma",
        "n_e",
        "n_add",
        "throughput_hz",
        "c_ub_hz",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| format!("{x:.6e}"));
    for r in rows {
        wr.write_record([
            format!("{:.6e}", r.rate_hz),
            format!("{:.6e}", r.duty),
            format!("{:.6e}", r.p_diss_w),
            format!("{:.6e}", r.signal_per_pulse),
            format!("{:.6e}", r.noise_per_pulse),
            opt(r.snr),
            opt(r.snr_sigma),
            format!("{:.6e}", r.n_e),
            format!("{:.6e}", r.n_add),
            format!("{:.6e}", r.throughput_hz),
            format!("{:.6e}", r.c_ub_hz),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn plan(n: u64, seed: u64) -> RunPlan {
        RunPlan {
            trigger_rate_hz: 1e3,
            n_pulses: n,
            interleave: true,
            gate: Gate { start_s: 0.0, len_s: 200e-9 },
            seed,
        }
    }

    #[test]
    fn no_probability_no_clicks() {
        let p = plan(1000, 1);
        let r = simulate_run(&p, &TimeProfile::uniform(p.gate), 0.0, 0.0).unwrap();
        assert!(r.clicks.is_empty());
        assert_eq!(r.n_signal_pulses + r.n_vacuum_pulses, 1000);
    }

    #[test]
    fn noise_only_total() {
        let p = RunPlan { interleave: false, ..plan(60_000_000, 3) };
        let r = simulate_run(&p, &TimeProfile::uniform(p.gate), 0.0, 2.6e-6).unwrap();
        let total = (r.raw_signal + r.noise) as f64;
        assert!((total - 156.0).abs() < 3.0 * 156f64.sqrt(), "{total}");
        r.check_invariants().unwrap();
    }

    #[test]
    fn tags_are_quantized_and_gated() {
        let p = plan(2_000_000, 5);
        let prof = TimeProfile::from_density(20e-9, 1e-9, &vec![1.0; 100]).unwrap();
        let r = simulate_run(&p, &prof, 0.01, 1e-3).unwrap();
        r.check_invariants().unwrap();
        for c in &r.clicks {
            let k = c.t_s / TAG_RESOLUTION_S;
            assert!((k - k.round()).abs() < 1e-6);
        }
        // vacuum pulses hold noise only
        assert!(r.clicks.iter().filter(|c| c.channel == Channel::Vacuum).all(|c| c.pulse % 2 == 1));
    }

    #[test]
    fn bad_probabilities_rejected() {
        let p = plan(10, 1);
        let u = TimeProfile::uniform(p.gate);
        assert!(simulate_run(&p, &u, 1.0, 0.0).is_err());
        assert!(simulate_run(&p, &u, 0.1, -0.1).is_err());
        let outside = TimeProfile::from_density(150e-9, 1e-9, &[1.0; 100]).unwrap();
        assert!(simulate_run(&p, &outside, 0.1, 0.0).is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = RunPlan { n_pulses: 3 * PULSES_PER_CHUNK + 17, ..plan(0, 11) };
        let u = TimeProfile::uniform(p.gate);
        let a = simulate_run(&p, &u, 1e-5, 3e-6).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_run(&p, &u, 1e-5, 3e-6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_sampling() {
        let prof = TimeProfile::from_density(0.0, 1.0, &[0.0, 1.0, 3.0]).unwrap();
        assert_relative_eq!(prof.sample(0.0), 1.0);
        assert_relative_eq!(prof.sample(0.25), 2.0);
        assert_relative_eq!(prof.sample(1.0), 3.0);
        assert_relative_eq!(prof.mass_between(0.0, 2.0), 0.25);
        assert!(TimeProfile::from_density(0.0, 1.0, &[0.0, -1.0]).is_err());
    }

    #[test]
    fn histogram_single_click() {
        let rec = CountRecord {
            gate: Gate { start_s: 0.0, len_s: 200e-9 },
            clicks: vec![Click { pulse: 0, channel: Channel::Signal, t_s: 55e-9 }],
            n_signal_pulses: 1,
            n_vacuum_pulses: 0,
            raw_signal: 1,
            noise: 0,
        };
        let h = bin_counts(&rec, 40e-9, None).unwrap();
        assert_eq!(h.counts, vec![0, 1, 0, 0, 0]);
        assert_eq!(h.errors()[1], 1.0);
        assert!(bin_counts(&rec, 0.0, None).is_err());
    }

    #[test]
    fn snr_examples() {
        let s = estimate_snr(576.0, 106.0).unwrap();
        assert!((s.snr - 4.43).abs() < 0.005);
        // σ² = raw/n² + raw²/n³ evaluated by hand
        let oracle = (576.0 / 106f64.powi(2) + 576f64.powi(2) / 106f64.powi(3)).sqrt();
        assert_relative_eq!(s.sigma, oracle, max_relative = 1e-12);
        assert_eq!(estimate_snr(50.0, 50.0).unwrap().snr, 0.0);
        assert!(matches!(estimate_snr(5.0, 0.0), Err(Error::UndefinedSnr(_))));
        assert!(estimate_snr(2e12, 1e12).unwrap().sigma < 1e-5);
    }

    #[test]
    fn rabi_noiseless_fit() {
        let angles = default_rabi_angles();
        let counts: Vec<f64> = angles.iter().map(|t| (t / 2.0).cos().powi(2)).collect();
        let errs = vec![0.1; angles.len()];
        let f = fit_rabi(&angles, &counts, &errs).unwrap();
        assert!((f.amplitude - 1.0).abs() < 1e-9);
        assert!(f.phase.abs() < 1e-9);
        assert!(f.offset.abs() < 1e-9);
        assert_eq!(f.minima.len(), 2);
        assert!((f.minima[0] - PI).abs() < 1e-9 && (f.minima[1] - 3.0 * PI).abs() < 1e-9);
        assert!(f.chi2 < 1e-9);
    }

    #[test]
    fn rabi_needs_four_angles() {
        assert!(matches!(fit_rabi(&[0.0], &[1.0], &[1.0]), Err(Error::Fit(_))));
        assert!(matches!(fit_rabi(&[0.0, 0.0, 1.0, 1.0], &[1.0; 4], &[1.0; 4]), Err(Error::Fit(_))));
    }

    #[test]
    fn rabi_band_matches_monte_carlo_spread() {
        // refit many Gaussian-perturbed data sets and compare the spread of
        // the fitted curve at one angle with the analytic band
        let angles = default_rabi_angles();
        let truth: Vec<f64> = angles.iter().map(|t| 100.0 * (t / 2.0).cos().powi(2) + 30.0).collect();
        let errs: Vec<f64> = truth.iter().map(|v| v.sqrt()).collect();
        let mut vals = Vec::new();
        let mut band = 0.0;
        for k in 0..400 {
            let mut rng = stream(99, k);
            let y: Vec<f64> = truth
                .iter()
                .zip(&errs)
                .map(|(&m, &e)| Normal::new(m, e).unwrap().sample(&mut rng))
                .collect();
            let f = fit_rabi(&angles, &y, &errs).unwrap();
            vals.push(f.eval(1.0));
            band = f.band(1.0);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        assert!((sd / band - 1.0).abs() < 0.15, "{sd} vs {band}");
    }

    #[test]
    fn sweep_without_noise_flags_infinite_snr() {
        let model = SweepModel {
            device: DeviceParams::reference(),
            noise: OpticalNoiseModel { dark_per_pulse: 0.0, inelastic_coeff: 0.0, ..OpticalNoiseModel::reference() },
            thermal: ThermalOccupancyModel { amp_low: 0.0, amp_high: 0.0, ..ThermalOccupancyModel::reference() },
            eta_det: 1.32e-5,
            n_cav: 0.13,
            pulses_per_channel: 3.5e7,
        };
        let rows = sweep_rate(&[1e3], &model).unwrap();
        assert!(rows[0].snr.is_none());
        assert!(sweep_rate(&[], &model).unwrap().is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

        #[test]
        fn snr_scale_invariant(raw in 1.0f64..1e4, noise in 1.0f64..1e4, k in 0.1f64..100.0) {
            let a = estimate_snr(raw, noise).unwrap();
            let b = estimate_snr(k * raw, k * noise).unwrap();
            prop_assert!((a.snr - b.snr).abs() <= 1e-9 * a.snr.abs().max(1.0));
            prop_assert!(a.sigma > 0.0);
        }

        #[test]
        fn vacuum_channel_ignores_signal(eta in 0.0f64..0.5, seed in 0u64..1000) {
            let p = plan(400_000, seed);
            let u = TimeProfile::uniform(p.gate);
            let vac = |r: CountRecord| r.clicks.into_iter().filter(|c| c.channel == Channel::Vacuum).collect::<Vec<_>>();
            let a = vac(simulate_run(&p, &u, eta, 1e-3).unwrap());
            let b = vac(simulate_run(&p, &u, 0.0, 1e-3).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn histogram_conserves_counts(seed in 0u64..500, w in 1e-9f64..1e-7) {
            let p = plan(200_000, seed);
            let r = simulate_run(&p, &TimeProfile::uniform(p.gate), 1e-3, 1e-3).unwrap();
            let h = bin_counts(&r, w, None).unwrap();
            prop_assert_eq!(h.total(), r.clicks.len() as u64);
        }

        #[test]
        fn sweep_signal_column_constant(r1 in 100.0f64..5e4, r2 in 100.0f64..5e4) {
            let model = SweepModel {
                device: DeviceParams::reference(),
                noise: OpticalNoiseModel::reference(),
                thermal: ThermalOccupancyModel::reference(),
                eta_det: 1.32e-5,
                n_cav: 0.13,
                pulses_per_channel: 3.5e7,
            };
            let rows = sweep_rate(&[r1, r2], &model).unwrap();
            prop_assert_eq!(rows[0].signal_per_pulse, rows[1].signal_per_pulse);
        }
    }
}
