//! Experiment configuration. Every numeric key carries its unit as a
//! suffix; dimensionless quantities carry none. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counting::{default_rabi_angles, Gate, RunPlan};
use crate::error::{Error, Result};
use crate::figures::{DeviceParams, QubitCavityParams};
use crate::microwave::{LossLedger, LossSegment, Weighting};
use crate::optical::{reference_pump_bank, reference_signal_bank, DetectionBudget, FilterSpec, OpticalNoiseModel, ThermalOccupancyModel};
use crate::qubit::{PulseShape, DEFAULT_BSB_DURATION_S, DEFAULT_N_FOCK};
use crate::tomography::{DEFAULT_N_CUT, DEFAULT_ORDER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub bsb_duration_s: f64,
    pub bsb_shape: PulseShape,
    /// sideband Rabi frequency; calibrated for maximal P_e when absent
    pub bsb_amplitude_rad_per_s: Option<f64>,
    pub n_fock: usize,
    pub record_dt_s: f64,
    pub record_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub ledger: LossLedger,
    /// ledger label of the segment ending at the EO cavity input
    pub eo_input_label: String,
    /// ledger label of the segment ending at the switch
    pub switch_label: String,
    pub eo_detuning_hz: f64,
    /// detuning used for the off-resonant reference traces
    pub off_resonance_detuning_hz: f64,
    pub pump_window_s: f64,
    pub alt_pump_window_s: f64,
    pub mmf_window_s: f64,
    pub weighting: Weighting,
    pub heterodyne_added_noise_quanta: f64,
    pub rbw_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    pub pump_bank: Vec<FilterSpec>,
    pub signal_bank: Vec<FilterSpec>,
    /// pump–signal separation
    pub offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub low_anchor_w: f64,
    pub low_anchor_quanta: f64,
    pub exp_low: f64,
    pub high_anchor_w: f64,
    pub high_anchor_quanta: f64,
    pub exp_high: f64,
    pub p_cross_w: f64,
}

impl ThermalSection {
    pub fn model(&self) -> Result<ThermalOccupancyModel> {
        ThermalOccupancyModel::anchored(
            (self.low_anchor_w, self.low_anchor_quanta),
            self.exp_low,
            (self.high_anchor_w, self.high_anchor_quanta),
            self.exp_high,
            self.p_cross_w,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub optical: OpticalNoiseModel,
    pub thermal: ThermalSection,
    pub detection: DetectionBudget,
    /// measured detection efficiency per signal pulse
    pub eta_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    pub shots: usize,
    pub added_noise_quanta: f64,
    /// |1⟩ weight of the prepared single-photon state; the rest is vacuum
    pub sp_photon_fraction: f64,
    pub n_cut: usize,
    pub order: usize,
    pub wigner_extent: f64,
    pub wigner_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingSection {
    pub trigger_rate_hz: f64,
    pub n_pulses: u64,
    pub interleave: bool,
    pub gate_start_s: f64,
    pub gate_len_s: f64,
    pub bin_width_s: f64,
    pub sweep_rates_hz: Vec<f64>,
    pub sweep_pulses_per_channel: f64,
    pub rabi_angles_rad: Vec<f64>,
    pub rabi_pulses_per_point: u64,
    pub mw_rabi_shots_per_point: u64,
}

impl CountingSection {
    pub fn plan(&self, seed: u64) -> RunPlan {
        RunPlan {
            trigger_rate_hz: self.trigger_rate_hz,
            n_pulses: self.n_pulses,
            interleave: self.interleave,
            gate: Gate { start_s: self.gate_start_s, len_s: self.gate_len_s },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresSection {
    pub rates_hz: Vec<f64>,
    pub snr_grid: Vec<f64>,
    /// fidelity of the heralded microwave Bell state
    pub bell_f_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub device: Option<DeviceParams>,
    pub qubit_cavity: Option<QubitCavityParams>,
    pub drive: Option<DriveSection>,
    pub path: Option<PathSection>,
    pub filters: Option<FiltersSection>,
    pub noise: Option<NoiseSection>,
    pub tomography: Option<TomographySection>,
    pub counting: Option<CountingSection>,
    pub figures: Option<FiguresSection>,
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| Error::config(name, "section is required by this command"))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(path, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

fn nonnegative(path: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::config(path, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Re-label a domain error from a section's own validation with its path.
fn in_section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(msg) => Error::config(name, msg),
        other => other,
    })
}

impl ExperimentConfig {
    /// Measured device, calibrated source and the analysis settings used
    /// throughout the test-suite.
    pub fn reference() -> Self {
        let qc = QubitCavityParams::reference();
        ExperimentConfig {
            run: RunSection { seed: 20_240_917 },
            device: Some(DeviceParams::reference()),
            qubit_cavity: Some(qc.clone()),
            drive: Some(DriveSection {
                bsb_duration_s: DEFAULT_BSB_DURATION_S,
                bsb_shape: PulseShape::Rectangular,
                bsb_amplitude_rad_per_s: None,
                n_fock: DEFAULT_N_FOCK,
                record_dt_s: 1e-9,
                record_duration_s: 3e-6,
            }),
            path: Some(PathSection {
                ledger: LossLedger::reference(qc.kappa_e2_hz / qc.kappa_hz),
                eo_input_label: "eo".into(),
                switch_label: "switch".into(),
                eo_detuning_hz: 0.0,
                off_resonance_detuning_hz: 13e6,
                pump_window_s: 200e-9,
                alt_pump_window_s: 122e-9,
                mmf_window_s: 800e-9,
                weighting: Weighting::Amplitude,
                heterodyne_added_noise_quanta: 1.84,
                rbw_hz: 50e6,
            }),
            filters: Some(FiltersSection {
                pump_bank: reference_pump_bank(),
                signal_bank: reference_signal_bank(),
                offset_hz: crate::figures::OPTICAL_FSR_HZ,
            }),
            noise: Some(NoiseSection {
                optical: OpticalNoiseModel::reference(),
                thermal: ThermalSection {
                    low_anchor_w: 0.2046e-6,
                    low_anchor_quanta: 0.005,
                    exp_low: 1.06,
                    high_anchor_w: 4.093e-6,
                    high_anchor_quanta: 0.06,
                    exp_high: 0.43,
                    p_cross_w: 0.6e-6,
                },
                detection: DetectionBudget::default(),
                eta_det: 1.32e-5,
            }),
            tomography: Some(TomographySection {
                shots: 1_000_000,
                added_noise_quanta: 1.84,
                sp_photon_fraction: 0.95,
                n_cut: DEFAULT_N_CUT,
                order: DEFAULT_ORDER,
                wigner_extent: 3.0,
                wigner_resolution: 121,
            }),
            counting: Some(CountingSection {
                trigger_rate_hz: 1e3,
                n_pulses: 68_000_000,
                interleave: true,
                gate_start_s: 0.0,
                gate_len_s: 200e-9,
                bin_width_s: 40e-9,
                sweep_rates_hz: vec![250.0, 500.0, 1e3, 2.5e3, 5e3, 10e3, 20e3],
                sweep_pulses_per_channel: 3.5e7,
                rabi_angles_rad: default_rabi_angles(),
                rabi_pulses_per_point: 4_700_000,
                mw_rabi_shots_per_point: 2_000_000,
            }),
            figures: Some(FiguresSection {
                rates_hz: vec![250.0, 1e3, 2.5e3, 5e3, 10e3, 20e3],
                snr_grid: vec![0.5, 1.0, 2.0, 4.4, 5.1, 10.0],
                bell_f_rho: 1.0,
            }),
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default();
            Error::config(origin, format!("{}{span}", e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<resolved>", e.to_string()))
    }

    pub fn device(&self) -> Result<&DeviceParams> {
        let d = require(&self.device, "device")?;
        in_section("device", d.validate())?;
        Ok(d)
    }

    pub fn qubit_cavity(&self) -> Result<&QubitCavityParams> {
        let q = require(&self.qubit_cavity, "qubit_cavity")?;
        in_section("qubit_cavity", q.validate())?;
        Ok(q)
    }

    pub fn drive(&self) -> Result<&DriveSection> {
        let d = require(&self.drive, "drive")?;
        positive("drive.bsb_duration_s", d.bsb_duration_s)?;
        positive("drive.record_dt_s", d.record_dt_s)?;
        positive("drive.record_duration_s", d.record_duration_s)?;
        if let Some(a) = d.bsb_amplitude_rad_per_s {
            nonnegative("drive.bsb_amplitude_rad_per_s", a)?;
        }
        if d.n_fock < 3 {
            return Err(Error::config("drive.n_fock", "must be >= 3"));
        }
        if d.record_duration_s < d.bsb_duration_s {
            return Err(Error::config("drive.record_duration_s", "record ends before the sideband pulse"));
        }
        Ok(d)
    }

    pub fn path(&self) -> Result<&PathSection> {
        let p = require(&self.path, "path")?;
        in_section("path.ledger", p.ledger.validate())?;
        for (key, label) in [("path.eo_input_label", &p.eo_input_label), ("path.switch_label", &p.switch_label)] {
            if !p.ledger.segments.iter().any(|s: &LossSegment| &s.label == label) {
                return Err(Error::config(key, format!("no ledger segment labelled `{label}`")));
            }
        }
        for (key, v) in [
            ("path.pump_window_s", p.pump_window_s),
            ("path.alt_pump_window_s", p.alt_pump_window_s),
            ("path.mmf_window_s", p.mmf_window_s),
            ("path.rbw_hz", p.rbw_hz),
        ] {
            positive(key, v)?;
        }
        nonnegative("path.heterodyne_added_noise_quanta", p.heterodyne_added_noise_quanta)?;
        Ok(p)
    }

    pub fn filters(&self) -> Result<&FiltersSection> {
        let f = require(&self.filters, "filters")?;
        for (bank, list) in [("filters.pump_bank", &f.pump_bank), ("filters.signal_bank", &f.signal_bank)] {
            for (i, spec) in list.iter().enumerate() {
                in_section(&format!("{bank}[{i}]"), spec.validate())?;
            }
        }
        Ok(f)
    }

    pub fn noise(&self) -> Result<&NoiseSection> {
        let n = require(&self.noise, "noise")?;
        in_section("noise.optical", n.optical.validate())?;
        in_section("noise.thermal", n.thermal.model())?;
        if !(n.eta_det > 0.0 && n.eta_det < 1.0) {
            return Err(Error::config("noise.eta_det", "must lie in (0, 1)"));
        }
        Ok(n)
    }

    pub fn tomography(&self) -> Result<&TomographySection> {
        let t = require(&self.tomography, "tomography")?;
        if t.shots < 2 * crate::tomography::moments::JACKKNIFE_BLOCKS {
            return Err(Error::config("tomography.shots", "too few shots for jackknife errors"));
        }
        nonnegative("tomography.added_noise_quanta", t.added_noise_quanta)?;
        if !(0.0..=1.0).contains(&t.sp_photon_fraction) {
            return Err(Error::config("tomography.sp_photon_fraction", "must lie in [0, 1]"));
        }
        if t.n_cut < 2 {
            return Err(Error::config("tomography.n_cut", "must be >= 2"));
        }
        if t.order < 2 {
            return Err(Error::config("tomography.order", "must be >= 2"));
        }
        positive("tomography.wigner_extent", t.wigner_extent)?;
        if t.wigner_resolution < 2 {
            return Err(Error::config("tomography.wigner_resolution", "must be >= 2"));
        }
        Ok(t)
    }

    pub fn counting(&self) -> Result<&CountingSection> {
        let c = require(&self.counting, "counting")?;
        positive("counting.trigger_rate_hz", c.trigger_rate_hz)?;
        positive("counting.gate_len_s", c.gate_len_s)?;
        positive("counting.bin_width_s", c.bin_width_s)?;
        positive("counting.sweep_pulses_per_channel", c.sweep_pulses_per_channel)?;
        for (i, &r) in c.sweep_rates_hz.iter().enumerate() {
            positive(&format!("counting.sweep_rates_hz[{i}]"), r)?;
        }
        in_section("counting", c.plan(self.run.seed).validate())?;
        Ok(c)
    }

    pub fn figures(&self) -> Result<&FiguresSection> {
        let f = require(&self.figures, "figures")?;
        for (i, &r) in f.rates_hz.iter().enumerate() {
            positive(&format!("figures.rates_hz[{i}]"), r)?;
        }
        for (i, &s) in f.snr_grid.iter().enumerate() {
            nonnegative(&format!("figures.snr_grid[{i}]"), s)?;
        }
        if !(0.25..=1.0).contains(&f.bell_f_rho) {
            return Err(Error::config("figures.bell_f_rho", "must lie in [0.25, 1]"));
        }
        Ok(f)
    }
}
