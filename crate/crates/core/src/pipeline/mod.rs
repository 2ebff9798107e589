//! Config-driven experiments composing every module, with reproducible
//! reports and plot-ready tables.

pub mod config;

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;

use crate::counting::{
    bin_counts, estimate_snr, expected_totals, simulate_microwave_rabi, simulate_optical_rabi, simulate_run, sweep_rate,
    Channel, RabiData, RabiFit, SnrEstimate, SweepModel, SweepRow, TimeProfile,
};
use crate::error::{Error, Result};
use crate::figures::{bell_fidelity, capacity_upper_bound, dissipated_power};
use crate::microwave::{
    apply_ledger, enbw, integrate_photons, intracavity_population, predict_heterodyne_snr, pump_window_average, reflect,
    rescale_to_bandwidth, CavityResponse, HeterodyneSnr, ModeMatchWeights, PopulationTrace, WindowAverage,
};
use crate::optical::{cascade_suppression, detection_efficiency_budget, optical_noise_per_pulse, thermal_occupancy};
use crate::qubit::{
    calibrate_bsb_amplitude_with, excited_population_after, generate_photon, DriveSchedule, PhotonKind, RecordSpec,
    TemporalEnvelope,
};
use crate::rng::subseed;
use crate::tomography::{
    deconvolve, fidelity, raw_moments, reconstruct, synthesize_shots, wigner, GridSpec, MomentTable, Reconstruction,
    ShotLabel, SingleModeState, WignerGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Figures,
    Photon,
    Tomography,
    Sweep,
    Rabi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Figures => "figures",
            Command::Photon => "photon",
            Command::Tomography => "tomography",
            Command::Sweep => "sweep",
            Command::Rabi => "rabi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, format: TableFormat) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        match format {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(f);
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(|v| format!("{v:.12e}")))?;
                }
                w.flush()?;
            }
            TableFormat::Json => serde_json::to_writer_pretty(f, self)?,
        }
        Ok(())
    }
}

/// Destination for the plot-data files of one run.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub format: TableFormat,
    pub written: Vec<String>,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>, format: TableFormat) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Output { dir, format, written: Vec::new() })
    }

    fn ext(&self) -> &'static str {
        match self.format {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }

    pub fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        let name = format!("{stem}.{}", self.ext());
        t.write(&self.dir.join(&name), self.format)?;
        self.written.push(name);
        Ok(())
    }

    pub fn wigner(&mut self, stem: &str, g: &WignerGrid) -> Result<()> {
        let name = format!("{stem}.{}", self.ext());
        let f = BufWriter::new(File::create(self.dir.join(&name))?);
        match self.format {
            TableFormat::Csv => g.write_csv(f)?,
            TableFormat::Json => serde_json::to_writer(f, g)?,
        }
        self.written.push(name);
        Ok(())
    }
}

/// Source emission followed through the microwave network to the EO
/// cavity and the amplifier. Shared by every command that needs the
/// intracavity photon number, so all report the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonChain {
    pub bsb_amplitude_rad_per_s: f64,
    pub bsb_area_over_pi: f64,
    pub excited_population: f64,
    /// single-photon envelope leaving the source cavity
    pub sp: TemporalEnvelope,
    /// half-photon envelope leaving the source cavity
    pub hp: TemporalEnvelope,
    pub emitted_photons: f64,
    pub tail_time_s: f64,
    /// peak |⟨a⟩|² of HP over peak ⟨a†a⟩ of SP
    pub hp_sp_peak_ratio: f64,
    pub eo_transmission: f64,
    pub incident_photons: f64,
    pub intracavity: PopulationTrace,
    pub n_sp: WindowAverage,
    pub n_sp_alt: WindowAverage,
    /// intracavity photons averaged over the pump window
    pub n_cav: f64,
    pub switch_photons: f64,
    pub alpha: f64,
    pub enbw_hz: f64,
    pub heterodyne: HeterodyneSnr,
    pub snr_at_rbw: f64,
}

/// Exponential decay time of `env.pop` fitted on [t_a, t_b].
pub fn tail_time_constant(env: &TemporalEnvelope, t_a: f64, t_b: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = (0..env.len())
        .map(|k| (env.time(k), env.pop[k]))
        .filter(|&(t, p)| t >= t_a && t <= t_b && p > 0.0)
        .map(|(t, p)| (t, p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate("too few tail samples for a decay fit".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Degenerate("tail does not decay".into()));
    }
    Ok(-1.0 / slope)
}

pub fn photon_chain(cfg: &ExperimentConfig) -> Result<PhotonChain> {
    let qc = cfg.qubit_cavity()?;
    let drive = cfg.drive()?;
    let device = cfg.device()?;
    let path = cfg.path()?;
    let t = drive.bsb_duration_s;
    let amp = match drive.bsb_amplitude_rad_per_s {
        Some(a) => a,
        None => calibrate_bsb_amplitude_with(qc, t, drive.bsb_shape, drive.n_fock)?,
    };
    let pe = excited_population_after(qc, amp, t, drive.bsb_shape, drive.n_fock)?;
    let sched = DriveSchedule { bsb_shape: drive.bsb_shape, ..DriveSchedule::rectangular(amp, t) };
    let record = RecordSpec::new(drive.record_dt_s, drive.record_duration_s)?;
    let sp = generate_photon(PhotonKind::Single, 0.0, qc, &sched, &record, drive.n_fock)?;
    let hp = generate_photon(PhotonKind::Half, 0.0, qc, &sched, &record, drive.n_fock)?;
    let emitted = sp.photon_number();
    let tail = tail_time_constant(&sp, t + 300e-9, (t + 1000e-9).min(drive.record_duration_s))?;
    let hp_peak = hp.amp.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    let ratio = hp_peak / sp.peak_flux();

    let (at_eo, eo_t) = apply_ledger(&sp, &path.ledger, Some(&path.eo_input_label))?;
    let incident = at_eo.photon_number();
    let resp = CavityResponse::from_linewidth_hz(device.eta_e, device.kappa_eo_hz, path.eo_detuning_hz)?;
    let intracavity = intracavity_population(&at_eo, &resp)?;
    let n_sp = pump_window_average(&intracavity, path.pump_window_s, incident)?;
    let n_sp_alt = pump_window_average(&intracavity, path.alt_pump_window_s, incident)?;
    let (at_switch, _) = apply_ledger(&sp, &path.ledger, Some(&path.switch_label))?;
    let switch_photons = integrate_photons(&at_switch, path.mmf_window_s)?;
    let alpha = path.ledger.transmission(None)?;
    let weights = ModeMatchWeights::from_envelope(&sp, path.mmf_window_s, path.weighting)?;
    let bw = enbw(&weights)?;
    let het = predict_heterodyne_snr(&sp, &path.ledger, path.heterodyne_added_noise_quanta, &weights)?;
    let snr_at_rbw = rescale_to_bandwidth(het.snr, het.enbw_hz, path.rbw_hz)?;
    Ok(PhotonChain {
        bsb_amplitude_rad_per_s: amp,
        bsb_area_over_pi: amp * t / PI,
        excited_population: pe,
        emitted_photons: emitted,
        tail_time_s: tail,
        hp_sp_peak_ratio: ratio,
        eo_transmission: eo_t,
        incident_photons: incident,
        n_cav: n_sp.n_sp * incident,
        intracavity,
        n_sp,
        n_sp_alt,
        switch_photons,
        alpha,
        enbw_hz: bw,
        heterodyne: het,
        snr_at_rbw,
        sp,
        hp,
    })
}

/// Arrival-time profile of converted photons: the intracavity population
/// during the best pump window, placed at the start of the gate.
pub fn conversion_profile(chain: &PhotonChain, window_s: f64, gate_start_s: f64) -> Result<TimeProfile> {
    let tr = &chain.intracavity;
    let m = ((window_s / tr.dt).round() as usize).max(1);
    let start = ((chain.n_sp.best_arrival_s - tr.t0) / tr.dt).round() as usize;
    let end = (start + m).min(tr.values.len());
    TimeProfile::from_density(gate_start_s, tr.dt, &tr.values[start..end])
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiguresReport {
    pub cooperativity: f64,
    pub eta_int: f64,
    pub eta_ext: f64,
    pub frequency_matched: bool,
    /// η_det from its factor budget
    pub eta_det_budget: Option<f64>,
    pub pump_bank_extinction_db: Option<f64>,
    pub signal_bank_suppression_db: Option<f64>,
    pub optical_noise_per_pulse: Option<f64>,
    pub rates: Table,
    pub bell: Table,
}

pub fn cmd_figures(cfg: &ExperimentConfig, out: &mut Output) -> Result<FiguresReport> {
    let d = cfg.device()?;
    let f = cfg.figures()?;
    let noise = cfg.noise.as_ref().map(|_| cfg.noise()).transpose()?;
    let thermal = noise.map(|n| n.thermal.model()).transpose()?;
    let base = d.derived(0.0, 0.0)?;
    let mut rates =
        Table::new(&["rate_hz", "duty", "p_diss_w", "n_e", "n_add", "throughput_hz", "c_ub_hz", "quantum_enabled"]);
    for &r in &f.rates_hz {
        let duty = d.duty(r)?;
        let p = dissipated_power(d.p_p_w, d.lambda_sq, d.eta_o, duty)?;
        let n_e = match &thermal {
            Some(m) => thermal_occupancy(p, m)?,
            None => 0.0,
        };
        let fig = d.derived(r, n_e)?;
        rates.push(vec![r, duty, p, n_e, fig.n_add, fig.theta_hz, fig.c_ub_hz, f64::from(u8::from(fig.quantum_enabled))]);
    }
    let mut bell = Table::new(&["snr", "f_bell"]);
    for &s in &f.snr_grid {
        bell.push(vec![s, bell_fidelity(s, f.bell_f_rho)?]);
    }
    out.table("figures_rates", &rates)?;
    out.table("figures_bell", &bell)?;
    let (pump_db, sig_db) = match cfg.filters.as_ref().map(|_| cfg.filters()).transpose()? {
        Some(fl) => (
            Some(cascade_suppression(&fl.pump_bank, fl.offset_hz)?),
            Some(cascade_suppression(&fl.signal_bank, fl.offset_hz)?),
        ),
        None => (None, None),
    };
    Ok(FiguresReport {
        cooperativity: base.cooperativity,
        eta_int: base.eta_int,
        eta_ext: base.eta_ext,
        frequency_matched: d.frequency_matched(),
        eta_det_budget: noise.map(|n| detection_efficiency_budget(&n.detection, base.eta_ext)).transpose()?,
        pump_bank_extinction_db: pump_db,
        signal_bank_suppression_db: sig_db,
        optical_noise_per_pulse: noise.map(|n| optical_noise_per_pulse(&n.optical)).transpose()?,
        rates,
        bell,
    })
}

// ----------------------------------------------------------------- photon

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonReport {
    pub bsb_amplitude_rad_per_s: f64,
    pub bsb_area_over_pi: f64,
    pub excited_population: f64,
    pub emitted_photons: f64,
    pub tail_time_s: f64,
    pub hp_sp_peak_ratio: f64,
    pub incident_photons_at_eo: f64,
    pub n_sp: f64,
    pub n_sp_alt_window: f64,
    pub best_arrival_s: f64,
    pub n_cav: f64,
    pub switch_photons: f64,
    pub alpha: f64,
    pub enbw_hz: f64,
    pub heterodyne_snr: f64,
    pub heterodyne_snr_at_rbw: f64,
    /// on-resonant SP trace shows a second lobe after its interference dip
    pub on_resonance_revival: bool,
    pub revival_time_s: Option<f64>,
}

/// First local maximum after the first local minimum following the main
/// peak, if it carries at least `rel` of the peak.
fn revival(pop: &[f64], rel: f64) -> Option<usize> {
    let (peak_i, peak) = pop.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, v)| (i, *v))?;
    let mut k = peak_i;
    while k + 1 < pop.len() && pop[k + 1] <= pop[k] {
        k += 1;
    }
    while k + 1 < pop.len() && pop[k + 1] >= pop[k] {
        k += 1;
    }
    (k + 1 < pop.len() && pop[k] >= rel * peak).then_some(k)
}

pub fn cmd_photon(cfg: &ExperimentConfig, out: &mut Output) -> Result<PhotonReport> {
    let chain = photon_chain(cfg)?;
    let device = cfg.device()?;
    let path = cfg.path()?;
    let n = chain.sp.len();
    let on = CavityResponse::from_linewidth_hz(device.eta_e, device.kappa_eo_hz, path.eo_detuning_hz)?;
    let off = CavityResponse::from_linewidth_hz(device.eta_e, device.kappa_eo_hz, path.off_resonance_detuning_hz)?;
    let (sp_eo, _) = apply_ledger(&chain.sp, &path.ledger, Some(&path.eo_input_label))?;
    let (hp_eo, _) = apply_ledger(&chain.hp, &path.ledger, Some(&path.eo_input_label))?;
    let sp_on = reflect(&sp_eo, &on)?;
    let sp_off = reflect(&sp_eo, &off)?;
    let hp_on = reflect(&hp_eo, &on)?;
    let hp_off = reflect(&hp_eo, &off)?;
    let rev = revival(&sp_on.pop[..n], 1e-3);

    let mut traces = Table::new(&[
        "t_s",
        "sp_source_flux",
        "hp_source_coherent_flux",
        "sp_off_flux",
        "sp_on_flux",
        "hp_off_coherent_flux",
        "hp_on_coherent_flux",
        "intracavity_photons",
    ]);
    for k in 0..n {
        traces.push(vec![
            chain.sp.time(k),
            chain.sp.pop[k],
            chain.hp.amp[k].norm_sqr(),
            sp_off.pop[k],
            sp_on.pop[k],
            hp_off.amp[k].norm_sqr(),
            hp_on.amp[k].norm_sqr(),
            chain.intracavity.values[k],
        ]);
    }
    out.table("photon_traces", &traces)?;
    // theory analogs: the HP coherent flux scaled by 4 overlays the SP flux
    let mut theory = Table::new(&["t_s", "sp_flux", "hp_coherent_flux_x4"]);
    for k in 0..n {
        theory.push(vec![chain.sp.time(k), chain.sp.pop[k], 4.0 * chain.hp.amp[k].norm_sqr()]);
    }
    out.table("photon_theory", &theory)?;

    Ok(PhotonReport {
        bsb_amplitude_rad_per_s: chain.bsb_amplitude_rad_per_s,
        bsb_area_over_pi: chain.bsb_area_over_pi,
        excited_population: chain.excited_population,
        emitted_photons: chain.emitted_photons,
        tail_time_s: chain.tail_time_s,
        hp_sp_peak_ratio: chain.hp_sp_peak_ratio,
        incident_photons_at_eo: chain.incident_photons,
        n_sp: chain.n_sp.n_sp,
        n_sp_alt_window: chain.n_sp_alt.n_sp,
        best_arrival_s: chain.n_sp.best_arrival_s,
        n_cav: chain.n_cav,
        switch_photons: chain.switch_photons,
        alpha: chain.alpha,
        enbw_hz: chain.enbw_hz,
        heterodyne_snr: chain.heterodyne.snr,
        heterodyne_snr_at_rbw: chain.snr_at_rbw,
        on_resonance_revival: rev.is_some(),
        revival_time_s: rev.map(|k| sp_on.time(k)),
    })
}

// ------------------------------------------------------------- tomography

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub photon_number: f64,
    pub photon_number_err: f64,
    pub field_mean_abs: f64,
    pub fidelity: f64,
    pub residual: f64,
    pub large_residual: bool,
    pub clipped_mass: f64,
    pub wigner_min: f64,
    pub wigner_min_at: [f64; 2],
    pub wigner_origin: f64,
    pub warnings: Vec<String>,
    pub moments: MomentTable,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub shots: usize,
    pub added_noise_quanta: f64,
    pub single_photon: StateSummary,
    pub half_photon: StateSummary,
    /// σ(⟨a†a⟩) above 0.3 for either state
    pub statistically_insufficient: bool,
}

/// Prepared single-photon state: |1⟩ with weight `p`, vacuum otherwise.
pub fn prepared_single_photon(p: f64, n_cut: usize) -> Result<SingleModeState> {
    let mut rho = nalgebra::DMatrix::<C64>::zeros(n_cut, n_cut);
    rho[(0, 0)] = C64::new(1.0 - p, 0.0);
    rho[(1, 1)] = C64::new(p, 0.0);
    SingleModeState::new(rho)
}

pub fn prepared_half_photon(n_cut: usize) -> Result<SingleModeState> {
    SingleModeState::pure(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], n_cut)
}

/// Shots → moments → deconvolution → reconstruction for one state.
pub fn tomograph(
    target: &SingleModeState,
    reference: &MomentTable,
    t: &config::TomographySection,
    seed: u64,
) -> Result<(Reconstruction, MomentTable, Vec<String>)> {
    let batch = synthesize_shots(target, t.added_noise_quanta, t.shots, seed, ShotLabel::Signal)?;
    let raw = raw_moments(&batch, t.order)?;
    let dec = deconvolve(&raw, reference, t.order)?;
    let rec = reconstruct(&dec.table, t.n_cut)?;
    Ok((rec, dec.table, dec.warnings))
}

fn summarize(
    target: &SingleModeState,
    rec: Reconstruction,
    moments: MomentTable,
    warnings: Vec<String>,
    grid: &WignerGrid,
) -> Result<StateSummary> {
    let (wmin, at) = grid.min();
    Ok(StateSummary {
        photon_number: moments.get(1, 1).re,
        photon_number_err: moments.err(1, 1),
        field_mean_abs: moments.get(0, 1).norm(),
        fidelity: fidelity(&rec.state, target)?,
        residual: rec.residual,
        large_residual: rec.large_residual,
        clipped_mass: rec.clipped_mass,
        wigner_min: wmin,
        wigner_min_at: [at.re, at.im],
        wigner_origin: crate::tomography::wigner_at(&rec.state, C64::new(0.0, 0.0)),
        warnings,
        moments,
        populations: (0..rec.state.n_cut()).map(|n| rec.state.population(n)).collect(),
    })
}

pub fn cmd_tomography(cfg: &ExperimentConfig, out: &mut Output) -> Result<TomographyReport> {
    let t = cfg.tomography()?;
    let seed = cfg.run.seed;
    let vac = SingleModeState::vacuum(t.n_cut);
    let ref_batch =
        synthesize_shots(&vac, t.added_noise_quanta, t.shots, subseed(seed, "tomo-vacuum"), ShotLabel::VacuumReference)?;
    let reference = raw_moments(&ref_batch, t.order)?;
    let spec = GridSpec { extent: t.wigner_extent, resolution: t.wigner_resolution };
    let mut run = |name: &str, target: SingleModeState| -> Result<StateSummary> {
        let (rec, moments, warnings) = tomograph(&target, &reference, t, subseed(seed, name))?;
        let grid = wigner(&rec.state, spec)?;
        out.wigner(&format!("wigner_{name}"), &grid)?;
        summarize(&target, rec, moments, warnings, &grid)
    };
    let sp = run("sp", prepared_single_photon(t.sp_photon_fraction, t.n_cut)?)?;
    let hp = run("hp", prepared_half_photon(t.n_cut)?)?;
    let insufficient = sp.photon_number_err > 0.3 || hp.photon_number_err > 0.3;
    Ok(TomographyReport {
        shots: t.shots,
        added_noise_quanta: t.added_noise_quanta,
        single_photon: sp,
        half_photon: hp,
        statistically_insufficient: insufficient,
    })
}

// ------------------------------------------------------------------ sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingSummary {
    pub trigger_rate_hz: f64,
    pub noise_per_pulse: f64,
    pub raw_signal: u64,
    pub noise: u64,
    pub expected_raw_signal: f64,
    pub expected_noise: f64,
    pub snr: Option<SnrEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eta_det: f64,
    pub eta_det_budget: f64,
    pub n_cav: f64,
    pub eta_det_cav: f64,
    pub rows: Vec<SweepRow>,
    pub counting: CountingSummary,
}

pub fn sweep_model(cfg: &ExperimentConfig, chain: &PhotonChain) -> Result<SweepModel> {
    let noise = cfg.noise()?;
    let counting = cfg.counting()?;
    Ok(SweepModel {
        device: cfg.device()?.clone(),
        noise: noise.optical.clone(),
        thermal: noise.thermal.model()?,
        eta_det: noise.eta_det,
        n_cav: chain.n_cav,
        pulses_per_channel: counting.sweep_pulses_per_channel,
    })
}

/// Noise per pulse at one trigger rate under `model`.
pub fn noise_at_rate(model: &SweepModel, rate_hz: f64) -> Result<f64> {
    Ok(sweep_rate(&[rate_hz], model)?[0].noise_per_pulse)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut Output) -> Result<SweepReport> {
    let counting = cfg.counting()?;
    let noise = cfg.noise()?;
    let path = cfg.path()?;
    let chain = photon_chain(cfg)?;
    let model = sweep_model(cfg, &chain)?;
    let rows = sweep_rate(&counting.sweep_rates_hz, &model)?;
    let mut table = Table::new(&[
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
    ]);
    for r in &rows {
        table.push(vec![
            r.rate_hz,
            r.duty,
            r.p_diss_w,
            r.signal_per_pulse,
            r.noise_per_pulse,
            r.snr.unwrap_or(f64::INFINITY),
            r.snr_sigma.unwrap_or(0.0),
            r.n_e,
            r.n_add,
            r.throughput_hz,
            r.c_ub_hz,
        ]);
    }
    out.table("sweep", &table)?;
    // analytic curve on a log grid from 100 Hz to 50 kHz
    let curve_rates: Vec<f64> = (0..=54).map(|k| 100.0 * 10f64.powf(k as f64 / 20.0)).collect();
    let mut curve = Table::new(&["rate_hz", "snr"]);
    for r in sweep_rate(&curve_rates, &model)? {
        curve.push(vec![r.rate_hz, r.snr.unwrap_or(f64::INFINITY)]);
    }
    out.table("sweep_curve", &curve)?;

    // Monte Carlo detector record at the configured trigger rate
    let plan = counting.plan(subseed(cfg.run.seed, "counting"));
    if path.pump_window_s > counting.gate_len_s {
        return Err(Error::config("counting.gate_len_s", "gate is shorter than the pump window"));
    }
    let profile = conversion_profile(&chain, path.pump_window_s, counting.gate_start_s)?;
    let npp = noise_at_rate(&model, counting.trigger_rate_hz)?;
    let record = simulate_run(&plan, &profile, model.eta_det, npp)?;
    record.check_invariants()?;
    let (er, en) = expected_totals(&plan, model.eta_det, npp);
    let mut hist = Table::new(&["bin_start_s", "signal_counts", "signal_err", "vacuum_counts", "vacuum_err"]);
    let hs = bin_counts(&record, counting.bin_width_s, Some(Channel::Signal))?;
    let hv = bin_counts(&record, counting.bin_width_s, Some(Channel::Vacuum))?;
    for k in 0..hs.counts.len() {
        let (s, v) = (hs.counts[k] as f64, hv.counts[k] as f64);
        hist.push(vec![hs.start_s + k as f64 * hs.bin_width_s, s, s.sqrt(), v, v.sqrt()]);
    }
    out.table("counting_histogram", &hist)?;
    let ftags = BufWriter::new(File::create(out.dir.join("counting_tags.csv"))?);
    record.write_csv(ftags)?;
    out.written.push("counting_tags.csv".into());
    let snr = estimate_snr(record.raw_signal as f64, record.noise as f64).ok();

    let eta_ext = cfg.device()?.derived(0.0, 0.0)?.eta_ext;
    Ok(SweepReport {
        eta_det: model.eta_det,
        eta_det_budget: detection_efficiency_budget(&noise.detection, eta_ext)?,
        n_cav: chain.n_cav,
        eta_det_cav: model.eta_det / chain.n_cav,
        rows,
        counting: CountingSummary {
            trigger_rate_hz: counting.trigger_rate_hz,
            noise_per_pulse: npp,
            raw_signal: record.raw_signal,
            noise: record.noise,
            expected_raw_signal: er,
            expected_noise: en,
            snr,
        },
    })
}

// ------------------------------------------------------------------- rabi

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiVariant {
    pub data: RabiData,
    pub fit: RabiFit,
    pub contrast: SnrEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiReport {
    pub optical: RabiVariant,
    pub microwave: RabiVariant,
    /// heterodyne SNR the microwave scan was synthesized with
    pub predicted_microwave_snr: f64,
}

fn rabi_table(v: &RabiVariant) -> Table {
    let mut t = Table::new(&["theta_rad", "value", "error", "fit", "band"]);
    for ((&a, &y), &e) in v.data.angles.iter().zip(&v.data.values).zip(&v.data.errors) {
        t.push(vec![a, y, e, v.fit.eval(a), v.fit.band(a)]);
    }
    t
}

fn rabi_curve(v: &RabiVariant) -> Table {
    let mut t = Table::new(&["theta_rad", "fit", "band"]);
    for k in 0..=200 {
        let a = 4.0 * PI * k as f64 / 200.0;
        t.push(vec![a, v.fit.eval(a), v.fit.band(a)]);
    }
    t
}

pub fn cmd_rabi(cfg: &ExperimentConfig, out: &mut Output) -> Result<RabiReport> {
    let counting = cfg.counting()?;
    let chain = photon_chain(cfg)?;
    let model = sweep_model(cfg, &chain)?;
    let npp = noise_at_rate(&model, counting.trigger_rate_hz)?;
    let seed = cfg.run.seed;
    let angles = &counting.rabi_angles_rad;

    let od = simulate_optical_rabi(angles, counting.rabi_pulses_per_point, model.eta_det, 1.0, npp, subseed(seed, "rabi-optical"))?;
    let of = od.fit()?;
    let optical = RabiVariant { contrast: of.contrast()?, fit: of, data: od };

    let mw_snr = chain.heterodyne.snr;
    let md = simulate_microwave_rabi(angles, counting.mw_rabi_shots_per_point, mw_snr, subseed(seed, "rabi-microwave"))?;
    let mf = md.fit()?;
    let microwave = RabiVariant { contrast: mf.contrast()?, fit: mf, data: md };

    out.table("rabi_optical", &rabi_table(&optical))?;
    out.table("rabi_optical_fit", &rabi_curve(&optical))?;
    out.table("rabi_microwave", &rabi_table(&microwave))?;
    out.table("rabi_microwave_fit", &rabi_curve(&microwave))?;
    Ok(RabiReport { optical, microwave, predicted_microwave_snr: mw_snr })
}

// ----------------------------------------------------------------- report

/// Everything a run produced. Contains no timestamps, so identical inputs
/// give byte-identical serializations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub figures: Option<FiguresReport>,
    pub photon: Option<PhotonReport>,
    pub tomography: Option<TomographyReport>,
    pub sweep: Option<SweepReport>,
    pub rabi: Option<RabiReport>,
    pub files: Vec<String>,
}

/// Run metadata kept apart from the reproducible report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

pub fn run(command: Command, cfg: &ExperimentConfig, out: &mut Output) -> Result<RunReport> {
    let mut report = RunReport {
        command,
        seed: cfg.run.seed,
        config: cfg.clone(),
        figures: None,
        photon: None,
        tomography: None,
        sweep: None,
        rabi: None,
        files: Vec::new(),
    };
    match command {
        Command::Figures => report.figures = Some(cmd_figures(cfg, out)?),
        Command::Photon => report.photon = Some(cmd_photon(cfg, out)?),
        Command::Tomography => report.tomography = Some(cmd_tomography(cfg, out)?),
        Command::Sweep => report.sweep = Some(cmd_sweep(cfg, out)?),
        Command::Rabi => report.rabi = Some(cmd_rabi(cfg, out)?),
    }
    report.files = out.written.clone();
    Ok(report)
}

/// Write `report.json`; a reconstruction that failed to match its moments
/// is reported first and then surfaced as an error.
pub fn write_report(report: &RunReport, out: &Output) -> Result<()> {
    let f = BufWriter::new(File::create(out.dir.join("report.json"))?);
    serde_json::to_writer_pretty(f, report)?;
    if let Some(t) = &report.tomography {
        for (name, s) in [("single photon", &t.single_photon), ("half photon", &t.half_photon)] {
            if s.large_residual {
                return Err(Error::Degenerate(format!(
                    "{name} reconstruction residual {:.3e} is inconsistent with the moment errors",
                    s.residual
                )));
            }
        }
    }
    Ok(())
}

pub fn write_provenance(p: &Provenance, out: &Output) -> Result<()> {
    let f = BufWriter::new(File::create(out.dir.join("provenance.json"))?);
    serde_json::to_writer_pretty(f, p)?;
    Ok(())
}

/// Peak of the bound C_ub over a rate grid, for reporting.
pub fn max_capacity(rows: &[SweepRow]) -> Result<f64> {
    rows.iter().map(|r| capacity_upper_bound(r.throughput_hz, r.n_add).map(|c| c.value)).try_fold(0.0, |m, c| Ok(f64::max(m, c?)))
}
