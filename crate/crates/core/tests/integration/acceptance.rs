//! One PASS/FAIL line per acceptance criterion, with measured values and
//! wall-clock time against each runtime budget. Fails if any line fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::{Duration, Instant};

use eotx::counting::{estimate_snr, expected_totals, simulate_run, sweep_rate, RunPlan};
use eotx::figures::{bell_fidelity, capacity_upper_bound, DeviceParams};
use eotx::microwave::{enbw, ModeMatchWeights};
use eotx::optical::{cascade_suppression, suppression_db};
use eotx::pipeline::{
    conversion_profile, noise_at_rate, photon_chain, prepared_half_photon, prepared_single_photon, sweep_model, tomograph,
    ExperimentConfig,
};
use eotx::qubit::{evolve, DriveSchedule, JointDensityMatrix, RecordSpec};
use eotx::rng::subseed;
use eotx::tomography::{fidelity, raw_moments, synthesize_shots, wigner_at, ShotLabel, SingleModeState};
use eotx::Complex64 as C64;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

struct Runner {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Runner {
    fn check(&mut self, id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let o = f();
        let el = start.elapsed();
        let in_time = el <= budget;
        let pass = o.pass && in_time;
        let line = format!(
            "{} [{id:>2}] {name}: {} | {:.3} s (budget {} s{})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            budget.as_secs_f64(),
            if in_time { "" } else { ", exceeded" },
        );
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(id);
        }
    }
}

fn c1_figures() -> Outcome {
    let d = DeviceParams::reference().derived(0.0, 0.0).unwrap();
    let pass = within(d.eta_int, 1.6e-3, 0.05) && within(d.eta_ext, 2.2e-4, 0.10);
    Outcome { pass, detail: format!("eta_int={:.4e} (1.6e-3±5%), eta_ext={:.4e} (2.2e-4±10%)", d.eta_int, d.eta_ext) }
}

fn c2_dynamics(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    let tau = chain.tail_time_s;
    let qc = cfg.qubit_cavity().unwrap();
    let drive = cfg.drive().unwrap();
    let sched = DriveSchedule {
        bsb_shape: drive.bsb_shape,
        ..DriveSchedule::rectangular(chain.bsb_amplitude_rad_per_s, drive.bsb_duration_s)
    };
    let grid = RecordSpec::new(drive.record_dt_s, drive.record_duration_s).unwrap().times();
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let starts = [
        JointDensityMatrix::ground(drive.n_fock),
        JointDensityMatrix::rotated_ground(PI / 2.0, drive.n_fock),
        JointDensityMatrix::product([h, h, C64::new(0.0, 0.0)], 0, drive.n_fock).unwrap(),
    ];
    let (mut tr_err, mut herm_err, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for s in &starts {
        for rho in evolve(s, &sched, qc, &grid[1..]).unwrap() {
            tr_err = tr_err.max((rho.trace() - 1.0).norm());
            herm_err = herm_err.max(rho.hermiticity_error());
            min_eig = min_eig.min(rho.min_eigenvalue());
        }
    }
    let pass = within(tau, 111e-9, 0.05) && tr_err <= 1e-9 && herm_err <= 1e-9 && min_eig >= -1e-9;
    Outcome {
        pass,
        detail: format!(
            "tau={:.2} ns (111±5%), max|tr-1|={tr_err:.1e}, max herm={herm_err:.1e}, min eig={min_eig:.1e}",
            tau * 1e9
        ),
    }
}

fn c3_scaling(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    let r = chain.hp_sp_peak_ratio;
    Outcome { pass: within(r, 0.25, 0.02), detail: format!("HP peak |<a>|^2 / SP peak = {r:.4} (0.25±2%)") }
}

fn c4_load(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    let (a, b) = (chain.n_sp.n_sp, chain.n_sp_alt.n_sp);
    Outcome {
        pass: within(a, 0.26, 0.15) && within(b, 0.27, 0.15),
        detail: format!("N_SP(200 ns)={a:.4} (0.26±15%), N_SP(122 ns)={b:.4} (0.27±15%)"),
    }
}

fn c5_ledger(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    Outcome {
        pass: within(chain.switch_photons, 0.334, 0.05) && within(chain.alpha, 0.27, 0.05),
        detail: format!("photons at switch={:.4} (0.334±5%), alpha={:.4} (0.27±5%)", chain.switch_photons, chain.alpha),
    }
}

fn c6_enbw(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    let t = 800e-9;
    let rect = enbw(&ModeMatchWeights::new(1e-9, vec![1.0; 800]).unwrap()).unwrap();
    let rect_err = (rect - 1.0 / t).abs() * t;
    Outcome {
        pass: within(chain.enbw_hz, 2.03e6, 0.15) && rect_err <= 1e-12,
        detail: format!("ENBW={:.4} MHz (2.03±15%), rectangular rel err={rect_err:.1e}", chain.enbw_hz / 1e6),
    }
}

fn c7_tomography(cfg: &ExperimentConfig) -> Outcome {
    let t = cfg.tomography().unwrap();
    let seed = cfg.run.seed;
    let vac = SingleModeState::vacuum(t.n_cut);
    let refb =
        synthesize_shots(&vac, t.added_noise_quanta, t.shots, subseed(seed, "tomo-vacuum"), ShotLabel::VacuumReference)
            .unwrap();
    let reference = raw_moments(&refb, t.order).unwrap();
    let sp_target = prepared_single_photon(t.sp_photon_fraction, t.n_cut).unwrap();
    let hp_target = prepared_half_photon(t.n_cut).unwrap();
    let (sp, _, _) = tomograph(&sp_target, &reference, t, subseed(seed, "sp")).unwrap();
    let (hp, _, _) = tomograph(&hp_target, &reference, t, subseed(seed, "hp")).unwrap();
    let n_sp = sp.state.photon_number();
    let a_sp = sp.state.field_mean().norm();
    let f_sp = fidelity(&sp.state, &sp_target).unwrap();
    let a_hp = hp.state.field_mean().norm();
    let w0 = wigner_at(&sp.state, C64::new(0.0, 0.0));
    let parity: f64 = (0..t.n_cut).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * sp.state.population(n)).sum();
    let parity_err = (w0 - 2.0 / PI * parity).abs();
    let fock = SingleModeState::fock(1, t.n_cut).unwrap();
    let fock_err = (wigner_at(&fock, C64::new(0.0, 0.0)) + 2.0 / PI).abs();
    let pass = (n_sp - 0.95).abs() <= 0.05
        && a_sp <= 0.05
        && f_sp >= 0.95
        && (a_hp - 0.5).abs() <= 0.03
        && parity_err <= 1e-9
        && fock_err <= 1e-9;
    Outcome {
        pass,
        detail: format!(
            "SP <n>={n_sp:.4} (0.95±0.05), |<a>|={a_sp:.4} (<=0.05), F={f_sp:.4} (>=0.95); HP |<a>|={a_hp:.4} (0.5±0.03); \
             W(0) parity err={parity_err:.1e}, Fock-1 W(0) err={fock_err:.1e}"
        ),
    }
}

fn c8_counting(cfg: &ExperimentConfig) -> Outcome {
    let e = estimate_snr(576.0, 106.0).unwrap();
    let chain = photon_chain(cfg).unwrap();
    let model = sweep_model(cfg, &chain).unwrap();
    let counting = cfg.counting().unwrap();
    let npp = noise_at_rate(&model, counting.trigger_rate_hz).unwrap();
    let profile =
        conversion_profile(&chain, cfg.path().unwrap().pump_window_s, counting.gate_start_s).unwrap();
    let base = counting.plan(0);
    let (er, en) = expected_totals(&base, model.eta_det, npp);
    let runs: Vec<(u64, u64)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let plan = RunPlan { seed: subseed(k, "acceptance-counting"), ..base.clone() };
            let r = simulate_run(&plan, &profile, model.eta_det, npp).unwrap();
            (r.raw_signal, r.noise)
        })
        .collect();
    let n = runs.len() as f64;
    let mr = runs.iter().map(|r| r.0 as f64).sum::<f64>() / n;
    let mn = runs.iter().map(|r| r.1 as f64).sum::<f64>() / n;
    // Poisson totals: 3σ on the 100-run mean and per-run coverage
    let mean_ok = (mr - er).abs() <= 3.0 * (er / n).sqrt() && (mn - en).abs() <= 3.0 * (en / n).sqrt();
    let covered =
        runs.iter().filter(|r| (r.0 as f64 - er).abs() <= 3.0 * er.sqrt() && (r.1 as f64 - en).abs() <= 3.0 * en.sqrt()).count();
    let pass = (e.snr - 4.43).abs() <= 0.005 && (0.5..=0.7).contains(&e.sigma) && mean_ok && covered >= 97;
    Outcome {
        pass,
        detail: format!(
            "SNR(576,106)={:.3}±{:.3}; 100 seeds: mean raw={mr:.1} vs {er:.1}, mean noise={mn:.1} vs {en:.1}, \
             {covered}/100 within 3σ",
            e.snr, e.sigma
        ),
    }
}

fn c9_sweep(cfg: &ExperimentConfig) -> Outcome {
    let chain = photon_chain(cfg).unwrap();
    let model = sweep_model(cfg, &chain).unwrap();
    let rows = sweep_rate(&[250.0, 1e3, 20e3], &model).unwrap();
    let targets = [(5.1, 1.1), (4.4, 0.6), (1.2, 0.1)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, (t, s)) in rows.iter().zip(targets) {
        let snr = r.snr.unwrap_or(f64::INFINITY);
        let ok = (snr - t).abs() <= s;
        pass &= ok;
        parts.push(format!("{:.0} Hz: {snr:.3} ({t}±{s}{})", r.rate_hz, if ok { "" } else { " MISS" }));
    }
    let noise20 = rows[2].noise_per_pulse;
    let nok = within(noise20, 9.9e-6, 0.2);
    pass &= nok;
    parts.push(format!("noise/pulse(20 kHz)={noise20:.3e} (9.9e-6±20%)"));
    Outcome { pass, detail: parts.join(", ") }
}

fn c10_capacity() -> Outcome {
    let d = DeviceParams::reference();
    let theta = d.derived(20e3, 0.0).unwrap().theta_hz;
    let c = capacity_upper_bound(theta, 0.12).unwrap().value;
    let f = bell_fidelity(5.1, 1.0).unwrap();
    Outcome {
        pass: (2.5..=3.5).contains(&c) && (f - 0.877).abs() <= 0.001,
        detail: format!("C_ub={c:.3} Hz ([2.5, 3.5]), F_Bell(5.1)={f:.5} (0.877±0.001)"),
    }
}

fn c11_filters(cfg: &ExperimentConfig) -> Outcome {
    let fl = cfg.filters().unwrap();
    let pump = cascade_suppression(&fl.pump_bank, fl.offset_hz).unwrap();
    let signal = cascade_suppression(&fl.signal_bank, fl.offset_hz).unwrap();
    let a = suppression_db(fl.offset_hz, &fl.signal_bank[0]).unwrap();
    let b = suppression_db(fl.offset_hz, &fl.signal_bank[1]).unwrap();
    let pass = (pump - 130.0).abs() <= 10.0
        && signal >= 160.0
        && (a - 43.8).abs() <= 3.0
        && (b - 43.0).abs() <= 3.0;
    Outcome {
        pass,
        detail: format!(
            "pump bank={pump:.1} dB (≈130±10), signal bank={signal:.1} dB (>=170-10), single A={a:.2} dB (43.8±3), \
             single B={b:.2} dB (43.0±3)"
        ),
    }
}

#[test]
fn acceptance() {
    let cfg = ExperimentConfig::reference();
    let s = Duration::from_secs;
    let mut r = Runner { lines: Vec::new(), failed: Vec::new() };
    r.check(1, "figures of merit", s(1), c1_figures);
    r.check(2, "dynamics", s(10), || c2_dynamics(&cfg));
    r.check(3, "scaling law", s(10), || c3_scaling(&cfg));
    r.check(4, "load and convert", s(5), || c4_load(&cfg));
    r.check(5, "loss ledger", s(5), || c5_ledger(&cfg));
    r.check(6, "ENBW", s(1), || c6_enbw(&cfg));
    r.check(7, "tomography", s(120), || c7_tomography(&cfg));
    r.check(8, "counting", s(60), || c8_counting(&cfg));
    r.check(9, "rate sweep", s(60), || c9_sweep(&cfg));
    r.check(10, "capacity and Bell", s(1), c10_capacity);
    r.check(11, "filters", s(1), || c11_filters(&cfg));
    assert!(r.failed.is_empty(), "failed criteria: {:?}\n{}", r.failed, r.lines.join("\n"));
}
