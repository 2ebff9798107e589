//! End-to-end pipeline behaviour: determinism, config handling, exit codes
//! and cross-module consistency.

use std::path::Path;
use std::process::Command as Proc;

use eotx::counting::sweep_rate;
use eotx::figures::DeviceParams;
use eotx::optical::OpticalNoiseModel;
use eotx::pipeline::{
    cmd_tomography, photon_chain, run, sweep_model, Command, ExperimentConfig, Output, RunReport, TableFormat,
};
use eotx::tomography::{fidelity, reconstruct, SingleModeState};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eotx")
}

fn eotx(args: &[&str], out: &Path) -> std::process::Output {
    Proc::new(bin()).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn default_toml() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap()
}

#[test]
fn shipped_config_is_the_reference() {
    let cfg = ExperimentConfig::from_toml_str(&default_toml(), "configs/default.toml").unwrap();
    assert_eq!(cfg, ExperimentConfig::reference());
}

#[test]
fn resolved_config_echo_reparses() {
    let cfg = ExperimentConfig::reference();
    let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap(), "echo").unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["sweep", "rabi", "tomography"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert!(eotx(&[cmd, "--threads", "1"], &a).status.success());
        assert!(eotx(&[cmd, "--threads", "4"], &b).status.success());
        let ra = std::fs::read(a.join("report.json")).unwrap();
        let rb = std::fs::read(b.join("report.json")).unwrap();
        assert_eq!(ra, rb, "{cmd} report differs");
        for f in serde_json::from_slice::<RunReport>(&ra).unwrap().files {
            assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{cmd}/{f}");
        }
        assert!(a.join("provenance.json").exists());
    }
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(eotx(&["sweep", "--seed", "1"], &a).status.success());
    assert!(eotx(&["sweep", "--seed", "2"], &b).status.success());
    assert_ne!(std::fs::read(a.join("counting_tags.csv")).unwrap(), std::fs::read(b.join("counting_tags.csv")).unwrap());
}

#[test]
fn json_format_writes_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(eotx(&["figures", "--format", "json"], dir.path()).status.success());
    let t: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("figures_rates.json")).unwrap()).unwrap();
    assert_eq!(t["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn unknown_config_key_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, default_toml().replace("[device]\n", "[device]\nbogus_hz = 1.0\n")).unwrap();
    let o = eotx(&["figures", "--config", p.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_hz"));
}

#[test]
fn missing_section_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run_only.toml");
    std::fs::write(&p, "[run]\nseed = 3\n").unwrap();
    let o = eotx(&["figures", "--config", p.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("device"));
}

#[test]
fn single_rabi_angle_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rabi.toml");
    let text = default_toml();
    let start = text.find("rabi_angles_rad = [").unwrap();
    let end = start + text[start..].find(']').unwrap() + 1;
    std::fs::write(&p, format!("{}rabi_angles_rad = [0.0]{}", &text[..start], &text[end..])).unwrap();
    let o = eotx(&["rabi", "--config", p.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn few_shots_flag_insufficient_statistics() {
    let mut cfg = ExperimentConfig::reference();
    cfg.tomography.as_mut().unwrap().shots = 100;
    let dir = tempfile::tempdir().unwrap();
    let mut out = Output::new(dir.path(), TableFormat::Csv).unwrap();
    let r = cmd_tomography(&cfg, &mut out).unwrap();
    assert!(r.statistically_insufficient);
}

#[test]
fn exact_moments_reconstruct_the_prepared_state() {
    let target = eotx::pipeline::prepared_single_photon(0.95, 5).unwrap();
    let rec = reconstruct(&target.moment_table(4), 5).unwrap();
    assert!(fidelity(&rec.state, &target).unwrap() > 0.9999);
    let hp = eotx::pipeline::prepared_half_photon(5).unwrap();
    let rec = reconstruct(&hp.moment_table(4), 5).unwrap();
    assert!(fidelity(&rec.state, &hp).unwrap() > 0.9999);
    let vac = SingleModeState::vacuum(5);
    assert!(fidelity(&reconstruct(&vac.moment_table(4), 5).unwrap().state, &vac).unwrap() > 0.9999);
}

#[test]
fn photon_and_sweep_share_the_intracavity_photon_number() {
    let cfg = ExperimentConfig::reference();
    let dir = tempfile::tempdir().unwrap();
    let mut out = Output::new(dir.path().join("p"), TableFormat::Csv).unwrap();
    let p = run(Command::Photon, &cfg, &mut out).unwrap().photon.unwrap();
    let mut out = Output::new(dir.path().join("s"), TableFormat::Csv).unwrap();
    let s = run(Command::Sweep, &cfg, &mut out).unwrap().sweep.unwrap();
    assert!((p.n_cav - s.n_cav).abs() <= 1e-12);
    assert!((s.eta_det_cav - s.eta_det / p.n_cav).abs() <= 1e-12 * s.eta_det_cav);
}

#[test]
fn photon_report_shows_revival_and_quarter_scaling() {
    let cfg = ExperimentConfig::reference();
    let dir = tempfile::tempdir().unwrap();
    let mut out = Output::new(dir.path(), TableFormat::Csv).unwrap();
    let p = run(Command::Photon, &cfg, &mut out).unwrap().photon.unwrap();
    assert!(p.on_resonance_revival);
    assert!((4.0 * p.hp_sp_peak_ratio - 1.0).abs() <= 0.02);
    assert!(p.revival_time_s.unwrap() > p.best_arrival_s);
}

#[test]
fn sweep_throughput_matches_figures_of_merit() {
    let cfg = ExperimentConfig::reference();
    let chain = photon_chain(&cfg).unwrap();
    let model = sweep_model(&cfg, &chain).unwrap();
    let d = DeviceParams::reference();
    for row in sweep_rate(&cfg.counting().unwrap().sweep_rates_hz, &model).unwrap() {
        let fig = d.derived(row.rate_hz, row.n_e).unwrap();
        assert!((row.throughput_hz - fig.theta_hz).abs() <= 1e-12 * fig.theta_hz);
        assert!((row.c_ub_hz - fig.c_ub_hz).abs() <= 1e-12 * fig.c_ub_hz.max(1e-300));
    }
}

#[test]
fn noiseless_sweep_reports_unbounded_snr() {
    let cfg = ExperimentConfig::reference();
    let chain = photon_chain(&cfg).unwrap();
    let mut model = sweep_model(&cfg, &chain).unwrap();
    model.noise = OpticalNoiseModel { dark_per_pulse: 0.0, inelastic_coeff: 0.0, ..model.noise };
    model.thermal.amp_low = 0.0;
    model.thermal.amp_high = 0.0;
    let rows = sweep_rate(&[1e3], &model).unwrap();
    assert_eq!(rows[0].snr, None);
}
