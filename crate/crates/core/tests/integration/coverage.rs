//! Many-seed statistical checks: jackknife error bars must cover the truth
//! at their nominal rate.

use eotx::pipeline::{prepared_half_photon, prepared_single_photon, tomograph, ExperimentConfig};
use eotx::rng::subseed;
use eotx::tomography::{raw_moments, synthesize_shots, ShotLabel, SingleModeState};
use rayon::prelude::*;

#[test]
fn tomography_error_bars_cover_true_moments() {
    let cfg = ExperimentConfig::reference();
    let mut t = cfg.tomography().unwrap().clone();
    t.shots = 100_000;
    let sp = prepared_single_photon(t.sp_photon_fraction, t.n_cut).unwrap();
    let hp = prepared_half_photon(t.n_cut).unwrap();
    let vac = SingleModeState::vacuum(t.n_cut);
    let hits: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let refb = synthesize_shots(&vac, t.added_noise_quanta, t.shots, subseed(k, "ref"), ShotLabel::VacuumReference)
                .unwrap();
            let reference = raw_moments(&refb, t.order).unwrap();
            let (_, m_sp, _) = tomograph(&sp, &reference, &t, subseed(k, "sp")).unwrap();
            let (_, m_hp, _) = tomograph(&hp, &reference, &t, subseed(k, "hp")).unwrap();
            let n_ok = (m_sp.get(1, 1).re - 0.95).abs() <= 3.0 * m_sp.err(1, 1);
            let a_ok = (m_hp.get(0, 1).re - 0.5).abs() <= 3.0 * m_hp.err(0, 1);
            (n_ok, a_ok)
        })
        .collect();
    let n_cov = hits.iter().filter(|h| h.0).count();
    let a_cov = hits.iter().filter(|h| h.1).count();
    // nominal 99.7%; 95 leaves room for jackknife noise in the error bars
    assert!(n_cov >= 95, "photon-number coverage {n_cov}/100");
    assert!(a_cov >= 95, "field-mean coverage {a_cov}/100");
}
