mod common;

use cavfb_core::fitting::{
    coherent_model, fit_coherent_response, fit_linewidth_series, fit_mech_spectrum, mech_model, thermometry,
    CoherentModel, CoherentSeed, FitStatus, PowerSeries, SeriesPoint, ThermometryModel, ThermometryPoint,
};
use cavfb_core::spectrum::{grid, Channel, ChannelData, Spectrum};
use cavfb_core::units::{hz_to_rad, rad_to_hz};
use common::{d1, d2, rel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy(x: Vec<f64>, clean: &[f64], noise: f64, seed: u64) -> Spectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<f64> = clean.iter().map(|v| v + noise * unit.sample(&mut rng)).collect();
    let mut sp = Spectrum::new(x).unwrap();
    sp.push_channel(Channel {
        label: "y".into(),
        data: ChannelData::Real(y),
        sigma: if noise > 0.0 { Some(vec![noise; clean.len()]) } else { None },
    })
    .unwrap();
    sp
}

fn bare_truth() -> [f64; 3] {
    [hz_to_rad(1.6e9), -hz_to_rad(5.3e9), hz_to_rad(0.5e9)]
}

fn bare_spectrum(noise: f64, seed: u64) -> Spectrum {
    let p = bare_truth();
    let x = grid(-p[1] - 3.0 * p[0], -p[1] + 3.0 * p[0], 401, false).unwrap();
    let y: Vec<f64> = x.iter().map(|&w| coherent_model(&p, w)).collect();
    noisy(x, &y, noise, seed)
}

#[test]
fn bare_response_within_three_sigma() {
    let truth = bare_truth();
    for seed in 1..=4 {
        let fit = fit_coherent_response(&bare_spectrum(0.01, seed), CoherentModel::Bare, CoherentSeed::default()).unwrap();
        assert_eq!(fit.status, FitStatus::Converged);
        for (i, t) in truth.iter().enumerate() {
            let z = (fit.values[i] - t) / fit.sigmas[i];
            assert!(z.abs() < 3.0, "seed {seed} {}: z = {z}", fit.names[i]);
        }
        assert!(fit.residual_norm <= fit.initial_residual_norm);
    }
}

#[test]
fn bare_response_converges_from_doubled_linewidth() {
    let truth = bare_truth();
    let seed = CoherentSeed {
        kappa_eff: Some(2.0 * truth[0]),
        ..Default::default()
    };
    let fit = fit_coherent_response(&bare_spectrum(0.01, 9), CoherentModel::Bare, seed).unwrap();
    assert_eq!(fit.status, FitStatus::Converged);
    assert!((fit.values[0] - truth[0]).abs() < 3.0 * fit.sigmas[0]);
    let half = CoherentSeed {
        kappa_eff: Some(0.5 * truth[0]),
        ..Default::default()
    };
    let fit = fit_coherent_response(&bare_spectrum(0.01, 9), CoherentModel::Bare, half).unwrap();
    assert!((fit.values[0] - truth[0]).abs() < 3.0 * fit.sigmas[0]);
}

#[test]
fn bare_response_exact_without_noise() {
    let fit = fit_coherent_response(&bare_spectrum(0.0, 0), CoherentModel::Bare, CoherentSeed::default()).unwrap();
    for (v, t) in fit.values.iter().zip(bare_truth()) {
        assert!(rel(*v, t) < 1e-8, "{v} vs {t}");
    }
}

#[test]
fn transparency_fit_recovers_mechanics() {
    // scaled units: kappa = 1
    let truth = [1.0, -5.0, 0.3, 0.004, 5.0, 0.01];
    let mut x = grid(2.0, 8.0, 301, false).unwrap();
    x.extend(grid(4.9, 5.1, 301, false).unwrap());
    x.sort_by(f64::total_cmp);
    x.dedup();
    let y: Vec<f64> = x.iter().map(|&w| coherent_model(&truth, w)).collect();
    let model = CoherentModel::WithMechanics {
        omega_m: 5.001,
        gamma_m: 0.012,
        g2: 0.005,
    };
    let fit = fit_coherent_response(&noisy(x.clone(), &y, 0.0, 0), model, CoherentSeed::default()).unwrap();
    assert_eq!(fit.status, FitStatus::Converged);
    for (v, t) in fit.values.iter().zip(truth) {
        assert!(rel(*v, t) < 1e-6, "{:?}", fit.values);
    }
    let fit = fit_coherent_response(&noisy(x, &y, 1e-3, 5), model, CoherentSeed::default()).unwrap();
    for (i, t) in truth.iter().enumerate() {
        assert!(((fit.values[i] - t) / fit.sigmas[i]).abs() < 3.5, "{}", fit.names[i]);
    }
}

#[test]
fn flat_reflection_is_singular() {
    let x = grid(0.0, 10.0, 100, false).unwrap();
    let y = vec![1.0; 100];
    let fit = fit_coherent_response(&noisy(x, &y, 0.01, 3), CoherentModel::Bare, CoherentSeed::default()).unwrap();
    assert_eq!(fit.status, FitStatus::Singular);
}

fn linewidth_series(dev: &common::Device, ns: &[f64], noise: f64, seed: u64) -> PowerSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let pts = ns
        .iter()
        .map(|&n| {
            let k = dev.system(n).effective_params().unwrap().0;
            SeriesPoint {
                n_c: n,
                value: k + noise * dev.kappa() * unit.sample(&mut rng),
                sigma: if noise > 0.0 { noise * dev.kappa() } else { 1.0 },
            }
        })
        .collect();
    PowerSeries::new(pts).unwrap()
}

#[test]
fn linewidth_slopes_of_both_devices() {
    let ns = [2.0, 50.0, 200.0, 400.0, 700.0, 1000.0, 1200.0];
    for (dev, target) in [(d1(), 44e3), (d2(1.5e6), -35e3)] {
        let exact = fit_linewidth_series(&linewidth_series(&dev, &ns, 0.0, 0)).unwrap();
        let v = rad_to_hz(exact.value("ka_sigma0").unwrap());
        assert!((v / target - 1.0).abs() < 1e-9, "{v}");
        assert!(rel(exact.value("kappa").unwrap(), dev.kappa()) < 1e-9);
        let fit = fit_linewidth_series(&linewidth_series(&dev, &ns, 0.002, 11)).unwrap();
        let (v, s) = fit.get("ka_sigma0").unwrap();
        assert!((v - hz_to_rad(target)).abs() < 3.0 * s);
    }
}

#[test]
fn sideband_width_within_three_sigma() {
    let sys = d1().system(1200.0);
    let ge = sys.gamma_eff().unwrap();
    let (k_eff, _) = sys.effective_params().unwrap();
    let hand = sys.mech.gamma_m + 4.0 * 1200.0 * sys.mech.g0.powi(2) / k_eff;
    assert!(rel(ge, hand) < 1e-12);
    let dl = sys.detection.delta_lo;
    let f = grid(dl - 15.0 * ge, dl + 15.0 * ge, 601, false).unwrap();
    let clean = sys.heterodyne_psd(&f).unwrap();
    for seed in 20..24 {
        let sp = noisy(f.clone(), clean.real("S_I").unwrap(), 0.01, seed);
        let fit = fit_mech_spectrum(&sp).unwrap();
        assert_eq!(fit.status, FitStatus::Converged);
        let (g, s) = fit.get("gamma_eff").unwrap();
        assert!((g - hand).abs() < 3.0 * s, "seed {seed}: {g} +/- {s} vs {hand}");
        assert!(fit.residual_norm <= fit.initial_residual_norm);
    }
}

#[test]
fn thermometry_textbook_limit_is_exact() {
    // no absorption, no heating: occupancy is n_th Gamma_m / Gamma_eff
    let mut dev = d1();
    dev.kappa_a_hz = 0.0;
    dev.kappa_s_hz = 1.2e9;
    dev.ka_sigma0_hz = 0.0;
    dev.heating_per_photon = 0.0;
    let ns = [1.4, 10.0, 100.0, 600.0, 1200.0];
    let pts: Vec<ThermometryPoint> = ns
        .iter()
        .map(|&n| {
            let s = dev.system(n);
            let (k, _) = s.effective_params().unwrap();
            let ge = s.gamma_eff().unwrap();
            let n_f = s.n_th() * s.mech.gamma_m / ge;
            // Lorentzian area of the heterodyne sideband
            let area = 8.0 * std::f64::consts::PI * dev.eta_ex * s.cavity.cavity.kappa_ex * s.mech.g0.powi(2) * n
                / (k * k)
                * n_f;
            ThermometryPoint {
                n_c: n,
                area,
                area_sigma: 1e-3 * area,
                kappa_eff: k,
                n_l: 0.0,
            }
        })
        .collect();
    let anchor = dev.system(1.4);
    let anchor_nf = anchor.n_th() * anchor.mech.gamma_m / anchor.gamma_eff().unwrap();
    let model = ThermometryModel {
        kappa_ex: dev.cavity().kappa_ex,
        g0: hz_to_rad(dev.g0_hz),
    };
    let res = thermometry(&pts, 1.4, anchor_nf, model).unwrap();
    for (&(n, v, _), &nn) in res.n_f.iter().zip(&ns) {
        let s = dev.system(nn);
        let expect = s.n_th() * s.mech.gamma_m / s.gamma_eff().unwrap();
        assert_eq!(n, nn);
        assert!(rel(v, expect) < 1e-12, "{v} vs {expect}");
    }
    assert!(rel(res.eta_ex, dev.eta_ex) < 1e-12);
}

#[test]
fn thermometry_needs_a_matching_anchor() {
    let p = ThermometryPoint {
        n_c: 5.0,
        area: 1.0,
        area_sigma: 0.1,
        kappa_eff: 1.0,
        n_l: 0.0,
    };
    let model = ThermometryModel { kappa_ex: 1.0, g0: 1.0 };
    assert!(thermometry(&[p], 6.0, 3.0, model).is_err());
    assert!(thermometry(&[p], 5.0, 3.0, model).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_never_increases_residual(
        gamma in 0.05..0.5f64,
        center in -1.0..1.0f64,
        area in 0.5..5.0f64,
        floor in 0.5..2.0f64,
        seed in 0u64..1000,
    ) {
        let x = grid(-5.0, 5.0, 201, false).unwrap();
        let p = [gamma, center, area, floor];
        let y: Vec<f64> = x.iter().map(|&w| mech_model(&p, w)).collect();
        let fit = fit_mech_spectrum(&noisy(x, &y, 0.02, seed)).unwrap();
        prop_assert!(fit.residual_norm <= fit.initial_residual_norm * (1.0 + 1e-12));
        if fit.status == FitStatus::Converged {
            prop_assert!(((fit.values[0] - gamma) / fit.sigmas[0]).abs() < 6.0);
        }
    }
}
