mod common;

use common::*;

#[test]
fn oracle_matches_closed_forms_on_random_sets() {
    let c = check_oracle_equivalence();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn oracle_equivalence_other_seeds() {
    for seed in [1, 2, 3] {
        let (worst, _, _) = oracle_equivalence(6, 301, seed);
        assert!(worst < 1e-6, "seed {seed}: {worst:e}");
    }
}

#[test]
fn linewidth_change_of_both_devices() {
    let c = check_effective_linewidth();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn squeezing_sweep_orderings() {
    let c = check_fig4();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn cooling_pipeline_recovers_generating_model() {
    let c = check_cooling_roundtrip();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn zero_gain_is_textbook_sideband_cooling() {
    let c = check_textbook_limit();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn invariant_suite() {
    let c = check_invariants();
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn noise_floor_quadratic_in_photon_number() {
    for ka in [1.5e6, 3e6] {
        let a = bg_excess(ka, 300.0);
        let dev = d2(ka);
        let k300 = dev.system(300.0).effective_params().unwrap().0;
        let k900 = dev.system(900.0).effective_params().unwrap().0;
        let b = bg_excess(ka, 900.0);
        assert!((b / a - 9.0 * (k300 / k900).powi(2)).abs() < 1e-9);
    }
}

#[test]
fn floor_at_fixed_fitted_product_falls_with_kappa_a() {
    // the opposite of the ordering the acceptance criterion asks for; see the
    // known-failure note in the acceptance report
    for n in [100.0, 1110.0] {
        let r = bg_excess(1.5e6, n) / bg_excess(3e6, n);
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }
}

#[test]
fn cooling_pipeline_three_sigma_across_seeds() {
    let dev = d1();
    for seed in 1..7 {
        let r = cooling_roundtrip(seed, 0.01, 0.01);
        assert!(r.all_converged);
        assert!((r.g0_hz.0 - dev.g0_hz).abs() <= 3.0 * r.g0_hz.1, "seed {seed}");
        assert!((r.gamma_m_hz.0 - dev.gamma_m_hz).abs() <= 3.0 * r.gamma_m_hz.1, "seed {seed}");
        for (n, v, s, m) in r.n_f.iter().skip(1) {
            assert!((v - m).abs() <= 3.0 * s, "seed {seed}, n_c {n}: {v} vs {m} +/- {s}");
        }
        assert!((r.eta_ex.0 / dev.eta_ex - 1.0).abs() < 0.08, "seed {seed}: eta {}", r.eta_ex.0);
    }
}

#[test]
fn noise_free_chain_recovers_eta_and_model_minimum() {
    let r = cooling_roundtrip(0, 0.0, 0.01);
    assert!((r.eta_ex.0 / 0.15 - 1.0).abs() < 0.05, "{}", r.eta_ex.0);
    assert!((r.ka_sigma0_hz.0 / 44e3 - 1.0).abs() < 1e-6);
    let last = r.n_f.last().unwrap();
    // the bath-heating option of the generator is tuned to the reported 4.3
    assert!((last.3 - 4.3).abs() < 0.05, "{}", last.3);
    assert!(rel(last.1, last.3) < 0.02);
}
