use cavfb_core::oracle::{decompose, psd, Approximation, Measurement, OracleMechanics, OracleModel, N_INPUT};
use cavfb_core::response::{CavityParams, LinearizedCavity, ThermalResponseModel};
use proptest::prelude::*;

fn model(
    (kex, ks, ka): (f64, f64, f64),
    db: f64,
    (gain, gamma): (f64, f64),
    n: f64,
    g_kerr: f64,
    mech: Option<(f64, f64, f64, f64)>,
) -> OracleModel {
    OracleModel {
        cavity: CavityParams::new(kex, ks, ka, 0.0).unwrap(),
        thermal: ThermalResponseModel::single_pole(gain, gamma).unwrap(),
        n_c: n,
        delta_bar: db,
        g_kerr,
        mechanics: mech.map(|(omega_m, gamma_m, g0, n_th)| OracleMechanics {
            omega_m,
            gamma_m,
            g0,
            n_th,
        }),
        approximation: Approximation::Exact,
    }
}

#[test]
fn vacuum_is_shot_noise_for_every_detector() {
    let m = model((1.0, 0.5, 0.5), -2.0, (0.0, 1.0), 0.0, 0.0, None);
    for w in [-3.0, 0.0, 0.7, 10.0] {
        for meas in [
            Measurement::Homodyne { eta: 0.6, theta: 0.4 },
            Measurement::Heterodyne { eta: 0.6, delta_lo: 1.0 },
        ] {
            assert!((psd(&m, meas, w).unwrap() - 1.0).abs() < 1e-14);
        }
    }
}

fn params() -> impl Strategy<Value = OracleModel> {
    (
        (0.1..3.0f64, 0.0..2.0f64, 0.0..2.0f64),
        -5.0..5.0f64,
        (-0.5..0.5f64, 0.05..5.0f64),
        0.0..2.0f64,
        -0.3..0.3f64,
        prop::option::of((1.0..6.0f64, 0.01..0.2f64, 0.0..0.2f64, 0.0..50.0f64)),
    )
        .prop_map(|(c, db, p, n, g, m)| model(c, db, p, n, g, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conjugate_rows_mirror(m in params(), w in 0.01..8.0f64) {
        let a = m.assemble(w).unwrap();
        let b = m.assemble(-w).unwrap();
        let pairs = [(0usize, 1usize), (1, 0), (2, 3), (3, 2)];
        let inputs = [1usize, 0, 3, 2, 5, 4, 7, 6];
        for &(r, rc) in &pairs {
            for &(c, cc) in &pairs {
                let x = a.system_matrix[r][c];
                let y = b.system_matrix[rc][cc].conj();
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()), "A[{r}][{c}]");
            }
            for j in 0..N_INPUT {
                let x = a.input_matrix[r][j];
                let y = b.input_matrix[rc][inputs[j]].conj();
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()), "B[{r}][{j}]");
            }
        }
    }

    #[test]
    fn decomposition_adds_up(m in params(), w in -8.0..8.0f64, theta in 0.0..3.2f64) {
        let meas = Measurement::Homodyne { eta: 0.8, theta };
        if let Ok(d) = decompose(&m, meas, w) {
            let s: f64 = d.offset + d.per_input.iter().sum::<f64>();
            prop_assert!((s - d.total).abs() <= 1e-10 * d.total.abs().max(1.0));
            prop_assert!(d.total >= -1e-9);
        }
    }

    #[test]
    fn cavity_determinant_is_loop_denominator(
        c in (0.1..3.0f64, 0.0..2.0f64, 0.1..2.0f64),
        db in -5.0..5.0f64,
        p in (-0.5..0.5f64, 0.05..5.0f64),
        n in 0.0..2.0f64,
        w in 0.01..8.0f64,
    ) {
        let m = model(c, db, p, n, 0.0, None);
        let mut open = m.clone();
        open.thermal = ThermalResponseModel::none();
        let ratio = m.assemble(w).unwrap().determinant() / open.assemble(w).unwrap().determinant();
        let lc = LinearizedCavity::new(m.cavity, m.thermal.clone(), n, db).unwrap();
        let expect = 1.0 - lc.chi_fb(w);
        prop_assert!((ratio - expect).norm() <= 1e-10 * expect.norm().max(1.0));
    }
}
