//! Brute-force linear-response solver used to check every closed form.
//!
//! The fluctuations `(da, da^dag, db, db^dag)` are solved directly from the
//! linearised Langevin equations at each frequency. Nothing here uses the
//! effective linewidth, the reservoir correlators or any other derived
//! quantity; feedback enters only through `sigma_d kappa_a (da + da^dag)` and
//! the `sigma_d`-mixed absorbed input.
//!
//! Input ordering (columns of the input matrix):
//! `a_ex, a_ex^dag, a_s, a_s^dag, a_a, a_a^dag, b, b^dag`.
//! The conjugate optical inputs are separate columns because the `da^dag`
//! row is driven by them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::response::{CavityParams, ThermalResponseModel};

pub const N_STATE: usize = 4;
pub const N_INPUT: usize = 8;

/// Condition numbers above this are reported as a singular system.
pub const MAX_CONDITION: f64 = 1e13;

pub const INPUT_LABELS: [&str; N_INPUT] = ["a_ex", "a_ex_dag", "a_s", "a_s_dag", "a_a", "a_a_dag", "b", "b_dag"];

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMechanics {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub g0: f64,
    pub n_th: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Approximation {
    /// Full model, every coupling kept, every coefficient at its own frequency.
    Exact,
    /// Counter-rotating couplings dropped and the cavity coefficients,
    /// including `sigma_d`, frozen at `freeze` (normally the mechanical
    /// frequency). This is the regime the sideband-cooling closed forms
    /// describe.
    ResolvedSideband { freeze: f64 },
}

/// Everything needed to assemble the linear system at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    pub cavity: CavityParams,
    pub thermal: ThermalResponseModel,
    pub n_c: f64,
    /// Shifted detuning (rad/s).
    pub delta_bar: f64,
    /// Kerr shift per photon (rad/s), zero for a linear cavity.
    pub g_kerr: f64,
    pub mechanics: Option<OracleMechanics>,
    pub approximation: Approximation,
}

/// Frequency-domain system `A x = B xi` plus the input occupations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub omega: f64,
    pub system_matrix: [[Complex64; N_STATE]; N_STATE],
    pub input_matrix: [[Complex64; N_INPUT]; N_STATE],
    /// `<xi^dag xi>` per input.
    pub normal: [f64; N_INPUT],
    /// `<xi xi^dag>` per input.
    pub antinormal: [f64; N_INPUT],
}

/// Detected quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Single-sideband heterodyne of the output field; the frequency argument
    /// is the photocurrent frequency and `delta_lo = Omega_m + omega_L - omega_LO`.
    Heterodyne { eta: f64, delta_lo: f64 },
    /// Balanced homodyne of the output quadrature at LO phase `theta`.
    Homodyne { eta: f64, theta: f64 },
    /// Photon flux lost into the absorption channel (the in-loop detector).
    InLoopFlux,
    /// `S_bb(Omega)`: normal-ordered phonon density, peaked at `-Omega_m`.
    PhononNormal,
    /// `S_b^dag b^dag(Omega)`: anti-normal phonon density, peaked at `+Omega_m`.
    PhononAntiNormal,
}

/// PSD split by input channel: `total = offset + sum(per_input)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub offset: f64,
    pub per_input: [f64; N_INPUT],
    pub total: f64,
}

impl OracleModel {
    fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        if !(self.n_c >= 0.0) {
            return Err(Error::invalid("n_c", "must be >= 0"));
        }
        if let Some(m) = &self.mechanics {
            if !(m.gamma_m > 0.0) {
                return Err(Error::invalid("gamma_m", "must be > 0"));
            }
            if !(m.n_th >= 0.0) {
                return Err(Error::invalid("n_th", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Assembles the system at angular frequency `omega`.
    pub fn assemble(&self, omega: f64) -> Result<LinearSystem> {
        self.validate()?;
        let cav = &self.cavity;
        let (ka, k) = (cav.kappa_a, cav.kappa());
        let (w_c, rs) = match self.approximation {
            Approximation::Exact => (omega, false),
            Approximation::ResolvedSideband { freeze } => (freeze, true),
        };
        let s = self.thermal.sigma_d(self.n_c, w_c);
        let kerr = Complex64::new(0.0, self.n_c * self.g_kerr);
        let db = self.delta_bar;

        let mut a = [[ZERO; N_STATE]; N_STATE];
        let mut b = [[ZERO; N_INPUT]; N_STATE];

        // cavity field and its conjugate
        a[0][0] = k / 2.0 - I * (w_c + db) - s * ka + kerr;
        a[0][1] = -s * ka + kerr;
        a[1][1] = k / 2.0 - I * (w_c - db) + s * ka - kerr;
        a[1][0] = s * ka - kerr;

        let (sex, ss, sa) = (cav.kappa_ex.sqrt(), cav.kappa_s.sqrt(), ka.sqrt());
        b[0][0] = sex.into();
        b[0][2] = ss.into();
        b[0][4] = sa * (ONE - s);
        b[0][5] = -sa * s;
        b[1][1] = sex.into();
        b[1][3] = ss.into();
        b[1][5] = sa * (ONE + s);
        b[1][4] = sa * s;

        let mut normal = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mut antinormal = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];

        match &self.mechanics {
            Some(m) => {
                let g = m.g0 * self.n_c.sqrt();
                let ig = I * g;
                a[0][2] = -ig;
                a[0][3] = -ig;
                a[1][2] = ig;
                a[1][3] = ig;
                a[2][2] = m.gamma_m / 2.0 - I * (omega - m.omega_m);
                a[2][0] = -ig;
                a[2][1] = -ig;
                a[3][3] = m.gamma_m / 2.0 - I * (omega + m.omega_m);
                a[3][0] = ig;
                a[3][1] = ig;
                let sg = m.gamma_m.sqrt();
                b[2][6] = sg.into();
                b[3][7] = sg.into();
                normal[6] = m.n_th;
                normal[7] = m.n_th + 1.0;
                antinormal[6] = m.n_th + 1.0;
                antinormal[7] = m.n_th;
            }
            None => {
                // Decoupled unit oscillator keeps the matrix square and regular.
                a[2][2] = ONE;
                a[3][3] = ONE;
                normal[6] = 0.0;
                normal[7] = 1.0;
            }
        }

        if rs {
            a[0][1] = ZERO;
            a[1][0] = ZERO;
            a[0][3] = ZERO;
            a[1][2] = ZERO;
            a[2][1] = ZERO;
            a[3][0] = ZERO;
        }

        Ok(LinearSystem {
            omega,
            system_matrix: a,
            input_matrix: b,
            normal,
            antinormal,
        })
    }
}

impl LinearSystem {
    /// Transfer matrix `A^-1 B`, rows = state variables, columns = inputs.
    pub fn solve(&self) -> Result<[[Complex64; N_INPUT]; N_STATE]> {
        let inv = invert(&self.system_matrix).ok_or(Error::SingularSystem {
            omega: self.omega,
            condition: f64::INFINITY,
        })?;
        // Rows carry different units, so judge conditioning after scaling
        // each row to unit max-norm: cond(DA) = |DA|_1 |A^-1 D^-1|_1.
        let d: Vec<f64> = self
            .system_matrix
            .iter()
            .map(|row| 1.0 / row.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .collect();
        let mut da = self.system_matrix;
        let mut inv_d = inv;
        for r in 0..N_STATE {
            for c in 0..N_STATE {
                da[r][c] *= d[r];
                inv_d[r][c] /= d[c];
            }
        }
        let cond = norm1(&da) * norm1(&inv_d);
        if !(cond < MAX_CONDITION) {
            return Err(Error::SingularSystem {
                omega: self.omega,
                condition: cond,
            });
        }
        let mut t = [[ZERO; N_INPUT]; N_STATE];
        for r in 0..N_STATE {
            for c in 0..N_INPUT {
                t[r][c] = (0..N_STATE).map(|j| inv[r][j] * self.input_matrix[j][c]).sum();
            }
        }
        Ok(t)
    }

    /// Determinant by elimination, used to locate poles.
    pub fn determinant(&self) -> Complex64 {
        let mut m = self.system_matrix;
        let mut det = ONE;
        for col in 0..N_STATE {
            let p = (col..N_STATE)
                .max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))
                .unwrap();
            if m[p][col] == ZERO {
                return ZERO;
            }
            if p != col {
                m.swap(p, col);
                det = -det;
            }
            det *= m[col][col];
            for r in col + 1..N_STATE {
                let f = m[r][col] / m[col][col];
                for c in col..N_STATE {
                    let v = m[col][c];
                    m[r][c] -= f * v;
                }
            }
        }
        det
    }
}

fn norm1<const N: usize>(m: &[[Complex64; N]; N]) -> f64 {
    (0..N)
        .map(|c| (0..N).map(|r| m[r][c].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(m: &[[Complex64; N_STATE]; N_STATE]) -> Option<[[Complex64; N_STATE]; N_STATE]> {
    let mut a = *m;
    let mut inv = [[ZERO; N_STATE]; N_STATE];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = ONE;
    }
    for col in 0..N_STATE {
        let p = (col..N_STATE).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))?;
        if a[p][col].norm() == 0.0 {
            return None;
        }
        a.swap(p, col);
        inv.swap(p, col);
        let d = a[col][col];
        for c in 0..N_STATE {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..N_STATE {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == ZERO {
                continue;
            }
            for c in 0..N_STATE {
                let (x, y) = (a[col][c], inv[col][c]);
                a[r][c] -= f * x;
                inv[r][c] -= f * y;
            }
        }
    }
    Some(inv)
}

fn unit(i: usize) -> [Complex64; N_INPUT] {
    let mut v = [ZERO; N_INPUT];
    v[i] = ONE;
    v
}

fn combine(x: [Complex64; N_INPUT], cx: Complex64, y: [Complex64; N_INPUT], cy: Complex64) -> [Complex64; N_INPUT] {
    let mut out = [ZERO; N_INPUT];
    for i in 0..N_INPUT {
        out[i] = cx * x[i] + cy * y[i];
    }
    out
}

/// Per-input densities of the detected operator `sum_i d_i xi_i`.
fn weights(d: &[Complex64; N_INPUT], occ: &[f64; N_INPUT]) -> [f64; N_INPUT] {
    let mut w = [0.0; N_INPUT];
    for i in 0..N_INPUT {
        w[i] = d[i].norm_sqr() * occ[i];
    }
    w
}

fn symmetrized(d: &[Complex64; N_INPUT], sys: &LinearSystem) -> [f64; N_INPUT] {
    let mut w = [0.0; N_INPUT];
    for i in 0..N_INPUT {
        w[i] = 0.5 * d[i].norm_sqr() * (sys.normal[i] + sys.antinormal[i]);
    }
    w
}

/// Frequency at which the linear system has to be solved for `measurement`
/// reported at `freq`.
pub fn solve_frequency(model: &OracleModel, measurement: Measurement, freq: f64) -> f64 {
    match measurement {
        Measurement::Heterodyne { delta_lo, .. } => {
            let om = model.mechanics.map_or(0.0, |m| m.omega_m);
            om + (freq - delta_lo)
        }
        Measurement::PhononNormal => -freq,
        _ => freq,
    }
}

/// Channel-resolved PSD of `measurement` at `freq`, normalised to shot noise
/// for the optical detectors.
pub fn decompose(model: &OracleModel, measurement: Measurement, freq: f64) -> Result<Decomposition> {
    let omega = solve_frequency(model, measurement, freq);
    let sys = model.assemble(omega)?;
    let t = sys.solve()?;
    let sex = model.cavity.kappa_ex.sqrt();
    let out = combine(unit(0), ONE, t[0], Complex64::new(-sex, 0.0));
    let out_dag = combine(unit(1), ONE, t[1], Complex64::new(-sex, 0.0));

    let (offset, mut per_input) = match measurement {
        Measurement::Heterodyne { eta, .. } => {
            let mut w = weights(&out, &sys.normal);
            w.iter_mut().for_each(|x| *x *= eta);
            (1.0, w)
        }
        Measurement::Homodyne { eta, theta } => {
            let x = combine(out, Complex64::from_polar(1.0, -theta), out_dag, Complex64::from_polar(1.0, theta));
            let mut w = symmetrized(&x, &sys);
            w.iter_mut().for_each(|v| *v *= eta);
            (1.0 - eta, w)
        }
        Measurement::InLoopFlux => {
            let sa = model.cavity.kappa_a.sqrt();
            let mut x = combine(t[0], Complex64::new(-sa, 0.0), t[1], Complex64::new(-sa, 0.0));
            x[4] += ONE;
            x[5] += ONE;
            (0.0, symmetrized(&x, &sys))
        }
        Measurement::PhononNormal => (0.0, weights(&t[2], &sys.normal)),
        Measurement::PhononAntiNormal => (0.0, weights(&t[2], &sys.antinormal)),
    };
    for v in per_input.iter_mut() {
        if v.abs() < f64::MIN_POSITIVE {
            *v = 0.0;
        }
    }
    let total = offset + per_input.iter().sum::<f64>();
    Ok(Decomposition {
        offset,
        per_input,
        total,
    })
}

/// PSD of `measurement` at `freq`.
pub fn psd(model: &OracleModel, measurement: Measurement, freq: f64) -> Result<f64> {
    Ok(decompose(model, measurement, freq)?.total)
}

/// Effective mechanical linewidth read off the `b_in -> db` response at the
/// mechanical frequency, assuming a Lorentzian centred there.
pub fn effective_mechanical_linewidth(model: &OracleModel) -> Result<f64> {
    let m = model
        .mechanics
        .ok_or_else(|| Error::invalid("mechanics", "model has no mechanical mode"))?;
    let t = model.assemble(m.omega_m)?.solve()?;
    // db = sqrt(Gamma_m) chi_eff b_in, chi_eff(Omega_m) = 2 / Gamma_eff
    Ok((2.0 * m.gamma_m.sqrt() / t[2][6]).re)
}

/// Closed-loop factor `1 / (1 - chi_fb)` read off the cavity block: the
/// ratio of its determinant without and with the absorption feedback.
/// Mechanics and Kerr are switched off.
///
/// The `a_ex -> a` transfer element alone is not this factor; it also carries
/// the direct `(1 + kappa_a sigma_d chi_c0^*(-omega))` coupling through the
/// conjugate field.
pub fn closed_loop_ratio(model: &OracleModel, omega: f64) -> Result<Complex64> {
    let mut closed = model.clone();
    closed.mechanics = None;
    closed.g_kerr = 0.0;
    let mut open = closed.clone();
    open.thermal = ThermalResponseModel::none();
    let d_closed = closed.assemble(omega)?.determinant();
    let d_open = open.assemble(omega)?.determinant();
    if d_closed.norm() == 0.0 {
        return Err(Error::SingularSystem {
            omega,
            condition: f64::INFINITY,
        });
    }
    Ok(d_open / d_closed)
}
