//! Homodyne quadrature spectra of a Kerr cavity whose absorption also drives
//! photothermal feedback.
//!
//! The closed forms hold for a single thermal pole at zero shifted detuning.
//! Anything else goes through [`oracle`](crate::oracle).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::oracle::{self, Approximation, Measurement, OracleModel};
use crate::response::{CavityParams, ThermalResponseModel};
use crate::units::{C_LIGHT, HBAR};

/// Relative mismatch tolerated between a stated Kerr rate and the material
/// estimate before it counts as an override.
pub const KERR_ESTIMATE_TOLERANCE: f64 = 1e-6;

/// `g_Kerr = -omega_c (n2/n0) hbar omega_c c / (V n0)`.
pub fn kerr_coupling_estimate(omega_c: f64, n0: f64, n2: f64, v_mode: f64) -> Result<f64> {
    for (name, v) in [("omega_c", omega_c), ("n0", n0), ("v_mode", v_mode)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(name, "must be finite and > 0"));
        }
    }
    if !(n2 >= 0.0) || !n2.is_finite() {
        return Err(Error::invalid("n2", "must be finite and >= 0"));
    }
    Ok(-omega_c * (n2 / n0) * HBAR * omega_c * C_LIGHT / (v_mode * n0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrMaterial {
    pub n0: f64,
    pub n2: f64,
    pub v_mode: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrParams {
    /// Kerr shift per photon (rad/s), usually negative.
    pub g_kerr: f64,
    pub material: Option<KerrMaterial>,
    /// Accept a `g_kerr` that disagrees with the material estimate.
    pub overridden: bool,
}

impl KerrParams {
    pub fn new(g_kerr: f64) -> Self {
        KerrParams {
            g_kerr,
            material: None,
            overridden: false,
        }
    }

    pub fn from_material(omega_c: f64, material: KerrMaterial) -> Result<Self> {
        Ok(KerrParams {
            g_kerr: kerr_coupling_estimate(omega_c, material.n0, material.n2, material.v_mode)?,
            material: Some(material),
            overridden: false,
        })
    }

    /// Checks `g_kerr` against the material estimate when both are known.
    pub fn validate(&self, omega_c: Option<f64>) -> Result<()> {
        if !self.g_kerr.is_finite() {
            return Err(Error::invalid("g_kerr", "must be finite"));
        }
        if let (Some(m), Some(w), false) = (self.material, omega_c, self.overridden) {
            let est = kerr_coupling_estimate(w, m.n0, m.n2, m.v_mode)?;
            let scale = est.abs().max(self.g_kerr.abs());
            if scale > 0.0 && (self.g_kerr - est).abs() > KERR_ESTIMATE_TOLERANCE * scale {
                return Err(Error::invalid(
                    "g_kerr",
                    format!("{:e} rad/s disagrees with material estimate {est:e}; set override to keep it", self.g_kerr),
                ));
            }
        }
        Ok(())
    }
}

/// One frequency of the quadrature spectrum, split by origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpectrumPoint {
    pub total: f64,
    /// Kerr-only spectrum, shot noise included.
    pub kerr_part: f64,
    pub excess_absorption: f64,
    pub excess_coherent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleMethod {
    ClosedForm,
    /// The closed-form angle was undefined and the PSD was minimised
    /// numerically instead.
    NumericFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalAngle {
    /// Angle in `[0, pi)`.
    pub theta: f64,
    pub method: AngleMethod,
    /// The `A` coefficient of the angle condition (NaN when undefined).
    pub a: f64,
    /// The `B` coefficient, always positive.
    pub b: f64,
}

/// Both readings of the dissipation-improved squeezing condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Improvement {
    /// `gain (kappa^2 + 4 omega^2) < g_kerr (8 omega^2 - 4 kappa gamma)` taken literally.
    pub literal_inequality: bool,
    /// Sign of the evaluated total excess noise, `S_ex < 0`.
    pub numeric_sign: bool,
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Kerr cavity with coexisting photothermal feedback, linearised at
/// `n_c` photons and shifted detuning `delta_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingSystem {
    pub cavity: CavityParams,
    pub thermal: ThermalResponseModel,
    pub kerr: KerrParams,
    pub eta_ex: f64,
    pub n_c: f64,
    pub delta_bar: f64,
}

impl SqueezingSystem {
    pub fn new(
        cavity: CavityParams,
        thermal: ThermalResponseModel,
        kerr: KerrParams,
        eta_ex: f64,
        n_c: f64,
        delta_bar: f64,
    ) -> Result<Self> {
        cavity.validate()?;
        kerr.validate(cavity.resonance)?;
        if !(0.0..=1.0).contains(&eta_ex) {
            return Err(Error::invalid("eta_ex", "detection efficiency must lie in [0, 1]"));
        }
        if !(n_c >= 0.0) || !n_c.is_finite() {
            return Err(Error::invalid("n_c", "must be finite and >= 0"));
        }
        Ok(SqueezingSystem {
            cavity,
            thermal,
            kerr,
            eta_ex,
            n_c,
            delta_bar,
        })
    }

    fn closed_form_pole(&self) -> Result<(f64, f64)> {
        if !self.thermal.is_single_pole() {
            return Err(Error::Unsupported(
                "closed-form squeezing spectra need a single thermal pole; use the oracle".into(),
            ));
        }
        if self.delta_bar.abs() > 1e-9 * self.cavity.kappa() {
            return Err(Error::Unsupported(
                "closed-form squeezing spectra assume zero shifted detuning; use the oracle".into(),
            ));
        }
        let p = self.thermal.poles()[0];
        Ok((p.gain, p.gamma))
    }

    /// Closed-form spectrum at `omega` and homodyne angle `theta`.
    pub fn homodyne_psd(&self, omega: f64, theta: f64) -> Result<QuadratureSpectrumPoint> {
        let (gain, gamma) = self.closed_form_pole()?;
        let k = self.cavity.kappa();
        let (eta_c, eta_a) = (self.cavity.eta_c(), self.cavity.eta_a());
        let (n, g, eta) = (self.n_c, self.kerr.g_kerr, self.eta_ex);
        let kk = k * k + 4.0 * omega * omega;
        let lor = omega * omega + gamma * gamma;
        let (s, c) = theta.sin_cos();

        let kerr_part = 1.0 - 16.0 * n * eta * eta_c * k * s * g * (kk * c - 4.0 * n * k * s * g) / (kk * kk);
        let common = 16.0 * n * n * eta * eta_a * eta_c * k * k * s * s / lor;
        let excess_absorption = common * gain * gain / kk;
        let excess_coherent = common * 4.0 * gain * g * (k * gamma - 2.0 * omega * omega) / (kk * kk);
        Ok(QuadratureSpectrumPoint {
            total: kerr_part + excess_absorption + excess_coherent,
            kerr_part,
            excess_absorption,
            excess_coherent,
        })
    }

    /// Spectrum from the brute-force solver; valid for any pole set and
    /// detuning.
    pub fn homodyne_psd_oracle(&self, omega: f64, theta: f64) -> Result<f64> {
        oracle::psd(
            &self.oracle_model(),
            Measurement::Homodyne {
                eta: self.eta_ex,
                theta,
            },
            omega,
        )
    }

    pub fn oracle_model(&self) -> OracleModel {
        OracleModel {
            cavity: self.cavity,
            thermal: self.thermal.clone(),
            n_c: self.n_c,
            delta_bar: self.delta_bar,
            g_kerr: self.kerr.g_kerr,
            mechanics: None,
            approximation: Approximation::Exact,
        }
    }

    /// Minimum Kerr-only spectrum and the angle reaching it.
    pub fn kerr_min_and_angle(&self, omega: f64) -> Result<(f64, f64)> {
        let g = self.kerr.g_kerr;
        if g == 0.0 {
            return Err(Error::Degenerate("squeezing angle undefined without Kerr coupling".into()));
        }
        let k = self.cavity.kappa();
        let c = self.eta_ex * self.cavity.eta_c();
        if self.n_c == 0.0 {
            return Ok((1.0, wrap_angle(PI / 4.0 * g.signum())));
        }
        let x = (k * k + 4.0 * omega * omega) / (4.0 * self.n_c * k * g);
        let s_min = 1.0 - 2.0 * c / ((x * x + 1.0).sqrt() + 1.0);
        Ok((s_min, wrap_angle(x.atan() / 2.0)))
    }

    /// The `(A, B)` pair whose ratio fixes the optimal angle with feedback.
    pub fn angle_coefficients(&self, omega: f64) -> Result<(f64, f64)> {
        let (gain, gamma) = self.closed_form_pole()?;
        let k = self.cavity.kappa();
        let eta_a = self.cavity.eta_a();
        let (n, g) = (self.n_c, self.kerr.g_kerr);
        let kk = k * k + 4.0 * omega * omega;
        let lor = gamma * gamma + omega * omega;
        let a = n
            * k
            * (4.0 * eta_a * gain * g * (2.0 * omega * omega - k * gamma) - eta_a * gain * gain * kk - 4.0 * g * g * lor)
            / g;
        Ok((a, kk * lor))
    }

    /// Angle minimising the full closed-form spectrum, in `[0, pi)`.
    ///
    /// The condition is `(cos 2theta, sin 2theta) ~ sign(g_kerr) (-A, B)`,
    /// which holds for either sign of the Kerr coupling.
    pub fn combined_optimal_angle(&self, omega: f64) -> Result<OptimalAngle> {
        let (_, gamma) = self.closed_form_pole()?;
        let k = self.cavity.kappa();
        let g = self.kerr.g_kerr;
        let b = (k * k + 4.0 * omega * omega) * (gamma * gamma + omega * omega);
        if g == 0.0 || self.n_c == 0.0 {
            return Ok(OptimalAngle {
                theta: self.numeric_min_angle(omega)?,
                method: AngleMethod::NumericFallback,
                a: f64::NAN,
                b,
            });
        }
        let (a, b) = self.angle_coefficients(omega)?;
        if a == 0.0 {
            return Ok(OptimalAngle {
                theta: self.numeric_min_angle(omega)?,
                method: AngleMethod::NumericFallback,
                a,
                b,
            });
        }
        let sg = g.signum();
        Ok(OptimalAngle {
            theta: wrap_angle(0.5 * (sg * b).atan2(-sg * a)),
            method: AngleMethod::ClosedForm,
            a,
            b,
        })
    }

    /// Angle from the arctangent branch rule as usually quoted, which picks
    /// the minimum only for a positive Kerr coupling.
    pub fn branch_rule_angle(&self, omega: f64) -> Result<f64> {
        let (a, b) = self.angle_coefficients(omega)?;
        let t = (-b / a).atan();
        Ok(wrap_angle(if a < 0.0 { t / 2.0 } else { (t + PI) / 2.0 }))
    }

    /// Golden-section minimisation of the closed-form total over one period,
    /// after a coarse scan to isolate the basin.
    pub fn numeric_min_angle(&self, omega: f64) -> Result<f64> {
        let f = |t: f64| self.homodyne_psd(omega, t).map(|p| p.total);
        golden_min_periodic(f, PI)
    }

    /// Literal inequality and the evaluated sign of the total excess noise.
    pub fn improvement_predicate(&self, omega: f64, theta: f64) -> Result<Improvement> {
        let (gain, gamma) = self.closed_form_pole()?;
        let k = self.cavity.kappa();
        let g = self.kerr.g_kerr;
        let lhs = gain * (k * k + 4.0 * omega * omega);
        let rhs = g * (8.0 * omega * omega - 4.0 * k * gamma);
        let p = self.homodyne_psd(omega, theta)?;
        Ok(Improvement {
            literal_inequality: lhs < rhs,
            numeric_sign: p.excess_absorption + p.excess_coherent < 0.0,
        })
    }

    /// Exact criterion for `S_ex < 0` at any nonzero angle:
    /// `gain (gain (kappa^2 + 4 omega^2) + 4 g_kerr (kappa gamma - 2 omega^2)) < 0`.
    pub fn improvement_exact(&self, omega: f64) -> Result<bool> {
        let (gain, gamma) = self.closed_form_pole()?;
        let k = self.cavity.kappa();
        let g = self.kerr.g_kerr;
        Ok(gain * (gain * (k * k + 4.0 * omega * omega) + 4.0 * g * (k * gamma - 2.0 * omega * omega)) < 0.0)
    }
}

/// Minimum of a `period`-periodic function: 720-point scan, then golden
/// section on the bracketing cell.
pub fn golden_min_periodic<F>(f: F, period: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const SCAN: usize = 720;
    let step = period / SCAN as f64;
    let mut best = (0.0, f(0.0)?);
    for i in 1..SCAN {
        let t = i as f64 * step;
        let v = f(t)?;
        if v < best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(wrap_angle(0.5 * (a + b)))
}
