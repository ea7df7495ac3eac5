use num_complex::Complex64;

use crate::error::{Error, Result};

use super::params::{CavityParams, ThermalResponseModel};
use super::steady_state::MeanField;

/// `|1 - chi_fb|` below this value is treated as a crossed loop pole.
pub const LOOP_TOLERANCE: f64 = 1e-9;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Photon-number-enhanced dissipation coefficient `n_c sigma_0(omega)`.
pub fn sigma_d(thermal: &ThermalResponseModel, n_c: f64, omega: f64) -> Complex64 {
    thermal.sigma_d(n_c, omega)
}

/// Bare cavity susceptibility `1 / (kappa/2 - i(omega + delta_bar))`.
pub fn chi_c0(cavity: &CavityParams, delta_bar: f64, omega: f64) -> Complex64 {
    1.0 / (Complex64::new(cavity.kappa() / 2.0, 0.0) - I * (omega + delta_bar))
}

/// A cavity linearised around one mean-field solution.
///
/// Bundles everything the feedback formulas need so callers do not have to
/// thread `n_c` and `delta_bar` through every call.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedCavity {
    pub cavity: CavityParams,
    pub thermal: ThermalResponseModel,
    pub n_c: f64,
    pub delta_bar: f64,
}

impl LinearizedCavity {
    pub fn new(cavity: CavityParams, thermal: ThermalResponseModel, n_c: f64, delta_bar: f64) -> Result<Self> {
        cavity.validate()?;
        if !(n_c >= 0.0) || !n_c.is_finite() {
            return Err(Error::invalid("n_c", format!("photon number must be finite and >= 0, got {n_c}")));
        }
        if !delta_bar.is_finite() {
            return Err(Error::invalid("delta_bar", "must be finite"));
        }
        Ok(LinearizedCavity {
            cavity,
            thermal,
            n_c,
            delta_bar,
        })
    }

    pub fn from_mean_field(cavity: CavityParams, thermal: ThermalResponseModel, mf: &MeanField) -> Result<Self> {
        Self::new(cavity, thermal, mf.n_c, mf.delta_bar)
    }

    pub fn sigma_d(&self, omega: f64) -> Complex64 {
        self.thermal.sigma_d(self.n_c, omega)
    }

    pub fn chi_c0(&self, omega: f64) -> Complex64 {
        chi_c0(&self.cavity, self.delta_bar, omega)
    }

    /// Open-loop gain `sigma_d kappa_a (chi_c0(omega) - chi_c0(-omega)^*)`.
    pub fn chi_fb(&self, omega: f64) -> Complex64 {
        self.sigma_d(omega) * self.cavity.kappa_a * (self.chi_c0(omega) - self.chi_c0(-omega).conj())
    }

    fn loop_denominator(&self, omega: f64) -> Result<Complex64> {
        let d = 1.0 - self.chi_fb(omega);
        if !(d.norm() >= LOOP_TOLERANCE) {
            return Err(Error::LoopInstability {
                omega,
                margin: d.norm(),
            });
        }
        Ok(d)
    }

    /// Closed-loop susceptibility `chi_c0 / (1 - chi_fb)`.
    pub fn chi_c_eff(&self, omega: f64) -> Result<Complex64> {
        Ok(self.chi_c0(omega) / self.loop_denominator(omega)?)
    }

    /// Lorentzian with the effective linewidth and detuning frozen at
    /// `omega_eval`.
    pub fn chi_c_eff_lorentzian(&self, omega_eval: f64, omega: f64) -> Result<Complex64> {
        let (k, d) = self.effective_params(omega_eval)?;
        Ok(1.0 / (Complex64::new(k / 2.0, 0.0) - I * (d + omega)))
    }

    /// `(kappa_eff, delta_bar_eff)` with `sigma_d` evaluated at `omega_eval`.
    pub fn effective_params(&self, omega_eval: f64) -> Result<(f64, f64)> {
        let s = self.sigma_d(omega_eval);
        let ka = self.cavity.kappa_a;
        let kappa_eff = self.cavity.kappa() - 2.0 * ka * s.re;
        if !(kappa_eff > 0.0) {
            return Err(Error::NonPositiveLinewidth { kappa_eff });
        }
        Ok((kappa_eff, self.delta_bar + ka * s.im))
    }

    /// In-loop absorbed-flux noise normalised to shot noise, `|1 - chi_fb|^-2`.
    pub fn inloop_flux_psd(&self, omega: f64) -> Result<f64> {
        Ok(self.loop_denominator(omega)?.norm_sqr().recip())
    }

    /// Far-detuned form of [`inloop_flux_psd`](Self::inloop_flux_psd),
    /// valid for `delta_bar << -kappa` and `omega ~ |delta_bar|`.
    pub fn inloop_flux_psd_far_detuned(&self, omega: f64) -> f64 {
        let gain: f64 = self.thermal.poles().iter().map(|p| p.gain).sum();
        let x = 1.0 - 2.0 * self.n_c * self.cavity.kappa_a * gain / (omega * self.cavity.kappa());
        (x * x).recip()
    }
}
