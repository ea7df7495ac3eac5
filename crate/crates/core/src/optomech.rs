//! Sideband cooling of a mechanical mode by a cavity with dissipative
//! feedback: damping, backaction limit, final occupancy and the detected
//! spectra.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::response::LinearizedCavity;
use crate::spectrum::Spectrum;
use crate::units::{HBAR, K_B};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Phonon bath with optional linear absorption heating,
/// `n_th(n_c) = n_th0 + heating_per_photon * n_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModel {
    pub n_th0: f64,
    pub heating_per_photon: f64,
}

impl BathModel {
    pub fn new(n_th0: f64, heating_per_photon: f64) -> Result<Self> {
        if !(n_th0 >= 0.0) || !n_th0.is_finite() {
            return Err(Error::invalid("n_th0", "bath occupancy must be finite and >= 0"));
        }
        if !(heating_per_photon >= 0.0) || !heating_per_photon.is_finite() {
            return Err(Error::invalid("heating_per_photon", "must be finite and >= 0"));
        }
        Ok(BathModel {
            n_th0,
            heating_per_photon,
        })
    }

    pub fn n_th(&self, n_c: f64) -> f64 {
        self.n_th0 + self.heating_per_photon * n_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub g0: f64,
    /// Zero-point amplitude (m); only scales displacement spectra.
    pub x_zpf: f64,
    pub bath: BathModel,
}

impl MechanicalMode {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0) {
            return Err(Error::invalid("omega_m", "mechanical frequency must be > 0"));
        }
        if !(self.gamma_m > 0.0) {
            return Err(Error::invalid("gamma_m", "mechanical damping must be > 0"));
        }
        if !(self.g0 >= 0.0) {
            return Err(Error::invalid("g0", "coupling must be >= 0"));
        }
        if !(self.x_zpf >= 0.0) {
            return Err(Error::invalid("x_zpf", "must be >= 0"));
        }
        Ok(())
    }

    /// Bath temperature implied by `n_th0` at the mechanical frequency.
    pub fn bath_temperature(&self) -> f64 {
        if self.bath.n_th0 <= 0.0 {
            return 0.0;
        }
        HBAR * self.omega_m / (K_B * (1.0 / self.bath.n_th0).ln_1p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSetup {
    pub eta_ex: f64,
    pub delta_lo: f64,
    pub theta: f64,
}

impl DetectionSetup {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_ex) {
            return Err(Error::invalid("eta_ex", "detection efficiency must lie in [0, 1]"));
        }
        if !self.delta_lo.is_finite() || !self.theta.is_finite() {
            return Err(Error::invalid("detection", "LO offset and angle must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingReport {
    pub kappa_eff: f64,
    pub delta_bar_eff: f64,
    pub n_th: f64,
    pub gamma_opt: f64,
    pub gamma_eff: f64,
    pub n_l: f64,
    pub n_f: f64,
    pub bg_excess: f64,
    pub snr: f64,
}

/// Intrinsic mechanical susceptibility `1 / (Gamma_m/2 - i(omega - Omega_m))`.
pub fn chi_m(mech: &MechanicalMode, omega: f64) -> Complex64 {
    chi_m_eff(mech, mech.gamma_m, omega)
}

/// Damped susceptibility with total linewidth `gamma_eff`.
pub fn chi_m_eff(mech: &MechanicalMode, gamma_eff: f64, omega: f64) -> Complex64 {
    1.0 / (Complex64::new(gamma_eff / 2.0, 0.0) - I * (omega - mech.omega_m))
}

/// `(n_th Gamma_m + Gamma_opt n_l) / (Gamma_m + Gamma_opt)`.
pub fn final_occupancy(n_th: f64, gamma_m: f64, gamma_opt: f64, n_l: f64) -> Result<f64> {
    let g = gamma_m + gamma_opt;
    if !(g > 0.0) {
        return Err(Error::invalid("gamma_eff", "total mechanical damping must be > 0"));
    }
    Ok((n_th * gamma_m + gamma_opt * n_l) / g)
}

/// Linearised cavity coupled to one mechanical mode.
///
/// The feedback coefficients are frozen at the mechanical frequency, as
/// appropriate when the mechanical linewidth is much smaller than the cavity
/// linewidth.
#[derive(Debug, Clone, PartialEq)]
pub struct OptomechSystem {
    pub cavity: LinearizedCavity,
    pub mech: MechanicalMode,
    pub detection: DetectionSetup,
}

impl OptomechSystem {
    pub fn new(cavity: LinearizedCavity, mech: MechanicalMode, detection: DetectionSetup) -> Result<Self> {
        mech.validate()?;
        detection.validate()?;
        let sys = OptomechSystem {
            cavity,
            mech,
            detection,
        };
        sys.effective_params()?;
        Ok(sys)
    }

    pub fn n_c(&self) -> f64 {
        self.cavity.n_c
    }

    pub fn n_th(&self) -> f64 {
        self.mech.bath.n_th(self.n_c())
    }

    /// `(kappa_eff, delta_bar_eff)` at the mechanical frequency.
    pub fn effective_params(&self) -> Result<(f64, f64)> {
        self.cavity.effective_params(self.mech.omega_m)
    }

    /// Effective cavity Lorentzian, coefficients frozen at `Omega_m`.
    pub fn chi_c_eff(&self, omega: f64) -> Result<Complex64> {
        self.cavity.chi_c_eff_lorentzian(self.mech.omega_m, omega)
    }

    /// `Gamma_opt(omega) = kappa_eff n_c g0^2 |chi_c_eff(omega)|^2`.
    pub fn gamma_opt(&self, omega: f64) -> Result<f64> {
        let (k, _) = self.effective_params()?;
        Ok(k * self.n_c() * self.mech.g0 * self.mech.g0 * self.chi_c_eff(omega)?.norm_sqr())
    }

    pub fn gamma_eff(&self) -> Result<f64> {
        Ok(self.mech.gamma_m + self.gamma_opt(self.mech.omega_m)?)
    }

    /// Cavity susceptibility dressed by the mechanics and the reflection
    /// coefficient `1 - kappa_ex chi` seen by a weak probe.
    pub fn omit_response(&self, omega: f64) -> Result<(Complex64, Complex64)> {
        let (k, d) = self.effective_params()?;
        let g2 = self.n_c() * self.mech.g0 * self.mech.g0;
        let chi = 1.0 / (Complex64::new(k / 2.0, 0.0) - I * (d + omega) + g2 * chi_m(&self.mech, omega));
        Ok((chi, 1.0 - self.cavity.cavity.kappa_ex * chi))
    }

    /// Backaction occupancy floor `kappa_a n_c^2 |sigma_0(Omega_m)|^2 / kappa_eff`.
    pub fn cooling_limit(&self) -> Result<f64> {
        let (k, _) = self.effective_params()?;
        Ok(cooling_limit(&self.cavity, self.mech.omega_m, k))
    }

    pub fn final_occupancy(&self) -> Result<f64> {
        final_occupancy(
            self.n_th(),
            self.mech.gamma_m,
            self.gamma_opt(self.mech.omega_m)?,
            self.cooling_limit()?,
        )
    }

    /// Excess shot-noise-normalised floor and thermomechanical SNR.
    pub fn detection_figures(&self) -> Result<(f64, f64)> {
        let (k_eff, _) = self.effective_params()?;
        let cav = &self.cavity.cavity;
        let eta = self.detection.eta_ex;
        let n = self.n_c();
        let s0 = self.cavity.thermal.sigma0(self.mech.omega_m).norm_sqr();
        let bg = 4.0 * eta * cav.kappa_a * cav.kappa_ex * n * n * s0 / (k_eff * k_eff);
        let k = cav.kappa();
        let g0 = self.mech.g0;
        let snr = 16.0 * eta * n * g0 * g0 * cav.kappa_ex * K_B * self.mech.bath_temperature()
            / (k * k * self.mech.gamma_m * HBAR * self.mech.omega_m);
        Ok((bg, snr))
    }

    pub fn cooling_report(&self) -> Result<CoolingReport> {
        let (kappa_eff, delta_bar_eff) = self.effective_params()?;
        let gamma_opt = self.gamma_opt(self.mech.omega_m)?;
        let n_l = self.cooling_limit()?;
        let (bg_excess, snr) = self.detection_figures()?;
        Ok(CoolingReport {
            kappa_eff,
            delta_bar_eff,
            n_th: self.n_th(),
            gamma_opt,
            gamma_eff: self.mech.gamma_m + gamma_opt,
            n_l,
            n_f: self.final_occupancy()?,
            bg_excess,
            snr,
        })
    }

    fn warn_detuning(&self, delta_bar_eff: f64) {
        let k = self.cavity.cavity.kappa();
        if (delta_bar_eff + self.mech.omega_m).abs() > 0.01 * k {
            log::warn!(
                "effective detuning {:e} rad/s is not at the red sideband ({:e}); heterodyne closed form assumes it is",
                delta_bar_eff,
                -self.mech.omega_m
            );
        }
    }

    /// Shot-noise-normalised heterodyne photocurrent PSD on the photocurrent
    /// frequency grid `freq` (rad/s).
    pub fn heterodyne_psd(&self, freq: &[f64]) -> Result<Spectrum> {
        let (k_eff, d_eff) = self.effective_params()?;
        self.warn_detuning(d_eff);
        let cav = &self.cavity.cavity;
        let eta = self.detection.eta_ex;
        let n = self.n_c();
        let g02 = self.mech.g0 * self.mech.g0;
        let n_l = self.cooling_limit()?;
        let gamma_opt = 4.0 * n * g02 / k_eff;
        let gamma_eff = self.mech.gamma_m + gamma_opt;
        let n_f = final_occupancy(self.n_th(), self.mech.gamma_m, gamma_opt, n_l)?;
        let pre = eta * 4.0 * cav.kappa_ex * n * g02 / (k_eff * k_eff) * gamma_eff * (n_f - 2.0 * n_l);
        let floor = 1.0 + 4.0 * eta * n_l * cav.kappa_ex / k_eff;
        let values = freq
            .iter()
            .map(|&f| {
                let x = f - self.detection.delta_lo;
                pre * chi_m_eff(&self.mech, gamma_eff, x + self.mech.omega_m).norm_sqr() + floor
            })
            .collect();
        Spectrum::new(freq.to_vec())?.with_real("S_I", values)
    }

    /// Phonon spectra `S_bb`, `S_bdag_bdag` and their sum `S_xx / x_zpf^2`.
    pub fn mechanical_psd(&self, omega: &[f64]) -> Result<Spectrum> {
        let (k_eff, _) = self.effective_params()?;
        let n = self.n_c();
        let g02 = self.mech.g0 * self.mech.g0;
        let chi_c2 = self.chi_c_eff(self.mech.omega_m)?.norm_sqr();
        let ka_s2 = self.cavity.cavity.kappa_a * self.cavity.sigma_d(self.mech.omega_m).norm_sqr();
        let gamma_plus = n * g02 * chi_c2 * ka_s2;
        let gamma_minus = n * g02 * chi_c2 * (k_eff + ka_s2);
        let gamma_eff = self.gamma_eff()?;
        let n_th = self.n_th();
        let gm = self.mech.gamma_m;
        let mut sbb = Vec::with_capacity(omega.len());
        let mut sdd = Vec::with_capacity(omega.len());
        let mut sxx = Vec::with_capacity(omega.len());
        for &w in omega {
            let a = (n_th * gm + gamma_plus) * chi_m_eff(&self.mech, gamma_eff, -w).norm_sqr();
            let b = ((n_th + 1.0) * gm + gamma_minus) * chi_m_eff(&self.mech, gamma_eff, w).norm_sqr();
            sbb.push(a);
            sdd.push(b);
            sxx.push(a + b);
        }
        Spectrum::new(omega.to_vec())?
            .with_real("S_bb", sbb)?
            .with_real("S_bdag_bdag", sdd)?
            .with_real("S_xx_over_xzpf2", sxx)
    }

    /// Backaction rates `(Gamma_+, Gamma_-)` of the appendix phonon spectra.
    pub fn backaction_rates(&self) -> Result<(f64, f64)> {
        let (k_eff, _) = self.effective_params()?;
        let n = self.n_c();
        let g02 = self.mech.g0 * self.mech.g0;
        let chi_c2 = self.chi_c_eff(self.mech.omega_m)?.norm_sqr();
        let ka_s2 = self.cavity.cavity.kappa_a * self.cavity.sigma_d(self.mech.omega_m).norm_sqr();
        Ok((n * g02 * chi_c2 * ka_s2, n * g02 * chi_c2 * (k_eff + ka_s2)))
    }
}

/// Backaction occupancy floor for a given effective linewidth.
pub fn cooling_limit(cavity: &LinearizedCavity, omega_m: f64, kappa_eff: f64) -> f64 {
    let n = cavity.n_c;
    cavity.cavity.kappa_a * n * n * cavity.thermal.sigma0(omega_m).norm_sqr() / kappa_eff
}
