use num_complex::Complex64;

use crate::error::{Error, Result};

/// Loss channels and drive detuning of a single optical (or microwave) mode.
///
/// All rates are angular (rad/s). `detuning` is the bare laser detuning
/// `omega_L - omega_c`; the photothermal/Kerr-shifted value lives in
/// [`MeanField`](super::MeanField).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub kappa_ex: f64,
    pub kappa_s: f64,
    pub kappa_a: f64,
    pub detuning: f64,
    /// Cavity resonance frequency, only needed for Kerr and power/photon
    /// conversions.
    pub resonance: Option<f64>,
}

impl CavityParams {
    pub fn new(kappa_ex: f64, kappa_s: f64, kappa_a: f64, detuning: f64) -> Result<Self> {
        let c = CavityParams {
            kappa_ex,
            kappa_s,
            kappa_a,
            detuning,
            resonance: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_resonance(mut self, omega_c: f64) -> Self {
        self.resonance = Some(omega_c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_ex", self.kappa_ex),
            ("kappa_s", self.kappa_s),
            ("kappa_a", self.kappa_a),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        if !(self.kappa() > 0.0) {
            return Err(Error::invalid("kappa", "total loss rate must be positive"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if let Some(w) = self.resonance {
            if !(w > 0.0) {
                return Err(Error::invalid("resonance", "must be positive"));
            }
        }
        Ok(())
    }

    /// Total loss rate `kappa_ex + kappa_s + kappa_a`.
    pub fn kappa(&self) -> f64 {
        self.kappa_ex + self.kappa_s + self.kappa_a
    }

    /// Cavity coupling efficiency `kappa_ex / kappa`.
    pub fn eta_c(&self) -> f64 {
        self.kappa_ex / self.kappa()
    }

    /// Absorbed fraction `kappa_a / kappa`.
    pub fn eta_a(&self) -> f64 {
        self.kappa_a / self.kappa()
    }
}

/// Total loss rate of `cavity`.
pub fn total_kappa(cavity: &CavityParams) -> f64 {
    cavity.kappa()
}

/// One relaxation channel of the photothermal response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalPole {
    /// Product of heating rate per absorbed photon and thermo-optic shift
    /// coefficient (rad/s per intracavity photon, signed).
    pub gain: f64,
    /// Relaxation rate (rad/s), strictly positive.
    pub gamma: f64,
}

/// Cavity-frequency response to absorbed photon flux, as a sum of poles.
///
/// The shift per absorbed photon flux is `sum_j gain_j / (gamma_j - i omega)`;
/// the dissipation coefficient per photon is
/// `sigma_0(omega) = sum_j gain_j / (omega + i gamma_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalResponseModel {
    poles: Vec<ThermalPole>,
}

impl ThermalResponseModel {
    pub fn new(poles: Vec<ThermalPole>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::invalid("poles", "thermal model needs at least one pole"));
        }
        for (j, p) in poles.iter().enumerate() {
            if !(p.gamma > 0.0) || !p.gamma.is_finite() {
                return Err(Error::invalid(
                    format!("poles[{j}].gamma"),
                    format!("relaxation rate must be > 0, got {}", p.gamma),
                ));
            }
            if !p.gain.is_finite() {
                return Err(Error::invalid(format!("poles[{j}].gain"), "must be finite"));
            }
        }
        Ok(ThermalResponseModel { poles })
    }

    pub fn single_pole(gain: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![ThermalPole { gain, gamma }])
    }

    /// Model with no photothermal coupling.
    pub fn none() -> Self {
        ThermalResponseModel {
            poles: vec![ThermalPole {
                gain: 0.0,
                gamma: 1.0,
            }],
        }
    }

    /// Single pole of relaxation rate `gamma` whose dissipation coefficient
    /// satisfies `kappa_a * Re sigma_0(omega) = target` at `omega`.
    ///
    /// Experiments usually report `kappa_a sigma_0(Omega_m)` directly; this
    /// builds a model reproducing such a value.
    pub fn from_sigma0_anchor(kappa_a: f64, target: f64, omega: f64, gamma: f64) -> Result<Self> {
        if !(kappa_a > 0.0) {
            return Err(Error::invalid("kappa_a", "anchoring sigma_0 needs kappa_a > 0"));
        }
        if omega == 0.0 {
            return Err(Error::invalid("omega", "anchor frequency must be non-zero"));
        }
        let gain = target * (omega * omega + gamma * gamma) / (omega * kappa_a);
        Self::single_pole(gain, gamma)
    }

    pub fn poles(&self) -> &[ThermalPole] {
        &self.poles
    }

    pub fn is_single_pole(&self) -> bool {
        self.poles.len() == 1
    }

    pub fn is_zero(&self) -> bool {
        self.poles.iter().all(|p| p.gain == 0.0)
    }

    /// Static shift per absorbed photon flux, `sum_j gain_j / gamma_j`.
    pub fn static_shift(&self) -> f64 {
        self.poles.iter().map(|p| p.gain / p.gamma).sum()
    }

    /// Single-photon dissipation coefficient `sigma_0(omega)`.
    pub fn sigma0(&self, omega: f64) -> Complex64 {
        self.poles
            .iter()
            .map(|p| Complex64::new(p.gain, 0.0) / Complex64::new(omega, p.gamma))
            .sum()
    }

    /// Photon-number-enhanced dissipation coefficient `n_c sigma_0(omega)`.
    pub fn sigma_d(&self, n_c: f64, omega: f64) -> Complex64 {
        self.sigma0(omega) * n_c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_to_rad;

    #[test]
    fn total_kappa_examples() {
        let d1 = CavityParams::new(hz_to_rad(0.5e9), hz_to_rad(1.1e9), hz_to_rad(0.1e9), 0.0).unwrap();
        assert!((d1.kappa() / hz_to_rad(1.7e9) - 1.0).abs() < 1e-12);

        let unit = CavityParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(total_kappa(&unit), 1.0);

        let fig4 = CavityParams::new(hz_to_rad(8e6), hz_to_rad(1e6), hz_to_rad(6e6), 0.0).unwrap();
        assert!((fig4.kappa() / hz_to_rad(15e6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_rate() {
        assert!(CavityParams::new(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(CavityParams::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn thermal_model_invariants() {
        assert!(ThermalResponseModel::new(vec![]).is_err());
        assert!(ThermalResponseModel::single_pole(1.0, 0.0).is_err());
        assert!(ThermalResponseModel::single_pole(1.0, -2.0).is_err());
        let m = ThermalResponseModel::new(vec![
            ThermalPole { gain: 2.0, gamma: 4.0 },
            ThermalPole { gain: -1.0, gamma: 1.0 },
        ])
        .unwrap();
        assert!((m.static_shift() - (0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn sigma0_anchor_reproduces_target() {
        let ka = hz_to_rad(100e6);
        let om = hz_to_rad(5.3e9);
        let target = hz_to_rad(44e3);
        let m = ThermalResponseModel::from_sigma0_anchor(ka, target, om, hz_to_rad(1e6)).unwrap();
        assert!((ka * m.sigma0(om).re / target - 1.0).abs() < 1e-12);
    }
}
