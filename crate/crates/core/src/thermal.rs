//! Radially symmetric heat conduction around an optical mode, and rational
//! pole fits that turn the resulting frequency response into a
//! [`ThermalResponseModel`].
//!
//! The solver is a finite-volume discretisation of
//! `-i omega rho C T + div(-k grad T) = q` on concentric spherical shells
//! (time dependence `exp(-i omega t)`). The cavity shift is the mode-weighted
//! mean temperature times `-(dn/dT)/n0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fitting::lm::{levenberg_marquardt, FitStatus, LmOptions};
use crate::response::{ThermalPole, ThermalResponseModel};
use crate::spectrum::{ChannelData, Spectrum};
use crate::units::HBAR;

pub const SHIFT_CHANNEL: &str = "dw_over_w";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProps {
    /// kg/m^3
    pub density: f64,
    /// J/(kg K)
    pub heat_capacity: f64,
    /// W/(m K)
    pub conductivity: f64,
    pub refractive_index: f64,
    /// 1/K
    pub thermo_optic: f64,
}

impl MaterialProps {
    pub fn silicon_nitride() -> Self {
        MaterialProps {
            density: 3290.0,
            heat_capacity: 800.0,
            conductivity: 30.0,
            refractive_index: 2.00,
            thermo_optic: 2.45e-5,
        }
    }

    pub fn silicon() -> Self {
        MaterialProps {
            density: 2329.0,
            heat_capacity: 700.0,
            conductivity: 130.0,
            refractive_index: 3.48,
            thermo_optic: 16.0e-5,
        }
    }

    pub fn silica() -> Self {
        MaterialProps {
            density: 2203.0,
            heat_capacity: 703.0,
            conductivity: 1.38,
            refractive_index: 1.50,
            thermo_optic: 1.29e-5,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "si3n4" | "silicon-nitride" => Some(Self::silicon_nitride()),
            "si" | "silicon" => Some(Self::silicon()),
            "sio2" | "silica" => Some(Self::silica()),
            _ => None,
        }
    }

    /// All constants must be positive; a negative thermo-optic coefficient is
    /// expressed through the sign of the fitted gain instead.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("density", self.density),
            ("heat_capacity", self.heat_capacity),
            ("conductivity", self.conductivity),
            ("refractive_index", self.refractive_index),
            ("thermo_optic", self.thermo_optic),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn diffusivity(&self) -> f64 {
        self.conductivity / (self.density * self.heat_capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Outer shell held at the bath temperature.
    FixedTemperature,
    /// No heat flux through the outer shell.
    Insulating,
}

/// Shells between consecutive `faces` (radii in m, starting at 0) with a
/// mode weight per shell normalised so that `sum w_i V_i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry1D {
    faces: Vec<f64>,
    weights: Vec<f64>,
    boundary: Boundary,
}

impl Geometry1D {
    /// `weights` need not be normalised; they are rescaled here.
    pub fn new(faces: Vec<f64>, weights: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if faces.len() < 2 {
            return Err(Error::invalid("faces", "need at least one shell"));
        }
        if faces[0] != 0.0 {
            return Err(Error::invalid("faces", "radial grid must start at r = 0"));
        }
        if faces.windows(2).any(|w| !(w[1] > w[0])) || !faces.iter().all(|f| f.is_finite()) {
            return Err(Error::invalid("faces", "radial grid must be strictly increasing"));
        }
        if weights.len() != faces.len() - 1 {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} shells", weights.len(), faces.len() - 1),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "mode weights must be finite and >= 0"));
        }
        let mut g = Geometry1D {
            faces,
            weights,
            boundary,
        };
        let norm: f64 = g.weights.iter().zip(g.volumes()).map(|(w, v)| w * v).sum();
        if !(norm > 0.0) {
            return Err(Error::invalid("weights", "mode weight integrates to zero"));
        }
        g.weights.iter_mut().for_each(|w| *w /= norm);
        Ok(g)
    }

    /// Gaussian intensity `exp(-r^2/a^2)` on `cells` shells out to `outer`,
    /// refined quadratically towards the centre.
    pub fn gaussian(mode_radius: f64, outer: f64, cells: usize, boundary: Boundary) -> Result<Self> {
        if !(mode_radius > 0.0) || !(outer > mode_radius) {
            return Err(Error::invalid("outer_radius", "need 0 < mode_radius < outer_radius"));
        }
        if cells < 4 {
            return Err(Error::invalid("cells", "need at least 4 shells"));
        }
        let n = cells as f64;
        let faces: Vec<f64> = (0..=cells).map(|i| outer * (i as f64 / n).powi(2)).collect();
        let weights = faces
            .windows(2)
            .map(|f| {
                let c = 0.5 * (f[0] + f[1]);
                (-(c * c) / (mode_radius * mode_radius)).exp()
            })
            .collect();
        Self::new(faces, weights, boundary)
    }

    /// Sub-micron silicon optomechanical crystal.
    pub fn omc_silicon() -> Self {
        Self::gaussian(0.3e-6, 10e-6, 400, Boundary::FixedTemperature).expect("valid preset")
    }

    /// Silica microtoroid.
    pub fn toroid_silica() -> Self {
        Self::gaussian(15e-6, 200e-6, 400, Boundary::FixedTemperature).expect("valid preset")
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn cells(&self) -> usize {
        self.weights.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        let c = 4.0 * std::f64::consts::PI / 3.0;
        self.faces.windows(2).map(|f| c * (f[1].powi(3) - f[0].powi(3))).collect()
    }
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
fn thomas(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64], rhs: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let scale = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut piv = diag[0];
    if !(piv.norm() > 1e-14 * scale) {
        return None;
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if !(piv.norm() > 1e-14 * scale) {
            return None;
        }
        c[i] = upper[i] / piv;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Some(d)
}

/// Fractional cavity shift `delta omega_c / omega_c` for `absorbed_power` (W)
/// at each angular frequency in `omega`, in channel [`SHIFT_CHANNEL`].
pub fn heat_response(
    geometry: &Geometry1D,
    material: &MaterialProps,
    omega: &[f64],
    absorbed_power: f64,
) -> Result<Spectrum> {
    material.validate()?;
    if !absorbed_power.is_finite() {
        return Err(Error::invalid("absorbed_power", "must be finite"));
    }
    if omega.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("omega", "frequencies must be >= 0"));
    }
    let n = geometry.cells();
    let f = geometry.faces();
    let c = geometry.centers();
    let v = geometry.volumes();
    let w = geometry.weights();
    let k = material.conductivity;
    let four_pi = 4.0 * std::f64::consts::PI;
    // conductance[j] couples shell j-1 and shell j through face j
    let mut g = vec![0.0; n + 1];
    for j in 1..n {
        g[j] = k * four_pi * f[j] * f[j] / (c[j] - c[j - 1]);
    }
    if geometry.boundary() == Boundary::FixedTemperature {
        g[n] = k * four_pi * f[n] * f[n] / (f[n] - c[n - 1]);
    }
    let rho_c = material.density * material.heat_capacity;
    let lower: Vec<Complex64> = (0..n).map(|i| Complex64::new(-g[i], 0.0)).collect();
    let upper: Vec<Complex64> = (0..n).map(|i| Complex64::new(-g[i + 1], 0.0)).collect();
    let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(absorbed_power * w[i] * v[i], 0.0)).collect();
    let shift = -material.thermo_optic / material.refractive_index;

    let mut out = Vec::with_capacity(omega.len());
    for &om in omega {
        let diag: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(g[i] + g[i + 1], -om * rho_c * v[i]))
            .collect();
        let t = thomas(&lower, &diag, &upper, &rhs).ok_or(Error::SingularSystem {
            omega: om,
            condition: f64::INFINITY,
        })?;
        let mean: Complex64 = t.iter().zip(w).zip(&v).map(|((t, w), v)| t * (w * v)).sum();
        out.push(mean * shift);
    }
    Spectrum::new(omega.to_vec())?.with_complex(SHIFT_CHANNEL, out)
}

/// Rational model `H(omega) = sum_j c_j / (gamma_j - i omega)` with real `c_j`.
pub fn pole_model(coefficients: &[f64], gammas: &[f64], omega: f64) -> Complex64 {
    coefficients
        .iter()
        .zip(gammas)
        .map(|(c, g)| Complex64::new(*c, 0.0) / Complex64::new(*g, -omega))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleFit {
    /// `c_j` in units of the fitted response times rad/s.
    pub coefficients: Vec<f64>,
    /// Relaxation rates (rad/s), ascending.
    pub gammas: Vec<f64>,
    /// RMS of `|H_fit - H| / |H|` over the samples.
    pub residual: f64,
    pub status: FitStatus,
    pub iterations: usize,
}

impl PoleFit {
    pub fn n_poles(&self) -> usize {
        self.gammas.len()
    }

    pub fn evaluate(&self, omega: f64) -> Complex64 {
        pole_model(&self.coefficients, &self.gammas, omega)
    }

    /// Converts a fit of `delta omega_c / omega_c` at `absorbed_power` (W)
    /// into per-photon gains, using `P_abs = hbar omega_c kappa_a n_c` so the
    /// shift per absorbed photon flux is `hbar omega_c^2 H / P`.
    pub fn to_model(&self, omega_c: f64, absorbed_power: f64) -> Result<ThermalResponseModel> {
        if !(omega_c > 0.0) {
            return Err(Error::invalid("omega_c", "cavity frequency must be > 0"));
        }
        if !(absorbed_power.abs() > 0.0) {
            return Err(Error::invalid("absorbed_power", "must be non-zero"));
        }
        let scale = HBAR * omega_c * omega_c / absorbed_power;
        ThermalResponseModel::new(
            self.coefficients
                .iter()
                .zip(&self.gammas)
                .map(|(c, g)| ThermalPole {
                    gain: c * scale,
                    gamma: *g,
                })
                .collect(),
        )
    }
}

fn complex_channel(response: &Spectrum) -> Result<&[Complex64]> {
    response
        .channels()
        .iter()
        .find_map(|c| match &c.data {
            ChannelData::Complex(v) => Some(v.as_slice()),
            _ => None,
        })
        .ok_or_else(|| Error::InsufficientData("pole fit needs a complex response channel".into()))
}

/// Inner linear problem of the variable-projection fit: best real `c` for
/// fixed rates, and the relative residual vector (real and imaginary parts).
fn project(omega: &[f64], y: &[Complex64], wt: &[f64], gammas: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = omega.len();
    let p = gammas.len();
    if gammas.iter().any(|g| !g.is_finite() || *g <= 0.0) {
        return None;
    }
    let mut a = DMatrix::zeros(2 * m, p);
    let mut b = DVector::zeros(2 * m);
    for (i, &om) in omega.iter().enumerate() {
        for (j, &g) in gammas.iter().enumerate() {
            let basis = Complex64::new(wt[i], 0.0) / Complex64::new(g, -om);
            a[(i, j)] = basis.re;
            a[(m + i, j)] = basis.im;
        }
        b[i] = y[i].re * wt[i];
        b[m + i] = y[i].im * wt[i];
    }
    if a.iter().any(|v: &f64| !v.is_finite()) {
        return None;
    }
    // bounded sweep count: a non-converging decomposition is a failed projection
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 500)?;
    let c = svd.solve(&b, 1e-14 * svd.singular_values.max()).ok()?;
    let r = &a * &c - b;
    Some((c.iter().copied().collect(), r.iter().copied().collect()))
}

/// Least-squares fit of `n_poles` real-residue poles to the first complex
/// channel of `response`, with relative weighting so that every decade of
/// the roll-off counts.
pub fn fit_poles(response: &Spectrum, n_poles: usize) -> Result<PoleFit> {
    if n_poles == 0 {
        return Err(Error::invalid("n_poles", "need at least one pole"));
    }
    let omega = response.omega();
    let y = complex_channel(response)?;
    if omega.len() < 3 * n_poles {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot constrain {n_poles} poles (need {})",
            omega.len(),
            3 * n_poles
        )));
    }
    let peak = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Degenerate("response is identically zero".into()));
    }
    let wt: Vec<f64> = y.iter().map(|v| 1.0 / v.norm().max(1e-12 * peak)).collect();
    let lo = omega.iter().copied().find(|w| *w > 0.0).unwrap_or(1.0).ln();
    let hi = omega[omega.len() - 1].max(lo.exp() * 10.0).ln();
    let span = hi - lo;

    let residual = |u: &[f64]| -> Result<Vec<f64>> {
        let g: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        match project(omega, y, &wt, &g) {
            Some((_, r)) => Ok(r),
            None => Ok(vec![f64::INFINITY; 2 * omega.len()]),
        }
    };

    let opts = LmOptions {
        max_iter: 300,
        ftol: 1e-14,
        xtol: 1e-12,
        fd_step: 1e-6,
    };
    let starts = 4;
    let mut best: Option<(f64, Vec<f64>, FitStatus, usize)> = None;
    for s in 0..starts {
        let shift = (s as f64 / starts as f64 - 0.5) * span / (n_poles as f64 + 1.0);
        let u0: Vec<f64> = (1..=n_poles)
            .map(|j| lo + span * j as f64 / (n_poles as f64 + 1.0) + if s == 0 { 0.0 } else { shift })
            .collect();
        let out = levenberg_marquardt(residual, &u0, true, &opts)?;
        if !out.cost.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| out.cost < b.0) {
            best = Some((out.cost, out.params, out.status, out.iterations));
        }
    }
    let (cost, u, status, iterations) =
        best.ok_or_else(|| Error::FitFailed("pole fit produced no finite residual from any start".into()))?;
    let mut pairs: Vec<(f64, usize)> = u.iter().map(|v| v.exp()).zip(0..).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gammas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (coefficients, _) = project(omega, y, &wt, &gammas)
        .ok_or_else(|| Error::FitFailed("pole fit: final projection failed".into()))?;
    let (band_lo, band_hi) = (lo.exp(), hi.exp());
    for (j, g) in gammas.iter().enumerate() {
        if !(*g > 0.0) || *g < band_lo * 1e-3 || *g > band_hi * 1e3 {
            return Err(Error::FitFailed(format!(
                "pole {j} drifted to gamma = {g:e} rad/s, outside the sampled band [{band_lo:e}, {band_hi:e}]"
            )));
        }
    }
    if gammas.windows(2).any(|w| w[1] / w[0] - 1.0 < 1e-6) {
        return Err(Error::FitFailed(format!("poles coalesced: gammas = {gammas:?}")));
    }
    Ok(PoleFit {
        coefficients,
        gammas,
        residual: (cost / omega.len() as f64).sqrt(),
        status,
        iterations,
    })
}

/// Fits 1..=`max_poles` and returns the smallest model whose residual is
/// below `tolerance`, or the best one found. Failed fits are skipped; equal
/// residuals favour fewer poles.
pub fn fit_poles_auto(response: &Spectrum, max_poles: usize, tolerance: f64) -> Result<PoleFit> {
    let mut best: Option<PoleFit> = None;
    let mut last_err = None;
    for n in 1..=max_poles.max(1) {
        match fit_poles(response, n) {
            Ok(fit) => {
                if fit.residual < tolerance {
                    return Ok(fit);
                }
                if best.as_ref().is_none_or(|b| fit.residual < b.residual) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::FitFailed("no pole count attempted".into())),
    }
}
