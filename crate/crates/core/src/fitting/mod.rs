//! Fits of measured spectra and power series: coherent cavity response,
//! linewidth and damping versus photon number, mechanical sidebands, and
//! anchored noise thermometry.

pub mod lm;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::{ChannelData, Spectrum};

pub use lm::{levenberg_marquardt, FitStatus, LmOptions, LmOutcome};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Named parameters with one-standard-error uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Root of the (weighted) sum of squared residuals at the optimum.
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub status: FitStatus,
    pub iterations: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.values[i], self.sigmas[i]))
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|v| v.0)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.get(name).map(|v| v.1)
    }

    fn from_outcome(names: &[&str], out: &LmOutcome) -> Self {
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: out.params.clone(),
            sigmas: out.sigmas(),
            residual_norm: out.cost.sqrt(),
            initial_residual_norm: out.initial_cost.sqrt(),
            status: out.status,
            iterations: out.iterations,
        }
    }

    fn singular(names: &[&str], guess: Vec<f64>) -> Self {
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            sigmas: vec![f64::NAN; guess.len()],
            values: guess,
            residual_norm: f64::NAN,
            initial_residual_norm: f64::NAN,
            status: FitStatus::Singular,
            iterations: 0,
        }
    }
}

/// One point of a quantity measured against intracavity photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub n_c: f64,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    points: Vec<SeriesPoint>,
}

impl PowerSeries {
    pub fn new(points: Vec<SeriesPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].n_c > w[0].n_c)) {
            return Err(Error::invalid("n_c", "power series must be strictly increasing in photon number"));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.sigma > 0.0) || !p.sigma.is_finite() {
                return Err(Error::invalid(format!("points[{i}].sigma"), "uncertainty must be > 0"));
            }
            if !p.value.is_finite() || !p.n_c.is_finite() {
                return Err(Error::invalid(format!("points[{i}]"), "non-finite value"));
            }
        }
        Ok(PowerSeries { points })
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }
}

/// Weighted straight line `y = a + b x`; returns `(a, b, cov)`.
fn weighted_line(x: &[f64], y: &[f64], s: &[f64]) -> Result<(f64, f64, [[f64; 2]; 2])> {
    if x.is_empty() || x.iter().all(|v| *v == x[0]) {
        return Err(Error::InsufficientData("a line fit needs at least two distinct abscissae".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &s) in x.iter().zip(y).zip(s) {
        let w = 1.0 / (s * s);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::Degenerate("normal equations of the line fit are singular".into()));
    }
    let b = (sw * sxy - sx * sy) / det;
    let a = (sxx * sy - sx * sxy) / det;
    Ok((a, b, [[sxx / det, -sx / det], [-sx / det, sw / det]]))
}

fn line_result(names: [&str; 2], x: &[f64], y: &[f64], s: &[f64]) -> Result<(FitResult, [[f64; 2]; 2])> {
    let (a, b, cov) = weighted_line(x, y, s)?;
    let chi2: f64 = x
        .iter()
        .zip(y)
        .zip(s)
        .map(|((x, y), s)| ((y - a - b * x) / s).powi(2))
        .sum();
    let chi2_0: f64 = y.iter().zip(s).map(|(y, s)| (y / s).powi(2)).sum();
    Ok((
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: vec![a, b],
            sigmas: vec![cov[0][0].sqrt(), cov[1][1].sqrt()],
            residual_norm: chi2.sqrt(),
            initial_residual_norm: chi2_0.sqrt(),
            status: FitStatus::Converged,
            iterations: 1,
        },
        cov,
    ))
}

/// Linewidth versus photon number: `kappa_eff = kappa - 2 (kappa_a sigma_0) n_c`.
///
/// Parameters: `kappa`, `slope`, `ka_sigma0` (= -slope/2).
pub fn fit_linewidth_series(series: &PowerSeries) -> Result<FitResult> {
    let p = series.points();
    let x: Vec<f64> = p.iter().map(|p| p.n_c).collect();
    let y: Vec<f64> = p.iter().map(|p| p.value).collect();
    let s: Vec<f64> = p.iter().map(|p| p.sigma).collect();
    let (mut r, _) = line_result(["kappa", "slope"], &x, &y, &s)?;
    r.names.push("ka_sigma0".into());
    r.values.push(-r.values[1] / 2.0);
    r.sigmas.push(r.sigmas[1] / 2.0);
    Ok(r)
}

/// One effective-damping measurement together with the linewidth inferred
/// at the same power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingPoint {
    pub n_c: f64,
    pub gamma_eff: f64,
    pub sigma: f64,
    pub kappa_eff: f64,
}

/// `Gamma_eff = Gamma_m + g0^2 (4 n_c / kappa_eff)`.
///
/// Parameters: `gamma_m`, `g0_sq`, `g0`.
pub fn fit_damping_series(points: &[DampingPoint]) -> Result<FitResult> {
    if points.iter().any(|p| !(p.kappa_eff > 0.0) || !(p.sigma > 0.0)) {
        return Err(Error::invalid("points", "kappa_eff and sigma must be > 0"));
    }
    let x: Vec<f64> = points.iter().map(|p| 4.0 * p.n_c / p.kappa_eff).collect();
    let y: Vec<f64> = points.iter().map(|p| p.gamma_eff).collect();
    let s: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    let (mut r, _) = line_result(["gamma_m", "g0_sq"], &x, &y, &s)?;
    let g2 = r.values[1];
    if !(g2 > 0.0) {
        return Err(Error::FitFailed(format!("fitted g0^2 = {g2:e} is not positive")));
    }
    let g0 = g2.sqrt();
    r.names.push("g0".into());
    r.values.push(g0);
    r.sigmas.push(r.sigmas[1] / (2.0 * g0));
    Ok(r)
}

fn real_channel(spectrum: &Spectrum) -> Result<(&[f64], Option<&[f64]>)> {
    let ch = spectrum
        .channels()
        .iter()
        .find(|c| matches!(c.data, ChannelData::Real(_)))
        .ok_or_else(|| Error::InsufficientData("spectrum has no real-valued channel".into()))?;
    match &ch.data {
        ChannelData::Real(v) => Ok((v.as_slice(), ch.sigma.as_deref())),
        ChannelData::Complex(_) => unreachable!(),
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Robust noise scale from the median absolute deviation.
fn mad_sigma(v: &[f64]) -> f64 {
    let m = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    1.4826 * median(&dev)
}

/// White-noise level from the MAD of second differences, which a smooth
/// line shape barely perturbs (`var(d2) = 6 sigma^2`).
fn noise_sigma(v: &[f64]) -> f64 {
    if v.len() < 3 {
        return mad_sigma(v);
    }
    let d2: Vec<f64> = v.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    mad_sigma(&d2) / 6f64.sqrt()
}

fn residual_fn<'a, M>(x: &'a [f64], y: &'a [f64], s: Option<&'a [f64]>, model: M) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a
where
    M: Fn(&[f64], f64) -> f64 + 'a,
{
    move |p: &[f64]| {
        Ok(x.iter()
            .enumerate()
            .map(|(i, &w)| {
                let r = model(p, w) - y[i];
                match s {
                    Some(s) => r / s[i],
                    None => r,
                }
            })
            .collect())
    }
}

/// Full width at half prominence around index `k` of a peak (`sign = 1`) or
/// dip (`sign = -1`) over `floor`.
fn half_width(x: &[f64], y: &[f64], k: usize, floor: f64, sign: f64) -> f64 {
    let half = floor + 0.5 * (y[k] - floor);
    let above = |i: usize| sign * (y[i] - half) > 0.0;
    let mut lo = k;
    while lo > 0 && above(lo - 1) {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < x.len() && above(hi + 1) {
        hi += 1;
    }
    let lo_x = if lo > 0 { 0.5 * (x[lo] + x[lo - 1]) } else { x[0] };
    let hi_x = if hi + 1 < x.len() { 0.5 * (x[hi] + x[hi + 1]) } else { x[x.len() - 1] };
    (hi_x - lo_x).max(x[1] - x[0])
}

/// Model of the probe reflection measured in coherent spectroscopy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherentModel {
    /// `|1 - kappa_ex / (kappa_eff/2 - i(delta_eff + omega))|^2`.
    Bare,
    /// Adds a mechanical mode: the denominator gains
    /// `g2 / (gamma_m/2 - i(omega - omega_m))`; the guesses seed the fit.
    WithMechanics { omega_m: f64, gamma_m: f64, g2: f64 },
}

/// Optional override of the automatic seed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoherentSeed {
    pub kappa_eff: Option<f64>,
    pub delta_eff: Option<f64>,
    pub kappa_ex: Option<f64>,
}

pub const BARE_NAMES: [&str; 3] = ["kappa_eff", "delta_eff", "kappa_ex"];
pub const OMIT_NAMES: [&str; 6] = ["kappa_eff", "delta_eff", "kappa_ex", "g2", "omega_m", "gamma_m"];

/// `|r(omega)|^2` of the coherent-response models; `p` as in [`OMIT_NAMES`]
/// (the first three entries only for the bare model).
pub fn coherent_model(p: &[f64], omega: f64) -> f64 {
    let mut d = Complex64::new(p[0] / 2.0, 0.0) - I * (p[1] + omega);
    if p.len() == 6 {
        d += p[3] / (Complex64::new(p[5] / 2.0, 0.0) - I * (omega - p[4]));
    }
    (1.0 - p[2] / d).norm_sqr()
}

/// Fits the coherent reflection spectrum on its first real channel.
pub fn fit_coherent_response(spectrum: &Spectrum, model: CoherentModel, seed: CoherentSeed) -> Result<FitResult> {
    let x = spectrum.omega();
    let (y, s) = real_channel(spectrum)?;
    if x.len() < 8 {
        return Err(Error::InsufficientData("coherent response needs at least 8 samples".into()));
    }
    let base = median(y);
    let k = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let depth = base - y[k];
    let noise = s.map(median).unwrap_or_else(|| noise_sigma(y));
    let names: &[&str] = match model {
        CoherentModel::Bare => &BARE_NAMES,
        CoherentModel::WithMechanics { .. } => &OMIT_NAMES,
    };
    let width = half_width(x, y, k, base, -1.0);
    // Under-coupled root of |1 - 2 eta|^2 = min.
    let eta = ((1.0 - y[k].max(0.0).min(1.0).sqrt()) / 2.0).clamp(1e-3, 0.499);
    let kappa = seed.kappa_eff.unwrap_or(width);
    let mut guess = vec![
        kappa,
        seed.delta_eff.unwrap_or(-x[k]),
        seed.kappa_ex.unwrap_or(eta * kappa),
    ];
    if let CoherentModel::WithMechanics { omega_m, gamma_m, g2 } = model {
        guess.extend([g2, omega_m, gamma_m]);
    }
    if !(depth > 6.0 * noise) || !(depth > 1e-12) {
        return Ok(FitResult::singular(names, guess));
    }
    let f = residual_fn(x, y, s, coherent_model);
    let opts = LmOptions::default();
    let out = match model {
        CoherentModel::Bare => levenberg_marquardt(f, &guess, s.is_some(), &opts)?,
        CoherentModel::WithMechanics { .. } => {
            // Settle the cavity first with the mechanics frozen, then free everything.
            let mech = guess[3..].to_vec();
            let stage = |p: &[f64]| {
                let mut full = p.to_vec();
                full.extend_from_slice(&mech);
                f(&full)
            };
            let first = levenberg_marquardt(stage, &guess[..3], s.is_some(), &opts)?;
            let mut g = first.params.clone();
            g.extend_from_slice(&mech);
            levenberg_marquardt(f, &g, s.is_some(), &opts)?
        }
    };
    let mut r = FitResult::from_outcome(names, &out);
    if r.values[0] < 0.0 {
        r.status = FitStatus::Singular;
    }
    Ok(r)
}

pub const MECH_NAMES: [&str; 4] = ["gamma_eff", "center", "area", "floor"];

/// `floor + (area/pi) (gamma/2) / ((omega - center)^2 + (gamma/2)^2)`.
pub fn mech_model(p: &[f64], omega: f64) -> f64 {
    let h = p[0] / 2.0;
    let d = omega - p[1];
    p[3] + p[2] / std::f64::consts::PI * h / (d * d + h * h)
}

/// Lorentzian-plus-floor fit of a single mechanical sideband (peak or dip).
pub fn fit_mech_spectrum(spectrum: &Spectrum) -> Result<FitResult> {
    let x = spectrum.omega();
    let (y, s) = real_channel(spectrum)?;
    if x.len() < 8 {
        return Err(Error::InsufficientData("mechanical spectrum needs at least 8 samples".into()));
    }
    let floor = median(y);
    let kmax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let kmin = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let (k, sign) = if y[kmax] - floor >= floor - y[kmin] { (kmax, 1.0) } else { (kmin, -1.0) };
    let prominence = sign * (y[k] - floor);
    let noise = s.map(median).unwrap_or_else(|| noise_sigma(y));
    let gamma = half_width(x, y, k, floor, sign);
    let guess = vec![
        gamma,
        x[k],
        (y[k] - floor) * std::f64::consts::PI * gamma / 2.0,
        floor,
    ];
    if !(prominence > 6.0 * noise) || !(prominence > 0.0) {
        return Ok(FitResult::singular(&MECH_NAMES, guess));
    }
    let f = residual_fn(x, y, s, mech_model);
    let out = levenberg_marquardt(f, &guess, s.is_some(), &LmOptions::default())?;
    let mut r = FitResult::from_outcome(&MECH_NAMES, &out);
    if !(r.values[0] > 0.0) {
        r.status = FitStatus::Singular;
    }
    Ok(r)
}

/// Sideband area with the model quantities needed to convert it into an
/// occupancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermometryPoint {
    pub n_c: f64,
    /// Lorentzian area in shot-noise units times rad/s.
    pub area: f64,
    pub area_sigma: f64,
    pub kappa_eff: f64,
    /// Backaction floor at this power (zero without absorption feedback).
    pub n_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermometryModel {
    pub kappa_ex: f64,
    pub g0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryResult {
    /// `K` in `area = K (n_c / kappa_eff^2) (n_f - 2 n_l)`.
    pub calibration: f64,
    pub calibration_sigma: f64,
    pub eta_ex: f64,
    pub eta_ex_sigma: f64,
    /// `(n_c, n_f, sigma)` per point.
    pub n_f: Vec<(f64, f64, f64)>,
}

/// Converts sideband areas into occupancies by pinning the point at
/// `anchor_n_c` to the known occupancy `anchor_n_f`.
pub fn thermometry(
    points: &[ThermometryPoint],
    anchor_n_c: f64,
    anchor_n_f: f64,
    model: ThermometryModel,
) -> Result<ThermometryResult> {
    let a = points
        .iter()
        .find(|p| (p.n_c - anchor_n_c).abs() <= 1e-9 * anchor_n_c.abs().max(1.0))
        .ok_or_else(|| Error::invalid("anchor", format!("no point at n_c = {anchor_n_c}")))?;
    if !(a.area_sigma.abs() <= 0.5 * a.area.abs()) || a.area == 0.0 {
        return Err(Error::InsufficientData(format!(
            "anchor sideband too weak: area {:e} +/- {:e}",
            a.area, a.area_sigma
        )));
    }
    let lever = |p: &ThermometryPoint| p.n_c / (p.kappa_eff * p.kappa_eff);
    let excess = anchor_n_f - 2.0 * a.n_l;
    if excess == 0.0 || a.n_c <= 0.0 {
        return Err(Error::Degenerate("anchor carries no thermal signal".into()));
    }
    let k = a.area / (lever(a) * excess);
    let k_rel = a.area_sigma / a.area.abs();
    let n_f = points
        .iter()
        .map(|p| {
            let v = p.area / (k * lever(p)) + 2.0 * p.n_l;
            let sig = if std::ptr::eq(p, a) {
                0.0
            } else {
                let y = p.area / (k * lever(p));
                y.abs() * ((p.area_sigma / p.area).powi(2) + k_rel * k_rel).sqrt()
            };
            (p.n_c, v, sig)
        })
        .collect();
    let eta = k / (8.0 * std::f64::consts::PI * model.kappa_ex * model.g0 * model.g0);
    Ok(ThermometryResult {
        calibration: k,
        calibration_sigma: k.abs() * k_rel,
        eta_ex: eta,
        eta_ex_sigma: eta.abs() * k_rel,
        n_f,
    })
}
