use crate::error::{Error, Result};

use super::params::{CavityParams, ThermalResponseModel};

/// Relative residual accepted for a polished root, in units of `kappa_ex * F_in`.
pub const ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Lowest stable root (also used for the unique root of a monostable cavity).
    Lower,
    /// Highest stable root of a bistable cavity.
    Upper,
    Unstable,
}

/// Mean intracavity photon number and the shifted detuning it produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanField {
    pub n_c: f64,
    pub delta_bar: f64,
    pub branch: Branch,
}

/// Residual of the mean-field condition, `n (kappa^2/4 + delta_bar(n)^2) - kappa_ex F`.
struct Residual {
    kappa_sq_4: f64,
    detuning: f64,
    shift: f64,
    drive: f64,
}

impl Residual {
    fn eval(&self, n: f64) -> f64 {
        let db = self.detuning - self.shift * n;
        n * (self.kappa_sq_4 + db * db) - self.drive
    }

    fn slope(&self, n: f64) -> f64 {
        let c = self.shift;
        3.0 * c * c * n * n - 4.0 * self.detuning * c * n + self.kappa_sq_4 + self.detuning * self.detuning
    }
}

/// All non-negative mean-field solutions for a drive of `input_flux`
/// photons/s, sorted by photon number.
///
/// The shifted detuning is `delta - (S_dc kappa_a + g_kerr) n_c` with
/// `S_dc = sum_j gain_j / gamma_j`, which keeps the condition a cubic for any
/// number of thermal poles.
pub fn steady_state(
    cavity: &CavityParams,
    thermal: &ThermalResponseModel,
    input_flux: f64,
    kerr_shift_per_photon: f64,
) -> Result<Vec<MeanField>> {
    cavity.validate()?;
    if !(input_flux >= 0.0) || !input_flux.is_finite() {
        return Err(Error::invalid("input_flux", "must be finite and >= 0"));
    }
    let kappa = cavity.kappa();
    let shift = thermal.static_shift() * cavity.kappa_a + kerr_shift_per_photon;
    let res = Residual {
        kappa_sq_4: kappa * kappa / 4.0,
        detuning: cavity.detuning,
        shift,
        drive: cavity.kappa_ex * input_flux,
    };
    let mean = |n: f64, branch| MeanField {
        n_c: n,
        delta_bar: cavity.detuning - shift * n,
        branch,
    };

    if res.drive == 0.0 {
        return Ok(vec![mean(0.0, Branch::Lower)]);
    }
    if shift == 0.0 {
        let n = res.drive / (res.kappa_sq_4 + cavity.detuning * cavity.detuning);
        return Ok(vec![mean(n, Branch::Lower)]);
    }

    // f(n) >= n kappa^2/4 - drive, so every root lies below this bound.
    let n_max = res.drive / res.kappa_sq_4;
    let estimates = cubic_real_roots(
        -2.0 * cavity.detuning / shift,
        (res.kappa_sq_4 + cavity.detuning * cavity.detuning) / (shift * shift),
        -res.drive / (shift * shift),
    );

    // Split [0, n_max] at the critical points of f; each monotone piece holds
    // at most one root.
    let mut edges = vec![0.0];
    let a = 3.0 * shift * shift;
    let b = -4.0 * cavity.detuning * shift;
    let c = res.kappa_sq_4 + cavity.detuning * cavity.detuning;
    let disc = b * b - 4.0 * a * c;
    if disc > 0.0 {
        let sq = disc.sqrt();
        let mut crit = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)];
        crit.sort_by(f64::total_cmp);
        edges.extend(crit.into_iter().filter(|&x| x > 0.0 && x < n_max));
    }
    edges.push(n_max);

    let mut roots = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (res.eval(lo), res.eval(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let seed = estimates.iter().copied().find(|&r| r > lo && r < hi);
        roots.push(polish(&res, lo, hi, seed));
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * f64::EPSILON * b.abs());

    for &n in &roots {
        let r = res.eval(n).abs() / res.drive;
        if r > ROOT_TOLERANCE {
            return Err(Error::RootPolishing {
                n_c: n,
                residual: r,
                tolerance: ROOT_TOLERANCE,
            });
        }
    }

    let mut out = Vec::with_capacity(roots.len());
    let mut seen_stable = false;
    for &n in &roots {
        let branch = if res.slope(n) < 0.0 {
            Branch::Unstable
        } else if !seen_stable {
            seen_stable = true;
            Branch::Lower
        } else {
            Branch::Upper
        };
        out.push(mean(n, branch));
    }
    Ok(out)
}

/// Bisection on a bracket with a sign change, starting from a tight bracket
/// around `seed` when it is usable.
fn polish(res: &Residual, mut lo: f64, mut hi: f64, seed: Option<f64>) -> f64 {
    let rising = res.eval(hi) > 0.0;
    if let Some(s) = seed {
        let d = 1e-9 * s.abs().max(f64::MIN_POSITIVE);
        let (a, b) = ((s - d).max(lo), (s + d).min(hi));
        let (fa, fb) = (res.eval(a), res.eval(b));
        if (fa <= 0.0) == rising && (fb >= 0.0) == rising && fa.signum() != fb.signum() {
            lo = a;
            hi = b;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = res.eval(mid);
        if f == 0.0 {
            return mid;
        }
        if (f > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if res.eval(lo).abs() < res.eval(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Real roots of the monic cubic `x^3 + a x^2 + b x + c`.
fn cubic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let shift = a / 3.0;
    if r * r < q * q * q {
        let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let mut roots: Vec<f64> = (0..3)
            .map(|k| m * ((theta + std::f64::consts::TAU * k as f64) / 3.0).cos() - shift)
            .collect();
        roots.sort_by(f64::total_cmp);
        roots
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let small = if big == 0.0 { 0.0 } else { q / big };
        vec![big + small - shift]
    }
}
