//! Damped Gauss-Newton (Levenberg-Marquardt) on a residual closure.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIter,
    /// Normal matrix not invertible at the optimum, or the data carry no
    /// usable signal.
    Singular,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIter => "max-iter",
            FitStatus::Singular => "singular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-13,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Parameter covariance from the linearised model at the optimum.
    pub covariance: Option<DMatrix<f64>>,
    pub initial_cost: f64,
    /// Sum of squared residuals.
    pub cost: f64,
    pub n_residuals: usize,
    pub iterations: usize,
    pub status: FitStatus,
}

impl LmOutcome {
    pub fn sigmas(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; self.params.len()],
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian of `f` at `x`.
pub fn jacobian<F>(f: &F, x: &[f64], r0_len: usize, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut j = DMatrix::zeros(r0_len, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = rel_step * if x[k] == 0.0 { 1.0 } else { x[k].abs() };
        xp[k] = x[k] + h;
        let rp = f(&xp)?;
        xp[k] = x[k] - h;
        let rm = f(&xp)?;
        xp[k] = x[k];
        for i in 0..r0_len {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Minimises `sum f(x)_i^2` starting at `x0`.
///
/// When `weighted` is true the residuals are assumed to be already divided
/// by their standard errors and the covariance is `(J^T J)^-1`; otherwise it
/// is scaled by the reduced chi-square.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], weighted: bool, opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let m = r.len();
    let p = x.len();
    let initial_cost = cost_of(&r);
    let mut cost = initial_cost;
    let mut lambda = -1.0;
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;

    if !cost.is_finite() {
        return Ok(LmOutcome {
            params: x,
            covariance: None,
            initial_cost,
            cost,
            n_residuals: m,
            iterations: 0,
            status: FitStatus::Singular,
        });
    }

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let j = jacobian(&f, &x, m, opts.fd_step)?;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        if g.amax() == 0.0 {
            status = FitStatus::Converged;
            break;
        }
        let diag: Vec<f64> = (0..p).map(|i| jtj[(i, i)].max(1e-300)).collect();
        if lambda < 0.0 {
            lambda = 1e-3 * diag.iter().cloned().fold(0.0, f64::max);
        }
        loop {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    if !lambda.is_finite() || lambda > 1e300 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = match f(&xn) {
                Ok(v) => v,
                Err(_) => vec![f64::INFINITY; m],
            };
            let cn = cost_of(&rn);
            if cn.is_finite() && cn <= cost {
                let rel_dc = (cost - cn) / cost.max(f64::MIN_POSITIVE);
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let snorm = step.norm();
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-300);
                if cost == 0.0 || rel_dc < opts.ftol || snorm <= opts.xtol * (xnorm + opts.xtol) {
                    status = FitStatus::Converged;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e300 {
                // No descent direction left: we are at a minimum to working precision.
                status = FitStatus::Converged;
                break 'outer;
            }
        }
    }

    let covariance = final_covariance(&f, &x, m, weighted, cost, opts)?;
    if covariance.is_none() && status == FitStatus::Converged {
        status = FitStatus::Singular;
    }
    Ok(LmOutcome {
        params: x,
        covariance,
        initial_cost,
        cost,
        n_residuals: m,
        iterations,
        status,
    })
}

fn final_covariance<F>(f: &F, x: &[f64], m: usize, weighted: bool, cost: f64, opts: &LmOptions) -> Result<Option<DMatrix<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = x.len();
    let j = jacobian(f, x, m, opts.fd_step)?;
    let jtj = j.transpose() * &j;
    let inv = match covariance_from_normal(&jtj) {
        Some(v) => v,
        None => return Ok(None),
    };
    if weighted {
        return Ok(Some(inv));
    }
    if m <= p {
        return Ok(None);
    }
    Ok(Some(inv * (cost / (m - p) as f64)))
}

/// Inverse of a symmetric normal matrix, `None` when it is numerically
/// singular. Columns are equilibrated first so badly scaled parameters do
/// not masquerade as degeneracy.
pub fn covariance_from_normal(jtj: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let p = jtj.nrows();
    let d: Vec<f64> = (0..p).map(|i| jtj[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut scaled = jtj.clone();
    for i in 0..p {
        for k in 0..p {
            scaled[(i, k)] *= s[i] * s[k];
        }
    }
    let svd = scaled.clone().svd(false, false);
    let sv = svd.singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if !(mn > 1e-13 * mx) {
        return None;
    }
    let inv = scaled.cholesky()?.inverse();
    let mut out = inv;
    for i in 0..p {
        for k in 0..p {
            out[(i, k)] *= s[i] * s[k];
        }
    }
    Some(out)
}
