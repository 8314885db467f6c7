//! L2-regularized binary logistic regression.
//!
//! Minimizes the mean negative log-likelihood plus `reg/2 * |w|^2` (bias not
//! penalized) by full-batch gradient descent. Each step starts from a
//! Barzilai-Borwein step length and backtracks until the Armijo condition
//! holds, so the objective never increases. Training stops when the
//! gradient's infinity norm drops below the tolerance.

use thiserror::Error;

use crate::dataset::{Label, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogisticError {
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no training rows")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub reg_strength: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl LogisticParams {
    pub fn new(reg_strength: f64, tolerance: f64) -> Self {
        Self { reg_strength, tolerance, ..Default::default() }
    }
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { reg_strength: 1e-3, tolerance: 1e-4, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub reg_strength: f64,
    pub tolerance: f64,
    pub iterations_run: usize,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn margins(x: &Matrix, w: &[f64], b: f64) -> Vec<f64> {
    x.iter_rows().map(|r| dot(r, w) + b).collect()
}

fn loss_from_margins(z: &[f64], y: &[f64]) -> f64 {
    z.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / z.len() as f64
}

fn targets(y: &[Label]) -> Vec<f64> {
    y.iter().map(|l| l.as_target()).collect()
}

fn check_inputs(x: &Matrix, y: &[Label], w: &[f64]) -> Result<(), LogisticError> {
    if x.rows() == 0 {
        return Err(LogisticError::Empty);
    }
    if y.len() != x.rows() {
        return Err(LogisticError::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if w.len() != x.cols() {
        return Err(LogisticError::DimensionMismatch { expected: x.cols(), got: w.len() });
    }
    if x.as_slice().iter().chain(w).any(|v| !v.is_finite()) {
        return Err(LogisticError::NonFiniteInput);
    }
    Ok(())
}

/// Regularized objective at `(w, b)`.
pub fn objective(x: &Matrix, y: &[Label], w: &[f64], b: f64, reg: f64) -> Result<f64, LogisticError> {
    check_inputs(x, y, w)?;
    let z = margins(x, w, b);
    Ok(loss_from_margins(&z, &targets(y)) + 0.5 * reg * dot(w, w))
}

/// Analytic gradient of [`objective`]: `(d/dw, d/db)`.
pub fn gradient(
    x: &Matrix,
    y: &[Label],
    w: &[f64],
    b: f64,
    reg: f64,
) -> Result<(Vec<f64>, f64), LogisticError> {
    check_inputs(x, y, w)?;
    let z = margins(x, w, b);
    Ok(gradient_from_margins(x, &z, &targets(y), w, reg))
}

fn gradient_from_margins(x: &Matrix, z: &[f64], t: &[f64], w: &[f64], reg: f64) -> (Vec<f64>, f64) {
    let s = x.rows() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, row) in x.iter_rows().enumerate() {
        let r = sigmoid(z[i]) - t[i];
        gb += r;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / s + reg * wj;
    }
    (gw, gb / s)
}

fn inf_norm(gw: &[f64], gb: f64) -> f64 {
    gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()))
}

pub fn fit_logistic(x: &Matrix, y: &[Label], params: &LogisticParams) -> Result<LogisticModel, LogisticError> {
    if !(params.reg_strength > 0.0 && params.reg_strength.is_finite()) {
        return Err(LogisticError::InvalidParams(format!("reg_strength {}", params.reg_strength)));
    }
    if !(params.tolerance > 0.0) || params.max_iter == 0 {
        return Err(LogisticError::InvalidParams("tolerance and max_iter must be positive".into()));
    }
    let n = x.cols();
    let mut w = vec![0.0; n];
    let mut b = 0.0;
    check_inputs(x, y, &w)?;
    let t = targets(y);
    let reg = params.reg_strength;

    let mut z = vec![0.0; x.rows()];
    let mut f = loss_from_margins(&z, &t);
    let mut prev: Option<(Vec<f64>, f64, f64)> = None; // (gw, gb, step) of the last accepted step
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations_run = 0;
    let mut xd = vec![0.0; x.rows()];

    for iter in 1..=params.max_iter {
        iterations_run = iter;
        let (gw, gb) = gradient_from_margins(x, &z, &t, &w, reg);
        if inf_norm(&gw, gb) < params.tolerance {
            converged = true;
            break;
        }
        let g2 = dot(&gw, &gw) + gb * gb;

        // Barzilai-Borwein initial step from the previous displacement.
        if let Some((pgw, pgb, pstep)) = &prev {
            let dg: Vec<f64> = gw.iter().zip(pgw).map(|(a, b)| a - b).collect();
            let dgb = gb - pgb;
            let prev_g2 = dot(pgw, pgw) + pgb * pgb;
            // s = -pstep * g_prev
            let sy = -pstep * (dot(pgw, &dg) + pgb * dgb);
            let ss = pstep * pstep * prev_g2;
            step = if sy > 0.0 { ss / sy } else { (2.0 * pstep).min(1e6) };
        }

        for (i, row) in x.iter_rows().enumerate() {
            xd[i] = -(dot(row, &gw) + gb);
        }
        let wg = dot(&w, &gw);
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let zt: Vec<f64> = z.iter().zip(&xd).map(|(a, d)| a + step * d).collect();
            // |w - step g|^2 = |w|^2 - 2 step w.g + step^2 |g_w|^2
            let ww = dot(&w, &w) - 2.0 * step * wg + step * step * dot(&gw, &gw);
            let ft = loss_from_margins(&zt, &t) + 0.5 * reg * ww;
            if ft <= f + 0.5 * reg * dot(&w, &w) - ARMIJO_C * step * g2 {
                for (wj, g) in w.iter_mut().zip(&gw) {
                    *wj -= step * g;
                }
                b -= step * gb;
                z = margins(x, &w, b);
                f = loss_from_margins(&z, &t);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at machine precision
            break;
        }
        prev = Some((gw, gb, step));
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(LogisticError::NonFiniteInput);
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        reg_strength: reg,
        tolerance: params.tolerance,
        iterations_run,
        converged,
    })
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64, LogisticError> {
        if x.len() != self.weights.len() {
            return Err(LogisticError::DimensionMismatch { expected: self.weights.len(), got: x.len() });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LogisticError> {
        self.decision(x).map(sigmoid)
    }

    /// PD iff the probability is at least 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<Label, LogisticError> {
        Ok(if self.predict_proba(x)? >= 0.5 { Label::Pd } else { Label::Hc })
    }
}
