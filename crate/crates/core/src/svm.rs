//! Soft-margin kernel SVM trained with Sequential Minimal Optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! updating one pair of multipliers per iteration. The pair is the maximal
//! violating `i` together with the `j` giving the largest second-order
//! decrease; ties go to the lowest index. It stops once the violation gap
//! `m(a) - M(a)` falls below `tol`, at which point every training point
//! satisfies its KKT condition to within `tol` in units of `y f(x)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{Label, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KernelKind {
    Linear,
    Rbf,
    Poly,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Poly => "poly",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            "poly" => Ok(KernelKind::Poly),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

pub const POLY_DEGREE: u32 = 3;
pub const POLY_COEF0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `x . z`
    Linear,
    /// `exp(-gamma |x - z|^2)`
    Rbf { gamma: f64 },
    /// `(gamma x . z + coef0)^degree`
    Poly { gamma: f64, degree: u32, coef0: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec::Rbf { gamma }
    }

    /// Cubic kernel with `coef0 = 1`.
    pub fn poly(gamma: f64) -> Self {
        KernelSpec::Poly { gamma, degree: POLY_DEGREE, coef0: POLY_COEF0 }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Linear => KernelKind::Linear,
            KernelSpec::Rbf { .. } => KernelKind::Rbf,
            KernelSpec::Poly { .. } => KernelKind::Poly,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            KernelSpec::Linear => None,
            KernelSpec::Rbf { gamma } | KernelSpec::Poly { gamma, .. } => Some(gamma),
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } | KernelSpec::Poly { gamma, .. } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(SvmError::InvalidParams(format!("gamma must be positive, got {gamma}")))
            }
            KernelSpec::Poly { degree: 0, .. } => Err(SvmError::InvalidParams("degree must be at least 1".into())),
            KernelSpec::Poly { coef0, .. } if !coef0.is_finite() => Err(SvmError::InvalidParams("coef0 must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Kernel value without the length check.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Poly { gamma, degree, coef0 } => (gamma * dot(x, z) + coef0).powi(degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64, SvmError> {
    if x.len() != z.len() {
        return Err(SvmError::DimensionMismatch { expected: x.len(), got: z.len() });
    }
    spec.validate()?;
    Ok(spec.eval(x, z))
}

/// Gram matrix of the rows of `x`, row-major.
pub fn kernel_matrix(spec: &KernelSpec, x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelSpec,
    pub tol: f64,
    /// Iteration budget in passes; one pass is as many pair updates as
    /// there are training rows.
    pub max_passes: usize,
}

impl SvmParams {
    pub fn new(c: f64, kernel: KernelSpec) -> Self {
        Self { c, kernel, tol: 1e-3, max_passes: 200 }
    }
}

/// Dual solution over all training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset with `f(x) = sum a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final violation gap `m(a) - M(a)`.
    pub gap: f64,
    /// Dual objective `e'a - 1/2 a'Qa`, recomputed from scratch at each
    /// checkpoint (empty unless a checkpoint interval was requested).
    pub objective_trace: Vec<f64>,
}

const TAU: f64 = 1e-12;

/// Dual objective `e'a - 1/2 a'Qa` (to be maximized).
pub fn dual_objective(k: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = &k[i * n..(i + 1) * n];
        let mut s = 0.0;
        for j in 0..n {
            s += alpha[j] * y[j] * row[j];
        }
        quad += alpha[i] * y[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// SMO on a precomputed Gram matrix. `y` holds ±1.
pub fn solve_smo(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize, checkpoint_every: Option<usize>) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    // additive masks keep the selection loops free of data-dependent branches
    let up_mask = |a: f64, yt: f64| if in_up(a, yt) { 0.0 } else { f64::NEG_INFINITY };
    let low_mask = |a: f64, yt: f64| if in_low(a, yt) { 0.0 } else { f64::INFINITY };
    let mut up: Vec<f64> = (0..n).map(|t| up_mask(alpha[t], y[t])).collect();
    let mut low: Vec<f64> = (0..n).map(|t| low_mask(alpha[t], y[t])).collect();
    let diag: Vec<f64> = (0..n).map(|t| k[t * n + t]).collect();

    // i: maximal -y_t G_t over I_up; after the first round this is found
    // during the gradient update
    let mut gmax = f64::NEG_INFINITY;
    let mut i_sel = usize::MAX;
    for t in 0..n {
        let v = -y[t] * grad[t] + up[t];
        if v > gmax {
            gmax = v;
            i_sel = t;
        }
    }

    loop {
        // j: best second-order decrease over I_low; gmin tracks M(a)
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            let kii = diag[i_sel];
            let row_i = &k[i_sel * n..(i_sel + 1) * n];
            let cols = y.iter().zip(&grad).zip(&low).zip(&diag).zip(row_i);
            for (t, ((((&yt, &gt), &lt), &dt), &kit)) in cols.enumerate() {
                let v = -yt * gt + lt;
                gmin = gmin.min(v);
                let b = gmax - v;
                let mut a = kii + dt - 2.0 * kit;
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if b > 0.0 && obj < best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        gap = gmax - gmin;
        if i_sel == usize::MAX || j_sel == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = (alpha[i] - old_ai) * y[i];
        let dj = (alpha[j] - old_aj) * y[j];
        let (row_i, row_j) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        for t in [i, j] {
            up[t] = up_mask(alpha[t], y[t]);
            low[t] = low_mask(alpha[t], y[t]);
        }
        gmax = f64::NEG_INFINITY;
        i_sel = usize::MAX;
        let cols = grad.iter_mut().zip(y).zip(row_i).zip(row_j).zip(&up);
        for (t, ((((g, &yt), &kit), &kjt), &ut)) in cols.enumerate() {
            *g += yt * (di * kit + dj * kjt);
            let v = -yt * *g + ut;
            if v > gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if let Some(every) = checkpoint_every {
            if iterations % every.max(1) == 0 {
                trace.push(dual_objective(k, y, &alpha));
            }
        }
    }
    if checkpoint_every.is_some() {
        trace.push(dual_objective(k, y, &alpha));
    }

    // offset: mean over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    SmoSolution { alpha, rho, iterations, converged, gap, objective_trace: trace }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    /// `a_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn validate_fit(x: &Matrix, y: &[Label], params: &SvmParams) -> Result<(), SvmError> {
    if y.len() != x.rows() {
        return Err(SvmError::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(SvmError::NonFiniteInput);
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(SvmError::InvalidParams(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(SvmError::InvalidParams("tol must be positive".into()));
    }
    params.kernel.validate()?;
    if !(y.contains(&Label::Pd) && y.contains(&Label::Hc)) {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

pub fn fit_svm(x: &Matrix, y: &[Label], params: &SvmParams) -> Result<SvmModel, SvmError> {
    fit_svm_detailed(x, y, params, None).map(|(m, _)| m)
}

/// Fits and also returns the full dual solution; with `checkpoint_every`
/// the dual objective is recorded every that many iterations.
pub fn fit_svm_detailed(
    x: &Matrix,
    y: &[Label],
    params: &SvmParams,
    checkpoint_every: Option<usize>,
) -> Result<(SvmModel, SmoSolution), SvmError> {
    validate_fit(x, y, params)?;
    let k = kernel_matrix(&params.kernel, x);
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let max_iter = params.max_passes.saturating_mul(x.rows().max(1));
    let sol = solve_smo(&k, &ys, params.c, params.tol, max_iter, checkpoint_every);

    let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let model = SvmModel {
        support_vectors: x.select_rows(&sv),
        dual_coef: sv.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
        bias: -sol.rho,
        kernel: params.kernel,
        c: params.c,
        converged: sol.converged,
        iterations: sol.iterations,
    };
    Ok((model, sol))
}

impl SvmModel {
    pub fn decision_function(&self, x: &[f64]) -> Result<f64, SvmError> {
        let n = self.support_vectors.cols();
        if !self.dual_coef.is_empty() && x.len() != n {
            return Err(SvmError::DimensionMismatch { expected: n, got: x.len() });
        }
        let s: f64 = self
            .support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum();
        Ok(s + self.bias)
    }

    /// PD iff the decision value is at least zero.
    pub fn predict(&self, x: &[f64]) -> Result<Label, SvmError> {
        Ok(if self.decision_function(x)? >= 0.0 { Label::Pd } else { Label::Hc })
    }
}
