//! Reference computations used as test oracles. Each one is written from the
//! definition and shares no code with the library.
#![allow(dead_code)]

use num_rational::Ratio;
use pdvol_core::{Label, Matrix};

/// AUC as the Mann-Whitney statistic: the fraction of (PD, HC) pairs ranked
/// correctly, ties counting one half. Counted in integers, divided once.
pub fn mann_whitney_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l == Label::Pd).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l == Label::Hc).map(|(s, _)| *s).collect();
    let mut twice_wins: u64 = 0;
    for p in &pos {
        for n in &neg {
            twice_wins += if p > n { 2 } else if p == n { 1 } else { 0 };
        }
    }
    twice_wins as f64 / (2 * pos.len() * neg.len()) as f64
}

/// `sum over sides of n_side * (1 - sum_c p_c^2)`, exactly.
pub fn weighted_gini(sides: &[[i128; 2]]) -> Ratio<i128> {
    let mut total = Ratio::from_integer(0);
    for &[a, b] in sides {
        let n = a + b;
        if n == 0 {
            continue;
        }
        let pa = Ratio::new(a, n);
        let pb = Ratio::new(b, n);
        total += Ratio::from_integer(n) * (Ratio::from_integer(1) - pa * pa - pb * pb);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    /// Largest value sent left, and the smallest value sent right.
    pub left_max: f64,
    pub right_min: f64,
    pub impurity: Ratio<i128>,
}

/// Class counts of `samples` (repeats allowed) on each side of
/// `x[., feature] <= cut`.
pub fn side_counts(x: &Matrix, y: &[Label], samples: &[usize], feature: usize, cut: f64) -> [[i128; 2]; 2] {
    let mut c = [[0i128; 2]; 2];
    for &i in samples {
        let side = if x.get(i, feature) <= cut { 0 } else { 1 };
        let class = if y[i] == Label::Pd { 1 } else { 0 };
        c[side][class] += 1;
    }
    c
}

/// Exhaustive search over every feature and every cut between consecutive
/// distinct values. Ties prefer the lower feature, then the lower cut.
pub fn exhaustive_gini_split(x: &Matrix, y: &[Label], samples: &[usize], features: &[usize]) -> Option<OracleSplit> {
    let mut best: Option<OracleSplit> = None;
    for &f in features {
        let mut values: Vec<f64> = samples.iter().map(|&i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let imp = weighted_gini(&side_counts(x, y, samples, f, w[0]));
            let better = match &best {
                None => true,
                Some(b) => imp < b.impurity,
            };
            if better {
                best = Some(OracleSplit { feature: f, left_max: w[0], right_min: w[1], impurity: imp });
            }
        }
    }
    best
}

/// Central finite-difference gradient of `f` at `p`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|j| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[j] += h;
            b[j] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let g = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// `sum a - 1/2 sum_ij a_i a_j y_i y_j k_ij`.
pub fn dual_value(k: &[f64], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += a[i] * a[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * q
}

/// Maximizes the soft-margin SVM dual with accelerated projected gradient
/// ascent. Returns `(alpha, dual value)`.
pub fn dual_qp(k: &[f64], y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    // Lipschitz bound: trace of Q
    let lip = (0..n).map(|i| k[i * n + i]).sum::<f64>().max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - y[i] * (0..n).map(|j| y[j] * k[i * n + j] * a[j]).sum::<f64>())
            .collect()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + gi / lip).collect();
        let next = project(&step, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
        a = next;
        t = t_next;
    }
    let v = dual_value(k, y, &a);
    (a, v)
}

/// Cholesky factorization succeeds (every pivot above `-eps`).
pub fn is_psd(k: &[f64], n: usize, eps: f64) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            for m in 0..j {
                s -= l[i * n + m] * l[j * n + m];
            }
            if i == j {
                if s < -eps {
                    return false;
                }
                l[i * n + i] = s.max(0.0).sqrt();
            } else {
                l[i * n + j] = if l[j * n + j] > 0.0 { s / l[j * n + j] } else { 0.0 };
            }
        }
    }
    true
}
