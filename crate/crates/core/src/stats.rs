//! Distribution tails, goodness-of-fit distances and Monte Carlo moment
//! estimates shared by the limit-law, decision and simulation modules.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, gamma_ur};

/// Upper tail `P(χ²_r > c)`.
pub fn chi2_sf(c: f64, dof: usize) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, c / 2.0)
}

/// `P(χ²_r ≤ c)`.
pub fn chi2_cdf(c: f64, dof: usize) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    gamma_lr(dof as f64 / 2.0, c / 2.0)
}

/// `P(Binomial(n, p) ≥ k)`, through the regularized incomplete beta
/// identity `I_p(k, n - k + 1)`.
pub fn binomial_upper_tail(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    beta_reg(k as f64, (n - k + 1) as f64, p)
}

/// A Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub count: usize,
}

impl McEstimate {
    pub fn from_hits(hits: usize, count: usize) -> Self {
        if count == 0 {
            return Self { estimate: f64::NAN, se: f64::NAN, count };
        }
        let p = hits as f64 / count as f64;
        Self { estimate: p, se: (p * (1.0 - p) / count as f64).sqrt(), count }
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n - F|`.
///
/// Evaluated on both sides of every jump, so ties in the sample are
/// handled correctly.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance between empirical CDFs.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return f64::NAN;
    }
    let a = sorted(xs);
    let b = sorted(ys);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population-normalized variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Sample covariance of `(x, y)` with the standard error of that estimate,
/// `sd((x - x̄)(y - ȳ)) / √n`.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let c = mean(&prods);
    let v = prods.iter().map(|p| (p - c) * (p - c)).sum::<f64>() / n;
    (c, (v / n).sqrt())
}

/// Pearson correlation with its large-sample standard error.
///
/// The error uses the general fourth-moment expression
/// `n·Var(r) ≈ (1 + r²/2)·m22 − r·(m31 + m13) + r²/4·(m40 + m04)`
/// over standardized moments, so it stays valid for non-Gaussian pairs
/// such as chi-squared components.
pub fn correlation_with_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let (sx, sy) = (variance(xs).sqrt(), variance(ys).sqrt());
    if sx == 0.0 || sy == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let (mut m11, mut m22, mut m31, mut m13, mut m40, mut m04) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let u = (x - mx) / sx;
        let v = (y - my) / sy;
        m11 += u * v;
        m22 += u * u * v * v;
        m31 += u * u * u * v;
        m13 += u * v * v * v;
        m40 += u * u * u * u;
        m04 += v * v * v * v;
    }
    let (m11, m22, m31, m13, m40, m04) = (m11 / n, m22 / n, m31 / n, m13 / n, m40 / n, m04 / n);
    let r = m11;
    let var = (1.0 + r * r / 2.0) * m22 - r * (m31 + m13) + r * r / 4.0 * (m40 + m04);
    (r, (var.max(0.0) / n).sqrt())
}
