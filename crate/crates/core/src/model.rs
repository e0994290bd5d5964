//! Regular parametric families and their maximum-likelihood estimators.
//!
//! Four families are supported:
//!
//! | family                     | parameter            | support        |
//! |----------------------------|----------------------|----------------|
//! | `Poisson`                  | `(λ)`, λ > 0         | x ∈ {0, 1, …}  |
//! | `GaussianKnownVariance(σ)` | `(μ)`                | x ∈ ℝ          |
//! | `GaussianMeanVariance`     | `(μ, v)`, v = σ² > 0 | x ∈ ℝ          |
//! | `Exponential`              | `(λ)`, rate λ > 0    | x ≥ 0          |
//!
//! Null hypotheses fix a subset of coordinates ([`NullSpec`]). Every family
//! has closed-form full and restricted MLEs; [`ParametricModel::fit_newton`]
//! is the generic Fisher-scoring solver used to cross-check them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::rng::{self, Domain};

const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("observation {value} is outside the support of the {family} family")]
    SupportViolation { value: f64, family: String },
    #[error("parameter {values:?} is outside the parameter domain of the {family} family")]
    Domain { values: Vec<f64>, family: String },
    #[error("parameter has length {got}, model dimension is {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no observations")]
    EmptyData,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid null hypothesis: {0}")]
    InvalidNull(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("MLE solver did not converge after {iterations} iterations (last iterate {last:?}, |score| = {gradient_norm:e})")]
    Convergence { iterations: usize, last: Vec<f64>, gradient_norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Poisson,
    GaussianKnownVariance { sigma: f64 },
    GaussianMeanVariance,
    Exponential,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Poisson => write!(f, "poisson"),
            Family::GaussianKnownVariance { sigma } => write!(f, "gaussian-known-variance(sigma={sigma})"),
            Family::GaussianMeanVariance => write!(f, "gaussian-mean-variance"),
            Family::Exponential => write!(f, "exponential"),
        }
    }
}

/// A point of the parameter space. Built through [`ParametricModel::parameter`],
/// which checks dimension and domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Parameter(Vec<f64>);

impl Parameter {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl std::ops::Index<usize> for Parameter {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Coordinate-fixing null hypothesis `θ[i] = v` for each `(i, v)`.
///
/// Indices are zero-based. `r = fixed.len()` must satisfy `1 ≤ r ≤ d − 1`,
/// except for one-parameter families where the simple null `r = d = 1` is
/// accepted and flagged by [`NullSpec::is_simple`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpec {
    fixed: Vec<(usize, f64)>,
    dim: usize,
}

impl NullSpec {
    pub fn new(model: &ParametricModel, mut fixed: Vec<(usize, f64)>) -> Result<Self, ModelError> {
        let d = model.dim();
        fixed.sort_by_key(|&(i, _)| i);
        if fixed.is_empty() {
            return Err(ModelError::InvalidNull("at least one coordinate must be fixed".into()));
        }
        if fixed.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ModelError::InvalidNull("a coordinate is fixed twice".into()));
        }
        if let Some(&(i, _)) = fixed.iter().find(|&&(i, _)| i >= d) {
            return Err(ModelError::InvalidNull(format!("coordinate {i} out of range for dimension {d}")));
        }
        if fixed.len() == d && d > 1 {
            return Err(ModelError::InvalidNull(format!(
                "fixing all {d} coordinates leaves no free dimension (need r <= d - 1)"
            )));
        }
        // The fixed values must be reachable: some admissible point carries them.
        let mut probe = model.reference_point();
        for &(i, v) in &fixed {
            probe[i] = v;
        }
        if !model.in_domain(&probe) {
            return Err(ModelError::InvalidNull(format!(
                "fixed values {fixed:?} leave the parameter domain of {}",
                model.family()
            )));
        }
        Ok(Self { fixed, dim: d })
    }

    /// Number of constrained coordinates, the degrees of freedom of the limit law.
    pub fn r(&self) -> usize {
        self.fixed.len()
    }

    pub fn fixed(&self) -> &[(usize, f64)] {
        &self.fixed
    }

    /// Indices left free under the null, ascending.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.dim).filter(|i| !self.fixed.iter().any(|&(j, _)| j == *i)).collect()
    }

    /// True for the one-parameter simple null (`r = d = 1`), which lies
    /// outside the `1 ≤ r ≤ d − 1` regime and is supported as an extension.
    pub fn is_simple(&self) -> bool {
        self.fixed.len() == self.dim
    }

    fn apply(&self, values: &mut [f64]) {
        for &(i, v) in &self.fixed {
            values[i] = v;
        }
    }
}

/// Monte Carlo check of the score and information identities at one θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityDiagnostics {
    pub samples: usize,
    pub valid: bool,
    /// Euclidean norm of the sample mean of the score.
    pub score_mean_norm: f64,
    /// Largest absolute entry of `Cov(score) − I(θ)`.
    pub score_cov_error: f64,
    pub fisher_min_eigenvalue: f64,
    /// Largest absolute entry of `mean(∇² log f) + I(θ)`, Hessian by central differences.
    pub hessian_info_error: f64,
}

/// A regular parametric family. Immutable and cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricModel {
    family: Family,
}

impl ParametricModel {
    pub fn new(family: Family) -> Result<Self, ModelError> {
        if let Family::GaussianKnownVariance { sigma } = family {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(ModelError::InvalidModel(format!("sigma must be positive, got {sigma}")));
            }
        }
        Ok(Self { family })
    }

    pub fn poisson() -> Self {
        Self { family: Family::Poisson }
    }

    pub fn gaussian_known_variance(sigma: f64) -> Result<Self, ModelError> {
        Self::new(Family::GaussianKnownVariance { sigma })
    }

    pub fn gaussian_mean_variance() -> Self {
        Self { family: Family::GaussianMeanVariance }
    }

    pub fn exponential() -> Self {
        Self { family: Family::Exponential }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        match self.family {
            Family::GaussianMeanVariance => 2,
            _ => 1,
        }
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self.family {
            Family::Poisson => &["lambda"],
            Family::GaussianKnownVariance { .. } => &["mu"],
            Family::GaussianMeanVariance => &["mu", "var"],
            Family::Exponential => &["rate"],
        }
    }

    pub fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|v| v.is_finite())
            && match self.family {
                Family::Poisson | Family::Exponential => theta[0] > 0.0,
                Family::GaussianKnownVariance { .. } => true,
                Family::GaussianMeanVariance => theta[1] > 0.0,
            }
    }

    pub fn in_support(&self, x: f64) -> bool {
        x.is_finite()
            && match self.family {
                Family::Poisson => x >= 0.0 && x.fract() == 0.0,
                Family::Exponential => x >= 0.0,
                _ => true,
            }
    }

    fn reference_point(&self) -> Vec<f64> {
        match self.family {
            Family::GaussianMeanVariance => vec![0.0, 1.0],
            Family::GaussianKnownVariance { .. } => vec![0.0],
            _ => vec![1.0],
        }
    }

    pub fn parameter(&self, values: Vec<f64>) -> Result<Parameter, ModelError> {
        if values.len() != self.dim() {
            return Err(ModelError::Dimension { expected: self.dim(), got: values.len() });
        }
        if !self.in_domain(&values) {
            return Err(self.domain_error(&values));
        }
        Ok(Parameter(values))
    }

    fn domain_error(&self, values: &[f64]) -> ModelError {
        ModelError::Domain { values: values.to_vec(), family: self.family.to_string() }
    }

    fn check_theta(&self, theta: &Parameter) -> Result<(), ModelError> {
        if theta.len() != self.dim() {
            return Err(ModelError::Dimension { expected: self.dim(), got: theta.len() });
        }
        if !self.in_domain(theta.as_slice()) {
            return Err(self.domain_error(theta.as_slice()));
        }
        Ok(())
    }

    /// Reject any observation outside the common support.
    pub fn check_support(&self, data: &[f64]) -> Result<(), ModelError> {
        match data.iter().find(|&&x| !self.in_support(x)) {
            Some(&value) => Err(ModelError::SupportViolation { value, family: self.family.to_string() }),
            None => Ok(()),
        }
    }

    fn log_density_raw(&self, x: f64, t: &[f64]) -> f64 {
        match self.family {
            Family::Poisson => x * t[0].ln() - t[0] - ln_gamma(x + 1.0),
            Family::GaussianKnownVariance { sigma } => {
                let z = (x - t[0]) / sigma;
                -0.5 * (2.0 * PI).ln() - sigma.ln() - 0.5 * z * z
            }
            Family::GaussianMeanVariance => {
                let d = x - t[0];
                -0.5 * (2.0 * PI * t[1]).ln() - 0.5 * d * d / t[1]
            }
            Family::Exponential => t[0].ln() - t[0] * x,
        }
    }

    fn score_raw(&self, x: f64, t: &[f64], out: &mut [f64]) {
        match self.family {
            Family::Poisson => out[0] = x / t[0] - 1.0,
            Family::GaussianKnownVariance { sigma } => out[0] = (x - t[0]) / (sigma * sigma),
            Family::GaussianMeanVariance => {
                let d = x - t[0];
                out[0] = d / t[1];
                out[1] = -0.5 / t[1] + 0.5 * d * d / (t[1] * t[1]);
            }
            Family::Exponential => out[0] = 1.0 / t[0] - x,
        }
    }

    fn fisher_raw(&self, t: &[f64]) -> DMatrix<f64> {
        match self.family {
            Family::Poisson => DMatrix::from_element(1, 1, 1.0 / t[0]),
            Family::GaussianKnownVariance { sigma } => DMatrix::from_element(1, 1, 1.0 / (sigma * sigma)),
            Family::GaussianMeanVariance => {
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / t[1], 0.5 / (t[1] * t[1])]))
            }
            Family::Exponential => DMatrix::from_element(1, 1, 1.0 / (t[0] * t[0])),
        }
    }

    fn log_likelihood_raw(&self, data: &[f64], t: &[f64]) -> f64 {
        data.iter().map(|&x| self.log_density_raw(x, t)).sum()
    }

    pub fn log_density(&self, x: f64, theta: &Parameter) -> Result<f64, ModelError> {
        self.check_theta(theta)?;
        self.check_support(&[x])?;
        Ok(self.log_density_raw(x, theta.as_slice()))
    }

    /// `Σ log f(x; θ)` over `data`; zero for empty data.
    pub fn log_likelihood(&self, data: &[f64], theta: &Parameter) -> Result<f64, ModelError> {
        self.check_theta(theta)?;
        self.check_support(data)?;
        Ok(self.log_likelihood_raw(data, theta.as_slice()))
    }

    /// Gradient of `log f(x; θ)` with respect to θ.
    pub fn score(&self, x: f64, theta: &Parameter) -> Result<DVector<f64>, ModelError> {
        self.check_theta(theta)?;
        self.check_support(&[x])?;
        let mut out = vec![0.0; self.dim()];
        self.score_raw(x, theta.as_slice(), &mut out);
        Ok(DVector::from_vec(out))
    }

    fn score_sum_raw(&self, data: &[f64], t: &[f64]) -> DVector<f64> {
        let mut total = DVector::zeros(self.dim());
        let mut buf = vec![0.0; self.dim()];
        for &x in data {
            self.score_raw(x, t, &mut buf);
            for (acc, b) in total.iter_mut().zip(&buf) {
                *acc += b;
            }
        }
        total
    }

    pub fn score_sum(&self, data: &[f64], theta: &Parameter) -> Result<DVector<f64>, ModelError> {
        self.check_theta(theta)?;
        self.check_support(data)?;
        Ok(self.score_sum_raw(data, theta.as_slice()))
    }

    /// Per-observation Fisher information `I(θ)`.
    pub fn fisher_information(&self, theta: &Parameter) -> Result<DMatrix<f64>, ModelError> {
        self.check_theta(theta)?;
        Ok(self.fisher_raw(theta.as_slice()))
    }

    /// One draw from `f(·; θ)`. θ must already be admissible.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &Parameter, rng: &mut R) -> f64 {
        let t = theta.as_slice();
        match self.family {
            Family::Poisson => Poisson::new(t[0]).expect("admissible rate").sample(rng),
            Family::GaussianKnownVariance { sigma } => Normal::new(t[0], sigma).expect("positive sigma").sample(rng),
            Family::GaussianMeanVariance => Normal::new(t[0], t[1].sqrt()).expect("positive variance").sample(rng),
            Family::Exponential => Exp::new(t[0]).expect("admissible rate").sample(rng),
        }
    }

    /// Unrestricted MLE in closed form.
    pub fn mle_full(&self, data: &[f64]) -> Result<Parameter, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyData);
        }
        self.check_support(data)?;
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let values = match self.family {
            Family::Poisson => {
                if mean == 0.0 {
                    return Err(ModelError::DegenerateData("all counts are zero; the rate MLE is 0".into()));
                }
                vec![mean]
            }
            Family::GaussianKnownVariance { .. } => vec![mean],
            Family::GaussianMeanVariance => {
                let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                if var <= 0.0 {
                    return Err(ModelError::DegenerateData("zero sample variance".into()));
                }
                vec![mean, var]
            }
            Family::Exponential => {
                if mean == 0.0 {
                    return Err(ModelError::DegenerateData("all observations are zero; the rate MLE is infinite".into()));
                }
                vec![1.0 / mean]
            }
        };
        self.parameter(values)
    }

    /// MLE over the null set in closed form. Fixed coordinates are returned
    /// exactly at their fixed values.
    pub fn mle_restricted(&self, null: &NullSpec, data: &[f64]) -> Result<Parameter, ModelError> {
        if null.dim != self.dim() {
            return Err(ModelError::InvalidNull("null built for a different model dimension".into()));
        }
        if data.is_empty() {
            return Err(ModelError::EmptyData);
        }
        self.check_support(data)?;
        let mut values = self.reference_point();
        null.apply(&mut values);
        if null.is_simple() {
            return self.parameter(values);
        }
        // Only GaussianMeanVariance has a free coordinate left under a null.
        let n = data.len() as f64;
        if null.fixed()[0].0 == 0 {
            let mu = values[0];
            let var = data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
            if var <= 0.0 {
                return Err(ModelError::DegenerateData("all observations equal the fixed mean".into()));
            }
            values[1] = var;
        } else {
            values[0] = data.iter().sum::<f64>() / n;
        }
        self.parameter(values)
    }

    /// Method-of-moments starting point.
    pub fn moment_start(&self, data: &[f64]) -> Result<Parameter, ModelError> {
        // For these four families the moment estimate coincides with the MLE.
        self.mle_full(data)
    }

    /// Generic maximizer by Fisher scoring with backtracking on the
    /// log-likelihood. With a null, fixed coordinates are pinned and only
    /// the free block is updated.
    ///
    /// Stops when `‖Σ score‖ ≤ 1e-9·(1 + n)` over the free coordinates.
    pub fn fit_newton(
        &self,
        data: &[f64],
        null: Option<&NullSpec>,
        start: &Parameter,
    ) -> Result<Parameter, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyData);
        }
        self.check_support(data)?;
        let mut theta = start.as_slice().to_vec();
        if let Some(null) = null {
            null.apply(&mut theta);
        }
        if !self.in_domain(&theta) {
            return Err(self.domain_error(&theta));
        }
        let free: Vec<usize> = match null {
            Some(null) => null.free_indices(),
            None => (0..self.dim()).collect(),
        };
        if free.is_empty() {
            return self.parameter(theta);
        }
        let n = data.len() as f64;
        let tol = 1e-9 * (1.0 + n);
        let mut ll = self.log_likelihood_raw(data, &theta);
        let mut grad_norm = f64::INFINITY;

        for iteration in 0..MAX_ITERATIONS {
            let full_grad = self.score_sum_raw(data, &theta);
            let grad = DVector::from_iterator(free.len(), free.iter().map(|&i| full_grad[i]));
            grad_norm = grad.norm();
            if grad_norm <= tol {
                return self.parameter(theta);
            }
            let info = self.fisher_raw(&theta);
            let block = DMatrix::from_fn(free.len(), free.len(), |a, b| n * info[(free[a], free[b])]);
            let step = block
                .cholesky()
                .ok_or_else(|| ModelError::DegenerateData("information block not positive-definite".into()))?
                .solve(&grad);

            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let mut candidate = theta.clone();
                for (k, &i) in free.iter().enumerate() {
                    candidate[i] += scale * step[k];
                }
                if self.in_domain(&candidate) {
                    let cand_ll = self.log_likelihood_raw(data, &candidate);
                    if cand_ll >= ll {
                        theta = candidate;
                        ll = cand_ll;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(ModelError::Convergence { iterations: iteration, last: theta, gradient_norm: grad_norm });
            }
        }
        Err(ModelError::Convergence { iterations: MAX_ITERATIONS, last: theta, gradient_norm: grad_norm })
    }

    /// Draw `samples` observations at θ and check mean-zero score, score
    /// covariance against `I(θ)`, and `E[∇² log f] = −I(θ)`.
    pub fn check_regularity(&self, theta: &Parameter, samples: usize, seed: u64) -> RegularityDiagnostics {
        let d = self.dim();
        let nan = RegularityDiagnostics {
            samples,
            valid: false,
            score_mean_norm: f64::NAN,
            score_cov_error: f64::NAN,
            fisher_min_eigenvalue: f64::NAN,
            hessian_info_error: f64::NAN,
        };
        if samples == 0 || self.check_theta(theta).is_err() {
            return nan;
        }
        let t = theta.as_slice();
        let info = self.fisher_raw(t);
        let mut rng = rng::stream(seed, Domain::Regularity, 0);
        let mut mean = DVector::<f64>::zeros(d);
        let mut second = DMatrix::<f64>::zeros(d, d);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        let mut buf = vec![0.0; d];
        for _ in 0..samples {
            let x = self.sample(theta, &mut rng);
            self.score_raw(x, t, &mut buf);
            let s = DVector::from_column_slice(&buf);
            mean += &s;
            second += &s * s.transpose();
            hess += self.numeric_hessian(x, t);
        }
        let m = samples as f64;
        mean /= m;
        let cov = second / m - &mean * mean.transpose();
        let hess = hess / m;
        let max_abs = |a: DMatrix<f64>| a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        RegularityDiagnostics {
            samples,
            valid: true,
            score_mean_norm: mean.norm(),
            score_cov_error: max_abs(&cov - &info),
            fisher_min_eigenvalue: info.clone().symmetric_eigenvalues().min(),
            hessian_info_error: max_abs(hess + &info),
        }
    }

    fn numeric_hessian(&self, x: f64, t: &[f64]) -> DMatrix<f64> {
        let d = t.len();
        let f = |p: &[f64]| self.log_density_raw(x, p);
        let h: Vec<f64> = t.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let eval = |si: f64, sj: f64| {
                    let mut p = t.to_vec();
                    p[i] += si * h[i];
                    p[j] += sj * h[j];
                    f(&p)
                };
                out[(i, j)] = if i == j {
                    (eval(1.0, 0.0) - 2.0 * f(t) + eval(-1.0, 0.0)) / (h[i] * h[i])
                } else {
                    (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j])
                };
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn poisson_null(model: &ParametricModel, lambda0: f64) -> NullSpec {
        NullSpec::new(model, vec![(0, lambda0)]).unwrap()
    }

    #[test]
    fn poisson_log_likelihood() {
        let m = ParametricModel::poisson();
        let theta = m.parameter(vec![2.0]).unwrap();
        let ll = m.log_likelihood(&[1.0, 2.0, 3.0], &theta).unwrap();
        let want = -6.0 + 6.0 * 2f64.ln() - 12f64.ln();
        assert_abs_diff_eq!(ll, want, epsilon = 1e-12);
        assert_abs_diff_eq!(ll, -4.326023566428328, epsilon = 1e-12);
    }

    #[test]
    fn empty_data_log_likelihood_is_zero() {
        for m in [ParametricModel::poisson(), ParametricModel::gaussian_mean_variance()] {
            let theta = m.parameter(m.reference_point()).unwrap();
            assert_eq!(m.log_likelihood(&[], &theta).unwrap(), 0.0);
        }
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let m = ParametricModel::gaussian_known_variance(1.0).unwrap();
        let theta = m.parameter(vec![0.0]).unwrap();
        assert_abs_diff_eq!(m.log_likelihood(&[0.0], &theta).unwrap(), -0.9189385332046727, epsilon = 1e-14);
    }

    #[test]
    fn support_and_domain_errors() {
        let m = ParametricModel::poisson();
        let theta = m.parameter(vec![2.0]).unwrap();
        assert!(matches!(m.log_likelihood(&[1.5], &theta), Err(ModelError::SupportViolation { .. })));
        assert!(matches!(m.log_likelihood(&[-1.0], &theta), Err(ModelError::SupportViolation { .. })));
        assert!(matches!(m.parameter(vec![-1.0]), Err(ModelError::Domain { .. })));
        assert!(matches!(m.parameter(vec![1.0, 2.0]), Err(ModelError::Dimension { .. })));
        let e = ParametricModel::exponential();
        let rate = e.parameter(vec![1.0]).unwrap();
        assert!(e.log_likelihood(&[-0.1], &rate).is_err());
        assert!(ParametricModel::gaussian_known_variance(0.0).is_err());
    }

    #[test]
    fn score_examples() {
        let m = ParametricModel::poisson();
        assert_abs_diff_eq!(m.score(3.0, &m.parameter(vec![2.0]).unwrap()).unwrap()[0], 0.5);
        for lambda in [1.0, 4.0, 7.0] {
            assert_abs_diff_eq!(m.score(lambda, &m.parameter(vec![lambda]).unwrap()).unwrap()[0], 0.0);
        }
        let g = ParametricModel::gaussian_known_variance(1.0).unwrap();
        assert_abs_diff_eq!(g.score(1.5, &g.parameter(vec![1.0]).unwrap()).unwrap()[0], 0.5);
    }

    #[test]
    fn fisher_examples() {
        let m = ParametricModel::poisson();
        assert_abs_diff_eq!(m.fisher_information(&m.parameter(vec![2.0]).unwrap()).unwrap()[(0, 0)], 0.5);
        let g = ParametricModel::gaussian_known_variance(1.0).unwrap();
        assert_abs_diff_eq!(g.fisher_information(&g.parameter(vec![-3.0]).unwrap()).unwrap()[(0, 0)], 1.0);
        let mv = ParametricModel::gaussian_mean_variance();
        let i = mv.fisher_information(&mv.parameter(vec![0.3, 4.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(i[(0, 0)], 0.25);
        assert_abs_diff_eq!(i[(1, 1)], 1.0 / 32.0);
        assert_eq!(i[(0, 1)], 0.0);
        assert_eq!(i[(1, 0)], 0.0);
    }

    #[test]
    fn closed_form_mles() {
        let p = ParametricModel::poisson();
        assert_abs_diff_eq!(p.mle_full(&[1.0, 2.0, 3.0]).unwrap()[0], 2.0);
        let g = ParametricModel::gaussian_known_variance(2.0).unwrap();
        assert_eq!(g.mle_full(&[1.25]).unwrap()[0], 1.25);
        let e = ParametricModel::exponential();
        assert_abs_diff_eq!(e.mle_full(&[0.5, 1.5]).unwrap()[0], 1.0);
        assert_eq!(p.mle_full(&[]), Err(ModelError::EmptyData));
    }

    #[test]
    fn degenerate_windows_are_errors() {
        let mv = ParametricModel::gaussian_mean_variance();
        assert!(matches!(mv.mle_full(&[1.0, 1.0, 1.0]), Err(ModelError::DegenerateData(_))));
        let p = ParametricModel::poisson();
        assert!(matches!(p.mle_full(&[0.0, 0.0]), Err(ModelError::DegenerateData(_))));
    }

    #[test]
    fn restricted_mle_gaussian_fixed_mean() {
        let mv = ParametricModel::gaussian_mean_variance();
        let null = NullSpec::new(&mv, vec![(0, 0.0)]).unwrap();
        let t = mv.mle_restricted(&null, &[-1.0, 1.0]).unwrap();
        assert_eq!(t.as_slice(), &[0.0, 1.0]);
        assert_eq!(null.r(), 1);
        assert_eq!(null.free_indices(), vec![1]);
        assert!(!null.is_simple());
    }

    #[test]
    fn restricted_mle_gaussian_fixed_variance() {
        let mv = ParametricModel::gaussian_mean_variance();
        let null = NullSpec::new(&mv, vec![(1, 2.0)]).unwrap();
        let t = mv.mle_restricted(&null, &[1.0, 2.0, 6.0]).unwrap();
        assert_eq!(t.as_slice(), &[3.0, 2.0]);
    }

    #[test]
    fn null_validation() {
        let mv = ParametricModel::gaussian_mean_variance();
        assert!(NullSpec::new(&mv, vec![(0, 0.0), (1, 1.0)]).is_err());
        assert!(NullSpec::new(&mv, vec![]).is_err());
        assert!(NullSpec::new(&mv, vec![(2, 0.0)]).is_err());
        assert!(NullSpec::new(&mv, vec![(1, -1.0)]).is_err());
        let p = ParametricModel::poisson();
        assert!(NullSpec::new(&p, vec![(0, 0.0)]).is_err());
        let simple = poisson_null(&p, 2.0);
        assert!(simple.is_simple());
        // simple null: restricted MLE is the fixed rate regardless of data
        assert_eq!(p.mle_restricted(&simple, &[9.0, 11.0]).unwrap().as_slice(), &[2.0]);
    }

    #[test]
    fn newton_matches_closed_forms() {
        let cases: Vec<(ParametricModel, Vec<f64>, Vec<f64>)> = vec![
            (ParametricModel::poisson(), vec![0.0, 3.0, 1.0, 4.0, 2.0, 2.0], vec![0.3]),
            (ParametricModel::gaussian_known_variance(1.5).unwrap(), vec![0.4, -1.2, 2.5], vec![10.0]),
            (ParametricModel::gaussian_mean_variance(), vec![0.4, -1.2, 2.5, 0.9], vec![-3.0, 20.0]),
            (ParametricModel::exponential(), vec![0.2, 1.7, 0.4, 3.1], vec![5.0]),
        ];
        for (m, data, start) in cases {
            let closed = m.mle_full(&data).unwrap();
            let newton = m.fit_newton(&data, None, &m.parameter(start).unwrap()).unwrap();
            for (a, b) in closed.as_slice().iter().zip(newton.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn newton_restricted_matches_closed_form() {
        let mv = ParametricModel::gaussian_mean_variance();
        let data = [0.4, -1.2, 2.5, 0.9, -0.3];
        for null in [NullSpec::new(&mv, vec![(0, 0.5)]).unwrap(), NullSpec::new(&mv, vec![(1, 0.7)]).unwrap()] {
            let closed = mv.mle_restricted(&null, &data).unwrap();
            let start = mv.mle_full(&data).unwrap();
            let newton = mv.fit_newton(&data, Some(&null), &start).unwrap();
            for (a, b) in closed.as_slice().iter().zip(newton.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn regularity_diagnostics() {
        let p = ParametricModel::poisson();
        let d = p.check_regularity(&p.parameter(vec![2.0]).unwrap(), 100_000, 11);
        assert!(d.valid);
        assert!(d.score_mean_norm < 0.01, "{d:?}");
        assert_abs_diff_eq!(d.fisher_min_eigenvalue, 0.5, epsilon = 1e-12);

        let g = ParametricModel::gaussian_known_variance(1.0).unwrap();
        let d = g.check_regularity(&g.parameter(vec![0.5]).unwrap(), 100_000, 12);
        assert!(d.score_cov_error < 0.02, "{d:?}");
        assert!(d.hessian_info_error < 1e-5, "{d:?}");

        let empty = p.check_regularity(&p.parameter(vec![2.0]).unwrap(), 0, 1);
        assert!(!empty.valid);
        assert_eq!(empty.samples, 0);
    }
}
