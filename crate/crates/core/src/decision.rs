//! Rejection rules, type-I error and threshold calibration.
//!
//! A window "fires" when `Λ < α`, equivalently `Ξ > c` with `c = −2 ln α`.
//! Comparisons are made on the `Ξ` scale so that very large windows whose
//! `Λ` underflows still compare correctly. Ties at the threshold do not
//! fire. Skipped windows never fire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limitlaw::{CorrelationMatrix, LimitLawError, RejectionSampler};
use crate::lrstats::{LrKind, LrVector};
use crate::stats::{binomial_upper_tail, chi2_sf, McEstimate};

/// Upper end of the bisection bracket for `c`.
pub const MAX_THRESHOLD: f64 = 200.0;
/// Absolute tolerance on the exact (binomial) calibrated level.
pub const EXACT_LEVEL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DecisionError {
    #[error("invalid decision configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected:?} statistic vector, got {got:?}")]
    KindMismatch { expected: LrKind, got: LrKind },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    LimitLaw(#[from] LimitLawError),
}

/// Greedy left-to-right search for `k` indices in `0..m` satisfying `fires`
/// with consecutive gaps at least `g`. Taking the earliest admissible index
/// at every step is optimal for this constraint, so `None` means no such
/// set exists.
pub fn spaced_witness<F: Fn(usize) -> bool>(m: usize, k: usize, g: usize, fires: F) -> Option<Vec<usize>> {
    if k == 0 {
        return Some(Vec::new());
    }
    let mut picked = Vec::with_capacity(k);
    let mut next = 0;
    for i in 0..m {
        if i >= next && fires(i) {
            picked.push(i);
            if picked.len() == k {
                return Some(picked);
            }
            next = i + g.max(1);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub alpha: f64,
    pub c: f64,
    pub k: usize,
    pub g: usize,
    pub kind: LrKind,
}

impl DecisionConfig {
    pub fn from_alpha(alpha: f64, k: usize, g: usize, kind: LrKind) -> Result<Self, DecisionError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DecisionError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Self::checked(alpha, -2.0 * alpha.ln(), k, g, kind)
    }

    pub fn from_threshold(c: f64, k: usize, g: usize, kind: LrKind) -> Result<Self, DecisionError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(DecisionError::InvalidConfig(format!("threshold c must be positive, got {c}")));
        }
        Self::checked((-0.5 * c).exp(), c, k, g, kind)
    }

    fn checked(alpha: f64, c: f64, k: usize, g: usize, kind: LrKind) -> Result<Self, DecisionError> {
        if k == 0 {
            return Err(DecisionError::InvalidConfig("k must be at least 1".into()));
        }
        if g == 0 {
            return Err(DecisionError::InvalidConfig("G must be at least 1".into()));
        }
        Ok(Self { alpha, c, k, g, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reject,
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Binomial,
    MonteCarlo,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub procedure: LrKind,
    pub verdict: Verdict,
    /// 1-based window indices `i_1 < … < i_k`; empty on retain.
    pub witness: Vec<usize>,
    /// Per-window values, `null` for skipped windows.
    pub lambda: Vec<Option<f64>>,
    pub xi: Vec<Option<f64>>,
    pub alpha: f64,
    pub c: f64,
    pub k: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub level_estimate: Option<f64>,
    pub level_se: Option<f64>,
    pub provenance: Provenance,
    /// 1-based indices of skipped windows.
    pub skipped: Vec<usize>,
}

impl DecisionReport {
    pub fn rejects(&self) -> bool {
        self.verdict == Verdict::Reject
    }

    /// Attach the significance level of the rule that produced the verdict.
    pub fn with_level(mut self, estimate: f64, se: f64, provenance: Provenance) -> Self {
        self.level_estimate = Some(estimate);
        self.level_se = Some(se);
        self.provenance = provenance;
        self
    }
}

fn decide(lr: &LrVector, config: &DecisionConfig, spacing: usize) -> DecisionReport {
    let fires = |i: usize| {
        let w = &lr.windows[i];
        !w.is_skipped() && w.xi > config.c
    };
    let witness = spaced_witness(lr.len(), config.k, spacing, fires);
    let usable = |v: f64, skipped: bool| (!skipped).then_some(v);
    DecisionReport {
        procedure: lr.kind,
        verdict: if witness.is_some() { Verdict::Reject } else { Verdict::Retain },
        witness: witness.unwrap_or_default().into_iter().map(|i| lr.windows[i].index).collect(),
        lambda: lr.windows.iter().map(|w| usable(w.lambda, w.is_skipped())).collect(),
        xi: lr.windows.iter().map(|w| usable(w.xi, w.is_skipped())).collect(),
        alpha: config.alpha,
        c: config.c,
        k: config.k,
        g: config.g,
        level_estimate: None,
        level_se: None,
        provenance: Provenance::None,
        skipped: lr.skipped(),
    }
}

/// Reject when at least `k` disjoint-window statistics fall below `α`.
pub fn reject_standard(lr: &LrVector, config: &DecisionConfig) -> Result<DecisionReport, DecisionError> {
    if lr.kind != LrKind::Standard {
        return Err(DecisionError::KindMismatch { expected: LrKind::Standard, got: lr.kind });
    }
    Ok(decide(lr, config, 1))
}

/// Reject when `k` sliding-window statistics fall below `α` at indices
/// pairwise at least `G` apart.
pub fn reject_new(lr: &LrVector, config: &DecisionConfig) -> Result<DecisionReport, DecisionError> {
    if lr.kind != LrKind::Sliding {
        return Err(DecisionError::KindMismatch { expected: LrKind::Sliding, got: lr.kind });
    }
    Ok(decide(lr, config, config.g))
}

/// Probability that a single window fires under the classical limit,
/// `P(χ²_r > −2 ln α)`.
pub fn single_window_level(alpha: f64, r: usize) -> f64 {
    chi2_sf(-2.0 * alpha.ln(), r)
}

/// Type-I error of the disjoint-window rule: `P(Binomial(N, p_α) ≥ k)`.
pub fn type1_standard(n: usize, k: usize, alpha: f64, r: usize) -> Result<f64, DecisionError> {
    if k == 0 {
        return Err(DecisionError::InvalidConfig("k must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DecisionError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if r == 0 {
        return Err(DecisionError::InvalidConfig("r must be at least 1".into()));
    }
    Ok(binomial_upper_tail(n, k, single_window_level(alpha, r)))
}

/// Monte Carlo type-I error of the sliding rule under the correlated
/// chi-squared limit. The window length is taken from `corr`.
pub fn type1_new(
    corr: &CorrelationMatrix,
    r: usize,
    alpha: f64,
    k: usize,
    count: usize,
    seed: u64,
) -> Result<McEstimate, DecisionError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DecisionError::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(crate::limitlaw::rejection_probability(corr, r, -2.0 * alpha.ln(), k, count, seed)?)
}

#[derive(Debug, Clone)]
pub enum CalibrationTarget<'a> {
    /// `N` disjoint windows, exact binomial level.
    Standard { n: usize, r: usize },
    /// Sliding windows under `corr`, Monte Carlo level with one batch of
    /// draws shared by every bisection step.
    Sliding { corr: &'a CorrelationMatrix, r: usize, count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub c: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub c: f64,
    pub target_level: f64,
    pub achieved_level: f64,
    /// Zero for the exact method.
    pub level_se: f64,
    pub method: Provenance,
    pub trace: Vec<BisectionStep>,
}

/// Find `α` whose type-I error equals `level`, by bisection on
/// `c ∈ [0, MAX_THRESHOLD]`.
pub fn calibrate_alpha(level: f64, k: usize, target: &CalibrationTarget<'_>) -> Result<Calibration, DecisionError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DecisionError::InvalidConfig(format!("target level must lie in (0, 1), got {level}")));
    }
    if k == 0 {
        return Err(DecisionError::InvalidConfig("k must be at least 1".into()));
    }
    match *target {
        CalibrationTarget::Standard { n, r } => {
            if r == 0 {
                return Err(DecisionError::InvalidConfig("r must be at least 1".into()));
            }
            let f = |c: f64| binomial_upper_tail(n, k, chi2_sf(c, r));
            let (c, achieved, trace) = bisect(f, level, |v| (v - level).abs() <= EXACT_LEVEL_TOLERANCE)?;
            if (achieved - level).abs() > EXACT_LEVEL_TOLERANCE {
                return Err(DecisionError::Calibration(format!("bisection stalled at level {achieved}")));
            }
            Ok(Calibration {
                alpha: (-0.5 * c).exp(),
                c,
                target_level: level,
                achieved_level: achieved,
                level_se: 0.0,
                method: Provenance::Binomial,
                trace,
            })
        }
        CalibrationTarget::Sliding { corr, r, count, seed } => {
            if k > corr.m() {
                return Err(DecisionError::Calibration(format!("k = {k} exceeds M = {}", corr.m())));
            }
            let sampler = RejectionSampler::new(corr, r, count, seed)?;
            let f = |c: f64| sampler.probability(c, k).estimate;
            let (c, _, trace) = bisect(f, level, |_| false)?;
            let est = sampler.probability(c, k);
            if (est.estimate - level).abs() > 2.0 * est.se {
                return Err(DecisionError::Calibration(format!(
                    "Monte Carlo level {} is more than 2 s.e. ({}) from {level}",
                    est.estimate, est.se
                )));
            }
            Ok(Calibration {
                alpha: (-0.5 * c).exp(),
                c,
                target_level: level,
                achieved_level: est.estimate,
                level_se: est.se,
                method: Provenance::MonteCarlo,
                trace,
            })
        }
    }
}

/// Bisection for a non-increasing `f` crossing `level` on `[0, MAX_THRESHOLD]`.
/// Returns the upper end of the final bracket, where `f ≤ level`.
fn bisect<F, D>(f: F, level: f64, done: D) -> Result<(f64, f64, Vec<BisectionStep>), DecisionError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> bool,
{
    let (mut lo, mut hi) = (0.0, MAX_THRESHOLD);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo < level || f_hi > level {
        return Err(DecisionError::Calibration(format!(
            "level {level} not bracketed: type-I error ranges over [{f_hi}, {f_lo}] for c in [0, {MAX_THRESHOLD}]"
        )));
    }
    let mut trace = Vec::new();
    let mut best = (hi, f_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let v = f(mid);
        trace.push(BisectionStep { c: mid, level: v });
        if done(v) {
            return Ok((mid, v, trace));
        }
        if v > level {
            lo = mid;
        } else {
            hi = mid;
            best = (mid, v);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((best.0, best.1, trace))
}
