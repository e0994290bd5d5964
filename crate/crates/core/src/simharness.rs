//! Synthetic scenarios: null and burst data generation, desk-scale checks
//! of the joint limit laws, and power comparisons across time origins.
//!
//! Every replication draws from its own random stream (`seed`, replication
//! index), so reports are bit-reproducible and independent of the number of
//! worker threads.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::{bin_observations, shift_origin, BinnedDataset, BinningError, TimedObservation};
use crate::decision::{
    calibrate_alpha, reject_new, reject_standard, Calibration, CalibrationTarget, DecisionConfig, DecisionError,
};
use crate::limitlaw::{correlation_matrix, LimitLawError};
use crate::lrstats::{lambda_new, lambda_standard, LrError, LrKind, LrVector, WindowIndexing};
use crate::model::{ModelError, NullSpec, ParametricModel, Parameter};
use crate::rng::{self, Domain};
use crate::stats::{chi2_cdf, correlation_with_se, covariance_with_se, ks_one_sample};

/// Exclusion rate above which a validation run fails.
pub const MAX_EXCLUSION_RATE: f64 = 0.01;

// Stream offset separating null datasets from burst datasets of the same
// replication index.
const BURST_STREAM_OFFSET: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Binning(#[from] BinningError),
    #[error(transparent)]
    Lr(#[from] LrError),
    #[error(transparent)]
    LimitLaw(#[from] LimitLawError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Observations with timestamps in `(start, end]` follow `theta1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub start: f64,
    pub end: f64,
    pub theta1: Parameter,
}

impl Burst {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.start && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub model: ParametricModel,
    pub theta0: Parameter,
    pub null: NullSpec,
    /// `n_p` for each of the `P` unit bins.
    pub counts: Vec<usize>,
    pub g: usize,
    pub k: usize,
    pub burst: Option<Burst>,
    pub replications: usize,
    pub seed: u64,
}

/// Named scenario sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `P = 8`, `G = 4`, `n_p = 200`, 2000 replications.
    Desk,
    /// `P = 8`, `G = 4`, `n_p = 1000`, 10⁴ replications.
    Deep,
}

impl Profile {
    pub fn bin_count(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Deep => 1000,
        }
    }

    pub fn replications(self) -> usize {
        match self {
            Profile::Desk => 2000,
            Profile::Deep => 10_000,
        }
    }
}

impl ScenarioSpec {
    /// Poisson rate `λ0` under the simple null `λ = λ0`, equal counts.
    pub fn poisson_simple(lambda0: f64, p: usize, g: usize, per_bin: usize, replications: usize, seed: u64) -> Result<Self, SimError> {
        let model = ParametricModel::poisson();
        let theta0 = model.parameter(vec![lambda0])?;
        let null = NullSpec::new(&model, vec![(0, lambda0)])?;
        let spec = Self { model, theta0, null, counts: vec![per_bin; p], g, k: 1, burst: None, replications, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_profile(lambda0: f64, profile: Profile, seed: u64) -> Result<Self, SimError> {
        Self::poisson_simple(lambda0, 8, 4, profile.bin_count(), profile.replications(), seed)
    }

    pub fn p(&self) -> usize {
        self.counts.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.counts.is_empty() {
            return Err(SimError::InvalidScenario("no bins".into()));
        }
        WindowIndexing::new(self.p(), self.g)?;
        if self.k == 0 {
            return Err(SimError::InvalidScenario("k must be at least 1".into()));
        }
        if !self.model.in_domain(self.theta0.as_slice()) {
            return Err(SimError::InvalidScenario("theta0 outside the parameter domain".into()));
        }
        if let Some(b) = &self.burst {
            if b.end.partial_cmp(&b.start) != Some(std::cmp::Ordering::Greater) {
                return Err(SimError::InvalidScenario(format!("empty burst interval ({}, {}]", b.start, b.end)));
            }
            if b.start < 0.0 || b.end > self.p() as f64 {
                return Err(SimError::InvalidScenario(format!("burst ({}, {}] not inside (0, {}]", b.start, b.end, self.p())));
            }
            if !self.model.in_domain(b.theta1.as_slice()) {
                return Err(SimError::InvalidScenario("theta1 outside the parameter domain".into()));
            }
        }
        Ok(())
    }

    /// True when the burst is shorter than one window.
    pub fn is_sub_window_burst(&self) -> bool {
        self.burst.as_ref().is_some_and(|b| b.length() < self.g as f64)
    }

    /// Same scenario with the burst parameter set back to `theta0`.
    pub fn null_counterpart(&self) -> Self {
        let mut s = self.clone();
        if let Some(b) = &mut s.burst {
            b.theta1 = self.theta0.clone();
        }
        s
    }
}

/// Timestamped observations over `units` unit intervals. Unit `u` holds
/// `counts[u − 1]` draws (the last count repeats past `P`), timestamps
/// uniform in `(u − 1, u]`.
fn generate_timed(spec: &ScenarioSpec, units: usize, stream: u64) -> Vec<TimedObservation> {
    let mut rng = rng::stream(spec.seed, Domain::Replication, stream);
    let last = *spec.counts.last().expect("validated nonempty");
    let mut out = Vec::new();
    for u in 1..=units {
        let n = spec.counts.get(u - 1).copied().unwrap_or(last);
        for _ in 0..n {
            let t = u as f64 - rng.random::<f64>();
            let theta = match &spec.burst {
                Some(b) if b.contains(t) => &b.theta1,
                _ => &spec.theta0,
            };
            let x = spec.model.sample(theta, &mut rng);
            out.push(TimedObservation::new(t, x));
        }
    }
    out
}

/// Null dataset for replication `rep`: bin `p` holds `n_p` iid draws from
/// `f(·; θ0)`.
pub fn generate_h0(spec: &ScenarioSpec, rep: u64) -> Result<BinnedDataset, SimError> {
    if spec.burst.is_some() {
        return Err(SimError::InvalidScenario("generate_h0 needs a scenario without burst".into()));
    }
    spec.validate()?;
    Ok(bin_observations(&generate_timed(spec, spec.p(), rep), spec.p())?)
}

/// Timestamped burst data for replication `rep` over `units` unit
/// intervals, before binning.
pub fn generate_burst_timed(spec: &ScenarioSpec, rep: u64, units: usize) -> Result<Vec<TimedObservation>, SimError> {
    if spec.burst.is_none() {
        return Err(SimError::InvalidScenario("generate_burst needs a burst".into()));
    }
    spec.validate()?;
    Ok(generate_timed(spec, units, rep + BURST_STREAM_OFFSET))
}

/// Burst dataset for replication `rep`.
pub fn generate_burst(spec: &ScenarioSpec, rep: u64) -> Result<BinnedDataset, SimError> {
    Ok(bin_observations(&generate_burst_timed(spec, rep, spec.p())?, spec.p())?)
}

/// 1-based standard window whose span `((i−1)G, iG]` (shifted by `offset`)
/// contains the whole burst.
pub fn containing_standard_window(burst: &Burst, g: usize, p: usize, offset: f64) -> Option<usize> {
    let n = p / g;
    (1..=n).find(|&i| {
        let lo = ((i - 1) * g) as f64 + offset;
        let hi = (i * g) as f64 + offset;
        burst.start >= lo && burst.end <= hi
    })
}

/// 1-based sliding window whose span `(i − 1, i − 1 + G]` (shifted by
/// `offset`) contains the whole burst.
pub fn containing_sliding_window(burst: &Burst, g: usize, p: usize, offset: f64) -> Option<usize> {
    (1..=p + 1 - g).find(|&i| {
        let lo = (i - 1) as f64 + offset;
        let hi = (i - 1 + g) as f64 + offset;
        burst.start >= lo && burst.end <= hi
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2LimitCheck {
    pub r: usize,
    /// KS distance of each window's Ξ sample from `χ²_r`.
    pub ks: Vec<f64>,
    pub ks_tolerance: f64,
    pub xi_corr_empirical: Vec<Vec<f64>>,
    pub xi_corr_se: Vec<Vec<f64>>,
    /// `ρ(i, j)²`.
    pub xi_corr_theory: Vec<Vec<f64>>,
    /// Largest |empirical − theory| over pairs with `0 < |i − j| < G`.
    pub max_corr_error_near: f64,
    /// Largest |empirical| over pairs with `|i − j| ≥ G`.
    pub max_corr_error_far: f64,
    pub corr_tolerance_near: f64,
    pub corr_tolerance_far: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleBlock {
    /// 1-based window pair, `i ≤ j`.
    pub i: usize,
    pub j: usize,
    pub empirical: Vec<Vec<f64>>,
    pub theory: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub frobenius_error: f64,
    /// Largest |empirical − theory| / se over the block entries.
    pub max_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleLimitCheck {
    pub blocks: Vec<MleBlock>,
    pub z_tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub replications: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
    pub counts: Vec<usize>,
    #[serde(rename = "G")]
    pub g: usize,
    pub chi2_limit: Option<Chi2LimitCheck>,
    pub mle_limit: Option<MleLimitCheck>,
    pub pass: bool,
}

impl ValidationReport {
    /// `window,ks,tolerance` rows.
    pub fn write_ks_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window", "ks", "tolerance"])?;
        if let Some(t2) = &self.chi2_limit {
            for (i, ks) in t2.ks.iter().enumerate() {
                w.write_record([(i + 1).to_string(), ks.to_string(), t2.ks_tolerance.to_string()])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// `i,j,empirical,se,theory` rows for the Ξ correlations.
    pub fn write_corr_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "empirical", "se", "theory"])?;
        if let Some(t2) = &self.chi2_limit {
            let m = t2.ks.len();
            for i in 0..m {
                for j in 0..m {
                    w.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        t2.xi_corr_empirical[i][j].to_string(),
                        t2.xi_corr_se[i][j].to_string(),
                        t2.xi_corr_theory[i][j].to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Ξ vector and scaled MLE deviations of one kept replication.
type ReplicationDraw = (Vec<f64>, Vec<f64>);

struct H0Simulation {
    /// Per kept replication: Ξ vector and per-window scaled MLE deviations.
    xi: Vec<Vec<f64>>,
    scaled_mle: Vec<Vec<f64>>,
    excluded: usize,
}

fn simulate_h0(spec: &ScenarioSpec) -> Result<H0Simulation, SimError> {
    if spec.burst.is_some() {
        return Err(SimError::InvalidScenario("validation needs a scenario without burst".into()));
    }
    spec.validate()?;
    let theta0 = spec.theta0.as_slice();
    let results: Vec<Result<Option<ReplicationDraw>, SimError>> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let data = generate_h0(spec, rep)?;
            let lr = lambda_new(&data, &spec.model, &spec.null, spec.g)?;
            if lr.windows.iter().any(|w| w.is_skipped()) {
                return Ok(None);
            }
            let xi = lr.xis();
            let mut scaled = Vec::with_capacity(lr.len() * theta0.len());
            for w in &lr.windows {
                let mle = w.full_mle.as_ref().expect("kept window has an MLE");
                let root = (w.n_obs as f64).sqrt();
                scaled.extend(mle.as_slice().iter().zip(theta0).map(|(a, b)| root * (a - b)));
            }
            Ok(Some((xi, scaled)))
        })
        .collect();
    let mut sim = H0Simulation { xi: Vec::new(), scaled_mle: Vec::new(), excluded: 0 };
    for r in results {
        match r? {
            Some((xi, scaled)) => {
                sim.xi.push(xi);
                sim.scaled_mle.push(scaled);
            }
            None => sim.excluded += 1,
        }
    }
    Ok(sim)
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn chi2_limit_check(spec: &ScenarioSpec, sim: &H0Simulation) -> Result<Chi2LimitCheck, SimError> {
    let corr = correlation_matrix(&spec.counts, spec.g)?;
    let m = corr.m();
    let r = spec.null.r();
    let n = sim.xi.len();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| column(&sim.xi, j)).collect();
    let ks: Vec<f64> = cols.iter().map(|c| ks_one_sample(c, |x| chi2_cdf(x, r))).collect();
    let ks_tolerance = 1.36 / (n as f64).sqrt() + 0.01;
    let corr_tolerance_near = 0.05;
    let corr_tolerance_far = 3.0 / (n as f64).sqrt();
    let mut emp = vec![vec![1.0; m]; m];
    let mut se = vec![vec![0.0; m]; m];
    let mut theory = vec![vec![1.0; m]; m];
    let (mut near, mut far) = (0.0f64, 0.0f64);
    for i in 0..m {
        for j in (i + 1)..m {
            let (c, s) = correlation_with_se(&cols[i], &cols[j]);
            let t = corr.get(i, j).powi(2);
            emp[i][j] = c;
            emp[j][i] = c;
            se[i][j] = s;
            se[j][i] = s;
            theory[i][j] = t;
            theory[j][i] = t;
            if j - i < spec.g {
                near = near.max((c - t).abs());
            } else {
                far = far.max(c.abs());
            }
        }
    }
    let pass = ks.iter().all(|&d| d <= ks_tolerance) && near <= corr_tolerance_near && far <= corr_tolerance_far;
    Ok(Chi2LimitCheck {
        r,
        ks,
        ks_tolerance,
        xi_corr_empirical: emp,
        xi_corr_se: se,
        xi_corr_theory: theory,
        max_corr_error_near: near,
        max_corr_error_far: far,
        corr_tolerance_near,
        corr_tolerance_far,
        pass,
    })
}

fn mle_limit_check(spec: &ScenarioSpec, sim: &H0Simulation) -> Result<MleLimitCheck, SimError> {
    let corr = correlation_matrix(&spec.counts, spec.g)?;
    let m = corr.m();
    let d = spec.model.dim();
    let info_inv = spec
        .model
        .fisher_information(&spec.theta0)?
        .try_inverse()
        .ok_or_else(|| SimError::InvalidScenario("singular Fisher information".into()))?;
    let cols: Vec<Vec<f64>> = (0..m * d).map(|j| column(&sim.scaled_mle, j)).collect();
    let z_tolerance = 3.0;
    let mut blocks = Vec::new();
    for i in 0..m {
        for j in i..m {
            let mut empirical = vec![vec![0.0; d]; d];
            let mut theory = vec![vec![0.0; d]; d];
            let mut se = vec![vec![0.0; d]; d];
            let mut frob = 0.0;
            let mut max_z = 0.0f64;
            for a in 0..d {
                for b in 0..d {
                    let (c, s) = covariance_with_se(&cols[i * d + a], &cols[j * d + b]);
                    let t = corr.get(i, j) * info_inv[(a, b)];
                    empirical[a][b] = c;
                    theory[a][b] = t;
                    se[a][b] = s;
                    frob += (c - t) * (c - t);
                    max_z = max_z.max((c - t).abs() / s);
                }
            }
            blocks.push(MleBlock { i: i + 1, j: j + 1, empirical, theory, se, frobenius_error: frob.sqrt(), max_z });
        }
    }
    let pass = blocks.iter().all(|b| b.max_z <= z_tolerance);
    Ok(MleLimitCheck { blocks, z_tolerance, pass })
}

fn report(spec: &ScenarioSpec, sim: &H0Simulation, t1: Option<MleLimitCheck>, t2: Option<Chi2LimitCheck>) -> ValidationReport {
    let exclusion_rate = sim.excluded as f64 / spec.replications.max(1) as f64;
    let pass = exclusion_rate <= MAX_EXCLUSION_RATE
        && t1.as_ref().is_none_or(|c| c.pass)
        && t2.as_ref().is_none_or(|c| c.pass);
    ValidationReport {
        seed: spec.seed,
        replications: spec.replications,
        excluded: sim.excluded,
        exclusion_rate,
        counts: spec.counts.clone(),
        g: spec.g,
        chi2_limit: t2,
        mle_limit: t1,
        pass,
    }
}

/// Check the joint chi-squared limit of the sliding Ξ vector under H0.
pub fn validate_chi2_limit(spec: &ScenarioSpec) -> Result<ValidationReport, SimError> {
    let sim = simulate_h0(spec)?;
    let t2 = chi2_limit_check(spec, &sim)?;
    Ok(report(spec, &sim, None, Some(t2)))
}

/// Check the joint Gaussian limit of the scaled windowed MLEs under H0.
pub fn validate_mle_limit(spec: &ScenarioSpec) -> Result<ValidationReport, SimError> {
    let sim = simulate_h0(spec)?;
    let t1 = mle_limit_check(spec, &sim)?;
    Ok(report(spec, &sim, Some(t1), None))
}

/// Both checks on one set of simulated datasets.
pub fn validate_all(spec: &ScenarioSpec) -> Result<ValidationReport, SimError> {
    let sim = simulate_h0(spec)?;
    let t1 = mle_limit_check(spec, &sim)?;
    let t2 = chi2_limit_check(spec, &sim)?;
    Ok(report(spec, &sim, Some(t1), Some(t2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Target size for the calibrated comparison.
    pub level: f64,
    /// Common `α` for the equal-threshold comparison; defaults to the
    /// standard procedure's calibrated `α`.
    pub alpha: Option<f64>,
    pub offsets: Vec<f64>,
    /// Monte Carlo draws for calibrating the sliding procedure.
    pub calibration_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    EqualAlpha,
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    H0,
    Burst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub hypothesis: Hypothesis,
    pub offset: f64,
    pub procedure: LrKind,
    pub mode: ThresholdMode,
    pub alpha: f64,
    pub c: f64,
    pub rejections: usize,
    pub replications: usize,
    pub power: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub seed: u64,
    pub level: f64,
    pub equal_alpha: f64,
    pub standard_calibration: Calibration,
    pub sliding_calibration: Calibration,
    /// Replications where the standard rule rejected and the sliding rule
    /// did not, at equal `α`.
    pub inclusion_violations: usize,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn row(&self, hypothesis: Hypothesis, offset: f64, procedure: LrKind, mode: ThresholdMode) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.hypothesis == hypothesis && r.offset == offset && r.procedure == procedure && r.mode == mode)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hypothesis", "offset", "procedure", "mode", "alpha", "c", "rejections", "replications", "power", "se"])?;
        for r in &self.rows {
            let hyp = match r.hypothesis {
                Hypothesis::H0 => "h0",
                Hypothesis::Burst => "burst",
            };
            let proc_ = match r.procedure {
                LrKind::Standard => "standard",
                LrKind::Sliding => "sliding",
            };
            let mode = match r.mode {
                ThresholdMode::EqualAlpha => "equal_alpha",
                ThresholdMode::Calibrated => "calibrated",
            };
            w.write_record([
                hyp.to_string(),
                r.offset.to_string(),
                proc_.to_string(),
                mode.to_string(),
                r.alpha.to_string(),
                r.c.to_string(),
                r.rejections.to_string(),
                r.replications.to_string(),
                r.power.to_string(),
                r.se.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Per replication and offset: rejections of (standard, sliding) at
/// equal α, then at calibrated thresholds.
type Decisions = [bool; 4];

fn decide_all(
    data: &BinnedDataset,
    spec: &ScenarioSpec,
    configs: &[DecisionConfig; 4],
) -> Result<Decisions, SimError> {
    let st: LrVector = lambda_standard(data, &spec.model, &spec.null, spec.g)?;
    let sl: LrVector = lambda_new(data, &spec.model, &spec.null, spec.g)?;
    Ok([
        reject_standard(&st, &configs[0])?.rejects(),
        reject_new(&sl, &configs[1])?.rejects(),
        reject_standard(&st, &configs[2])?.rejects(),
        reject_new(&sl, &configs[3])?.rejects(),
    ])
}

/// Rejection rates of both procedures over origin offsets, at a common `α`
/// and at thresholds calibrated to the same size, under the burst
/// alternative and its null counterpart.
///
/// Data are generated over `P + 1` unit intervals and binned with each
/// origin offset, so every offset sees `P` full bins. The sliding
/// threshold is calibrated on the correlation matrix of the nominal counts.
pub fn power_comparison(spec: &ScenarioSpec, config: &PowerConfig) -> Result<PowerTable, SimError> {
    spec.validate()?;
    if spec.burst.is_none() {
        return Err(SimError::InvalidScenario("power comparison needs a burst".into()));
    }
    let idx = WindowIndexing::new(spec.p(), spec.g)?;
    let n_std = idx
        .n()
        .ok_or_else(|| SimError::InvalidScenario(format!("G = {} must divide P = {}", spec.g, spec.p())))?;
    if config.offsets.is_empty() {
        return Err(SimError::InvalidScenario("no origin offsets".into()));
    }
    let r = spec.null.r();
    let standard_calibration = calibrate_alpha(config.level, spec.k, &CalibrationTarget::Standard { n: n_std, r })?;
    let corr = correlation_matrix(&spec.counts, spec.g)?;
    let sliding_calibration = calibrate_alpha(
        config.level,
        spec.k,
        &CalibrationTarget::Sliding { corr: &corr, r, count: config.calibration_draws, seed: spec.seed },
    )?;
    let equal_alpha = config.alpha.unwrap_or(standard_calibration.alpha);
    let configs = [
        DecisionConfig::from_alpha(equal_alpha, spec.k, spec.g, LrKind::Standard)?,
        DecisionConfig::from_alpha(equal_alpha, spec.k, spec.g, LrKind::Sliding)?,
        DecisionConfig::from_threshold(standard_calibration.c, spec.k, spec.g, LrKind::Standard)?,
        DecisionConfig::from_threshold(sliding_calibration.c, spec.k, spec.g, LrKind::Sliding)?,
    ];

    let null_spec = spec.null_counterpart();
    let units = spec.p() + 1;
    let mut rows = Vec::new();
    let mut inclusion_violations = 0;
    for (hypothesis, scenario) in [(Hypothesis::H0, &null_spec), (Hypothesis::Burst, spec)] {
        // decisions[rep][offset]
        let decisions: Vec<Vec<Decisions>> = (0..spec.replications as u64)
            .into_par_iter()
            .map(|rep| {
                let timed = generate_burst_timed(scenario, rep, units)?;
                config
                    .offsets
                    .iter()
                    .map(|&o| decide_all(&shift_origin(&timed, o, spec.p())?, scenario, &configs))
                    .collect::<Result<Vec<_>, SimError>>()
            })
            .collect::<Result<_, _>>()?;
        for (oi, &offset) in config.offsets.iter().enumerate() {
            inclusion_violations += decisions.iter().filter(|d| d[oi][0] && !d[oi][1]).count();
            for (slot, (procedure, mode)) in [
                (LrKind::Standard, ThresholdMode::EqualAlpha),
                (LrKind::Sliding, ThresholdMode::EqualAlpha),
                (LrKind::Standard, ThresholdMode::Calibrated),
                (LrKind::Sliding, ThresholdMode::Calibrated),
            ]
            .into_iter()
            .enumerate()
            {
                let hits = decisions.iter().filter(|d| d[oi][slot]).count();
                let est = crate::stats::McEstimate::from_hits(hits, spec.replications);
                rows.push(PowerRow {
                    hypothesis,
                    offset,
                    procedure,
                    mode,
                    alpha: configs[slot].alpha,
                    c: configs[slot].c,
                    rejections: hits,
                    replications: spec.replications,
                    power: est.estimate,
                    se: est.se,
                });
            }
        }
    }
    Ok(PowerTable {
        seed: spec.seed,
        level: config.level,
        equal_alpha,
        standard_calibration,
        sliding_calibration,
        inclusion_violations,
        rows,
    })
}

/// Correlation matrix of the nominal counts as nested rows, for reports.
pub fn nominal_correlation(spec: &ScenarioSpec) -> Result<DMatrix<f64>, SimError> {
    Ok(correlation_matrix(&spec.counts, spec.g)?.matrix().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    fn straddling(lambda1: f64, reps: usize) -> ScenarioSpec {
        let mut spec = ScenarioSpec::poisson_simple(2.0, 8, 4, 50, reps, 99).unwrap();
        spec.burst = Some(Burst { start: 3.6, end: 4.4, theta1: spec.model.parameter(vec![lambda1]).unwrap() });
        spec
    }

    #[test]
    fn h0_construction() {
        let spec = ScenarioSpec::poisson_simple(2.0, 8, 4, 50, 10, 1).unwrap();
        let d = generate_h0(&spec, 0).unwrap();
        assert_eq!(d.counts(), vec![50; 8]);
        assert_eq!(d.total(), 400);
        assert_eq!(d, generate_h0(&spec, 0).unwrap());
        assert_ne!(d, generate_h0(&spec, 1).unwrap());
        let xs: Vec<f64> = d.observations().map(|o| o.x).collect();
        assert!((mean(&xs) - 2.0).abs() < 3.0 * (2.0f64 / 400.0).sqrt());
    }

    #[test]
    fn h0_rejects_burst_scenario() {
        assert!(generate_h0(&straddling(3.0, 1), 0).is_err());
        let spec = ScenarioSpec::poisson_simple(2.0, 8, 4, 5, 1, 1).unwrap();
        assert!(generate_burst(&spec, 0).is_err());
    }

    #[test]
    fn burst_validation() {
        let mut spec = straddling(3.0, 1);
        spec.burst.as_mut().unwrap().end = 3.6;
        assert!(spec.validate().is_err());
        let mut spec = straddling(3.0, 1);
        spec.burst.as_mut().unwrap().end = 8.5;
        assert!(spec.validate().is_err());
        assert!(straddling(3.0, 1).is_sub_window_burst());
    }

    #[test]
    fn burst_changes_only_the_interval() {
        let spec = straddling(30.0, 1);
        let d = generate_burst(&spec, 0).unwrap();
        let inside: Vec<f64> = d.observations().filter(|o| o.t > 3.6 && o.t <= 4.4).map(|o| o.x).collect();
        let outside: Vec<f64> = d.observations().filter(|o| !(o.t > 3.6 && o.t <= 4.4)).map(|o| o.x).collect();
        assert!(mean(&inside) > 20.0);
        assert!(mean(&outside) < 3.0);
    }

    #[test]
    fn straddling_burst_containment() {
        let spec = straddling(3.0, 1);
        let b = spec.burst.as_ref().unwrap();
        assert_eq!(containing_standard_window(b, 4, 8, 0.0), None);
        assert_eq!(containing_sliding_window(b, 4, 8, 0.0), Some(2));
        assert_eq!(containing_standard_window(b, 4, 8, 0.5), Some(1));
        for o in [0.0, 0.25, 0.5, 0.75] {
            assert!(containing_sliding_window(b, 4, 8, o).is_some());
        }
        // A burst over (5.8, 6.3] crosses the window boundary at 6 for G = 2,
        // and lies inside one unit span after shifting the origin by 0.5.
        let b = Burst { start: 5.8, end: 6.3, theta1: b.theta1.clone() };
        assert_eq!(containing_standard_window(&b, 2, 8, 0.0), None);
        let timed = [TimedObservation::new(5.9, 1.0), TimedObservation::new(6.2, 1.0)];
        let shifted = shift_origin(&timed, 0.5, 8).unwrap();
        let occupied: Vec<usize> = (0..8).filter(|&p| !shifted.bin(p).is_empty()).collect();
        assert_eq!(occupied, vec![5]);
    }

    #[test]
    fn theta1_equal_theta0_matches_null_distribution() {
        let spec = straddling(2.0, 1);
        let d = generate_burst(&spec, 3).unwrap();
        assert_eq!(d.counts(), vec![50; 8]);
    }

    #[test]
    fn small_validation_runs() {
        let spec = ScenarioSpec::poisson_simple(2.0, 6, 3, 100, 300, 5).unwrap();
        let rep = validate_all(&spec).unwrap();
        assert_eq!(rep.excluded, 0);
        let t2 = rep.chi2_limit.as_ref().unwrap();
        assert_eq!(t2.ks.len(), 4);
        assert!(t2.ks.iter().all(|&k| k >= 0.0));
        assert!((t2.xi_corr_theory[0][1] - 4.0 / 9.0).abs() < 1e-14);
        let t1 = rep.mle_limit.as_ref().unwrap();
        assert_eq!(t1.blocks.len(), 10);
        assert_eq!(validate_all(&spec).unwrap(), rep);
    }

    #[test]
    fn power_table_shape_and_inclusion() {
        let spec = straddling(3.0, 200);
        let cfg = PowerConfig { level: 0.05, alpha: None, offsets: vec![0.0, 0.25, 0.5, 0.75], calibration_draws: 20_000 };
        let table = power_comparison(&spec, &cfg).unwrap();
        assert_eq!(table.rows.len(), 2 * 4 * 4);
        assert_eq!(table.inclusion_violations, 0);
        for procedure in [LrKind::Standard, LrKind::Sliding] {
            let n = table
                .rows
                .iter()
                .filter(|r| r.procedure == procedure && r.mode == ThresholdMode::Calibrated && r.hypothesis == Hypothesis::Burst)
                .count();
            assert_eq!(n, 4);
        }
        for o in &cfg.offsets {
            let st = table.row(Hypothesis::Burst, *o, LrKind::Standard, ThresholdMode::EqualAlpha).unwrap();
            let sl = table.row(Hypothesis::Burst, *o, LrKind::Sliding, ThresholdMode::EqualAlpha).unwrap();
            assert!(sl.power >= st.power);
        }
    }
}
