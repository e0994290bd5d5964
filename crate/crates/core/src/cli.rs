//! `burstlr <command> [flags]`.
//!
//! Settings come from flags and an optional `--config` file (flat
//! `key=value` lines or a JSON object, keys named like the long flags);
//! flags win. Exit codes: 0 success, 1 configuration or parse error,
//! 2 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::binning::{bin_observations, BinnedDataset};
use crate::decision::{
    calibrate_alpha, reject_new, reject_standard, type1_new, type1_standard, Calibration, CalibrationTarget,
    DecisionConfig, DecisionError, DecisionReport, Provenance,
};
use crate::io::{self, IoError};
use crate::limitlaw::{correlation_matrix, LimitLawError};
use crate::lrstats::{lambda_new, lambda_standard, LrError, LrVector, WindowIndexing};
use crate::model::{ModelError, NullSpec, ParametricModel, Parameter};
use crate::simharness::{self, Burst, PowerConfig, Profile, ScenarioSpec, SimError};

const DEFAULT_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Test an observation file with both procedures.
    Detect,
    /// Find α for a target type-I error.
    Calibrate,
    /// Write synthetic datasets.
    Simulate,
    /// Check the limit laws on simulated null data.
    Validate,
    /// Compare power across time origins.
    Power,
}

#[derive(Debug, Parser)]
#[command(name = "burstlr", version, about = "Multiple likelihood-ratio tests on binned event data")]
pub struct Args {
    pub command: Command,
    /// poisson | exponential | gaussian (mean and variance) | gaussian-known (mean, variance from --sigma)
    #[arg(long)]
    pub model: Option<String>,
    /// Standard deviation for `gaussian-known`.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Null parameter values, comma separated.
    #[arg(long)]
    pub theta0: Option<String>,
    /// Fixed coordinates under the null, e.g. `lambda=2` or `mu=0`.
    #[arg(long)]
    pub null: Option<String>,
    /// Number of unit bins.
    #[arg(long = "P")]
    pub p: Option<String>,
    /// Window length in bins.
    #[arg(long = "G")]
    pub g: Option<String>,
    /// Number of firing windows required to reject.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, conflicts_with = "level")]
    pub alpha: Option<String>,
    /// Target type-I error.
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub input: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    /// Origin offsets in [0, 1), comma separated.
    #[arg(long)]
    pub offsets: Option<String>,
    /// Worker threads, 0 for automatic.
    #[arg(long)]
    pub threads: Option<String>,
    /// desk | deep
    #[arg(long)]
    pub profile: Option<String>,
    /// Observations per bin, comma separated, or one value for all bins.
    #[arg(long)]
    pub counts: Option<String>,
    /// Burst as `start,end,theta1…`.
    #[arg(long)]
    pub burst: Option<String>,
    /// Monte Carlo draws for limit-law levels.
    #[arg(long)]
    pub draws: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

fn config(m: impl ToString) -> CliError {
    CliError::Config(m.to_string())
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        config(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Domain { .. }
            | ModelError::Dimension { .. }
            | ModelError::InvalidNull(_)
            | ModelError::InvalidModel(_)
            | ModelError::SupportViolation { .. } => config(e),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LrError> for CliError {
    fn from(e: LrError) -> Self {
        match e {
            LrError::Indexing(_) | LrError::InvalidLambda(_) => config(e),
            LrError::Model(m) => m.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LimitLawError> for CliError {
    fn from(e: LimitLawError) -> Self {
        match e {
            LimitLawError::Indexing { .. } | LimitLawError::InvalidArgument(_) => config(e),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DecisionError> for CliError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::InvalidConfig(_) | DecisionError::KindMismatch { .. } => config(e),
            DecisionError::LimitLaw(l) => l.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) | SimError::Binning(_) | SimError::Csv(_) => config(e),
            SimError::Model(m) => m.into(),
            SimError::Lr(l) => l.into(),
            SimError::LimitLaw(l) => l.into(),
            SimError::Decision(d) => d.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        config(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        config(e)
    }
}

/// Merged flag and config-file values, keyed by long flag name.
pub struct Settings {
    command: Command,
    values: BTreeMap<String, String>,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?;
        let obj = value.as_object().ok_or_else(|| config("config file must hold a JSON object"))?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => {
                    items.iter().map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string)).collect::<Vec<_>>().join(",")
                }
                other => other.to_string(),
            };
            map.insert(k.clone(), s);
        }
    } else {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config(format!("{} line {}: expected key=value", path.display(), i + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

const KEYS: [&str; 19] = [
    "model", "sigma", "theta0", "null", "P", "G", "k", "alpha", "level", "input", "out", "seed", "reps", "offsets",
    "threads", "profile", "counts", "burst", "draws",
];

impl Settings {
    pub fn from_args(args: Args) -> Result<Self, CliError> {
        let mut values = match &args.config {
            Some(p) => parse_config_file(p)?,
            None => BTreeMap::new(),
        };
        if let Some(k) = values.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(config(format!("unknown config key `{k}`")));
        }
        let flags = [
            ("model", args.model),
            ("sigma", args.sigma),
            ("theta0", args.theta0),
            ("null", args.null),
            ("P", args.p),
            ("G", args.g),
            ("k", args.k),
            ("alpha", args.alpha),
            ("level", args.level),
            ("input", args.input),
            ("out", args.out),
            ("seed", args.seed),
            ("reps", args.reps),
            ("offsets", args.offsets),
            ("threads", args.threads),
            ("profile", args.profile),
            ("counts", args.counts),
            ("burst", args.burst),
            ("draws", args.draws),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                // A flag replaces its config counterpart; alpha and level
                // are alternatives, so one given on the command line
                // also hides the other from the file.
                match k {
                    "alpha" => {
                        values.remove("level");
                    }
                    "level" => {
                        values.remove("alpha");
                    }
                    _ => {}
                }
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { command: args.command, values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| config(format!("--{key} `{v}`: {e}"))))
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| config(format!("--{key} is required")))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = PathBuf::from(self.require::<String>("out")?);
        fs::create_dir_all(&dir).map_err(|e| config(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")?
            .ok_or_else(|| config(format!("--seed is required for {}", command_name(self.command))))
    }

    fn profile(&self) -> Result<Profile, CliError> {
        match self.raw("profile").unwrap_or("desk") {
            "desk" => Ok(Profile::Desk),
            "deep" => Ok(Profile::Deep),
            other => Err(config(format!("--profile must be desk or deep, got `{other}`"))),
        }
    }

    fn model(&self) -> Result<ParametricModel, CliError> {
        let sigma: f64 = self.get("sigma")?.unwrap_or(1.0);
        match self.raw("model").unwrap_or("poisson") {
            "poisson" => Ok(ParametricModel::poisson()),
            "exponential" => Ok(ParametricModel::exponential()),
            "gaussian" => Ok(ParametricModel::gaussian_mean_variance()),
            "gaussian-known" => Ok(ParametricModel::gaussian_known_variance(sigma)?),
            other => Err(config(format!("unknown model `{other}`"))),
        }
    }

    fn theta0(&self, model: &ParametricModel) -> Result<Option<Parameter>, CliError> {
        self.list("theta0")?.map(|v| model.parameter(v).map_err(CliError::from)).transpose()
    }

    /// `--null`, or else the first coordinate fixed at its `--theta0` value.
    fn null(&self, model: &ParametricModel, theta0: Option<&Parameter>) -> Result<NullSpec, CliError> {
        if let Some(spec) = self.raw("null") {
            let names = model.coordinate_names();
            let mut fixed = Vec::new();
            for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (name, value) =
                    part.split_once('=').ok_or_else(|| config(format!("--null `{part}`: expected name=value")))?;
                let idx = names
                    .iter()
                    .position(|n| *n == name.trim())
                    .ok_or_else(|| config(format!("--null: unknown coordinate `{name}`, expected one of {names:?}")))?;
                let v: f64 = value.trim().parse().map_err(|e| config(format!("--null `{part}`: {e}")))?;
                fixed.push((idx, v));
            }
            return Ok(NullSpec::new(model, fixed)?);
        }
        let theta0 = theta0.ok_or_else(|| config("--null or --theta0 is required"))?;
        Ok(NullSpec::new(model, vec![(0, theta0[0])])?)
    }

    /// Parameter generating null data: `--theta0`, else the `--null`
    /// values completed by the free coordinates' defaults.
    fn generating_theta(&self, model: &ParametricModel, null: &NullSpec) -> Result<Parameter, CliError> {
        if let Some(t) = self.theta0(model)? {
            for &(i, v) in null.fixed() {
                if t[i] != v {
                    return Err(config(format!("--theta0 coordinate {} = {} disagrees with --null value {v}", i + 1, t[i])));
                }
            }
            return Ok(t);
        }
        let mut values = vec![1.0; model.dim()];
        if model.coordinate_names()[0] == "mu" {
            values[0] = 0.0;
        }
        for &(i, v) in null.fixed() {
            values[i] = v;
        }
        Ok(model.parameter(values)?)
    }

    fn counts(&self, p: usize, default: usize) -> Result<Vec<usize>, CliError> {
        let Some(raw) = self.raw("counts") else {
            return Ok(vec![default; p]);
        };
        let counts: Vec<usize> = raw
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| config(format!("--counts `{s}`: {e}"))))
            .collect::<Result<_, _>>()?;
        match counts.len() {
            1 => Ok(vec![counts[0]; p]),
            n if n == p => Ok(counts),
            n => Err(config(format!("--counts has {n} entries, P = {p}"))),
        }
    }

    fn threads(&self) -> Result<usize, CliError> {
        Ok(self.get("threads")?.unwrap_or(0))
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| config(format!("--{key} `{s}`: {e}"))))
        .collect()
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Detect => "detect",
        Command::Calibrate => "calibrate",
        Command::Simulate => "simulate",
        Command::Validate => "validate",
        Command::Power => "power",
    }
}

#[derive(Serialize)]
struct DetectOutput {
    model: ParametricModel,
    null: NullSpec,
    #[serde(rename = "P")]
    p: usize,
    counts: Vec<usize>,
    dropped: usize,
    seed: Option<u64>,
    standard: Option<DecisionReport>,
    sliding: DecisionReport,
    standard_calibration: Option<Calibration>,
    sliding_calibration: Option<Calibration>,
}

fn write_windows_csv(path: &Path, vectors: &[&LrVector]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["procedure", "i", "first_bin", "last_bin", "n_obs", "lambda", "xi", "skipped"])?;
    for lr in vectors {
        let name = match lr.kind {
            crate::lrstats::LrKind::Standard => "standard",
            crate::lrstats::LrKind::Sliding => "sliding",
        };
        for s in &lr.windows {
            let (lambda, xi) = if s.is_skipped() { (String::new(), String::new()) } else { (s.lambda.to_string(), s.xi.to_string()) };
            w.write_record([
                name.to_string(),
                s.index.to_string(),
                s.first_bin.to_string(),
                s.last_bin.to_string(),
                s.n_obs.to_string(),
                lambda,
                xi,
                s.is_skipped().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_detect(s: &Settings) -> Result<String, CliError> {
    let model = s.model()?;
    let theta0 = s.theta0(&model)?;
    let null = s.null(&model, theta0.as_ref())?;
    let p: usize = s.require("P")?;
    let g: usize = s.require("G")?;
    let k: usize = s.require("k")?;
    let input: String = s.require("input")?;
    let idx = WindowIndexing::new(p, g)?;
    let alpha: Option<f64> = s.get("alpha")?;
    let level: Option<f64> = s.get("level")?;
    if alpha.is_none() && level.is_none() {
        return Err(config("one of --alpha or --level is required"));
    }
    let seed: Option<u64> = s.get("seed")?;
    let draws: usize = s.get("draws")?.unwrap_or(DEFAULT_DRAWS);
    let out = s.out_dir()?;

    let obs = io::read_observations(Path::new(&input))?;
    let data: BinnedDataset = bin_observations(&obs, p).map_err(config)?;
    let r = null.r();
    let sl = lambda_new(&data, &model, &null, g)?;
    // Only needed for Monte Carlo levels; fails when a window is empty.
    let corr = if seed.is_some() { Some(correlation_matrix(&data.counts(), g)?) } else { None };

    let mut standard_calibration = None;
    let mut sliding_calibration = None;
    let (std_config, new_config) = match (alpha, level) {
        (Some(a), _) => (DecisionConfig::from_alpha(a, k, g, crate::LrKind::Standard)?, DecisionConfig::from_alpha(a, k, g, crate::LrKind::Sliding)?),
        (None, Some(l)) => {
            let seed = seed.ok_or_else(|| config("--seed is required with --level"))?;
            let sc = match idx.n() {
                Some(n) => Some(calibrate_alpha(l, k, &CalibrationTarget::Standard { n, r })?),
                None => None,
            };
            let corr = corr.as_ref().expect("built when a seed is given");
            let nc = calibrate_alpha(l, k, &CalibrationTarget::Sliding { corr, r, count: draws, seed })?;
            let std_c = sc.as_ref().map_or(nc.c, |c| c.c);
            let cfgs = (
                DecisionConfig::from_threshold(std_c, k, g, crate::LrKind::Standard)?,
                DecisionConfig::from_threshold(nc.c, k, g, crate::LrKind::Sliding)?,
            );
            standard_calibration = sc;
            sliding_calibration = Some(nc);
            cfgs
        }
        (None, None) => unreachable!(),
    };

    let mut sliding = reject_new(&sl, &new_config)?;
    if let (Some(seed), Some(corr)) = (seed, &corr) {
        let est = type1_new(corr, r, new_config.alpha, k, draws, seed)?;
        sliding = sliding.with_level(est.estimate, est.se, Provenance::MonteCarlo);
    }
    let mut vectors = vec![];
    let st = match idx.n() {
        Some(n) => {
            let st = lambda_standard(&data, &model, &null, g)?;
            let level = type1_standard(n, k, std_config.alpha, r)?;
            let report = reject_standard(&st, &std_config)?.with_level(level, 0.0, Provenance::Binomial);
            Some((st, report))
        }
        None => None,
    };
    if let Some((st_lr, _)) = &st {
        vectors.push(st_lr);
    }
    vectors.push(&sl);
    write_windows_csv(&out.join("windows.csv"), &vectors)?;
    let summary = format!(
        "sliding: {}{}",
        verdict_text(&sliding),
        st.as_ref().map_or(String::new(), |(_, r)| format!("; standard: {}", verdict_text(r)))
    );
    let output = DetectOutput {
        model,
        null,
        p,
        counts: data.counts(),
        dropped: data.dropped(),
        seed,
        standard: st.map(|(_, r)| r),
        sliding,
        standard_calibration,
        sliding_calibration,
    };
    io::write_json(&output, &out.join("report.json"))?;
    Ok(summary)
}

fn verdict_text(r: &DecisionReport) -> String {
    if r.rejects() {
        format!("reject (windows {:?})", r.witness)
    } else {
        "retain".to_string()
    }
}

#[derive(Serialize)]
struct CalibrateOutput {
    #[serde(rename = "P")]
    p: usize,
    #[serde(rename = "G")]
    g: usize,
    k: usize,
    r: usize,
    counts: Vec<usize>,
    seed: u64,
    draws: usize,
    standard: Option<Calibration>,
    sliding: Calibration,
}

fn null_dimension(s: &Settings) -> Result<usize, CliError> {
    if s.raw("null").is_none() && s.raw("theta0").is_none() {
        return Ok(1);
    }
    let model = s.model()?;
    let theta0 = s.theta0(&model)?;
    Ok(s.null(&model, theta0.as_ref())?.r())
}

fn cmd_calibrate(s: &Settings) -> Result<String, CliError> {
    let p: usize = s.require("P")?;
    let g: usize = s.require("G")?;
    let k: usize = s.require("k")?;
    let level: f64 = s.require("level")?;
    if !(level > 0.0 && level < 1.0) {
        return Err(config(format!("--level must lie in (0, 1), got {level}")));
    }
    let seed = s.seed()?;
    let draws: usize = s.get("draws")?.unwrap_or(DEFAULT_DRAWS);
    let r = null_dimension(s)?;
    let idx = WindowIndexing::new(p, g)?;
    let counts = s.counts(p, 1)?;
    let out = s.out_dir()?;
    let corr = correlation_matrix(&counts, g)?;
    let standard = idx.n().map(|n| calibrate_alpha(level, k, &CalibrationTarget::Standard { n, r })).transpose()?;
    let sliding = calibrate_alpha(level, k, &CalibrationTarget::Sliding { corr: &corr, r, count: draws, seed })?;
    let summary = format!(
        "sliding: alpha = {}, c = {}{}",
        sliding.alpha,
        sliding.c,
        standard.as_ref().map_or(String::new(), |c| format!("; standard: alpha = {}, c = {}", c.alpha, c.c))
    );
    io::write_json(&CalibrateOutput { p, g, k, r, counts, seed, draws, standard, sliding }, &out.join("calibration.json"))?;
    Ok(summary)
}

fn parse_burst(s: &Settings, model: &ParametricModel) -> Result<Option<Burst>, CliError> {
    let Some(v) = s.list("burst")? else {
        return Ok(None);
    };
    if v.len() != 2 + model.dim() {
        return Err(config(format!("--burst needs start,end and {} parameter value(s)", model.dim())));
    }
    Ok(Some(Burst { start: v[0], end: v[1], theta1: model.parameter(v[2..].to_vec())? }))
}

fn scenario(s: &Settings, default_reps: usize) -> Result<ScenarioSpec, CliError> {
    let profile = s.profile()?;
    let model = s.model()?;
    let theta0_flag = s.theta0(&model)?;
    let null = match (s.raw("null"), &theta0_flag) {
        (None, None) => NullSpec::new(&model, vec![(0, if model.coordinate_names()[0] == "mu" { 0.0 } else { 2.0 })])?,
        _ => s.null(&model, theta0_flag.as_ref())?,
    };
    let theta0 = s.generating_theta(&model, &null)?;
    let p: usize = s.get("P")?.unwrap_or(8);
    let g: usize = s.get("G")?.unwrap_or(4);
    let k: usize = s.get("k")?.unwrap_or(1);
    let counts = s.counts(p, profile.bin_count())?;
    let burst = parse_burst(s, &model)?;
    let replications: usize = s.get("reps")?.unwrap_or(default_reps);
    let seed = s.seed()?;
    let spec = ScenarioSpec { model, theta0, null, counts, g, k, burst, replications, seed };
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(s: &Settings) -> Result<String, CliError> {
    let spec = scenario(s, 1)?;
    let out = s.out_dir()?;
    let width = spec.replications.saturating_sub(1).to_string().len();
    for rep in 0..spec.replications {
        let data = match spec.burst {
            Some(_) => simharness::generate_burst(&spec, rep as u64)?,
            None => simharness::generate_h0(&spec, rep as u64)?,
        };
        let name = if spec.replications == 1 { "data.csv".to_string() } else { format!("data_{rep:0width$}.csv") };
        let file = fs::File::create(out.join(name))?;
        io::write_dataset_csv(&data, std::io::BufWriter::new(file))?;
    }
    io::write_json(&spec, &out.join("scenario.json"))?;
    Ok(format!("wrote {} dataset(s)", spec.replications))
}

fn cmd_validate(s: &Settings) -> Result<String, CliError> {
    let spec = scenario(s, s.profile()?.replications())?;
    if spec.burst.is_some() {
        return Err(config("validate runs on null data; drop --burst"));
    }
    let out = s.out_dir()?;
    let report = simharness::validate_all(&spec)?;
    report.write_ks_csv(fs::File::create(out.join("ks.csv"))?)?;
    report.write_corr_csv(fs::File::create(out.join("xi_correlation.csv"))?)?;
    let mut w = csv::Writer::from_path(out.join("mle_covariance.csv"))?;
    w.write_record(["i", "j", "a", "b", "empirical", "se", "theory"])?;
    if let Some(t1) = &report.mle_limit {
        for b in &t1.blocks {
            for (a, row) in b.empirical.iter().enumerate() {
                for (c, e) in row.iter().enumerate() {
                    w.write_record([
                        b.i.to_string(),
                        b.j.to_string(),
                        (a + 1).to_string(),
                        (c + 1).to_string(),
                        e.to_string(),
                        b.se[a][c].to_string(),
                        b.theory[a][c].to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    io::write_json(&report, &out.join("validation.json"))?;
    Ok(format!("validation {}", if report.pass { "passed" } else { "failed" }))
}

fn cmd_power(s: &Settings) -> Result<String, CliError> {
    let mut spec = scenario(s, s.profile()?.replications())?;
    if spec.burst.is_none() {
        // Straddles the boundary between the first two disjoint windows.
        let b = spec.g as f64;
        let theta1 = spec.model.parameter(spec.theta0.as_slice().iter().map(|v| v * 1.5).collect())?;
        spec.burst = Some(Burst { start: b - 0.4, end: b + 0.4, theta1 });
        spec.validate()?;
    }
    let offsets = s.list("offsets")?.unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75]);
    let cfg = PowerConfig {
        level: s.get("level")?.unwrap_or(0.05),
        alpha: s.get("alpha")?,
        offsets,
        calibration_draws: s.get("draws")?.unwrap_or(DEFAULT_DRAWS),
    };
    let out = s.out_dir()?;
    let table = simharness::power_comparison(&spec, &cfg)?;
    table.write_csv(fs::File::create(out.join("power.csv"))?)?;
    io::write_json(&table, &out.join("power.json"))?;
    Ok(format!("{} rows, {} inclusion violations", table.rows.len(), table.inclusion_violations))
}

/// Run a parsed command and return a one-line summary.
pub fn run(settings: &Settings) -> Result<String, CliError> {
    let threads = settings.threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    pool.install(|| match settings.command {
        Command::Detect => cmd_detect(settings),
        Command::Calibrate => cmd_calibrate(settings),
        Command::Simulate => cmd_simulate(settings),
        Command::Validate => cmd_validate(settings),
        Command::Power => cmd_power(settings),
    })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = Settings::from_args(args).and_then(|s| run(&s));
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
