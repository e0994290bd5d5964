//! Windowed likelihood-ratio statistics.
//!
//! The standard vector uses the `N = P / G` disjoint windows of `G` bins;
//! the sliding vector uses all `M = P − G + 1` windows of `G` consecutive
//! bins. Both share one per-window routine, so a sliding window that pools
//! exactly the bins of a standard window yields a bit-identical statistic.
//!
//! Each window is evaluated on the log scale: `Ξ = 2(ℓ(θ̂) − ℓ(θ*))` first,
//! then `Λ = exp(−Ξ/2)`. Small negative `Ξ` from rounding (down to
//! [`CLAMP_TOLERANCE`]) is clamped to zero and counted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::BinnedDataset;
use crate::model::{ModelError, NullSpec, ParametricModel, Parameter};

/// Most negative `Ξ` that is still treated as rounding noise.
pub const CLAMP_TOLERANCE: f64 = -1e-7;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LrError {
    #[error("invalid window indexing: {0}")]
    Indexing(String),
    #[error("likelihood ratio {0} is outside (0, 1]")]
    InvalidLambda(f64),
    #[error("window {window}: restricted supremum exceeds the full one (Ξ = {xi:e})")]
    InvariantViolation { window: usize, xi: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    Standard,
    Sliding,
}

/// `P` bins grouped into windows of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowIndexing {
    p: usize,
    g: usize,
}

impl WindowIndexing {
    pub fn new(p: usize, g: usize) -> Result<Self, LrError> {
        if g == 0 || g > p {
            return Err(LrError::Indexing(format!("need 1 <= G <= P, got G = {g}, P = {p}")));
        }
        Ok(Self { p, g })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn g(&self) -> usize {
        self.g
    }

    /// Number of sliding windows, `P − G + 1`.
    pub fn m(&self) -> usize {
        self.p - self.g + 1
    }

    /// Number of disjoint windows, defined only when `G` divides `P`.
    pub fn n(&self) -> Option<usize> {
        self.p.is_multiple_of(self.g).then(|| self.p / self.g)
    }

    /// 1-based `(first, last)` bins of standard window `i` (1-based).
    pub fn standard_bins(&self, i: usize) -> (usize, usize) {
        ((i - 1) * self.g + 1, i * self.g)
    }

    /// 1-based `(first, last)` bins of sliding window `i` (1-based).
    pub fn sliding_bins(&self, i: usize) -> (usize, usize) {
        (i, i + self.g - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum WindowStatus {
    Ok,
    Empty,
    Degenerate(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    /// 1-based window index.
    pub index: usize,
    /// 1-based first and last pooled bin.
    pub first_bin: usize,
    pub last_bin: usize,
    pub n_obs: usize,
    /// `NaN` for skipped windows.
    pub lambda: f64,
    pub xi: f64,
    pub full_mle: Option<Parameter>,
    pub restricted_mle: Option<Parameter>,
    pub clamped: bool,
    pub status: WindowStatus,
}

impl WindowStat {
    pub fn is_skipped(&self) -> bool {
        self.status != WindowStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrVector {
    pub kind: LrKind,
    pub g: usize,
    pub windows: Vec<WindowStat>,
}

impl LrVector {
    /// Vector built directly from Λ values, all windows usable. Window
    /// bins follow `kind` with window length `g`.
    pub fn from_lambdas(kind: LrKind, g: usize, lambdas: &[f64]) -> Result<Self, LrError> {
        let xi = xi_from_lambda(lambdas)?;
        let windows = lambdas
            .iter()
            .zip(xi)
            .enumerate()
            .map(|(k, (&lambda, xi))| {
                let index = k + 1;
                let (first_bin, last_bin) = match kind {
                    LrKind::Standard => ((index - 1) * g + 1, index * g),
                    LrKind::Sliding => (index, index + g - 1),
                };
                WindowStat {
                    index,
                    first_bin,
                    last_bin,
                    n_obs: 0,
                    lambda,
                    xi,
                    full_mle: None,
                    restricted_mle: None,
                    clamped: false,
                    status: WindowStatus::Ok,
                }
            })
            .collect();
        Ok(Self { kind, g, windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.lambda).collect()
    }

    pub fn xis(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.xi).collect()
    }

    /// 1-based indices of skipped windows.
    pub fn skipped(&self) -> Vec<usize> {
        self.windows.iter().filter(|w| w.is_skipped()).map(|w| w.index).collect()
    }

    pub fn clamped_count(&self) -> usize {
        self.windows.iter().filter(|w| w.clamped).count()
    }
}

/// Elementwise `−2 ln Λ`.
pub fn xi_from_lambda(values: &[f64]) -> Result<Vec<f64>, LrError> {
    values
        .iter()
        .map(|&l| {
            if !(l > 0.0 && l <= 1.0 + 1e-12) {
                return Err(LrError::InvalidLambda(l));
            }
            Ok((-2.0 * l.ln()).max(0.0))
        })
        .collect()
}

fn window_stat(
    data: &BinnedDataset,
    model: &ParametricModel,
    null: &NullSpec,
    index: usize,
    (first_bin, last_bin): (usize, usize),
) -> Result<WindowStat, LrError> {
    let values = data.pooled_values(first_bin - 1, last_bin - 1);
    let mut stat = WindowStat {
        index,
        first_bin,
        last_bin,
        n_obs: values.len(),
        lambda: f64::NAN,
        xi: f64::NAN,
        full_mle: None,
        restricted_mle: None,
        clamped: false,
        status: WindowStatus::Ok,
    };
    if values.is_empty() {
        stat.status = WindowStatus::Empty;
        return Ok(stat);
    }
    model.check_support(&values)?;
    let fits = model.mle_full(&values).and_then(|full| Ok((model.mle_restricted(null, &values)?, full)));
    let (restricted, full) = match fits {
        Ok(pair) => pair,
        Err(ModelError::DegenerateData(why)) => {
            stat.status = WindowStatus::Degenerate(why);
            return Ok(stat);
        }
        Err(e @ ModelError::Convergence { .. }) => {
            stat.status = WindowStatus::Failed(e.to_string());
            return Ok(stat);
        }
        Err(e) => return Err(e.into()),
    };
    let ll_full = model.log_likelihood(&values, &full)?;
    let ll_restricted = model.log_likelihood(&values, &restricted)?;
    let mut xi = 2.0 * (ll_full - ll_restricted);
    if xi < 0.0 {
        if xi < CLAMP_TOLERANCE {
            return Err(LrError::InvariantViolation { window: index, xi });
        }
        xi = 0.0;
        stat.clamped = true;
    }
    stat.xi = xi;
    stat.lambda = (-0.5 * xi).exp();
    stat.full_mle = Some(full);
    stat.restricted_mle = Some(restricted);
    Ok(stat)
}

/// Disjoint-window statistics `Λ^(st)`; requires `G | P`.
pub fn lambda_standard(
    data: &BinnedDataset,
    model: &ParametricModel,
    null: &NullSpec,
    g: usize,
) -> Result<LrVector, LrError> {
    let idx = WindowIndexing::new(data.num_bins(), g)?;
    let n = idx
        .n()
        .ok_or_else(|| LrError::Indexing(format!("G = {g} does not divide P = {}", data.num_bins())))?;
    let windows = (1..=n)
        .map(|i| window_stat(data, model, null, i, idx.standard_bins(i)))
        .collect::<Result<_, _>>()?;
    Ok(LrVector { kind: LrKind::Standard, g, windows })
}

/// Sliding-window statistics `Λ^(new)`, one per run of `G` consecutive bins.
pub fn lambda_new(
    data: &BinnedDataset,
    model: &ParametricModel,
    null: &NullSpec,
    g: usize,
) -> Result<LrVector, LrError> {
    let idx = WindowIndexing::new(data.num_bins(), g)?;
    let windows = (1..=idx.m())
        .map(|i| window_stat(data, model, null, i, idx.sliding_bins(i)))
        .collect::<Result<_, _>>()?;
    Ok(LrVector { kind: LrKind::Sliding, g, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn poisson_setup(lambda0: f64) -> (ParametricModel, NullSpec) {
        let m = ParametricModel::poisson();
        let null = NullSpec::new(&m, vec![(0, lambda0)]).unwrap();
        (m, null)
    }

    #[test]
    fn poisson_closed_form_window() {
        let (m, null) = poisson_setup(2.0);
        // 10 observations with mean 3 split over two bins.
        let data = BinnedDataset::from_values(vec![vec![3.0; 5], vec![1.0, 5.0, 3.0, 2.0, 4.0]]);
        let lr = lambda_standard(&data, &m, &null, 2).unwrap();
        let want = 2.0 * 10.0 * (2.0 - 3.0 + 3.0 * 1.5f64.ln());
        assert_abs_diff_eq!(lr.windows[0].xi, want, epsilon = 1e-10);
        assert_abs_diff_eq!(lr.windows[0].xi, 4.327906486489863, epsilon = 1e-10);
        assert_abs_diff_eq!(lr.windows[0].lambda, 0.11487011275413762, epsilon = 1e-11);
    }

    #[test]
    fn null_at_mle_gives_unit_ratio() {
        let (m, null) = poisson_setup(2.0);
        let data = BinnedDataset::from_values(vec![vec![1.0, 3.0], vec![2.0, 2.0]]);
        let lr = lambda_new(&data, &m, &null, 2).unwrap();
        assert_eq!(lr.windows[0].xi, 0.0);
        assert_eq!(lr.windows[0].lambda, 1.0);
    }

    #[test]
    fn gaussian_known_variance_window() {
        let m = ParametricModel::gaussian_known_variance(1.0).unwrap();
        let null = NullSpec::new(&m, vec![(0, 0.0)]).unwrap();
        // 25 observations with mean 0.4
        let mut xs: Vec<f64> = (0..25).map(|i| if i % 2 == 0 { 1.4 } else { -0.6 }).collect();
        xs[24] = 0.4 * 25.0 - xs[..24].iter().sum::<f64>();
        let data = BinnedDataset::from_values(vec![xs]);
        let lr = lambda_standard(&data, &m, &null, 1).unwrap();
        assert_abs_diff_eq!(lr.windows[0].xi, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn indexing() {
        let idx = WindowIndexing::new(4, 2).unwrap();
        assert_eq!(idx.m(), 3);
        assert_eq!(idx.n(), Some(2));
        assert_eq!((1..=3).map(|i| idx.sliding_bins(i)).collect::<Vec<_>>(), vec![(1, 2), (2, 3), (3, 4)]);
        assert_eq!(WindowIndexing::new(5, 2).unwrap().n(), None);
        assert!(WindowIndexing::new(3, 4).is_err());
        assert!(WindowIndexing::new(3, 0).is_err());
        assert_eq!(WindowIndexing::new(6, 1).unwrap().m(), 6);
    }

    #[test]
    fn standard_requires_divisibility() {
        let (m, null) = poisson_setup(2.0);
        let data = BinnedDataset::from_values(vec![vec![1.0]; 5]);
        assert!(matches!(lambda_standard(&data, &m, &null, 2), Err(LrError::Indexing(_))));
        assert_eq!(lambda_new(&data, &m, &null, 2).unwrap().len(), 4);
    }

    #[test]
    fn empty_and_degenerate_windows_are_skipped() {
        let (m, null) = poisson_setup(2.0);
        let data = BinnedDataset::from_values(vec![vec![], vec![0.0, 0.0], vec![3.0]]);
        let lr = lambda_new(&data, &m, &null, 1).unwrap();
        assert_eq!(lr.windows[0].status, WindowStatus::Empty);
        assert!(matches!(lr.windows[1].status, WindowStatus::Degenerate(_)));
        assert_eq!(lr.windows[2].status, WindowStatus::Ok);
        assert_eq!(lr.skipped(), vec![1, 2]);
    }

    #[test]
    fn support_violation_is_an_error() {
        let (m, null) = poisson_setup(2.0);
        let data = BinnedDataset::from_values(vec![vec![1.5]]);
        assert!(matches!(lambda_new(&data, &m, &null, 1), Err(LrError::Model(ModelError::SupportViolation { .. }))));
    }

    #[test]
    fn xi_transform() {
        assert_eq!(xi_from_lambda(&[1.0]).unwrap(), vec![0.0]);
        assert_abs_diff_eq!(xi_from_lambda(&[(-2.0f64).exp()]).unwrap()[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(xi_from_lambda(&[0.11487011275413762]).unwrap()[0], 4.327906486489863, epsilon = 1e-9);
        assert!(matches!(xi_from_lambda(&[0.0]), Err(LrError::InvalidLambda(_))));
        assert!(matches!(xi_from_lambda(&[1.1]), Err(LrError::InvalidLambda(_))));
    }

    fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
        (1usize..4, 1usize..4).prop_flat_map(|(n, g)| {
            let p = n * g;
            (prop::collection::vec(prop::collection::vec(0u32..9, 1..6), p), Just(g))
                .prop_map(|(bins, g)| (bins.into_iter().map(|b| b.into_iter().map(f64::from).collect()).collect(), g))
        })
    }

    proptest! {
        #[test]
        fn sliding_contains_standard_bitwise((bins, g) in dataset_strategy(), lambda0 in 0.5f64..5.0) {
            let (m, null) = poisson_setup(lambda0);
            let data = BinnedDataset::from_values(bins);
            let st = lambda_standard(&data, &m, &null, g).unwrap();
            let new = lambda_new(&data, &m, &null, g).unwrap();
            for (i, w) in st.windows.iter().enumerate() {
                let s = &new.windows[i * g];
                prop_assert_eq!(w.xi.to_bits(), s.xi.to_bits());
                prop_assert_eq!(w.lambda.to_bits(), s.lambda.to_bits());
                prop_assert_eq!(&w.status, &s.status);
            }
            for w in new.windows.iter().filter(|w| !w.is_skipped()) {
                prop_assert!(w.lambda > 0.0 && w.lambda <= 1.0);
                prop_assert!(w.xi >= 0.0);
            }
        }

        #[test]
        fn within_bin_permutation_invariance(
            bins in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2..8), 3),
            shift in 0usize..8,
        ) {
            let m = ParametricModel::gaussian_mean_variance();
            let null = NullSpec::new(&m, vec![(0, 0.2)]).unwrap();
            let a = lambda_new(&BinnedDataset::from_values(bins.clone()), &m, &null, 2).unwrap();
            let permuted: Vec<Vec<f64>> = bins.into_iter().map(|mut b| { let k = shift % b.len(); b.rotate_left(k); b.reverse(); b }).collect();
            let b = lambda_new(&BinnedDataset::from_values(permuted), &m, &null, 2).unwrap();
            for (x, y) in a.windows.iter().zip(&b.windows) {
                prop_assert!((x.xi - y.xi).abs() <= 1e-9 * (1.0 + x.xi.abs()));
            }
        }
    }
}
