//! Joint limit laws of the sliding-window statistics.
//!
//! The banded correlation matrix `R_M` depends only on the bin counts and
//! the window length:
//!
//! ```text
//! ρ(i, j) = Σ_{p=max(i,j)}^{min(i,j)+G−1} n_p / √(S_i · S_j)   if |i − j| < G
//!         = 0                                                 otherwise
//! S_i     = n_i + … + n_{i+G−1}
//! ```
//!
//! (`Σ_q Σ_l n_q n_l` over the two windows factors into `S_i · S_j`.)
//!
//! Three samplers are provided:
//!
//! * [`sample_chi2_limit`]: the correlated chi-squared vector, each component
//!   a sum of `r` squared coordinates of independent `N(0, R)` draws.
//! * [`sample_chi2_limit_oracle`]: the same law through the quadratic-form
//!   representation `Gᵢᵀ K Gᵢ` with `(G_1, …, G_M) ~ N(0, R ⊗ I₀)` and
//!   `K = (Id − I₀H)ᵀ I₀⁻¹ (Id − I₀H)`. It shares no code path with the
//!   direct sampler beyond the Cholesky routine.
//! * [`sample_mle_limit`]: the `dM`-dimensional Gaussian with blocks
//!   `ρ(i, j)·I₀⁻¹`.
//!
//! All samplers split the draws into [`rng::CHUNK`]-sized chunks with one
//! random stream per chunk and run the chunks in parallel; output is
//! identical for any thread count.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::spaced_witness;
use crate::rng::{self, Domain, GENERATOR_ID};
use crate::stats::McEstimate;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LimitLawError {
    #[error("invalid window length G = {g} for P = {p}")]
    Indexing { g: usize, p: usize },
    #[error("window starting at bin {window} has no observations")]
    SingularWindow { window: usize },
    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("the free-coordinate block of the information matrix is singular")]
    SingularFreeBlock,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    g: usize,
    counts: Vec<usize>,
    #[serde(with = "matrix_rows")]
    entries: DMatrix<f64>,
    zero_count_bins: Vec<usize>,
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl CorrelationMatrix {
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `ρ(i, j)` with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// 1-based bins with zero count. Accepted as long as every window sum
    /// is positive.
    pub fn zero_count_bins(&self) -> &[usize] {
        &self.zero_count_bins
    }

    /// Matrix with arbitrary entries, for limit-law experiments that do not
    /// start from counts. Must be square and symmetric with unit diagonal.
    pub fn from_matrix(entries: DMatrix<f64>, g: usize) -> Result<Self, LimitLawError> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(LimitLawError::InvalidArgument("correlation matrix must be square and nonempty".into()));
        }
        for i in 0..m {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(LimitLawError::InvalidArgument("diagonal must be 1".into()));
            }
            for j in 0..m {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(LimitLawError::InvalidArgument("matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { g, counts: Vec::new(), entries, zero_count_bins: Vec::new() })
    }

    /// Lower Cholesky factor, with diagonal jitter escalating from
    /// `1e-12·tr/M` by ×10 up to `1e-8·tr/M`.
    pub fn cholesky(&self) -> Result<DMatrix<f64>, LimitLawError> {
        cholesky_with_jitter(&self.entries)
    }
}

/// `R_M` for counts `(n_1, …, n_P)` and window length `G`.
pub fn correlation_matrix(counts: &[usize], g: usize) -> Result<CorrelationMatrix, LimitLawError> {
    let p = counts.len();
    if g == 0 || g > p {
        return Err(LimitLawError::Indexing { g, p });
    }
    let m = p - g + 1;
    let mut prefix = vec![0.0f64; p + 1];
    for (k, &n) in counts.iter().enumerate() {
        prefix[k + 1] = prefix[k] + n as f64;
    }
    // 0-based bins lo..=hi
    let range_sum = |lo: usize, hi: usize| prefix[hi + 1] - prefix[lo];
    let window: Vec<f64> = (0..m).map(|i| range_sum(i, i + g - 1)).collect();
    if let Some(i) = window.iter().position(|&s| s <= 0.0) {
        return Err(LimitLawError::SingularWindow { window: i + 1 });
    }
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        entries[(i, i)] = 1.0;
        for j in (i + 1)..m.min(i + g) {
            let rho = range_sum(j, i + g - 1) / (window[i] * window[j]).sqrt();
            entries[(i, j)] = rho;
            entries[(j, i)] = rho;
        }
    }
    let zero_count_bins = counts.iter().enumerate().filter(|(_, &n)| n == 0).map(|(k, _)| k + 1).collect();
    Ok(CorrelationMatrix { g, counts: counts.to_vec(), entries, zero_count_bins })
}

fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LimitLawError> {
    if let Some(c) = a.clone().cholesky() {
        return Ok(c.l());
    }
    let n = a.nrows();
    let scale = a.trace() / n as f64;
    let mut jitter = 1e-12;
    while jitter <= 1e-8 * (1.0 + 1e-9) {
        let shifted = a + DMatrix::identity(n, n) * (jitter * scale);
        if let Some(c) = shifted.cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(LimitLawError::NotPositiveDefinite { jitter: 1e-8 * scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchKind {
    MleGaussian,
    Chi2Vector,
}

/// `count` draws of a `dim`-dimensional vector, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSampleBatch {
    pub kind: BatchKind,
    pub dim: usize,
    pub count: usize,
    pub draws: Vec<f64>,
    pub seed: u64,
    pub generator: String,
}

impl LimitSampleBatch {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// One draw per line, header `c1,…,c{dim}`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.dim).map(|j| format!("c{j}")))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn standard_normals<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Run `per_draw` over `count` draws split into chunks, one stream each.
fn chunked<F>(count: usize, dim: usize, seed: u64, domain: Domain, per_draw: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut [f64]) + Sync,
{
    let parts: Vec<Vec<f64>> = rng::chunks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, _, len)| {
            let mut r = rng::stream(seed, domain, chunk);
            let mut out = vec![0.0; len * dim];
            for row in out.chunks_exact_mut(dim) {
                per_draw(&mut r, row);
            }
            out
        })
        .collect();
    parts.concat()
}

/// Draws from the correlated chi-squared law with `r` degrees of freedom
/// per component and Gaussian correlation `R`.
pub fn sample_chi2_limit(
    corr: &CorrelationMatrix,
    r: usize,
    count: usize,
    seed: u64,
) -> Result<LimitSampleBatch, LimitLawError> {
    if r == 0 {
        return Err(LimitLawError::InvalidArgument("r must be at least 1".into()));
    }
    let l = corr.cholesky()?;
    let m = corr.m();
    let draws = chunked(count, m, seed, Domain::Chi2Limit, |rng, row| {
        row.fill(0.0);
        for _ in 0..r {
            let y = &l * standard_normals(rng, m);
            for (acc, v) in row.iter_mut().zip(y.iter()) {
                *acc += v * v;
            }
        }
    });
    Ok(LimitSampleBatch { kind: BatchKind::Chi2Vector, dim: m, count, draws, seed, generator: GENERATOR_ID.into() })
}

/// `H = [[0, 0], [0, G₃⁻¹]]` where `G₃` is the lower-right `(d−r)×(d−r)`
/// block of `info`; the first `r` coordinates are the constrained ones.
pub fn free_block_inverse(info: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>, LimitLawError> {
    let d = info.nrows();
    if info.ncols() != d || r == 0 || r > d {
        return Err(LimitLawError::InvalidArgument(format!("need a square information matrix and 1 <= r <= d, got d = {d}, r = {r}")));
    }
    let mut h = DMatrix::zeros(d, d);
    if r < d {
        let g3 = info.view((r, r), (d - r, d - r)).into_owned();
        let inv = g3.try_inverse().ok_or(LimitLawError::SingularFreeBlock)?;
        h.view_mut((r, r), (d - r, d - r)).copy_from(&inv);
    }
    Ok(h)
}

/// The quadratic-form kernel `(Id − I₀H)ᵀ I₀⁻¹ (Id − I₀H)`.
pub fn oracle_kernel(info: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>, LimitLawError> {
    let d = info.nrows();
    let h = free_block_inverse(info, r)?;
    let inv = info
        .clone()
        .try_inverse()
        .ok_or_else(|| LimitLawError::InvalidArgument("information matrix is singular".into()))?;
    let a = DMatrix::identity(d, d) - info * &h;
    Ok(a.transpose() * inv * a)
}

/// Same law as [`sample_chi2_limit`], through Gaussian score vectors with
/// covariance blocks `ρ(i, j)·I₀` and the quadratic-form kernel.
pub fn sample_chi2_limit_oracle(
    corr: &CorrelationMatrix,
    info: &DMatrix<f64>,
    r: usize,
    count: usize,
    seed: u64,
) -> Result<LimitSampleBatch, LimitLawError> {
    let d = info.nrows();
    let kernel = oracle_kernel(info, r)?;
    let l_info = cholesky_with_jitter(info)?;
    let l_corr = corr.cholesky()?;
    let m = corr.m();
    let draws = chunked(count, m, seed, Domain::Chi2Oracle, |rng, row| {
        // columns of Z are independent N(0, Id_d); G = L_I · Z · L_Rᵀ
        let z = DMatrix::from_iterator(d, m, (0..d * m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let g = &l_info * z * l_corr.transpose();
        for (i, out) in row.iter_mut().enumerate() {
            let gi = g.column(i);
            *out = (gi.transpose() * &kernel * gi)[(0, 0)];
        }
    });
    Ok(LimitSampleBatch { kind: BatchKind::Chi2Vector, dim: m, count, draws, seed, generator: GENERATOR_ID.into() })
}

/// `dM`-dimensional Gaussian draws with covariance blocks `ρ(i, j)·I₀⁻¹`.
/// Row layout: block `i` occupies columns `i·d .. (i+1)·d`.
pub fn sample_mle_limit(
    corr: &CorrelationMatrix,
    info_inverse: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<LimitSampleBatch, LimitLawError> {
    let d = info_inverse.nrows();
    if d == 0 || info_inverse.ncols() != d {
        return Err(LimitLawError::InvalidArgument("inverse information must be square".into()));
    }
    let l_inv = cholesky_with_jitter(info_inverse)?;
    let l_corr = corr.cholesky()?;
    let m = corr.m();
    let draws = chunked(count, d * m, seed, Domain::MleLimit, |rng, row| {
        let z = DMatrix::from_iterator(d, m, (0..d * m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let g = &l_inv * z * l_corr.transpose();
        // column-major storage of a d×M matrix is exactly block-by-block
        row.copy_from_slice(g.as_slice());
    });
    Ok(LimitSampleBatch { kind: BatchKind::MleGaussian, dim: d * m, count, draws, seed, generator: GENERATOR_ID.into() })
}

/// A fixed chi-squared batch on which rejection probabilities can be
/// evaluated at many thresholds with common random numbers.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    batch: LimitSampleBatch,
    g: usize,
}

impl RejectionSampler {
    pub fn new(corr: &CorrelationMatrix, r: usize, count: usize, seed: u64) -> Result<Self, LimitLawError> {
        if count == 0 {
            return Err(LimitLawError::InvalidArgument("count must be positive".into()));
        }
        Ok(Self { batch: sample_chi2_limit(corr, r, count, seed)?, g: corr.g() })
    }

    pub fn batch(&self) -> &LimitSampleBatch {
        &self.batch
    }

    /// Fraction of draws with `k` components above `c` at pairwise index
    /// spacing at least `G`.
    pub fn probability(&self, c: f64, k: usize) -> McEstimate {
        let hits = self
            .batch
            .rows()
            .filter(|row| spaced_witness(row.len(), k, self.g, |i| row[i] > c).is_some())
            .count();
        McEstimate::from_hits(hits, self.batch.count)
    }
}

/// Monte Carlo probability of the spaced rejection event under the
/// correlated chi-squared law.
pub fn rejection_probability(
    corr: &CorrelationMatrix,
    r: usize,
    c: f64,
    k: usize,
    count: usize,
    seed: u64,
) -> Result<McEstimate, LimitLawError> {
    if c.is_nan() || c < 0.0 {
        return Err(LimitLawError::InvalidArgument(format!("threshold must be >= 0, got {c}")));
    }
    if k == 0 || k > corr.m() {
        return Err(LimitLawError::InvalidArgument(format!("need 1 <= k <= M = {}, got {k}", corr.m())));
    }
    Ok(RejectionSampler::new(corr, r, count, seed)?.probability(c, k))
}
