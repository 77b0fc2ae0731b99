//! Linear-Gaussian signal models.
//!
//! A model is the pair `(M, Σ)`: signals are drawn as `r = M f + ε` with
//! `ε ~ N(0, Σ)`, where `f` is the unknown vector of fundamentals. The module
//! provides reproducible sampling, the exact log-likelihood, and the closed
//! form for the Kullback-Leibler divergence between two models that share a
//! design matrix:
//!
//! ```text
//! KL = ½ ( tr(Σ̂⁻¹ Σ) + (M Δ)ᵀ Σ̂⁻¹ (M Δ) − D + log det Σ̂ − log det Σ )
//! ```
//!
//! with `Δ = f̂ − f`. This quantity is what a misspecified Bayesian learner
//! ends up minimizing, so everything downstream leans on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::stream_rng;

const LN_2PI: f64 = 1.8378770664093453;

/// Design matrix and error covariance of the signal process `r = M f + ε`.
///
/// Invariants, checked at construction: `D ≥ L`, `M` has full column rank,
/// `Σ` is symmetric positive definite, and both dimensions respect the
/// desk-scale cap.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    design: DMatrix<f64>,
    covariance: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(design: DMatrix<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let (d, l) = design.shape();
        linalg::check_dimension_cap(d, l)?;
        if d < l {
            return Err(Error::InvalidModel(format!(
                "design matrix must have at least as many rows as columns, got {d}x{l}"
            )));
        }
        if !linalg::all_finite_mat(&design) {
            return Err(Error::InvalidModel("design matrix has non-finite entries".into()));
        }
        let sv = design.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > linalg::RANK_TOL_FACTOR * smax) {
            return Err(Error::InvalidModel(format!(
                "design matrix is rank deficient (singular values {smin:.3e}..{smax:.3e})"
            )));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be {d}x{d}, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !linalg::all_finite_mat(&covariance) {
            return Err(Error::InvalidModel("covariance has non-finite entries".into()));
        }
        linalg::check_positive_definite(&covariance, "signal covariance")?;
        Ok(Self { design, covariance })
    }

    /// Signal dimension `D`.
    pub fn signal_dim(&self) -> usize {
        self.design.nrows()
    }

    /// Fundamental dimension `L`.
    pub fn fundamental_dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Signal mean `M f`.
    pub fn mean(&self, f: &Fundamentals) -> Result<DVector<f64>> {
        if f.len() != self.fundamental_dim() {
            return Err(Error::DimensionMismatch(format!(
                "fundamentals have length {}, model expects {}",
                f.len(),
                self.fundamental_dim()
            )));
        }
        Ok(&self.design * f.as_vector())
    }

    /// Same model with the covariance replaced (design and checks reused).
    pub fn with_covariance(&self, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(self.design.clone(), covariance)
    }

    /// SHA-256 digest of the model's canonical byte encoding.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.signal_dim() as u64).to_le_bytes());
        h.update((self.fundamental_dim() as u64).to_le_bytes());
        for x in self.design.iter() {
            h.update(x.to_le_bytes());
        }
        for x in self.covariance.iter() {
            h.update(x.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Vector of fundamentals (finite entries).
#[derive(Debug, Clone, PartialEq)]
pub struct Fundamentals(DVector<f64>);

impl Fundamentals {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if !linalg::all_finite_vec(&values) {
            return Err(Error::InvalidModel("fundamentals have non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Fundamentals {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A batch of sampled signal rows, tagged with the seed and the digest of
/// the model that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    rows: DMatrix<f64>,
    seed: u64,
    model_hash: [u8; 32],
}

impl SignalBatch {
    pub fn new(rows: DMatrix<f64>, seed: u64, model_hash: [u8; 32]) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::InvalidModel("signal batch must contain at least one row".into()));
        }
        if !linalg::all_finite_mat(&rows) {
            return Err(Error::InvalidModel("signal batch has non-finite entries".into()));
        }
        Ok(Self { rows, seed, model_hash })
    }

    /// Rows as a `T×D` matrix.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor enforces T ≥ 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_hash(&self) -> &[u8; 32] {
        &self.model_hash
    }

    /// The first `t` rows as a new batch.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot truncate a batch of {} rows to {t}",
                self.len()
            )));
        }
        Ok(Self {
            rows: self.rows.rows(0, t).into_owned(),
            seed: self.seed,
            model_hash: self.model_hash,
        })
    }
}

/// Draws `t` i.i.d. signal rows `r = M f + ε`, `ε ~ N(0, Σ)`.
///
/// Deterministic in `seed`: the same call produces a bit-identical batch.
pub fn sample_signals(
    model: &LinearGaussianModel,
    f: &Fundamentals,
    t: usize,
    seed: u64,
) -> Result<SignalBatch> {
    if t == 0 {
        return Err(Error::InvalidModel("sample count must be at least 1".into()));
    }
    let mean = model.mean(f)?;
    let chol = linalg::cholesky(model.covariance(), "signal covariance")?;
    let l = chol.l();
    let d = model.signal_dim();
    let mut rng = stream_rng(seed, 0);
    let mut rows = DMatrix::zeros(t, d);
    let mut z = DVector::zeros(d);
    for r in 0..t {
        for k in 0..d {
            z[k] = rng.sample(StandardNormal);
        }
        let noise = &l * &z;
        for k in 0..d {
            rows[(r, k)] = mean[k] + noise[k];
        }
    }
    SignalBatch::new(rows, seed, model.digest())
}

/// Sum over batch rows of the multivariate normal log-density of
/// `r − M f` under the model's covariance.
pub fn log_likelihood(
    model: &LinearGaussianModel,
    f: &Fundamentals,
    batch: &SignalBatch,
) -> Result<f64> {
    let d = model.signal_dim();
    if batch.rows().ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "batch rows have dimension {}, model expects {d}",
            batch.rows().ncols()
        )));
    }
    let mean = model.mean(f)?;
    let chol = linalg::cholesky(model.covariance(), "signal covariance")?;
    let log_det = linalg::log_det(&chol);
    let t = batch.len();

    // Residuals as columns: D×T, then one triangular solve for all rows.
    let mut resid = batch.rows().transpose();
    for c in 0..t {
        let mut col = resid.column_mut(c);
        col -= &mean;
    }
    let solved = chol.solve(&resid);
    let mut quad = 0.0;
    for c in 0..t {
        quad += resid.column(c).dot(&solved.column(c));
    }
    Ok(-0.5 * (t as f64) * (d as f64 * LN_2PI + log_det) - 0.5 * quad)
}

/// Closed-form KL divergence from `(f, Σ)` to `(f̂, Σ̂)` under a shared
/// design matrix.
pub fn kl_divergence(
    true_f: &Fundamentals,
    true_model: &LinearGaussianModel,
    cand_f: &Fundamentals,
    cand_model: &LinearGaussianModel,
) -> Result<f64> {
    let d = true_model.signal_dim();
    if cand_model.signal_dim() != d
        || cand_model.fundamental_dim() != true_model.fundamental_dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "models have shapes {}x{} and {}x{}",
            d,
            true_model.fundamental_dim(),
            cand_model.signal_dim(),
            cand_model.fundamental_dim()
        )));
    }
    let design_gap = (true_model.design() - cand_model.design()).amax();
    if design_gap > 1e-12 * true_model.design().amax().max(1.0) {
        return Err(Error::InvalidModel(
            "KL divergence requires both models to share the design matrix".into(),
        ));
    }
    if true_f.len() != true_model.fundamental_dim() || cand_f.len() != true_f.len() {
        return Err(Error::DimensionMismatch(
            "fundamentals length does not match the models".into(),
        ));
    }
    let delta = cand_f.as_vector() - true_f.as_vector();
    let y = true_model.design() * delta;
    let cand_chol = linalg::cholesky(cand_model.covariance(), "candidate covariance")?;
    let true_chol = linalg::cholesky(true_model.covariance(), "true covariance")?;

    let trace = cand_chol.solve(true_model.covariance()).trace();
    let quad = y.dot(&cand_chol.solve(&y));
    let log_det_ratio = linalg::log_det(&cand_chol) - linalg::log_det(&true_chol);
    Ok(0.5 * (trace + quad - d as f64 + log_det_ratio))
}
