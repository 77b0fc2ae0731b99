//! Numeric cross-check for the closed-form limit beliefs.
//!
//! The oracle minimizes the KL divergence directly over the constraint's
//! support: free fundamentals enter unconstrained, a free covariance is
//! parameterized through its Cholesky factor with a log-scaled (hence
//! strictly positive) diagonal. Multi-start BFGS guards against bad basins;
//! starts run independently and the best objective wins deterministically.
//!
//! The same machinery doubles as the constrained maximum-likelihood solver:
//! replacing the true scatter and mean with their sample analogues turns the
//! population objective into the (negated, affinely shifted) average
//! log-likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{Fundamentals, LinearGaussianModel};
use crate::linalg;
use crate::optimize;
use crate::rng::stream_rng;

use super::{solve, DogmaticConstraint, LimitBelief};

/// Multi-start settings for the KL oracle.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Total starts: the closed-form seed plus `starts − 1` random ones.
    pub starts: usize,
    pub seed: u64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { starts: 5, seed: 0, gradient_tolerance: 1e-8, max_iterations: 400 }
    }
}

/// Objective over the free parameters of a dogmatic constraint.
///
/// Evaluates `tr(Σ̂⁻¹S) + (Mf̂ − μ)ᵀΣ̂⁻¹(Mf̂ − μ) + log det Σ̂` where `(μ, S)`
/// are either the population moments (KL, up to an affine shift) or sample
/// moments (negative average log-likelihood, up to an affine shift).
pub struct ConstraintObjective {
    design: DMatrix<f64>,
    target_mean: DVector<f64>,
    scatter_chol_l: DMatrix<f64>,
    scatter: DMatrix<f64>,
    free_fundamentals: Vec<usize>,
    base_fundamentals: DVector<f64>,
    fixed_covariance: Option<DMatrix<f64>>,
    fixed_chol: Option<Cholesky<f64, Dyn>>,
    fixed_terms: f64, // trace + logdet for a fixed covariance
    d: usize,
    /// Affine shift turning the raw objective into a KL divergence; `None`
    /// for sample objectives where no such interpretation applies.
    kl_shift: Option<f64>,
}

impl ConstraintObjective {
    /// Population objective: minimizing it solves the learner's limit
    /// problem for `constraint` under `(model, true_f)`.
    pub fn population(
        model: &LinearGaussianModel,
        true_f: &Fundamentals,
        constraint: &DogmaticConstraint,
    ) -> Result<Self> {
        let mean = model.mean(true_f)?;
        let scatter = model.covariance().clone();
        let mut obj = Self::with_moments(model, constraint, mean, scatter)?;
        let scatter_chol = linalg::cholesky(model.covariance(), "true covariance")?;
        // KL = ½ (objective − D − log det Σ)
        obj.kl_shift = Some(model.signal_dim() as f64 + linalg::log_det(&scatter_chol));
        Ok(obj)
    }

    /// Sample objective built from a batch mean and scatter.
    pub fn sample(
        model: &LinearGaussianModel,
        constraint: &DogmaticConstraint,
        sample_mean: DVector<f64>,
        sample_scatter: DMatrix<f64>,
    ) -> Result<Self> {
        Self::with_moments(model, constraint, sample_mean, sample_scatter)
    }

    fn with_moments(
        model: &LinearGaussianModel,
        constraint: &DogmaticConstraint,
        target_mean: DVector<f64>,
        scatter: DMatrix<f64>,
    ) -> Result<Self> {
        constraint.validate(model)?;
        let d = model.signal_dim();
        let l = model.fundamental_dim();
        if target_mean.len() != d || scatter.nrows() != d || scatter.ncols() != d {
            return Err(Error::DimensionMismatch("moments do not match the model".into()));
        }
        let scatter_chol = linalg::cholesky(&scatter, "scatter")?;

        let (free_fundamentals, base_fundamentals, fixed_covariance) = match constraint {
            DogmaticConstraint::FixedCovariance { index, value, covariance } => {
                let mut base = DVector::zeros(l);
                base[*index] = *value;
                let free = (0..l).filter(|j| j != index).collect();
                (free, base, Some(covariance.clone()))
            }
            DogmaticConstraint::PinnedFundamentals { values } => {
                (Vec::new(), values.as_vector().clone(), None)
            }
            DogmaticConstraint::Agnostic { index, value } => {
                let mut base = DVector::zeros(l);
                base[*index] = *value;
                let free = (0..l).filter(|j| j != index).collect();
                (free, base, None)
            }
        };

        let (fixed_chol, fixed_terms) = match &fixed_covariance {
            Some(cov) => {
                let chol = linalg::cholesky(cov, "fixed covariance")?;
                let terms = chol.solve(&scatter).trace() + linalg::log_det(&chol);
                (Some(chol), terms)
            }
            None => (None, 0.0),
        };

        Ok(Self {
            design: model.design().clone(),
            target_mean,
            scatter_chol_l: scatter_chol.l(),
            scatter,
            free_fundamentals,
            base_fundamentals,
            fixed_covariance,
            fixed_chol,
            fixed_terms,
            d,
            kl_shift: None,
        })
    }

    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        let cov_params = if self.fixed_covariance.is_none() {
            self.d * (self.d + 1) / 2
        } else {
            0
        };
        self.free_fundamentals.len() + cov_params
    }

    fn decode_fundamentals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut f = self.base_fundamentals.clone();
        for (k, &j) in self.free_fundamentals.iter().enumerate() {
            f[j] = x[k];
        }
        f
    }

    /// Lower-triangular Cholesky factor of `Σ̂` encoded in the parameter
    /// tail: diagonal stored in logs, strictly below-diagonal entries raw.
    fn decode_factor(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let nf = self.free_fundamentals.len();
        let mut r = DMatrix::zeros(self.d, self.d);
        let mut k = nf;
        for row in 0..self.d {
            for col in 0..=row {
                r[(row, col)] = if row == col { x[k].exp() } else { x[k] };
                k += 1;
            }
        }
        r
    }

    /// Raw objective value at the parameter vector.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let f = self.decode_fundamentals(x);
        let y = &self.design * &f - &self.target_mean;
        match &self.fixed_chol {
            Some(chol) => {
                // trace and logdet are constant; only the quadratic moves
                self.fixed_terms + y.dot(&chol.solve(&y))
            }
            None => {
                let r = self.decode_factor(x);
                let Some(v) = r.solve_lower_triangular(&self.scatter_chol_l) else {
                    return f64::INFINITY;
                };
                let Some(w) = r.solve_lower_triangular(&y) else {
                    return f64::INFINITY;
                };
                let trace = v.norm_squared();
                let quad = w.norm_squared();
                let log_det = 2.0 * (0..self.d).map(|i| r[(i, i)].ln()).sum::<f64>();
                trace + quad + log_det
            }
        }
    }

    /// KL divergence at the parameter vector (population objectives only).
    pub fn kl_value(&self, x: &DVector<f64>) -> f64 {
        let shift = self.kl_shift.expect("kl_value requires a population objective");
        0.5 * (self.eval(x) - shift)
    }

    /// Parameter vector representing a belief point.
    pub fn encode(&self, belief: &LimitBelief) -> Result<DVector<f64>> {
        let mut x = DVector::zeros(self.dim());
        for (k, &j) in self.free_fundamentals.iter().enumerate() {
            x[k] = belief.fundamentals[j];
        }
        if self.fixed_covariance.is_none() {
            let chol = linalg::cholesky(&belief.covariance, "belief covariance")?;
            let l = chol.l();
            let mut k = self.free_fundamentals.len();
            for row in 0..self.d {
                for col in 0..=row {
                    x[k] = if row == col { l[(row, col)].ln() } else { l[(row, col)] };
                    k += 1;
                }
            }
        }
        Ok(x)
    }

    /// Belief point represented by a parameter vector.
    pub fn decode(&self, x: &DVector<f64>) -> LimitBelief {
        let fundamentals =
            Fundamentals::new(self.decode_fundamentals(x)).expect("finite parameters");
        let covariance = match &self.fixed_covariance {
            Some(cov) => cov.clone(),
            None => {
                let r = self.decode_factor(x);
                linalg::symmetrize(&(&r * r.transpose()))
            }
        };
        LimitBelief { fundamentals, covariance }
    }

    /// Neutral fallback seed: pinned values, zeros elsewhere, the scatter
    /// as covariance.
    fn neutral_seed(&self) -> DVector<f64> {
        let belief = LimitBelief {
            fundamentals: Fundamentals::new(self.base_fundamentals.clone()).expect("finite"),
            covariance: self.scatter.clone(),
        };
        self.encode(&belief).expect("scatter is PD")
    }

    /// Random start: seed jittered by Gaussian noise.
    fn random_start(&self, base: &DVector<f64>, seed: u64, stream: u64) -> DVector<f64> {
        let mut rng = stream_rng(seed, stream);
        let nf = self.free_fundamentals.len();
        let mut x = base.clone();
        for k in 0..x.len() {
            let scale = if k < nf { 1.0 } else { 0.4 };
            let noise: f64 = rng.sample(StandardNormal);
            x[k] += scale * noise;
        }
        x
    }
}

/// Minimizes a constraint objective from multiple starts.
///
/// Returns the best point over all starts together with its raw objective
/// value, or `NonConvergence` when no start reaches the gradient tolerance.
pub fn minimize_multistart(
    objective: &ConstraintObjective,
    seed_point: DVector<f64>,
    config: &OracleConfig,
) -> Result<(LimitBelief, f64)> {
    let options = optimize::Options {
        gradient_tolerance: config.gradient_tolerance,
        max_iterations: config.max_iterations,
    };
    let starts: Vec<DVector<f64>> = std::iter::once(seed_point.clone())
        .chain(
            (1..config.starts.max(1))
                .map(|s| objective.random_start(&seed_point, config.seed, s as u64)),
        )
        .collect();

    let outcomes: Vec<optimize::Outcome> = starts
        .par_iter()
        .map(|x0| optimize::minimize(&|x: &DVector<f64>| objective.eval(x), x0, &options))
        .collect();

    if !outcomes.iter().any(|o| o.converged) {
        let best_grad =
            outcomes.iter().map(|o| o.gradient_norm).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence(format!(
            "no start reached gradient tolerance {:.1e} within {} iterations \
             (best gradient norm {best_grad:.3e})",
            config.gradient_tolerance, config.max_iterations
        )));
    }

    // Lowest objective wins; ties resolve to the earliest start.
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal).then(ia.cmp(ib))
        })
        .map(|(_, o)| o)
        .expect("at least one start");

    Ok((objective.decode(&best.point), best.value))
}

/// Directly minimizes the KL divergence over the constraint's support.
///
/// Start 0 is the closed-form solution (or a neutral point if the closed
/// form is unavailable); the rest are seeded random jitters of it.
pub fn numeric_oracle(
    model: &LinearGaussianModel,
    true_f: &Fundamentals,
    constraint: &DogmaticConstraint,
    config: &OracleConfig,
) -> Result<LimitBelief> {
    let objective = ConstraintObjective::population(model, true_f, constraint)?;
    let seed_point = match solve(model, true_f, constraint) {
        Ok(belief) => objective.encode(&belief)?,
        Err(_) => objective.neutral_seed(),
    };
    let (belief, _) = minimize_multistart(&objective, seed_point, config)?;
    Ok(belief)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{solve_agnostic, solve_fixed_covariance, solve_pinned_fundamentals};

    fn small_model() -> (LinearGaussianModel, Fundamentals) {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 0.0, 1.0, 0.5, -0.4]);
        let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.2, 0.9, 0.0, -0.1, 0.3, 1.1]);
        let cov = &l * l.transpose();
        let model = LinearGaussianModel::new(design, cov).unwrap();
        let f = Fundamentals::from_slice(&[0.7, -1.2]).unwrap();
        (model, f)
    }

    #[test]
    fn oracle_agrees_with_fixed_covariance_closed_form() {
        let (model, f) = small_model();
        let cov = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2]);
        let constraint =
            DogmaticConstraint::FixedCovariance { index: 0, value: 1.5, covariance: cov };
        let closed = solve_fixed_covariance(&model, &f, &constraint).unwrap();
        let oracle = numeric_oracle(&model, &f, &constraint, &OracleConfig::default()).unwrap();
        for j in 0..2 {
            let rel = (closed.fundamentals[j] - oracle.fundamentals[j]).abs()
                / (1.0 + closed.fundamentals[j].abs());
            assert!(rel < 1e-6, "coordinate {j}: {rel:.2e}");
        }
    }

    #[test]
    fn oracle_recovers_truth_when_pin_matches() {
        let (model, f) = small_model();
        let constraint = DogmaticConstraint::PinnedFundamentals { values: f.clone() };
        let oracle = numeric_oracle(&model, &f, &constraint, &OracleConfig::default()).unwrap();
        let gap = (&oracle.covariance - model.covariance()).amax();
        assert!(gap < 1e-6, "covariance gap {gap:.2e}");
    }

    #[test]
    fn oracle_agrees_with_rank_one_inflation() {
        let (model, f) = small_model();
        let pinned = Fundamentals::from_slice(&[1.2, -0.9]).unwrap();
        let constraint = DogmaticConstraint::PinnedFundamentals { values: pinned };
        let closed = solve_pinned_fundamentals(&model, &f, &constraint).unwrap();
        let oracle = numeric_oracle(&model, &f, &constraint, &OracleConfig::default()).unwrap();
        let gap = (&oracle.covariance - &closed.covariance).norm() / closed.covariance.norm();
        assert!(gap < 1e-5, "relative Frobenius gap {gap:.2e}");
    }

    #[test]
    fn oracle_agrees_with_agnostic_closed_form() {
        let (model, f) = small_model();
        let constraint = DogmaticConstraint::Agnostic { index: 1, value: 0.3 };
        let closed = solve_agnostic(&model, &f, &constraint).unwrap();
        let oracle = numeric_oracle(&model, &f, &constraint, &OracleConfig::default()).unwrap();
        for j in 0..2 {
            let rel = (closed.fundamentals[j] - oracle.fundamentals[j]).abs()
                / (1.0 + closed.fundamentals[j].abs());
            assert!(rel < 1e-5);
        }
        let gap = (&oracle.covariance - &closed.covariance).norm()
            / (1.0 + closed.covariance.norm());
        assert!(gap < 1e-5);
    }

    #[test]
    fn first_order_optimality_at_closed_form() {
        let (model, f) = small_model();
        let constraint = DogmaticConstraint::Agnostic { index: 0, value: 2.0 };
        let closed = solve_agnostic(&model, &f, &constraint).unwrap();
        let objective = ConstraintObjective::population(&model, &f, &constraint).unwrap();
        let x = objective.encode(&closed).unwrap();
        let grad = optimize::numeric_gradient(&|p: &DVector<f64>| objective.eval(p), &x);
        let bound = 1e-6 * (1.0 + objective.eval(&x).abs());
        assert!(grad.norm() <= bound, "gradient norm {:.2e} > {bound:.2e}", grad.norm());
    }

    #[test]
    fn kl_value_is_nonnegative_and_zero_at_truth() {
        let (model, f) = small_model();
        let constraint = DogmaticConstraint::PinnedFundamentals { values: f.clone() };
        let objective = ConstraintObjective::population(&model, &f, &constraint).unwrap();
        let truth = LimitBelief { fundamentals: f.clone(), covariance: model.covariance().clone() };
        let x = objective.encode(&truth).unwrap();
        assert!(objective.kl_value(&x).abs() < 1e-10);
    }
}
