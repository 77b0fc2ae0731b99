//! Societies of individuals, groups, and an overconfident agent.
//!
//! A society has `I` individuals with true calibers `A_j` and `K` groups
//! with true discrimination levels `Θ_k`. Individual `j` relates to group
//! `k` through `c_jk ∈ {−1, 0, 1}` (competitor / neutral / member). On each
//! occasion the agent observes every individual's recognition
//! `q_j = a_j + Σ_k c_jk θ_k + ε_j` and a noisy signal `η_k = θ_k + ε_k` of
//! each discrimination level.
//!
//! The focal agent is overconfident: he is certain his own caliber is
//! `ã_i > A_i`. Stacking recognitions and signals turns the society into a
//! linear-Gaussian model with block design `M = [[I, C], [0, I]]`, so the
//! agent's long-run beliefs follow from the limit solver, and in fact have
//! closed forms: with `Δ_i = ã_i − A_i` and denominator
//! `v^q_i + Σ_k c_ik² v^η_k`,
//!
//! ```text
//! discrimination bias toward k:  −c_ik v^η_k / denom · Δ_i
//! caliber bias about j ≠ i:      Σ_k c_ik c_jk v^η_k / denom · Δ_i
//! ```
//!
//! Both routes are implemented — [`biases_closed_form`] evaluates the
//! formulas, [`biases_via_limit`] goes through the generic solver — and the
//! test suites hold them to agreement.

pub mod checks;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{Fundamentals, LinearGaussianModel};
use crate::limit::{solve_agnostic, DogmaticConstraint};

/// Caliber biases at or below this magnitude classify as unbiased; exact
/// zeros arise structurally for neutral agents.
pub const CLASSIFICATION_TOL: f64 = 1e-12;

/// A society plus a focal overconfident agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    memberships: DMatrix<i32>,
    calibers: DVector<f64>,
    discrimination: DVector<f64>,
    recognition_variances: DVector<f64>,
    signal_variances: DVector<f64>,
    agent: usize,
    believed_caliber: f64,
}

impl Scenario {
    /// Builds and validates a scenario.
    ///
    /// `memberships` is `I×K` over `{−1, 0, 1}`; variances must be strictly
    /// positive; `agent` is a 0-based individual index.
    pub fn new(
        memberships: DMatrix<i32>,
        calibers: DVector<f64>,
        discrimination: DVector<f64>,
        recognition_variances: DVector<f64>,
        signal_variances: DVector<f64>,
        agent: usize,
        believed_caliber: f64,
    ) -> Result<Self> {
        let (i_count, k_count) = memberships.shape();
        if i_count == 0 {
            return Err(Error::InvalidScenario("society needs at least one individual".into()));
        }
        if memberships.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(Error::InvalidScenario(
                "group relationships must lie in {-1, 0, 1}".into(),
            ));
        }
        if calibers.len() != i_count {
            return Err(Error::InvalidScenario(format!(
                "expected {i_count} calibers, got {}",
                calibers.len()
            )));
        }
        if discrimination.len() != k_count {
            return Err(Error::InvalidScenario(format!(
                "expected {k_count} discrimination levels, got {}",
                discrimination.len()
            )));
        }
        if recognition_variances.len() != i_count
            || recognition_variances.iter().any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidScenario(
                "recognition variances must be strictly positive, one per individual".into(),
            ));
        }
        if signal_variances.len() != k_count
            || signal_variances.iter().any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidScenario(
                "signal variances must be strictly positive, one per group".into(),
            ));
        }
        if calibers.iter().chain(discrimination.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidScenario(
                "calibers and discrimination levels must be finite".into(),
            ));
        }
        if agent >= i_count {
            return Err(Error::InvalidScenario(format!(
                "agent index {agent} out of range for {i_count} individuals"
            )));
        }
        if !believed_caliber.is_finite() {
            return Err(Error::InvalidScenario("believed caliber must be finite".into()));
        }
        Ok(Self {
            memberships,
            calibers,
            discrimination,
            recognition_variances,
            signal_variances,
            agent,
            believed_caliber,
        })
    }

    pub fn individuals(&self) -> usize {
        self.memberships.nrows()
    }

    pub fn groups(&self) -> usize {
        self.memberships.ncols()
    }

    pub fn memberships(&self) -> &DMatrix<i32> {
        &self.memberships
    }

    /// Relationship `c_jk` of individual `j` to group `k`.
    pub fn membership(&self, j: usize, k: usize) -> i32 {
        self.memberships[(j, k)]
    }

    pub fn calibers(&self) -> &DVector<f64> {
        &self.calibers
    }

    pub fn discrimination(&self) -> &DVector<f64> {
        &self.discrimination
    }

    pub fn recognition_variances(&self) -> &DVector<f64> {
        &self.recognition_variances
    }

    pub fn signal_variances(&self) -> &DVector<f64> {
        &self.signal_variances
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn believed_caliber(&self) -> f64 {
        self.believed_caliber
    }

    /// Overconfidence `Δ_i = ã_i − A_i`.
    pub fn overconfidence(&self) -> f64 {
        self.believed_caliber - self.calibers[self.agent]
    }

    /// Same society viewed by a different agent.
    pub fn with_agent(&self, agent: usize, believed_caliber: f64) -> Result<Self> {
        Self::new(
            self.memberships.clone(),
            self.calibers.clone(),
            self.discrimination.clone(),
            self.recognition_variances.clone(),
            self.signal_variances.clone(),
            agent,
            believed_caliber,
        )
    }

    /// Same scenario with one signal variance replaced.
    pub fn with_signal_variance(&self, group: usize, variance: f64) -> Result<Self> {
        if group >= self.groups() {
            return Err(Error::InvalidScenario(format!(
                "group index {group} out of range for {} groups",
                self.groups()
            )));
        }
        let mut signal_variances = self.signal_variances.clone();
        signal_variances[group] = variance;
        Self::new(
            self.memberships.clone(),
            self.calibers.clone(),
            self.discrimination.clone(),
            self.recognition_variances.clone(),
            signal_variances,
            self.agent,
            self.believed_caliber,
        )
    }
}

/// Adds a group with the given membership column, signal variance
/// `v_eta_new`, and zero true discrimination.
pub fn add_group(scenario: &Scenario, memberships: &[i32], v_eta_new: f64) -> Result<Scenario> {
    let i_count = scenario.individuals();
    if memberships.len() != i_count {
        return Err(Error::InvalidScenario(format!(
            "membership column must have length {i_count}, got {}",
            memberships.len()
        )));
    }
    let k = scenario.groups();
    let mut c = DMatrix::zeros(i_count, k + 1);
    c.view_mut((0, 0), (i_count, k)).copy_from(scenario.memberships());
    for (j, &m) in memberships.iter().enumerate() {
        c[(j, k)] = m;
    }
    let mut theta = DVector::zeros(k + 1);
    theta.rows_mut(0, k).copy_from(scenario.discrimination());
    let mut v_eta = DVector::zeros(k + 1);
    v_eta.rows_mut(0, k).copy_from(scenario.signal_variances());
    v_eta[k] = v_eta_new;
    Scenario::new(
        c,
        scenario.calibers().clone(),
        theta,
        scenario.recognition_variances().clone(),
        v_eta,
        scenario.agent(),
        scenario.believed_caliber(),
    )
}

/// Stacks the society's observations into a linear-Gaussian model.
///
/// Signals order recognitions before discrimination signals, so the design
/// is the unit-determinant block matrix `[[I, C], [0, I]]`, the covariance
/// is `diag(v^q, v^η)`, the fundamentals are `(A, Θ)`, and the agent's
/// overconfidence pins fundamental `agent` with everything else free.
pub fn build_model(
    scenario: &Scenario,
) -> Result<(LinearGaussianModel, Fundamentals, DogmaticConstraint)> {
    let i_count = scenario.individuals();
    let k_count = scenario.groups();
    let d = i_count + k_count;

    let mut design = DMatrix::zeros(d, d);
    for j in 0..i_count {
        design[(j, j)] = 1.0;
        for k in 0..k_count {
            design[(j, i_count + k)] = f64::from(scenario.membership(j, k));
        }
    }
    for k in 0..k_count {
        design[(i_count + k, i_count + k)] = 1.0;
    }

    let mut variances = DVector::zeros(d);
    variances.rows_mut(0, i_count).copy_from(scenario.recognition_variances());
    variances.rows_mut(i_count, k_count).copy_from(scenario.signal_variances());
    let covariance = DMatrix::from_diagonal(&variances);

    let model = LinearGaussianModel::new(design, covariance)
        .map_err(|e| Error::InvalidScenario(e.to_string()))?;

    let mut f = DVector::zeros(d);
    f.rows_mut(0, i_count).copy_from(scenario.calibers());
    f.rows_mut(i_count, k_count).copy_from(scenario.discrimination());

    let constraint = DogmaticConstraint::Agnostic {
        index: scenario.agent(),
        value: scenario.believed_caliber(),
    };
    Ok((model, Fundamentals::new(f)?, constraint))
}

/// Direction of an agent's long-run caliber misjudgment of an individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasClass {
    /// Overestimation: in-group favoritism.
    Favoritism,
    /// Underestimation: out-group derogation.
    Derogation,
    /// Bias within [`CLASSIFICATION_TOL`] of zero.
    Unbiased,
}

impl BiasClass {
    fn of(bias: f64) -> Self {
        if bias.abs() <= CLASSIFICATION_TOL {
            Self::Unbiased
        } else if bias > 0.0 {
            Self::Favoritism
        } else {
            Self::Derogation
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Favoritism => "in-group-favoritism",
            Self::Derogation => "out-group-derogation",
            Self::Unbiased => "unbiased",
        }
    }
}

/// The agent's long-run biases about a society.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    /// `θ̃_k − Θ_k` per group.
    pub theta_bias: DVector<f64>,
    /// `ã_j − A_j` per individual; entry `agent` equals `Δ_i` exactly.
    pub caliber_bias: DVector<f64>,
    /// `Σ̃ − Σ` over the stacked signal space.
    pub sigma_bias: DMatrix<f64>,
    /// Favoritism/derogation tag per individual.
    pub classifications: Vec<BiasClass>,
}

impl BiasReport {
    fn from_biases(
        caliber_bias: DVector<f64>,
        theta_bias: DVector<f64>,
        sigma_bias: DMatrix<f64>,
    ) -> Self {
        let classifications = caliber_bias.iter().map(|b| BiasClass::of(*b)).collect();
        Self { theta_bias, caliber_bias, sigma_bias, classifications }
    }

    /// Believed caliber levels `A_j + bias_j`.
    pub fn believed_calibers(&self, scenario: &Scenario) -> DVector<f64> {
        scenario.calibers() + &self.caliber_bias
    }

    /// Sum of absolute discrimination biases `Σ_k |θ̃_k − Θ_k|`.
    pub fn total_discrimination_bias(&self) -> f64 {
        self.theta_bias.iter().map(|b| b.abs()).sum()
    }

    /// Largest absolute difference across all three bias blocks.
    pub fn max_abs_difference(&self, other: &BiasReport) -> f64 {
        let a = (&self.theta_bias - &other.theta_bias).amax();
        let b = (&self.caliber_bias - &other.caliber_bias).amax();
        let c = (&self.sigma_bias - &other.sigma_bias).amax();
        a.max(b).max(c)
    }
}

/// Long-run biases evaluated from the closed-form expressions.
pub fn biases_closed_form(scenario: &Scenario) -> Result<BiasReport> {
    let i = scenario.agent();
    let delta = scenario.overconfidence();
    let i_count = scenario.individuals();
    let k_count = scenario.groups();
    let c = scenario.memberships();
    let v_eta = scenario.signal_variances();

    let mut denom = scenario.recognition_variances()[i];
    for k in 0..k_count {
        denom += f64::from(c[(i, k)] * c[(i, k)]) * v_eta[k];
    }

    let mut theta_bias = DVector::zeros(k_count);
    for k in 0..k_count {
        theta_bias[k] = -f64::from(c[(i, k)]) * v_eta[k] / denom * delta;
    }

    let mut caliber_bias = DVector::zeros(i_count);
    for j in 0..i_count {
        if j == i {
            caliber_bias[j] = delta;
            continue;
        }
        let shared: f64 =
            (0..k_count).map(|k| f64::from(c[(i, k)] * c[(j, k)]) * v_eta[k]).sum();
        caliber_bias[j] = shared / denom * delta;
    }

    // Covariance bias is the rank-one inflation at the implied bias vector.
    let (model, _, _) = build_model(scenario)?;
    let mut full_bias = DVector::zeros(i_count + k_count);
    full_bias.rows_mut(0, i_count).copy_from(&caliber_bias);
    full_bias.rows_mut(i_count, k_count).copy_from(&theta_bias);
    let y = model.design() * full_bias;
    let sigma_bias = &y * y.transpose();

    Ok(BiasReport::from_biases(caliber_bias, theta_bias, sigma_bias))
}

/// Long-run biases via the generic limit solver on the stacked model.
pub fn biases_via_limit(scenario: &Scenario) -> Result<BiasReport> {
    let (model, true_f, constraint) = build_model(scenario)?;
    let belief = solve_agnostic(&model, &true_f, &constraint)?;
    let i_count = scenario.individuals();
    let k_count = scenario.groups();
    let bias = belief.bias(&true_f);
    let caliber_bias = bias.rows(0, i_count).into_owned();
    let theta_bias = bias.rows(i_count, k_count).into_owned();
    let sigma_bias = &belief.covariance - model.covariance();
    Ok(BiasReport::from_biases(caliber_bias, theta_bias, sigma_bias))
}
