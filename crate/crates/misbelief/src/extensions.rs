//! Model variants beyond exogenous groups.
//!
//! Three extensions of the society model, each reducible to the generic
//! limit solver on a purpose-built linear-Gaussian model:
//!
//! * **Correlated recognitions, no groups** ([`correlated_biases`]): with
//!   `q_j = a_j + ε_j` and a general PD covariance `Σ^q`, the agent's bias
//!   about `j` is `Σ^q_{ij} / Σ^q_{ii} · Δ_i`. In-groups and out-groups
//!   emerge endogenously from the sign of the correlation.
//! * **Personal contact** ([`contact_biases`]): one group, everyone a member
//!   or competitor, and the agent additionally observes caliber signals
//!   `s_j = a_j + ε^a_j`. Closed forms exist when variances are common
//!   across individuals; heterogeneous variances go through the solver.
//! * **Richer observation structures** ([`out_group_observation_biases`],
//!   [`multi_attribute_biases`]): two fixed worked models — a four-person
//!   society whose out-group is observed at its own precisions, and a
//!   two-attribute society where a competitor's business success reweights
//!   talent against morality. Both are solved by the generic machinery on
//!   their hard-coded observation stacks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{Fundamentals, LinearGaussianModel};
use crate::limit::{solve_agnostic, DogmaticConstraint};
use crate::linalg;

/// Zero-covariance tolerance for endogenous group tags.
pub const NEUTRAL_TOL: f64 = 1e-12;

/// Society with no groups but correlated recognition errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedScenario {
    recognition_covariance: DMatrix<f64>,
    calibers: DVector<f64>,
    agent: usize,
    believed_caliber: f64,
}

impl CorrelatedScenario {
    pub fn new(
        recognition_covariance: DMatrix<f64>,
        calibers: DVector<f64>,
        agent: usize,
        believed_caliber: f64,
    ) -> Result<Self> {
        let i_count = recognition_covariance.nrows();
        linalg::check_positive_definite(&recognition_covariance, "recognition covariance")
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        if calibers.len() != i_count {
            return Err(Error::InvalidScenario(format!(
                "expected {i_count} calibers, got {}",
                calibers.len()
            )));
        }
        if agent >= i_count {
            return Err(Error::InvalidScenario(format!(
                "agent index {agent} out of range for {i_count} individuals"
            )));
        }
        if !believed_caliber.is_finite() || !linalg::all_finite_vec(&calibers) {
            return Err(Error::InvalidScenario("calibers must be finite".into()));
        }
        Ok(Self { recognition_covariance, calibers, agent, believed_caliber })
    }

    pub fn individuals(&self) -> usize {
        self.calibers.len()
    }

    pub fn recognition_covariance(&self) -> &DMatrix<f64> {
        &self.recognition_covariance
    }

    pub fn calibers(&self) -> &DVector<f64> {
        &self.calibers
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn overconfidence(&self) -> f64 {
        self.believed_caliber - self.calibers[self.agent]
    }

    /// The identity-design model whose limit beliefs are the scenario's.
    pub fn model(&self) -> Result<(LinearGaussianModel, Fundamentals, DogmaticConstraint)> {
        let i = self.individuals();
        let model = LinearGaussianModel::new(
            DMatrix::identity(i, i),
            self.recognition_covariance.clone(),
        )
        .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        let constraint =
            DogmaticConstraint::Agnostic { index: self.agent, value: self.believed_caliber };
        Ok((model, Fundamentals::new(self.calibers.clone())?, constraint))
    }
}

/// Endogenous relationship of an individual to the agent, from the sign of
/// their recognition-error covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupTag {
    InGroup,
    OutGroup,
    Neutral,
}

impl GroupTag {
    pub fn label(&self) -> &'static str {
        match self {
            Self::InGroup => "in-group",
            Self::OutGroup => "out-group",
            Self::Neutral => "neutral",
        }
    }
}

/// Output of [`correlated_biases`].
#[derive(Debug, Clone)]
pub struct CorrelatedBiases {
    /// `ã_j − A_j` per individual; entry `agent` equals `Δ_i`.
    pub caliber_bias: DVector<f64>,
    /// `Σ̃^q − Σ^q`: the outer product of the caliber biases.
    pub sigma_bias: DMatrix<f64>,
    /// Endogenous in-/out-group tags.
    pub group_tags: Vec<GroupTag>,
}

/// Long-run biases under correlated recognitions: the bias about `j` scales
/// with the covariance ratio `Σ^q_{ij} / Σ^q_{ii}`, and the covariance bias
/// is the rank-one outer product of the caliber biases.
pub fn correlated_biases(scenario: &CorrelatedScenario) -> Result<CorrelatedBiases> {
    let i = scenario.agent();
    let delta = scenario.overconfidence();
    let cov = scenario.recognition_covariance();
    let n = scenario.individuals();

    let mut caliber_bias = DVector::zeros(n);
    for j in 0..n {
        caliber_bias[j] =
            if j == i { delta } else { cov[(j, i)] / cov[(i, i)] * delta };
    }
    let sigma_bias = &caliber_bias * caliber_bias.transpose();
    let group_tags = (0..n)
        .map(|j| {
            let c = cov[(j, i)];
            if c.abs() <= NEUTRAL_TOL {
                GroupTag::Neutral
            } else if c > 0.0 {
                GroupTag::InGroup
            } else {
                GroupTag::OutGroup
            }
        })
        .collect();
    Ok(CorrelatedBiases { caliber_bias, sigma_bias, group_tags })
}

/// One-group society where the agent also receives caliber signals about
/// every individual, all with common variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactScenario {
    memberships: Vec<i32>,
    recognition_variance: f64,
    caliber_variance: f64,
    signal_variance: f64,
    calibers: DVector<f64>,
    discrimination: f64,
    agent: usize,
    believed_caliber: f64,
}

impl ContactScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        memberships: Vec<i32>,
        recognition_variance: f64,
        caliber_variance: f64,
        signal_variance: f64,
        calibers: DVector<f64>,
        discrimination: f64,
        agent: usize,
        believed_caliber: f64,
    ) -> Result<Self> {
        let i_count = memberships.len();
        if i_count == 0 {
            return Err(Error::InvalidScenario("need at least one individual".into()));
        }
        if memberships.iter().any(|c| *c != 1 && *c != -1) {
            return Err(Error::InvalidScenario(
                "contact memberships must be member (1) or competitor (-1)".into(),
            ));
        }
        for (name, v) in [
            ("recognition", recognition_variance),
            ("caliber", caliber_variance),
            ("signal", signal_variance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "{name} variance must be strictly positive"
                )));
            }
        }
        if calibers.len() != i_count {
            return Err(Error::InvalidScenario(format!(
                "expected {i_count} calibers, got {}",
                calibers.len()
            )));
        }
        if agent >= i_count {
            return Err(Error::InvalidScenario(format!(
                "agent index {agent} out of range for {i_count} individuals"
            )));
        }
        if !discrimination.is_finite()
            || !believed_caliber.is_finite()
            || !linalg::all_finite_vec(&calibers)
        {
            return Err(Error::InvalidScenario("parameters must be finite".into()));
        }
        Ok(Self {
            memberships,
            recognition_variance,
            caliber_variance,
            signal_variance,
            calibers,
            discrimination,
            agent,
            believed_caliber,
        })
    }

    pub fn individuals(&self) -> usize {
        self.memberships.len()
    }

    pub fn memberships(&self) -> &[i32] {
        &self.memberships
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn overconfidence(&self) -> f64 {
        self.believed_caliber - self.calibers[self.agent]
    }

    /// Stacked observation model: recognitions, the discrimination signal,
    /// then one caliber signal per individual.
    pub fn model(&self) -> Result<(LinearGaussianModel, Fundamentals, DogmaticConstraint)> {
        let i_count = self.individuals();
        let d = 2 * i_count + 1;
        let l = i_count + 1;
        let mut design = DMatrix::zeros(d, l);
        for j in 0..i_count {
            design[(j, j)] = 1.0;
            design[(j, i_count)] = f64::from(self.memberships[j]);
            design[(i_count + 1 + j, j)] = 1.0;
        }
        design[(i_count, i_count)] = 1.0;

        let mut variances = DVector::from_element(d, self.recognition_variance);
        variances[i_count] = self.signal_variance;
        for j in 0..i_count {
            variances[i_count + 1 + j] = self.caliber_variance;
        }
        let model =
            LinearGaussianModel::new(design, DMatrix::from_diagonal(&variances))
                .map_err(|e| Error::InvalidScenario(e.to_string()))?;

        let mut f = DVector::zeros(l);
        f.rows_mut(0, i_count).copy_from(&self.calibers);
        f[i_count] = self.discrimination;
        let constraint =
            DogmaticConstraint::Agnostic { index: self.agent, value: self.believed_caliber };
        Ok((model, Fundamentals::new(f)?, constraint))
    }
}

/// Output of [`contact_biases`].
#[derive(Debug, Clone)]
pub struct ContactBiases {
    /// `θ̃ − Θ` for the single group.
    pub theta_bias: f64,
    /// `ã_j − A_j` per individual; entry `agent` equals `Δ_i`.
    pub caliber_bias: DVector<f64>,
}

/// Closed-form biases under personal contact. With common variances and
/// denominator `(v^q + v^η)(v^q + v^a) + (I − 1) v^q v^η`:
///
/// ```text
/// θ̃ − Θ      = −v^η (v^q + v^a) c_i / denom · Δ_i
/// ã_j − A_j  =  v^η v^a c_i c_j  / denom · Δ_i      (j ≠ i)
/// ```
pub fn contact_biases(scenario: &ContactScenario) -> Result<ContactBiases> {
    let i = scenario.agent();
    let delta = scenario.overconfidence();
    let n = scenario.individuals() as f64;
    let v_q = scenario.recognition_variance;
    let v_a = scenario.caliber_variance;
    let v_eta = scenario.signal_variance;
    let c = &scenario.memberships;

    let denom = (v_q + v_eta) * (v_q + v_a) + (n - 1.0) * v_q * v_eta;
    let theta_bias = -v_eta * (v_q + v_a) * f64::from(c[i]) / denom * delta;
    let mut caliber_bias = DVector::zeros(scenario.individuals());
    for j in 0..scenario.individuals() {
        caliber_bias[j] = if j == i {
            delta
        } else {
            v_eta * v_a * f64::from(c[i] * c[j]) / denom * delta
        };
    }
    Ok(ContactBiases { theta_bias, caliber_bias })
}

/// `(CCᵀ)² = I · CCᵀ` for sign vectors `c ∈ {−1, 1}^I`, checked in exact
/// integer arithmetic.
pub fn sign_outer_square_identity(c: &[i32]) -> bool {
    let n = c.len();
    if c.iter().any(|x| *x != 1 && *x != -1) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            let mut square: i64 = 0;
            for k in 0..n {
                square += i64::from(c[i] * c[k]) * i64::from(c[k] * c[j]);
            }
            if square != n as i64 * i64::from(c[i] * c[j]) {
                return false;
            }
        }
    }
    true
}

/// Output of [`out_group_observation_biases`]: per-unit-overconfidence
/// ratios and the Δ-scaled biases.
#[derive(Debug, Clone)]
pub struct OutGroupObservationBiases {
    pub caliber_ratio_3: f64,
    pub caliber_ratio_4: f64,
    pub discrimination_ratio: f64,
    pub caliber_bias_3: f64,
    pub caliber_bias_4: f64,
    pub discrimination_bias: f64,
}

/// The fixed four-person model behind [`out_group_observation_biases`]:
/// individuals 1–2 are members, 3–4 competitors of the single group; the
/// out-group's recognitions carry variance `v_q_out` and its caliber
/// signals variance `v_a_out`, every other error has unit variance. Rows
/// stack the four recognitions, the discrimination signal, and the four
/// caliber signals. Agent 1's caliber is pinned `delta` above its true
/// value of zero.
pub fn out_group_observation_model(
    v_q_out: f64,
    v_a_out: f64,
    delta: f64,
) -> Result<(LinearGaussianModel, Fundamentals, DogmaticConstraint)> {
    if !(v_q_out > 0.0) || !(v_a_out > 0.0) || !v_q_out.is_finite() || !v_a_out.is_finite() {
        return Err(Error::InvalidScenario("variances must be strictly positive".into()));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidScenario("overconfidence must be finite".into()));
    }
    let memberships = [1.0, 1.0, -1.0, -1.0];
    let mut design = DMatrix::zeros(9, 5);
    for j in 0..4 {
        design[(j, j)] = 1.0;
        design[(j, 4)] = memberships[j];
        design[(5 + j, j)] = 1.0;
    }
    design[(4, 4)] = 1.0;
    let variances =
        DVector::from_vec(vec![1.0, 1.0, v_q_out, v_q_out, 1.0, 1.0, 1.0, v_a_out, v_a_out]);
    let model = LinearGaussianModel::new(design, DMatrix::from_diagonal(&variances))?;
    let true_f = Fundamentals::zeros(5);
    let constraint = DogmaticConstraint::Agnostic { index: 0, value: delta };
    Ok((model, true_f, constraint))
}

/// Biases in the four-person observed-out-group model, via the generic
/// solver on [`out_group_observation_model`]. The ratios close to
///
/// ```text
/// caliber ratio (3 and 4):  −2 v_a_out / (5 v_q_out + 5 v_a_out + 4)
/// discrimination ratio:     −2 (v_q_out + v_a_out) / (5 v_q_out + 5 v_a_out + 4)
/// ```
pub fn out_group_observation_biases(
    v_q_out: f64,
    v_a_out: f64,
    delta: f64,
) -> Result<OutGroupObservationBiases> {
    if !delta.is_finite() {
        return Err(Error::InvalidScenario("overconfidence must be finite".into()));
    }
    // unit pin isolates the ratios; biases scale linearly in Δ
    let (model, true_f, unit_constraint) = out_group_observation_model(v_q_out, v_a_out, 1.0)?;
    let belief = solve_agnostic(&model, &true_f, &unit_constraint)?;
    let ratios = belief.bias(&true_f);
    Ok(OutGroupObservationBiases {
        caliber_ratio_3: ratios[2],
        caliber_ratio_4: ratios[3],
        discrimination_ratio: ratios[4],
        caliber_bias_3: ratios[2] * delta,
        caliber_bias_4: ratios[3] * delta,
        discrimination_bias: ratios[4] * delta,
    })
}

/// Two individuals with talent and morality attributes.
///
/// Individual 1 (the agent) is the group's member, individual 2 its
/// competitor. Statuses load on the attribute sums, the competitor's
/// business success loads twice on talent, and the agent is overconfident
/// about his own attribute sum. The agent's own talent is normalized to
/// zero; only the composite enters the model.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAttributeScenario {
    pub talent_2: f64,
    pub morality_1: f64,
    pub morality_2: f64,
    pub discrimination: f64,
    pub v_q1: f64,
    pub v_eta1: f64,
    pub overconfidence: f64,
}

impl MultiAttributeScenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v_q1", self.v_q1), ("v_eta1", self.v_eta1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "{name} must be strictly positive"
                )));
            }
        }
        let finite = [
            self.talent_2,
            self.morality_1,
            self.morality_2,
            self.discrimination,
            self.overconfidence,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidScenario("parameters must be finite".into()));
        }
        Ok(())
    }

    /// The fixed 4×4 observation stack: both statuses, the competitor's
    /// business success, and the discrimination signal, over fundamentals
    /// (own composite, competitor composite, discrimination, competitor
    /// talent). The other two error variances are fixed at one.
    pub fn model(&self) -> Result<(LinearGaussianModel, Fundamentals, DogmaticConstraint)> {
        self.validate()?;
        let design = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, -1.0, 0.0, //
                0.0, 1.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        let variances = DVector::from_vec(vec![self.v_q1, 1.0, 1.0, self.v_eta1]);
        let model = LinearGaussianModel::new(design, DMatrix::from_diagonal(&variances))?;
        let composite_own = self.morality_1; // own talent normalized to zero
        let composite_other = self.talent_2 + self.morality_2;
        let f = Fundamentals::from_slice(&[
            composite_own,
            composite_other,
            self.discrimination,
            self.talent_2,
        ])?;
        let constraint = DogmaticConstraint::Agnostic {
            index: 0,
            value: composite_own + self.overconfidence,
        };
        Ok((model, f, constraint))
    }
}

/// Output of [`multi_attribute_biases`].
#[derive(Debug, Clone)]
pub struct MultiAttributeBiases {
    /// Bias about the competitor's talent; closes to `Δ₁/(1 + v_q1/v_eta1)`.
    pub talent_bias: f64,
    /// Bias about the competitor's morality; closes to `−2Δ₁/(1 + v_q1/v_eta1)`.
    pub morality_bias: f64,
    /// Bias about discrimination; closes to `−Δ₁/(1 + v_q1/v_eta1)`.
    pub discrimination_bias: f64,
}

/// Biases in the two-attribute model, via the generic solver on the fixed
/// observation stack. The morality bias is recovered from the identified
/// coordinates as composite bias minus talent bias.
pub fn multi_attribute_biases(scenario: &MultiAttributeScenario) -> Result<MultiAttributeBiases> {
    let (model, true_f, constraint) = scenario.model()?;
    let belief = solve_agnostic(&model, &true_f, &constraint)?;
    let bias = belief.bias(&true_f);
    Ok(MultiAttributeBiases {
        talent_bias: bias[3],
        morality_bias: bias[1] - bias[3],
        discrimination_bias: bias[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::oracle::{numeric_oracle, OracleConfig};
    use approx::assert_relative_eq;

    #[test]
    fn correlated_diagonal_reduces_to_self_bias() {
        let s = CorrelatedScenario::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5])),
            DVector::zeros(3),
            0,
            1.5,
        )
        .unwrap();
        let out = correlated_biases(&s).unwrap();
        assert_eq!(out.caliber_bias[0], 1.5);
        assert_eq!(out.caliber_bias[1], 0.0);
        assert_eq!(out.caliber_bias[2], 0.0);
        assert_eq!(out.sigma_bias[(0, 0)], 1.5 * 1.5);
        assert_eq!(out.sigma_bias[(1, 1)], 0.0);
        assert_eq!(out.group_tags[1], GroupTag::Neutral);
        assert_eq!(out.group_tags[0], GroupTag::InGroup);
    }

    #[test]
    fn correlated_pair_hand_values() {
        let s = CorrelatedScenario::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
            DVector::zeros(2),
            0,
            1.0,
        )
        .unwrap();
        let out = correlated_biases(&s).unwrap();
        assert_relative_eq!(out.caliber_bias[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out.caliber_bias[1], 0.5, epsilon = 1e-15);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]);
        assert_relative_eq!(out.sigma_bias, expected, epsilon = 1e-15);
        assert_eq!(out.group_tags[1], GroupTag::InGroup);
    }

    #[test]
    fn correlated_matches_identity_design_solver() {
        let cov = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.4, -0.3, 0.4, 2.0, 0.1, -0.3, 0.1, 1.5],
        );
        let s = CorrelatedScenario::new(cov, DVector::zeros(3), 1, 0.8).unwrap();
        let out = correlated_biases(&s).unwrap();
        let (model, f, constraint) = s.model().unwrap();
        let belief = crate::limit::solve_agnostic(&model, &f, &constraint).unwrap();
        let bias = belief.bias(&f);
        for j in 0..3 {
            assert_relative_eq!(out.caliber_bias[j], bias[j], epsilon = 1e-12);
        }
        let sigma_gap = (&belief.covariance - model.covariance() - &out.sigma_bias).amax();
        assert!(sigma_gap < 1e-12);
    }

    #[test]
    fn estimated_relative_covariance_is_correct() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, -0.6, -0.6, 2.0]);
        let s = CorrelatedScenario::new(cov.clone(), DVector::zeros(2), 0, 2.0).unwrap();
        let out = correlated_biases(&s).unwrap();
        let believed = &cov + &out.sigma_bias;
        for j in 0..2 {
            let estimated = believed[(j, 0)] / believed[(0, 0)];
            let truth = cov[(j, 0)] / cov[(0, 0)];
            assert!((estimated - truth).abs() < 1e-10);
        }
    }

    #[test]
    fn perceived_homogeneity_sign_pattern() {
        let cov = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, -0.4, 0.5, 1.0, -0.1, -0.4, -0.1, 1.0],
        );
        let s = CorrelatedScenario::new(cov, DVector::zeros(3), 0, 1.0).unwrap();
        let out = correlated_biases(&s).unwrap();
        assert_eq!(out.group_tags[1], GroupTag::InGroup);
        assert_eq!(out.group_tags[2], GroupTag::OutGroup);
        assert!(out.sigma_bias[(1, 1)] >= 0.0); // in/in
        assert!(out.sigma_bias[(2, 2)] >= 0.0); // out/out
        assert!(out.sigma_bias[(1, 2)] <= 0.0); // mixed
    }

    #[test]
    fn contact_two_person_hand_values() {
        let s = ContactScenario::new(
            vec![1, -1],
            1.0,
            1.0,
            1.0,
            DVector::zeros(2),
            0.0,
            0,
            1.0,
        )
        .unwrap();
        let out = contact_biases(&s).unwrap();
        assert_relative_eq!(out.theta_bias, -0.4, epsilon = 1e-15);
        assert_relative_eq!(out.caliber_bias[1], -0.2, epsilon = 1e-15);
    }

    #[test]
    fn contact_matches_stacked_model_oracle() {
        let s = ContactScenario::new(
            vec![1, -1, -1],
            0.8,
            1.2,
            1.5,
            DVector::from_vec(vec![0.1, -0.2, 0.4]),
            0.3,
            0,
            0.9,
        )
        .unwrap();
        let closed = contact_biases(&s).unwrap();
        let (model, f, constraint) = s.model().unwrap();
        let oracle =
            numeric_oracle(&model, &f, &constraint, &OracleConfig::default()).unwrap();
        let bias = oracle.bias(&f);
        for j in 0..3 {
            assert!((closed.caliber_bias[j] - bias[j]).abs() < 1e-6);
        }
        assert!((closed.theta_bias - bias[3]).abs() < 1e-6);
    }

    #[test]
    fn contact_caliber_bias_vanishes_with_perfect_information() {
        let biases_at = |v_a: f64| {
            let s = ContactScenario::new(
                vec![1, -1],
                1.0,
                v_a,
                1.0,
                DVector::zeros(2),
                0.0,
                0,
                1.0,
            )
            .unwrap();
            contact_biases(&s).unwrap()
        };
        let fine = biases_at(1e-9);
        assert!(fine.caliber_bias[1].abs() < 1e-9);
        assert!(fine.theta_bias.abs() > 0.1);
    }

    #[test]
    fn contact_biases_shrink_with_more_people() {
        let biases_at = |i: usize| {
            let mut memberships = vec![-1; i];
            memberships[0] = 1;
            let s = ContactScenario::new(
                memberships,
                1.0,
                1.0,
                1.0,
                DVector::zeros(i),
                0.0,
                0,
                1.0,
            )
            .unwrap();
            contact_biases(&s).unwrap()
        };
        let small = biases_at(2);
        let large = biases_at(6);
        assert!(large.theta_bias.abs() < small.theta_bias.abs());
        assert!(large.caliber_bias[1].abs() < small.caliber_bias[1].abs());
    }

    #[test]
    fn sign_outer_identity_holds_for_sign_vectors() {
        assert!(sign_outer_square_identity(&[1, -1, 1, 1]));
        assert!(sign_outer_square_identity(&[-1, -1]));
        assert!(!sign_outer_square_identity(&[1, 0, -1]));
    }

    #[test]
    fn out_group_observation_unit_variances() {
        let out = out_group_observation_biases(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(out.caliber_ratio_3, -1.0 / 7.0, epsilon = 1e-9);
        assert_relative_eq!(out.caliber_ratio_4, -1.0 / 7.0, epsilon = 1e-9);
        assert_relative_eq!(out.discrimination_ratio, -2.0 / 7.0, epsilon = 1e-9);
    }

    #[test]
    fn out_group_observation_matches_displayed_ratios() {
        for (vq, va) in [(0.5, 2.0), (2.0, 3.0), (1.3, 0.4)] {
            let out = out_group_observation_biases(vq, va, 1.0).unwrap();
            let denom = 5.0 * vq + 5.0 * va + 4.0;
            assert_relative_eq!(out.caliber_ratio_3, -2.0 * va / denom, epsilon = 1e-8);
            assert_relative_eq!(
                out.discrimination_ratio,
                -2.0 * (vq + va) / denom,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn precise_out_group_calibers_remove_caliber_bias_only() {
        let out = out_group_observation_biases(1.0, 1e-10, 1.0).unwrap();
        assert!(out.caliber_ratio_3.abs() < 1e-6);
        // discrimination bias persists: −2 v_q / (5 v_q + 4)
        assert_relative_eq!(out.discrimination_ratio, -2.0 / 9.0, epsilon = 1e-6);
    }

    #[test]
    fn sharper_out_group_recognition_trades_biases() {
        let coarse = out_group_observation_biases(1.0, 1.0, 1.0).unwrap();
        let sharp = out_group_observation_biases(0.5, 1.0, 1.0).unwrap();
        assert!(sharp.caliber_ratio_3.abs() > coarse.caliber_ratio_3.abs());
        assert!(sharp.discrimination_ratio.abs() < coarse.discrimination_ratio.abs());
    }

    #[test]
    fn multi_attribute_unit_variances() {
        let s = MultiAttributeScenario {
            talent_2: 0.0,
            morality_1: 0.0,
            morality_2: 0.0,
            discrimination: 0.0,
            v_q1: 1.0,
            v_eta1: 1.0,
            overconfidence: 1.0,
        };
        let out = multi_attribute_biases(&s).unwrap();
        assert_relative_eq!(out.talent_bias, 0.5, epsilon = 1e-9);
        assert_relative_eq!(out.morality_bias, -1.0, epsilon = 1e-9);
        assert_relative_eq!(out.discrimination_bias, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn multi_attribute_closed_forms_any_variances() {
        for (vq, veta, delta) in [(0.5, 1.5, 2.0), (2.0, 0.7, -1.0), (1.0, 1.0, 0.0)] {
            let s = MultiAttributeScenario {
                talent_2: 0.3,
                morality_1: -0.1,
                morality_2: 0.6,
                discrimination: 0.2,
                v_q1: vq,
                v_eta1: veta,
                overconfidence: delta,
            };
            let out = multi_attribute_biases(&s).unwrap();
            let scale = delta / (1.0 + vq / veta);
            assert_relative_eq!(out.talent_bias, scale, epsilon = 1e-8, max_relative = 1e-8);
            assert_relative_eq!(
                out.morality_bias,
                -2.0 * scale,
                epsilon = 1e-8,
                max_relative = 1e-8
            );
            assert_relative_eq!(
                out.discrimination_bias,
                -scale,
                epsilon = 1e-8,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn multi_attribute_sign_pattern() {
        let s = MultiAttributeScenario {
            talent_2: 0.0,
            morality_1: 0.0,
            morality_2: 0.0,
            discrimination: 0.0,
            v_q1: 0.7,
            v_eta1: 1.9,
            overconfidence: 2.5,
        };
        let out = multi_attribute_biases(&s).unwrap();
        assert!(out.talent_bias > 0.0, "positive stereotype on talent");
        assert!(out.morality_bias < 0.0);
        assert!(out.discrimination_bias < 0.0);
    }

    #[test]
    fn combined_groups_and_correlation_add_up() {
        // Groups plus correlated recognitions: the caliber bias grows both
        // with the recognition covariance and with shared memberships.
        let build = |cov01: f64, shared: bool| {
            let c = if shared {
                DMatrix::from_row_slice(2, 1, &[1, 1])
            } else {
                DMatrix::from_row_slice(2, 1, &[1, 0])
            };
            let mut design = DMatrix::zeros(3, 3);
            design[(0, 0)] = 1.0;
            design[(1, 1)] = 1.0;
            design[(2, 2)] = 1.0;
            design[(0, 2)] = f64::from(c[(0, 0)]);
            design[(1, 2)] = f64::from(c[(1, 0)]);
            let mut cov = DMatrix::identity(3, 3);
            cov[(0, 1)] = cov01;
            cov[(1, 0)] = cov01;
            let model = LinearGaussianModel::new(design, cov).unwrap();
            let f = Fundamentals::zeros(3);
            let constraint = DogmaticConstraint::Agnostic { index: 0, value: 1.0 };
            let belief = solve_agnostic(&model, &f, &constraint).unwrap();
            belief.bias(&f)[1]
        };
        let base = build(0.0, false);
        assert!(build(0.4, false) > base, "covariance channel");
        assert!(build(0.0, true) > base, "shared-group channel");
        assert!(build(0.4, true) > build(0.4, false), "channels combine");
    }
}
