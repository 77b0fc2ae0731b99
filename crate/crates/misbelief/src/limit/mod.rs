//! Long-run beliefs of a dogmatic learner.
//!
//! A learner observes `r = M f + ε` but holds a degenerate prior on part of
//! the parameter space: one fundamental pinned to a wrong value, the whole
//! vector pinned, or one fundamental pinned with the covariance free. Its
//! posterior concentrates on the parameter point that minimizes the KL
//! divergence to the truth over the prior's support. This module computes
//! that point in closed form:
//!
//! * covariance fixed at `Σ̃`, fundamental `i` pinned — the bias in every
//!   other coordinate is proportional to the pinned bias,
//!   `f̃_j − f_j = [(MᵀΣ̃⁻¹M)⁻¹]_{ji} / [(MᵀΣ̃⁻¹M)⁻¹]_{ii} · (f̃_i − f_i)`;
//! * all fundamentals pinned at `f̃` — the inferred covariance absorbs the
//!   mean error as a rank-one inflation, `Σ̃ = Σ + (MΔ)(MΔ)ᵀ`;
//! * fundamental `i` pinned, covariance free — the fundamental biases follow
//!   the first formula evaluated at the *true* covariance, and the
//!   covariance picks up the same rank-one inflation.
//!
//! [`oracle::numeric_oracle`] cross-checks all three against direct numeric
//! minimization of the KL divergence.

pub mod oracle;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{Fundamentals, LinearGaussianModel};
use crate::linalg;

/// Which part of the parameter space the learner's prior pins.
#[derive(Debug, Clone, PartialEq)]
pub enum DogmaticConstraint {
    /// Fundamental `index` pinned to `value`; error covariance believed to
    /// be exactly `covariance`.
    FixedCovariance { index: usize, value: f64, covariance: DMatrix<f64> },
    /// Every fundamental pinned; the covariance is inferred from data.
    PinnedFundamentals { values: Fundamentals },
    /// Fundamental `index` pinned to `value`; everything else, covariance
    /// included, is inferred from data.
    Agnostic { index: usize, value: f64 },
}

impl DogmaticConstraint {
    /// Checks the constraint against a model's dimensions.
    pub fn validate(&self, model: &LinearGaussianModel) -> Result<()> {
        let l = model.fundamental_dim();
        match self {
            Self::FixedCovariance { index, value, covariance } => {
                check_pin(*index, *value, l)?;
                let d = model.signal_dim();
                if covariance.nrows() != d || covariance.ncols() != d {
                    return Err(Error::InvalidConstraint(format!(
                        "fixed covariance must be {d}x{d}, got {}x{}",
                        covariance.nrows(),
                        covariance.ncols()
                    )));
                }
                linalg::check_positive_definite(covariance, "fixed covariance")
                    .map_err(|e| Error::InvalidConstraint(e.to_string()))
            }
            Self::PinnedFundamentals { values } => {
                if values.len() != l {
                    return Err(Error::InvalidConstraint(format!(
                        "pinned vector has length {}, model expects {l}",
                        values.len()
                    )));
                }
                Ok(())
            }
            Self::Agnostic { index, value } => check_pin(*index, *value, l),
        }
    }

    /// Index of the single pinned fundamental, where one exists.
    pub fn pinned_index(&self) -> Option<usize> {
        match self {
            Self::FixedCovariance { index, .. } | Self::Agnostic { index, .. } => Some(*index),
            Self::PinnedFundamentals { .. } => None,
        }
    }
}

fn check_pin(index: usize, value: f64, l: usize) -> Result<()> {
    if index >= l {
        return Err(Error::InvalidConstraint(format!(
            "pinned index {index} out of range for {l} fundamentals"
        )));
    }
    if !value.is_finite() {
        return Err(Error::InvalidConstraint("pinned value must be finite".into()));
    }
    Ok(())
}

/// Concentration point `(f̃, Σ̃)` of the learner's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitBelief {
    pub fundamentals: Fundamentals,
    pub covariance: DMatrix<f64>,
}

impl LimitBelief {
    /// Bias vector `f̃ − f` against the true fundamentals.
    pub fn bias(&self, true_f: &Fundamentals) -> DVector<f64> {
        self.fundamentals.as_vector() - true_f.as_vector()
    }
}

/// Per-coordinate bias ratios `[B⁻¹]_{ji} / [B⁻¹]_{ii}` for `B = MᵀW⁻¹M`,
/// the kernel shared by the fixed-covariance and agnostic solutions. Entry
/// `i` is exactly 1.
fn bias_ratios(
    model: &LinearGaussianModel,
    weight_cov: &DMatrix<f64>,
    index: usize,
) -> Result<DVector<f64>> {
    let chol_w = linalg::cholesky(weight_cov, "weighting covariance")?;
    let b = model.design().transpose() * chol_w.solve(model.design());
    let b = linalg::symmetrize(&b); // B is symmetric in exact arithmetic
    let cond = linalg::condition_number(&b);
    if cond > linalg::CONDITION_LIMIT {
        return Err(Error::IllConditioned(format!(
            "information matrix condition number {cond:.3e} exceeds {:.1e}; \
             bias ratios would be unreliable",
            linalg::CONDITION_LIMIT
        )));
    }
    let chol_b = linalg::cholesky(&b, "information matrix")?;
    let column = linalg::inverse_column(&chol_b, index);
    let pivot = column[index];
    let mut ratios = column / pivot;
    ratios[index] = 1.0;
    Ok(ratios)
}

fn apply_ratios(
    true_f: &Fundamentals,
    ratios: &DVector<f64>,
    index: usize,
    value: f64,
) -> Fundamentals {
    let pinned_bias = value - true_f[index];
    let mut out = true_f.as_vector().clone();
    // bias_j = ratio_j · Δ_i keeps the solution exactly linear in Δ_i
    for j in 0..out.len() {
        out[j] += ratios[j] * pinned_bias;
    }
    out[index] = value;
    Fundamentals::new(out).expect("finite bias ratios")
}

/// Rank-one covariance inflation `Σ + (MΔ)(MΔ)ᵀ`.
fn inflate_covariance(model: &LinearGaussianModel, delta: &DVector<f64>) -> DMatrix<f64> {
    let y = model.design() * delta;
    model.covariance() + &y * y.transpose()
}

/// Limit belief when the covariance is believed known.
pub fn solve_fixed_covariance(
    model: &LinearGaussianModel,
    true_f: &Fundamentals,
    constraint: &DogmaticConstraint,
) -> Result<LimitBelief> {
    constraint.validate(model)?;
    check_true_f(model, true_f)?;
    let DogmaticConstraint::FixedCovariance { index, value, covariance } = constraint else {
        return Err(Error::InvalidConstraint(
            "solve_fixed_covariance requires a fixed-covariance constraint".into(),
        ));
    };
    let ratios = bias_ratios(model, covariance, *index)?;
    Ok(LimitBelief {
        fundamentals: apply_ratios(true_f, &ratios, *index, *value),
        covariance: covariance.clone(),
    })
}

/// Limit belief when all fundamentals are pinned.
pub fn solve_pinned_fundamentals(
    model: &LinearGaussianModel,
    true_f: &Fundamentals,
    constraint: &DogmaticConstraint,
) -> Result<LimitBelief> {
    constraint.validate(model)?;
    check_true_f(model, true_f)?;
    let DogmaticConstraint::PinnedFundamentals { values } = constraint else {
        return Err(Error::InvalidConstraint(
            "solve_pinned_fundamentals requires a pinned-fundamentals constraint".into(),
        ));
    };
    let delta = values.as_vector() - true_f.as_vector();
    Ok(LimitBelief {
        fundamentals: values.clone(),
        covariance: inflate_covariance(model, &delta),
    })
}

/// Limit belief when only one fundamental is pinned and the covariance is
/// learned. The fundamental biases coincide with the fixed-covariance
/// solution evaluated at the true covariance.
pub fn solve_agnostic(
    model: &LinearGaussianModel,
    true_f: &Fundamentals,
    constraint: &DogmaticConstraint,
) -> Result<LimitBelief> {
    constraint.validate(model)?;
    check_true_f(model, true_f)?;
    let DogmaticConstraint::Agnostic { index, value } = constraint else {
        return Err(Error::InvalidConstraint(
            "solve_agnostic requires an agnostic constraint".into(),
        ));
    };
    let ratios = bias_ratios(model, model.covariance(), *index)?;
    let fundamentals = apply_ratios(true_f, &ratios, *index, *value);
    let delta = fundamentals.as_vector() - true_f.as_vector();
    Ok(LimitBelief { covariance: inflate_covariance(model, &delta), fundamentals })
}

/// Dispatches to the closed form matching the constraint.
pub fn solve(
    model: &LinearGaussianModel,
    true_f: &Fundamentals,
    constraint: &DogmaticConstraint,
) -> Result<LimitBelief> {
    match constraint {
        DogmaticConstraint::FixedCovariance { .. } => {
            solve_fixed_covariance(model, true_f, constraint)
        }
        DogmaticConstraint::PinnedFundamentals { .. } => {
            solve_pinned_fundamentals(model, true_f, constraint)
        }
        DogmaticConstraint::Agnostic { .. } => solve_agnostic(model, true_f, constraint),
    }
}

fn check_true_f(model: &LinearGaussianModel, true_f: &Fundamentals) -> Result<()> {
    if true_f.len() != model.fundamental_dim() {
        return Err(Error::DimensionMismatch(format!(
            "true fundamentals have length {}, model expects {}",
            true_f.len(),
            model.fundamental_dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model_identity(d: usize) -> LinearGaussianModel {
        LinearGaussianModel::new(DMatrix::identity(d, d), DMatrix::identity(d, d)).unwrap()
    }

    #[test]
    fn no_overconfidence_means_no_bias() {
        let model = model_identity(3);
        let f = Fundamentals::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        let constraint = DogmaticConstraint::FixedCovariance {
            index: 1,
            value: 2.0, // equals the truth
            covariance: DMatrix::identity(3, 3),
        };
        let belief = solve_fixed_covariance(&model, &f, &constraint).unwrap();
        assert_eq!(belief.fundamentals, f);
    }

    #[test]
    fn diagonal_covariance_keeps_other_coordinates_truthful() {
        let model = LinearGaussianModel::new(
            DMatrix::identity(3, 3),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0, 1.0])),
        )
        .unwrap();
        let f = Fundamentals::from_slice(&[1.0, -1.0, 0.0]).unwrap();
        let constraint = DogmaticConstraint::FixedCovariance {
            index: 0,
            value: 3.0,
            covariance: DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 1.3, 0.9])),
        };
        let belief = solve_fixed_covariance(&model, &f, &constraint).unwrap();
        assert_eq!(belief.fundamentals[0], 3.0);
        assert_relative_eq!(belief.fundamentals[1], -1.0, epsilon = 1e-14);
        assert_relative_eq!(belief.fundamentals[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn pinned_fundamentals_inflates_covariance_rank_one() {
        let model = model_identity(2);
        let f = Fundamentals::zeros(2);
        let pinned = Fundamentals::from_slice(&[1.0, 0.0]).unwrap();
        let constraint = DogmaticConstraint::PinnedFundamentals { values: pinned };
        let belief = solve_pinned_fundamentals(&model, &f, &constraint).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(belief.covariance, expected, epsilon = 1e-14);

        // Difference to the truth is PSD with rank ≤ 1.
        let diff = &belief.covariance - model.covariance();
        let eig = diff.symmetric_eigen();
        let mut positive = 0;
        for v in eig.eigenvalues.iter() {
            assert!(*v > -1e-12);
            if *v > 1e-12 {
                positive += 1;
            }
        }
        assert!(positive <= 1);
    }

    #[test]
    fn pinned_at_truth_recovers_covariance() {
        let model = model_identity(2);
        let f = Fundamentals::from_slice(&[0.4, -0.2]).unwrap();
        let constraint = DogmaticConstraint::PinnedFundamentals { values: f.clone() };
        let belief = solve_pinned_fundamentals(&model, &f, &constraint).unwrap();
        assert_relative_eq!(belief.covariance, model.covariance().clone(), epsilon = 1e-14);
    }

    #[test]
    fn agnostic_matches_fixed_covariance_at_truth() {
        // Plugging the true covariance into the fixed-covariance formula
        // must reproduce the agnostic fundamentals exactly.
        let design = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.2, 0.0, 0.0, 1.0, -0.3, 0.5, 0.0, 1.0, 0.1, 0.4, 0.2],
        );
        let cov = {
            let l = DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, 0.3, 1.1, 0.0, 0.0, -0.2, 0.1, 0.9, 0.0, 0.05, -0.3,
                    0.2, 1.2,
                ],
            );
            &l * l.transpose()
        };
        let model = LinearGaussianModel::new(design, cov).unwrap();
        let f = Fundamentals::from_slice(&[0.5, -1.0, 2.0]).unwrap();
        let agnostic = DogmaticConstraint::Agnostic { index: 2, value: 2.75 };
        let fixed = DogmaticConstraint::FixedCovariance {
            index: 2,
            value: 2.75,
            covariance: model.covariance().clone(),
        };
        let a = solve_agnostic(&model, &f, &agnostic).unwrap();
        let b = solve_fixed_covariance(&model, &f, &fixed).unwrap();
        for j in 0..3 {
            assert!((a.fundamentals[j] - b.fundamentals[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn agnostic_diagonal_case_is_unbiased_off_pin() {
        let model = LinearGaussianModel::new(
            DMatrix::identity(3, 3),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 1.5])),
        )
        .unwrap();
        let f = Fundamentals::zeros(3);
        let constraint = DogmaticConstraint::Agnostic { index: 1, value: 1.0 };
        let belief = solve_agnostic(&model, &f, &constraint).unwrap();
        assert_eq!(belief.fundamentals[1], 1.0);
        assert!(belief.fundamentals[0].abs() < 1e-14);
        assert!(belief.fundamentals[2].abs() < 1e-14);
    }

    #[test]
    fn bias_is_exactly_linear_in_the_pinned_gap() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.4, 0.0, 1.0, 0.7, -0.2]);
        let model = LinearGaussianModel::new(design, DMatrix::identity(3, 3)).unwrap();
        // dyadic gaps so that doubling the pinned bias is exact in f64
        let f = Fundamentals::from_slice(&[1.0, -2.0]).unwrap();
        let single = DogmaticConstraint::Agnostic { index: 0, value: 1.0 + 0.375 };
        let double = DogmaticConstraint::Agnostic { index: 0, value: 1.0 + 0.75 };
        let a = solve_agnostic(&model, &f, &single).unwrap();
        let b = solve_agnostic(&model, &f, &double).unwrap();
        for j in 0..2 {
            let bias_a = a.fundamentals[j] - f[j];
            let bias_b = b.fundamentals[j] - f[j];
            // recovering the bias from f̃ − f re-rounds once per endpoint,
            // so allow a few ulps of the coordinate scale
            let ulps = 8.0 * f64::EPSILON * (f[j].abs() + bias_b.abs()).max(1.0);
            assert!(
                (bias_b - 2.0 * bias_a).abs() <= ulps,
                "coordinate {j} not linear to machine precision: {bias_a} vs {bias_b}"
            );
        }
    }

    #[test]
    fn rejects_mismatched_constraint_kind() {
        let model = model_identity(2);
        let f = Fundamentals::zeros(2);
        let constraint = DogmaticConstraint::Agnostic { index: 0, value: 1.0 };
        assert!(solve_fixed_covariance(&model, &f, &constraint).is_err());
    }

    #[test]
    fn rejects_out_of_range_pin() {
        let model = model_identity(2);
        let constraint = DogmaticConstraint::Agnostic { index: 5, value: 1.0 };
        assert!(constraint.validate(&model).is_err());
    }
}
