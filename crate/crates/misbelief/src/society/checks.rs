//! Comparative-statics checks and cross-agent comparisons.
//!
//! Each check evaluates one of the model's qualitative predictions on a
//! concrete scenario by exact re-evaluation at perturbed scenarios (a group
//! added, a variance reduced, a rival population introduced) and reports a
//! signed margin: positive means the prediction holds strictly. Checks whose
//! preconditions fail report `NotApplicable` instead of passing vacuously.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{add_group, biases_closed_form, BiasReport, Scenario};

/// Sign tolerance when comparing biases across agents.
const SIGN_TOL: f64 = 1e-12;
/// Tolerance for "equal group mean calibers".
const MEAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum CheckOutcome {
    Pass { margin: f64 },
    Fail { margin: f64 },
    NotApplicable { reason: String },
}

impl CheckOutcome {
    fn from_margin(margin: f64) -> Self {
        if margin > 0.0 {
            Self::Pass { margin }
        } else {
            Self::Fail { margin }
        }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Self::Fail { .. })
    }

    pub fn margin(&self) -> Option<f64> {
        match self {
            Self::Pass { margin } | Self::Fail { margin } => Some(*margin),
            Self::NotApplicable { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorollaryCheck {
    /// Stable identifier, used in reports and the verification suites.
    pub id: &'static str,
    /// Human-readable statement of what must hold.
    pub label: &'static str,
    pub outcome: CheckOutcome,
    /// Auxiliary quantities (thresholds, witnesses) for the report.
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CorollaryReport {
    pub checks: Vec<CorollaryCheck>,
}

impl CorollaryReport {
    /// True when no check failed (`NotApplicable` entries do not fail).
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| !c.outcome.is_fail())
    }
}

/// Assigns each individual to its unique membership group if the structure
/// is partitional: disjoint groups covering everyone, with identical
/// relationship rows inside each group.
pub fn partition_groups(scenario: &Scenario) -> Option<Vec<usize>> {
    let i_count = scenario.individuals();
    let k_count = scenario.groups();
    if k_count == 0 {
        return None;
    }
    let mut group_of = vec![usize::MAX; i_count];
    for j in 0..i_count {
        let mut memberships = (0..k_count).filter(|&k| scenario.membership(j, k) == 1);
        let k = memberships.next()?; // covering: everyone belongs somewhere
        if memberships.next().is_some() {
            return None; // disjoint: nobody belongs twice
        }
        group_of[j] = k;
    }
    // identical rows within a group
    for j in 0..i_count {
        for j2 in (j + 1)..i_count {
            if group_of[j] == group_of[j2] {
                for k in 0..k_count {
                    if scenario.membership(j, k) != scenario.membership(j2, k) {
                        return None;
                    }
                }
            }
        }
    }
    Some(group_of)
}

fn group_mean(values: &DVector<f64>, members: &[usize]) -> f64 {
    members.iter().map(|&j| values[j]).sum::<f64>() / members.len() as f64
}

fn members_of(group_of: &[usize], k: usize) -> Vec<usize> {
    group_of.iter().enumerate().filter(|(_, &g)| g == k).map(|(j, _)| j).collect()
}

/// Runs the full battery of comparative-statics checks on a scenario.
pub fn corollary_checks(scenario: &Scenario) -> Result<CorollaryReport> {
    let report = biases_closed_form(scenario)?;
    let checks = vec![
        in_group_mean_superiority(scenario, &report)?,
        own_group_rated_above_outside_view(scenario, &report)?,
        irrelevant_group_inflates_total_bias(scenario, &report)?,
        rival_of_own_group_shifts_views(scenario, &report)?,
        sharper_signal_substitutes_biases(scenario, &report)?,
        rival_population_becomes_scapegoat(scenario, &report)?,
    ];
    Ok(CorollaryReport { checks })
}

/// With a partitional structure, equal true group means, and positive
/// overconfidence, the agent rates his own group's mean caliber strictly
/// above every other group's.
fn in_group_mean_superiority(scenario: &Scenario, report: &BiasReport) -> Result<CorollaryCheck> {
    let id = "cor1a";
    let label = "in-group mean caliber believed above every other group";
    let outcome = (|| {
        if scenario.overconfidence() <= 0.0 {
            return CheckOutcome::NotApplicable("requires positive overconfidence".into());
        }
        let Some(group_of) = partition_groups(scenario) else {
            return CheckOutcome::NotApplicable("group structure is not partitional".into());
        };
        if scenario.groups() < 2 {
            return CheckOutcome::NotApplicable("needs at least two groups".into());
        }
        let own = group_of[scenario.agent()];
        let own_members = members_of(&group_of, own);
        let own_true = group_mean(scenario.calibers(), &own_members);
        let believed = report.believed_calibers(scenario);
        let own_believed = group_mean(&believed, &own_members);

        let mut margin = f64::INFINITY;
        let mut compared = 0;
        for k in 0..scenario.groups() {
            if k == own {
                continue;
            }
            let members = members_of(&group_of, k);
            if members.is_empty() {
                continue;
            }
            if (group_mean(scenario.calibers(), &members) - own_true).abs() > MEAN_TOL {
                return CheckOutcome::NotApplicable(format!(
                    "true mean calibers of groups {own} and {k} differ"
                ));
            }
            margin = margin.min(own_believed - group_mean(&believed, &members));
            compared += 1;
        }
        if compared == 0 {
            return CheckOutcome::NotApplicable("no other non-empty group".into());
        }
        CheckOutcome::from_margin(margin)
    })();
    Ok(CorollaryCheck { id, label, outcome, detail: String::new() })
}

/// A member of another group (equally overconfident) rates the agent's
/// group, and its lead over his own group, strictly below the agent's own
/// assessment.
fn own_group_rated_above_outside_view(
    scenario: &Scenario,
    report: &BiasReport,
) -> Result<CorollaryCheck> {
    let id = "cor1b";
    let label = "own-group assessments exceed an outsider's assessments";
    let delta = scenario.overconfidence();
    if delta <= 0.0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("requires positive overconfidence".into()),
            detail: String::new(),
        });
    }
    let Some(group_of) = partition_groups(scenario) else {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("group structure is not partitional".into()),
            detail: String::new(),
        });
    };
    let own = group_of[scenario.agent()];
    let own_members = members_of(&group_of, own);
    let Some((other_group, outsider)) = (0..scenario.groups())
        .filter(|&k| k != own)
        .filter_map(|k| members_of(&group_of, k).first().map(|&j| (k, j)))
        .next()
    else {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("no outsider available".into()),
            detail: String::new(),
        });
    };
    let other_members = members_of(&group_of, other_group);

    let outsider_view = scenario
        .with_agent(outsider, scenario.calibers()[outsider] + delta)
        .and_then(|s| biases_closed_form(&s).map(|r| r.believed_calibers(&s)))?;
    let own_view = report.believed_calibers(scenario);

    let own_mean_gap =
        group_mean(&own_view, &own_members) - group_mean(&outsider_view, &own_members);
    let lead_gap = (group_mean(&own_view, &own_members) - group_mean(&own_view, &other_members))
        - (group_mean(&outsider_view, &own_members)
            - group_mean(&outsider_view, &other_members));
    let margin = own_mean_gap.min(lead_gap);
    Ok(CorollaryCheck {
        id,
        label,
        outcome: CheckOutcome::from_margin(margin),
        detail: format!("outsider={outsider} mean_gap={own_mean_gap:.6e} lead_gap={lead_gap:.6e}"),
    })
}

/// Adding an irrelevant group the agent belongs to strictly raises the sum
/// of absolute discrimination biases.
fn irrelevant_group_inflates_total_bias(
    scenario: &Scenario,
    report: &BiasReport,
) -> Result<CorollaryCheck> {
    let id = "cor2";
    let label = "adding an irrelevant group raises total discrimination bias";
    if scenario.overconfidence() == 0.0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("requires nonzero overconfidence".into()),
            detail: String::new(),
        });
    }
    let memberships = vec![1; scenario.individuals()];
    let grown = add_group(scenario, &memberships, 1.0)?;
    let after = biases_closed_form(&grown)?.total_discrimination_bias();
    let before = report.total_discrimination_bias();
    Ok(CorollaryCheck {
        id,
        label,
        outcome: CheckOutcome::from_margin(after - before),
        detail: format!("before={before:.6e} after={after:.6e}"),
    })
}

/// Contemplating a new group that rivals one of the agent's groups improves
/// his view of fellow members and worsens his view of the new group.
fn rival_of_own_group_shifts_views(
    scenario: &Scenario,
    report: &BiasReport,
) -> Result<CorollaryCheck> {
    let id = "cor3";
    let label = "a contemplated rival group helps own members, hurts rivals";
    if scenario.overconfidence() <= 0.0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("requires positive overconfidence".into()),
            detail: String::new(),
        });
    }
    let agent = scenario.agent();
    let Some(kappa) = (0..scenario.groups()).find(|&k| scenario.membership(agent, k) == 1)
    else {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("agent belongs to no group".into()),
            detail: String::new(),
        });
    };
    // members of κ become competitors of the new group; everyone else joins it
    let memberships: Vec<i32> = (0..scenario.individuals())
        .map(|j| if scenario.membership(j, kappa) == 1 { -1 } else { 1 })
        .collect();
    let grown = add_group(scenario, &memberships, 1.0)?;
    let after = biases_closed_form(&grown)?;

    let mut fellow_margin = f64::INFINITY;
    let mut rival_margin = f64::INFINITY;
    let mut fellows = 0;
    let mut rivals = 0;
    for j in 0..scenario.individuals() {
        if j == agent {
            continue;
        }
        if scenario.membership(j, kappa) == 1 {
            fellow_margin = fellow_margin.min(after.caliber_bias[j] - report.caliber_bias[j]);
            fellows += 1;
        } else {
            rival_margin = rival_margin.min(report.caliber_bias[j] - after.caliber_bias[j]);
            rivals += 1;
        }
    }
    if fellows == 0 && rivals == 0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("no other individuals to compare".into()),
            detail: String::new(),
        });
    }
    let margin = fellow_margin.min(rival_margin);
    Ok(CorollaryCheck {
        id,
        label,
        outcome: CheckOutcome::from_margin(margin),
        detail: format!("target_group={kappa} fellows={fellows} rivals={rivals}"),
    })
}

/// Reducing the signal variance of a group the agent relates to shrinks his
/// bias about that group and his total bias, and inflates his bias about
/// every other group he relates to.
fn sharper_signal_substitutes_biases(
    scenario: &Scenario,
    report: &BiasReport,
) -> Result<CorollaryCheck> {
    let id = "cor4";
    let label = "sharper discrimination signal substitutes biases across groups";
    if scenario.overconfidence() == 0.0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("requires nonzero overconfidence".into()),
            detail: String::new(),
        });
    }
    let agent = scenario.agent();
    let Some(k) = (0..scenario.groups()).find(|&k| scenario.membership(agent, k) != 0) else {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("agent relates to no group".into()),
            detail: String::new(),
        });
    };
    let reduced = scenario.with_signal_variance(k, scenario.signal_variances()[k] * 0.9)?;
    let after = biases_closed_form(&reduced)?;

    let own = report.theta_bias[k].abs() - after.theta_bias[k].abs();
    let total = report.total_discrimination_bias() - after.total_discrimination_bias();
    let mut others = f64::INFINITY;
    for k2 in 0..scenario.groups() {
        if k2 != k && scenario.membership(agent, k2) != 0 {
            others = others.min(after.theta_bias[k2].abs() - report.theta_bias[k2].abs());
        }
    }
    let margin = if others.is_finite() { own.min(total).min(others) } else { own.min(total) };
    Ok(CorollaryCheck {
        id,
        label,
        outcome: CheckOutcome::from_margin(margin),
        detail: format!("group={k} own_drop={own:.6e} total_drop={total:.6e}"),
    })
}

/// Extends the society with `newcomers` extra individuals forming a fresh
/// group that everyone already present competes with. True discrimination
/// toward the group is zero; newcomers get unit recognition variance and
/// zero caliber, and the group's signal variance is `v_eta_new`.
pub fn extend_with_rival_population(
    scenario: &Scenario,
    newcomers: usize,
    v_eta_new: f64,
) -> Result<Scenario> {
    if newcomers == 0 {
        return Err(Error::InvalidScenario("need at least one newcomer".into()));
    }
    let i0 = scenario.individuals();
    let k0 = scenario.groups();
    let i1 = i0 + newcomers;
    let mut c = DMatrix::zeros(i1, k0 + 1);
    c.view_mut((0, 0), (i0, k0)).copy_from(scenario.memberships());
    for j in 0..i1 {
        c[(j, k0)] = if j < i0 { -1 } else { 1 };
    }
    let mut calibers = DVector::zeros(i1);
    calibers.rows_mut(0, i0).copy_from(scenario.calibers());
    let mut v_q = DVector::from_element(i1, 1.0);
    v_q.rows_mut(0, i0).copy_from(scenario.recognition_variances());
    let mut theta = DVector::zeros(k0 + 1);
    theta.rows_mut(0, k0).copy_from(scenario.discrimination());
    let mut v_eta = DVector::from_element(k0 + 1, v_eta_new);
    v_eta.rows_mut(0, k0).copy_from(scenario.signal_variances());
    Scenario::new(
        c,
        calibers,
        theta,
        v_q,
        v_eta,
        scenario.agent(),
        scenario.believed_caliber(),
    )
}

/// A rival newcomer population draws a negative bias at any signal
/// variance; once the variance is large enough (threshold found by
/// bisection), every incumbent's bias turns positive.
fn rival_population_becomes_scapegoat(
    scenario: &Scenario,
    _report: &BiasReport,
) -> Result<CorollaryCheck> {
    let id = "cor5";
    let label = "rival population scapegoated; incumbents unified once signal is vague";
    if scenario.overconfidence() <= 0.0 {
        return Ok(CorollaryCheck {
            id,
            label,
            outcome: CheckOutcome::NotApplicable("requires positive overconfidence".into()),
            detail: String::new(),
        });
    }
    let newcomers = 2;
    let i0 = scenario.individuals();
    let agent = scenario.agent();

    let incumbent_min = |v: f64| -> Result<f64> {
        let extended = extend_with_rival_population(scenario, newcomers, v)?;
        let biases = biases_closed_form(&extended)?;
        Ok((0..i0)
            .filter(|&j| j != agent)
            .map(|j| biases.caliber_bias[j])
            .fold(f64::INFINITY, f64::min))
    };

    // Bisect the smallest signal variance making all incumbent biases
    // positive; each bias is strictly increasing in the variance.
    let mut lo = 1e-9;
    let mut hi = 1.0;
    let threshold = if i0 == 1 {
        f64::NAN // no incumbents beside the agent; skip the bisection
    } else if incumbent_min(lo)? > 0.0 {
        lo
    } else {
        let mut expansions = 0;
        while incumbent_min(hi)? <= 0.0 {
            hi *= 4.0;
            expansions += 1;
            if expansions > 40 {
                return Ok(CorollaryCheck {
                    id,
                    label,
                    outcome: CheckOutcome::Fail { margin: f64::NEG_INFINITY },
                    detail: "no finite variance unifies the incumbents".into(),
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if incumbent_min(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    // Evaluate comfortably above the threshold.
    let eval_at = if threshold.is_nan() { 1.0 } else { (threshold * 2.0).max(threshold + 1.0) };
    let extended = extend_with_rival_population(scenario, newcomers, eval_at)?;
    let biases = biases_closed_form(&extended)?;
    let newcomer_margin = (i0..i0 + newcomers)
        .map(|j| -biases.caliber_bias[j])
        .fold(f64::INFINITY, f64::min);
    let incumbent_margin = (0..i0)
        .filter(|&j| j != agent)
        .map(|j| biases.caliber_bias[j])
        .fold(f64::INFINITY, f64::min);
    let margin = if incumbent_margin.is_finite() {
        newcomer_margin.min(incumbent_margin)
    } else {
        newcomer_margin
    };
    Ok(CorollaryCheck {
        id,
        label,
        outcome: CheckOutcome::from_margin(margin),
        detail: format!("threshold={threshold:.6e} evaluated_at={eval_at:.6e}"),
    })
}

/// Side-by-side comparison of two equally structured societies seen by
/// different agents.
#[derive(Debug, Clone)]
pub struct AgreementReport {
    /// Per group: both agents' discrimination biases share a sign.
    pub group_sign_agreement: Vec<bool>,
    /// Per group: the agents have the same relationship with the group.
    pub same_relationship: Vec<bool>,
    /// Per individual: first agent's believed caliber minus the second's.
    pub caliber_difference: DVector<f64>,
    /// Per individual: beliefs agree within tolerance.
    pub caliber_agreement: Vec<bool>,
    pub report_a: BiasReport,
    pub report_b: BiasReport,
}

fn sign_of(x: f64) -> i32 {
    if x.abs() <= SIGN_TOL {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Compares the long-run views of two agents of the same society.
///
/// The scenarios must share everything except the focal agent and his
/// believed caliber. When both agents carry equal positive overconfidence,
/// sign agreement about a group's discrimination coincides with having the
/// same relationship to the group.
pub fn agreement_report(a: &Scenario, b: &Scenario) -> Result<AgreementReport> {
    let same_society = a.memberships() == b.memberships()
        && a.calibers() == b.calibers()
        && a.discrimination() == b.discrimination()
        && a.recognition_variances() == b.recognition_variances()
        && a.signal_variances() == b.signal_variances();
    if !same_society {
        return Err(Error::MismatchedSocieties(
            "agreement comparison requires identical societies (only the agent may differ)"
                .into(),
        ));
    }
    let report_a = biases_closed_form(a)?;
    let report_b = biases_closed_form(b)?;

    let group_sign_agreement = (0..a.groups())
        .map(|k| sign_of(report_a.theta_bias[k]) == sign_of(report_b.theta_bias[k]))
        .collect();
    let same_relationship = (0..a.groups())
        .map(|k| a.membership(a.agent(), k) == b.membership(b.agent(), k))
        .collect();
    let caliber_difference =
        report_a.believed_calibers(a) - report_b.believed_calibers(b);
    let caliber_agreement =
        caliber_difference.iter().map(|d| d.abs() <= SIGN_TOL).collect();

    Ok(AgreementReport {
        group_sign_agreement,
        same_relationship,
        caliber_difference,
        caliber_agreement,
        report_a,
        report_b,
    })
}
