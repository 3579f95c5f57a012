//! Proportional per-feature cost sharing and the auxiliary share function.
//!
//! [`phi`] splits one feature's cost in proportion to the submitted values.
//! [`pi`] sums those shares over the first `F` features. [`mu`] is the share a
//! hypothetical participant would carry if its value were a reference bid
//! minus everyone else's total; the auction's payments are built from it.
//!
//! The property checkers evaluate the monotonicity and bound properties of
//! the family pointwise on a caller-supplied sample and return every
//! counterexample instead of failing on the first one.

use serde::Serialize;
use thiserror::Error;

use crate::money::Money;
use crate::scenario::{CostSchedule, FeasibleHorizon, ValuationSchedule};

/// Per-user shares of a single feature's cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector(pub Vec<Money>);

impl ShareVector {
    pub fn shares(&self) -> &[Money] {
        &self.0
    }

    pub fn total(&self) -> Money {
        self.0.iter().sum()
    }
}

/// Per-user cost shares summed over the feasible features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiTotal(pub Vec<Money>);

impl PiTotal {
    pub fn totals(&self) -> &[Money] {
        &self.0
    }

    pub fn total(&self) -> Money {
        self.0.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CostSharingError {
    #[error("feature {feature} is outside the rule's domain: total value {total} does not exceed cost {cost}")]
    DomainViolation {
        feature: usize,
        total: Box<Money>,
        cost: Box<Money>,
    },
}

/// Splits `cost` in proportion to `values`.
///
/// All-zero values with a positive cost fall back to an equal split, so the
/// rule is total. A zero cost yields all-zero shares.
pub fn phi(values: &[Money], cost: &Money) -> ShareVector {
    if cost.is_zero() || values.is_empty() {
        return ShareVector(vec![Money::zero(); values.len()]);
    }
    let total: Money = values.iter().sum();
    if total.is_zero() {
        let each = cost / Money::from_integer(values.len() as i64);
        return ShareVector(vec![each; values.len()]);
    }
    ShareVector(values.iter().map(|v| cost * v / &total).collect())
}

/// Sums [`phi`] over features `1..=F` of the users' true valuations.
pub fn pi(
    true_valuations: &[ValuationSchedule],
    costs: &CostSchedule,
    horizon: FeasibleHorizon,
) -> Result<PiTotal, CostSharingError> {
    let mut totals = vec![Money::zero(); true_valuations.len()];
    for k in 0..horizon.get() {
        let column: Vec<Money> = true_valuations.iter().map(|pb| pb.at(k)).collect();
        let total: Money = column.iter().sum();
        let cost = costs.at(k);
        if total <= *cost {
            return Err(CostSharingError::DomainViolation {
                feature: k + 1,
                total: Box::new(total),
                cost: Box::new(cost.clone()),
            });
        }
        for (acc, share) in totals.iter_mut().zip(phi(&column, cost).0) {
            *acc = &*acc + share;
        }
    }
    Ok(PiTotal(totals))
}

/// Share of a phantom participant valued at `x - Σ others`, or zero when the
/// others already exceed `x`.
pub fn mu(x: &Money, others: &[Money], cost: &Money) -> Money {
    let rest: Money = others.iter().sum();
    if rest > *x {
        return Money::zero();
    }
    let mut augmented = Vec::with_capacity(others.len() + 1);
    augmented.push(x - rest);
    augmented.extend_from_slice(others);
    phi(&augmented, cost).0.swap_remove(0)
}

/// A single-feature evaluation point for [`phi`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhiPoint {
    pub values: Vec<Money>,
    pub cost: Money,
}

/// An evaluation point for [`mu`]: reference value `x` against `others`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MuPoint {
    pub x: Money,
    pub others: Vec<Money>,
    pub cost: Money,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// Raising an opponent's value never raises a user's share.
    PhiOpponentMonotone,
    /// Moving λ of value to an opponent lowers a user's share by at most λ.
    PhiLambdaShift,
    /// Shares are permutation equivariant.
    Anonymity,
    /// Shares of one feature sum to its cost.
    BudgetBalance,
    /// `0 <= π_i <= Σ pb_i` on the domain.
    CoreBounds,
    /// μ is non-decreasing in its reference value when the others are positive.
    MuNonDecreasing,
    /// `μ(x; v) >= μ(x; v + λ e_j)`.
    MuOpponentUpper,
    /// `μ(x; v + λ e_j) >= μ(x; v) - λ`.
    MuOpponentLower,
    /// `μ(x + λ; v + λ e_j) <= μ(x; v)` when `Σ v < x`.
    MuJointShift,
    /// μ vanishes when the others exceed the reference.
    MuZeroBranch,
    /// `0 <= μ <= cost`.
    MuBounded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub property: Property,
    pub values: Vec<Money>,
    pub cost: Money,
    /// Reference value for μ checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Money>,
    /// Zero-based user (or opponent) the inequality was evaluated for.
    pub user: usize,
    pub lambda: Money,
    /// The side expected to be larger.
    pub greater: Money,
    /// The side expected to be smaller.
    pub lesser: Money,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    /// Number of individual inequalities evaluated.
    pub checked: usize,
    pub counterexamples: Vec<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{:?} violated at values {:?}, cost {}", .0.property, .0.values, .0.cost)]
pub struct PropertyViolation(pub Box<Counterexample>);

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn violations_of(&self, property: Property) -> usize {
        self.counterexamples
            .iter()
            .filter(|c| c.property == property)
            .count()
    }

    pub fn into_result(self) -> Result<PropertyReport, PropertyViolation> {
        match self.counterexamples.first() {
            Some(c) => Err(PropertyViolation(Box::new(c.clone()))),
            None => Ok(self),
        }
    }

    pub fn merge(&mut self, other: PropertyReport) {
        self.checked += other.checked;
        self.counterexamples.extend(other.counterexamples);
    }

    #[allow(clippy::too_many_arguments)]
    fn expect_ge(
        &mut self,
        property: Property,
        greater: Money,
        lesser: Money,
        values: &[Money],
        cost: &Money,
        reference: Option<&Money>,
        user: usize,
        lambda: &Money,
    ) {
        self.checked += 1;
        if greater < lesser {
            self.counterexamples.push(Counterexample {
                property,
                values: values.to_vec(),
                cost: cost.clone(),
                reference: reference.cloned(),
                user,
                lambda: lambda.clone(),
                greater,
                lesser,
            });
        }
    }
}

fn bumped(values: &[Money], index: usize, delta: &Money) -> Vec<Money> {
    let mut out = values.to_vec();
    out[index] = &out[index] + delta;
    out
}

/// Checks opponent monotonicity, the λ-shift bound, anonymity and per-feature
/// budget balance of [`phi`] at every sample point.
///
/// The λ-shift bound is evaluated exactly as stated and is only expected to
/// hold on the domain (values summing above cost); off-domain points are
/// reported like any other counterexample.
pub fn check_phi_monotonicity(sample: &[PhiPoint], lambda: &Money) -> PropertyReport {
    let mut report = PropertyReport::default();
    for point in sample {
        let values = &point.values;
        let cost = &point.cost;
        let base = phi(values, cost);
        let n = values.len();

        if !values.is_empty() && !cost.is_zero() {
            report.expect_ge(Property::BudgetBalance, base.total(), cost.clone(), values, cost, None, 0, lambda);
            report.expect_ge(Property::BudgetBalance, cost.clone(), base.total(), values, cost, None, 0, lambda);
        }

        let reversed: Vec<Money> = values.iter().rev().cloned().collect();
        let rev_shares = phi(&reversed, cost);
        for i in 0..n {
            let mirrored = &rev_shares.0[n - 1 - i];
            report.expect_ge(Property::Anonymity, base.0[i].clone(), mirrored.clone(), values, cost, None, i, lambda);
            report.expect_ge(Property::Anonymity, mirrored.clone(), base.0[i].clone(), values, cost, None, i, lambda);
        }

        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let raised = phi(&bumped(values, j, lambda), cost);
                report.expect_ge(
                    Property::PhiOpponentMonotone,
                    base.0[i].clone(),
                    raised.0[i].clone(),
                    values,
                    cost,
                    None,
                    i,
                    lambda,
                );
                if values[i] >= *lambda {
                    let mut shifted = bumped(values, j, lambda);
                    shifted[i] = &shifted[i] - lambda;
                    let moved = phi(&shifted, cost);
                    report.expect_ge(
                        Property::PhiLambdaShift,
                        moved.0[i].clone(),
                        &base.0[i] - lambda,
                        values,
                        cost,
                        None,
                        i,
                        lambda,
                    );
                }
            }
        }
    }
    report
}

/// Budget balance and core bounds of [`pi`] on one domain instance.
pub fn check_pi_axioms(
    true_valuations: &[ValuationSchedule],
    costs: &CostSchedule,
    horizon: FeasibleHorizon,
) -> Result<PropertyReport, CostSharingError> {
    let totals = pi(true_valuations, costs, horizon)?;
    let mut report = PropertyReport::default();
    let lambda = Money::zero();
    let budget = costs.total_through(horizon.get());
    let column_totals: Vec<Money> = true_valuations
        .iter()
        .map(|pb| pb.total_through(horizon.get()))
        .collect();
    report.expect_ge(Property::BudgetBalance, totals.total(), budget.clone(), &column_totals, &budget, None, 0, &lambda);
    report.expect_ge(Property::BudgetBalance, budget.clone(), totals.total(), &column_totals, &budget, None, 0, &lambda);
    for (i, share) in totals.0.iter().enumerate() {
        report.expect_ge(Property::CoreBounds, share.clone(), Money::zero(), &column_totals, &budget, None, i, &lambda);
        report.expect_ge(Property::CoreBounds, column_totals[i].clone(), share.clone(), &column_totals, &budget, None, i, &lambda);
    }
    Ok(report)
}

/// Checks the μ properties pointwise: monotonicity in the reference value,
/// the opponent-bump chain `A ≥ B ≥ A − λ`, the joint-shift bound, the zero
/// branch and `0 ≤ μ ≤ cost`.
pub fn check_mu_properties(sample: &[MuPoint], lambda: &Money) -> PropertyReport {
    let mut report = PropertyReport::default();
    for point in sample {
        let MuPoint { x, others, cost } = point;
        let rest: Money = others.iter().sum();
        let base = mu(x, others, cost);
        let r = Some(x);

        report.expect_ge(Property::MuBounded, base.clone(), Money::zero(), others, cost, r, 0, lambda);
        report.expect_ge(Property::MuBounded, cost.clone(), base.clone(), others, cost, r, 0, lambda);
        if rest > *x {
            report.expect_ge(Property::MuZeroBranch, Money::zero(), base.clone(), others, cost, r, 0, lambda);
        }

        if rest.is_positive() {
            let up = mu(&(x + lambda), others, cost);
            report.expect_ge(Property::MuNonDecreasing, up, base.clone(), others, cost, r, 0, lambda);
        }

        for j in 0..others.len() {
            let bumped_others = bumped(others, j, lambda);
            if x.is_positive() {
                let b1 = mu(x, &bumped_others, cost);
                report.expect_ge(Property::MuOpponentUpper, base.clone(), b1.clone(), others, cost, r, j, lambda);
                report.expect_ge(Property::MuOpponentLower, b1, &base - lambda, others, cost, r, j, lambda);
            }
            if rest < *x {
                let d1 = mu(&(x + lambda), &bumped_others, cost);
                report.expect_ge(Property::MuJointShift, base.clone(), d1, others, cost, r, j, lambda);
            }
        }
    }
    report
}
