//! Domain types for a router cost-sharing instance and their validation.
//!
//! Features are numbered `1..=k_max` in every user-facing place (errors,
//! reports). Internally schedules are plain slices, so feature `k` lives at
//! index `k - 1`.

mod file;

pub use file::{load_scenario, parse_scenario, ScenarioDocument, ScenarioFileError, StrategyDecl};

use std::fmt;

use thiserror::Error;

use crate::money::Money;

/// Per-feature values of one user, non-negative and non-increasing in `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ValuationSchedule {
    values: Vec<Money>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("negative value at feature {index}")]
    Negative { index: usize },
    #[error("value rises at feature {index}")]
    NonIncreasing { index: usize },
}

impl ValuationSchedule {
    pub fn new(values: Vec<Money>) -> Result<Self, ScheduleError> {
        if let Some(pos) = values.iter().position(Money::is_negative) {
            return Err(ScheduleError::Negative { index: pos + 1 });
        }
        if let Some(pos) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(ScheduleError::NonIncreasing { index: pos + 2 });
        }
        Ok(ValuationSchedule { values })
    }

    pub fn zeros(len: usize) -> Self {
        ValuationSchedule {
            values: vec![Money::zero(); len],
        }
    }

    pub fn values(&self) -> &[Money] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at zero-based `index`; zero past the end.
    pub fn at(&self, index: usize) -> Money {
        self.values.get(index).cloned().unwrap_or_default()
    }

    /// Zero-pads or truncates to exactly `len` features.
    pub fn resized(&self, len: usize) -> Self {
        let mut values = self.values.clone();
        values.resize(len, Money::zero());
        ValuationSchedule { values }
    }

    /// Sum of the first `count` features.
    pub fn total_through(&self, count: usize) -> Money {
        (0..count).map(|k| self.at(k)).sum()
    }
}

/// Manufacture cost per feature, non-negative and non-decreasing in `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CostSchedule {
    costs: Vec<Money>,
}

impl CostSchedule {
    pub fn new(costs: Vec<Money>) -> Result<Self, ScenarioError> {
        if let Some(pos) = costs.iter().position(Money::is_negative) {
            return Err(ScenarioError::NegativeValue {
                location: ValueLocation::Cost,
                index: pos + 1,
            });
        }
        if let Some(pos) = costs.windows(2).position(|w| w[1] < w[0]) {
            return Err(ScenarioError::NonMonotoneCosts { index: pos + 2 });
        }
        Ok(CostSchedule { costs })
    }

    pub fn costs(&self) -> &[Money] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// Cost of the feature at zero-based `index`.
    pub fn at(&self, index: usize) -> &Money {
        &self.costs[index]
    }

    /// Total cost of the first `count` features.
    pub fn total_through(&self, count: usize) -> Money {
        self.costs[..count].iter().sum()
    }
}

/// Number of features whose summed true benefit strictly exceeds cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeasibleHorizon(pub usize);

impl FeasibleHorizon {
    pub fn get(self) -> usize {
        self.0
    }
}

/// Which kind of schedule a validation error refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueLocation {
    /// True valuation `pb` of a user (1-based).
    TrueValuation { user: usize },
    /// Joint benefit estimate `jb` of a user (1-based).
    JointEstimate { user: usize },
    Cost,
}

impl fmt::Display for ValueLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueLocation::TrueValuation { user } => write!(f, "user {user} pb"),
            ValueLocation::JointEstimate { user } => write!(f, "user {user} jb"),
            ValueLocation::Cost => f.write_str("costs"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{location} is not non-increasing: value rises at feature {index}")]
    NonMonotoneSchedule { location: ValueLocation, index: usize },
    #[error("costs are not non-decreasing: cost falls at feature {index}")]
    NonMonotoneCosts { index: usize },
    #[error("{location} has a negative value at feature {index}")]
    NegativeValue { location: ValueLocation, index: usize },
    #[error("scenario needs at least 2 users and 1 feature (got n={n}, k_max={k_max})")]
    EmptyScenario { n: usize, k_max: usize },
    #[error("bid increment must be positive (got {0})")]
    NonPositiveIncrement(Money),
    #[error("{location} has {len} entries but k_max is {k_max}")]
    ScheduleTooLong {
        location: ValueLocation,
        len: usize,
        k_max: usize,
    },
    #[error("costs list {len} features but k_max is {k_max}")]
    CostLengthMismatch { len: usize, k_max: usize },
    #[error("declared n={declared} but {actual} users are listed")]
    UserCountMismatch { declared: usize, actual: usize },
}

/// Every invariant violated by a raw scenario.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub errors: Vec<ScenarioError>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario:")?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

/// Unchecked scenario input, as read from a file or built by hand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawScenario {
    pub n: usize,
    pub k_max: usize,
    pub true_valuations: Vec<Vec<Money>>,
    pub joint_estimates: Vec<Vec<Money>>,
    pub costs: Vec<Money>,
    pub epsilon: Money,
    pub seed: u64,
}

/// A validated instance: `n >= 2` users, every schedule zero-padded to `k_max`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scenario {
    k_max: usize,
    true_valuations: Vec<ValuationSchedule>,
    joint_estimates: Vec<ValuationSchedule>,
    costs: CostSchedule,
    epsilon: Money,
    seed: u64,
}

fn check_schedule(
    values: &[Money],
    location: ValueLocation,
    k_max: usize,
    errors: &mut Vec<ScenarioError>,
) -> Option<ValuationSchedule> {
    if values.len() > k_max {
        errors.push(ScenarioError::ScheduleTooLong {
            location,
            len: values.len(),
            k_max,
        });
        return None;
    }
    let mut ok = true;
    for (pos, v) in values.iter().enumerate() {
        if v.is_negative() {
            errors.push(ScenarioError::NegativeValue {
                location,
                index: pos + 1,
            });
            ok = false;
        }
    }
    for (pos, w) in values.windows(2).enumerate() {
        if w[1] > w[0] {
            errors.push(ScenarioError::NonMonotoneSchedule {
                location,
                index: pos + 2,
            });
            ok = false;
        }
    }
    ok.then(|| {
        let mut padded = values.to_vec();
        padded.resize(k_max, Money::zero());
        ValuationSchedule { values: padded }
    })
}

/// Checks every domain invariant and zero-pads the schedules to `k_max`.
/// All violations are collected, not just the first.
pub fn validate_scenario(raw: RawScenario) -> Result<Scenario, ValidationError> {
    let mut errors = Vec::new();
    let users = raw.true_valuations.len();
    if raw.n != users {
        errors.push(ScenarioError::UserCountMismatch {
            declared: raw.n,
            actual: users,
        });
    }
    if users < 2 || raw.k_max < 1 {
        errors.push(ScenarioError::EmptyScenario {
            n: users,
            k_max: raw.k_max,
        });
    }
    if !raw.epsilon.is_positive() {
        errors.push(ScenarioError::NonPositiveIncrement(raw.epsilon.clone()));
    }
    if raw.joint_estimates.len() != users {
        errors.push(ScenarioError::UserCountMismatch {
            declared: users,
            actual: raw.joint_estimates.len(),
        });
    }

    let true_valuations: Vec<_> = raw
        .true_valuations
        .iter()
        .enumerate()
        .map(|(i, pb)| {
            check_schedule(pb, ValueLocation::TrueValuation { user: i + 1 }, raw.k_max, &mut errors)
        })
        .collect();
    let joint_estimates: Vec<_> = raw
        .joint_estimates
        .iter()
        .enumerate()
        .map(|(i, jb)| {
            check_schedule(jb, ValueLocation::JointEstimate { user: i + 1 }, raw.k_max, &mut errors)
        })
        .collect();

    if raw.costs.len() != raw.k_max {
        errors.push(ScenarioError::CostLengthMismatch {
            len: raw.costs.len(),
            k_max: raw.k_max,
        });
    }
    for (pos, c) in raw.costs.iter().enumerate() {
        if c.is_negative() {
            errors.push(ScenarioError::NegativeValue {
                location: ValueLocation::Cost,
                index: pos + 1,
            });
        }
    }
    for (pos, w) in raw.costs.windows(2).enumerate() {
        if w[1] < w[0] {
            errors.push(ScenarioError::NonMonotoneCosts { index: pos + 2 });
        }
    }

    if !errors.is_empty() {
        return Err(ValidationError { errors });
    }
    Ok(Scenario {
        k_max: raw.k_max,
        true_valuations: true_valuations.into_iter().map(Option::unwrap).collect(),
        joint_estimates: joint_estimates.into_iter().map(Option::unwrap).collect(),
        costs: CostSchedule { costs: raw.costs },
        epsilon: raw.epsilon,
        seed: raw.seed,
    })
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.true_valuations.len()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn true_valuations(&self) -> &[ValuationSchedule] {
        &self.true_valuations
    }

    pub fn joint_estimates(&self) -> &[ValuationSchedule] {
        &self.joint_estimates
    }

    pub fn costs(&self) -> &CostSchedule {
        &self.costs
    }

    pub fn epsilon(&self) -> &Money {
        &self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `pb_N(k)` for zero-based `index`.
    pub fn total_true_value(&self, index: usize) -> Money {
        self.true_valuations.iter().map(|pb| pb.at(index)).sum()
    }

    /// `pb_{N/i}(k)`: everyone's true value except `user`'s.
    pub fn others_true_value(&self, user: usize, index: usize) -> Money {
        self.true_valuations
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != user)
            .map(|(_, pb)| pb.at(index))
            .sum()
    }

    /// Largest value anyone holds for any feature.
    pub fn max_true_value(&self) -> Money {
        self.true_valuations
            .iter()
            .flat_map(|pb| pb.values().iter())
            .max()
            .cloned()
            .unwrap_or_default()
    }

    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            n: self.n(),
            k_max: self.k_max,
            true_valuations: self.true_valuations.iter().map(|s| s.values.clone()).collect(),
            joint_estimates: self.joint_estimates.iter().map(|s| s.values.clone()).collect(),
            costs: self.costs.costs.clone(),
            epsilon: self.epsilon.clone(),
            seed: self.seed,
        }
    }
}

/// `F = max{k : Σ_i pb_i(k) > c(k)}`, or 0 when no feature qualifies.
pub fn feasible_horizon(scenario: &Scenario) -> FeasibleHorizon {
    let last = (0..scenario.k_max())
        .rev()
        .find(|&k| scenario.total_true_value(k) > *scenario.costs().at(k));
    FeasibleHorizon(last.map_or(0, |k| k + 1))
}
