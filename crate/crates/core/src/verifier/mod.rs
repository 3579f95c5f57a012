//! Brute-force checks of the mechanism's incentive and budget claims.
//!
//! Everything here works on a discretized bid grid: multiples of an
//! increment `ε` from zero up to a cap, restricted to non-increasing
//! schedules. Conclusions hold on that grid only.

mod audit;
mod lemmas;
mod report;
pub mod sampling;

pub use audit::{audit_equilibrium, AuditReport};
pub use lemmas::{check_lemma1, check_lemma2, check_lemma3, LemmaConfig, LemmaReport, LemmaViolation};
pub use report::{verify_instance, InstanceReport, VerificationReport, VerifyConfig, GRID_NOTE};

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::mechanism::{evaluate_user, MechanismError, StageOneResult, StageTwoBids};
use crate::money::Money;
use crate::scenario::{Scenario, ValuationSchedule};
use crate::strategies::truthful_stage2;

/// Default cap on the number of schedules a single search may enumerate.
pub const DEFAULT_GRID_BUDGET: u64 = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifierError {
    #[error(
        "bid grid needs {required} schedules but the budget allows {allowed}; \
         use a smaller cap or a larger increment"
    )]
    GridBudgetExceeded { required: u128, allowed: u64 },
    #[error("grid increment must be positive")]
    NonPositiveIncrement,
    #[error("grid cap must be non-negative")]
    NegativeCap,
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

/// Bid levels `0, ε, 2ε, ..., ⌊cap/ε⌋ε`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidGrid {
    increment: Money,
    cap: Money,
    budget: u64,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

impl BidGrid {
    pub fn new(increment: Money, cap: Money) -> Result<Self, VerifierError> {
        if !increment.is_positive() {
            return Err(VerifierError::NonPositiveIncrement);
        }
        if cap.is_negative() {
            return Err(VerifierError::NegativeCap);
        }
        Ok(BidGrid {
            increment,
            cap,
            budget: DEFAULT_GRID_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn increment(&self) -> &Money {
        &self.increment
    }

    pub fn cap(&self) -> &Money {
        &self.cap
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn levels(&self) -> u128 {
        self.cap
            .floor_div(&self.increment)
            .to_u128()
            .map_or(u128::MAX, |top| top.saturating_add(1))
    }

    /// Number of non-increasing schedules over `features` features.
    pub fn schedule_count(&self, features: usize) -> u128 {
        let levels = self.levels();
        if features == 0 {
            return 1;
        }
        if levels == u128::MAX {
            return u128::MAX;
        }
        binomial(levels + features as u128 - 1, features as u128)
    }

    /// All non-increasing grid schedules in ascending lexicographic order.
    pub fn schedules(&self, features: usize) -> Result<Vec<ValuationSchedule>, VerifierError> {
        let required = self.schedule_count(features);
        if required > u128::from(self.budget) {
            return Err(VerifierError::GridBudgetExceeded {
                required,
                allowed: self.budget,
            });
        }
        let levels = self.levels() as u64;
        let values: Vec<Money> = (0..levels).map(|t| self.increment.times(t)).collect();
        let mut out = Vec::with_capacity(required as usize);
        let mut current = Vec::with_capacity(features);
        fill(&values, features, values.len(), &mut current, &mut out);
        Ok(out)
    }
}

fn fill(
    values: &[Money],
    features: usize,
    bound: usize,
    current: &mut Vec<Money>,
    out: &mut Vec<ValuationSchedule>,
) {
    if current.len() == features {
        out.push(ValuationSchedule::new(current.clone()).expect("grid schedules are non-increasing"));
        return;
    }
    for level in 0..bound {
        current.push(values[level].clone());
        fill(values, features, level + 1, current, out);
        current.pop();
    }
}

/// Result of an exhaustive Stage-2 search for one user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BestResponse {
    /// Lexicographically smallest utility maximizer.
    pub schedule: ValuationSchedule,
    pub utility: Money,
    pub truthful_utility: Money,
    /// Every maximizer, in ascending lexicographic order.
    pub argmax: Vec<ValuationSchedule>,
    pub evaluated: usize,
    /// The cap lies below some true value of this user, so the grid cannot
    /// represent every sensible report.
    pub cap_truncated: bool,
}

/// Tries every grid schedule for `user` (plus the truthful schedule, which
/// is always a candidate) with the others' bids fixed, and returns the best.
pub fn best_response_stage2(
    user: usize,
    scenario: &Scenario,
    fixed_others: &StageTwoBids,
    stage_one: &StageOneResult,
    grid: &BidGrid,
) -> Result<BestResponse, VerifierError> {
    let horizon = stage_one.horizon();
    let truthful = truthful_stage2(user, scenario, horizon);
    let mut candidates = grid.schedules(horizon)?;
    if !candidates.contains(&truthful) {
        candidates.push(truthful.clone());
    }
    let mut scored = Vec::with_capacity(candidates.len());
    let mut truthful_utility = None;
    for candidate in candidates {
        let utility = evaluate_user(scenario, stage_one, &fixed_others.with_user(user, candidate.clone()), user)?.utility;
        if candidate == truthful {
            truthful_utility = Some(utility.clone());
        }
        scored.push((candidate, utility));
    }
    let best = scored
        .iter()
        .map(|(_, u)| u)
        .max()
        .cloned()
        .expect("at least the truthful candidate");
    let mut argmax: Vec<ValuationSchedule> = scored
        .iter()
        .filter(|(_, u)| *u == best)
        .map(|(s, _)| s.clone())
        .collect();
    argmax.sort_by(|a, b| a.values().cmp(b.values()));
    let cap_truncated = scenario.true_valuations()[user]
        .values()
        .iter()
        .take(horizon)
        .any(|v| v > grid.cap());
    Ok(BestResponse {
        schedule: argmax[0].clone(),
        utility: best,
        truthful_utility: truthful_utility.expect("truthful candidate evaluated"),
        argmax,
        evaluated: scored.len(),
        cap_truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::run_stage_one;
    use crate::scenario::{validate_scenario, RawScenario};
    use crate::strategies::build_equilibrium_profile;

    fn int(v: i64) -> Money {
        Money::from_integer(v)
    }

    fn worked() -> Scenario {
        let m = |v: &[i64]| v.iter().map(|&x| int(x)).collect::<Vec<_>>();
        validate_scenario(RawScenario {
            n: 3,
            k_max: 2,
            true_valuations: vec![m(&[5, 4]), m(&[4, 3]), m(&[3, 2])],
            joint_estimates: vec![Vec::new(); 3],
            costs: m(&[4, 6]),
            epsilon: int(1),
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn grid_counts_match_enumeration() {
        let grid = BidGrid::new(int(1), int(8)).unwrap();
        assert_eq!(grid.levels(), 9);
        for d in 0..4 {
            let all = grid.schedules(d).unwrap();
            assert_eq!(all.len() as u128, grid.schedule_count(d));
        }
        assert_eq!(grid.schedule_count(2), 45);
        let two = grid.schedules(2).unwrap();
        assert_eq!(two[0].values(), &[int(0), int(0)]);
        assert_eq!(two[1].values(), &[int(1), int(0)]);
        assert!(two.windows(2).all(|w| w[0].values() < w[1].values()));
    }

    #[test]
    fn fractional_increment() {
        let grid = BidGrid::new(Money::ratio(1, 2), Money::ratio(7, 4)).unwrap();
        assert_eq!(grid.levels(), 4);
        assert_eq!(grid.schedules(1).unwrap().last().unwrap().values(), &[Money::ratio(3, 2)]);
    }

    #[test]
    fn budget_is_enforced() {
        let grid = BidGrid::new(int(1), int(100)).unwrap().with_budget(1000);
        assert_eq!(
            grid.schedules(3).unwrap_err(),
            VerifierError::GridBudgetExceeded { required: 176_851, allowed: 1000 }
        );
        assert!(BidGrid::new(int(0), int(1)).is_err());
    }

    #[test]
    fn worked_nonwinner_best_response_is_truthful() {
        let s = worked();
        let (one, two) = build_equilibrium_profile(&s);
        let r = run_stage_one(&one, s.costs()).result().cloned().unwrap();
        let grid = BidGrid::new(int(1), int(12)).unwrap();
        let br = best_response_stage2(1, &s, &two, &r, &grid).unwrap();
        assert_eq!(br.utility, br.truthful_utility);
        assert_eq!(br.truthful_utility, Money::ratio(11, 3));
        assert!(br.argmax.iter().any(|a| a.values() == [int(4), int(3)]));
        assert!(!br.cap_truncated);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn oracle_never_loses_to_truthful(seed in 0u64..10_000, cap in 0i64..6) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = sampling::random_scenario(&mut rng, &sampling::ScenarioSpace::new(3, 2));
            let (one, two) = build_equilibrium_profile(&s);
            let Some(r) = run_stage_one(&one, s.costs()).result().cloned() else {
                return Ok(());
            };
            let grid = BidGrid::new(int(1), int(cap)).unwrap();
            for user in 0..s.n() {
                let a = best_response_stage2(user, &s, &two, &r, &grid).unwrap();
                proptest::prop_assert!(a.utility >= a.truthful_utility);
                proptest::prop_assert_eq!(&a, &best_response_stage2(user, &s, &two, &r, &grid).unwrap());
            }
        }
    }

    #[test]
    fn small_cap_is_flagged() {
        let s = worked();
        let (one, two) = build_equilibrium_profile(&s);
        let r = run_stage_one(&one, s.costs()).result().cloned().unwrap();
        let grid = BidGrid::new(int(1), int(2)).unwrap();
        let br = best_response_stage2(1, &s, &two, &r, &grid).unwrap();
        assert!(br.cap_truncated);
        assert!(br.utility >= br.truthful_utility);
    }
}
