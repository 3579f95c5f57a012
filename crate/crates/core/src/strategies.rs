//! Bid profiles: truthful play, the canonical equilibrium, and fixed bids.
//!
//! In the canonical equilibrium the lowest-indexed equilibrium player bids
//! the full joint benefit `pb_N(k)` on every feasible feature in Stage 1 and
//! everyone else bids zero. In Stage 2 a winner bids `max{0, jb̄(k) -
//! pb_{N/i}(k)}` on the features it won and its true value elsewhere;
//! non-winners bid their true values.

use std::fmt;

use thiserror::Error;

use crate::mechanism::{
    run_mechanism, run_stage_one, BidError, MechanismError, MechanismOutcome, StageOneBids,
    StageOneOutcome, StageOneResult, StageTwoBids,
};
use crate::money::Money;
use crate::scenario::{feasible_horizon, Scenario, StrategyDecl, ValuationSchedule};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Stage 1 bids the joint estimate `jb_i`, Stage 2 the true value `pb_i`.
    Truthful,
    Equilibrium,
    Fixed {
        stage1: Vec<Money>,
        stage2: Vec<Money>,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Truthful => "truthful",
            Strategy::Equilibrium => "equilibrium",
            Strategy::Fixed { .. } => "fixed",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("unknown strategy {0:?} (expected truthful, equilibrium or fixed)")]
    Unknown(String),
    #[error("user {user} uses the fixed strategy but the scenario gives no stage-{stage} bids")]
    MissingBids { user: usize, stage: u8 },
    #[error("{got} strategies given for {expected} users")]
    WrongCount { expected: usize, got: usize },
    #[error(transparent)]
    Bids(#[from] BidError),
}

/// One strategy per user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyAssignment(Vec<Strategy>);

impl StrategyAssignment {
    pub fn new(strategies: Vec<Strategy>) -> Self {
        StrategyAssignment(strategies)
    }

    pub fn uniform(n: usize, strategy: Strategy) -> Self {
        StrategyAssignment(vec![strategy; n])
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.0
    }

    /// Builds the assignment from the scenario file, with optional per-user
    /// overrides by name. Users without a declaration play the equilibrium.
    pub fn resolve(
        decls: &[Option<StrategyDecl>],
        overrides: Option<&[String]>,
    ) -> Result<Self, StrategyError> {
        let n = decls.len();
        if let Some(names) = overrides {
            if names.len() != n {
                return Err(StrategyError::WrongCount {
                    expected: n,
                    got: names.len(),
                });
            }
        }
        (0..n)
            .map(|i| {
                let decl = decls[i].as_ref();
                let name = match overrides {
                    Some(names) => names[i].trim(),
                    None => decl.map_or("equilibrium", |d| d.name.as_str()),
                };
                match name {
                    "truthful" => Ok(Strategy::Truthful),
                    "equilibrium" => Ok(Strategy::Equilibrium),
                    "fixed" => {
                        let stage1 = decl
                            .and_then(|d| d.stage1.clone())
                            .ok_or(StrategyError::MissingBids { user: i + 1, stage: 1 })?;
                        let stage2 = decl
                            .and_then(|d| d.stage2.clone())
                            .ok_or(StrategyError::MissingBids { user: i + 1, stage: 2 })?;
                        Ok(Strategy::Fixed { stage1, stage2 })
                    }
                    other => Err(StrategyError::Unknown(other.to_string())),
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(StrategyAssignment)
    }
}

/// Caps every entry by its predecessor so the schedule is non-increasing.
fn non_increasing_envelope(mut values: Vec<Money>) -> ValuationSchedule {
    for k in 1..values.len() {
        if values[k] > values[k - 1] {
            values[k] = values[k - 1].clone();
        }
    }
    ValuationSchedule::new(values).expect("envelope of non-negative values is a valid schedule")
}

/// True values over the first `horizon` features.
pub fn truthful_stage2(user: usize, scenario: &Scenario, horizon: usize) -> ValuationSchedule {
    scenario.true_valuations()[user].resized(horizon)
}

/// Best Stage-2 reply of a Stage-1 winner: the residual `jb̄(k) - pb_{N/i}(k)`
/// (floored at zero) on won features, the true value elsewhere.
pub fn lemma3_stage2(user: usize, stage_one: &StageOneResult, scenario: &Scenario) -> ValuationSchedule {
    let values = (0..stage_one.horizon())
        .map(|k| {
            if stage_one.wins(user, k) {
                (&stage_one.winning_bids()[k] - scenario.others_true_value(user, k)).clamp_non_negative()
            } else {
                scenario.true_valuations()[user].at(k)
            }
        })
        .collect();
    non_increasing_envelope(values)
}

/// Optimal Stage-1 bid levels against the highest opposing bids.
///
/// On a feasible feature the user outbids by the increment, `max{c(k),
/// opponents_max(k)} + ε`, when the opponents stay below the joint benefit,
/// and bids zero otherwise. Infeasible features get zero. Because costs rise
/// with `k`, the levels can increase and are returned as raw per-feature
/// values rather than a schedule.
pub fn lemma4_stage1(scenario: &Scenario, opponents_max: &[Money]) -> Vec<Money> {
    let feasible = feasible_horizon(scenario).get();
    (0..scenario.k_max())
        .map(|k| {
            let rival = opponents_max.get(k).cloned().unwrap_or_default();
            if k < feasible && rival < scenario.total_true_value(k) {
                let floor = scenario.costs().at(k).clone().max(rival);
                floor + scenario.epsilon()
            } else {
                Money::zero()
            }
        })
        .collect()
}

/// Stage-1 bid of the equilibrium leader: the joint benefit on feasible
/// features, zero beyond.
fn leader_stage1(scenario: &Scenario) -> ValuationSchedule {
    let feasible = feasible_horizon(scenario).get();
    let values = (0..scenario.k_max())
        .map(|k| {
            if k < feasible {
                scenario.total_true_value(k)
            } else {
                Money::zero()
            }
        })
        .collect();
    ValuationSchedule::new(values).expect("joint benefit is non-increasing")
}

/// A complete bid profile with its Stage-1 outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Profile {
    pub stage1: StageOneBids,
    pub outcome: StageOneOutcome,
    /// Empty schedules when Stage 1 terminated.
    pub stage2: StageTwoBids,
}

pub fn build_profile(scenario: &Scenario, assignment: &StrategyAssignment) -> Result<Profile, StrategyError> {
    let n = scenario.n();
    let strategies = assignment.strategies();
    if strategies.len() != n {
        return Err(StrategyError::WrongCount {
            expected: n,
            got: strategies.len(),
        });
    }
    let leader = strategies.iter().position(|s| *s == Strategy::Equilibrium);
    let stage1 = strategies
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Strategy::Truthful => Ok(scenario.joint_estimates()[i].clone()),
            Strategy::Equilibrium if Some(i) == leader => Ok(leader_stage1(scenario)),
            Strategy::Equilibrium => Ok(ValuationSchedule::zeros(scenario.k_max())),
            Strategy::Fixed { stage1, .. } => ValuationSchedule::new(stage1.clone())
                .map_err(|source| BidError::Invalid { user: i + 1, stage: 1, source }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let stage1 = StageOneBids::new(stage1, scenario)?;
    let outcome = run_stage_one(&stage1, scenario.costs());

    let stage2 = match outcome.result() {
        None => StageTwoBids::new(vec![ValuationSchedule::zeros(0); n]),
        Some(result) => {
            let horizon = result.horizon();
            let schedules = strategies
                .iter()
                .enumerate()
                .map(|(i, s)| match s {
                    Strategy::Truthful => Ok(truthful_stage2(i, scenario, horizon)),
                    Strategy::Equilibrium => Ok(lemma3_stage2(i, result, scenario)),
                    Strategy::Fixed { stage2, .. } => ValuationSchedule::new(stage2.clone())
                        .map(|s| s.resized(horizon))
                        .map_err(|source| BidError::Invalid { user: i + 1, stage: 2, source }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            StageTwoBids::new(schedules)
        }
    };
    Ok(Profile {
        stage1,
        outcome,
        stage2,
    })
}

/// The canonical equilibrium profile used by the audits.
pub fn build_equilibrium_profile(scenario: &Scenario) -> (StageOneBids, StageTwoBids) {
    let profile = build_profile(
        scenario,
        &StrategyAssignment::uniform(scenario.n(), Strategy::Equilibrium),
    )
    .expect("equilibrium bids are always valid");
    (profile.stage1, profile.stage2)
}

/// Builds the profile and runs both stages.
pub fn play(scenario: &Scenario, assignment: &StrategyAssignment) -> Result<(Profile, MechanismOutcome), PlayError> {
    let profile = build_profile(scenario, assignment)?;
    let outcome = run_mechanism(scenario, &profile.stage1, &profile.stage2)?;
    Ok((profile, outcome))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PlayError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::money;
    use crate::scenario::{validate_scenario, RawScenario};

    fn m(values: &[i64]) -> Vec<Money> {
        values.iter().map(|&v| Money::from_integer(v)).collect()
    }

    fn scenario(pb: &[&[i64]], costs: &[i64], epsilon: Money) -> Scenario {
        validate_scenario(RawScenario {
            n: pb.len(),
            k_max: costs.len(),
            true_valuations: pb.iter().map(|p| m(p)).collect(),
            joint_estimates: vec![Vec::new(); pb.len()],
            costs: m(costs),
            epsilon,
            seed: 0,
        })
        .unwrap()
    }

    fn worked() -> Scenario {
        scenario(&[&[5, 4], &[4, 3], &[3, 2]], &[4, 6], Money::one())
    }

    #[test]
    fn truthful_stage2_copies_and_truncates() {
        let s = worked();
        assert_eq!(truthful_stage2(1, &s, 2).values(), &m(&[4, 3])[..]);
        assert_eq!(truthful_stage2(1, &s, 1).values(), &m(&[4])[..]);
        let z = scenario(&[&[0, 0], &[1, 1]], &[1, 1], Money::one());
        assert_eq!(truthful_stage2(0, &z, 2).values(), &m(&[0, 0])[..]);
    }

    #[test]
    fn worked_equilibrium_profile() {
        let s = worked();
        let (one, two) = build_equilibrium_profile(&s);
        let one: Vec<_> = one.bids().iter().map(|b| b.values().to_vec()).collect();
        assert_eq!(one, vec![m(&[12, 9]), m(&[0, 0]), m(&[0, 0])]);
        let two: Vec<_> = two.schedules().iter().map(|b| b.values().to_vec()).collect();
        assert_eq!(two, vec![m(&[5, 4]), m(&[4, 3]), m(&[3, 2])]);
    }

    #[test]
    fn lemma3_on_worked_scenario() {
        let s = worked();
        let (one, _) = build_equilibrium_profile(&s);
        let r = run_stage_one(&one, s.costs()).result().cloned().unwrap();
        // (12 - 7, 9 - 5)
        assert_eq!(lemma3_stage2(0, &r, &s).values(), &m(&[5, 4])[..]);
        assert_eq!(lemma3_stage2(2, &r, &s).values(), &m(&[3, 2])[..]);
    }

    #[test]
    fn lemma3_floors_at_zero_and_repairs_order() {
        let s = scenario(&[&[1, 1], &[9, 1]], &[1, 1], Money::one());
        // User 1 wins feature 1 at 5 < pb_{N/1}(1) = 9, and feature 2 at 6.
        let one = StageOneBids::from_values(vec![m(&[6, 6]), m(&[5, 5])], &s).unwrap();
        let r = run_stage_one(&one, s.costs()).result().cloned().unwrap();
        assert_eq!(r.winners(), &[0, 0]);
        // Raw (max(0, 6-9), 6-1) = (0, 5) rises, so it is capped to (0, 0).
        assert_eq!(lemma3_stage2(0, &r, &s).values(), &m(&[0, 0])[..]);
    }

    #[test]
    fn lemma4_levels() {
        let s = scenario(&[&[5, 4], &[4, 3], &[3, 2]], &[4, 6], money("0.01"));
        let levels = lemma4_stage1(&s, &m(&[0, 0]));
        assert_eq!(levels, vec![money("4.01"), money("6.01")]);
        // An opponent already at the joint benefit: losing branch.
        assert_eq!(lemma4_stage1(&s, &m(&[12, 0]))[0], Money::zero());
        // Opponent between cost and joint benefit: outbid by ε.
        assert_eq!(lemma4_stage1(&s, &m(&[7, 0]))[0], money("7.01"));
        let narrow = scenario(&[&[5, 1], &[4, 1]], &[4, 6], Money::one());
        assert_eq!(lemma4_stage1(&narrow, &m(&[0, 0]))[1], Money::zero());
    }

    #[test]
    fn infeasible_scenario_terminates() {
        let s = scenario(&[&[1], &[1]], &[5], Money::one());
        let (one, _) = build_equilibrium_profile(&s);
        assert!(one.bids().iter().all(|b| b.values().iter().all(Money::is_zero)));
        let (_, out) = play(&s, &StrategyAssignment::uniform(2, Strategy::Equilibrium)).unwrap();
        assert!(out.stage_one.is_terminated());
    }

    #[test]
    fn symmetric_pair_leader_takes_the_feature() {
        let s = scenario(&[&[5], &[5]], &[6], Money::one());
        let profile = build_profile(&s, &StrategyAssignment::uniform(2, Strategy::Equilibrium)).unwrap();
        assert_eq!(profile.stage1.bids()[0].values(), &m(&[10])[..]);
        assert_eq!(profile.stage1.bids()[1].values(), &m(&[0])[..]);
        assert_eq!(profile.stage2.schedules()[1].values(), &m(&[5])[..]);
    }

    #[test]
    fn resolve_reads_declarations_and_overrides() {
        let decls = vec![
            None,
            Some(StrategyDecl { name: "truthful".into(), stage1: None, stage2: None }),
            Some(StrategyDecl { name: "fixed".into(), stage1: Some(m(&[1])), stage2: Some(m(&[2])) }),
        ];
        let a = StrategyAssignment::resolve(&decls, None).unwrap();
        assert_eq!(a.strategies()[0], Strategy::Equilibrium);
        assert_eq!(a.strategies()[1], Strategy::Truthful);
        assert_eq!(a.strategies()[2].name(), "fixed");

        let names = vec!["truthful".to_string(), "fixed".into(), "equilibrium".into()];
        assert_eq!(
            StrategyAssignment::resolve(&decls, Some(&names)),
            Err(StrategyError::MissingBids { user: 2, stage: 1 })
        );
        let names = vec!["greedy".to_string(), "fixed".into(), "fixed".into()];
        assert_eq!(
            StrategyAssignment::resolve(&decls, Some(&names)),
            Err(StrategyError::Unknown("greedy".into()))
        );
        assert!(matches!(
            StrategyAssignment::resolve(&decls, Some(&["truthful".to_string()])),
            Err(StrategyError::WrongCount { expected: 3, got: 1 })
        ));
    }
}
