//! Dominance checks for the three Stage-2 bidding lemmas.
//!
//! Opponent profiles are the base profile plus `samples` profiles drawn
//! uniformly from the grid with a seeded ChaCha stream. A violation whose
//! reference or deviating run touches the zero clamp on shares is counted
//! separately and does not fail the check.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{best_response_stage2, BidGrid, VerifierError};
use crate::mechanism::{clamp_exposed, evaluate_user, StageOneResult, StageTwoBids, UserOutcome};
use crate::money::Money;
use crate::scenario::{Scenario, ValuationSchedule};
use crate::strategies::{lemma3_stage2, truthful_stage2};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaConfig {
    /// Random opponent profiles on top of the base profile.
    pub samples: usize,
    pub seed: u64,
    /// Counterexamples kept in the report; all are counted.
    pub max_examples: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            samples: 50,
            seed: 0,
            max_examples: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaViolation {
    /// 1-based.
    pub user: usize,
    /// 0 is the base profile.
    pub profile: usize,
    pub bids: Vec<Vec<Money>>,
    pub reference: Vec<Money>,
    pub reference_utility: Money,
    pub deviation: Vec<Money>,
    pub deviation_utility: Money,
    pub clamp_exposed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub lemma: &'static str,
    /// 1-based users the lemma applies to.
    pub users: Vec<usize>,
    pub vacuous: bool,
    pub profiles: usize,
    pub comparisons: usize,
    /// Reference schedules that were not non-increasing and so not bids.
    pub skipped: usize,
    pub violations: usize,
    pub clamp_attributed: usize,
    /// Outcome-changing deviations with exactly the reference utility.
    pub ties: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strictly_better_somewhere: Option<bool>,
    pub cap_truncated: bool,
    pub counterexamples: Vec<LemmaViolation>,
    pub pass: bool,
}

impl LemmaReport {
    fn new(lemma: &'static str, users: Vec<usize>) -> Self {
        LemmaReport {
            lemma,
            vacuous: users.is_empty(),
            users: users.into_iter().map(|u| u + 1).collect(),
            profiles: 0,
            comparisons: 0,
            skipped: 0,
            violations: 0,
            clamp_attributed: 0,
            ties: 0,
            strictly_better_somewhere: None,
            cap_truncated: false,
            counterexamples: Vec::new(),
            pass: true,
        }
    }

    /// Report for a run where Stage 1 terminated.
    pub fn terminated(lemma: &'static str) -> Self {
        Self::new(lemma, Vec::new())
    }

    fn record(&mut self, violation: LemmaViolation, max_examples: usize) {
        self.violations += 1;
        if violation.clamp_exposed {
            self.clamp_attributed += 1;
        }
        if self.counterexamples.len() < max_examples {
            self.counterexamples.push(violation);
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.violations == self.clamp_attributed;
        self
    }
}

fn sample_profiles(
    base: &StageTwoBids,
    grid: &[ValuationSchedule],
    config: &LemmaConfig,
    salt: u64,
) -> Vec<StageTwoBids> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt);
    let mut profiles = vec![base.clone()];
    for _ in 0..config.samples {
        let schedules = (0..base.n())
            .map(|_| grid[rng.gen_range(0..grid.len())].clone())
            .collect();
        profiles.push(StageTwoBids::new(schedules));
    }
    profiles
}

fn profile_values(bids: &StageTwoBids) -> Vec<Vec<Money>> {
    bids.schedules().iter().map(|s| s.values().to_vec()).collect()
}

fn same_outcome(a: &UserOutcome, b: &UserOutcome) -> bool {
    a.adoption == b.adoption && a.payment == b.payment
}

/// Non-winners: the truthful schedule is a best reply on the grid, against
/// the base profile and every sampled opponent profile.
pub fn check_lemma1(
    scenario: &Scenario,
    stage_one: &StageOneResult,
    base: &StageTwoBids,
    grid: &BidGrid,
    config: &LemmaConfig,
) -> Result<LemmaReport, VerifierError> {
    let users: Vec<usize> = (0..scenario.n()).filter(|&u| !stage_one.is_winner(u)).collect();
    let mut report = LemmaReport::new("lemma1", users.clone());
    if users.is_empty() {
        return Ok(report.finish());
    }
    let horizon = stage_one.horizon();
    let candidates = grid.schedules(horizon)?;
    let profiles = sample_profiles(base, &candidates, config, 0x4c31);
    report.profiles = profiles.len();
    let mut strict = false;
    for &user in &users {
        let truthful = truthful_stage2(user, scenario, horizon);
        report.cap_truncated |= truthful.values().iter().any(|v| v > grid.cap());
        for (index, profile) in profiles.iter().enumerate() {
            let with_truth = profile.with_user(user, truthful.clone());
            let reference = evaluate_user(scenario, stage_one, &with_truth, user)?;
            let reference_clamped = clamp_exposed(scenario, stage_one, &with_truth, user);
            for candidate in &candidates {
                if *candidate == truthful {
                    continue;
                }
                report.comparisons += 1;
                let deviated = profile.with_user(user, candidate.clone());
                let outcome = evaluate_user(scenario, stage_one, &deviated, user)?;
                if outcome.utility > reference.utility {
                    report.record(
                        LemmaViolation {
                            user: user + 1,
                            profile: index,
                            bids: profile_values(profile),
                            reference: truthful.values().to_vec(),
                            reference_utility: reference.utility.clone(),
                            deviation: candidate.values().to_vec(),
                            deviation_utility: outcome.utility,
                            clamp_exposed: reference_clamped
                                || clamp_exposed(scenario, stage_one, &deviated, user),
                        },
                        config.max_examples,
                    );
                } else if !same_outcome(&outcome, &reference) {
                    if outcome.utility == reference.utility {
                        report.ties += 1;
                    } else {
                        strict = true;
                    }
                }
            }
        }
    }
    report.strictly_better_somewhere = Some(strict);
    Ok(report.finish())
}

/// Winners: keeping the won coordinates, reporting true values on the other
/// features weakly dominates every grid choice for those features.
pub fn check_lemma2(
    scenario: &Scenario,
    stage_one: &StageOneResult,
    base: &StageTwoBids,
    grid: &BidGrid,
    config: &LemmaConfig,
) -> Result<LemmaReport, VerifierError> {
    let horizon = stage_one.horizon();
    let users: Vec<usize> = (0..scenario.n())
        .filter(|&u| stage_one.is_winner(u) && stage_one.won_features(u).len() < horizon)
        .collect();
    let mut report = LemmaReport::new("lemma2", users.clone());
    if users.is_empty() {
        return Ok(report.finish());
    }
    let candidates = grid.schedules(horizon)?;
    let profiles = sample_profiles(base, &candidates, config, 0x4c32);
    report.profiles = profiles.len();
    for &user in &users {
        let truth = &scenario.true_valuations()[user];
        report.cap_truncated |= truth.values().iter().take(horizon).any(|v| v > grid.cap());
        let merge = |won: &ValuationSchedule, rest: &ValuationSchedule| -> Vec<Money> {
            (0..horizon)
                .map(|k| if stage_one.wins(user, k) { won.at(k) } else { rest.at(k) })
                .collect()
        };
        for (index, profile) in profiles.iter().enumerate() {
            let own = &profile.schedules()[user];
            let Ok(reference) = ValuationSchedule::new(merge(own, truth)) else {
                report.skipped += 1;
                continue;
            };
            let with_ref = profile.with_user(user, reference.clone());
            let base_outcome = evaluate_user(scenario, stage_one, &with_ref, user)?;
            let reference_clamped = clamp_exposed(scenario, stage_one, &with_ref, user);
            let alternatives: BTreeSet<Vec<Money>> = candidates.iter().map(|c| merge(own, c)).collect();
            for values in alternatives {
                let Ok(alternative) = ValuationSchedule::new(values) else {
                    continue;
                };
                if alternative == reference {
                    continue;
                }
                report.comparisons += 1;
                let deviated = profile.with_user(user, alternative.clone());
                let outcome = evaluate_user(scenario, stage_one, &deviated, user)?;
                if outcome.utility > base_outcome.utility {
                    report.record(
                        LemmaViolation {
                            user: user + 1,
                            profile: index,
                            bids: profile_values(profile),
                            reference: reference.values().to_vec(),
                            reference_utility: base_outcome.utility.clone(),
                            deviation: alternative.values().to_vec(),
                            deviation_utility: outcome.utility,
                            clamp_exposed: reference_clamped
                                || clamp_exposed(scenario, stage_one, &deviated, user),
                        },
                        config.max_examples,
                    );
                } else if outcome.utility == base_outcome.utility && !same_outcome(&outcome, &base_outcome) {
                    report.ties += 1;
                }
            }
        }
    }
    Ok(report.finish())
}

/// Winners: the residual schedule attains the exhaustive grid optimum with
/// the base profile held fixed. No clamp exemption applies here.
pub fn check_lemma3(
    scenario: &Scenario,
    stage_one: &StageOneResult,
    base: &StageTwoBids,
    grid: &BidGrid,
    config: &LemmaConfig,
) -> Result<LemmaReport, VerifierError> {
    let users: Vec<usize> = (0..scenario.n()).filter(|&u| stage_one.is_winner(u)).collect();
    let mut report = LemmaReport::new("lemma3", users.clone());
    report.profiles = 1;
    for &user in &users {
        let schedule = lemma3_stage2(user, stage_one, scenario);
        let with_schedule = base.with_user(user, schedule.clone());
        let attained = evaluate_user(scenario, stage_one, &with_schedule, user)?.utility;
        let best = best_response_stage2(user, scenario, base, stage_one, grid)?;
        report.comparisons += best.evaluated;
        report.cap_truncated |= best.cap_truncated;
        if attained == best.utility {
            report.ties += best.argmax.len().saturating_sub(1);
        }
        if attained < best.utility {
            report.violations += 1;
            if report.counterexamples.len() < config.max_examples {
                report.counterexamples.push(LemmaViolation {
                    user: user + 1,
                    profile: 0,
                    bids: profile_values(base),
                    reference: schedule.values().to_vec(),
                    reference_utility: attained,
                    deviation: best.schedule.values().to_vec(),
                    deviation_utility: best.utility,
                    clamp_exposed: false,
                });
            }
        }
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{run_stage_one, StageOneBids};
    use crate::scenario::{validate_scenario, RawScenario};
    use crate::strategies::build_equilibrium_profile;

    fn int(v: i64) -> Money {
        Money::from_integer(v)
    }

    fn m(values: &[i64]) -> Vec<Money> {
        values.iter().map(|&v| int(v)).collect()
    }

    fn scenario(pb: &[&[i64]], costs: &[i64]) -> Scenario {
        validate_scenario(RawScenario {
            n: pb.len(),
            k_max: costs.len(),
            true_valuations: pb.iter().map(|p| m(p)).collect(),
            joint_estimates: vec![Vec::new(); pb.len()],
            costs: m(costs),
            epsilon: int(1),
            seed: 0,
        })
        .unwrap()
    }

    fn canonical(s: &Scenario) -> (StageOneResult, StageTwoBids) {
        let (one, two) = build_equilibrium_profile(s);
        (run_stage_one(&one, s.costs()).result().cloned().unwrap(), two)
    }

    fn config(samples: usize) -> LemmaConfig {
        LemmaConfig {
            samples,
            seed: 7,
            max_examples: 3,
        }
    }

    #[test]
    fn worked_scenario_passes_all_three() {
        let s = scenario(&[&[5, 4], &[4, 3], &[3, 2]], &[4, 6]);
        let (r, two) = canonical(&s);
        let grid = BidGrid::new(int(1), int(6)).unwrap();
        let l1 = check_lemma1(&s, &r, &two, &grid, &config(10)).unwrap();
        assert!(l1.pass, "{l1:?}");
        assert_eq!(l1.users, vec![2, 3]);
        assert_eq!(l1.profiles, 11);
        let l2 = check_lemma2(&s, &r, &two, &grid, &config(10)).unwrap();
        assert!(l2.vacuous && l2.pass);
        let l3 = check_lemma3(&s, &r, &two, &grid, &config(0)).unwrap();
        assert!(l3.pass, "{l3:?}");
        assert_eq!(l3.users, vec![1]);
    }

    #[test]
    fn partial_winner_is_checked_on_other_features() {
        // User 1 wins feature 1 only; user 2 takes features 2 and 3.
        let s = scenario(&[&[6, 2, 1], &[3, 3, 3]], &[2, 3, 4]);
        let one = StageOneBids::from_values(vec![m(&[9, 0, 0]), m(&[8, 8, 8])], &s).unwrap();
        let r = run_stage_one(&one, s.costs()).result().cloned().unwrap();
        assert_eq!(r.won_features(0), vec![0]);
        let two = StageTwoBids::new(vec![
            lemma3_stage2(0, &r, &s),
            lemma3_stage2(1, &r, &s),
        ]);
        let grid = BidGrid::new(int(1), int(6)).unwrap();
        let l2 = check_lemma2(&s, &r, &two, &grid, &config(5)).unwrap();
        assert_eq!(l2.users, vec![1, 2]);
        assert!(!l2.vacuous);
        assert!(l2.comparisons > 0);
        assert_eq!(l2.violations, l2.clamp_attributed, "{l2:?}");
    }

    #[test]
    fn single_winner_single_feature_ties_are_reported() {
        let s = scenario(&[&[5], &[3]], &[4]);
        let (r, two) = canonical(&s);
        let grid = BidGrid::new(int(1), int(8)).unwrap();
        let l3 = check_lemma3(&s, &r, &two, &grid, &config(0)).unwrap();
        assert!(l3.pass);
        let l1 = check_lemma1(&s, &r, &two, &grid, &config(20)).unwrap();
        assert!(l1.pass, "{l1:?}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = scenario(&[&[5, 4], &[4, 3], &[3, 2]], &[4, 6]);
        let (r, two) = canonical(&s);
        let grid = BidGrid::new(int(1), int(5)).unwrap();
        let a = check_lemma1(&s, &r, &two, &grid, &config(8)).unwrap();
        let b = check_lemma1(&s, &r, &two, &grid, &config(8)).unwrap();
        assert_eq!(a, b);
    }
}
