use serde::Serialize;

use super::audit::{audit_equilibrium, AuditReport};
use super::lemmas::{check_lemma1, check_lemma2, check_lemma3, LemmaConfig, LemmaReport};
use super::{BidGrid, VerifierError, DEFAULT_GRID_BUDGET};
use crate::mechanism::run_stage_one;
use crate::money::Money;
use crate::scenario::Scenario;
use crate::strategies::build_equilibrium_profile;

pub const GRID_NOTE: &str = "Best responses are exhaustive over non-increasing bid schedules on the \
    stated grid only; opponent profiles are sampled. Stage-1 equilibrium play is not checked.";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    /// Grid increment; the scenario's `epsilon` when absent.
    pub epsilon: Option<Money>,
    /// Largest bid explored; the largest true value rounded up to the grid
    /// when absent.
    pub cap: Option<Money>,
    pub samples: usize,
    pub budget: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            epsilon: None,
            cap: None,
            samples: 50,
            budget: DEFAULT_GRID_BUDGET,
        }
    }
}

impl VerifyConfig {
    pub fn grid_for(&self, scenario: &Scenario) -> Result<BidGrid, VerifierError> {
        let eps = self.epsilon.clone().unwrap_or_else(|| scenario.epsilon().clone());
        if !eps.is_positive() {
            return Err(VerifierError::NonPositiveIncrement);
        }
        let cap = match &self.cap {
            Some(cap) => cap.clone(),
            None => scenario.max_true_value().round_up_to(&eps),
        };
        Ok(BidGrid::new(eps, cap)?.with_budget(self.budget))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceReport {
    pub label: String,
    pub n: usize,
    pub k_max: usize,
    pub true_valuations: Vec<Vec<Money>>,
    pub costs: Vec<Money>,
    pub seed: u64,
    pub grid_increment: Money,
    pub grid_cap: Money,
    pub audit: AuditReport,
    pub lemma1: LemmaReport,
    pub lemma2: LemmaReport,
    pub lemma3: LemmaReport,
    pub pass: bool,
}

/// Audit plus the three lemma checks on the canonical equilibrium profile.
/// Opponent sampling is seeded by the scenario's own seed.
pub fn verify_instance(
    label: impl Into<String>,
    scenario: &Scenario,
    config: &VerifyConfig,
) -> Result<InstanceReport, VerifierError> {
    let grid = config.grid_for(scenario)?;
    let audit = audit_equilibrium(scenario)?;
    let lemma_config = LemmaConfig {
        samples: config.samples,
        seed: scenario.seed(),
        ..LemmaConfig::default()
    };
    let (stage1, stage2) = build_equilibrium_profile(scenario);
    let (lemma1, lemma2, lemma3) = match run_stage_one(&stage1, scenario.costs()).result() {
        None => (
            LemmaReport::terminated("lemma1"),
            LemmaReport::terminated("lemma2"),
            LemmaReport::terminated("lemma3"),
        ),
        Some(result) => (
            check_lemma1(scenario, result, &stage2, &grid, &lemma_config)?,
            check_lemma2(scenario, result, &stage2, &grid, &lemma_config)?,
            check_lemma3(scenario, result, &stage2, &grid, &lemma_config)?,
        ),
    };
    let pass = audit.pass && lemma1.pass && lemma2.pass && lemma3.pass;
    Ok(InstanceReport {
        label: label.into(),
        n: scenario.n(),
        k_max: scenario.k_max(),
        true_valuations: scenario
            .true_valuations()
            .iter()
            .map(|s| s.values().to_vec())
            .collect(),
        costs: scenario.costs().costs().to_vec(),
        seed: scenario.seed(),
        grid_increment: grid.increment().clone(),
        grid_cap: grid.cap().clone(),
        audit,
        lemma1,
        lemma2,
        lemma3,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub nonzero_residuals: usize,
    pub clamp_attributed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub note: &'static str,
    pub source: String,
    pub samples: usize,
    pub summary: Summary,
    pub instances: Vec<InstanceReport>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(source: impl Into<String>, samples: usize, instances: Vec<InstanceReport>) -> Self {
        let passed = instances.iter().filter(|i| i.pass).count();
        let summary = Summary {
            instances: instances.len(),
            passed,
            failed: instances.len() - passed,
            nonzero_residuals: instances
                .iter()
                .filter(|i| !i.audit.budget_residual.is_zero())
                .count(),
            clamp_attributed: instances
                .iter()
                .map(|i| i.lemma1.clamp_attributed + i.lemma2.clamp_attributed)
                .sum(),
        };
        VerificationReport {
            note: GRID_NOTE,
            source: source.into(),
            samples,
            pass: summary.failed == 0,
            summary,
            instances,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{validate_scenario, RawScenario};

    fn worked() -> Scenario {
        let m = |v: &[i64]| v.iter().map(|&x| Money::from_integer(x)).collect::<Vec<_>>();
        validate_scenario(RawScenario {
            n: 3,
            k_max: 2,
            true_valuations: vec![m(&[5, 4]), m(&[4, 3]), m(&[3, 2])],
            joint_estimates: vec![Vec::new(); 3],
            costs: m(&[4, 6]),
            epsilon: Money::one(),
            seed: 11,
        })
        .unwrap()
    }

    #[test]
    fn default_cap_rounds_up_to_grid() {
        let config = VerifyConfig {
            epsilon: Some(Money::ratio(3, 2)),
            ..VerifyConfig::default()
        };
        let grid = config.grid_for(&worked()).unwrap();
        assert_eq!(grid.cap(), &Money::from_integer(6));
    }

    #[test]
    fn worked_scenario_verifies() {
        let config = VerifyConfig {
            samples: 5,
            ..VerifyConfig::default()
        };
        let report = verify_instance("w", &worked(), &config).unwrap();
        assert!(report.pass, "{report:?}");
        let full = VerificationReport::new("w.json", 5, vec![report]);
        assert!(full.pass);
        assert!(full.to_json().contains("\"budget_residual\": \"0\""));
    }

    #[test]
    fn oversized_cap_reports_budget() {
        let config = VerifyConfig {
            cap: Some(Money::from_integer(10_000)),
            budget: 1000,
            ..VerifyConfig::default()
        };
        assert!(matches!(
            verify_instance("w", &worked(), &config),
            Err(VerifierError::GridBudgetExceeded { .. })
        ));
    }
}
