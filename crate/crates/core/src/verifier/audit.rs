use std::collections::BTreeSet;

use serde::Serialize;

use crate::mechanism::{run_mechanism, MechanismError};
use crate::money::Money;
use crate::scenario::{feasible_horizon, Scenario};
use crate::strategies::build_equilibrium_profile;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditCounterexample {
    pub property: &'static str,
    pub detail: String,
}

/// Budget, participation and efficiency of the canonical equilibrium run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub terminated: bool,
    pub feasible_horizon: usize,
    /// 1-based.
    pub manufactured: BTreeSet<usize>,
    pub payments: Vec<Money>,
    pub utilities: Vec<Money>,
    pub total_payments: Money,
    pub manufactured_cost: Money,
    pub budget_residual: Money,
    /// 1-based users with negative utility.
    pub ir_violations: Vec<usize>,
    pub efficiency_ok: bool,
    pub counterexamples: Vec<AuditCounterexample>,
    pub pass: bool,
}

pub fn audit_equilibrium(scenario: &Scenario) -> Result<AuditReport, MechanismError> {
    let (stage1, stage2) = build_equilibrium_profile(scenario);
    let outcome = run_mechanism(scenario, &stage1, &stage2)?;
    let feasible = feasible_horizon(scenario).get();
    let payments: Vec<Money> = outcome.payments.iter().map(|p| p.net()).collect();
    let total_payments: Money = payments.iter().sum();
    let budget_residual = &total_payments - &outcome.manufactured_cost;
    let ir_violations: Vec<usize> = outcome
        .utilities
        .iter()
        .enumerate()
        .filter(|(_, u)| u.is_negative())
        .map(|(i, _)| i + 1)
        .collect();
    let efficiency_ok = outcome.manufactured.len() == feasible;

    let mut counterexamples = Vec::new();
    if !budget_residual.is_zero() {
        counterexamples.push(AuditCounterexample {
            property: "budget_balance",
            detail: format!(
                "payments {total_payments} against manufactured cost {}",
                outcome.manufactured_cost
            ),
        });
    }
    for &user in &ir_violations {
        counterexamples.push(AuditCounterexample {
            property: "individual_rationality",
            detail: format!("user {user} utility {}", outcome.utilities[user - 1]),
        });
    }
    if !efficiency_ok {
        counterexamples.push(AuditCounterexample {
            property: "efficiency",
            detail: format!(
                "{} features built, feasible horizon {feasible}",
                outcome.manufactured.len()
            ),
        });
    }
    Ok(AuditReport {
        terminated: outcome.stage_one.is_terminated(),
        feasible_horizon: feasible,
        manufactured: outcome.manufactured,
        payments,
        utilities: outcome.utilities,
        total_payments,
        manufactured_cost: outcome.manufactured_cost,
        budget_residual,
        ir_violations,
        efficiency_ok,
        pass: counterexamples.is_empty(),
        counterexamples,
    })
}
