use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;

use costshare::mechanism::{MechanismOutcome, PaymentBreakdown, StageOneOutcome};
use costshare::strategies::StrategyAssignment;
use costshare::Money;

/// Decimal places of the approximation columns.
const DECIMAL_PLACES: u32 = 6;

pub const CSV_HEADER: [&str; 22] = [
    "scenario",
    "param",
    "value",
    "status",
    "kind",
    "user",
    "strategy",
    "role",
    "adoption",
    "gamma",
    "delta",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "net",
    "net_decimal",
    "utility",
    "utility_decimal",
    "manufactured",
    "manufactured_cost",
    "residual",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserRow {
    /// 1-based.
    pub user: usize,
    pub strategy: String,
    pub adoption: usize,
    pub payment: PaymentBreakdown,
    pub utility: Money,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Totals {
    pub payments: Money,
    pub utilities: Money,
    pub manufactured_cost: Money,
    pub residual: Money,
}

/// One mechanism run, ready for display or CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunReport {
    pub scenario: String,
    /// Sweep parameter and value, if any.
    pub point: Option<(String, Money)>,
    pub stage_one: StageOneOutcome,
    pub k_nwu: Option<usize>,
    pub manufactured: BTreeSet<usize>,
    pub manufactured_cost: Money,
    pub rows: Vec<UserRow>,
}

impl RunReport {
    pub fn new(scenario: impl Into<String>, assignment: &StrategyAssignment, outcome: &MechanismOutcome) -> Self {
        let terminated = outcome.stage_one.is_terminated();
        let rows = if terminated {
            Vec::new()
        } else {
            assignment
                .strategies()
                .iter()
                .enumerate()
                .map(|(i, s)| UserRow {
                    user: i + 1,
                    strategy: s.name().to_string(),
                    adoption: outcome.adoption[i],
                    payment: outcome.payments[i].clone(),
                    utility: outcome.utilities[i].clone(),
                })
                .collect()
        };
        RunReport {
            scenario: scenario.into(),
            point: None,
            stage_one: outcome.stage_one.clone(),
            k_nwu: outcome.detail.as_ref().map(|d| d.k_nwu),
            manufactured: outcome.manufactured.clone(),
            manufactured_cost: outcome.manufactured_cost.clone(),
            rows,
        }
    }

    pub fn at_point(mut self, param: &str, value: Money) -> Self {
        self.point = Some((param.to_string(), value));
        self
    }

    pub fn status(&self) -> &'static str {
        if self.stage_one.is_terminated() {
            "terminated"
        } else {
            "proceed"
        }
    }

    /// Recomputed from the rows on every call.
    pub fn totals(&self) -> Totals {
        let payments: Money = self.rows.iter().map(|r| r.payment.net()).sum();
        let utilities: Money = self.rows.iter().map(|r| r.utility.clone()).sum();
        Totals {
            residual: &payments - &self.manufactured_cost,
            payments,
            utilities,
            manufactured_cost: self.manufactured_cost.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        match self.stage_one.result() {
            None => {
                let _ = writeln!(out, "stage 1: terminated, nothing is built and nobody pays");
            }
            Some(r) => {
                let _ = writeln!(out, "stage 1: {} feature(s) in play", r.horizon());
                for (k, (bid, winner)) in r.winning_bids().iter().zip(r.winners()).enumerate() {
                    let _ = writeln!(out, "  feature {}: user {} wins at {bid}", k + 1, winner + 1);
                }
                let built: Vec<String> = self.manufactured.iter().map(|k| k.to_string()).collect();
                let _ = writeln!(
                    out,
                    "stage 2: non-winner adoption {}, built {{{}}}",
                    self.k_nwu.unwrap_or(0),
                    built.join(", ")
                );
                let _ = writeln!(
                    out,
                    "{:<5} {:<12} {:<11} {:>8} {:>12} {:>12}",
                    "user", "strategy", "role", "adoption", "net", "utility"
                );
                for row in &self.rows {
                    let _ = writeln!(
                        out,
                        "{:<5} {:<12} {:<11} {:>8} {:>12} {:>12}",
                        row.user,
                        row.strategy,
                        row.payment.role(),
                        row.adoption,
                        row.payment.net().to_string(),
                        row.utility.to_string()
                    );
                }
            }
        }
        let t = self.totals();
        let _ = writeln!(
            out,
            "total payments {}, manufactured cost {}, residual {}",
            t.payments, t.manufactured_cost, t.residual
        );
        out
    }

    fn point_cells(&self) -> [String; 2] {
        match &self.point {
            Some((p, v)) => [p.clone(), v.to_string()],
            None => [String::new(), String::new()],
        }
    }

    pub fn write_csv_rows<W: io::Write>(&self, writer: &mut csv::Writer<W>) -> csv::Result<()> {
        let [param, value] = self.point_cells();
        let cell = |m: Option<&Money>| m.map(Money::to_string).unwrap_or_default();
        for row in &self.rows {
            let (gamma, delta, a1, a2, a3, a4) = match &row.payment {
                PaymentBreakdown::Idle => (None, None, None, None, None, None),
                PaymentBreakdown::NonWinner { gamma, delta } => (Some(gamma), Some(delta), None, None, None, None),
                PaymentBreakdown::Winner {
                    alpha1,
                    alpha2,
                    alpha3,
                    alpha4,
                } => (None, None, Some(alpha1), Some(alpha2), Some(alpha3), Some(alpha4)),
            };
            let net = row.payment.net();
            writer.write_record([
                self.scenario.clone(),
                param.clone(),
                value.clone(),
                self.status().to_string(),
                "user".to_string(),
                row.user.to_string(),
                row.strategy.clone(),
                row.payment.role().to_string(),
                row.adoption.to_string(),
                cell(gamma),
                cell(delta),
                cell(a1),
                cell(a2),
                cell(a3),
                cell(a4),
                net.to_string(),
                net.to_decimal_string(DECIMAL_PLACES),
                row.utility.to_string(),
                row.utility.to_decimal_string(DECIMAL_PLACES),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        let t = self.totals();
        writer.write_record([
            self.scenario.clone(),
            param,
            value,
            self.status().to_string(),
            "total".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            t.payments.to_string(),
            t.payments.to_decimal_string(DECIMAL_PLACES),
            t.utilities.to_string(),
            t.utilities.to_decimal_string(DECIMAL_PLACES),
            self.manufactured.len().to_string(),
            t.manufactured_cost.to_string(),
            t.residual.to_string(),
        ])
    }
}

/// Header plus the rows of every report, in order.
pub fn write_csv<W: io::Write>(out: W, reports: &[RunReport]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for report in reports {
        report.write_csv_rows(&mut writer)?;
    }
    writer.flush()?;
    Ok(())
}
