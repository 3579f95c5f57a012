//! The two-stage auction.
//!
//! Stage 1 collects joint-benefit bids per feature. The highest bid on each
//! feature wins it (ties go to the lowest user index). If nobody bids above
//! the first feature's cost the router is not built. Otherwise the horizon
//! `Ḡ` is the last feature whose winning bid exceeds its cost.
//!
//! Stage 2 collects individual-benefit bids `ib` over features `1..=Ḡ`.
//! Non-winners all adopt the count `k_nwu` that maximizes the reported
//! surplus `Σ (ib_N - jb̄)`. Each winner picks its own count from a permitted
//! set derived from where its won features succeed (`ib_N >= jb̄`). Payments
//! are assembled from the auxiliary share [`mu`], always evaluated at the
//! Stage-1 winning bid:
//!
//! * non-winner: `γ - δ`, a cost share on adopted features minus
//!   compensation on the rest;
//! * winner: `α1 + α2 - α3 + α4`, the residual cost of its successful won
//!   features, a non-winner share on other adopted features, compensation on
//!   non-won features past its count, and a fine covering everyone else's
//!   compensation on its failed won features.
//!
//! Compensation and fine summands are clamped at zero. The clamp never binds
//! when the reported totals match the winning bids.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::cost_sharing::mu;
use crate::money::Money;
use crate::scenario::{CostSchedule, Scenario, ScheduleError, ValuationSchedule};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BidError {
    #[error("expected bids for {expected} users, got {got}")]
    WrongUserCount { expected: usize, got: usize },
    #[error("user {user} bids on {len} features but only {max} exist")]
    TooLong { user: usize, len: usize, max: usize },
    #[error("user {user} stage-{stage} bids: {source}")]
    Invalid {
        user: usize,
        stage: u8,
        #[source]
        source: ScheduleError,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("user {0} won no feature in stage 1")]
    NotAWinner(usize),
    #[error("user {0} won a feature in stage 1")]
    IsWinner(usize),
    #[error(transparent)]
    Bids(#[from] BidError),
}

fn schedules_from(values: Vec<Vec<Money>>, stage: u8) -> Result<Vec<ValuationSchedule>, BidError> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            ValuationSchedule::new(v).map_err(|source| BidError::Invalid {
                user: i + 1,
                stage,
                source,
            })
        })
        .collect()
}

/// Stage-1 joint-benefit bids, one schedule per user, zero-padded to `k_max`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StageOneBids {
    bids: Vec<ValuationSchedule>,
}

impl StageOneBids {
    pub fn new(bids: Vec<ValuationSchedule>, scenario: &Scenario) -> Result<Self, BidError> {
        if bids.len() != scenario.n() {
            return Err(BidError::WrongUserCount {
                expected: scenario.n(),
                got: bids.len(),
            });
        }
        if let Some((i, b)) = bids.iter().enumerate().find(|(_, b)| b.len() > scenario.k_max()) {
            return Err(BidError::TooLong {
                user: i + 1,
                len: b.len(),
                max: scenario.k_max(),
            });
        }
        Ok(StageOneBids {
            bids: bids.iter().map(|b| b.resized(scenario.k_max())).collect(),
        })
    }

    pub fn from_values(values: Vec<Vec<Money>>, scenario: &Scenario) -> Result<Self, BidError> {
        Self::new(schedules_from(values, 1)?, scenario)
    }

    pub fn bids(&self) -> &[ValuationSchedule] {
        &self.bids
    }
}

/// Result of a Stage-1 round that did not terminate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct StageOneResult {
    n: usize,
    /// `jb̄(k)` for `k = 1..=Ḡ`.
    winning_bids: Vec<Money>,
    /// Zero-based winner of each feature `1..=Ḡ`.
    winners: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageOneOutcome {
    Terminated,
    Proceed(StageOneResult),
}

impl StageOneOutcome {
    pub fn result(&self) -> Option<&StageOneResult> {
        match self {
            StageOneOutcome::Terminated => None,
            StageOneOutcome::Proceed(r) => Some(r),
        }
    }

    pub fn is_terminated(&self) -> bool {
        matches!(self, StageOneOutcome::Terminated)
    }
}

impl StageOneResult {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `Ḡ`.
    pub fn horizon(&self) -> usize {
        self.winners.len()
    }

    pub fn winning_bids(&self) -> &[Money] {
        &self.winning_bids
    }

    pub fn winners(&self) -> &[usize] {
        &self.winners
    }

    /// Index function `I_user(k)` for zero-based feature `index`.
    pub fn wins(&self, user: usize, index: usize) -> bool {
        self.winners.get(index) == Some(&user)
    }

    /// Zero-based indices of the features `user` won.
    pub fn won_features(&self, user: usize) -> Vec<usize> {
        (0..self.horizon()).filter(|&k| self.wins(user, k)).collect()
    }

    pub fn is_winner(&self, user: usize) -> bool {
        self.winners.contains(&user)
    }

    /// `I_i(k)` as an `n × Ḡ` matrix.
    pub fn index_function(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|i| (0..self.horizon()).map(|k| self.wins(i, k)).collect())
            .collect()
    }
}

/// Picks the highest bid per feature and the horizon `Ḡ`, or terminates when
/// nobody values the first feature above its cost.
pub fn run_stage_one(bids: &StageOneBids, costs: &CostSchedule) -> StageOneOutcome {
    let n = bids.bids.len();
    if costs.is_empty() || n == 0 {
        return StageOneOutcome::Terminated;
    }
    let mut winning_bids = Vec::with_capacity(costs.len());
    let mut winners = Vec::with_capacity(costs.len());
    for k in 0..costs.len() {
        let mut best = 0;
        let mut best_bid = bids.bids[0].at(k);
        for (i, schedule) in bids.bids.iter().enumerate().skip(1) {
            let bid = schedule.at(k);
            if bid > best_bid {
                best = i;
                best_bid = bid;
            }
        }
        winners.push(best);
        winning_bids.push(best_bid);
    }
    if winning_bids[0] <= *costs.at(0) {
        return StageOneOutcome::Terminated;
    }
    let horizon = (0..costs.len())
        .rev()
        .find(|&k| winning_bids[k] > *costs.at(k))
        .map_or(0, |k| k + 1);
    winning_bids.truncate(horizon);
    winners.truncate(horizon);
    StageOneOutcome::Proceed(StageOneResult {
        n,
        winning_bids,
        winners,
    })
}

/// Stage-2 individual-benefit bids. Entries past a schedule's end count as
/// zero and entries past `Ḡ` are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StageTwoBids {
    bids: Vec<ValuationSchedule>,
}

impl StageTwoBids {
    pub fn new(bids: Vec<ValuationSchedule>) -> Self {
        StageTwoBids { bids }
    }

    pub fn from_values(values: Vec<Vec<Money>>) -> Result<Self, BidError> {
        Ok(StageTwoBids {
            bids: schedules_from(values, 2)?,
        })
    }

    pub fn n(&self) -> usize {
        self.bids.len()
    }

    pub fn schedules(&self) -> &[ValuationSchedule] {
        &self.bids
    }

    pub fn bid(&self, user: usize, index: usize) -> Money {
        self.bids[user].at(index)
    }

    /// Same profile with `user`'s schedule replaced.
    pub fn with_user(&self, user: usize, schedule: ValuationSchedule) -> Self {
        let mut bids = self.bids.clone();
        bids[user] = schedule;
        StageTwoBids { bids }
    }

    fn total(&self, index: usize) -> Money {
        self.bids.iter().map(|b| b.at(index)).sum()
    }
}

/// Per-feature quantities every payment formula draws from, evaluated once
/// per Stage-2 profile.
#[derive(Clone, Debug)]
pub struct PaymentTable<'a> {
    stage_one: &'a StageOneResult,
    costs: &'a CostSchedule,
    /// `ib_N(k)`.
    totals: Vec<Money>,
    /// `[k][j] = μ_k(jb̄(k), ib_{-j}(k), c(k))`.
    shares: Vec<Vec<Money>>,
    /// `[k][j] = jb̄(k) - ib_{N/j}(k) - μ_k(...)`, before clamping.
    residuals: Vec<Vec<Money>>,
}

impl<'a> PaymentTable<'a> {
    pub fn new(stage_one: &'a StageOneResult, bids: &StageTwoBids, costs: &'a CostSchedule) -> Self {
        let n = stage_one.n;
        let horizon = stage_one.horizon();
        let mut totals = Vec::with_capacity(horizon);
        let mut shares = Vec::with_capacity(horizon);
        let mut residuals = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let column: Vec<Money> = (0..n).map(|j| bids.bid(j, k)).collect();
            let total: Money = column.iter().sum();
            let top = &stage_one.winning_bids[k];
            let cost = costs.at(k);
            let mut row_shares = Vec::with_capacity(n);
            let mut row_residuals = Vec::with_capacity(n);
            for j in 0..n {
                let others: Vec<Money> = column
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != j)
                    .map(|(_, v)| v.clone())
                    .collect();
                let share = mu(top, &others, cost);
                let rest = &total - &column[j];
                row_residuals.push(top - rest - &share);
                row_shares.push(share);
            }
            totals.push(total);
            shares.push(row_shares);
            residuals.push(row_residuals);
        }
        PaymentTable {
            stage_one,
            costs,
            totals,
            shares,
            residuals,
        }
    }

    pub fn stage_one(&self) -> &StageOneResult {
        self.stage_one
    }

    pub fn horizon(&self) -> usize {
        self.stage_one.horizon()
    }

    /// Feature at zero-based `index` is reported as worth its winning bid.
    pub fn succeeds(&self, index: usize) -> bool {
        self.totals[index] >= self.stage_one.winning_bids[index]
    }

    pub fn share(&self, index: usize, user: usize) -> &Money {
        &self.shares[index][user]
    }

    pub fn residual(&self, index: usize, user: usize) -> &Money {
        &self.residuals[index][user]
    }

    /// Whether a compensation or fine summand that could enter `user`'s
    /// payment is negative, i.e. the zero clamp can change the result.
    pub fn clamp_exposure(&self, user: usize) -> bool {
        let n = self.stage_one.n;
        (0..self.horizon()).any(|k| {
            if self.stage_one.wins(user, k) {
                (0..n)
                    .filter(|&j| j != user)
                    .any(|j| self.residuals[k][j].is_negative())
            } else {
                self.residuals[k][user].is_negative()
            }
        })
    }
}

/// Largest `G` in `0..=Ḡ` maximizing `Σ_{k≤G} (ib_N(k) - jb̄(k))`.
pub fn compute_k_nwu(bids: &StageTwoBids, stage_one: &StageOneResult) -> usize {
    let mut best = 0;
    let mut best_sum = Money::zero();
    let mut running = Money::zero();
    for k in 0..stage_one.horizon() {
        running = running + bids.total(k) - &stage_one.winning_bids[k];
        if running >= best_sum {
            best = k + 1;
            best_sum = running.clone();
        }
    }
    best
}

/// A winner's adoption thresholds (feature counts) and the counts it may choose.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WinnerInterval {
    /// Last won feature reported strictly above its winning bid, or 0.
    pub lower: usize,
    /// Last won feature reported at or above its winning bid, or 0.
    pub star: usize,
    /// One before the next won feature after `star`, capped at `Ḡ`.
    pub double_star: usize,
    pub permitted: BTreeSet<usize>,
}

pub fn compute_winner_interval(
    user: usize,
    bids: &StageTwoBids,
    stage_one: &StageOneResult,
    k_nwu: usize,
) -> Result<WinnerInterval, MechanismError> {
    let won = stage_one.won_features(user);
    if won.is_empty() {
        return Err(MechanismError::NotAWinner(user));
    }
    let margin = |k: usize| (bids.total(k), &stage_one.winning_bids[k]);
    let lower = won
        .iter()
        .filter(|&&k| {
            let (total, top) = margin(k);
            total > *top
        })
        .max()
        .map_or(0, |k| k + 1);
    let star = won
        .iter()
        .filter(|&&k| {
            let (total, top) = margin(k);
            total >= *top
        })
        .max()
        .map_or(0, |k| k + 1);
    let next_won = won.iter().map(|k| k + 1).find(|&count| count > star);
    let double_star = next_won.map_or(stage_one.horizon(), |count| {
        (count - 1).min(stage_one.horizon())
    });

    let permitted = if (star..=double_star).contains(&k_nwu) {
        (lower..=star).chain(std::iter::once(k_nwu)).collect()
    } else {
        (lower..=double_star).collect()
    };
    Ok(WinnerInterval {
        lower,
        star,
        double_star,
        permitted,
    })
}

/// What a user pays, split into the formula's components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum PaymentBreakdown {
    /// Stage 1 terminated; nothing is owed.
    Idle,
    NonWinner {
        gamma: Money,
        delta: Money,
    },
    Winner {
        alpha1: Money,
        alpha2: Money,
        alpha3: Money,
        alpha4: Money,
    },
}

impl PaymentBreakdown {
    pub fn net(&self) -> Money {
        match self {
            PaymentBreakdown::Idle => Money::zero(),
            PaymentBreakdown::NonWinner { gamma, delta } => gamma - delta,
            PaymentBreakdown::Winner {
                alpha1,
                alpha2,
                alpha3,
                alpha4,
            } => alpha1 + alpha2 - alpha3 + alpha4,
        }
    }

    pub fn role(&self) -> &'static str {
        match self {
            PaymentBreakdown::Idle => "idle",
            PaymentBreakdown::NonWinner { .. } => "non_winner",
            PaymentBreakdown::Winner { .. } => "winner",
        }
    }
}

/// `γ - δ` for a user who won nothing in Stage 1.
pub fn nonwinner_payment(
    user: usize,
    k_nwu: usize,
    table: &PaymentTable<'_>,
) -> Result<PaymentBreakdown, MechanismError> {
    if table.stage_one.is_winner(user) {
        return Err(MechanismError::IsWinner(user));
    }
    let gamma = (0..k_nwu).map(|k| table.share(k, user)).sum();
    let delta = (k_nwu..table.horizon())
        .map(|k| table.residual(k, user).clone().clamp_non_negative())
        .sum();
    Ok(PaymentBreakdown::NonWinner { gamma, delta })
}

/// `L_i^S`: won features up to `k_wu` whose reported total reaches the
/// winning bid (zero-based indices).
pub fn success_set(user: usize, k_wu: usize, table: &PaymentTable<'_>) -> BTreeSet<usize> {
    table
        .stage_one
        .won_features(user)
        .into_iter()
        .filter(|&k| k < k_wu && table.succeeds(k))
        .collect()
}

/// `L_i^F`: the remaining won features (zero-based indices).
pub fn failure_set(user: usize, success: &BTreeSet<usize>, table: &PaymentTable<'_>) -> BTreeSet<usize> {
    table
        .stage_one
        .won_features(user)
        .into_iter()
        .filter(|k| !success.contains(k))
        .collect()
}

/// `α1 + α2 - α3 + α4` for a Stage-1 winner adopting `k_wu` features.
pub fn winner_payment(
    user: usize,
    k_wu: usize,
    table: &PaymentTable<'_>,
) -> Result<PaymentBreakdown, MechanismError> {
    if !table.stage_one.is_winner(user) {
        return Err(MechanismError::NotAWinner(user));
    }
    let n = table.stage_one.n;
    let success = success_set(user, k_wu, table);
    let failure = failure_set(user, &success, table);
    let others = || (0..n).filter(move |&j| j != user);

    let alpha1 = success
        .iter()
        .map(|&k| {
            let covered: Money = others().map(|j| table.share(k, j)).sum();
            table.costs.at(k) - covered
        })
        .sum();
    let alpha2 = (0..k_wu)
        .filter(|k| !success.contains(k))
        .map(|k| table.share(k, user))
        .sum();
    let alpha3 = (k_wu..table.horizon())
        .filter(|k| !failure.contains(k))
        .map(|k| table.residual(k, user).clone().clamp_non_negative())
        .sum();
    let alpha4 = failure
        .iter()
        .flat_map(|&k| others().map(move |j| (k, j)))
        .map(|(k, j)| table.residual(k, j).clone().clamp_non_negative())
        .sum();
    Ok(PaymentBreakdown::Winner {
        alpha1,
        alpha2,
        alpha3,
        alpha4,
    })
}

fn utility_of(scenario: &Scenario, user: usize, adopted: usize, payment: &PaymentBreakdown) -> Money {
    scenario.true_valuations()[user].total_through(adopted) - payment.net()
}

/// The permitted count with the highest true utility for `user`; ties go to
/// the smaller count.
pub fn choose_k_wu(
    user: usize,
    permitted: &BTreeSet<usize>,
    scenario: &Scenario,
    table: &PaymentTable<'_>,
) -> Result<usize, MechanismError> {
    let mut best: Option<(usize, Money)> = None;
    for &count in permitted {
        let payment = winner_payment(user, count, table)?;
        let utility = utility_of(scenario, user, count, &payment);
        if best.as_ref().is_none_or(|(_, u)| utility > *u) {
            best = Some((count, utility));
        }
    }
    Ok(best.map_or(0, |(count, _)| count))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WinnerAdoption {
    pub interval: WinnerInterval,
    pub chosen: usize,
    /// 1-based features in `L^S`.
    pub success: BTreeSet<usize>,
    /// 1-based features in `L^F`.
    pub failure: BTreeSet<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdoptionResult {
    pub k_nwu: usize,
    /// Keyed by zero-based user.
    pub winners: BTreeMap<usize, WinnerAdoption>,
}

/// One user's slice of a Stage-2 evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserOutcome {
    pub adoption: usize,
    pub payment: PaymentBreakdown,
    pub utility: Money,
    pub winner: Option<WinnerAdoption>,
}

fn evaluate_with_table(
    scenario: &Scenario,
    bids: &StageTwoBids,
    table: &PaymentTable<'_>,
    k_nwu: usize,
    user: usize,
) -> Result<UserOutcome, MechanismError> {
    let stage_one = table.stage_one;
    if !stage_one.is_winner(user) {
        let payment = nonwinner_payment(user, k_nwu, table)?;
        return Ok(UserOutcome {
            adoption: k_nwu,
            utility: utility_of(scenario, user, k_nwu, &payment),
            payment,
            winner: None,
        });
    }
    let interval = compute_winner_interval(user, bids, stage_one, k_nwu)?;
    let chosen = choose_k_wu(user, &interval.permitted, scenario, table)?;
    let payment = winner_payment(user, chosen, table)?;
    let success = success_set(user, chosen, table);
    let failure = failure_set(user, &success, table);
    Ok(UserOutcome {
        adoption: chosen,
        utility: utility_of(scenario, user, chosen, &payment),
        payment,
        winner: Some(WinnerAdoption {
            interval,
            chosen,
            success: success.into_iter().map(|k| k + 1).collect(),
            failure: failure.into_iter().map(|k| k + 1).collect(),
        }),
    })
}

fn check_user_count(bids: &StageTwoBids, stage_one: &StageOneResult) -> Result<(), MechanismError> {
    if bids.n() != stage_one.n {
        return Err(BidError::WrongUserCount {
            expected: stage_one.n,
            got: bids.n(),
        }
        .into());
    }
    Ok(())
}

/// Runs Stage 2 for a single user, holding every bid fixed.
pub fn evaluate_user(
    scenario: &Scenario,
    stage_one: &StageOneResult,
    bids: &StageTwoBids,
    user: usize,
) -> Result<UserOutcome, MechanismError> {
    check_user_count(bids, stage_one)?;
    let table = PaymentTable::new(stage_one, bids, scenario.costs());
    let k_nwu = compute_k_nwu(bids, stage_one);
    evaluate_with_table(scenario, bids, &table, k_nwu, user)
}

/// See [`PaymentTable::clamp_exposure`].
pub fn clamp_exposed(scenario: &Scenario, stage_one: &StageOneResult, bids: &StageTwoBids, user: usize) -> bool {
    PaymentTable::new(stage_one, bids, scenario.costs()).clamp_exposure(user)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MechanismOutcome {
    pub stage_one: StageOneOutcome,
    /// 1-based features that get built.
    pub manufactured: BTreeSet<usize>,
    pub manufactured_cost: Money,
    pub adoption: Vec<usize>,
    pub payments: Vec<PaymentBreakdown>,
    pub utilities: Vec<Money>,
    pub detail: Option<AdoptionResult>,
}

impl MechanismOutcome {
    fn idle(n: usize) -> Self {
        MechanismOutcome {
            stage_one: StageOneOutcome::Terminated,
            manufactured: BTreeSet::new(),
            manufactured_cost: Money::zero(),
            adoption: vec![0; n],
            payments: vec![PaymentBreakdown::Idle; n],
            utilities: vec![Money::zero(); n],
            detail: None,
        }
    }

    pub fn total_payments(&self) -> Money {
        self.payments.iter().map(PaymentBreakdown::net).sum()
    }

    /// `Σ payments - Σ_{k built} c(k)`.
    pub fn budget_residual(&self) -> Money {
        self.total_payments() - &self.manufactured_cost
    }
}

/// Stage 2 on a fixed Stage-1 result.
pub fn run_stage_two(
    scenario: &Scenario,
    stage_one: &StageOneResult,
    bids: &StageTwoBids,
) -> Result<MechanismOutcome, MechanismError> {
    check_user_count(bids, stage_one)?;
    let table = PaymentTable::new(stage_one, bids, scenario.costs());
    let k_nwu = compute_k_nwu(bids, stage_one);
    let mut outcome = MechanismOutcome::idle(stage_one.n);
    outcome.stage_one = StageOneOutcome::Proceed(stage_one.clone());
    let mut winners = BTreeMap::new();
    for user in 0..stage_one.n {
        let result = evaluate_with_table(scenario, bids, &table, k_nwu, user)?;
        outcome.adoption[user] = result.adoption;
        outcome.payments[user] = result.payment;
        outcome.utilities[user] = result.utility;
        if let Some(w) = result.winner {
            winners.insert(user, w);
        }
    }
    outcome.manufactured = (0..stage_one.horizon())
        .filter(|&k| table.succeeds(k))
        .map(|k| k + 1)
        .collect();
    outcome.manufactured_cost = outcome
        .manufactured
        .iter()
        .map(|&k| scenario.costs().at(k - 1))
        .sum();
    outcome.detail = Some(AdoptionResult { k_nwu, winners });
    Ok(outcome)
}

/// Both stages end to end.
pub fn run_mechanism(
    scenario: &Scenario,
    stage_one_bids: &StageOneBids,
    stage_two_bids: &StageTwoBids,
) -> Result<MechanismOutcome, MechanismError> {
    match run_stage_one(stage_one_bids, scenario.costs()) {
        StageOneOutcome::Terminated => Ok(MechanismOutcome::idle(scenario.n())),
        StageOneOutcome::Proceed(result) => run_stage_two(scenario, &result, stage_two_bids),
    }
}
