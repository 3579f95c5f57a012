//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use costshare::cost_sharing::{
    check_mu_properties, check_phi_monotonicity, check_pi_axioms, mu, phi, Property, PropertyReport,
};
use costshare::mechanism::{evaluate_user, run_mechanism, run_stage_one, PaymentBreakdown, StageOneResult, StageTwoBids};
use costshare::scenario::{feasible_horizon, validate_scenario, RawScenario, Scenario};
use costshare::strategies::{build_equilibrium_profile, lemma3_stage2};
use costshare::verifier::sampling::{mu_points, phi_points, random_scenario, ScenarioSpace};
use costshare::verifier::{audit_equilibrium, best_response_stage2, check_lemma1, AuditReport, BidGrid, LemmaConfig};
use costshare::Money;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn int(v: i64) -> Money {
    Money::from_integer(v)
}

/// Largest 1-based feature whose joint value strictly exceeds its cost,
/// scanning every feature.
fn horizon_by_definition(s: &Scenario) -> usize {
    (0..s.k_max())
        .filter(|&k| s.total_true_value(k) > *s.costs().at(k))
        .map(|k| k + 1)
        .max()
        .unwrap_or(0)
}

fn worked_regression() -> Outcome {
    let m = |v: &[i64]| v.iter().map(|&x| int(x)).collect::<Vec<_>>();
    let s = validate_scenario(RawScenario {
        n: 3,
        k_max: 2,
        true_valuations: vec![m(&[5, 4]), m(&[4, 3]), m(&[3, 2])],
        joint_estimates: vec![Vec::new(); 3],
        costs: m(&[4, 6]),
        epsilon: int(1),
        seed: 0,
    })
    .unwrap();
    let (one, two) = build_equilibrium_profile(&s);
    let out = run_mechanism(&s, &one, &two).unwrap();
    let pay: Vec<Money> = out.payments.iter().map(PaymentBreakdown::net).collect();
    let want_pay = vec![Money::ratio(13, 3), Money::ratio(10, 3), Money::ratio(7, 3)];
    let want_util = vec![Money::ratio(14, 3), Money::ratio(11, 3), Money::ratio(8, 3)];
    let pass = pay == want_pay
        && out.utilities == want_util
        && out.manufactured == BTreeSet::from([1, 2])
        && out.budget_residual().is_zero();
    let shown: Vec<String> = pay.iter().map(Money::to_string).collect();
    outcome(
        pass,
        format!(
            "payments ({}), residual {}",
            shown.join(", "),
            out.budget_residual()
        ),
    )
}

/// 200 instances, n in [2,5], k_max in [1,4]; alternate instances use a
/// half-unit grid.
fn equilibrium_instances() -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let whole = ScenarioSpace::new(5, 4);
    let half = ScenarioSpace {
        epsilon: Money::ratio(1, 2),
        max_value: 12,
        ..ScenarioSpace::new(5, 4)
    };
    (0..200)
        .map(|i| random_scenario(&mut rng, if i % 2 == 0 { &whole } else { &half }))
        .collect()
}

fn audits(instances: &[Scenario]) -> Vec<AuditReport> {
    instances.iter().map(|s| audit_equilibrium(s).unwrap()).collect()
}

fn budget_balance(reports: &[AuditReport]) -> Outcome {
    let bad = reports.iter().filter(|r| !r.budget_residual.is_zero()).count();
    let terminated = reports.iter().filter(|r| r.terminated).count();
    outcome(
        bad == 0,
        format!("{} instances ({terminated} terminated), {bad} non-zero residuals", reports.len()),
    )
}

fn individual_rationality(reports: &[AuditReport]) -> Outcome {
    let users: usize = reports.iter().map(|r| r.utilities.len()).sum();
    let bad: usize = reports.iter().map(|r| r.ir_violations.len()).sum();
    outcome(bad == 0, format!("{users} users, {bad} with negative utility"))
}

fn efficiency(instances: &[Scenario], reports: &[AuditReport]) -> Outcome {
    let bad = instances
        .iter()
        .zip(reports)
        .filter(|(s, r)| {
            let f = horizon_by_definition(s);
            r.manufactured.len() != f || r.manufactured != (1..=f).collect::<BTreeSet<_>>()
        })
        .count();
    outcome(bad == 0, format!("{} instances, {bad} with |built| != F", instances.len()))
}

/// 20 instances with n <= 3, k_max <= 2, values on the unit grid up to 6,
/// where Stage 1 proceeds under the canonical profile.
fn oracle_instances() -> Vec<(Scenario, StageOneResult, StageTwoBids)> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let space = ScenarioSpace::new(3, 2);
    let mut out = Vec::new();
    while out.len() < 20 {
        let s = random_scenario(&mut rng, &space);
        let (one, two) = build_equilibrium_profile(&s);
        if let Some(r) = run_stage_one(&one, s.costs()).result().cloned() {
            out.push((s, r, two));
        }
    }
    out
}

fn oracle_grid() -> BidGrid {
    BidGrid::new(int(1), int(8)).unwrap()
}

fn non_winner_oracle(instances: &[(Scenario, StageOneResult, StageTwoBids)]) -> Outcome {
    let grid = oracle_grid();
    let (mut users, mut comparisons, mut ties, mut violations, mut clamp) = (0, 0, 0, 0, 0);
    let mut strict = 0;
    for (i, (s, r, two)) in instances.iter().enumerate() {
        let config = LemmaConfig {
            samples: 50,
            seed: i as u64,
            max_examples: 1,
        };
        let report = check_lemma1(s, r, two, &grid, &config).unwrap();
        // The canonical profile itself must leave truthful in the argmax.
        for &user in &report.users {
            let br = best_response_stage2(user - 1, s, two, r, &grid).unwrap();
            if br.truthful_utility != br.utility {
                violations += 1;
            }
        }
        users += report.users.len();
        comparisons += report.comparisons;
        ties += report.ties;
        violations += report.violations - report.clamp_attributed;
        clamp += report.clamp_attributed;
        strict += usize::from(report.strictly_better_somewhere == Some(true));
    }
    outcome(
        violations == 0,
        format!(
            "{users} non-winners, {comparisons} deviations, {violations} violations, \
             {clamp} clamp-attributed, {ties} ties, strictly better on {strict}/{} instances",
            instances.len()
        ),
    )
}

fn winner_oracle(instances: &[(Scenario, StageOneResult, StageTwoBids)]) -> Outcome {
    let grid = oracle_grid();
    let (mut winners, mut misses, mut tie_sets) = (0, 0, 0);
    for (s, r, two) in instances {
        for user in (0..s.n()).filter(|&u| r.is_winner(u)) {
            winners += 1;
            let schedule = lemma3_stage2(user, r, s);
            let attained = evaluate_user(s, r, &two.with_user(user, schedule.clone()), user)
                .unwrap()
                .utility;
            let best = best_response_stage2(user, s, two, r, &grid).unwrap();
            if attained != best.utility || !best.argmax.contains(&schedule) {
                misses += 1;
            }
            tie_sets += usize::from(best.argmax.len() > 1);
        }
    }
    outcome(
        misses == 0,
        format!("{winners} winners, {misses} outside the argmax, {tie_sets} with tied maximizers"),
    )
}

fn sharing_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut evaluations = 0;
    let mut failures = Vec::new();

    // φ: equivariance under random permutations and exact budget balance.
    for point in phi_points(&mut rng, 400, false) {
        evaluations += 1;
        let shares = phi(&point.values, &point.cost);
        let mut order: Vec<usize> = (0..point.values.len()).collect();
        order.shuffle(&mut rng);
        let values: Vec<Money> = order.iter().map(|&i| point.values[i].clone()).collect();
        let moved = phi(&values, &point.cost);
        if order.iter().enumerate().any(|(pos, &i)| moved.0[pos] != shares.0[i]) {
            failures.push("anonymity");
        }
        if shares.total() != point.cost {
            failures.push("budget balance");
        }
    }
    // π: budget balance and core bounds over the feasible prefix.
    let space = ScenarioSpace::new(5, 4);
    let mut pi_checked = 0;
    while pi_checked < 300 {
        let s = random_scenario(&mut rng, &space);
        let report = check_pi_axioms(s.true_valuations(), s.costs(), feasible_horizon(&s)).unwrap();
        evaluations += 1;
        pi_checked += 1;
        if !report.is_clean() {
            failures.push("pi axioms");
        }
    }

    // μ: zero branch on and off the domain.
    for point in mu_points(&mut rng, 300, false) {
        evaluations += 1;
        let rest: Money = point.others.iter().sum();
        if rest > point.x && !mu(&point.x, &point.others, &point.cost).is_zero() {
            failures.push("mu zero branch");
        }
    }

    // Cross-check with the library's own checkers on a fresh sample.
    let extra = check_phi_monotonicity(&phi_points(&mut rng, 50, true), &Money::one());
    for property in [Property::Anonymity, Property::BudgetBalance] {
        if extra.violations_of(property) > 0 {
            failures.push("phi checker");
        }
    }

    outcome(
        failures.is_empty(),
        format!("{evaluations} evaluations, {} failures {:?}", failures.len(), failures),
    )
}

fn mu_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lambdas = [Money::ratio(1, 2), Money::one(), int(2)];
    let points = mu_points(&mut rng, 1000, true);
    let mut on_domain = PropertyReport::default();
    for (i, chunk) in points.chunks(100).enumerate() {
        on_domain.merge(check_mu_properties(chunk, &lambdas[i % lambdas.len()]));
    }
    let off_points = mu_points(&mut rng, 1000, false);
    let mut off_domain = PropertyReport::default();
    for (i, chunk) in off_points.chunks(100).enumerate() {
        off_domain.merge(check_mu_properties(chunk, &lambdas[i % lambdas.len()]));
    }
    let artifact = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("mu_counterexamples.json");
    let dump = serde_json::json!({
        "on_domain": on_domain.counterexamples,
        "off_domain": off_domain.counterexamples,
    });
    let written = std::fs::write(&artifact, serde_json::to_string_pretty(&dump).unwrap()).is_ok();
    outcome(
        on_domain.is_clean() && written,
        format!(
            "1000 points with cost <= x: {} checks, {} violations; off-domain 1000 points: {} violations \
             (A1>=B1 {}, B1>=C1 {}, D1<=E1 {}); artifact {}",
            on_domain.checked,
            on_domain.counterexamples.len(),
            off_domain.counterexamples.len(),
            off_domain.violations_of(Property::MuOpponentUpper),
            off_domain.violations_of(Property::MuOpponentLower),
            off_domain.violations_of(Property::MuJointShift),
            artifact.display()
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_costshare"))
            .args(["verify", "--random", "4", "3", "42", "25"])
            .output()
            .expect("binary runs")
    };
    let a = run();
    let b = run();
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(
        same && a.status.code() == Some(0),
        format!(
            "{} bytes, identical: {same}, exit {:?}",
            a.stdout.len(),
            a.status.code()
        ),
    )
}

fn report(number: usize, name: &str, limit: Duration, started: Instant, result: Outcome) -> bool {
    let elapsed = started.elapsed();
    let pass = result.pass && elapsed <= limit;
    println!(
        "[{}] {number}. {name} ({:.2}s, limit {}s): {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        result.detail
    );
    pass
}

fn main() -> ExitCode {
    let minute = Duration::from_secs(60);
    let mut all = true;

    let t = Instant::now();
    all &= report(1, "worked scenario regression", Duration::from_secs(1), t, worked_regression());

    let t = Instant::now();
    let instances = equilibrium_instances();
    let reports = audits(&instances);
    all &= report(2, "budget balance", Duration::from_secs(30), t, budget_balance(&reports));
    let t = Instant::now();
    all &= report(3, "individual rationality", Duration::from_secs(30), t, individual_rationality(&reports));
    let t = Instant::now();
    all &= report(4, "efficiency", Duration::from_secs(30), t, efficiency(&instances, &reports));

    let t = Instant::now();
    let oracle = oracle_instances();
    all &= report(5, "non-winner truthfulness oracle", 2 * minute, t, non_winner_oracle(&oracle));
    let t = Instant::now();
    all &= report(6, "winner residual bid oracle", 2 * minute, t, winner_oracle(&oracle));

    let t = Instant::now();
    all &= report(7, "cost-sharing axioms", Duration::from_secs(10), t, sharing_axioms());
    let t = Instant::now();
    all &= report(8, "auxiliary share inequalities", Duration::from_secs(10), t, mu_properties());

    let t = Instant::now();
    all &= report(9, "verification determinism", 5 * minute, t, determinism());

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
