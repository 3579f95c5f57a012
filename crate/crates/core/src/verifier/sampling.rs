//! Seeded generators for random scenarios and sharing-rule evaluation points.

use rand::Rng;

use crate::cost_sharing::{MuPoint, PhiPoint};
use crate::money::Money;
use crate::scenario::{validate_scenario, RawScenario, Scenario};

/// Bounds for [`random_scenario`]. Values are drawn in units of `epsilon`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioSpace {
    pub max_users: usize,
    pub max_features: usize,
    /// Largest single valuation, in increments.
    pub max_value: u64,
    pub epsilon: Money,
}

impl ScenarioSpace {
    pub fn new(max_users: usize, max_features: usize) -> Self {
        ScenarioSpace {
            max_users: max_users.max(2),
            max_features: max_features.max(1),
            max_value: 6,
            epsilon: Money::one(),
        }
    }
}

fn descending<R: Rng>(rng: &mut R, len: usize, top: u64, step: &Money) -> Vec<Money> {
    let mut levels: Vec<u64> = (0..len).map(|_| rng.gen_range(0..=top)).collect();
    levels.sort_unstable_by(|a, b| b.cmp(a));
    levels.into_iter().map(|t| step.times(t)).collect()
}

/// A valid scenario with `n` in `[2, max_users]` and `k_max` in
/// `[1, max_features]`, grid-valued schedules and ascending costs.
/// Every user's joint-benefit estimate is the true joint benefit.
pub fn random_scenario<R: Rng>(rng: &mut R, space: &ScenarioSpace) -> Scenario {
    let n = rng.gen_range(2..=space.max_users);
    let k_max = rng.gen_range(1..=space.max_features);
    let eps = &space.epsilon;
    let true_valuations: Vec<Vec<Money>> =
        (0..n).map(|_| descending(rng, k_max, space.max_value, eps)).collect();
    let joint: Vec<Money> = (0..k_max)
        .map(|k| true_valuations.iter().map(|pb| &pb[k]).sum())
        .collect();
    // Costs span up to two thirds of the largest joint benefit so that
    // terminated, partial and full horizons all occur.
    let cost_top = (n as u64 * space.max_value * 2 / 3).max(1);
    let mut costs = descending(rng, k_max, cost_top, eps);
    costs.reverse();
    validate_scenario(RawScenario {
        n,
        k_max,
        true_valuations,
        joint_estimates: vec![joint; n],
        costs,
        epsilon: eps.clone(),
        seed: rng.gen(),
    })
    .expect("generated scenarios satisfy every invariant")
}

fn half_steps<R: Rng>(rng: &mut R, top: i64) -> Money {
    Money::ratio(rng.gen_range(0..=2 * top), 2)
}

/// φ evaluation points with 1 to 5 users. On the domain the cost never
/// exceeds the sum of values.
pub fn phi_points<R: Rng>(rng: &mut R, count: usize, domain: bool) -> Vec<PhiPoint> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=5);
            let values: Vec<Money> = (0..n).map(|_| half_steps(rng, 10)).collect();
            let cost = if domain {
                let total: Money = values.iter().sum();
                let fraction = Money::ratio(rng.gen_range(0..=8), 8);
                total * fraction
            } else {
                half_steps(rng, 20)
            };
            PhiPoint { values, cost }
        })
        .collect()
}

/// μ evaluation points with 1 to 4 opponents. On the domain the cost never
/// exceeds the reference value.
pub fn mu_points<R: Rng>(rng: &mut R, count: usize, domain: bool) -> Vec<MuPoint> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=4);
            let others: Vec<Money> = (0..n).map(|_| half_steps(rng, 6)).collect();
            let x = half_steps(rng, 20);
            let cost = if domain {
                &x * Money::ratio(rng.gen_range(0..=8), 8)
            } else {
                half_steps(rng, 20)
            };
            MuPoint { x, others, cost }
        })
        .collect()
}
