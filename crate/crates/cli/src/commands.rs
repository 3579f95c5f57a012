use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use costshare::scenario::{load_scenario, validate_scenario, ScenarioDocument, ScenarioFileError, ValidationError};
use costshare::strategies::{play, PlayError, StrategyAssignment, StrategyError};
use costshare::verifier::sampling::{random_scenario, ScenarioSpace};
use costshare::verifier::{verify_instance, VerificationReport, VerifierError, VerifyConfig};
use costshare::Money;

use crate::report::RunReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] ScenarioFileError),
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Play(#[from] PlayError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    /// Every error is an input problem; verification failures are reported,
    /// not raised.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

fn run_document(name: &str, doc: ScenarioDocument, overrides: Option<&[String]>) -> Result<RunReport, CliError> {
    let assignment = StrategyAssignment::resolve(&doc.strategies, overrides)?;
    let scenario = validate_scenario(doc.raw)?;
    let (_, outcome) = play(&scenario, &assignment)?;
    Ok(RunReport::new(name, &assignment, &outcome))
}

pub fn cmd_run(path: &Path, strategies: Option<&[String]>) -> Result<RunReport, CliError> {
    run_document(&label(path), load_scenario(path)?, strategies)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifySource<'a> {
    File(&'a Path),
    /// Up to `users` users and `features` features per instance.
    Random {
        users: usize,
        features: usize,
        seed: u64,
        count: usize,
    },
}

pub fn cmd_verify(source: VerifySource<'_>, config: &VerifyConfig) -> Result<VerificationReport, CliError> {
    match source {
        VerifySource::File(path) => {
            let scenario = validate_scenario(load_scenario(path)?.raw)?;
            let instance = verify_instance(label(path), &scenario, config)?;
            Ok(VerificationReport::new(label(path), config.samples, vec![instance]))
        }
        VerifySource::Random {
            users,
            features,
            seed,
            count,
        } => {
            if users < 2 || features < 1 {
                return Err(CliError::Usage(
                    "--random needs at least 2 users and 1 feature".to_string(),
                ));
            }
            let space = ScenarioSpace::new(users, features);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let instances = (0..count)
                .map(|i| {
                    let scenario = random_scenario(&mut rng, &space);
                    verify_instance(format!("random-{}", i + 1), &scenario, config)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let source = format!("random users<={users} features<={features} seed={seed} count={count}");
            Ok(VerificationReport::new(source, config.samples, instances))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// Multiplies every cost.
    CostScale,
    /// Number of users; template users repeat cyclically.
    Users,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "cost_scale" | "c" => Ok(SweepParam::CostScale),
            "n" => Ok(SweepParam::Users),
            other => Err(CliError::Usage(format!(
                "unknown sweep parameter {other:?} (expected cost_scale or n)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::CostScale => "cost_scale",
            SweepParam::Users => "n",
        }
    }
}

/// `from, from + step, ...` up to and including `to`; empty when `from > to`.
pub fn sweep_points(from: &Money, to: &Money, step: &Money) -> Result<Vec<Money>, CliError> {
    if !step.is_positive() {
        return Err(CliError::Usage("sweep step must be positive".to_string()));
    }
    let mut points = Vec::new();
    let mut value = from.clone();
    while value <= *to {
        points.push(value.clone());
        value = value + step;
    }
    Ok(points)
}

fn apply(template: &ScenarioDocument, param: SweepParam, value: &Money) -> Result<ScenarioDocument, CliError> {
    let mut doc = template.clone();
    match param {
        SweepParam::CostScale => {
            if value.is_negative() {
                return Err(CliError::Usage("cost scale must be non-negative".to_string()));
            }
            doc.raw.costs = doc.raw.costs.iter().map(|c| c * value).collect();
        }
        SweepParam::Users => {
            let n: usize = value
                .to_string()
                .parse()
                .map_err(|_| CliError::Usage(format!("user count {value} is not a non-negative integer")))?;
            let base = template.raw.true_valuations.len();
            if base == 0 {
                return Err(CliError::Usage("template has no users".to_string()));
            }
            doc.raw.n = n;
            doc.raw.true_valuations = (0..n).map(|i| template.raw.true_valuations[i % base].clone()).collect();
            doc.raw.joint_estimates = (0..n).map(|i| template.raw.joint_estimates[i % base].clone()).collect();
            doc.strategies = (0..n).map(|i| template.strategies[i % base].clone()).collect();
        }
    }
    Ok(doc)
}

pub fn cmd_sweep(
    path: &Path,
    param: SweepParam,
    from: &Money,
    to: &Money,
    step: &Money,
) -> Result<Vec<RunReport>, CliError> {
    let template = load_scenario(path)?;
    sweep_points(from, to, step)?
        .into_iter()
        .map(|value| {
            let doc = apply(&template, param, &value)?;
            Ok(run_document(&label(path), doc, None)?.at_point(param.name(), value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_inclusive_and_exact() {
        let pts = sweep_points(&Money::ratio(1, 2), &Money::from_integer(2), &Money::ratio(1, 2)).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3], Money::from_integer(2));
        assert!(sweep_points(&Money::from_integer(3), &Money::from_integer(2), &Money::one())
            .unwrap()
            .is_empty());
        assert!(sweep_points(&Money::zero(), &Money::one(), &Money::zero()).is_err());
    }

    #[test]
    fn users_cycle_through_template() {
        let doc = costshare::scenario::parse_scenario(
            r#"{"n":2,"k_max":1,"epsilon":"1","costs":["1"],"users":[{"pb":["3"]},{"pb":["2"]}]}"#,
        )
        .unwrap();
        let grown = apply(&doc, SweepParam::Users, &Money::from_integer(5)).unwrap();
        assert_eq!(grown.raw.n, 5);
        assert_eq!(grown.raw.true_valuations[4], doc.raw.true_valuations[0]);
        assert!(apply(&doc, SweepParam::Users, &Money::ratio(5, 2)).is_err());
    }
}
