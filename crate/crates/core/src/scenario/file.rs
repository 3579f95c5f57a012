//! JSON scenario documents.
//!
//! ```json
//! {
//!   "n": 3, "k_max": 2, "epsilon": "1", "seed": 7,
//!   "costs": ["4", "6"],
//!   "users": [
//!     {"pb": ["5", "4"], "jb": ["12", "9"]},
//!     {"pb": ["4", "3"], "jb": ["0"], "strategy": "truthful"},
//!     {"pb": ["3", "2"], "strategy": "fixed", "stage1": ["0"], "stage2": ["3", "2"]}
//!   ]
//! }
//! ```
//!
//! Money is always a quoted decimal or fraction string; JSON numbers in a
//! money position are a parse error.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RawScenario;
use crate::money::Money;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserEntry {
    pb: Vec<Money>,
    #[serde(default)]
    jb: Vec<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage1: Option<Vec<Money>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage2: Option<Vec<Money>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    n: usize,
    k_max: usize,
    epsilon: Money,
    #[serde(default)]
    seed: u64,
    costs: Vec<Money>,
    users: Vec<UserEntry>,
}

/// A user's strategy as written in the scenario file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyDecl {
    pub name: String,
    pub stage1: Option<Vec<Money>>,
    pub stage2: Option<Vec<Money>>,
}

/// A parsed but not yet validated scenario file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioDocument {
    pub raw: RawScenario,
    /// One entry per user; `None` where the file names no strategy.
    pub strategies: Vec<Option<StrategyDecl>>,
}

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("scenario file not found: {0}")]
    NotFound(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub fn parse_scenario(text: &str) -> Result<ScenarioDocument, ScenarioFileError> {
    let doc: ScenarioJson = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        ScenarioFileError::Parse {
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })?;
    let strategies = doc
        .users
        .iter()
        .map(|u| {
            let explicit = u.strategy.is_some() || u.stage1.is_some() || u.stage2.is_some();
            explicit.then(|| StrategyDecl {
                name: u.strategy.clone().unwrap_or_else(|| "fixed".to_string()),
                stage1: u.stage1.clone(),
                stage2: u.stage2.clone(),
            })
        })
        .collect();
    let raw = RawScenario {
        n: doc.n,
        k_max: doc.k_max,
        true_valuations: doc.users.iter().map(|u| u.pb.clone()).collect(),
        joint_estimates: doc.users.iter().map(|u| u.jb.clone()).collect(),
        costs: doc.costs,
        epsilon: doc.epsilon,
        seed: doc.seed,
    };
    Ok(ScenarioDocument { raw, strategies })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioDocument, ScenarioFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ScenarioFileError::NotFound(path.display().to_string())
        } else {
            ScenarioFileError::Io {
                path: path.display().to_string(),
                source,
            }
        }
    })?;
    parse_scenario(&text)
}

impl ScenarioDocument {
    /// Serializes back to the file format.
    pub fn to_json(&self) -> String {
        let users = self
            .raw
            .true_valuations
            .iter()
            .zip(&self.raw.joint_estimates)
            .enumerate()
            .map(|(i, (pb, jb))| {
                let decl = self.strategies.get(i).cloned().flatten();
                UserEntry {
                    pb: pb.clone(),
                    jb: jb.clone(),
                    strategy: decl.as_ref().map(|d| d.name.clone()),
                    stage1: decl.as_ref().and_then(|d| d.stage1.clone()),
                    stage2: decl.and_then(|d| d.stage2),
                }
            })
            .collect();
        let doc = ScenarioJson {
            n: self.raw.n,
            k_max: self.raw.k_max,
            epsilon: self.raw.epsilon.clone(),
            seed: self.raw.seed,
            costs: self.raw.costs.clone(),
            users,
        };
        serde_json::to_string_pretty(&doc).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::money;

    const W: &str = r#"{
        "n": 3, "k_max": 2, "epsilon": "1", "seed": 7,
        "costs": ["4", "6"],
        "users": [
            {"pb": ["5", "4"], "jb": ["12", "9"]},
            {"pb": ["4", "3"], "strategy": "truthful"},
            {"pb": ["3", "2"], "stage1": ["0"], "stage2": ["3", "2.0"]}
        ]
    }"#;

    #[test]
    fn parses_worked_document() {
        let doc = parse_scenario(W).unwrap();
        assert_eq!(doc.raw.n, 3);
        assert_eq!(doc.raw.costs, vec![money("4"), money("6")]);
        assert_eq!(doc.raw.joint_estimates[1], Vec::<Money>::new());
        assert_eq!(doc.strategies[0], None);
        assert_eq!(doc.strategies[1].as_ref().unwrap().name, "truthful");
        let fixed = doc.strategies[2].as_ref().unwrap();
        assert_eq!(fixed.name, "fixed");
        assert_eq!(fixed.stage2.as_ref().unwrap()[1], money("2"));
    }

    #[test]
    fn float_money_rejected_with_location() {
        let text = "{\"n\": 2, \"k_max\": 1, \"epsilon\": \"1\",\n \"costs\": [4.5], \"users\": []}";
        match parse_scenario(text) {
            Err(ScenarioFileError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("quoted decimal"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_scenario("{\"n\": 2,\n  oops}").unwrap_err();
        assert!(matches!(err, ScenarioFileError::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_file() {
        let err = load_scenario("/definitely/not/here.json").unwrap_err();
        assert!(matches!(err, ScenarioFileError::NotFound(_)));
    }

    #[test]
    fn document_round_trips() {
        let doc = parse_scenario(W).unwrap();
        let again = parse_scenario(&doc.to_json()).unwrap();
        assert_eq!(doc, again);
    }
}
