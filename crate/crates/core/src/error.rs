use std::path::PathBuf;

use thiserror::Error;

use crate::placement::Violation;
use crate::topology::TopologyViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("topology generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: u32, reason: String },

    #[error("topology failed validation: {}", summarize(.0))]
    InvalidTopology(Vec<TopologyViolation>),

    #[error("workload does not match topology: {0}")]
    InvalidWorkload(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solution is infeasible ({} violations), cost is undefined", .0.len())]
    Infeasible(Vec<Violation>),

    #[error("mapping for user {0} is missing a routed path")]
    MissingPath(String),

    #[error("no placement serves every request (searched {nodes_expanded} nodes)")]
    NoFeasiblePlacement { nodes_expanded: u64 },

    #[error("search budget exhausted after {nodes_expanded} nodes without a solution")]
    BudgetExhausted { nodes_expanded: u64 },

    #[error("no surrogate has any residual capacity")]
    DegenerateState,

    #[error("scenario {id}, seed {seed}: {source}")]
    Scenario {
        id: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn summarize<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
