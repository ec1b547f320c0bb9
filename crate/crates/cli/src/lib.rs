//! Scenario runner for the viscflow level-I scheme: presets, JSON scenarios,
//! monitor verdicts, refinement tables and third-party audits.

pub mod audit;
pub mod expr;
pub mod refine;
pub mod run;
pub mod scenario;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for validation failures, 1 for anything the user cannot fix in the scenario.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invalid(_) => 2,
            _ => 1,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;
