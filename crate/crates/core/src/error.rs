use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid diagram: {0}")]
    Invalid(String),
    #[error("cyclic bindings through {0}")]
    CyclicBinding(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("incomplete specification, missing: {}", .0.join(", "))]
    Incomplete(Vec<String>),
    #[error("too many policies: {count} exceeds cap {cap}")]
    TooManyPolicies { count: String, cap: u64 },
    #[error("transform error: {0}")]
    Transform(String),
    #[error("no root for h: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
