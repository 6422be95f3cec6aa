//! Shared inputs for the criterion benchmarks.

use mideu::fixtures::{ex1, ex2};
use mideu::{Model, Policy};

pub struct Case {
    pub name: &'static str,
    pub model: Model,
    pub policy: Policy,
}

/// Both fixture diagrams with their first named policy.
pub fn cases() -> Vec<Case> {
    [("ex1", ex1()), ("ex2", ex2())]
        .into_iter()
        .map(|(name, model)| {
            let policy = model.policies.values().next().expect("fixture has a policy").clone();
            Case { name, model, policy }
        })
        .collect()
}
