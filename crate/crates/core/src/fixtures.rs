//! Bundled reference diagrams.

use crate::model::{parse_model, Model};

pub const EX1_JSON: &str = include_str!("../fixtures/ex1.json");
pub const EX2_JSON: &str = include_str!("../fixtures/ex2.json");

/// Six-node diagram with two decisions in extensive form.
pub fn ex1() -> Model {
    parse_model(EX1_JSON).expect("bundled fixture is valid")
}

/// `ex1` without the edge `Y2 -> Y4`.
pub fn ex2() -> Model {
    parse_model(EX2_JSON).expect("bundled fixture is valid")
}
