//! Symbolic expected-utility polynomials for multiplicative influence diagrams.

pub mod asymmetry;
pub mod config;
pub mod error;
pub mod eu;
pub mod expr;
pub mod fixtures;
pub mod mid;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod poly;
pub mod rational;
pub mod sensitivity;
pub mod structure;
pub mod transforms;

pub use error::{Error, Result};
pub use eu::{symbolic_eu, symbolic_eu_until, EUVector, EvaluationTrace, Evaluator};
pub use mid::{Mid, NodeKind};
pub use model::{parse_model, Model, ModelDocument};
pub use policy::{enumerate_policies, Policy};
pub use poly::{Indeterminate, Monomial, Polynomial, StructureSummary};
pub use rational::Rational;
