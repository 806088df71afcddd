//! Core library for nested Petri nets: model, textual format, validation,
//! token-game semantics, state-space exploration, PROMELA translation and
//! a driver for the SPIN model checker.

pub mod codegen;
pub mod format;
pub mod harness;
pub mod explorer;
pub mod model;
pub mod predicate;
pub mod semantics;
pub mod validate;

pub use format::dsl::{parse, serialize, ParseError};
pub use model::*;
pub use validate::{validate, Diagnostic, Rule};
