//! Textual net format and JSON exports.

pub mod dsl;
pub mod json;
