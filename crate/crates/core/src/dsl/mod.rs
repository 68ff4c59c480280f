//! The sorted string/integer/boolean component language: values, programs,
//! total evaluation and the textual program format.

mod components;
mod expr;
mod func;
mod text;
mod value;

use thiserror::Error;

pub use components::{default_component_set, Component, ComponentSet};
pub use expr::{Env, Expr, InputDecl, Node, Signature, MAX_NESTING};
pub use func::Func;
pub use text::{parse_expr, pretty, ParseError, ParseErrorKind};
pub use value::{Sort, ValRef, Value};

#[derive(Debug, Error, PartialEq)]
pub enum DslError {
    #[error("task has no inputs")]
    NoInputs,
    #[error("`{name}` expects {expected} arguments, found {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("sort mismatch in {context}: expected {expected}, found {found}")]
    SortMismatch { context: String, expected: Sort, found: Sort },
    #[error("conditionals are only allowed at the top level and in else branches")]
    NestedConditional,
    #[error("conditional nesting {0} exceeds the maximum of 2")]
    NestingTooDeep(usize),
    #[error("boolean literals are not components")]
    BoolLiteral,
    #[error("inputs may not be boolean: `{0}`")]
    BoolInput(String),
    #[error("invalid input name `{0}`")]
    BadInputName(String),
    #[error("{0}")]
    Components(String),
}
