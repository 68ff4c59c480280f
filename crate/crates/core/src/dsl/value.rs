use std::fmt;

use serde::{Deserialize, Serialize};

/// The three value sorts of the component language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    #[serde(alias = "String")]
    String,
    #[serde(alias = "Int")]
    Int,
    #[serde(alias = "Bool")]
    Bool,
}

impl Sort {
    pub const ALL: [Sort; 3] = [Sort::String, Sort::Int, Sort::Bool];

    pub(crate) fn index(self) -> usize {
        match self {
            Sort::String => 0,
            Sort::Int => 1,
            Sort::Bool => 2,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::String => "string",
            Sort::Int => "int",
            Sort::Bool => "bool",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Str(_) => Sort::String,
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
        }
    }

    pub fn as_ref(&self) -> ValRef<'_> {
        match self {
            Value::Str(s) => ValRef::Str(s),
            Value::Int(n) => ValRef::Int(*n),
            Value::Bool(b) => ValRef::Bool(*b),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// JSON form used by task files and the external target protocol.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Int(n) => serde_json::Value::from(*n),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    pub fn from_json(v: &serde_json::Value, sort: Sort) -> Option<Value> {
        match (sort, v) {
            (Sort::String, serde_json::Value::String(s)) => Some(Value::Str(s.clone())),
            (Sort::Int, serde_json::Value::Number(n)) => n.as_i64().map(Value::Int),
            (Sort::Bool, serde_json::Value::Bool(b)) => Some(Value::Bool(*b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => super::text::write_quoted(f, s),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Borrowed view of a [`Value`]; the evaluator works on these so that
/// enumeration can feed interned strings without cloning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValRef<'a> {
    Str(&'a str),
    Int(i64),
    Bool(bool),
}

impl ValRef<'_> {
    pub fn to_owned(self) -> Value {
        match self {
            ValRef::Str(s) => Value::Str(s.to_owned()),
            ValRef::Int(n) => Value::Int(n),
            ValRef::Bool(b) => Value::Bool(b),
        }
    }
}
