use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::func::Func;
use super::value::{Sort, Value};
use super::DslError;

/// Conditionals may nest at most this deep, and only through the else branch.
pub const MAX_NESTING: usize = 2;

/// Declared input arguments of a task, in positional order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDecl {
    pub name: String,
    pub sort: Sort,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    inputs: Vec<InputDecl>,
}

impl Signature {
    pub fn new(inputs: Vec<InputDecl>) -> Result<Self, DslError> {
        for (i, d) in inputs.iter().enumerate() {
            if d.sort == Sort::Bool {
                return Err(DslError::BoolInput(d.name.clone()));
            }
            if d.name.is_empty() || d.name.starts_with(|c: char| c.is_ascii_digit() || c == '"' || c == '-') {
                return Err(DslError::BadInputName(d.name.clone()));
            }
            if inputs[..i].iter().any(|o| o.name == d.name) || Func::from_name(&d.name).is_some() || d.name == "if" {
                return Err(DslError::BadInputName(d.name.clone()));
            }
        }
        Ok(Signature { inputs })
    }

    /// Shorthand for tests and tasks with string inputs only.
    pub fn strings(names: &[&str]) -> Self {
        Signature::new(names.iter().map(|n| InputDecl { name: (*n).to_owned(), sort: Sort::String }).collect())
            .expect("valid string signature")
    }

    pub fn inputs(&self) -> &[InputDecl] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|d| d.name == name)
    }

    pub fn input_expr(&self, index: usize) -> Expr {
        let d = &self.inputs[index];
        Expr::input(index, &d.name, d.sort)
    }

    pub fn accepts(&self, env: &Env) -> bool {
        env.0.len() == self.inputs.len() && env.0.iter().zip(&self.inputs).all(|(v, d)| v.sort() == d.sort)
    }
}

/// Positional input bindings, aligned with a [`Signature`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Env(pub Vec<Value>);

impl Env {
    pub fn get(&self, index: usize) -> &Value {
        &self.0[index]
    }

    pub fn to_json(&self, sig: &Signature) -> serde_json::Value {
        let map = sig.inputs().iter().zip(&self.0).map(|(d, v)| (d.name.clone(), v.to_json())).collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value, sig: &Signature) -> Option<Env> {
        let obj = v.as_object()?;
        if obj.len() != sig.len() {
            return None;
        }
        sig.inputs().iter().map(|d| Value::from_json(obj.get(&d.name)?, d.sort)).collect::<Option<Vec<_>>>().map(Env)
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Input { index: usize, name: Arc<str>, sort: Sort },
    Str(String),
    Int(i64),
    App { func: Func, args: Vec<Expr> },
    If { cond: Expr, then: Expr, els: Expr },
}

/// An immutable, well-sorted program. Cloning is cheap: subtrees are shared.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn input(index: usize, name: &str, sort: Sort) -> Expr {
        Expr(Arc::new(Node::Input { index, name: name.into(), sort }))
    }

    pub fn str_lit(s: impl Into<String>) -> Expr {
        Expr(Arc::new(Node::Str(s.into())))
    }

    pub fn int_lit(n: i64) -> Expr {
        Expr(Arc::new(Node::Int(n)))
    }

    pub fn literal(v: &Value) -> Result<Expr, DslError> {
        match v {
            Value::Str(s) => Ok(Expr::str_lit(s.clone())),
            Value::Int(n) => Ok(Expr::int_lit(*n)),
            Value::Bool(_) => Err(DslError::BoolLiteral),
        }
    }

    pub fn app(func: Func, args: Vec<Expr>) -> Result<Expr, DslError> {
        if args.len() != func.arity() {
            return Err(DslError::Arity { name: func.name().into(), expected: func.arity(), found: args.len() });
        }
        for (pos, (a, &want)) in args.iter().zip(func.arg_sorts()).enumerate() {
            if a.sort() != want {
                return Err(DslError::SortMismatch {
                    context: format!("argument {} of {}", pos + 1, func.name()),
                    expected: want,
                    found: a.sort(),
                });
            }
            if a.conditions() > 0 {
                return Err(DslError::NestedConditional);
            }
        }
        Ok(Expr::app_unchecked(func, args))
    }

    /// Caller guarantees arity and argument sorts.
    pub(crate) fn app_unchecked(func: Func, args: Vec<Expr>) -> Expr {
        Expr(Arc::new(Node::App { func, args }))
    }

    /// Builds `if cond then then else els`. The then branch must be
    /// condition-free and the total nesting may not exceed [`MAX_NESTING`].
    pub fn ite(cond: Expr, then: Expr, els: Expr) -> Result<Expr, DslError> {
        if cond.sort() != Sort::Bool {
            return Err(DslError::SortMismatch {
                context: "if condition".into(),
                expected: Sort::Bool,
                found: cond.sort(),
            });
        }
        if then.sort() != els.sort() {
            return Err(DslError::SortMismatch {
                context: "else branch".into(),
                expected: then.sort(),
                found: els.sort(),
            });
        }
        if cond.conditions() > 0 || then.conditions() > 0 {
            return Err(DslError::NestedConditional);
        }
        if els.conditions() + 1 > MAX_NESTING {
            return Err(DslError::NestingTooDeep(els.conditions() + 1));
        }
        Ok(Expr::ite_unchecked(cond, then, els))
    }

    pub(crate) fn ite_unchecked(cond: Expr, then: Expr, els: Expr) -> Expr {
        Expr(Arc::new(Node::If { cond, then, els }))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn sort(&self) -> Sort {
        match self.node() {
            Node::Input { sort, .. } => *sort,
            Node::Str(_) => Sort::String,
            Node::Int(_) => Sort::Int,
            Node::App { func, .. } => func.result_sort(),
            Node::If { then, .. } => then.sort(),
        }
    }

    /// Number of non-conditional component nodes.
    pub fn component_size(&self) -> usize {
        match self.node() {
            Node::Input { .. } | Node::Str(_) | Node::Int(_) => 1,
            Node::App { args, .. } => 1 + args.iter().map(Expr::component_size).sum::<usize>(),
            Node::If { cond, then, els } => cond.component_size() + then.component_size() + els.component_size(),
        }
    }

    /// Number of conditional nodes along the else spine (0 for straight-line).
    pub fn conditions(&self) -> usize {
        match self.node() {
            Node::If { els, .. } => 1 + els.conditions(),
            _ => 0,
        }
    }

    /// Total evaluation. `env` must match the signature the expression was
    /// built against.
    pub fn eval(&self, env: &Env) -> Value {
        match self.node() {
            Node::Input { index, .. } => env.get(*index).clone(),
            Node::Str(s) => Value::Str(s.clone()),
            Node::Int(n) => Value::Int(*n),
            Node::App { func, args } => {
                let vals: Vec<Value> = args.iter().map(|a| a.eval(env)).collect();
                let refs: Vec<_> = vals.iter().map(Value::as_ref).collect();
                func.apply(&refs)
            }
            Node::If { cond, then, els } => match cond.eval(env) {
                Value::Bool(true) => then.eval(env),
                _ => els.eval(env),
            },
        }
    }

    /// True if every input index used by the expression is declared with the
    /// same sort in `sig`.
    pub fn fits(&self, sig: &Signature) -> bool {
        match self.node() {
            Node::Input { index, sort, name } => {
                sig.inputs().get(*index).is_some_and(|d| d.sort == *sort && *d.name == **name)
            }
            Node::Str(_) | Node::Int(_) => true,
            Node::App { args, .. } => args.iter().all(|a| a.fits(sig)),
            Node::If { cond, then, els } => cond.fits(sig) && then.fits(sig) && els.fits(sig),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}
