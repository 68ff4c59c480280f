use super::expr::{Expr, Signature};
use super::func::Func;
use super::value::{Sort, Value};
use super::DslError;

/// A single building block of the hypothesis language. Every component
/// contributes one unit of component size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Component {
    Input { index: usize, name: String, sort: Sort },
    Const(Value),
    Func(Func),
}

impl Component {
    pub fn name(&self) -> String {
        match self {
            Component::Input { name, .. } => name.clone(),
            Component::Const(v) => v.to_string(),
            Component::Func(f) => f.name().to_owned(),
        }
    }

    pub fn arg_sorts(&self) -> &[Sort] {
        match self {
            Component::Func(f) => f.arg_sorts(),
            _ => &[],
        }
    }

    pub fn result_sort(&self) -> Sort {
        match self {
            Component::Input { sort, .. } => *sort,
            Component::Const(v) => v.sort(),
            Component::Func(f) => f.result_sort(),
        }
    }

    /// Leaf components as expressions; `None` for function components.
    pub fn leaf_expr(&self) -> Option<Expr> {
        match self {
            Component::Input { index, name, sort } => Some(Expr::input(*index, name, *sort)),
            Component::Const(v) => Expr::literal(v).ok(),
            Component::Func(_) => None,
        }
    }
}

/// Leaves (inputs first, then constants) and function components, in the
/// order enumeration visits them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSet {
    leaves: Vec<Component>,
    funcs: Vec<Func>,
}

impl ComponentSet {
    pub fn new(leaves: Vec<Component>, funcs: Vec<Func>) -> Result<Self, DslError> {
        let mut names: Vec<String> = Vec::new();
        for c in &leaves {
            if matches!(c, Component::Func(_)) {
                return Err(DslError::Components("function component listed as a leaf".into()));
            }
            if let Component::Const(Value::Bool(_)) = c {
                return Err(DslError::BoolLiteral);
            }
            let n = c.name();
            if names.contains(&n) {
                return Err(DslError::Components(format!("duplicate component `{n}`")));
            }
            names.push(n);
        }
        let mut seen = Vec::new();
        for f in &funcs {
            if seen.contains(f) {
                return Err(DslError::Components(format!("duplicate component `{f}`")));
            }
            seen.push(*f);
        }
        Ok(ComponentSet { leaves, funcs })
    }

    pub fn leaves(&self) -> &[Component] {
        &self.leaves
    }

    pub fn funcs(&self) -> &[Func] {
        &self.funcs
    }

    pub fn len(&self) -> usize {
        self.leaves.len() + self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps only the function components named in `names`; leaves stay.
    pub fn restrict_funcs(&self, names: &[String]) -> Result<Self, DslError> {
        let mut funcs = Vec::new();
        for n in names {
            let f = Func::from_name(n).ok_or_else(|| DslError::Components(format!("unknown component `{n}`")))?;
            if !funcs.contains(&f) {
                funcs.push(f);
            }
        }
        funcs.sort_by_key(|f| Func::ALL.iter().position(|g| g == f));
        Ok(ComponentSet { leaves: self.leaves.clone(), funcs })
    }
}

/// Assembles the standard component set for a task: its inputs, its string
/// constants, its integer constants (always including 0 and 1) and every
/// function component.
pub fn default_component_set(
    sig: &Signature,
    string_constants: &[String],
    int_constants: &[i64],
) -> Result<ComponentSet, DslError> {
    if sig.is_empty() {
        return Err(DslError::NoInputs);
    }
    let mut leaves: Vec<Component> = sig
        .inputs()
        .iter()
        .enumerate()
        .map(|(index, d)| Component::Input { index, name: d.name.clone(), sort: d.sort })
        .collect();
    let mut strs: Vec<&String> = Vec::new();
    for s in string_constants {
        if !strs.contains(&s) {
            strs.push(s);
        }
    }
    leaves.extend(strs.into_iter().map(|s| Component::Const(Value::Str(s.clone()))));
    let mut ints: Vec<i64> = int_constants.iter().copied().chain([0, 1]).collect();
    ints.sort_unstable();
    ints.dedup();
    leaves.extend(ints.into_iter().map(|n| Component::Const(Value::Int(n))));
    ComponentSet::new(leaves, Func::ALL.to_vec())
}
