//! Bottom-up enumeration plus unification as a sizable synthesis engine.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dsl::{ComponentSet, Expr, Sort, Value, MAX_NESTING};
use crate::enumerate::{Enumeration, DEFAULT_MAX_ENTRIES};
use crate::error::{Error, Result};
use crate::guarantee::{HypothesisSize, SynthesisEngine};
use crate::oracle::Example;
use crate::unify::{cluster, BoolClusters, ClusterMaps, GammaMode, Unifier};

/// A synthesized program with its ordering metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub text: String,
    pub tier: usize,
    pub component_size: usize,
    #[serde(skip)]
    pub expr: Option<Expr>,
}

impl Program {
    pub fn from_expr(expr: Expr) -> Self {
        Program {
            text: expr.to_string(),
            tier: expr.conditions(),
            component_size: expr.component_size(),
            expr: Some(expr),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StunConfig {
    pub max_size: usize,
    /// Maximum number of conditionals (0, 1 or 2).
    pub tier: usize,
    pub max_entries: usize,
    pub gamma: GammaMode,
}

impl StunConfig {
    pub fn new(max_size: usize, tier: usize) -> Self {
        StunConfig { max_size, tier, max_entries: DEFAULT_MAX_ENTRIES, gamma: GammaMode::Refined }
    }
}

struct State {
    maps: ClusterMaps,
    bools: BoolClusters,
    /// Consistent counts with exactly `i` conditionals, `i = 0..=tier`.
    by_conditions: Vec<HypothesisSize>,
    pick: OnceLock<Option<Program>>,
}

/// Enumerates straight-line programs on the current example inputs, clusters
/// them by consistency and counts (and picks from) the tier's space.
pub struct StunEngine {
    components: Arc<ComponentSet>,
    output: Sort,
    config: StunConfig,
    state: Option<State>,
}

impl StunEngine {
    pub fn new(components: Arc<ComponentSet>, output: Sort, config: StunConfig) -> Result<Self> {
        if config.tier > MAX_NESTING {
            return Err(Error::NestingBeyondMax(config.tier));
        }
        Ok(StunEngine { components, output, config, state: None })
    }

    /// One engine per tier `0..=max_nesting`.
    pub fn tiers(
        components: Arc<ComponentSet>,
        output: Sort,
        max_size: usize,
        max_nesting: usize,
    ) -> Result<Vec<Self>> {
        (0..=max_nesting).map(|t| StunEngine::new(components.clone(), output, StunConfig::new(max_size, t))).collect()
    }

    pub fn config(&self) -> &StunConfig {
        &self.config
    }

    pub fn set_max_entries(&mut self, cap: usize) {
        self.config.max_entries = cap;
    }

    /// Consistent counts with exactly `i` conditionals for each `i` up to the
    /// tier. Empty before the first update.
    pub fn sizes_by_conditions(&self) -> &[HypothesisSize] {
        self.state.as_ref().map_or(&[], |s| &s.by_conditions)
    }

    /// Cumulative sizes of H0, H1, ... up to this engine's tier.
    pub fn tier_sizes(&self) -> Vec<HypothesisSize> {
        let mut acc = num_bigint::BigUint::default();
        self.sizes_by_conditions()
            .iter()
            .map(|s| {
                acc += s.as_biguint();
                HypothesisSize::from(acc.clone())
            })
            .collect()
    }

    fn analyze(&self, inputs: Vec<crate::dsl::Env>, outputs: &[Value]) -> Result<State> {
        let table =
            Enumeration::with_cap(self.components.clone(), inputs, self.config.max_size, self.config.max_entries)?;
        let maps = cluster(&table, self.output, outputs);
        let bools = BoolClusters::new(&table);
        let mut u = Unifier::with_mode(&maps, &bools, self.config.gamma);
        let goal = crate::unify::Pattern::all_correct(outputs.len());
        let by_conditions =
            (0..=self.config.tier).map(|i| u.count(&goal, i).map(HypothesisSize::from)).collect::<Result<Vec<_>>>()?;
        drop(u);
        Ok(State { maps, bools, by_conditions, pick: OnceLock::new() })
    }
}

impl SynthesisEngine for StunEngine {
    type Example = Example;
    type Program = Program;

    fn update_hypothesis(&mut self, examples: &[Example]) -> Result<()> {
        for e in examples {
            if e.output.sort() != self.output {
                return Err(Error::InvalidParams(format!(
                    "example output {} is not of sort {}",
                    e.output, self.output
                )));
            }
        }
        let inputs = examples.iter().map(|e| e.inputs.clone()).collect();
        let outputs: Vec<Value> = examples.iter().map(|e| e.output.clone()).collect();
        self.state = Some(self.analyze(inputs, &outputs)?);
        Ok(())
    }

    fn compute_size(&self) -> HypothesisSize {
        self.tier_sizes().pop().unwrap_or_else(HypothesisSize::zero)
    }

    fn pick_program(&self) -> Option<Program> {
        let state = self.state.as_ref()?;
        state
            .pick
            .get_or_init(|| {
                let mut u = Unifier::with_mode(&state.maps, &state.bools, self.config.gamma);
                u.unify_pick(self.config.tier).ok().flatten().map(|c| Program::from_expr(c.expr))
            })
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Component, Env, Func};

    fn swap_engine(tier: usize) -> StunEngine {
        let leaves = vec![
            Component::Input { index: 0, name: "x".into(), sort: Sort::String },
            Component::Const(Value::Str("a".into())),
            Component::Const(Value::Str("b".into())),
        ];
        let comps = Arc::new(ComponentSet::new(leaves, vec![Func::StrEq]).unwrap());
        StunEngine::new(comps, Sort::String, StunConfig::new(3, tier)).unwrap()
    }

    fn ex(i: &str, o: &str) -> Example {
        Example { inputs: Env(vec![Value::Str(i.into())]), output: Value::Str(o.into()) }
    }

    #[test]
    fn swap_tiers() {
        let examples = [ex("a", "b"), ex("b", "a")];
        let mut e0 = swap_engine(0);
        e0.update_hypothesis(&examples).unwrap();
        assert!(e0.compute_size().is_zero());
        assert_eq!(e0.pick_program(), None);

        let mut e1 = swap_engine(1);
        e1.update_hypothesis(&examples).unwrap();
        assert_eq!(e1.compute_size(), HypothesisSize::from(4u32));
        let p = e1.pick_program().unwrap();
        assert_eq!(p.text, r#"(if (= x "a") "b" "a")"#);
        assert_eq!((p.tier, p.component_size), (1, 5));
    }

    #[test]
    fn zero_examples_counts_everything() {
        let mut e = swap_engine(0);
        e.update_hypothesis(&[]).unwrap();
        assert_eq!(e.compute_size(), HypothesisSize::from(3u32));
    }

    #[test]
    fn rejects_deep_tier() {
        assert!(StunEngine::new(
            Arc::new(ComponentSet::new(vec![], vec![]).unwrap()),
            Sort::String,
            StunConfig::new(3, 3)
        )
        .is_err());
    }
}
