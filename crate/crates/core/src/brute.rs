//! Exhaustive program materialization for auditing the counting engine.
//!
//! Every program is built explicitly and evaluated on its own; nothing is
//! shared with the bottom-up enumerator beyond the language definition.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

use crate::dsl::{ComponentSet, Env, Expr, Sort, Value, MAX_NESTING};

pub const BRUTE_MAX_SIZE: usize = 6;
pub const DEFAULT_BRUTE_CAP: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum BruteError {
    #[error("max size {0} exceeds the exhaustive limit of {BRUTE_MAX_SIZE}")]
    SizeLimit(usize),
    #[error("nesting {0} exceeds the maximum of {MAX_NESTING}")]
    NestingLimit(usize),
    #[error("an estimated {estimate} programs exceed the cap of {cap}")]
    Cap { estimate: u128, cap: u128 },
}

#[derive(Clone, Debug)]
pub struct BruteConfig {
    pub components: Arc<ComponentSet>,
    pub output: Sort,
    pub max_size: usize,
    pub max_nesting: usize,
    pub inputs: Vec<Env>,
    pub cap: u128,
    /// Finite input domain for semantic deduplication.
    pub domain: Option<Vec<Env>>,
}

impl BruteConfig {
    pub fn new(
        components: Arc<ComponentSet>,
        output: Sort,
        max_size: usize,
        max_nesting: usize,
        inputs: Vec<Env>,
    ) -> Self {
        BruteConfig { components, output, max_size, max_nesting, inputs, cap: DEFAULT_BRUTE_CAP, domain: None }
    }

    fn check(&self) -> Result<(), BruteError> {
        if self.max_size > BRUTE_MAX_SIZE {
            return Err(BruteError::SizeLimit(self.max_size));
        }
        if self.max_nesting > MAX_NESTING {
            return Err(BruteError::NestingLimit(self.max_nesting));
        }
        let estimate = self.estimate();
        if estimate > self.cap {
            return Err(BruteError::Cap { estimate, cap: self.cap });
        }
        Ok(())
    }

    /// Number of programs `enumerate_all` would emit plus the straight-line
    /// programs of other sorts it builds along the way.
    pub fn estimate(&self) -> u128 {
        let per = straight_counts(&self.components, self.max_size);
        let total = |s: Sort| (1..=self.max_size).fold(0u128, |a, t| a.saturating_add(per[s.index()][t]));
        let branch = total(self.output);
        let conds = total(Sort::Bool);
        let mut all = Sort::ALL.iter().fold(0u128, |a, s| a.saturating_add(total(*s)));
        let mut tier = branch;
        for _ in 0..self.max_nesting {
            tier = conds.saturating_mul(branch).saturating_mul(tier);
            all = all.saturating_add(tier);
        }
        all
    }
}

fn straight_counts(c: &ComponentSet, max_size: usize) -> Vec<Vec<u128>> {
    let mut n = vec![vec![0u128; max_size + 1]; 3];
    for leaf in c.leaves() {
        if max_size >= 1 {
            n[leaf.result_sort().index()][1] += 1;
        }
    }
    for t in 2..=max_size {
        for f in c.funcs() {
            let mut ways = 0u128;
            for split in splits(t - 1, f.arity()) {
                let mut w = 1u128;
                for (s, k) in f.arg_sorts().iter().zip(&split) {
                    w = w.saturating_mul(n[s.index()][*k]);
                }
                ways = ways.saturating_add(w);
            }
            n[f.result_sort().index()][t] = n[f.result_sort().index()][t].saturating_add(ways);
        }
    }
    n
}

/// Ordered ways to write `total` as `parts` positive summands.
fn splits(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in splits(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Straight-line programs indexed by sort and exact size.
fn straight(c: &ComponentSet, max_size: usize) -> Vec<Vec<Vec<Expr>>> {
    let mut p: Vec<Vec<Vec<Expr>>> = vec![vec![Vec::new(); max_size + 1]; 3];
    if max_size == 0 {
        return p;
    }
    for leaf in c.leaves() {
        if let Some(e) = leaf.leaf_expr() {
            p[leaf.result_sort().index()][1].push(e);
        }
    }
    for t in 2..=max_size {
        for f in c.funcs() {
            for split in splits(t - 1, f.arity()) {
                let pools: Vec<&Vec<Expr>> = f.arg_sorts().iter().zip(&split).map(|(s, k)| &p[s.index()][*k]).collect();
                let mut made = Vec::new();
                product(&pools, &mut Vec::new(), &mut |args| {
                    made.push(Expr::app(*f, args.to_vec()).expect("well-sorted by construction"));
                });
                p[f.result_sort().index()][t].extend(made);
            }
        }
    }
    p
}

fn product(pools: &[&Vec<Expr>], acc: &mut Vec<Expr>, f: &mut dyn FnMut(&[Expr])) {
    match pools.split_first() {
        None => f(acc),
        Some((first, rest)) => {
            for e in first.iter() {
                acc.push(e.clone());
                product(rest, acc, f);
                acc.pop();
            }
        }
    }
}

/// Every program with at most `max_nesting` else-nested conditionals, each
/// straight-line part of size at most `max_size`, in tier order.
pub fn enumerate_all(config: &BruteConfig) -> Result<Vec<Expr>, BruteError> {
    Ok(by_tier(config)?.into_iter().flatten().collect())
}

fn by_tier(config: &BruteConfig) -> Result<Vec<Vec<Expr>>, BruteError> {
    config.check()?;
    let p = straight(&config.components, config.max_size);
    let flat = |s: Sort| p[s.index()].iter().flatten().cloned().collect::<Vec<_>>();
    let branch = flat(config.output);
    let conds = flat(Sort::Bool);
    let mut tiers = vec![branch.clone()];
    for i in 1..=config.max_nesting {
        let mut next = Vec::new();
        for c in &conds {
            for t in &branch {
                for e in &tiers[i - 1] {
                    next.push(Expr::ite(c.clone(), t.clone(), e.clone()).expect("well-formed by construction"));
                }
            }
        }
        tiers.push(next);
    }
    Ok(tiers)
}

/// Counts obtained by evaluating every program.
#[derive(Clone, Debug, Default)]
pub struct ExactCounts {
    /// `(sort, value vector, size)` of straight-line programs.
    pub per_vector: HashMap<(Sort, Vec<Value>, usize), BigUint>,
    /// Consistency histogram of programs with exactly `i` conditionals.
    pub per_consistency: Vec<HashMap<Vec<bool>, BigUint>>,
    /// Consistent programs with at most `i` conditionals.
    pub tier_totals: Vec<BigUint>,
    /// Behaviorally distinct consistent programs with at most `i`
    /// conditionals over the configured domain.
    pub semantic_totals: Option<Vec<usize>>,
    /// Number of programs of every tier.
    pub program_totals: Vec<usize>,
}

impl ExactCounts {
    /// Programs with exactly `conditions` conditionals whose consistency
    /// vector matches the marks (`None` is don't-care).
    pub fn pattern_count(&self, pattern: &[Option<bool>], conditions: usize) -> BigUint {
        self.per_consistency[conditions]
            .iter()
            .filter(|(cv, _)| cv.iter().zip(pattern).all(|(c, p)| p.is_none_or(|p| p == *c)))
            .map(|(_, n)| n)
            .sum()
    }
}

pub fn exact_counts(config: &BruteConfig, outputs: &[Value]) -> Result<ExactCounts, BruteError> {
    assert_eq!(outputs.len(), config.inputs.len(), "one output per example input");
    let tiers = by_tier(config)?;
    let mut out = ExactCounts::default();

    for (s, sizes) in straight(&config.components, config.max_size).iter().enumerate() {
        for (t, progs) in sizes.iter().enumerate() {
            for e in progs {
                let v: Vec<Value> = config.inputs.iter().map(|env| e.eval(env)).collect();
                *out.per_vector.entry((Sort::ALL[s], v, t)).or_default() += 1u32;
            }
        }
    }

    let mut behaviours: HashSet<Vec<Value>> = HashSet::new();
    let mut semantic = Vec::new();
    let mut running = BigUint::default();
    for progs in &tiers {
        let mut hist: HashMap<Vec<bool>, BigUint> = HashMap::new();
        for e in progs {
            let cv: Vec<bool> = config.inputs.iter().zip(outputs).map(|(env, o)| &e.eval(env) == o).collect();
            if cv.iter().all(|b| *b) {
                running += 1u32;
                if let Some(dom) = &config.domain {
                    behaviours.insert(dom.iter().map(|env| e.eval(env)).collect());
                }
            }
            *hist.entry(cv).or_default() += 1u32;
        }
        out.per_consistency.push(hist);
        out.tier_totals.push(running.clone());
        out.program_totals.push(progs.len());
        semantic.push(behaviours.len());
    }
    if config.domain.is_some() {
        out.semantic_totals = Some(semantic);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Component, Func};

    fn set(strs: &[&str], funcs: Vec<Func>) -> Arc<ComponentSet> {
        let mut leaves = vec![Component::Input { index: 0, name: "x".into(), sort: Sort::String }];
        leaves.extend(strs.iter().map(|s| Component::Const(Value::Str((*s).into()))));
        Arc::new(ComponentSet::new(leaves, funcs).unwrap())
    }

    fn env(s: &str) -> Env {
        Env(vec![Value::Str(s.into())])
    }

    #[test]
    fn six_programs() {
        let cfg = BruteConfig::new(set(&["a"], vec![Func::Concat]), Sort::String, 3, 0, vec![env("a")]);
        let all = enumerate_all(&cfg).unwrap();
        assert_eq!(all.len(), 6);
        let texts: HashSet<String> = all.iter().map(|e| e.to_string()).collect();
        assert_eq!(texts.len(), 6);
        let c = exact_counts(&cfg, &[Value::Str("aa".into())]).unwrap();
        assert_eq!(c.tier_totals, vec![BigUint::from(4u32)]);
    }

    #[test]
    fn size_one_is_leaves() {
        let cfg = BruteConfig::new(set(&["a", "b"], vec![Func::Concat]), Sort::String, 1, 0, vec![]);
        assert_eq!(enumerate_all(&cfg).unwrap().len(), 3);
    }

    #[test]
    fn swap_task() {
        let mut cfg =
            BruteConfig::new(set(&["a", "b"], vec![Func::StrEq]), Sort::String, 3, 1, vec![env("a"), env("b")]);
        cfg.domain = Some(vec![env("a"), env("b")]);
        let all = enumerate_all(&cfg).unwrap();
        let texts: Vec<String> = all.iter().map(|e| e.to_string()).collect();
        assert!(texts.contains(&r#"(if (= x "a") "b" "a")"#.to_string()));
        assert!(texts.contains(&r#"(if (= x "b") "a" "b")"#.to_string()));
        let c = exact_counts(&cfg, &[Value::Str("b".into()), Value::Str("a".into())]).unwrap();
        assert_eq!(c.tier_totals, vec![BigUint::from(0u32), BigUint::from(4u32)]);
        assert_eq!(c.semantic_totals, Some(vec![0, 1]));
    }

    #[test]
    fn zero_examples_everything_consistent() {
        let cfg = BruteConfig::new(set(&["a"], vec![Func::Concat]), Sort::String, 3, 0, vec![]);
        let c = exact_counts(&cfg, &[]).unwrap();
        assert_eq!(c.tier_totals[0], BigUint::from(c.program_totals[0]));
    }

    #[test]
    fn limits() {
        let mut cfg = BruteConfig::new(set(&["a"], vec![Func::Concat]), Sort::String, 7, 0, vec![]);
        assert_eq!(enumerate_all(&cfg), Err(BruteError::SizeLimit(7)));
        cfg.max_size = 6;
        cfg.cap = 10;
        assert!(matches!(enumerate_all(&cfg), Err(BruteError::Cap { .. })));
    }
}
