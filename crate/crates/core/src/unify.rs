//! Consistency clustering and if-then-else unification counts.
//!
//! Straight-line programs of the output sort are clustered by their
//! consistency vector (which examples they get right). Conditional programs
//! `if b then P else Q` are counted without being built: for each boolean
//! value vector `b`, the then branch must be right where `b` is true and the
//! else branch where `b` is false. Sets of consistency vectors are written as
//! patterns over ✓ / × / ⊤ (don't care).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::dsl::{Expr, Sort, Value, MAX_NESTING};
use crate::enumerate::Enumeration;
use crate::error::{Error, Result};
use crate::guarantee::HypothesisSize;

/// Fixed-length bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    fn ones(len: usize) -> Self {
        let mut b = Bits::zeros(len);
        for i in 0..len {
            b.set(i);
        }
        b
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn and(&self, o: &Bits) -> Bits {
        Bits { words: self.words.iter().zip(&o.words).map(|(a, b)| a & b).collect(), len: self.len }
    }

    fn and_not(&self, o: &Bits) -> Bits {
        Bits { words: self.words.iter().zip(&o.words).map(|(a, b)| a & !b).collect(), len: self.len }
    }

    fn from_fn(len: usize, f: impl Fn(usize) -> bool) -> Bits {
        let mut b = Bits::zeros(len);
        for i in 0..len {
            if f(i) {
                b.set(i);
            }
        }
        b
    }
}

/// Per-example ✓ (true) / × (false) agreement with the required outputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConsistencyVector(Bits);

impl ConsistencyVector {
    pub fn from_bools(b: &[bool]) -> Self {
        ConsistencyVector(Bits::from_fn(b.len(), |i| b[i]))
    }

    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn is_all_correct(&self) -> bool {
        (0..self.len()).all(|i| self.get(i))
    }
}

/// Printed over `{1, 0}` for `{✓, ×}`.
impl fmt::Display for ConsistencyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    Correct,
    Wrong,
    Any,
}

/// A set of consistency vectors: positions marked ✓ or × must agree, ⊤
/// positions are free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    care: Bits,
    value: Bits,
}

impl Pattern {
    pub fn new(marks: &[Mark]) -> Self {
        Pattern {
            care: Bits::from_fn(marks.len(), |i| marks[i] != Mark::Any),
            value: Bits::from_fn(marks.len(), |i| marks[i] == Mark::Correct),
        }
    }

    pub fn all_correct(len: usize) -> Self {
        Pattern { care: Bits::ones(len), value: Bits::ones(len) }
    }

    pub fn any(len: usize) -> Self {
        Pattern { care: Bits::zeros(len), value: Bits::zeros(len) }
    }

    pub fn len(&self) -> usize {
        self.care.len
    }

    pub fn is_empty(&self) -> bool {
        self.care.len == 0
    }

    pub fn mark(&self, i: usize) -> Mark {
        match (self.care.get(i), self.value.get(i)) {
            (false, _) => Mark::Any,
            (true, true) => Mark::Correct,
            (true, false) => Mark::Wrong,
        }
    }

    pub fn matches(&self, c: &ConsistencyVector) -> bool {
        c.0.words.iter().zip(&self.value.words).zip(&self.care.words).all(|((c, v), m)| (c ^ v) & m == 0)
    }

    /// Constraint on the then branch under condition vector `b`.
    fn gamma_then(&self, b: &Bits, mode: GammaMode) -> Pattern {
        match mode {
            GammaMode::Refined => Pattern { care: self.care.and(b), value: self.value.and(b) },
            GammaMode::Literal => Pattern { care: b.clone(), value: b.clone() },
        }
    }

    fn gamma_else(&self, b: &Bits, mode: GammaMode) -> Pattern {
        match mode {
            GammaMode::Refined => Pattern { care: self.care.and_not(b), value: self.value.and_not(b) },
            GammaMode::Literal => {
                let f = Bits::ones(b.len).and_not(b);
                Pattern { care: f.clone(), value: f }
            }
        }
    }
}

/// Printed over `{1, 0, *}` for `{✓, ×, ⊤}`.
impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(match self.mark(i) {
                Mark::Correct => "1",
                Mark::Wrong => "0",
                Mark::Any => "*",
            })?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let marks = s
            .chars()
            .map(|c| match c {
                '1' | '✓' => Ok(Mark::Correct),
                '0' | '×' => Ok(Mark::Wrong),
                '*' | '⊤' => Ok(Mark::Any),
                other => Err(format!("invalid pattern symbol `{other}`")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Pattern::new(&marks))
    }
}

/// How branch patterns are derived from an enclosing pattern and a
/// condition vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GammaMode {
    /// A branch inherits the enclosing mark on the positions it decides and
    /// is free elsewhere. Counts are exact.
    #[default]
    Refined,
    /// A branch must be ✓ on every position it decides, regardless of the
    /// enclosing pattern. Agrees with `Refined` on all-✓ patterns at depth
    /// one; kept for comparison.
    Literal,
}

/// A concrete program together with its ordering key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub size: usize,
    pub text: String,
    pub expr: Expr,
}

impl Candidate {
    fn new(size: usize, expr: Expr) -> Self {
        Candidate { size, text: expr.to_string(), expr }
    }

    fn key(&self) -> (usize, &str) {
        (self.size, &self.text)
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

fn keep_min(slot: &mut Option<Candidate>, c: Candidate) {
    match slot {
        Some(cur) if *cur <= c => {}
        _ => *slot = Some(c),
    }
}

/// One consistency vector with its summed count and members.
#[derive(Debug)]
pub struct Cluster {
    pub vector: ConsistencyVector,
    pub count: BigUint,
    /// `(size, index within that size layer)` of every member entry.
    members: Vec<(usize, usize)>,
    best: Candidate,
}

/// Clusters of output-sort programs keyed by consistency vector.
pub struct ClusterMaps {
    sort: Sort,
    len: usize,
    clusters: Vec<Cluster>,
    index: HashMap<ConsistencyVector, usize>,
}

/// Groups every output-sort entry of `table` by its consistency vector
/// against `outputs` and sums their counts.
pub fn cluster(table: &Enumeration, sort: Sort, outputs: &[Value]) -> ClusterMaps {
    assert_eq!(outputs.len(), table.inputs().len(), "one output per example input");
    let want: Vec<Option<u64>> = outputs.iter().map(|o| table.interner.lookup(o)).collect();
    let mut maps = ClusterMaps { sort, len: outputs.len(), clusters: Vec::new(), index: HashMap::new() };
    for t in 1..=table.max_size() {
        for (i, e) in table.layer(sort, t).entries.iter().enumerate() {
            let cv = ConsistencyVector(Bits::from_fn(outputs.len(), |j| want[j] == Some(e.values[j])));
            match maps.index.get(&cv) {
                Some(&k) => {
                    let c = &mut maps.clusters[k];
                    c.count += &e.count;
                    c.members.push((t, i));
                    // sizes arrive in ascending order; only ties need text
                    if c.best.size == t {
                        let cand = Candidate::new(t, e.repr.clone());
                        if cand < c.best {
                            c.best = cand;
                        }
                    }
                }
                None => {
                    maps.index.insert(cv.clone(), maps.clusters.len());
                    maps.clusters.push(Cluster {
                        vector: cv,
                        count: e.count.clone(),
                        members: vec![(t, i)],
                        best: Candidate::new(t, e.repr.clone()),
                    });
                }
            }
        }
    }
    maps
}

impl ClusterMaps {
    pub fn sort(&self) -> Sort {
        self.sort
    }

    pub fn examples(&self) -> usize {
        self.len
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Summed count for one consistency vector (0 if absent).
    pub fn count_c(&self, c: &ConsistencyVector) -> BigUint {
        self.index.get(c).map_or_else(BigUint::zero, |&k| self.clusters[k].count.clone())
    }

    /// The `(value vector, size)` pairs clustered under `c`.
    pub fn psi(&self, c: &ConsistencyVector, table: &Enumeration) -> Vec<(crate::enumerate::ValueVector, usize)> {
        let Some(&k) = self.index.get(c) else { return Vec::new() };
        self.clusters[k]
            .members
            .iter()
            .map(|&(t, i)| (table.unpack(self.sort, &table.layer(self.sort, t).entries[i].values), t))
            .collect()
    }

    /// Representative programs clustered under `c`.
    pub fn phi(&self, c: &ConsistencyVector, table: &Enumeration) -> Vec<Expr> {
        let Some(&k) = self.index.get(c) else { return Vec::new() };
        self.clusters[k].members.iter().map(|&(t, i)| table.layer(self.sort, t).entries[i].repr.clone()).collect()
    }

    /// Debug dump with columns `consistency_vector,count`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["consistency_vector", "count"])?;
        for c in &self.clusters {
            out.write_record([c.vector.to_string(), c.count.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct BoolCluster {
    bits: Bits,
    count: BigUint,
    best: Candidate,
}

/// Boolean programs grouped by value vector, summed over sizes.
pub struct BoolClusters {
    items: Vec<BoolCluster>,
    index: HashMap<Bits, usize>,
}

impl BoolClusters {
    pub fn new(table: &Enumeration) -> Self {
        let n = table.inputs().len();
        let mut out = BoolClusters { items: Vec::new(), index: HashMap::new() };
        for t in 1..=table.max_size() {
            for e in &table.layer(Sort::Bool, t).entries {
                let bits = Bits::from_fn(n, |j| e.values[j] != 0);
                match out.index.get(&bits) {
                    Some(&k) => {
                        let b = &mut out.items[k];
                        b.count += &e.count;
                        if b.best.size == t {
                            let cand = Candidate::new(t, e.repr.clone());
                            if cand < b.best {
                                b.best = cand;
                            }
                        }
                    }
                    None => {
                        out.index.insert(bits.clone(), out.items.len());
                        out.items.push(BoolCluster {
                            bits,
                            count: e.count.clone(),
                            best: Candidate::new(t, e.repr.clone()),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `Σ_t Count(b, t)` for the boolean vector `b`.
    pub fn count(&self, b: &[bool]) -> BigUint {
        let bits = Bits::from_fn(b.len(), |i| b[i]);
        self.index.get(&bits).map_or_else(BigUint::zero, |&k| self.items[k].count.clone())
    }

    pub fn representative(&self, b: &[bool]) -> Option<&Expr> {
        let bits = Bits::from_fn(b.len(), |i| b[i]);
        self.index.get(&bits).map(|&k| &self.items[k].best.expr)
    }

    pub fn total(&self) -> BigUint {
        self.items.iter().map(|b| &b.count).sum()
    }
}

/// Memoizing evaluator of pattern counts and minimal picks for one example
/// set. Build a new one whenever the examples change.
pub struct Unifier<'a> {
    maps: &'a ClusterMaps,
    bools: &'a BoolClusters,
    mode: GammaMode,
    counts: HashMap<(Pattern, usize), BigUint>,
    picks: HashMap<(Pattern, usize), Option<Candidate>>,
}

impl<'a> Unifier<'a> {
    pub fn new(maps: &'a ClusterMaps, bools: &'a BoolClusters) -> Self {
        Self::with_mode(maps, bools, GammaMode::Refined)
    }

    pub fn with_mode(maps: &'a ClusterMaps, bools: &'a BoolClusters, mode: GammaMode) -> Self {
        Unifier { maps, bools, mode, counts: HashMap::new(), picks: HashMap::new() }
    }

    fn check(&self, p: &Pattern, conditions: usize) -> Result<()> {
        if conditions > MAX_NESTING {
            return Err(Error::NestingBeyondMax(conditions));
        }
        if p.len() != self.maps.len {
            return Err(Error::InvalidParams(format!(
                "pattern has {} positions but there are {} examples",
                p.len(),
                self.maps.len
            )));
        }
        Ok(())
    }

    /// Number of programs with exactly `conditions` else-nested conditionals
    /// whose consistency vector matches `p`.
    pub fn count(&mut self, p: &Pattern, conditions: usize) -> Result<BigUint> {
        self.check(p, conditions)?;
        Ok(self.count_inner(p, conditions))
    }

    fn count_inner(&mut self, p: &Pattern, conditions: usize) -> BigUint {
        let key = (p.clone(), conditions);
        if let Some(c) = self.counts.get(&key) {
            return c.clone();
        }
        let mut sum = BigUint::zero();
        if conditions == 0 {
            for c in &self.maps.clusters {
                if p.matches(&c.vector) {
                    sum += &c.count;
                }
            }
        } else {
            let bools = self.bools;
            for b in &bools.items {
                let then_n = self.count_inner(&p.gamma_then(&b.bits, self.mode), 0);
                if then_n.is_zero() {
                    continue;
                }
                let else_n = self.count_inner(&p.gamma_else(&b.bits, self.mode), conditions - 1);
                if else_n.is_zero() {
                    continue;
                }
                sum += then_n * else_n * &b.count;
            }
        }
        self.counts.insert(key, sum.clone());
        sum
    }

    /// Programs with at most `tier` conditionals consistent with every
    /// example.
    pub fn tier_size(&mut self, tier: usize) -> Result<HypothesisSize> {
        let goal = Pattern::all_correct(self.maps.len);
        let mut total = BigUint::zero();
        for i in 0..=tier {
            total += self.count(&goal, i)?;
        }
        Ok(total.into())
    }

    /// The least `(size, text)` program with exactly `conditions`
    /// conditionals matching `p`, assembled from cluster representatives.
    pub fn pick(&mut self, p: &Pattern, conditions: usize) -> Result<Option<Candidate>> {
        self.check(p, conditions)?;
        Ok(self.pick_inner(p, conditions))
    }

    fn pick_inner(&mut self, p: &Pattern, conditions: usize) -> Option<Candidate> {
        let key = (p.clone(), conditions);
        if let Some(c) = self.picks.get(&key) {
            return c.clone();
        }
        let mut best = None;
        if conditions == 0 {
            for c in &self.maps.clusters {
                if p.matches(&c.vector) {
                    keep_min(&mut best, c.best.clone());
                }
            }
        } else {
            let bools = self.bools;
            for b in &bools.items {
                let Some(then) = self.pick_inner(&p.gamma_then(&b.bits, self.mode), 0) else { continue };
                let Some(els) = self.pick_inner(&p.gamma_else(&b.bits, self.mode), conditions - 1) else { continue };
                let size = b.best.size + then.size + els.size;
                if best.as_ref().is_some_and(|cur: &Candidate| cur.size < size) {
                    continue;
                }
                let expr = Expr::ite_unchecked(b.best.expr.clone(), then.expr, els.expr);
                keep_min(&mut best, Candidate::new(size, expr));
            }
        }
        self.picks.insert(key, best.clone());
        best
    }

    /// A consistent program of minimal `(conditions, size, text)` with at
    /// most `tier` conditionals, or `None` when no such program exists.
    pub fn unify_pick(&mut self, tier: usize) -> Result<Option<Candidate>> {
        let goal = Pattern::all_correct(self.maps.len);
        for i in 0..=tier {
            if let Some(c) = self.pick(&goal, i)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }
}

/// `Count(pattern, conditions)` on a fresh memo.
pub fn pattern_count(
    maps: &ClusterMaps,
    bools: &BoolClusters,
    pattern: &Pattern,
    conditions: usize,
) -> Result<BigUint> {
    Unifier::new(maps, bools).count(pattern, conditions)
}

pub fn tier_size(maps: &ClusterMaps, bools: &BoolClusters, tier: usize) -> Result<HypothesisSize> {
    Unifier::new(maps, bools).tier_size(tier)
}

pub fn unify_pick(maps: &ClusterMaps, bools: &BoolClusters, tier: usize) -> Result<Option<Expr>> {
    Ok(Unifier::new(maps, bools).unify_pick(tier)?.map(|c| c.expr))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dsl::{Component, ComponentSet, Env, Func};

    fn leaf_set(strs: &[&str], funcs: Vec<Func>) -> Arc<ComponentSet> {
        let mut leaves = vec![Component::Input { index: 0, name: "x".into(), sort: Sort::String }];
        leaves.extend(strs.iter().map(|s| Component::Const(Value::Str((*s).into()))));
        Arc::new(ComponentSet::new(leaves, funcs).unwrap())
    }

    fn envs(xs: &[&str]) -> Vec<Env> {
        xs.iter().map(|s| Env(vec![Value::Str((*s).into())])).collect()
    }

    fn outs(xs: &[&str]) -> Vec<Value> {
        xs.iter().map(|s| Value::Str((*s).into())).collect()
    }

    /// inputs ["a","b"] -> outputs ["b","a"] over {x, "a", "b", =}, size <= 3
    fn swap() -> (Enumeration, ClusterMaps, BoolClusters) {
        let e = Enumeration::new(leaf_set(&["a", "b"], vec![Func::StrEq]), envs(&["a", "b"]), 3).unwrap();
        let m = cluster(&e, Sort::String, &outs(&["b", "a"]));
        let b = BoolClusters::new(&e);
        (e, m, b)
    }

    #[test]
    fn six_program_clusters() {
        let e = Enumeration::new(leaf_set(&["a"], vec![Func::Concat]), envs(&["a"]), 3).unwrap();
        let m = cluster(&e, Sort::String, &outs(&["aa"]));
        assert_eq!(m.count_c(&ConsistencyVector::from_bools(&[true])), BigUint::from(4u32));
        assert_eq!(m.count_c(&ConsistencyVector::from_bools(&[false])), BigUint::from(2u32));
        assert_eq!(m.psi(&ConsistencyVector::from_bools(&[true]), &e).len(), 1);
    }

    #[test]
    fn zero_examples_single_cluster() {
        let e = Enumeration::new(leaf_set(&["a"], vec![Func::Concat]), vec![], 3).unwrap();
        let m = cluster(&e, Sort::String, &[]);
        assert_eq!(m.clusters().len(), 1);
        assert_eq!(m.count_c(&ConsistencyVector::from_bools(&[])), BigUint::from(6u32));
    }

    #[test]
    fn unmatched_outputs_have_no_full_cluster() {
        let e = Enumeration::new(leaf_set(&["a"], vec![Func::Concat]), envs(&["a"]), 3).unwrap();
        let m = cluster(&e, Sort::String, &outs(&["zzz"]));
        assert_eq!(m.count_c(&ConsistencyVector::from_bools(&[true])), BigUint::zero());
    }

    #[test]
    fn swap_task_counts() {
        let (_, m, b) = swap();
        let goal = Pattern::all_correct(2);
        assert_eq!(pattern_count(&m, &b, &goal, 0).unwrap(), BigUint::zero());
        // (= x "a"), (= "a" x) with then "b" else "a"; (= x "b"), (= "b" x) with then "a" else "b"
        assert_eq!(pattern_count(&m, &b, &goal, 1).unwrap(), BigUint::from(4u32));
        assert_eq!(tier_size(&m, &b, 0).unwrap(), HypothesisSize::zero());
        assert_eq!(tier_size(&m, &b, 1).unwrap(), HypothesisSize::from(4u32));
        assert_eq!(
            pattern_count(&m, &b, &Pattern::any(2), 0).unwrap(),
            BigUint::from(3u32),
            "all-⊤ at depth 0 is the straight-line total"
        );
        assert!(matches!(pattern_count(&m, &b, &goal, 3), Err(Error::NestingBeyondMax(3))));
    }

    #[test]
    fn swap_task_pick() {
        let (_, m, b) = swap();
        assert_eq!(unify_pick(&m, &b, 0).unwrap(), None);
        let p = unify_pick(&m, &b, 1).unwrap().unwrap();
        assert_eq!(p.to_string(), r#"(if (= x "a") "b" "a")"#);
    }

    #[test]
    fn tier_zero_pick_prefers_input() {
        let e = Enumeration::new(leaf_set(&["a"], vec![Func::Concat]), envs(&["q"]), 3).unwrap();
        let m = cluster(&e, Sort::String, &outs(&["q"]));
        let b = BoolClusters::new(&e);
        assert_eq!(unify_pick(&m, &b, 0).unwrap().unwrap().to_string(), "x");
        assert_eq!(tier_size(&m, &b, 0).unwrap(), HypothesisSize::from(1u32));
    }

    #[test]
    fn pattern_text_round_trip() {
        let p: Pattern = "1*0".parse().unwrap();
        assert_eq!(p.to_string(), "1*0");
        assert!(p.matches(&ConsistencyVector::from_bools(&[true, true, false])));
        assert!(!p.matches(&ConsistencyVector::from_bools(&[true, true, true])));
        assert!("12".parse::<Pattern>().is_err());
    }

    #[test]
    fn literal_gamma_agrees_at_depth_one() {
        let (_, m, b) = swap();
        let goal = Pattern::all_correct(2);
        let lit = Unifier::with_mode(&m, &b, GammaMode::Literal).count(&goal, 1).unwrap();
        assert_eq!(lit, pattern_count(&m, &b, &goal, 1).unwrap());
    }
}
