//! Bottom-up enumeration of straight-line programs with observational
//! equivalence.
//!
//! Programs are grouped per `(value vector, component size)`. Each group keeps
//! one representative and the exact number of syntactically distinct programs
//! it stands for. Size-1 groups come from leaves; a function applied to
//! argument groups whose sizes sum to `t - 1` contributes the product of their
//! counts to the size-`t` group of the pointwise result.

use std::collections::HashMap;
use std::io;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::dsl::{Component, ComponentSet, Env, Expr, Sort, ValRef, Value};
use crate::guarantee::HypothesisSize;

/// Default cap on distinct `(vector, size)` entries across all sorts.
pub const DEFAULT_MAX_ENTRIES: usize = 3_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum EnumError {
    #[error("max component size must be at least 1")]
    ZeroMaxSize,
    #[error("enumeration exceeded the cap of {limit} distinct (vector, size) entries at component size {size}")]
    EntryCap { limit: usize, size: usize },
}

/// A program's outputs on the current example inputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ValueVector {
    pub sort: Sort,
    pub values: Vec<Value>,
}

impl ValueVector {
    pub fn new(sort: Sort, values: Vec<Value>) -> Self {
        debug_assert!(values.iter().all(|v| v.sort() == sort));
        ValueVector { sort, values }
    }

    pub fn strings(values: &[&str]) -> Self {
        ValueVector::new(Sort::String, values.iter().map(|s| Value::Str((*s).to_owned())).collect())
    }
}

/// Packed value vector: strings are interned ids, integers are stored as
/// their bit pattern, booleans as 0/1.
pub(crate) type Packed = Arc<[u64]>;

#[derive(Default)]
pub(crate) struct Interner {
    strings: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u64>,
}

impl Interner {
    fn intern(&mut self, s: String) -> u64 {
        if let Some(&id) = self.ids.get(s.as_str()) {
            return id;
        }
        let id = self.strings.len() as u64;
        let s: Arc<str> = s.into();
        self.strings.push(s.clone());
        self.ids.insert(s, id);
        id
    }

    pub(crate) fn encode(&mut self, v: Value) -> u64 {
        match v {
            Value::Str(s) => self.intern(s),
            Value::Int(n) => n as u64,
            Value::Bool(b) => u64::from(b),
        }
    }

    /// Encoding without interning; `None` means no enumerated string equals `v`.
    pub(crate) fn lookup(&self, v: &Value) -> Option<u64> {
        match v {
            Value::Str(s) => self.ids.get(s.as_str()).copied(),
            Value::Int(n) => Some(*n as u64),
            Value::Bool(b) => Some(u64::from(*b)),
        }
    }

    pub(crate) fn decode(&self, sort: Sort, cell: u64) -> ValRef<'_> {
        match sort {
            Sort::String => ValRef::Str(&self.strings[cell as usize]),
            Sort::Int => ValRef::Int(cell as i64),
            Sort::Bool => ValRef::Bool(cell != 0),
        }
    }
}

pub(crate) struct Entry {
    pub(crate) values: Packed,
    pub(crate) count: BigUint,
    pub(crate) repr: Expr,
}

#[derive(Default)]
pub(crate) struct Layer {
    pub(crate) entries: Vec<Entry>,
    index: HashMap<Packed, usize>,
}

impl Layer {
    fn add(&mut self, cells: Vec<u64>, count: BigUint, repr: impl FnOnce() -> Expr) -> bool {
        if let Some(&i) = self.index.get(cells.as_slice()) {
            self.entries[i].count += count;
            return false;
        }
        let values: Packed = cells.into();
        self.index.insert(values.clone(), self.entries.len());
        self.entries.push(Entry { values, count, repr: repr() });
        true
    }

    fn find(&self, cells: &[u64]) -> Option<&Entry> {
        self.index.get(cells).map(|&i| &self.entries[i])
    }
}

/// One row of the count table, decoded for inspection.
#[derive(Debug)]
pub struct TableEntry<'a> {
    pub vector: ValueVector,
    pub size: usize,
    pub count: &'a BigUint,
    pub representative: &'a Expr,
}

/// The count table and representative map for one example set.
pub struct Enumeration {
    components: Arc<ComponentSet>,
    inputs: Vec<Env>,
    max_size: usize,
    max_entries: usize,
    pub(crate) interner: Interner,
    /// `layers[t - 1][sort.index()]`
    layers: Vec<[Layer; 3]>,
}

/// All tuples of `parts` positive integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if total >= 1 {
                prefix.push(total);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for first in 1..total {
            prefix.push(first);
            go(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

impl Enumeration {
    /// Enumerates every straight-line program up to `max_size` over
    /// `components` on the given example inputs.
    pub fn new(components: Arc<ComponentSet>, inputs: Vec<Env>, max_size: usize) -> Result<Self, EnumError> {
        Self::with_cap(components, inputs, max_size, DEFAULT_MAX_ENTRIES)
    }

    pub fn with_cap(
        components: Arc<ComponentSet>,
        inputs: Vec<Env>,
        max_size: usize,
        max_entries: usize,
    ) -> Result<Self, EnumError> {
        if max_size == 0 {
            return Err(EnumError::ZeroMaxSize);
        }
        let mut e = Enumeration {
            components,
            inputs,
            max_size,
            max_entries,
            interner: Interner::default(),
            layers: Vec::with_capacity(max_size),
        };
        e.run()?;
        Ok(e)
    }

    fn run(&mut self) -> Result<(), EnumError> {
        let Enumeration { components, inputs, max_size, max_entries, interner, layers } = self;
        let mut total = 0usize;

        let mut first: [Layer; 3] = Default::default();
        for leaf in components.leaves() {
            let cells: Vec<u64> = match leaf {
                Component::Input { index, .. } => {
                    inputs.iter().map(|env| interner.encode(env.get(*index).clone())).collect()
                }
                Component::Const(v) => {
                    let c = interner.encode(v.clone());
                    vec![c; inputs.len()]
                }
                Component::Func(_) => continue,
            };
            let expr = leaf.leaf_expr().expect("leaf component");
            if first[leaf.result_sort().index()].add(cells, BigUint::one(), || expr) {
                total += 1;
            }
        }
        layers.push(first);
        check_cap(total, *max_entries, 1)?;

        let n = inputs.len();
        for t in 2..=*max_size {
            let mut next: [Layer; 3] = Default::default();
            for &f in components.funcs() {
                let sorts = f.arg_sorts();
                let out = &mut next[f.result_sort().index()];
                for sizes in compositions(t - 1, sorts.len()) {
                    let args: Vec<&Layer> =
                        sizes.iter().zip(sorts).map(|(&ti, s)| &layers[ti - 1][s.index()]).collect();
                    if args.iter().any(|l| l.entries.is_empty()) {
                        continue;
                    }
                    let mut idx = vec![0usize; args.len()];
                    loop {
                        let mut cells = Vec::with_capacity(n);
                        for j in 0..n {
                            let v = {
                                let mut vals = [ValRef::Int(0); 3];
                                for (k, l) in args.iter().enumerate() {
                                    vals[k] = interner.decode(sorts[k], l.entries[idx[k]].values[j]);
                                }
                                f.apply(&vals[..args.len()])
                            };
                            cells.push(interner.encode(v));
                        }
                        let mut count = args[0].entries[idx[0]].count.clone();
                        for (k, l) in args.iter().enumerate().skip(1) {
                            count *= &l.entries[idx[k]].count;
                        }
                        let inserted = out.add(cells, count, || {
                            Expr::app_unchecked(
                                f,
                                args.iter().zip(&idx).map(|(l, &i)| l.entries[i].repr.clone()).collect(),
                            )
                        });
                        if inserted {
                            total += 1;
                            check_cap(total, *max_entries, t)?;
                        }
                        if !advance(&mut idx, &args) {
                            break;
                        }
                    }
                }
            }
            layers.push(next);
        }
        Ok(())
    }

    pub fn components(&self) -> &Arc<ComponentSet> {
        &self.components
    }

    pub fn inputs(&self) -> &[Env] {
        &self.inputs
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub(crate) fn layer(&self, sort: Sort, size: usize) -> &Layer {
        &self.layers[size - 1][sort.index()]
    }

    pub(crate) fn pack(&self, v: &ValueVector) -> Option<Vec<u64>> {
        if v.values.len() != self.inputs.len() || v.values.iter().any(|x| x.sort() != v.sort) {
            return None;
        }
        v.values.iter().map(|x| self.interner.lookup(x)).collect()
    }

    pub(crate) fn unpack(&self, sort: Sort, cells: &[u64]) -> ValueVector {
        ValueVector::new(sort, cells.iter().map(|&c| self.interner.decode(sort, c).to_owned()).collect())
    }

    fn find(&self, v: &ValueVector, size: usize) -> Option<&Entry> {
        if size == 0 || size > self.max_size {
            return None;
        }
        self.layer(v.sort, size).find(&self.pack(v)?)
    }

    /// Number of programs of exactly `size` components producing `v`.
    pub fn count(&self, v: &ValueVector, size: usize) -> BigUint {
        self.find(v, size).map_or_else(BigUint::zero, |e| e.count.clone())
    }

    pub fn representative(&self, v: &ValueVector, size: usize) -> Option<&Expr> {
        self.find(v, size).map(|e| &e.repr)
    }

    /// Every stored entry of `sort`, by size then discovery order.
    pub fn entries(&self, sort: Sort) -> impl Iterator<Item = TableEntry<'_>> + '_ {
        (1..=self.max_size).flat_map(move |t| {
            self.layer(sort, t).entries.iter().map(move |e| TableEntry {
                vector: self.unpack(sort, &e.values),
                size: t,
                count: &e.count,
                representative: &e.repr,
            })
        })
    }

    pub fn distinct_entries(&self) -> usize {
        self.layers.iter().flat_map(|l| l.iter()).map(|l| l.entries.len()).sum()
    }

    /// Sum of counts over every vector of `sort` and every size up to
    /// `max_size`.
    pub fn total_count(&self, sort: Sort, max_size: usize) -> HypothesisSize {
        let mut sum = BigUint::zero();
        for t in 1..=max_size.min(self.max_size) {
            for e in &self.layer(sort, t).entries {
                sum += &e.count;
            }
        }
        HypothesisSize::from(sum)
    }

    /// Brings the table up to date with additional example inputs. Counts
    /// match a from-scratch enumeration over the extended input list.
    pub fn extend_examples(&mut self, new_inputs: &[Env]) -> Result<(), EnumError> {
        if new_inputs.is_empty() {
            return Ok(());
        }
        // Merged vectors cannot be split from representatives alone, so the
        // layers are rebuilt over the full input list.
        self.inputs.extend_from_slice(new_inputs);
        self.interner = Interner::default();
        self.layers.clear();
        self.run()
    }

    /// Debug dump with columns `sort,size,count,representative`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sort", "size", "count", "representative"])?;
        for sort in Sort::ALL {
            for t in 1..=self.max_size {
                for e in &self.layer(sort, t).entries {
                    out.write_record([sort.to_string(), t.to_string(), e.count.to_string(), e.repr.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Steps the argument odometer; false once every combination was visited.
fn advance(idx: &mut [usize], args: &[&Layer]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < args[k].entries.len() {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn check_cap(total: usize, limit: usize, size: usize) -> Result<(), EnumError> {
    if total > limit {
        Err(EnumError::EntryCap { limit, size })
    } else {
        Ok(())
    }
}
