//! Input distributions.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::dsl::{Env, Signature, Sort, Value};

pub const DEFAULT_CHARSET: &str = "A-Za-z0-9,.-;|";

/// Characters available to insertions: printable ASCII without whitespace.
pub fn insertion_alphabet() -> Vec<char> {
    ('!'..='~').collect()
}

/// Expands `a-z` style ranges. A `-` is a range only between two
/// alphanumeric characters of the same class; otherwise it is literal.
pub fn expand_charset(spec: &str) -> Vec<char> {
    let cs: Vec<char> = spec.chars().collect();
    let class = |c: char| {
        if c.is_ascii_lowercase() {
            1
        } else if c.is_ascii_uppercase() {
            2
        } else if c.is_ascii_digit() {
            3
        } else {
            0
        }
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        if i + 2 < cs.len()
            && cs[i + 1] == '-'
            && class(cs[i]) != 0
            && class(cs[i]) == class(cs[i + 2])
            && cs[i] <= cs[i + 2]
        {
            out.extend(cs[i]..=cs[i + 2]);
            i += 3;
        } else {
            out.push(cs[i]);
            i += 1;
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|c| seen.insert(*c));
    out
}

/// How one argument depends on another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Relation {
    /// `arg` is a uniformly chosen substring of `of`.
    SubstringOf { arg: String, of: String },
    /// Integer `arg` is uniform in `[0, len(of)]` or in `1..=999`, each
    /// with probability one half.
    BoundedBy { arg: String, of: String },
}

fn default_min_len() -> usize {
    8
}
fn default_max_len() -> usize {
    16
}
fn default_charset() -> String {
    DEFAULT_CHARSET.into()
}
fn default_ws_weight() -> u32 {
    15
}
fn default_insert_len() -> usize {
    10
}
fn default_half() -> f64 {
    0.5
}
fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformString {
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_charset")]
    pub charset: String,
    /// Weight of `' '` relative to each charset character.
    #[serde(default = "default_ws_weight")]
    pub whitespace_weight: u32,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl Default for UniformString {
    fn default() -> Self {
        UniformString {
            min_len: default_min_len(),
            max_len: default_max_len(),
            charset: default_charset(),
            whitespace_weight: default_ws_weight(),
            relations: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationFuzzer {
    #[serde(default = "default_insert_len")]
    pub max_insert_len: usize,
    #[serde(default = "default_half")]
    pub insert_probability: f64,
    /// Mutations applied per draw.
    #[serde(default = "default_one")]
    pub mutations: usize,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl Default for MutationFuzzer {
    fn default() -> Self {
        MutationFuzzer {
            max_insert_len: default_insert_len(),
            insert_probability: default_half(),
            mutations: default_one(),
            relations: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
#[serde(try_from = "RawDistribution")]
pub enum DistributionConfig {
    UniformString(UniformString),
    MutationFuzzer(MutationFuzzer),
}

/// Accepts a missing `params` object.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    kind: String,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

impl TryFrom<RawDistribution> for DistributionConfig {
    type Error = String;

    fn try_from(raw: RawDistribution) -> Result<Self, String> {
        let params = raw.params.unwrap_or_else(|| serde_json::json!({}));
        let err = |e: serde_json::Error| format!("params: {e}");
        match raw.kind.as_str() {
            "uniform_string" | "uniform" => {
                Ok(DistributionConfig::UniformString(serde_json::from_value(params).map_err(err)?))
            }
            "mutation_fuzzer" | "mutation" => {
                Ok(DistributionConfig::MutationFuzzer(serde_json::from_value(params).map_err(err)?))
            }
            other => Err(format!("unknown distribution kind `{other}`")),
        }
    }
}

impl DistributionConfig {
    pub fn relations(&self) -> &[Relation] {
        match self {
            DistributionConfig::UniformString(u) => &u.relations,
            DistributionConfig::MutationFuzzer(m) => &m.relations,
        }
    }
}

#[derive(Clone, Debug)]
enum Rule {
    Free,
    Substring(usize),
    Bounded(Option<usize>),
}

#[derive(Clone, Debug)]
enum Base {
    Uniform {
        min_len: usize,
        max_len: usize,
        chars: Vec<char>,
        weights: WeightedIndex<u32>,
        probs: Vec<f64>,
    },
    Mutation {
        seeds: Vec<Vec<char>>,
        alphabet: Vec<char>,
        max_insert_len: usize,
        insert_probability: f64,
        mutations: usize,
    },
}

/// A compiled distribution over environments for one signature.
#[derive(Clone, Debug)]
pub struct InputSampler {
    base: Base,
    rules: Vec<Rule>,
    order: Vec<usize>,
}

fn invalid(msg: impl Into<String>) -> TaskError {
    TaskError::Invalid(msg.into())
}

impl InputSampler {
    pub fn new(config: &DistributionConfig, sig: &Signature, seeds: &[String]) -> Result<Self, TaskError> {
        let base = match config {
            DistributionConfig::UniformString(u) => {
                if u.min_len > u.max_len {
                    return Err(invalid(format!("min_len {} exceeds max_len {}", u.min_len, u.max_len)));
                }
                if u.whitespace_weight == 0 {
                    return Err(invalid("whitespace_weight must be positive"));
                }
                let mut chars = expand_charset(&u.charset);
                chars.retain(|c| *c != ' ');
                if chars.is_empty() {
                    return Err(invalid("charset is empty"));
                }
                let mut w = vec![1u32; chars.len()];
                chars.push(' ');
                w.push(u.whitespace_weight);
                let total: u32 = w.iter().sum();
                let probs = w.iter().map(|x| *x as f64 / total as f64).collect();
                let weights = WeightedIndex::new(&w).map_err(|e| invalid(e.to_string()))?;
                Base::Uniform { min_len: u.min_len, max_len: u.max_len, chars, weights, probs }
            }
            DistributionConfig::MutationFuzzer(m) => {
                if seeds.is_empty() {
                    return Err(invalid("the mutation fuzzer needs at least one seed"));
                }
                if m.max_insert_len == 0 {
                    return Err(invalid("max_insert_len must be positive"));
                }
                if !(0.0..=1.0).contains(&m.insert_probability) {
                    return Err(invalid("insert_probability must lie in [0, 1]"));
                }
                Base::Mutation {
                    seeds: seeds.iter().map(|s| s.chars().collect()).collect(),
                    alphabet: insertion_alphabet(),
                    max_insert_len: m.max_insert_len,
                    insert_probability: m.insert_probability,
                    mutations: m.mutations,
                }
            }
        };

        let first_string = sig.inputs().iter().position(|d| d.sort == Sort::String);
        let mut rules: Vec<Rule> = sig
            .inputs()
            .iter()
            .map(|d| if d.sort == Sort::Int { Rule::Bounded(first_string) } else { Rule::Free })
            .collect();
        let mut constrained = vec![false; rules.len()];
        for rel in config.relations() {
            let (arg, of) = match rel {
                Relation::SubstringOf { arg, of } | Relation::BoundedBy { arg, of } => (arg, of),
            };
            let a = sig.position(arg).ok_or_else(|| invalid(format!("relation names unknown input `{arg}`")))?;
            let o = sig.position(of).ok_or_else(|| invalid(format!("relation names unknown input `{of}`")))?;
            if sig.inputs()[o].sort != Sort::String {
                return Err(invalid(format!("`{of}` must be a string input")));
            }
            if a == o || std::mem::replace(&mut constrained[a], true) {
                return Err(invalid(format!("conflicting relations for `{arg}`")));
            }
            rules[a] = match (rel, sig.inputs()[a].sort) {
                (Relation::SubstringOf { .. }, Sort::String) => Rule::Substring(o),
                (Relation::BoundedBy { .. }, Sort::Int) => Rule::Bounded(Some(o)),
                _ => return Err(invalid(format!("relation does not fit the sort of `{arg}`"))),
            };
        }

        let order = topo_order(&rules).ok_or_else(|| invalid("cyclic input relations"))?;
        Ok(InputSampler { base, rules, order })
    }

    /// Draws one environment. The result depends only on the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Env {
        let mut vals: Vec<Option<Value>> = vec![None; self.rules.len()];
        for &i in &self.order {
            let v = match self.rules[i] {
                Rule::Free => Value::Str(self.sample_free(rng)),
                Rule::Substring(o) => {
                    let s: Vec<char> = vals[o].as_ref().and_then(Value::as_str).unwrap_or("").chars().collect();
                    let pairs = (s.len() + 1) * (s.len() + 2) / 2;
                    let (a, b) = nth_pair(s.len(), rng.gen_range(0..pairs));
                    Value::Str(s[a..b].iter().collect())
                }
                Rule::Bounded(o) => {
                    let len = o.and_then(|o| vals[o].as_ref()).and_then(Value::as_str).map(|s| s.chars().count());
                    match len {
                        Some(len) if rng.gen_bool(0.5) => Value::Int(rng.gen_range(0..=len as i64)),
                        _ => Value::Int(rng.gen_range(1..=999)),
                    }
                }
            };
            vals[i] = Some(v);
        }
        Env(vals.into_iter().map(|v| v.expect("every input sampled")).collect())
    }

    fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        match &self.base {
            Base::Uniform { min_len, max_len, chars, weights, .. } => {
                let len = rng.gen_range(*min_len..=*max_len);
                (0..len).map(|_| chars[weights.sample(rng)]).collect()
            }
            Base::Mutation { seeds, alphabet, max_insert_len, insert_probability, mutations } => {
                let mut s = seeds.choose(rng).expect("seeds are non-empty").clone();
                for _ in 0..*mutations {
                    if rng.gen_bool(*insert_probability) || s.is_empty() {
                        let n = rng.gen_range(1..=*max_insert_len);
                        let ins: Vec<char> =
                            (0..n).map(|_| *alphabet.choose(rng).expect("non-empty alphabet")).collect();
                        let at = rng.gen_range(0..=s.len());
                        s.splice(at..at, ins);
                    } else {
                        let at = rng.gen_range(0..s.len());
                        s.remove(at);
                    }
                }
                s.into_iter().collect()
            }
        }
    }

    /// The exact input distribution as `(env, probability)` pairs, sorted by
    /// env, when it has at most `limit` points. Only uniform strings are
    /// finite.
    pub fn finite_support(&self, limit: usize) -> Option<Vec<(Env, f64)>> {
        let Base::Uniform { min_len, max_len, chars, probs, .. } = &self.base else { return None };
        let free = {
            let mut n: usize = 0;
            for l in *min_len..=*max_len {
                n = n.checked_add(chars.len().checked_pow(l as u32)?)?;
            }
            if n > limit {
                return None;
            }
            let p_len = 1.0 / (max_len - min_len + 1) as f64;
            let mut out = Vec::with_capacity(n);
            for l in *min_len..=*max_len {
                let mut idx = vec![0usize; l];
                loop {
                    let s: String = idx.iter().map(|&i| chars[i]).collect();
                    let p = idx.iter().map(|&i| probs[i]).product::<f64>() * p_len;
                    out.push((s, p));
                    if !odometer(&mut idx, chars.len()) {
                        break;
                    }
                }
            }
            out
        };

        let mut partial: Vec<(Vec<Option<Value>>, f64)> = vec![(vec![None; self.rules.len()], 1.0)];
        for &i in &self.order {
            let mut next = Vec::new();
            for (vals, p) in &partial {
                let choices: Vec<(Value, f64)> = match self.rules[i] {
                    Rule::Free => free.iter().map(|(s, q)| (Value::Str(s.clone()), *q)).collect(),
                    Rule::Substring(o) => {
                        let s: Vec<char> = vals[o].as_ref().and_then(Value::as_str).unwrap_or("").chars().collect();
                        let pairs = (s.len() + 1) * (s.len() + 2) / 2;
                        merge((0..pairs).map(|k| {
                            let (a, b) = nth_pair(s.len(), k);
                            (Value::Str(s[a..b].iter().collect()), 1.0 / pairs as f64)
                        }))
                    }
                    Rule::Bounded(o) => {
                        let len = o.and_then(|o| vals[o].as_ref()).and_then(Value::as_str).map(|s| s.chars().count());
                        let wide = (1..=999).map(|v| (Value::Int(v), 1.0 / 999.0));
                        match len {
                            Some(len) => merge(
                                (0..=len as i64)
                                    .map(|v| (Value::Int(v), 0.5 / (len + 1) as f64))
                                    .chain(wide.map(|(v, q)| (v, q * 0.5))),
                            ),
                            None => wide.collect(),
                        }
                    }
                };
                for (v, q) in choices {
                    let mut vals = vals.clone();
                    vals[i] = Some(v);
                    next.push((vals, p * q));
                }
                if next.len() > limit {
                    return None;
                }
            }
            partial = next;
        }
        let envs =
            merge(partial.into_iter().map(|(v, p)| (Env(v.into_iter().map(|x| x.expect("assigned")).collect()), p)));
        Some(envs)
    }
}

fn merge<K: std::hash::Hash + Eq + Ord>(items: impl Iterator<Item = (K, f64)>) -> Vec<(K, f64)> {
    let mut m: HashMap<K, f64> = HashMap::new();
    for (k, p) in items {
        *m.entry(k).or_default() += p;
    }
    let mut v: Vec<_> = m.into_iter().collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

fn odometer(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// The `k`-th pair `(a, b)` with `0 <= a <= b <= len`, row-major.
fn nth_pair(len: usize, mut k: usize) -> (usize, usize) {
    for a in 0..=len {
        let row = len - a + 1;
        if k < row {
            return (a, a + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

fn topo_order(rules: &[Rule]) -> Option<Vec<usize>> {
    let dep = |r: &Rule| match r {
        Rule::Free | Rule::Bounded(None) => None,
        Rule::Substring(o) | Rule::Bounded(Some(o)) => Some(*o),
    };
    let mut order = Vec::new();
    let mut state = vec![0u8; rules.len()];
    fn visit(
        i: usize,
        rules: &[Rule],
        dep: &dyn Fn(&Rule) -> Option<usize>,
        state: &mut [u8],
        order: &mut Vec<usize>,
    ) -> bool {
        match state[i] {
            2 => return true,
            1 => return false,
            _ => {}
        }
        state[i] = 1;
        if let Some(d) = dep(&rules[i]) {
            if !visit(d, rules, dep, state, order) {
                return false;
            }
        }
        state[i] = 2;
        order.push(i);
        true
    }
    for i in 0..rules.len() {
        if !visit(i, rules, &dep, &mut state, &mut order) {
            return None;
        }
    }
    Some(order)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dsl::InputDecl;

    #[test]
    fn charset_expansion() {
        let cs = expand_charset(DEFAULT_CHARSET);
        assert_eq!(cs.len(), 26 + 26 + 10 + 5);
        assert!(cs.contains(&'-') && cs.contains(&'|') && cs.contains(&';'));
        assert_eq!(insertion_alphabet().len(), 94);
    }

    #[test]
    fn nth_pair_covers_all() {
        let pairs: Vec<_> = (0..6).map(|k| nth_pair(2, k)).collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn mutation_lengths() {
        let sig = Signature::strings(&["x"]);
        let cfg = DistributionConfig::MutationFuzzer(MutationFuzzer::default());
        let s = InputSampler::new(&cfg, &sig, &["ab".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let n = s.sample(&mut rng).get(0).as_str().unwrap().chars().count();
            assert!(n == 1 || (3..=12).contains(&n), "length {n}");
        }
    }

    #[test]
    fn bounded_int_rule() {
        let sig = Signature::new(vec![
            InputDecl { name: "s".into(), sort: Sort::String },
            InputDecl { name: "n".into(), sort: Sort::Int },
        ])
        .unwrap();
        let cfg = DistributionConfig::UniformString(UniformString { min_len: 5, max_len: 5, ..Default::default() });
        let s = InputSampler::new(&cfg, &sig, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let Value::Int(n) = s.sample(&mut rng).get(1).clone() else { panic!() };
            assert!((0..=999).contains(&n));
        }
    }

    #[test]
    fn mutation_requires_seed() {
        let cfg = DistributionConfig::MutationFuzzer(MutationFuzzer::default());
        assert!(InputSampler::new(&cfg, &Signature::strings(&["x"]), &[]).is_err());
    }

    #[test]
    fn finite_support_sums_to_one() {
        let sig = Signature::strings(&["x", "y"]);
        let cfg = DistributionConfig::UniformString(UniformString {
            min_len: 1,
            max_len: 2,
            charset: "ab".into(),
            whitespace_weight: 2,
            relations: vec![Relation::SubstringOf { arg: "y".into(), of: "x".into() }],
        });
        let s = InputSampler::new(&cfg, &sig, &[]).unwrap();
        let sup = s.finite_support(10_000).unwrap();
        let total: f64 = sup.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let single =
            sup.iter().find(|(e, _)| e.get(0).as_str() == Some(" ") && e.get(1).as_str() == Some(" ")).unwrap().1;
        // P(len 1) * P(' ') * P(substring " " of " ") = 1/2 * 2/4 * 1/3
        assert!((single - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn relation_cycles_rejected() {
        let sig = Signature::strings(&["x", "y"]);
        let cfg = DistributionConfig::UniformString(UniformString {
            relations: vec![
                Relation::SubstringOf { arg: "y".into(), of: "x".into() },
                Relation::SubstringOf { arg: "x".into(), of: "y".into() },
            ],
            ..Default::default()
        });
        assert!(InputSampler::new(&cfg, &sig, &[]).is_err());
    }
}
