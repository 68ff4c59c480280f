#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use pacsynth::brute::{enumerate_all, BruteConfig};
use pacsynth::dsl::{Component, ComponentSet, Env, Func, Sort, Value};
use pacsynth::harness::CountInstance;
use pacsynth::Example;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn tasks_dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tasks").join(sub)
}

fn random_string<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *b"ab".choose(rng).unwrap() as char).collect()
}

fn random_value<R: Rng>(rng: &mut R, sort: Sort) -> Value {
    match sort {
        Sort::String => Value::Str(random_string(rng, 3)),
        Sort::Int => Value::Int(rng.gen_range(-1..=3)),
        Sort::Bool => Value::Bool(rng.gen()),
    }
}

/// Every string over `{a, b}` of length at most `max_len`.
pub fn ab_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|s| [format!("{s}a"), format!("{s}b")]).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// A random small counting instance: at most two inputs, at most six
/// components, at most three examples. Outputs come from a random program
/// half of the time so that consistent programs exist.
pub fn random_instance<R: Rng>(rng: &mut R, max_size: usize, max_nesting: usize, cap: u128) -> Option<CountInstance> {
    let n_inputs = rng.gen_range(1..=2);
    let mut sorts = vec![Sort::String];
    if n_inputs == 2 {
        sorts.push(if rng.gen_bool(0.3) { Sort::Int } else { Sort::String });
    }
    let mut leaves: Vec<Component> = sorts
        .iter()
        .enumerate()
        .map(|(i, s)| Component::Input { index: i, name: ["x", "y"][i].into(), sort: *s })
        .collect();
    let consts = [Value::Str("a".into()), Value::Str("b".into()), Value::Str("".into()), Value::Int(0), Value::Int(1)];
    let n_consts = rng.gen_range(0..=2);
    for c in consts.choose_multiple(rng, n_consts) {
        leaves.push(Component::Const(c.clone()));
    }
    let budget = 6 - leaves.len();
    let n_funcs = rng.gen_range(1..=budget.min(3));
    let funcs: Vec<Func> = Func::ALL.choose_multiple(rng, n_funcs).copied().collect();
    let components = Arc::new(ComponentSet::new(leaves, funcs).ok()?);
    let output = if rng.gen_bool(0.8) { Sort::String } else { Sort::Int };

    let n_examples = rng.gen_range(0..=3);
    let inputs: Vec<Env> =
        (0..n_examples).map(|_| Env(sorts.iter().map(|s| random_value(rng, *s)).collect())).collect();

    let mut size = max_size;
    loop {
        let cfg = BruteConfig::new(components.clone(), output, size, max_nesting, inputs.clone());
        if cfg.estimate() <= cap {
            break;
        }
        if size == 1 {
            return None;
        }
        size -= 1;
    }

    let outputs: Vec<Value> = if rng.gen_bool(0.5) {
        let cfg = BruteConfig::new(components.clone(), output, size, max_nesting, inputs.clone());
        let all = enumerate_all(&cfg).ok()?;
        match all.choose(rng) {
            Some(p) => inputs.iter().map(|e| p.eval(e)).collect(),
            None => inputs.iter().map(|_| random_value(rng, output)).collect(),
        }
    } else {
        inputs.iter().map(|_| random_value(rng, output)).collect()
    };

    let domain = if sorts.iter().all(|s| *s == Sort::String) {
        let strs = ab_strings(2);
        let mut envs = vec![Vec::new()];
        for _ in &sorts {
            envs = envs
                .into_iter()
                .flat_map(|e: Vec<Value>| {
                    strs.iter().map(move |s| {
                        let mut e = e.clone();
                        e.push(Value::Str(s.clone()));
                        e
                    })
                })
                .collect();
        }
        Some(envs.into_iter().map(Env).collect())
    } else {
        None
    };

    Some(CountInstance {
        components,
        output,
        max_size: size,
        max_nesting,
        examples: inputs.into_iter().zip(outputs).map(|(inputs, output)| Example { inputs, output }).collect(),
        domain,
    })
}
