//! Programming-by-example string synthesis with probabilistic
//! generalization guarantees.
//!
//! A bottom-up enumerator counts every program consistent with the examples
//! seen so far; the guarantee loop keeps drawing i.i.d. examples until the
//! consistent space is small enough that any survivor is, with probability at
//! least `1 - delta`, wrong on at most an `epsilon` fraction of inputs.

pub mod brute;
pub mod dsl;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod guarantee;
pub mod harness;
pub mod oracle;
pub mod unify;

pub use engine::{Program, StunConfig, StunEngine};
pub use error::{Error, Result};
pub use guarantee::{
    default_g, run_synguar, run_tiered, sample_complexity, ExampleSource, GuaranteeParams, HypothesisSize,
    StoppingFunction, SynthesisEngine,
};
pub use oracle::{Example, Task, TaskOracle};
