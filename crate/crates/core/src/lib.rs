//! Reconstruction of minimal deterministic predictors from discrete
//! symbol sequences.
//!
//! The library ingests symbol data, counts subword occurrences, and splits
//! histories into causal states by statistical testing of their conditional
//! next-symbol distributions.  The result is a unifilar state machine whose
//! states partition the observed history suffixes.  Reference processes,
//! sequence simulators, and a sweep harness for error-scaling experiments
//! are included.

pub mod alphabet;
pub mod engine;
mod jsonfmt;
pub mod machine;
pub mod process;
pub mod stationary;
pub mod stats;
pub mod sweep;
pub mod tree;
pub mod words;

pub use alphabet::{Alphabet, Corpus, IngestMode, SymbolId, SymbolSequence};
pub use engine::{infer, InferenceConfig, StatePartition};
pub use machine::CausalStateMachine;
pub use process::ProcessSpec;
pub use stats::TestKind;
pub use sweep::{run_sweep, suggest_lmax, SweepConfig, TrialRecord};
pub use tree::{build_tree, CountVector, ParseTree};
pub use words::WordDistribution;
