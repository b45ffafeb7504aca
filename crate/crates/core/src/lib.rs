//! Thought-level condensation of chain-of-thought training traces.
//!
//! * [`trace`]: segmentation into thoughts, reflection-marker lexicons, JSONL datasets.
//! * [`condense`]: edge-preserving, head/tail/middle and random index plans.
//! * [`perturb`]: content perturbation that keeps trace structure and reflection markers.
//! * [`mi`]: Kraskov k-NN mutual information between embedding matrices, and the `.embm` format.
//! * [`stats`]: length and reflection statistics.
//! * [`cli`]: the `thoughtprune` command line.

pub mod cli;
pub mod condense;
pub mod mi;
pub mod perturb;
pub mod rng;
pub mod stats;
pub mod trace;

/// Version stamped into every JSON report; bumped on any schema change.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub use condense::{apply, condense_dataset, plan_indices, CondensationPlan, CondensationReport, CondenseConfig, Strategy};
pub use mi::{digamma, estimate_mi, EmbeddingMatrix, MiEstimate, MiOptions};
pub use perturb::{perturb_dataset, perturb_thought, select_perturb_indices, PerturbationConfig, Region, SentencePool};
pub use trace::{count_reflection_tokens, join, segment, CoTExample, ReflectionLexicon, ThoughtTrace};
