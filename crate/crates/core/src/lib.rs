//! Differential trees for difference and change detection between event datasets.
//!
//! A differential tree is grown on `d` stacked datasets that share a schema.
//! Every node carries a Poisson homogeneity test of the per-level event counts
//! across datasets; splits maximize the summed likelihood-ratio statistic of the
//! two children, and pruning keeps the most significant patterns. The minimum
//! p-value of a tree is adjusted for multiplicity by Bonferroni and by
//! permutation interpolation, optionally stabilized by bagging.
//!
//! Module map:
//!
//! * [`data`]: typed frames, CSV ingestion, count matrices.
//! * [`stats`]: likelihood-ratio homogeneity statistics and chi-square tails.
//! * [`tree`]: growing, surrogate routing, pruning and rendering.
//! * [`adjust`]: Bonferroni, permutation nulls, interpolation and bagging.
//! * [`sequential`]: sliding two-window surveillance.
//! * [`sim`]: duplicate-and-reassign power simulations.

pub mod adjust;
pub mod data;
mod error;
pub mod rng;
pub mod sequential;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};

pub use data::{CountMatrix, Frame, FrameConfig, Role, VariableKind, VariableSpec};
pub use stats::{chisq_sf, AtomicModel, TestResult};
pub use tree::{DiffTree, GrowConfig, Node, PruneRule, Split};
