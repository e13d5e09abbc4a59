//! Homomorphic Self-Repairing Codes (HSRC) and a discrete-time simulator for
//! in-network redundancy generation in erasure-coded storage.
//!
//! The crate is split along the data path:
//!
//! - [`gf`]: arithmetic in GF(2^m).
//! - [`codec`]: encoding objects into `n` fragments, decoding from any basis,
//!   and two-fragment repair through the homomorphic property.
//! - [`combinatorics`]: the repair triplets `(i, j) -> k`, out/in-creation sets
//!   and bases.
//! - [`schedule`]: the per-step transfer engine, the lineage validator, metrics
//!   and an exhaustive oracle for tiny instances.
//! - [`policies`]: source allocation and triplet ordering heuristics.
//! - [`sim`]: availability traces, the naive baseline and batch experiments.
//!
//! Storage nodes are numbered `1..=n`. Per-node vectors in the scheduling
//! layers have length `n + 1` and reserve slot `0` for the source.

pub mod codec;
pub mod combinatorics;
pub mod gf;
pub mod policies;
pub mod schedule;
pub mod sim;

pub use codec::{CodeParams, CodecError, DataObject, Fragment, FragmentSet};
pub use combinatorics::{Basis, Triplet, TripletSet};
pub use gf::{Field, FieldElement, FieldError};
pub use policies::{PolicyConfig, SourcePolicy, TripletPolicy};
pub use schedule::{Capacity, Metrics, NodeProgress, Schedule, StepPlan};
pub use sim::{AvailabilityTrace, ComparisonReport, ExperimentConfig};
