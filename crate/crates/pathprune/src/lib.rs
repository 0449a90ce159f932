//! Occupancy-grid path planning with learned search-space pruning.
//!
//! The crate is organised as a pipeline:
//!
//! * [`grid`] — grid maps, paths, and the text scene format;
//! * [`scenario`] — procedural scene families and shortest-path labelling;
//! * [`dataset`] — on-disk datasets with deterministic train/val/test splits;
//! * [`planners`] — Dijkstra, A*, bidirectional A*, breadth-first, and greedy
//!   best-first search over grid maps, all instrumented with iteration counts;
//! * [`encoder`] — a small from-scratch convolutional network that maps a scene
//!   to a soft keep/discard mask over its cells;
//! * [`pruning`] — turning masks (learned or oracle corridors) into pruned
//!   scenes and running planners on them with a soundness fallback;
//! * [`bench`] — the benchmark harness and report emission used by the CLI.

pub mod bench;
pub mod dataset;
pub mod encoder;
pub mod grid;
pub mod planners;
pub mod pruning;
pub mod scenario;

#[cfg(test)]
pub(crate) mod testutil;
