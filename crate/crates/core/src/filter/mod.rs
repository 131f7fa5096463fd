//! Pruned anomaly detection.
//!
//! Computing the exact divergence for every segment is the dominant cost of
//! scoring. This module decides most segments from cheaper quantities: an L1
//! sandwich around the divergence, and an upper bound built from per-group
//! summaries of the action feature and its reconstruction.

mod ados;
mod bounds;
mod partition;
mod select;
mod sketch;

pub use ados::{
    ados_detect, calibrate_trigger, AdosConfig, AdosDetector, DetectionResult, FilterDecision,
    FilterPath,
};
pub use bounds::{
    js_l1_bounds, re_i_group_bound, re_i_with_partial, sparse_partial, t_func, BoundVariant,
};
pub use partition::{DimensionPartition, DEFAULT_GROUPS};
pub use select::{
    bound_soundness, random_pair, random_sparse_simplex, SoundnessReport, VariantReport, BOUND_TOL,
};
pub use sketch::{adg_sketch, adg_sketch_aligned, AdgSketch, GroupStats, Grouping};
