//! Place recognition over sets of fixed-length descriptors.
//!
//! The pipeline standardizes each descriptor set per dimension against its own
//! statistics, builds a cosine cost matrix between a query traverse and a
//! reference traverse, and searches that matrix for low-cost constant-slope
//! sequences. Matches are accepted by thresholding a trajectory uniqueness
//! ratio and scored as a precision-recall curve.
//!
//! ```
//! use nsdvpr::{DescriptorSet, normalize_batch, build_cost_matrix, SearchParams, match_all};
//!
//! let reference = DescriptorSet::from_rows(2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
//! let (normalized, _stats) = normalize_batch(&reference).unwrap();
//! let matrix = build_cost_matrix(&normalized, &normalized).unwrap();
//! let params = SearchParams { seq_len: 1, ..SearchParams::default() };
//! let results = match_all(&matrix, &params);
//! assert_eq!(results.len(), 3);
//! ```

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod descriptor;
mod error;
pub mod eval;
pub mod io;
pub mod matcher;
pub mod pipeline;
pub mod seqsearch;
pub mod synth;

pub use descriptor::{
    make_composite, normalize_batch, normalize_segmented, normalize_with, CompositeDescriptor,
    CompositeSet, DescriptorSet, NormStats,
};
pub use error::{Error, Result};
pub use eval::{
    associate_ground_truth, interpolate_anchors, pca_project, resample_by_distance, score_matches,
    sweep_sequence_length, CoordinateKind, Frame, GroundTruth, PrCurve, PrPoint, Projection,
    Traverse,
};
pub use matcher::{
    build_composite_cost_matrix, build_cost_matrix, composite_distance, cosine_distance, CostMatrix,
};
pub use seqsearch::{match_all, search, sequence_cost, MatchResult, SearchParams};
