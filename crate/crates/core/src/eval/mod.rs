//! Ground truth, resampling, precision-recall scoring and diagnostics.

mod groundtruth;
mod pca;
mod pr;
mod traverse;

pub use groundtruth::{associate_ground_truth, interpolate_anchors, GroundTruth};
pub use pca::{pca_project, Projection};
pub use pr::{score_matches, sweep_sequence_length, PrCurve, PrPoint};
pub use traverse::{
    haversine_m, resample_by_distance, resample_indices, CoordinateKind, Frame, Traverse,
    EARTH_RADIUS_M,
};

/// Converts a metric length to whole frames at the given spacing, rounding to
/// the nearest frame.
pub fn meters_to_frames(meters: f64, spacing_m: f64) -> usize {
    (meters / spacing_m).round().max(0.0) as usize
}
