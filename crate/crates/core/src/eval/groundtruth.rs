use rayon::prelude::*;

use super::traverse::Traverse;
use crate::error::{Error, Result};

/// For each query frame, the reference frame of the same physical place, or
/// `None` when the query has no reference counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    mapping: Vec<Option<usize>>,
    reference_count: usize,
    tolerance_m: Option<f64>,
}

impl GroundTruth {
    pub fn new(mapping: Vec<Option<usize>>, reference_count: usize) -> Result<Self> {
        if let Some((q, r)) = mapping
            .iter()
            .enumerate()
            .find_map(|(q, r)| r.filter(|&r| r >= reference_count).map(|r| (q, r)))
        {
            return Err(Error::invalid(format!(
                "query {q} maps to reference {r}, but the reference has {reference_count} frames"
            )));
        }
        Ok(GroundTruth {
            mapping,
            reference_count,
            tolerance_m: None,
        })
    }

    pub fn identity(count: usize) -> Self {
        GroundTruth {
            mapping: (0..count).map(Some).collect(),
            reference_count: count,
            tolerance_m: None,
        }
    }

    pub fn reversal(count: usize) -> Self {
        GroundTruth {
            mapping: (0..count).rev().map(Some).collect(),
            reference_count: count,
            tolerance_m: None,
        }
    }

    pub fn with_tolerance(mut self, tolerance_m: f64) -> Self {
        self.tolerance_m = Some(tolerance_m);
        self
    }

    pub fn get(&self, query: usize) -> Option<usize> {
        self.mapping.get(query).copied().flatten()
    }

    pub fn mapping(&self) -> &[Option<usize>] {
        &self.mapping
    }

    pub fn query_count(&self) -> usize {
        self.mapping.len()
    }

    pub fn reference_count(&self) -> usize {
        self.reference_count
    }

    /// Metric tolerance the mapping was built with, when it came from positions.
    pub fn tolerance_m(&self) -> Option<f64> {
        self.tolerance_m
    }
}

/// Maps each query frame to its positionally nearest reference frame (ties go
/// to the smaller index). Queries farther than `tolerance_m` from every
/// reference frame stay unmatched.
pub fn associate_ground_truth(
    query: &Traverse,
    reference: &Traverse,
    tolerance_m: f64,
) -> Result<GroundTruth> {
    if query.kind() != reference.kind() {
        return Err(Error::invalid(format!(
            "coordinate kinds differ: query is {:?}, reference is {:?}",
            query.kind(),
            reference.kind()
        )));
    }
    if query.is_empty() || reference.is_empty() {
        return Err(Error::invalid("ground truth needs non-empty traverses"));
    }
    if !(tolerance_m > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tolerance_m}"
        )));
    }
    let mapping = query
        .frames()
        .par_iter()
        .map(|q| {
            let mut best = (usize::MAX, f64::INFINITY);
            for (i, r) in reference.frames().iter().enumerate() {
                let d = reference.distance(q.position, r.position);
                if d < best.1 {
                    best = (i, d);
                }
            }
            (best.1 <= tolerance_m).then_some(best.0)
        })
        .collect();
    Ok(GroundTruth {
        mapping,
        reference_count: reference.len(),
        tolerance_m: Some(tolerance_m),
    })
}

/// Piecewise-linear reference index over query index through the anchors,
/// rounded to the nearest frame. Queries before the first or after the last
/// anchor continue the boundary segment's slope; extrapolated indices that
/// fall outside the reference are left unmatched.
pub fn interpolate_anchors(
    anchors: &[(usize, usize)],
    query_count: usize,
    reference_count: usize,
) -> Result<GroundTruth> {
    if anchors.len() < 2 {
        return Err(Error::invalid(format!(
            "interpolation needs at least 2 anchors, got {}",
            anchors.len()
        )));
    }
    if let Some(w) = anchors.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(Error::invalid(format!(
            "anchor query indices must strictly increase ({} then {})",
            w[0].0, w[1].0
        )));
    }
    if let Some(&(q, r)) = anchors.iter().find(|a| a.1 >= reference_count) {
        return Err(Error::invalid(format!(
            "anchor ({q}, {r}) is outside the reference"
        )));
    }
    let mapping = (0..query_count)
        .map(|q| {
            // segment whose right anchor is the first one beyond q, clamped to
            // the boundary segments
            let seg = anchors
                .iter()
                .position(|a| a.0 > q)
                .unwrap_or(anchors.len())
                .clamp(1, anchors.len() - 1);
            let (q0, r0) = anchors[seg - 1];
            let (q1, r1) = anchors[seg];
            let slope = (r1 as f64 - r0 as f64) / (q1 as f64 - q0 as f64);
            let r = (r0 as f64 + slope * (q as f64 - q0 as f64)).round();
            (r >= 0.0 && r < reference_count as f64).then_some(r as usize)
        })
        .collect();
    Ok(GroundTruth {
        mapping,
        reference_count,
        tolerance_m: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::traverse::{CoordinateKind, Frame};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traverse(points: &[[f64; 2]]) -> Traverse {
        Traverse::new(
            points
                .iter()
                .enumerate()
                .map(|(i, &p)| Frame {
                    id: i.to_string(),
                    timestamp: i as f64,
                    position: p,
                })
                .collect(),
            CoordinateKind::PlanarM,
        )
        .unwrap()
    }

    #[test]
    fn identical_traverses_map_to_identity() {
        let t = Traverse::straight_line(30, 2.0);
        let gt = associate_ground_truth(&t, &t, 1.0).unwrap();
        assert_eq!(gt, GroundTruth::identity(30).with_tolerance(1.0));
    }

    #[test]
    fn reversed_reference_maps_to_index_reversal() {
        let pts: Vec<[f64; 2]> = (0..25)
            .map(|i| [i as f64 * 2.0, (i as f64).sin()])
            .collect();
        let rev: Vec<[f64; 2]> = pts.iter().rev().cloned().collect();
        let gt = associate_ground_truth(&traverse(&pts), &traverse(&rev), 5.0).unwrap();
        assert_eq!(gt.mapping(), GroundTruth::reversal(25).mapping());
    }

    #[test]
    fn random_positions_match_all_pairs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let q: Vec<[f64; 2]> = (0..60)
            .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
            .collect();
        let r: Vec<[f64; 2]> = (0..80)
            .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
            .collect();
        let tol = 6.0;
        let gt = associate_ground_truth(&traverse(&q), &traverse(&r), tol).unwrap();
        for (qi, qp) in q.iter().enumerate() {
            let dists: Vec<f64> = r
                .iter()
                .map(|rp| ((qp[0] - rp[0]).powi(2) + (qp[1] - rp[1]).powi(2)).sqrt())
                .collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let expected = if min <= tol {
                dists.iter().position(|&d| d == min)
            } else {
                None
            };
            assert_eq!(gt.get(qi), expected, "query {qi}");
        }
        assert!(gt.mapping().iter().any(Option::is_none));
        assert!(gt.mapping().iter().any(Option::is_some));
    }

    #[test]
    fn coordinate_kind_mismatch_is_an_error() {
        let a = Traverse::straight_line(3, 1.0);
        let b = Traverse::new(a.frames().to_vec(), CoordinateKind::Wgs84).unwrap();
        assert!(associate_ground_truth(&a, &b, 10.0).is_err());
    }

    #[test]
    fn anchors_identity_and_constant_slope() {
        let gt = interpolate_anchors(&[(0, 0), (10, 10)], 11, 11).unwrap();
        assert_eq!(gt, GroundTruth::identity(11));
        let gt = interpolate_anchors(&[(0, 0), (10, 20)], 11, 21).unwrap();
        for q in 0..11 {
            assert_eq!(gt.get(q), Some(2 * q));
        }
    }

    #[test]
    fn three_anchors_match_segment_oracle() {
        let anchors = [(2usize, 5usize), (9, 9), (20, 40)];
        let gt = interpolate_anchors(&anchors, 25, 100).unwrap();
        let seg = |q: f64, a: (usize, usize), b: (usize, usize)| {
            a.1 as f64 + (b.1 as f64 - a.1 as f64) * (q - a.0 as f64) / (b.0 as f64 - a.0 as f64)
        };
        for q in 0..25 {
            let v = if q < 9 {
                seg(q as f64, anchors[0], anchors[1])
            } else {
                seg(q as f64, anchors[1], anchors[2])
            };
            assert_eq!(gt.get(q), Some(v.round() as usize), "query {q}");
        }
    }

    #[test]
    fn extrapolation_outside_reference_is_unmatched() {
        let gt = interpolate_anchors(&[(5, 0), (10, 10)], 12, 11).unwrap();
        assert_eq!(gt.get(0), None);
        assert_eq!(gt.get(5), Some(0));
        assert_eq!(gt.get(11), None);
    }

    #[test]
    fn bad_anchors_are_rejected() {
        assert!(interpolate_anchors(&[(0, 0)], 5, 5).is_err());
        assert!(interpolate_anchors(&[(3, 0), (3, 4)], 5, 5).is_err());
        assert!(interpolate_anchors(&[(4, 0), (1, 4)], 5, 5).is_err());
    }
}
