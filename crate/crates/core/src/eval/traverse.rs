use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateKind {
    /// Positions are `(x, y)` in meters.
    PlanarM,
    /// Positions are `(lat, lon)` in degrees.
    Wgs84,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub timestamp: f64,
    pub position: [f64; 2],
}

/// Frame metadata for one pass along a route.
#[derive(Debug, Clone, PartialEq)]
pub struct Traverse {
    frames: Vec<Frame>,
    kind: CoordinateKind,
}

/// Great-circle distance between two `(lat, lon)` points in degrees.
pub fn haversine_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lat1, lat2) = (a[0].to_radians(), b[0].to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b[1] - a[1]).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

impl Traverse {
    /// Validates finite positions and non-decreasing timestamps.
    pub fn new(frames: Vec<Frame>, kind: CoordinateKind) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if !f.timestamp.is_finite() || !f.position.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!(
                    "frame {i} ({}) has a non-finite field",
                    f.id
                )));
            }
            if i > 0 && f.timestamp < frames[i - 1].timestamp {
                return Err(Error::invalid(format!(
                    "timestamps decrease at frame {i} ({} < {})",
                    f.timestamp,
                    frames[i - 1].timestamp
                )));
            }
        }
        Ok(Traverse { frames, kind })
    }

    /// Frames laid out along the x axis at a fixed spacing, one second apart.
    pub fn straight_line(count: usize, spacing_m: f64) -> Self {
        let frames = (0..count)
            .map(|i| Frame {
                id: format!("{i:06}"),
                timestamp: i as f64,
                position: [i as f64 * spacing_m, 0.0],
            })
            .collect();
        Traverse {
            frames,
            kind: CoordinateKind::PlanarM,
        }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn kind(&self) -> CoordinateKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self.kind {
            CoordinateKind::PlanarM => (a[0] - b[0]).hypot(a[1] - b[1]),
            CoordinateKind::Wgs84 => haversine_m(a, b),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Traverse {
        Traverse {
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            kind: self.kind,
        }
    }
}

/// Greedy distance-based subsampling: keep frame 0, then every frame whose
/// path length since the last kept frame reaches `spacing_m`.
pub fn resample_indices(traverse: &Traverse, spacing_m: f64) -> Result<Vec<usize>> {
    if traverse.len() < 2 {
        return Err(Error::invalid(format!(
            "resampling needs at least 2 frames, got {}",
            traverse.len()
        )));
    }
    if !(spacing_m > 0.0) {
        return Err(Error::invalid(format!(
            "spacing must be positive, got {spacing_m}"
        )));
    }
    let frames = traverse.frames();
    let mut kept = vec![0];
    let mut travelled = 0.0;
    for i in 1..frames.len() {
        travelled += traverse.distance(frames[i - 1].position, frames[i].position);
        if travelled >= spacing_m {
            kept.push(i);
            travelled = 0.0;
        }
    }
    Ok(kept)
}

pub fn resample_by_distance(traverse: &Traverse, spacing_m: f64) -> Result<Traverse> {
    Ok(traverse.select(&resample_indices(traverse, spacing_m)?))
}
