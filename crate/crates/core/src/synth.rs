//! Synthetic reference and query traverses.
//!
//! Each place has a left and a right region descriptor, each the sum of a
//! category component shared by every place of that category and a
//! place-specific component. The query traverse sees every place through one
//! global per-dimension affine condition plus independent per-frame noise.
//! With `reverse` set, the query visits places in the opposite order and sees
//! each place's regions mirrored (left and right swapped).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::descriptor::{CompositeSet, DescriptorSet};
use crate::error::{Error, Result};
use crate::eval::{Frame, GroundTruth, Traverse};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_places: usize,
    /// Length of each region descriptor; whole descriptors are twice this.
    pub dim: usize,
    pub seed: u64,
    pub place_signal_sigma: f64,
    pub category_count: usize,
    pub category_sigma: f64,
    /// Per-dimension multiplicative condition drawn uniformly from this range.
    pub condition_scale_range: (f64, f64),
    /// Per-dimension additive condition drawn from N(0, sigma).
    pub condition_offset_sigma: f64,
    pub noise_sigma: f64,
    pub reverse: bool,
    pub spacing_m: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_places: 200,
            dim: 64,
            seed: 0,
            place_signal_sigma: 1.0,
            category_count: 5,
            category_sigma: 2.0,
            condition_scale_range: (1.0, 1.0),
            condition_offset_sigma: 0.0,
            noise_sigma: 0.0,
            reverse: false,
            spacing_m: 2.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (a_min, a_max) = self.condition_scale_range;
        let checks = [
            (self.n_places >= 2, "n_places must be at least 2"),
            (self.dim >= 2, "dim must be at least 2"),
            (
                self.category_count >= 1,
                "category_count must be at least 1",
            ),
            (
                [
                    self.place_signal_sigma,
                    self.category_sigma,
                    self.condition_offset_sigma,
                    self.noise_sigma,
                ]
                .iter()
                .all(|s| s.is_finite() && *s >= 0.0),
                "sigmas must be finite and non-negative",
            ),
            (
                a_min > 0.0 && a_min.is_finite(),
                "scale minimum must be positive",
            ),
            (
                a_max >= a_min && a_max.is_finite(),
                "scale maximum must not be below the minimum",
            ),
            (
                self.spacing_m > 0.0 && self.spacing_m.is_finite(),
                "spacing must be positive",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

/// A per-dimension affine appearance change `x -> scale * x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Condition {
    pub fn identity(dim: usize) -> Self {
        Condition {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
        }
    }

    pub fn sample<R: Rng>(
        dim: usize,
        scale_range: (f64, f64),
        offset_sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let uniform = Uniform::new_inclusive(scale_range.0, scale_range.1);
        let normal = Normal::new(0.0, offset_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let scale = (0..dim).map(|_| uniform.sample(rng)).collect();
        let offset = (0..dim).map(|_| normal.sample(rng)).collect();
        Ok(Condition { scale, offset })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scale)
            .zip(&self.offset)
            .map(|((v, a), b)| a * v + b)
            .collect()
    }

    pub fn apply_to_set(&self, set: &DescriptorSet) -> Result<DescriptorSet> {
        if set.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: set.dim(),
            });
        }
        let data = set
            .rows()
            .flat_map(|r| {
                let x: Vec<f64> = r.iter().map(|&v| v as f64).collect();
                self.apply(&x).into_iter().map(|v| v as f32)
            })
            .collect();
        DescriptorSet::from_rows(set.dim(), data)
    }

    /// Applies the same condition to both region halves.
    pub fn apply_to_composite(&self, set: &CompositeSet) -> Result<CompositeSet> {
        CompositeSet::new(
            self.apply_to_set(set.left())?,
            self.apply_to_set(set.right())?,
        )
    }
}

/// Descriptors and metadata for one traverse.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSide {
    /// Whole-image descriptors: each row is the region halves side by side.
    pub whole: DescriptorSet,
    pub composite: CompositeSet,
    pub traverse: Traverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub reference: SynthSide,
    pub query: SynthSide,
    pub ground_truth: GroundTruth,
    pub condition: Condition,
}

fn gaussian_vectors(
    rng: &mut ChaCha8Rng,
    count: usize,
    dim: usize,
    sigma: f64,
) -> Result<Vec<Vec<f64>>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..count)
        .map(|_| (0..dim).map(|_| normal.sample(rng)).collect())
        .collect())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn side(left: Vec<f32>, right: Vec<f32>, dim: usize, traverse: Traverse) -> Result<SynthSide> {
    let composite = CompositeSet::new(
        DescriptorSet::from_rows(dim, left)?,
        DescriptorSet::from_rows(dim, right)?,
    )?;
    Ok(SynthSide {
        whole: composite.to_whole(),
        composite,
        traverse,
    })
}

/// Generates a reference/query pair. Output is a pure function of `config`.
pub fn generate(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let (n, dim) = (config.n_places, config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let cat_left = gaussian_vectors(&mut rng, config.category_count, dim, config.category_sigma)?;
    let cat_right = gaussian_vectors(&mut rng, config.category_count, dim, config.category_sigma)?;
    let place_left = gaussian_vectors(&mut rng, n, dim, config.place_signal_sigma)?;
    let place_right = gaussian_vectors(&mut rng, n, dim, config.place_signal_sigma)?;
    let condition = Condition::sample(
        dim,
        config.condition_scale_range,
        config.condition_offset_sigma,
        &mut rng,
    )?;
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;

    let truth: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|p| {
            let c = p % config.category_count;
            (
                add(&cat_left[c], &place_left[p]),
                add(&cat_right[c], &place_right[p]),
            )
        })
        .collect();

    let mut ref_left = Vec::with_capacity(n * dim);
    let mut ref_right = Vec::with_capacity(n * dim);
    for (l, r) in &truth {
        ref_left.extend(l.iter().map(|&v| v as f32));
        ref_right.extend(r.iter().map(|&v| v as f32));
    }

    let order: Vec<usize> = if config.reverse {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    let mut q_left = Vec::with_capacity(n * dim);
    let mut q_right = Vec::with_capacity(n * dim);
    for &p in &order {
        let (l, r) = &truth[p];
        let (seen_left, seen_right) = if config.reverse { (r, l) } else { (l, r) };
        for (half, out) in [(seen_left, &mut q_left), (seen_right, &mut q_right)] {
            out.extend(
                condition
                    .apply(half)
                    .into_iter()
                    .map(|v| (v + noise.sample(&mut rng)) as f32),
            );
        }
    }

    let reference_traverse = Traverse::straight_line(n, config.spacing_m);
    let query_frames = order
        .iter()
        .enumerate()
        .map(|(j, &p)| Frame {
            id: format!("q{j:06}"),
            timestamp: j as f64,
            position: [p as f64 * config.spacing_m, 0.0],
        })
        .collect();
    let query_traverse = Traverse::new(query_frames, reference_traverse.kind())?;
    let ground_truth = GroundTruth::new(order.iter().map(|&p| Some(p)).collect(), n)?
        .with_tolerance(config.spacing_m / 2.0);

    Ok(SynthWorld {
        reference: side(ref_left, ref_right, dim, reference_traverse)?,
        query: side(q_left, q_right, dim, query_traverse)?,
        ground_truth,
        condition,
    })
}
