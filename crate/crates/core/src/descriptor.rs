//! Descriptor storage and per-dimension standardization.
//!
//! Every descriptor set is standardized against its own statistics: each
//! dimension is shifted by the set mean and divided by the set standard
//! deviation. Any per-dimension affine change applied to a whole set (a global
//! appearance condition) cancels out under this transform.

use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};

/// Standard deviations below this map the dimension to zero.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// An ordered, immutable collection of equal-length descriptors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f32>,
    labels: Option<Vec<String>>,
}

impl DescriptorSet {
    /// Builds a set from row-major `data`. Fails on a zero `dim`, a length that
    /// is not a multiple of `dim`, or any NaN/Inf value.
    pub fn from_rows(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("descriptor dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                dim: pos % dim,
            });
        }
        Ok(Self {
            dim,
            data,
            labels: None,
        })
    }

    pub fn from_vecs<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) => r.as_ref().len(),
            None => return Err(Error::EmptySet),
        };
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_rows(dim, data)
    }

    /// A set with no rows.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::from_rows(dim, Vec::new())
    }

    /// Attaches per-row frame identifiers, which must be unique.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.count() {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                self.count()
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::invalid(format!("duplicate label {l:?}")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Copies rows `range` into a new set. Labels are carried along.
    pub fn slice(&self, range: Range<usize>) -> DescriptorSet {
        assert!(range.end <= self.count(), "slice out of bounds");
        DescriptorSet {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
        }
    }

    /// New set whose row `i` is row `order[i]` of `self`.
    pub fn select(&self, order: &[usize]) -> DescriptorSet {
        let mut data = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        DescriptorSet {
            dim: self.dim,
            data,
            labels: self
                .labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub(crate) fn from_parts_unchecked(dim: usize, data: Vec<f32>) -> Self {
        debug_assert!(dim > 0 && data.len() % dim == 0);
        DescriptorSet {
            dim,
            data,
            labels: None,
        }
    }
}

/// Per-dimension mean and squared-deviation accumulator.
///
/// Accumulation is at 64-bit. The standard deviation is the population form
/// (divides by `n`). With fewer than two observations the deviation is
/// undefined and [`NormStats::normalize`] emits zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    dim: usize,
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    epsilon: f64,
}

impl NormStats {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        NormStats {
            dim,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        self.epsilon = epsilon;
        self
    }

    /// Two-pass statistics over every row of `set`.
    pub fn from_set(set: &DescriptorSet) -> Self {
        let dim = set.dim();
        let mut stats = NormStats::new(dim);
        let n = set.count();
        if n == 0 {
            return stats;
        }
        for row in set.rows() {
            for (m, &x) in stats.mean.iter_mut().zip(row) {
                *m += x as f64;
            }
        }
        let inv = 1.0 / n as f64;
        stats.mean.iter_mut().for_each(|m| *m *= inv);
        for row in set.rows() {
            for ((s, &m), &x) in stats.m2.iter_mut().zip(&stats.mean).zip(row) {
                let d = x as f64 - m;
                *s += d * d;
            }
        }
        stats.n = n as u64;
        stats
    }

    /// Folds one observation in (Welford's update).
    pub fn update(&mut self, descriptor: &[f32]) -> Result<()> {
        if descriptor.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: descriptor.len(),
            });
        }
        if let Some(d) = descriptor.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: self.n as usize,
                dim: d,
            });
        }
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(descriptor) {
            let x = x as f64;
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
        Ok(())
    }

    /// Combines two partial accumulators (Chan et al. pairwise merge).
    /// `a.merge(&b)` is deterministic for a fixed partitioning.
    pub fn merge(&mut self, other: &NormStats) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            self.n = other.n;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return Ok(());
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        for d in 0..self.dim {
            let delta = other.mean[d] - self.mean[d];
            self.mean[d] += delta * nb / n;
            self.m2[d] += other.m2[d] + delta * delta * na * nb / n;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Population standard deviation per dimension, `None` while `n < 2`.
    pub fn std_dev(&self) -> Option<Vec<f64>> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        Some(self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect())
    }

    /// Applies `(x - mean) / std` at 64-bit precision.
    pub fn normalize_f64(&self, descriptor: &[f32]) -> Result<Vec<f64>> {
        if descriptor.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: descriptor.len(),
            });
        }
        if self.n == 0 {
            return Err(Error::invalid(
                "normalization statistics have no observations",
            ));
        }
        let Some(sd) = self.std_dev() else {
            return Ok(vec![0.0; self.dim]);
        };
        Ok(descriptor
            .iter()
            .zip(&self.mean)
            .zip(&sd)
            .map(|((&x, &m), &s)| {
                if s < self.epsilon {
                    0.0
                } else {
                    (x as f64 - m) / s
                }
            })
            .collect())
    }

    /// Applies `(x - mean) / std`, rounding to storage precision.
    pub fn normalize(&self, descriptor: &[f32]) -> Result<Vec<f32>> {
        Ok(self
            .normalize_f64(descriptor)?
            .into_iter()
            .map(|v| v as f32)
            .collect())
    }

    fn normalize_set(&self, set: &DescriptorSet) -> Result<DescriptorSet> {
        let mut out = Vec::with_capacity(set.as_slice().len());
        for row in set.rows() {
            out.extend(self.normalize(row)?);
        }
        Ok(DescriptorSet {
            dim: set.dim,
            data: out,
            labels: set.labels.clone(),
        })
    }
}

/// Standardizes `set` against its own statistics and returns the statistics
/// for reuse.
pub fn normalize_batch(set: &DescriptorSet) -> Result<(DescriptorSet, NormStats)> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let stats = NormStats::from_set(set);
    let out = stats.normalize_set(set)?;
    Ok((out, stats))
}

/// Standardizes one descriptor with externally supplied statistics.
pub fn normalize_with(stats: &NormStats, descriptor: &[f32]) -> Result<Vec<f32>> {
    stats.normalize(descriptor)
}

/// Standardizes rows in arrival order, each against the statistics of every
/// row seen so far including itself. The first row always maps to zero.
pub fn normalize_online(set: &DescriptorSet) -> Result<DescriptorSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut stats = NormStats::new(set.dim());
    let mut out = Vec::with_capacity(set.as_slice().len());
    for row in set.rows() {
        stats.update(row)?;
        out.extend(stats.normalize(row)?);
    }
    Ok(DescriptorSet {
        dim: set.dim,
        data: out,
        labels: set.labels.clone(),
    })
}

/// Checks that `segments` are non-empty, ordered, disjoint, and cover `0..count`.
pub fn validate_segments(segments: &[Range<usize>], count: usize) -> Result<()> {
    if segments.is_empty() {
        return Err(Error::InvalidSegment {
            start: 0,
            end: count,
            reason: "no segments given".into(),
        });
    }
    let mut expected_start = 0;
    for seg in segments {
        let bad = |reason: &str| Error::InvalidSegment {
            start: seg.start,
            end: seg.end,
            reason: reason.to_string(),
        };
        if seg.start >= seg.end {
            return Err(bad("empty segment"));
        }
        if seg.start < expected_start {
            return Err(bad("overlaps the previous segment"));
        }
        if seg.start > expected_start {
            return Err(bad(&format!(
                "leaves rows {expected_start}..{} uncovered",
                seg.start
            )));
        }
        if seg.end > count {
            return Err(bad(&format!("extends past the last row ({count})")));
        }
        expected_start = seg.end;
    }
    if expected_start != count {
        let last = segments.last().unwrap();
        return Err(Error::InvalidSegment {
            start: last.start,
            end: last.end,
            reason: format!("rows {expected_start}..{count} are not covered"),
        });
    }
    Ok(())
}

/// Standardizes each contiguous segment against its own statistics.
pub fn normalize_segmented(
    set: &DescriptorSet,
    segments: &[Range<usize>],
) -> Result<DescriptorSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    validate_segments(segments, set.count())?;
    let mut data = Vec::with_capacity(set.as_slice().len());
    for seg in segments {
        let (part, _) = normalize_batch(&set.slice(seg.clone()))?;
        data.extend_from_slice(part.as_slice());
    }
    Ok(DescriptorSet {
        dim: set.dim,
        data,
        labels: set.labels.clone(),
    })
}

/// A descriptor made of a left-region half and a right-region half.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeDescriptor {
    left: Vec<f32>,
    right: Vec<f32>,
}

impl CompositeDescriptor {
    pub fn left(&self) -> &[f32] {
        &self.left
    }

    pub fn right(&self) -> &[f32] {
        &self.right
    }

    pub fn half_dim(&self) -> usize {
        self.left.len()
    }

    pub fn combined_dim(&self) -> usize {
        2 * self.left.len()
    }

    /// `left ++ right`.
    pub fn concat(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.combined_dim());
        v.extend_from_slice(&self.left);
        v.extend_from_slice(&self.right);
        v
    }

    pub fn swapped(&self) -> CompositeDescriptor {
        CompositeDescriptor {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn into_halves(self) -> (Vec<f32>, Vec<f32>) {
        (self.left, self.right)
    }
}

pub fn make_composite(left: Vec<f32>, right: Vec<f32>) -> Result<CompositeDescriptor> {
    if left.len() != right.len() {
        return Err(Error::DimensionMismatch {
            expected: left.len(),
            actual: right.len(),
        });
    }
    if left.is_empty() {
        return Err(Error::invalid("composite halves must be non-empty"));
    }
    Ok(CompositeDescriptor { left, right })
}

/// Left and right region descriptors for a whole traverse, held as two
/// parallel sets so each half can be standardized on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSet {
    left: DescriptorSet,
    right: DescriptorSet,
}

impl CompositeSet {
    pub fn new(left: DescriptorSet, right: DescriptorSet) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch {
                expected: left.dim(),
                actual: right.dim(),
            });
        }
        if left.count() != right.count() {
            return Err(Error::invalid(format!(
                "left half has {} rows, right half has {}",
                left.count(),
                right.count()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn from_composites(items: &[CompositeDescriptor]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptySet)?;
        let dim = first.half_dim();
        let mut left = Vec::with_capacity(items.len() * dim);
        let mut right = Vec::with_capacity(items.len() * dim);
        for c in items {
            if c.half_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.half_dim(),
                });
            }
            left.extend_from_slice(&c.left);
            right.extend_from_slice(&c.right);
        }
        Self::new(
            DescriptorSet::from_rows(dim, left)?,
            DescriptorSet::from_rows(dim, right)?,
        )
    }

    pub fn left(&self) -> &DescriptorSet {
        &self.left
    }

    pub fn right(&self) -> &DescriptorSet {
        &self.right
    }

    pub fn count(&self) -> usize {
        self.left.count()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn half_dim(&self) -> usize {
        self.left.dim()
    }

    pub fn get(&self, i: usize) -> CompositeDescriptor {
        CompositeDescriptor {
            left: self.left.row(i).to_vec(),
            right: self.right.row(i).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], &[f32])> + '_ {
        self.left.rows().zip(self.right.rows())
    }

    /// Rows of `left ++ right`, i.e. the composite read as a plain descriptor.
    pub fn to_whole(&self) -> DescriptorSet {
        let mut data = Vec::with_capacity(2 * self.left.as_slice().len());
        for (l, r) in self.iter() {
            data.extend_from_slice(l);
            data.extend_from_slice(r);
        }
        let mut out = DescriptorSet::from_parts_unchecked(2 * self.half_dim(), data);
        out.labels = self.left.labels.clone();
        out
    }

    pub fn swapped(&self) -> CompositeSet {
        CompositeSet {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn select(&self, order: &[usize]) -> CompositeSet {
        CompositeSet {
            left: self.left.select(order),
            right: self.right.select(order),
        }
    }

    /// Standardizes each half against its own set statistics.
    pub fn normalize_batch(&self) -> Result<CompositeSet> {
        Ok(CompositeSet {
            left: normalize_batch(&self.left)?.0,
            right: normalize_batch(&self.right)?.0,
        })
    }

    pub fn normalize_online(&self) -> Result<CompositeSet> {
        Ok(CompositeSet {
            left: normalize_online(&self.left)?,
            right: normalize_online(&self.right)?,
        })
    }

    pub fn normalize_segmented(&self, segments: &[Range<usize>]) -> Result<CompositeSet> {
        Ok(CompositeSet {
            left: normalize_segmented(&self.left, segments)?,
            right: normalize_segmented(&self.right, segments)?,
        })
    }
}
