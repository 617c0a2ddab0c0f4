//! End-to-end matching: normalization mode, cost matrix, sequence search.

use std::fmt;
use std::str::FromStr;

use crate::descriptor::{
    normalize_batch, normalize_online, normalize_segmented, CompositeSet, DescriptorSet,
};
use crate::error::{Error, Result};
use crate::eval::{score_matches, GroundTruth, PrCurve};
use crate::io::{DescriptorFile, Segments};
use crate::matcher::{build_composite_cost_matrix, build_cost_matrix, CostMatrix};
use crate::seqsearch::{match_all, MatchResult, SearchParams};

/// How descriptors are prepared before the cosine cost matrix is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Descriptors as stored.
    Raw,
    /// Each set standardized against its own statistics.
    #[default]
    Nsd,
    /// Region halves standardized separately, matched with the
    /// order-invariant composite distance.
    NsdCr,
    /// Standardization within caller-supplied contiguous segments.
    NsdSegmented,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Mode::Raw),
            "nsd" => Ok(Mode::Nsd),
            "nsd_cr" => Ok(Mode::NsdCr),
            "nsd_segmented" => Ok(Mode::NsdSegmented),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Raw => "raw",
            Mode::Nsd => "nsd",
            Mode::NsdCr => "nsd_cr",
            Mode::NsdSegmented => "nsd_segmented",
        })
    }
}

/// Query-side statistics. The reference side always uses the whole set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Batch,
    /// Statistics updated with each query in arrival order.
    Online,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(Normalization::Batch),
            "online" => Ok(Normalization::Online),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Batch => "batch",
            Normalization::Online => "online",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchConfig {
    pub mode: Mode,
    pub normalization: Normalization,
    pub search: SearchParams,
    /// The query drives the route in the opposite direction to the reference.
    pub reverse_reference: bool,
    pub segments: Option<Segments>,
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        match self.mode {
            Mode::NsdSegmented if self.segments.is_none() => Err(Error::invalid(
                "mode nsd_segmented requires a segments file",
            )),
            Mode::NsdSegmented if self.normalization == Normalization::Online => Err(
                Error::invalid("mode nsd_segmented supports batch normalization only"),
            ),
            Mode::Raw if self.normalization == Normalization::Online => Err(Error::invalid(
                "mode raw does not normalize; drop --normalization online",
            )),
            _ => Ok(()),
        }
    }
}

fn normalize_query(set: &DescriptorSet, how: Normalization) -> Result<DescriptorSet> {
    match how {
        Normalization::Batch => Ok(normalize_batch(set)?.0),
        Normalization::Online => normalize_online(set),
    }
}

fn normalize_query_halves(set: &CompositeSet, how: Normalization) -> Result<CompositeSet> {
    match how {
        Normalization::Batch => set.normalize_batch(),
        Normalization::Online => set.normalize_online(),
    }
}

/// Cost matrix for `query` against `reference` under `config.mode`, with
/// reference columns in stored order.
pub fn build_matrix(
    query: &DescriptorFile,
    reference: &DescriptorFile,
    config: &MatchConfig,
) -> Result<CostMatrix> {
    config.validate()?;
    match config.mode {
        Mode::Raw => {
            build_cost_matrix(&query.clone().into_whole(), &reference.clone().into_whole())
        }
        Mode::Nsd => {
            let q = normalize_query(&query.clone().into_whole(), config.normalization)?;
            let (r, _) = normalize_batch(&reference.clone().into_whole())?;
            build_cost_matrix(&q, &r)
        }
        Mode::NsdCr => {
            let q = normalize_query_halves(&query.clone().into_composite()?, config.normalization)?;
            let r = reference.clone().into_composite()?.normalize_batch()?;
            build_composite_cost_matrix(&q, &r)
        }
        Mode::NsdSegmented => {
            let segs = config.segments.as_ref().expect("validated");
            let q = normalize_segmented(&query.clone().into_whole(), &segs.query)?;
            let r = normalize_segmented(&reference.clone().into_whole(), &segs.reference)?;
            build_cost_matrix(&q, &r)
        }
    }
}

/// The matrix actually searched: columns reversed when the query runs the
/// route backwards, so the sought trajectory has positive slope.
pub fn search_matrix(matrix: &CostMatrix, reverse_reference: bool) -> CostMatrix {
    if reverse_reference {
        matrix.reverse_columns()
    } else {
        matrix.clone()
    }
}

/// Sequence search over a stored-order matrix, reporting stored-order
/// reference indices.
pub fn match_matrix(
    matrix: &CostMatrix,
    params: &SearchParams,
    reverse_reference: bool,
) -> Vec<MatchResult> {
    let mut results = match_all(&search_matrix(matrix, reverse_reference), params);
    if reverse_reference {
        let last = matrix.cols() - 1;
        for r in &mut results {
            r.best_reference = r.best_reference.map(|b| last - b);
        }
    }
    results
}

pub fn run_matching(
    query: &DescriptorFile,
    reference: &DescriptorFile,
    config: &MatchConfig,
) -> Result<Vec<MatchResult>> {
    let matrix = build_matrix(query, reference, config)?;
    Ok(match_matrix(
        &matrix,
        &config.search,
        config.reverse_reference,
    ))
}

/// Queries before this index cannot be scored: normalization is still warming
/// up, or there is not enough history for a full sequence.
pub fn effective_warmup(warmup: usize, seq_len: usize) -> usize {
    warmup.max(seq_len)
}

/// Ground truth expressed in the column order of [`search_matrix`].
pub fn search_ground_truth(gt: &GroundTruth, reverse_reference: bool) -> Result<GroundTruth> {
    if !reverse_reference {
        return Ok(gt.clone());
    }
    let n = gt.reference_count();
    GroundTruth::new(
        gt.mapping().iter().map(|g| g.map(|r| n - 1 - r)).collect(),
        n,
    )
}

/// Matches and scores in one call; the score skips queries before
/// [`effective_warmup`].
pub fn run_and_score(
    query: &DescriptorFile,
    reference: &DescriptorFile,
    gt: &GroundTruth,
    config: &MatchConfig,
    within_frames: usize,
    warmup: usize,
) -> Result<PrCurve> {
    let results = run_matching(query, reference, config)?;
    score_matches(
        &results,
        gt,
        within_frames,
        effective_warmup(warmup, config.search.seq_len),
    )
}
