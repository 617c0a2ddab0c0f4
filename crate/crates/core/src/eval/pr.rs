use rayon::prelude::*;

use super::groundtruth::GroundTruth;
use crate::error::{Error, Result};
use crate::matcher::CostMatrix;
use crate::seqsearch::{match_all, MatchResult, SearchParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    /// Matches with uniqueness `>= threshold` are accepted.
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Ordered by increasing threshold, i.e. shrinking accepted sets.
    pub points: Vec<PrPoint>,
    pub max_f1: f64,
    /// Recall denominator: queries past warm-up with a ground-truth match.
    pub scorable: usize,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Sweeps the acceptance threshold over every observed uniqueness value.
///
/// Queries before `warmup` are ignored. An accepted match is a true positive
/// when it lands within `within_frames` of the ground-truth reference, and a
/// false positive otherwise (including accepted queries with no ground
/// truth). Matches without a uniqueness score are never accepted. With nothing
/// accepted, precision is reported as 1.
pub fn score_matches(
    results: &[MatchResult],
    gt: &GroundTruth,
    within_frames: usize,
    warmup: usize,
) -> Result<PrCurve> {
    if results.len() != gt.query_count() {
        return Err(Error::invalid(format!(
            "{} match results for {} ground-truth queries",
            results.len(),
            gt.query_count()
        )));
    }
    if let Some((i, r)) = results
        .iter()
        .enumerate()
        .find(|(i, r)| r.query_index != *i)
    {
        return Err(Error::invalid(format!(
            "match result at position {i} is for query {}",
            r.query_index
        )));
    }
    let scorable = (warmup..gt.query_count())
        .filter(|&q| gt.get(q).is_some())
        .count();
    if scorable == 0 {
        return Err(Error::NoScorableQueries);
    }

    // (uniqueness, correct) for every acceptable match
    let mut candidates: Vec<(f64, bool)> = results
        .iter()
        .skip(warmup)
        .filter_map(|r| {
            let (best, u) = (r.best_reference?, r.uniqueness?);
            let correct = gt
                .get(r.query_index)
                .is_some_and(|g| best.abs_diff(g) <= within_frames);
            Some((u, correct))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(candidates.iter().map(|c| c.0));
    thresholds.push(f64::INFINITY);
    thresholds.dedup_by(|a, b| a.total_cmp(b).is_eq());

    let total_tp = candidates.iter().filter(|c| c.1).count();
    let total_fp = candidates.len() - total_tp;
    let mut points = Vec::with_capacity(thresholds.len());
    // rejected[..next] holds every candidate below the current threshold
    let (mut next, mut rejected_tp, mut rejected_fp) = (0, 0, 0);
    for &theta in &thresholds {
        while next < candidates.len() && candidates[next].0 < theta {
            if candidates[next].1 {
                rejected_tp += 1;
            } else {
                rejected_fp += 1;
            }
            next += 1;
        }
        let tp = total_tp - rejected_tp;
        let fp = total_fp - rejected_fp;
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            1.0
        };
        let recall = tp as f64 / scorable as f64;
        points.push(PrPoint {
            threshold: theta,
            precision,
            recall,
            f1: f1(precision, recall),
            true_positives: tp,
            false_positives: fp,
        });
    }
    let max_f1 = points.iter().map(|p| p.f1).fold(0.0, f64::max);
    Ok(PrCurve {
        points,
        max_f1,
        scorable,
    })
}

/// Runs matching and scoring for each sequence length. Every length is scored
/// over the same query set, skipping queries before `max(warmup, longest
/// length)`. Output follows the order of `lengths`.
pub fn sweep_sequence_length(
    matrix: &CostMatrix,
    gt: &GroundTruth,
    lengths: &[usize],
    params: &SearchParams,
    within_frames: usize,
    warmup: usize,
) -> Result<Vec<(usize, f64)>> {
    if lengths.is_empty() {
        return Err(Error::invalid("no sequence lengths given"));
    }
    if let Some(pos) = lengths.iter().position(|&l| l == 0) {
        return Err(Error::invalid(format!(
            "sequence length at position {pos} is zero"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(&dup) = lengths.iter().find(|&&l| !seen.insert(l)) {
        return Err(Error::invalid(format!("sequence length {dup} given twice")));
    }
    let common_warmup = warmup.max(*lengths.iter().max().unwrap());
    lengths
        .par_iter()
        .map(|&l| {
            let p = SearchParams {
                seq_len: l,
                ..*params
            };
            p.validate()?;
            let results = match_all(matrix, &p);
            Ok((
                l,
                score_matches(&results, gt, within_frames, common_warmup)?.max_f1,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(q: usize, best: Option<usize>, u: Option<f64>) -> MatchResult {
        MatchResult {
            query_index: q,
            best_reference: best,
            seq_cost: best.map(|_| 1.0),
            uniqueness: u,
            accepted: false,
        }
    }

    #[test]
    fn perfect_matcher_scores_one() {
        let results: Vec<_> = (0..10)
            .map(|q| result(q, Some(q), Some(1.5 + q as f64)))
            .collect();
        let curve = score_matches(&results, &GroundTruth::identity(10), 0, 0).unwrap();
        assert_eq!(curve.max_f1, 1.0);
        assert_eq!(curve.scorable, 10);
    }

    #[test]
    fn wrong_matcher_scores_zero() {
        let results: Vec<_> = (0..10)
            .map(|q| result(q, Some((q + 5) % 10), Some(2.0)))
            .collect();
        let curve = score_matches(&results, &GroundTruth::identity(10), 1, 0).unwrap();
        assert_eq!(curve.max_f1, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let results: Vec<_> = (0..3).map(|q| result(q, Some(q), Some(2.0))).collect();
        assert!(score_matches(&results, &GroundTruth::identity(4), 0, 0).is_err());
    }

    #[test]
    fn nothing_scorable_is_an_error() {
        let results: Vec<_> = (0..3).map(|q| result(q, Some(q), Some(2.0))).collect();
        assert!(matches!(
            score_matches(&results, &GroundTruth::identity(3), 0, 3),
            Err(Error::NoScorableQueries)
        ));
        let gt = GroundTruth::new(vec![None, None, None], 3).unwrap();
        assert!(matches!(
            score_matches(&results, &gt, 0, 0),
            Err(Error::NoScorableQueries)
        ));
    }

    #[test]
    fn accepted_set_shrinks_with_threshold() {
        let results: Vec<_> = (0..20)
            .map(|q| {
                result(
                    q,
                    Some(if q % 3 == 0 { q + 4 } else { q }),
                    Some(1.0 + (q * 7 % 11) as f64),
                )
            })
            .collect();
        let curve = score_matches(
            &results,
            &GroundTruth::new((0..20).map(Some).collect(), 30).unwrap(),
            1,
            2,
        )
        .unwrap();
        for w in curve.points.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(
                w[0].true_positives + w[0].false_positives
                    >= w[1].true_positives + w[1].false_positives
            );
        }
        for p in &curve.points {
            assert!((0.0..=1.0).contains(&p.precision) && (0.0..=1.0).contains(&p.recall));
        }
    }
}
