//! Constant-slope sequence search over a cost matrix.
//!
//! For a query `T` and a reference endpoint `i`, a candidate trajectory visits
//! `(t, round(i - k (T - t)))` for `t = T - l ..= T`. Its cost is the sum of the
//! visited entries. Each endpoint keeps its cheapest slope; the cheapest
//! endpoint wins, and the ratio of the best cost outside a window around the
//! winner to the winning cost measures how unique the match is.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcher::CostMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Frames behind the current query; a trajectory spans `seq_len + 1` rows.
    pub seq_len: usize,
    /// Number of slopes tried; odd so the exact diagonal is included.
    pub slope_count: usize,
    /// Half-width in radians of the slope fan around the diagonal.
    pub angle_halfwidth: f64,
    /// Endpoints within this many frames of the winner are not competitors.
    pub uniqueness_window: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            seq_len: 40,
            slope_count: 11,
            angle_halfwidth: 0.2,
            uniqueness_window: 10,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        if self.slope_count == 0 || self.slope_count % 2 == 0 {
            return Err(Error::invalid(format!(
                "slope count must be odd and positive, got {}",
                self.slope_count
            )));
        }
        if !(0.0..FRAC_PI_4).contains(&self.angle_halfwidth) {
            return Err(Error::invalid(format!(
                "angle half-width must lie in [0, pi/4), got {}",
                self.angle_halfwidth
            )));
        }
        Ok(())
    }

    /// Slopes `tan(pi/4 + d)` for angle offsets `d` evenly spanning
    /// `[-angle_halfwidth, angle_halfwidth]`. The middle slope is exactly 1.
    pub fn slopes(&self) -> Vec<f64> {
        if self.slope_count <= 1 {
            return vec![1.0];
        }
        let last = (self.slope_count - 1) as f64;
        (0..self.slope_count)
            .map(|j| {
                let offset = self.angle_halfwidth * (2.0 * j as f64 - last) / last;
                if offset == 0.0 {
                    1.0
                } else {
                    (FRAC_PI_4 + offset).tan()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub query_index: usize,
    /// `None` when no trajectory fits (too little history, or every candidate
    /// leaves the matrix).
    pub best_reference: Option<usize>,
    pub seq_cost: Option<f64>,
    /// Best competing cost divided by the winning cost; `None` when no endpoint
    /// lies outside the uniqueness window.
    pub uniqueness: Option<f64>,
    pub accepted: bool,
}

impl MatchResult {
    pub fn none(query_index: usize) -> Self {
        MatchResult {
            query_index,
            best_reference: None,
            seq_cost: None,
            uniqueness: None,
            accepted: false,
        }
    }
}

/// Reference column visited at `steps_back` rows before the endpoint, if it
/// lies inside `0..cols`. Rounds half away from zero.
#[inline]
fn column_at(endpoint: usize, slope: f64, steps_back: usize, cols: usize) -> Option<usize> {
    let c = (endpoint as f64 - slope * steps_back as f64).round();
    if c >= 0.0 && c < cols as f64 {
        Some(c as usize)
    } else {
        None
    }
}

/// Sum of `matrix[t][round(i - k (T - t))]` over `t = T - l ..= T`, or `None`
/// when the trajectory leaves the matrix.
pub fn sequence_cost(
    matrix: &CostMatrix,
    query: usize,
    endpoint: usize,
    slope: f64,
    seq_len: usize,
) -> Option<f64> {
    if query < seq_len || query >= matrix.rows() || endpoint >= matrix.cols() {
        return None;
    }
    let mut total = 0.0f64;
    for t in query - seq_len..=query {
        let c = column_at(endpoint, slope, query - t, matrix.cols())?;
        total += matrix.get(t, c) as f64;
    }
    Some(total)
}

/// Per-endpoint minimum over slopes; `INFINITY` where no slope is feasible.
fn endpoint_costs(matrix: &CostMatrix, query: usize, seq_len: usize, slopes: &[f64]) -> Vec<f64> {
    let cols = matrix.cols();
    let first = query - seq_len;
    let mut best = vec![f64::INFINITY; cols];
    let mut columns = vec![0usize; seq_len + 1];
    for &k in slopes {
        let reach = k * seq_len as f64;
        for (i, slot) in best.iter_mut().enumerate() {
            // the oldest row sits furthest from the endpoint; skip early when it
            // is certainly off the left edge
            if (i as f64 - reach) < -1.0 {
                continue;
            }
            let mut feasible = true;
            for (step, col) in columns.iter_mut().enumerate() {
                match column_at(i, k, seq_len - step, cols) {
                    Some(c) => *col = c,
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let mut total = 0.0f64;
            for (step, &c) in columns.iter().enumerate() {
                total += matrix.get(first + step, c) as f64;
            }
            if total < *slot {
                *slot = total;
            }
        }
    }
    best
}

fn uniqueness_ratio(best: f64, competitor: f64) -> f64 {
    if best > 0.0 {
        competitor / best
    } else if competitor > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Best reference endpoint for query `query`.
pub fn search(matrix: &CostMatrix, query: usize, params: &SearchParams) -> MatchResult {
    search_with_slopes(matrix, query, params, &params.slopes())
}

fn search_with_slopes(
    matrix: &CostMatrix,
    query: usize,
    params: &SearchParams,
    slopes: &[f64],
) -> MatchResult {
    if query >= matrix.rows() || query < params.seq_len || matrix.cols() == 0 {
        return MatchResult::none(query);
    }
    let costs = endpoint_costs(matrix, query, params.seq_len, slopes);
    let mut best: Option<(usize, f64)> = None;
    for (i, &c) in costs.iter().enumerate() {
        if c.is_finite() && best.map_or(true, |(_, b)| c < b) {
            best = Some((i, c));
        }
    }
    let Some((winner, cost)) = best else {
        return MatchResult::none(query);
    };
    let w = params.uniqueness_window;
    let competitor = costs
        .iter()
        .enumerate()
        .filter(|&(i, c)| c.is_finite() && i.abs_diff(winner) > w)
        .map(|(_, &c)| c)
        .min_by(f64::total_cmp);
    MatchResult {
        query_index: query,
        best_reference: Some(winner),
        seq_cost: Some(cost),
        uniqueness: competitor.map(|c| uniqueness_ratio(cost, c)),
        accepted: false,
    }
}

/// Runs [`search`] for every query row. Output is in query order and does not
/// depend on the thread schedule.
pub fn match_all(matrix: &CostMatrix, params: &SearchParams) -> Vec<MatchResult> {
    let slopes = params.slopes();
    (0..matrix.rows())
        .into_par_iter()
        .map(|t| search_with_slopes(matrix, t, params, &slopes))
        .collect()
}

/// Single-threaded [`match_all`].
pub fn match_all_serial(matrix: &CostMatrix, params: &SearchParams) -> Vec<MatchResult> {
    let slopes = params.slopes();
    (0..matrix.rows())
        .map(|t| search_with_slopes(matrix, t, params, &slopes))
        .collect()
}
