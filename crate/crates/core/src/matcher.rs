//! Cosine-distance cost matrices.

use rayon::prelude::*;

use crate::descriptor::{CompositeDescriptor, CompositeSet, DescriptorSet};
use crate::error::{Error, Result};

/// Norms below this are treated as zero vectors.
const ZERO_NORM: f64 = 1e-12;

/// Dense query-by-reference matrix of cosine distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl CostMatrix {
    /// Wraps row-major values. Entries must be finite and within `[0, 2]`.
    pub fn from_rows(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !(0.0..=2.0).contains(v)) {
            return Err(Error::invalid(format!(
                "cost ({}, {}) = {} is outside [0, 2]",
                p / cols.max(1),
                p % cols.max(1),
                values[p]
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    /// Same matrix with the column order reversed: column `c` becomes
    /// `cols - 1 - c`. Used to search traverses driven in opposite directions.
    pub fn reverse_columns(&self) -> CostMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            values.extend(self.row(r).iter().rev());
        }
        CostMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }
}

#[inline]
fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[inline]
fn from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    let (na, nb) = (sq_a.sqrt(), sq_b.sqrt());
    if na < ZERO_NORM || nb < ZERO_NORM {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

/// `1 - a.b / (|a||b|)`, or 1.0 when either vector has (near) zero norm.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(from_parts(dot_f64(a, b), dot_f64(a, a), dot_f64(b, b)))
}

fn check_pair(query: &DescriptorSet, reference: &DescriptorSet) -> Result<()> {
    if query.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            actual: query.dim(),
        });
    }
    if query.is_empty() || reference.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(())
}

pub fn build_cost_matrix(query: &DescriptorSet, reference: &DescriptorSet) -> Result<CostMatrix> {
    check_pair(query, reference)?;
    let cols = reference.count();
    let ref_sq: Vec<f64> = reference.rows().map(|r| dot_f64(r, r)).collect();
    let mut values = vec![0.0f32; query.count() * cols];
    values
        .par_chunks_mut(cols)
        .zip(query.as_slice().par_chunks(query.dim()))
        .for_each(|(out, q)| {
            let q_sq = dot_f64(q, q);
            for ((o, r), &r_sq) in out.iter_mut().zip(reference.rows()).zip(&ref_sq) {
                *o = from_parts(dot_f64(q, r), q_sq, r_sq) as f32;
            }
        });
    Ok(CostMatrix {
        rows: query.count(),
        cols,
        values,
    })
}

// Reference order is fixed left-right; only the query is read in both orders.
#[inline]
fn composite_from_halves(
    ql: &[f32],
    qr: &[f32],
    rl: &[f32],
    rr: &[f32],
    q_sq: f64,
    r_sq: f64,
) -> f64 {
    let straight = dot_f64(ql, rl) + dot_f64(qr, rr);
    let crossed = dot_f64(qr, rl) + dot_f64(ql, rr);
    from_parts(straight, q_sq, r_sq).min(from_parts(crossed, q_sq, r_sq))
}

#[inline]
fn half_sq(l: &[f32], r: &[f32]) -> f64 {
    dot_f64(l, l) + dot_f64(r, r)
}

/// Minimum of the cosine distances from `r` (left-right) to `q` read
/// left-right and right-left.
pub fn composite_distance(q: &CompositeDescriptor, r: &CompositeDescriptor) -> Result<f64> {
    if q.half_dim() != r.half_dim() {
        return Err(Error::DimensionMismatch {
            expected: r.half_dim(),
            actual: q.half_dim(),
        });
    }
    let (ql, qr, rl, rr) = (q.left(), q.right(), r.left(), r.right());
    Ok(composite_from_halves(
        ql,
        qr,
        rl,
        rr,
        half_sq(ql, qr),
        half_sq(rl, rr),
    ))
}

pub fn build_composite_cost_matrix(
    query: &CompositeSet,
    reference: &CompositeSet,
) -> Result<CostMatrix> {
    check_pair(query.left(), reference.left())?;
    let cols = reference.count();
    let ref_sq: Vec<f64> = reference.iter().map(|(l, r)| half_sq(l, r)).collect();
    let dim = query.half_dim();
    let mut values = vec![0.0f32; query.count() * cols];
    values
        .par_chunks_mut(cols)
        .zip(
            query
                .left()
                .as_slice()
                .par_chunks(dim)
                .zip(query.right().as_slice().par_chunks(dim)),
        )
        .for_each(|(out, (ql, qr))| {
            let q_sq = half_sq(ql, qr);
            for ((o, (rl, rr)), &r_sq) in out.iter_mut().zip(reference.iter()).zip(&ref_sq) {
                *o = composite_from_halves(ql, qr, rl, rr, q_sq, r_sq) as f32;
            }
        });
    Ok(CostMatrix {
        rows: query.count(),
        cols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::make_composite;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cosine_oracle(a: &[f32], b: &[f32]) -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..a.len() {
            dot += a[i] as f64 * b[i] as f64;
            na += (a[i] as f64).powi(2);
            nb += (b[i] as f64).powi(2);
        }
        1.0 - dot / (na.sqrt() * nb.sqrt())
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
    }

    #[test]
    fn basic_directions() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn zero_vector_distance_is_one() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn cosine_dimension_mismatch() {
        assert!(matches!(
            cosine_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn self_match_has_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<_> = (0..8).map(|_| random_vec(&mut rng, 5)).collect();
        let set = DescriptorSet::from_vecs(&rows).unwrap();
        let m = build_cost_matrix(&set, &set).unwrap();
        for i in 0..8 {
            assert!(m.get(i, i).abs() < 1e-6, "diag {i} = {}", m.get(i, i));
        }
        assert!(m.as_slice().iter().all(|v| (0.0..=2.0).contains(v)));
    }

    #[test]
    fn matrix_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q: Vec<_> = (0..3).map(|_| random_vec(&mut rng, 7)).collect();
        let r: Vec<_> = (0..2).map(|_| random_vec(&mut rng, 7)).collect();
        let m = build_cost_matrix(
            &DescriptorSet::from_vecs(&q).unwrap(),
            &DescriptorSet::from_vecs(&r).unwrap(),
        )
        .unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        for i in 0..3 {
            for j in 0..2 {
                assert!((m.get(i, j) as f64 - cosine_oracle(&q[i], &r[j])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matrix_rejects_bad_inputs() {
        let a = DescriptorSet::from_rows(2, vec![1.0, 0.0]).unwrap();
        let b = DescriptorSet::from_rows(3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            build_cost_matrix(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        let e = DescriptorSet::empty(2).unwrap();
        assert!(matches!(build_cost_matrix(&e, &a), Err(Error::EmptySet)));
        assert!(matches!(build_cost_matrix(&a, &e), Err(Error::EmptySet)));
    }

    #[test]
    fn composite_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = make_composite(random_vec(&mut rng, 6), random_vec(&mut rng, 6)).unwrap();
        assert!(composite_distance(&c, &c).unwrap() < 1e-12);
        assert!(composite_distance(&c.swapped(), &c).unwrap() < 1e-12);
    }

    #[test]
    fn composite_matches_two_evaluation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let q = make_composite(random_vec(&mut rng, 5), random_vec(&mut rng, 5)).unwrap();
            let r = make_composite(random_vec(&mut rng, 5), random_vec(&mut rng, 5)).unwrap();
            let forward = cosine_oracle(&q.concat(), &r.concat());
            let backward = cosine_oracle(&q.swapped().concat(), &r.concat());
            let got = composite_distance(&q, &r).unwrap();
            assert!((got - forward.min(backward)).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_matrix_oracle_and_swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mk = |rng: &mut ChaCha8Rng, n| -> Vec<CompositeDescriptor> {
            (0..n)
                .map(|_| make_composite(random_vec(rng, 4), random_vec(rng, 4)).unwrap())
                .collect()
        };
        let q = mk(&mut rng, 4);
        let r = mk(&mut rng, 3);
        let qs = CompositeSet::from_composites(&q).unwrap();
        let rs = CompositeSet::from_composites(&r).unwrap();
        let m = build_composite_cost_matrix(&qs, &rs).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let oracle = cosine_oracle(&q[i].concat(), &r[j].concat())
                    .min(cosine_oracle(&q[i].swapped().concat(), &r[j].concat()));
                assert!((m.get(i, j) as f64 - oracle).abs() < 1e-6);
            }
        }
        let swapped = build_composite_cost_matrix(&qs.swapped(), &rs).unwrap();
        assert_eq!(m, swapped);
        let self_m = build_composite_cost_matrix(&qs, &qs).unwrap();
        for i in 0..4 {
            assert!(self_m.get(i, i) < 1e-6);
        }
    }

    #[test]
    fn reverse_columns_flips_reference_axis() {
        let m = CostMatrix::from_rows(2, 3, vec![0.0, 0.5, 1.0, 1.5, 2.0, 0.25]).unwrap();
        let r = m.reverse_columns();
        assert_eq!(r.row(0), &[1.0, 0.5, 0.0]);
        assert_eq!(r.row(1), &[0.25, 2.0, 1.5]);
        assert!(CostMatrix::from_rows(1, 1, vec![2.5]).is_err());
    }
}
