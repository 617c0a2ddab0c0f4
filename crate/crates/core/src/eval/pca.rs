use nalgebra::{DMatrix, SymmetricEigen};

use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};

/// Principal-axis projection of a descriptor set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `count x components` coordinates of the centered rows.
    pub scores: DMatrix<f64>,
    /// `dim x components` unit axes, columns in decreasing-variance order.
    pub axes: DMatrix<f64>,
    /// Population variance along each returned axis.
    pub variances: Vec<f64>,
    /// Sum of the variances over every dimension.
    pub total_variance: f64,
    pub mean: Vec<f64>,
}

impl Projection {
    pub fn explained_ratio(&self) -> Vec<f64> {
        self.variances
            .iter()
            .map(|v| {
                if self.total_variance > 0.0 {
                    v / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }
}

// Flip each axis so its first non-negligible loading is positive.
fn fix_signs(axes: &mut DMatrix<f64>) {
    for mut col in axes.column_iter_mut() {
        let scale = col.amax();
        if scale == 0.0 {
            continue;
        }
        if let Some(&first) = col.iter().find(|v| v.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Projects centered rows onto the top `components` principal axes of the
/// population covariance. Axis signs are fixed so the first non-negligible
/// loading is positive. When `dim` exceeds the row count the eigenproblem is
/// solved on the smaller Gram matrix, which has the same non-zero spectrum.
pub fn pca_project(set: &DescriptorSet, components: usize) -> Result<Projection> {
    let (n, dim) = (set.count(), set.dim());
    if components == 0 {
        return Err(Error::invalid("at least one component is required"));
    }
    if n < components {
        return Err(Error::invalid(format!(
            "{components} components requested from {n} descriptors"
        )));
    }
    if components > dim {
        return Err(Error::invalid(format!(
            "{components} components requested from {dim}-dimensional descriptors"
        )));
    }
    let mut x = DMatrix::from_row_iterator(n, dim, set.as_slice().iter().map(|&v| v as f64));
    let mean: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    for (mut col, m) in x.column_iter_mut().zip(&mean) {
        col.add_scalar_mut(-m);
    }
    let inv_n = 1.0 / n as f64;

    let (values, mut axes) = if dim <= n {
        let cov = x.tr_mul(&x) * inv_n;
        let (values, vectors) = sorted_eigen(cov);
        (values, vectors.columns(0, components).into_owned())
    } else {
        let gram = &x * x.transpose() * inv_n;
        let (values, vectors) = sorted_eigen(gram);
        let mut axes = DMatrix::zeros(dim, components);
        for c in 0..components {
            let v = x.tr_mul(&vectors.column(c));
            let norm = v.norm();
            if norm > 1e-12 * (values[0] * n as f64).sqrt().max(1e-300) {
                axes.set_column(c, &(v / norm));
            }
        }
        (values, axes)
    };
    fix_signs(&mut axes);
    let scores = &x * &axes;
    let total_variance = x.iter().map(|v| v * v).sum::<f64>() * inv_n;
    Ok(Projection {
        scores,
        axes,
        variances: values[..components].to_vec(),
        total_variance,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn column_variance(m: &DMatrix<f64>, c: usize) -> f64 {
        let col = m.column(c);
        let mean = col.mean();
        col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64
    }

    #[test]
    fn line_in_5d_is_rank_one() {
        let dir = [1.0f32, -2.0, 0.5, 3.0, 0.0];
        let data: Vec<f32> = (0..30)
            .flat_map(|t| dir.iter().map(move |d| d * (t as f32 - 10.0)))
            .collect();
        let set = DescriptorSet::from_rows(5, data).unwrap();
        let p = pca_project(&set, 2).unwrap();
        assert!((p.explained_ratio()[0] - 1.0).abs() < 1e-9);
        assert!(p.scores.column(1).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn full_rank_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let dim = 6;
        let data: Vec<f32> = (0..200 * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let set = DescriptorSet::from_rows(dim, data).unwrap();
        let p = pca_project(&set, dim).unwrap();
        let recon = &p.scores * p.axes.transpose();
        for i in 0..200 {
            for d in 0..dim {
                let centered = set.row(i)[d] as f64 - p.mean[d];
                assert!((recon[(i, d)] - centered).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn axis_variances_are_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let dim = 8;
        let data: Vec<f32> = (0..100 * dim)
            .map(|i| {
                let z: f32 = StandardNormal.sample(&mut rng);
                z * (1 + i % dim) as f32
            })
            .collect();
        let set = DescriptorSet::from_rows(dim, data).unwrap();
        let p = pca_project(&set, 4).unwrap();
        let vars: Vec<f64> = (0..4).map(|c| column_variance(&p.scores, c)).collect();
        assert!(vars.windows(2).all(|w| w[0] >= w[1] - 1e-9), "{vars:?}");
        for (a, b) in vars.iter().zip(&p.variances) {
            assert!((a - b).abs() < 1e-6 * b.max(1.0));
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let dim = 12;
        let data: Vec<f32> = (0..9 * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let wide = DescriptorSet::from_rows(dim, data.clone()).unwrap();
        // Same rows, padded with duplicates so the covariance route is taken;
        // duplicating every row leaves the covariance unchanged.
        let tall = DescriptorSet::from_rows(dim, data.repeat(2)).unwrap();
        let a = pca_project(&wide, 3).unwrap();
        let b = pca_project(&tall, 3).unwrap();
        for c in 0..3 {
            assert!((a.variances[c] - b.variances[c]).abs() < 1e-9);
            for d in 0..dim {
                assert!((a.axes[(d, c)] - b.axes[(d, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_with_positive_first_loading() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let data: Vec<f32> = (0..50 * 4)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let set = DescriptorSet::from_rows(4, data).unwrap();
        let a = pca_project(&set, 2).unwrap();
        assert_eq!(a, pca_project(&set, 2).unwrap());
        for c in 0..2 {
            assert!(a.axes.column(c).iter().find(|v| v.abs() > 1e-12).unwrap() > &0.0);
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let set = DescriptorSet::from_rows(3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(pca_project(&set, 2).is_err());
        assert!(pca_project(&set, 0).is_err());
    }
}
