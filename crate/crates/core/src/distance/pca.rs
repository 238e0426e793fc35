use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::feature::FeatureSet;

/// Top-two principal axes of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// Two orthonormal rows of length `dim`.
    pub basis: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
}

impl Projection {
    pub fn project(&self, v: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, axis) in out.iter_mut().zip(&self.basis) {
            *o = v
                .iter()
                .zip(&self.mean)
                .zip(axis)
                .map(|((x, m), a)| (x - m) * a)
                .sum();
        }
        out
    }
}

pub fn pca_top2(x: &FeatureSet) -> Result<Projection> {
    if x.count() < 2 {
        return Err(Error::DegenerateData(format!(
            "principal components need at least 2 vectors, got {}",
            x.count()
        )));
    }
    let dim = x.dim();
    if dim < 2 {
        return Err(Error::DegenerateData(
            "principal plane needs dim >= 2".into(),
        ));
    }
    let mean = x.mean();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for v in x.vectors() {
        let centered: Vec<f64> = v.iter().zip(&mean).map(|(a, m)| a - m).collect();
        for r in 0..dim {
            for c in r..dim {
                cov[(r, c)] += centered[r] * centered[c];
            }
        }
    }
    let norm = 1.0 / (x.count() - 1) as f64;
    for r in 0..dim {
        for c in r..dim {
            let v = cov[(r, c)] * norm;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    let scale = x
        .vectors()
        .map(|v| v.iter().map(|a| a * a).sum::<f64>())
        .sum::<f64>()
        / x.count() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let top = eig.eigenvalues[order[0]];
    if top <= 1e-20 * scale.max(1e-300) {
        return Err(Error::DegenerateData("covariance has rank 0".into()));
    }
    let axis = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        if let Some(first) = v.iter().find(|a| a.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
        }
        v
    };
    Ok(Projection {
        mean,
        basis: [axis(0), axis(1)],
        eigenvalues: [top, eig.eigenvalues[order[1]].max(0.0)],
    })
}
