//! Cluster-robust sandwich variance, one- and two-way.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::RegressError;
use crate::numeric::CompensatedSum;

/// Finite-sample scaling applied to each sandwich term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SmallSample {
    /// `G/(G−1) · (N−1)/(N−K)` per term.
    #[default]
    Cgm,
    None,
}

/// Cluster membership of every row.
#[derive(Debug, Clone)]
pub struct ClusterDim {
    pub name: String,
    pub ids: Vec<u32>,
    pub n_clusters: usize,
}

impl ClusterDim {
    pub fn from_keys<K: Ord + Clone>(name: impl Into<String>, keys: &[K]) -> Self {
        let mut map: BTreeMap<K, u32> = keys.iter().map(|k| (k.clone(), 0)).collect();
        for (i, v) in map.values_mut().enumerate() {
            *v = i as u32;
        }
        ClusterDim {
            name: name.into(),
            ids: keys.iter().map(|k| map[k]).collect(),
            n_clusters: map.len(),
        }
    }

    /// Clusters formed by pairs of memberships.
    pub fn intersect(&self, other: &ClusterDim) -> ClusterDim {
        let keys: Vec<(u32, u32)> = self.ids.iter().copied().zip(other.ids.iter().copied()).collect();
        ClusterDim::from_keys(format!("{}*{}", self.name, other.name), &keys)
    }
}

/// `Σ_g s_g s_gᵀ` with cluster scores `s_g = Σ_{i∈g} x_i e_i`.
pub fn cluster_meat(xd: &[Vec<f64>], residuals: &[f64], clusters: &ClusterDim) -> DMatrix<f64> {
    let k = xd.len();
    let mut scores = vec![vec![CompensatedSum::new(); k]; clusters.n_clusters];
    for (i, &g) in clusters.ids.iter().enumerate() {
        let e = residuals[i];
        for (a, col) in xd.iter().enumerate() {
            scores[g as usize][a].add(col[i] * e);
        }
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in &scores {
        let v: Vec<f64> = s.iter().map(CompensatedSum::value).collect();
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] += v[a] * v[b];
            }
        }
    }
    meat
}

fn scale(small_sample: SmallSample, g: usize, n: usize, k: usize) -> f64 {
    match small_sample {
        SmallSample::None => 1.0,
        SmallSample::Cgm => {
            let (g, n, k) = (g as f64, n as f64, k as f64);
            g / (g - 1.0) * (n - 1.0) / (n - k)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteredVcov {
    /// After PSD repair.
    pub vcov: DMatrix<f64>,
    pub raw: DMatrix<f64>,
    pub repaired: bool,
    pub min_eigenvalue: f64,
    /// Cluster counts per term, in formula order.
    pub clusters: Vec<(String, usize)>,
}

/// One-way (single dimension) or two-way `V₁ + V₂ − V₁₂` cluster-robust
/// variance around `bread = (X̃ᵀX̃)⁻¹`.
pub fn cluster_vcov(
    bread: &DMatrix<f64>,
    xd: &[Vec<f64>],
    residuals: &[f64],
    dims: &[&ClusterDim],
    small_sample: SmallSample,
) -> Result<ClusteredVcov, RegressError> {
    let n = residuals.len();
    let k = xd.len();
    for d in dims {
        if d.n_clusters < 2 {
            return Err(RegressError::SingleCluster(d.name.clone()));
        }
    }
    let sandwich = |d: &ClusterDim| {
        let meat = cluster_meat(xd, residuals, d);
        bread * meat * bread * scale(small_sample, d.n_clusters, n, k)
    };
    let (raw, clusters) = match dims {
        [a] => (sandwich(a), vec![(a.name.clone(), a.n_clusters)]),
        [a, b] => {
            let ab = a.intersect(b);
            let v = sandwich(a) + sandwich(b) - sandwich(&ab);
            (
                v,
                vec![
                    (a.name.clone(), a.n_clusters),
                    (b.name.clone(), b.n_clusters),
                    (ab.name.clone(), ab.n_clusters),
                ],
            )
        }
        _ => return Err(RegressError::Dimension("one or two cluster dimensions expected".into())),
    };
    let raw = (&raw + raw.transpose()) * 0.5;
    let (vcov, repaired, min_eigenvalue) = psd_repair(&raw);
    Ok(ClusteredVcov {
        vcov,
        raw,
        repaired,
        min_eigenvalue,
        clusters,
    })
}

/// Clips negative eigenvalues to zero.
pub fn psd_repair(m: &DMatrix<f64>) -> (DMatrix<f64>, bool, f64) {
    if m.nrows() == 0 {
        return (m.clone(), false, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return (m.clone(), false, min);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    ((&out + out.transpose()) * 0.5, true, min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_repair_clips_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (r, repaired, min) = psd_repair(&m);
        assert!(repaired);
        assert!((min + 1.0).abs() < 1e-12);
        let e = SymmetricEigen::new(r).eigenvalues;
        assert!(e.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn single_cluster_is_rejected() {
        let d = ClusterDim::from_keys("f", &[1, 1, 1]);
        let bread = DMatrix::identity(1, 1);
        let r = cluster_vcov(&bread, &[vec![1.0, 2.0, 3.0]], &[0.1, -0.2, 0.1], &[&d], SmallSample::Cgm);
        assert!(matches!(r, Err(RegressError::SingleCluster(_))));
    }

    #[test]
    fn intersection_of_pairs() {
        let a = ClusterDim::from_keys("a", &[0, 0, 1, 1]);
        let b = ClusterDim::from_keys("b", &[0, 1, 0, 1]);
        assert_eq!(a.intersect(&b).n_clusters, 4);
        assert_eq!(a.intersect(&a).n_clusters, 2);
    }
}
