//! Dense oracles shared by the integration tests.
#![allow(dead_code)]

use disruptr::regress::{fit_hdfe, Absorber, FeDim, HdfeFit, HdfeProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub groups: Vec<Vec<usize>>,
    pub levels: Vec<usize>,
}

pub fn instance(seed: u64, n: usize, k: usize, levels: &[usize]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = levels
        .iter()
        .map(|&l| (0..n).map(|i| if i < l { i } else { rng.random_range(0..l) }).collect())
        .collect();
    let x: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = (0..n)
        .map(|i| {
            let fe: f64 = groups.iter().map(|g| (g[i] as f64 * 0.37).sin()).sum();
            let xb: f64 = x.iter().enumerate().map(|(j, c)| (j as f64 + 1.0) * 0.5 * c[i]).sum();
            fe + xb + rng.random_range(-0.3..0.3)
        })
        .collect();
    Instance {
        y,
        x,
        groups,
        levels: levels.to_vec(),
    }
}

/// Explicit dummy-variable least squares on the first `k` slope columns
/// plus an intercept and all but the first level of every FE dimension.
/// Returns the slopes and the residual sum of squares.
pub fn dummy_fit(inst: &Instance, k: usize) -> (Vec<f64>, f64) {
    let n = inst.y.len();
    let p = k + 1 + inst.levels.iter().map(|l| l - 1).sum::<usize>();
    let mut m = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..k {
            m[(i, j)] = inst.x[j][i];
        }
        m[(i, k)] = 1.0;
        let mut off = k + 1;
        for (g, &l) in inst.groups.iter().zip(&inst.levels) {
            if g[i] > 0 {
                m[(i, off + g[i] - 1)] = 1.0;
            }
            off += l - 1;
        }
    }
    let y = DVector::from_vec(inst.y.clone());
    let b = m.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let e = &y - &m * &b;
    (b.iter().take(k).copied().collect(), e.dot(&e))
}

pub fn dummy_ols(inst: &Instance) -> Vec<f64> {
    dummy_fit(inst, inst.x.len()).0
}

/// `1 − RSS(slopes + FE) / RSS(FE only)`.
pub fn dummy_within_r2(inst: &Instance) -> f64 {
    let full = dummy_fit(inst, inst.x.len()).1;
    let fe_only = dummy_fit(inst, 0).1;
    1.0 - full / fe_only
}

pub fn absorbed(inst: &Instance) -> HdfeFit {
    let problem = HdfeProblem {
        y: inst.y.clone(),
        x: inst.x.clone(),
        names: (0..inst.x.len()).map(|j| format!("x{j}")).collect(),
    };
    let dims = inst
        .groups
        .iter()
        .enumerate()
        .map(|(d, g)| FeDim::from_keys(format!("fe{d}"), g))
        .collect();
    fit_hdfe(&problem, &Absorber::new(dims)).unwrap()
}

/// Direct double sum over same-cluster row pairs.
pub fn brute_meat(xd: &[Vec<f64>], e: &[f64], ids: &[u64]) -> DMatrix<f64> {
    let k = xd.len();
    let n = e.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            if ids[i] != ids[j] {
                continue;
            }
            for a in 0..k {
                for b in 0..k {
                    m[(a, b)] += xd[a][i] * e[i] * e[j] * xd[b][j];
                }
            }
        }
    }
    m
}

pub fn brute_two_way(xd: &[Vec<f64>], e: &[f64], f: &[u64], t: &[u64]) -> DMatrix<f64> {
    let k = xd.len();
    let n = e.len();
    let xtx = DMatrix::<f64>::from_fn(k, k, |a, b| (0..n).map(|i| xd[a][i] * xd[b][i]).sum::<f64>());
    let bread = xtx.try_inverse().unwrap();
    let both: Vec<u64> = f.iter().zip(t).map(|(a, b)| a * 1_000_000 + b).collect();
    let distinct = |v: &[u64]| v.iter().collect::<std::collections::BTreeSet<_>>().len() as f64;
    let c = |g: f64| g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let s = |ids: &[u64]| &bread * brute_meat(xd, e, ids) * &bread * c(distinct(ids));
    s(f) + s(t) - s(&both)
}
