//! OLS with absorbed fixed effects (alternating projections).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::RegressError;
use crate::numeric::CompensatedSum;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative residual-norm threshold below which a column counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// One fixed-effect dimension: a group index per row.
#[derive(Debug, Clone)]
pub struct FeDim {
    pub name: String,
    pub groups: Vec<u32>,
    pub n_groups: usize,
    counts: Vec<f64>,
}

impl FeDim {
    /// Group ids follow the sorted order of the keys, so they do not depend
    /// on row order.
    pub fn from_keys<K: Ord + Clone>(name: impl Into<String>, keys: &[K]) -> Self {
        let mut ids: BTreeMap<K, u32> = keys.iter().map(|k| (k.clone(), 0)).collect();
        for (i, v) in ids.values_mut().enumerate() {
            *v = i as u32;
        }
        let groups: Vec<u32> = keys.iter().map(|k| ids[k]).collect();
        Self::from_ids(name, groups, ids.len())
    }

    pub fn from_ids(name: impl Into<String>, groups: Vec<u32>, n_groups: usize) -> Self {
        let mut counts = vec![0.0; n_groups];
        for &g in &groups {
            counts[g as usize] += 1.0;
        }
        FeDim {
            name: name.into(),
            groups,
            n_groups,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Demeaned {
    pub iterations: usize,
    pub last_update: f64,
}

/// Within-transformation by alternating demeaning over FE dimensions in
/// their given order.
#[derive(Debug, Clone)]
pub struct Absorber {
    pub dims: Vec<FeDim>,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Absorber {
    pub fn new(dims: Vec<FeDim>) -> Self {
        Absorber {
            dims,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    fn sweep(&self, r: &mut [f64]) -> f64 {
        let mut max_update: f64 = 0.0;
        for d in &self.dims {
            let mut sums = vec![CompensatedSum::new(); d.n_groups];
            for (v, &g) in r.iter().zip(&d.groups) {
                sums[g as usize].add(*v);
            }
            let means: Vec<f64> = sums.iter().zip(&d.counts).map(|(s, &c)| s.value() / c).collect();
            for (v, &g) in r.iter_mut().zip(&d.groups) {
                *v -= means[g as usize];
            }
            max_update = means.iter().fold(max_update, |m, x| m.max(x.abs()));
        }
        max_update
    }

    /// Demeans `column` in place until a full sweep moves no cell by more
    /// than the tolerance.
    pub fn demean(&self, name: &str, column: &mut [f64]) -> Result<Demeaned, RegressError> {
        if self.dims.is_empty() {
            return Ok(Demeaned {
                iterations: 0,
                last_update: 0.0,
            });
        }
        let mut last_update = f64::INFINITY;
        for it in 1..=self.max_iter {
            last_update = self.sweep(column);
            if last_update < self.tolerance {
                return Ok(Demeaned {
                    iterations: it,
                    last_update,
                });
            }
        }
        Err(RegressError::NotConverged {
            column: name.to_string(),
            iterations: self.max_iter,
            last_update,
        })
    }
}

/// Outcome plus named regressors.
#[derive(Debug, Clone)]
pub struct HdfeProblem {
    pub y: Vec<f64>,
    /// Column-major design.
    pub x: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorptionDiagnostics {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest iteration count over all demeaned columns.
    pub iterations: usize,
    pub last_update: f64,
}

#[derive(Debug, Clone)]
pub struct HdfeFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub dropped: Vec<DroppedColumn>,
    /// Demeaned kept columns.
    pub xd: Vec<Vec<f64>>,
    pub yd: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `y − residual`, fixed effects included.
    pub fitted: Vec<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub r2: f64,
    pub within_r2: f64,
    pub n_obs: usize,
    pub fe_groups: Vec<(String, usize)>,
    pub absorption: AbsorptionDiagnostics,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        s.add(x * y);
    }
    s.value()
}

/// Greedy left-to-right column selection: a column is dropped when its
/// residual after projection on the kept ones is negligible relative to the
/// column's raw norm.
fn select_columns(xd: &[Vec<f64>], raw_norm2: &[f64]) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    // Rows of the Cholesky factor of the kept Gram matrix.
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..xd.len() {
        if raw_norm2[j] == 0.0 {
            continue;
        }
        let g: Vec<f64> = kept.iter().map(|&k| dot(&xd[k], &xd[j])).collect();
        let mut v = vec![0.0; kept.len()];
        for i in 0..kept.len() {
            let s: f64 = (0..i).map(|m| l[i][m] * v[m]).sum();
            v[i] = (g[i] - s) / l[i][i];
        }
        let d = dot(&xd[j], &xd[j]) - v.iter().map(|x| x * x).sum::<f64>();
        if d <= COLLINEAR_TOL * raw_norm2[j] {
            continue;
        }
        v.push(d.sqrt());
        l.push(v);
        kept.push(j);
    }
    kept
}

pub fn fit_hdfe(problem: &HdfeProblem, absorber: &Absorber) -> Result<HdfeFit, RegressError> {
    let n = problem.y.len();
    if n == 0 {
        return Err(RegressError::NoRows);
    }
    if problem.x.iter().any(|c| c.len() != n) || problem.names.len() != problem.x.len() {
        return Err(RegressError::Dimension("design columns do not match the outcome".into()));
    }
    if absorber.dims.iter().any(|d| d.groups.len() != n) {
        return Err(RegressError::Dimension("fixed-effect keys do not match the outcome".into()));
    }

    let raw_norm2: Vec<f64> = problem.x.iter().map(|c| dot(c, c)).collect();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(problem.x.len() + 1);
    columns.push(("y".to_string(), problem.y.clone()));
    for (name, c) in problem.names.iter().zip(&problem.x) {
        columns.push((name.clone(), c.clone()));
    }
    let diags: Vec<Demeaned> = columns
        .par_iter_mut()
        .map(|(name, c)| absorber.demean(name, c))
        .collect::<Result<_, _>>()?;
    let absorption = AbsorptionDiagnostics {
        tolerance: absorber.tolerance,
        max_iterations: absorber.max_iter,
        iterations: diags.iter().map(|d| d.iterations).max().unwrap_or(0),
        last_update: diags.iter().map(|d| d.last_update).fold(0.0, f64::max),
    };
    let mut columns = columns.into_iter().map(|(_, c)| c);
    let yd = columns.next().unwrap();
    let all_xd: Vec<Vec<f64>> = columns.collect();

    let kept = select_columns(&all_xd, &raw_norm2);
    let dropped: Vec<DroppedColumn> = (0..all_xd.len())
        .filter(|j| !kept.contains(j))
        .map(|j| DroppedColumn {
            name: problem.names[j].clone(),
            reason: if raw_norm2[j] == 0.0 { "all zero" } else { "collinear" }.to_string(),
        })
        .collect();
    for d in &dropped {
        log::info!("dropping column {} ({})", d.name, d.reason);
    }
    let names: Vec<String> = kept.iter().map(|&j| problem.names[j].clone()).collect();
    let xd: Vec<Vec<f64>> = kept.iter().map(|&j| all_xd[j].clone()).collect();

    let k = xd.len();
    let (coef, xtx_inv) = if k == 0 {
        (Vec::new(), DMatrix::zeros(0, 0))
    } else {
        let xtx = DMatrix::from_fn(k, k, |a, b| dot(&xd[a], &xd[b]));
        let xty = DVector::from_fn(k, |a, _| dot(&xd[a], &yd));
        let chol = xtx.cholesky().ok_or(RegressError::Singular)?;
        (chol.solve(&xty).iter().copied().collect(), chol.inverse())
    };

    let residuals: Vec<f64> = (0..n)
        .map(|i| yd[i] - xd.iter().zip(&coef).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let fitted: Vec<f64> = problem.y.iter().zip(&residuals).map(|(y, e)| y - e).collect();

    let ssr = dot(&residuals, &residuals);
    let y_mean = crate::numeric::sum(problem.y.iter().copied()) / n as f64;
    let tss: f64 = dot(
        &problem.y.iter().map(|y| y - y_mean).collect::<Vec<_>>(),
        &problem.y.iter().map(|y| y - y_mean).collect::<Vec<_>>(),
    );
    let within_tss = dot(&yd, &yd);
    let r2 = if tss > 0.0 { 1.0 - ssr / tss } else { 0.0 };
    let within_r2 = if within_tss > 0.0 {
        (1.0 - ssr / within_tss).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(HdfeFit {
        names,
        coef,
        dropped,
        xd,
        yd,
        residuals,
        fitted,
        xtx_inv,
        r2,
        within_r2,
        n_obs: n,
        fe_groups: absorber.dims.iter().map(|d| (d.name.clone(), d.n_groups)).collect(),
        absorption,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_fe_is_grand_mean_centering() {
        let y = vec![1.0, 2.0, 4.0, 7.0];
        let x = vec![0.0, 1.0, 1.0, 3.0];
        let p = HdfeProblem {
            y: y.clone(),
            x: vec![x.clone()],
            names: vec!["x".into()],
        };
        let fit = fit_hdfe(&p, &Absorber::new(vec![FeDim::from_keys("one", &[0, 0, 0, 0])])).unwrap();
        // Plain OLS slope with intercept.
        let (mx, my) = (x.iter().sum::<f64>() / 4.0, y.iter().sum::<f64>() / 4.0);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        assert!((fit.coef[0] - sxy / sxx).abs() < 1e-12);
        let fitted_mean = fit.fitted.iter().sum::<f64>() / 4.0;
        assert!((fitted_mean - my).abs() < 1e-12);
    }

    #[test]
    fn absorbed_columns_are_reported() {
        let g = [0, 0, 1, 1, 2, 2];
        let p = HdfeProblem {
            y: vec![1.0, 2.0, 3.0, 5.0, 8.0, 13.0],
            x: vec![
                vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
                vec![0.0; 6],
                vec![0.5, 1.5, 0.0, 1.0, 2.0, 0.0],
            ],
            names: vec!["group_level".into(), "zero".into(), "z".into()],
        };
        let fit = fit_hdfe(&p, &Absorber::new(vec![FeDim::from_keys("g", &g)])).unwrap();
        assert_eq!(fit.names, vec!["z"]);
        let reasons: Vec<_> = fit.dropped.iter().map(|d| (d.name.as_str(), d.reason.as_str())).collect();
        assert_eq!(reasons, vec![("group_level", "collinear"), ("zero", "all zero")]);
    }

    #[test]
    fn later_duplicate_column_is_dropped() {
        let x = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let p = HdfeProblem {
            y: vec![1.0, 0.0, 2.0, 1.0, 3.0],
            x: vec![x.clone(), x.iter().map(|v| 2.0 * v).collect()],
            names: vec!["a".into(), "b".into()],
        };
        let fit = fit_hdfe(&p, &Absorber::new(vec![FeDim::from_keys("c", &[0; 5])])).unwrap();
        assert_eq!(fit.names, vec!["a"]);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let mut a = Absorber::new(vec![
            FeDim::from_keys("a", &[0, 0, 1, 1, 2]),
            FeDim::from_keys("b", &[0, 1, 1, 2, 2]),
        ]);
        a.max_iter = 1;
        let mut col = vec![1.0, -4.0, 2.0, 9.0, 0.5];
        assert!(matches!(
            a.demean("c", &mut col),
            Err(RegressError::NotConverged { iterations: 1, .. })
        ));
    }

    #[test]
    fn group_ids_follow_key_order() {
        let d = FeDim::from_keys("k", &["b", "a", "b", "c"]);
        assert_eq!(d.groups, vec![1, 0, 1, 2]);
        assert_eq!(d.n_groups, 3);
    }
}
