//! Stacked two-source regression with absorbed fixed effects and two-way
//! clustered standard errors.
//!
//! Each paired family contributes one row per (bucketed inventor country,
//! source). The outcome is the CD index; `R = 1` marks the restricted
//! source. Country dummies carry the structural effects `β_c`, their
//! interactions with `R` the relative measurement bias `δ_c`.

mod cluster;
mod hdfe;
mod report;
mod stack;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub use cluster::{cluster_meat, cluster_vcov, psd_repair, ClusterDim, ClusteredVcov, SmallSample};
pub use hdfe::{
    fit_hdfe, Absorber, AbsorptionDiagnostics, Demeaned, DroppedColumn, FeDim, HdfeFit, HdfeProblem, COLLINEAR_TOL,
    DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
pub use report::{fit_report, write_fit_report, CoefEntry, FitReport, STAR_THRESHOLDS};
pub use stack::{
    bucket_countries, bucket_of, build_stacked, design, dummy_name, interaction_name, model_countries, render_stacked,
    write_stacked, StackedRow, StackedTable, COL_BACKWARD, COL_COVERAGE, COL_COVERAGE_MISSING, COL_NUM_COUNTRIES,
    COL_NUM_INVENTORS, COL_R,
};

use crate::bias::REFERENCE_COUNTRY;
use crate::corpus::{Anchor, Source};

pub const REST_OF_WORLD: &str = "ROW";

/// Non-reference countries reported individually; everything else other
/// than the US falls into the rest-of-world bucket.
pub const DEFAULT_COUNTRIES: &[&str] = &["CH", "DE", "FR", "GB", "IT", "NL", "SE", "CN", "JP", "KR"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("absorption did not converge for `{column}` after {iterations} iterations (last update {last_update:e})")]
    NotConverged {
        column: String,
        iterations: usize,
        last_update: f64,
    },
    #[error("cluster dimension `{0}` has a single cluster")]
    SingleCluster(String),
    #[error("no US extended-source rows for the baseline mean")]
    EmptyBaseline,
    #[error("no rows to fit")]
    NoRows,
    #[error("design matrix is singular after column selection")]
    Singular,
    #[error("{0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Source-specific tech and year effects; the US source gap is absorbed.
    #[default]
    Interacted,
    /// Plain tech and year effects with an explicit source indicator.
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BwTransform {
    #[default]
    Log1p,
    Per100,
    Raw,
}

/// Which coverage rate enters the coverage×source control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMode {
    #[default]
    CountryYear,
    Family,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressSpec {
    pub model: Model,
    /// Team size, country count and backward citations. The coverage
    /// control is included whenever coverage is available.
    pub controls: bool,
    pub bw_transform: BwTransform,
    pub coverage_mode: CoverageMode,
    pub countries: Vec<String>,
    pub anchor: Anchor,
    pub small_sample: SmallSample,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for RegressSpec {
    fn default() -> Self {
        RegressSpec {
            model: Model::Interacted,
            controls: true,
            bw_transform: BwTransform::Log1p,
            coverage_mode: CoverageMode::CountryYear,
            countries: DEFAULT_COUNTRIES.iter().map(|c| c.to_string()).collect(),
            anchor: Anchor::Publication,
            small_sample: SmallSample::Cgm,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub vcov: DMatrix<f64>,
    pub vcov_raw: DMatrix<f64>,
    pub psd_repaired: bool,
    pub min_eigenvalue: f64,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    /// Degrees of freedom of the t reference: smallest cluster count − 1.
    pub df: usize,
    pub dropped: Vec<DroppedColumn>,
    pub n_obs: usize,
    pub r2: f64,
    pub within_r2: f64,
    pub fe_groups: Vec<(String, usize)>,
    pub clusters: Vec<(String, usize)>,
    pub absorption: AbsorptionDiagnostics,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coef[i])
    }

    pub fn se_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.se[i])
    }

    /// Structural effect `β_c`.
    pub fn beta(&self, country: &str) -> Option<f64> {
        self.coef_of(&dummy_name(country))
    }

    /// Relative measurement bias `δ_c`.
    pub fn delta(&self, country: &str) -> Option<f64> {
        self.coef_of(&interaction_name(country))
    }

    /// Standard error of a linear combination `Σ w_i b_i`.
    pub fn combination_se(&self, weights: &[(&str, f64)]) -> Option<f64> {
        let idx: Vec<(usize, f64)> = weights
            .iter()
            .map(|(n, w)| self.index(n).map(|i| (i, *w)))
            .collect::<Option<_>>()?;
        let mut var = 0.0;
        for &(i, wi) in &idx {
            for &(j, wj) in &idx {
                var += wi * wj * self.vcov[(i, j)];
            }
        }
        Some(var.max(0.0).sqrt())
    }
}

fn two_sided_p(t: f64, df: usize) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    match StudentsT::new(0.0, 1.0, df.max(1) as f64) {
        Ok(dist) => 2.0 * (1.0 - dist.cdf(t.abs())),
        Err(_) => f64::NAN,
    }
}

/// Fits the stacked table: absorbs the fixed effects, runs OLS and
/// clusters by family and by tech-year.
pub fn fit_stacked(table: &StackedTable, spec: &RegressSpec) -> Result<RegressionFit, RegressError> {
    if table.rows.is_empty() {
        return Err(RegressError::NoRows);
    }
    let (problem, fes) = design(table, spec);
    let absorber = Absorber {
        dims: fes,
        tolerance: spec.tolerance,
        max_iter: spec.max_iter,
    };
    let fit = fit_hdfe(&problem, &absorber)?;
    let fam_keys: Vec<&str> = table.rows.iter().map(|r| r.family_id.as_str()).collect();
    let tj_keys: Vec<(&str, i32)> = table.rows.iter().map(|r| (r.tech.as_str(), r.year)).collect();
    let fam = ClusterDim::from_keys("family", &fam_keys);
    let tj = ClusterDim::from_keys("tech:year", &tj_keys);
    let v = cluster_vcov(&fit.xtx_inv, &fit.xd, &fit.residuals, &[&fam, &tj], spec.small_sample)?;
    let df = fam.n_clusters.min(tj.n_clusters) - 1;
    let se: Vec<f64> = (0..fit.coef.len()).map(|i| v.vcov[(i, i)].max(0.0).sqrt()).collect();
    let t: Vec<f64> = fit.coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p = t.iter().map(|&t| two_sided_p(t, df)).collect();
    if v.repaired {
        log::warn!("clustered vcov had a negative eigenvalue ({:e}); clipped", v.min_eigenvalue);
    }
    Ok(RegressionFit {
        names: fit.names,
        coef: fit.coef,
        vcov: v.vcov,
        vcov_raw: v.raw,
        psd_repaired: v.repaired,
        min_eigenvalue: v.min_eigenvalue,
        se,
        t,
        p,
        df,
        dropped: fit.dropped,
        n_obs: fit.n_obs,
        r2: fit.r2,
        within_r2: fit.within_r2,
        fe_groups: fit.fe_groups,
        clusters: v.clusters,
        absorption: fit.absorption,
        fitted: fit.fitted,
        residuals: fit.residuals,
    })
}

/// `α̂`: mean fitted value over US rows of the extended source.
pub fn baseline_mean(fit: &RegressionFit, rows: &[StackedRow]) -> Result<f64, RegressError> {
    let vals = rows
        .iter()
        .zip(&fit.fitted)
        .filter(|(r, _)| r.country == REFERENCE_COUNTRY && r.source == Source::Extended)
        .map(|(_, f)| *f);
    crate::numeric::mean(vals).ok_or(RegressError::EmptyBaseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values() {
        assert!((two_sided_p(0.0, 10) - 1.0).abs() < 1e-12);
        // Two-sided 5% critical value with 10 degrees of freedom.
        assert!((two_sided_p(2.228_138_85, 10) - 0.05).abs() < 1e-6);
        assert!(two_sided_p(40.0, 1000) < 1e-12);
    }
}
