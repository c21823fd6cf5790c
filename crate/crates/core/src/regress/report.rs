//! JSON fit report grouped into measurement bias, structural effects and
//! controls.

use std::path::Path;

use serde::Serialize;

use super::{
    dummy_name, interaction_name, AbsorptionDiagnostics, DroppedColumn, Model, RegressSpec, RegressionFit,
    COL_BACKWARD, COL_COVERAGE, COL_COVERAGE_MISSING, COL_NUM_COUNTRIES, COL_NUM_INVENTORS, COL_R,
};

pub const STAR_THRESHOLDS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, Serialize)]
pub struct CoefEntry {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub stars: String,
    /// `100 · coef / α̂`.
    pub pct_of_baseline: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinedEntry {
    pub name: String,
    /// `β_c + δ_c`: the country gap measured on the restricted source.
    pub coef: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeEntry {
    pub name: String,
    pub groups: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitStats {
    pub n_obs: usize,
    pub r2: f64,
    pub within_r2: f64,
    pub clusters: Vec<FeEntry>,
    pub df: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Baseline {
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VcovInfo {
    pub psd_repaired: bool,
    pub min_eigenvalue: f64,
    pub small_sample: super::SmallSample,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub model: Model,
    pub spec: RegressSpec,
    pub measurement_bias: Vec<CoefEntry>,
    /// `θ` in the simple model; absent when absorbed.
    pub us_baseline_bias: Option<CoefEntry>,
    pub structural_effects: Vec<CoefEntry>,
    pub combined: Vec<CombinedEntry>,
    pub controls: Vec<CoefEntry>,
    pub fixed_effects: Vec<FeEntry>,
    pub fit: FitStats,
    pub baseline: Baseline,
    pub absorption: AbsorptionDiagnostics,
    pub dropped_columns: Vec<DroppedColumn>,
    pub vcov: VcovInfo,
    pub star_thresholds: [f64; 3],
}

fn stars(p: f64) -> String {
    "*".repeat(STAR_THRESHOLDS.iter().filter(|&&t| p < t).count())
}

fn entry(fit: &RegressionFit, column: &str, label: &str, alpha: f64) -> Option<CoefEntry> {
    let i = fit.index(column)?;
    Some(CoefEntry {
        name: label.to_string(),
        coef: fit.coef[i],
        se: fit.se[i],
        t: fit.t[i],
        p: fit.p[i],
        stars: stars(fit.p[i]),
        pct_of_baseline: (alpha != 0.0).then(|| 100.0 * fit.coef[i] / alpha),
    })
}

pub fn fit_report(fit: &RegressionFit, spec: &RegressSpec, countries: &[String], alpha_hat: f64) -> FitReport {
    let by_country = |col: &dyn Fn(&str) -> String| -> Vec<CoefEntry> {
        countries.iter().filter_map(|c| entry(fit, &col(c), c, alpha_hat)).collect()
    };
    let combined = countries
        .iter()
        .filter_map(|c| {
            let (b, d) = (dummy_name(c), interaction_name(c));
            Some(CombinedEntry {
                name: c.clone(),
                coef: fit.coef_of(&b)? + fit.coef_of(&d)?,
                se: fit.combination_se(&[(&b, 1.0), (&d, 1.0)])?,
            })
        })
        .collect();
    let controls = [
        COL_COVERAGE,
        COL_COVERAGE_MISSING,
        COL_NUM_COUNTRIES,
        COL_NUM_INVENTORS,
        COL_BACKWARD,
    ]
    .iter()
    .filter_map(|c| entry(fit, c, c, alpha_hat))
    .collect();
    FitReport {
        model: spec.model,
        spec: spec.clone(),
        measurement_bias: by_country(&interaction_name),
        us_baseline_bias: entry(fit, COL_R, "US", alpha_hat),
        structural_effects: by_country(&dummy_name),
        combined,
        controls,
        fixed_effects: fit
            .fe_groups
            .iter()
            .map(|(n, g)| FeEntry {
                name: n.clone(),
                groups: *g,
            })
            .collect(),
        fit: FitStats {
            n_obs: fit.n_obs,
            r2: fit.r2,
            within_r2: fit.within_r2,
            clusters: fit
                .clusters
                .iter()
                .map(|(n, g)| FeEntry {
                    name: n.clone(),
                    groups: *g,
                })
                .collect(),
            df: fit.df,
        },
        baseline: Baseline { alpha_hat },
        absorption: fit.absorption.clone(),
        dropped_columns: fit.dropped.clone(),
        vcov: VcovInfo {
            psd_repaired: fit.psd_repaired,
            min_eigenvalue: fit.min_eigenvalue,
            small_sample: spec.small_sample,
        },
        star_thresholds: STAR_THRESHOLDS,
    }
}

pub fn write_fit_report(path: impl AsRef<Path>, report: &FitReport) -> crate::Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| crate::Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_levels() {
        assert_eq!(stars(0.001), "***");
        assert_eq!(stars(0.03), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }
}
