//! Long-format plot series: coefficient panels with 95% intervals and
//! empirical CDFs of the CD index by country and source.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::cd_engine::CdRecord;
use crate::corpus::Source;
use crate::numeric::fmt6;
use crate::regress::FitReport;

/// Two-sided 95% normal critical value.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotStyle {
    ThreePanel,
    Cdf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelPoint {
    pub panel: &'static str,
    pub country: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfPoint {
    pub country: String,
    pub source: Source,
    pub cd: f64,
    pub ecdf: f64,
}

#[derive(Debug, Deserialize)]
struct Entry {
    name: String,
    coef: Option<f64>,
    se: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Panels {
    combined: Vec<Entry>,
    measurement_bias: Vec<Entry>,
    structural_effects: Vec<Entry>,
}

fn panels_from_value(v: serde_json::Value) -> crate::Result<Panels> {
    serde_json::from_value(v).map_err(|e| crate::Error::Data(format!("fit report: {e}")))
}

fn panel_points(panels: Panels, countries: Option<&BTreeSet<String>>) -> crate::Result<Vec<PanelPoint>> {
    let mut out = Vec::new();
    for (panel, entries) in [
        ("combined", panels.combined),
        ("bias", panels.measurement_bias),
        ("structural", panels.structural_effects),
    ] {
        for e in entries {
            if countries.is_some_and(|c| !c.contains(&e.name)) {
                continue;
            }
            let estimate = e
                .coef
                .filter(|c| c.is_finite())
                .ok_or_else(|| crate::Error::Data(format!("{panel} {}: missing estimate", e.name)))?;
            let se = e
                .se
                .filter(|s| s.is_finite())
                .ok_or_else(|| crate::Error::Data(format!("{panel} {}: missing standard error", e.name)))?;
            out.push(PanelPoint {
                panel,
                country: e.name,
                estimate,
                se,
                ci_low: estimate - Z95 * se,
                ci_high: estimate + Z95 * se,
            });
        }
    }
    if out.is_empty() {
        return Err(crate::Error::Data("no countries to plot".into()));
    }
    Ok(out)
}

/// Panels `combined` (β+δ), `bias` (δ) and `structural` (β).
pub fn three_panel(report: &FitReport, countries: Option<&BTreeSet<String>>) -> crate::Result<Vec<PanelPoint>> {
    panel_points(panels_from_value(serde_json::to_value(report)?)?, countries)
}

pub fn three_panel_from_json(text: &str, countries: Option<&BTreeSet<String>>) -> crate::Result<Vec<PanelPoint>> {
    panel_points(panels_from_value(serde_json::from_str(text)?)?, countries)
}

/// Step ECDF per (country, source); one point per distinct CD value.
/// `countries_of` maps a family to the countries it is plotted under.
pub fn cdf_series<'a>(
    records: impl IntoIterator<Item = &'a CdRecord>,
    countries_of: impl Fn(&str) -> Vec<String>,
) -> crate::Result<Vec<CdfPoint>> {
    let mut groups: BTreeMap<(String, Source), Vec<f64>> = BTreeMap::new();
    for r in records {
        let Some(cd) = r.cd else { continue };
        for c in countries_of(&r.family_id) {
            groups.entry((c, r.source)).or_default().push(cd);
        }
    }
    if groups.is_empty() {
        return Err(crate::Error::Data("no countries to plot".into()));
    }
    let mut out = Vec::new();
    for ((country, source), mut xs) in groups {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        for (i, x) in xs.iter().enumerate() {
            if xs.get(i + 1) == Some(x) {
                continue;
            }
            out.push(CdfPoint {
                country: country.clone(),
                source,
                cd: *x,
                ecdf: (i + 1) as f64 / n,
            });
        }
    }
    Ok(out)
}

pub fn render_three_panel(points: &[PanelPoint]) -> String {
    let mut out = String::from("panel\tcountry\testimate\tse\tci_low\tci_high\n");
    for p in points {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            p.panel,
            p.country,
            fmt6(p.estimate),
            fmt6(p.se),
            fmt6(p.ci_low),
            fmt6(p.ci_high)
        ));
    }
    out
}

pub fn render_cdf(points: &[CdfPoint]) -> String {
    let mut out = String::from("country\tsource\tcd\tecdf\n");
    for p in points {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", p.country, p.source.code(), fmt6(p.cd), fmt6(p.ecdf)));
    }
    out
}

pub(crate) fn write(path: &Path, body: &str) -> crate::Result<()> {
    std::fs::write(path, body).map_err(|e| crate::Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Anchor;

    fn rec(id: &str, source: Source, cd: Option<f64>) -> CdRecord {
        CdRecord {
            family_id: id.into(),
            source,
            n_f: 0,
            n_c: 0,
            n_p: 0,
            n_backward: 0,
            cd,
            window_years: 5,
            anchor: Anchor::Publication,
        }
    }

    #[test]
    fn ecdf_steps() {
        let rs = [
            rec("a", Source::Extended, Some(1.0)),
            rec("b", Source::Extended, Some(-1.0)),
            rec("c", Source::Extended, Some(0.0)),
            rec("d", Source::Extended, None),
        ];
        let pts = cdf_series(&rs, |_| vec!["US".into()]).unwrap();
        let got: Vec<(f64, f64)> = pts.iter().map(|p| (p.cd, p.ecdf)).collect();
        assert_eq!(got, vec![(-1.0, 1.0 / 3.0), (0.0, 2.0 / 3.0), (1.0, 1.0)]);
    }

    #[test]
    fn ecdf_ties_collapse() {
        let rs = [rec("a", Source::Restricted, Some(0.5)), rec("b", Source::Restricted, Some(0.5))];
        let pts = cdf_series(&rs, |_| vec!["DE".into()]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].ecdf, 1.0);
    }

    #[test]
    fn structural_interval() {
        let json = r#"{"combined":[],"measurement_bias":[],
            "structural_effects":[{"name":"DE","coef":-0.009,"se":0.0008}]}"#;
        let pts = three_panel_from_json(json, None).unwrap();
        assert_eq!(pts[0].panel, "structural");
        assert!((pts[0].ci_low - (-0.009 - 1.96 * 0.0008)).abs() < 1e-15);
        assert!((pts[0].ci_high - (-0.009 + 1.96 * 0.0008)).abs() < 1e-15);
    }

    #[test]
    fn missing_se_is_an_error() {
        let json = r#"{"combined":[],"measurement_bias":[{"name":"DE","coef":0.01,"se":null}],
            "structural_effects":[]}"#;
        assert!(three_panel_from_json(json, None).is_err());
    }

    #[test]
    fn empty_country_set_is_an_error() {
        let json = r#"{"combined":[],"measurement_bias":[{"name":"DE","coef":0.01,"se":0.1}],
            "structural_effects":[]}"#;
        assert!(three_panel_from_json(json, Some(&BTreeSet::new())).is_err());
        assert!(cdf_series(&[], |_| vec!["US".into()]).is_err());
    }
}
