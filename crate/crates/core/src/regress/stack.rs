//! Family-country-source stacking and design construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{BwTransform, CoverageMode, Model, RegressSpec, REST_OF_WORLD};
use crate::bias::REFERENCE_COUNTRY;
use crate::cd_engine::CdRecord;
use crate::corpus::{FamilyTable, Issue, Source};
use crate::coverage::CoverageReport;
use crate::numeric::fmt6;
use crate::regress::hdfe::{FeDim, HdfeProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackedRow {
    pub family_id: String,
    /// Bucketed country (listed country or the rest-of-world bucket).
    pub country: String,
    pub source: Source,
    pub cd: f64,
    pub tech: String,
    pub year: i32,
    /// Team size divided by 100.
    pub num_inventors: f64,
    pub num_countries: f64,
    /// Transformed backward-citation count in this row's source.
    pub backward: f64,
    pub coverage: Option<f64>,
}

impl StackedRow {
    pub fn r(&self) -> f64 {
        f64::from(self.source.code())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StackedTable {
    pub rows: Vec<StackedRow>,
    /// Non-reference countries in column order, rest-of-world last.
    pub countries: Vec<String>,
    pub coverage_available: bool,
    pub excluded: Vec<Issue>,
}

pub fn bucket_of<'a>(country: &'a str, listed: &[String]) -> &'a str {
    if country == REFERENCE_COUNTRY || listed.iter().any(|c| c == country) {
        country
    } else {
        REST_OF_WORLD
    }
}

/// Maps a family's inventor countries to the model's buckets, deduplicated.
pub fn bucket_countries(countries: &BTreeSet<String>, listed: &[String]) -> BTreeSet<String> {
    countries.iter().map(|c| bucket_of(c, listed).to_string()).collect()
}

/// Country columns: listed countries in order without the reference, then
/// the rest-of-world bucket.
pub fn model_countries(listed: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in listed {
        if c != REFERENCE_COUNTRY && c != REST_OF_WORLD && !out.contains(c) {
            out.push(c.clone());
        }
    }
    out.push(REST_OF_WORLD.to_string());
    out
}

/// Two rows (one per source) per family and bucketed country, for families
/// whose CD is defined in both sources.
pub fn build_stacked(
    restricted: &[CdRecord],
    extended: &[CdRecord],
    families: &FamilyTable,
    coverage: Option<&CoverageReport>,
    spec: &RegressSpec,
) -> StackedTable {
    let countries = model_countries(&spec.countries);
    let mut out = StackedTable {
        countries: countries.clone(),
        coverage_available: coverage.is_some(),
        ..Default::default()
    };
    let res: BTreeMap<&str, &CdRecord> = restricted.iter().map(|r| (r.family_id.as_str(), r)).collect();
    let mut ext: Vec<&CdRecord> = extended.iter().collect();
    ext.sort_by(|a, b| a.family_id.cmp(&b.family_id));

    for e in ext {
        let fid = e.family_id.as_str();
        let exclude = |detail: &str| Issue::new(0, "stack_excluded", format!("{fid}: {detail}"));
        let Some(r) = res.get(fid) else {
            out.excluded.push(exclude("no restricted record"));
            continue;
        };
        let (Some(cd1), Some(cd0)) = (r.cd, e.cd) else {
            out.excluded.push(exclude("cd undefined in one source"));
            continue;
        };
        let Some(fam) = families.get(fid) else {
            out.excluded.push(exclude("unknown family"));
            continue;
        };
        if fam.countries.is_empty() {
            out.excluded.push(exclude("no inventor country"));
            continue;
        }
        let Some(year) = fam.anchor_year(spec.anchor) else {
            out.excluded.push(exclude("no anchor year"));
            continue;
        };
        let tech = fam.primary_tech().unwrap_or("UNKNOWN").to_string();
        let num_countries = fam.countries.len() as f64;
        let num_inventors = f64::from(fam.num_inventors) / 100.0;
        let buckets = bucket_countries(&fam.countries, &spec.countries);
        for c in &buckets {
            // Coverage is looked up with the raw inventor countries that fall
            // in this bucket; the best-covered one represents the bucket.
            let rate = coverage.and_then(|cov| {
                fam.countries
                    .iter()
                    .filter(|raw| bucket_of(raw, &spec.countries) == c)
                    .filter_map(|raw| match spec.coverage_mode {
                        CoverageMode::CountryYear => cov.cohort_rate(raw, year),
                        CoverageMode::Family => cov.family_rate(fid, raw),
                    })
                    .reduce(f64::max)
            });
            for (source, cd, rec) in [(Source::Extended, cd0, e), (Source::Restricted, cd1, *r)] {
                out.rows.push(StackedRow {
                    family_id: fid.to_string(),
                    country: c.clone(),
                    source,
                    cd,
                    tech: tech.clone(),
                    year,
                    num_inventors,
                    num_countries,
                    backward: spec.bw_transform.apply(rec.n_backward),
                    coverage: rate,
                });
            }
        }
    }
    for issue in &out.excluded {
        log::debug!("{}", issue.detail);
    }
    out
}

impl BwTransform {
    pub fn apply(self, count: u64) -> f64 {
        let c = count as f64;
        match self {
            BwTransform::Log1p => c.ln_1p(),
            BwTransform::Per100 => c / 100.0,
            BwTransform::Raw => c,
        }
    }
}

pub const COL_R: &str = "R";
pub const COL_COVERAGE: &str = "coverage:R";
pub const COL_COVERAGE_MISSING: &str = "coverage_missing:R";
pub const COL_NUM_COUNTRIES: &str = "num_countries";
pub const COL_NUM_INVENTORS: &str = "num_inventors_100";
pub const COL_BACKWARD: &str = "backward_citations";

pub fn dummy_name(country: &str) -> String {
    format!("D_{country}")
}

pub fn interaction_name(country: &str) -> String {
    format!("D_{country}:R")
}

/// Design columns in fixed order: country dummies, `R` (simple model only),
/// country×source interactions, then controls.
pub fn design(table: &StackedTable, spec: &RegressSpec) -> (HdfeProblem, Vec<FeDim>) {
    let rows = &table.rows;
    let mut names = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    let mut push = |name: String, col: Vec<f64>| {
        names.push(name);
        x.push(col);
    };
    for c in &table.countries {
        push(dummy_name(c), rows.iter().map(|r| f64::from(u8::from(&r.country == c))).collect());
    }
    if spec.model == Model::Simple {
        push(COL_R.into(), rows.iter().map(StackedRow::r).collect());
    }
    for c in &table.countries {
        push(
            interaction_name(c),
            rows.iter().map(|r| f64::from(u8::from(&r.country == c)) * r.r()).collect(),
        );
    }
    if table.coverage_available {
        push(COL_COVERAGE.into(), rows.iter().map(|r| r.coverage.unwrap_or(0.0) * r.r()).collect());
        push(
            COL_COVERAGE_MISSING.into(),
            rows.iter().map(|r| f64::from(u8::from(r.coverage.is_none())) * r.r()).collect(),
        );
    }
    if spec.controls {
        push(COL_NUM_COUNTRIES.into(), rows.iter().map(|r| r.num_countries).collect());
        push(COL_NUM_INVENTORS.into(), rows.iter().map(|r| r.num_inventors).collect());
        push(COL_BACKWARD.into(), rows.iter().map(|r| r.backward).collect());
    }
    let fes = match spec.model {
        Model::Interacted => {
            let js: Vec<(&str, u8)> = rows.iter().map(|r| (r.tech.as_str(), r.source.code())).collect();
            let ts: Vec<(i32, u8)> = rows.iter().map(|r| (r.year, r.source.code())).collect();
            vec![FeDim::from_keys("tech:source", &js), FeDim::from_keys("year:source", &ts)]
        }
        Model::Simple => {
            let j: Vec<&str> = rows.iter().map(|r| r.tech.as_str()).collect();
            let t: Vec<i32> = rows.iter().map(|r| r.year).collect();
            vec![FeDim::from_keys("tech", &j), FeDim::from_keys("year", &t)]
        }
    };
    let problem = HdfeProblem {
        y: rows.iter().map(|r| r.cd).collect(),
        x,
        names,
    };
    (problem, fes)
}

pub fn render_stacked(table: &StackedTable) -> String {
    let mut out = String::from(
        "family_id\tcountry\tsource\tcd\ttech\tyear\tnum_inventors_100\tnum_countries\tbackward\tcoverage\tcoverage_missing\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.family_id,
            r.country,
            r.source.code(),
            fmt6(r.cd),
            r.tech,
            r.year,
            fmt6(r.num_inventors),
            r.num_countries,
            fmt6(r.backward),
            r.coverage.map(fmt6).unwrap_or_default(),
            u8::from(r.coverage.is_none())
        ));
    }
    out
}

pub fn write_stacked(path: impl AsRef<Path>, table: &StackedTable) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| crate::Error::io(path, e))?);
    w.write_all(render_stacked(table).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| crate::Error::io(path, e))
}
