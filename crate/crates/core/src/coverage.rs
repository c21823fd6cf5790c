//! Backward-citation coverage per family through the inventor's home office,
//! and country-year cohort means.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Anchor, FamilyRecord, Issue};
use crate::numeric::{fmt6, CompensatedSum};

pub const EPO: &str = "EP";
pub const DEFAULT_MIN_COHORT: usize = 1000;

/// Contracting states of the European Patent Convention.
pub const EPC_MEMBERS: &[&str] = &[
    "AL", "AT", "BE", "BG", "CH", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR", "HR", "HU", "IE", "IS",
    "IT", "LI", "LT", "LU", "LV", "MC", "ME", "MK", "MT", "NL", "NO", "PL", "PT", "RO", "RS", "SE", "SI", "SK", "SM",
    "TR",
];

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("{path}:{line}: {detail}")]
    Parse { path: String, line: usize, detail: String },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("rate {rate} for ({office}, {year}) is outside [0, 1]")]
    RateOutOfRange { office: String, year: i32, rate: f64 },
    #[error("duplicate rate for ({office}, {year})")]
    Duplicate { office: String, year: i32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Share of applications with backward-citation data, per office and
/// filing year. Absent pairs are not zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OfficeCoverageTable {
    rates: BTreeMap<(String, i32), f64>,
}

impl OfficeCoverageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, office: &str, year: i32, rate: f64) -> Result<(), CoverageError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(CoverageError::RateOutOfRange {
                office: office.to_string(),
                year,
                rate,
            });
        }
        if self.rates.insert((office.to_string(), year), rate).is_some() {
            return Err(CoverageError::Duplicate {
                office: office.to_string(),
                year,
            });
        }
        Ok(())
    }

    pub fn rate(&self, office: &str, year: i32) -> Option<f64> {
        self.rates.get(&(office.to_string(), year)).copied()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i32, f64)> {
        self.rates.iter().map(|((o, y), r)| (o.as_str(), *y, *r))
    }
}

/// Reads `office year rate`.
pub fn load_coverage_table(path: impl AsRef<Path>) -> Result<OfficeCoverageTable, CoverageError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| CoverageError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_coverage_table(&text, &path.display().to_string())
}

pub fn parse_coverage_table(text: &str, name: &str) -> Result<OfficeCoverageTable, CoverageError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').map(str::trim).collect();
    let col = |c: &str| {
        header.iter().position(|h| *h == c).ok_or_else(|| CoverageError::MissingColumn {
            path: name.to_string(),
            column: c.to_string(),
        })
    };
    let (io, iy, ir) = (col("office")?, col("year")?, col("rate")?);
    let mut table = OfficeCoverageTable::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = k + 2;
        let parse_err = |detail: String| CoverageError::Parse {
            path: name.to_string(),
            line: line_no,
            detail,
        };
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let get = |i: usize| f.get(i).copied().ok_or_else(|| parse_err("short row".into()));
        let office = get(io)?.to_ascii_uppercase();
        let year: i32 = get(iy)?.parse().map_err(|_| parse_err(format!("bad year `{}`", f[iy])))?;
        let rate: f64 = get(ir)?.parse().map_err(|_| parse_err(format!("bad rate `{}`", f[ir])))?;
        table.insert(&office, year, rate)?;
    }
    Ok(table)
}

pub fn write_coverage_table(path: impl AsRef<Path>, table: &OfficeCoverageTable) -> crate::Result<()> {
    let mut out = String::from("office\tyear\trate\n");
    for (o, y, r) in table.iter() {
        out.push_str(&format!("{o}\t{y}\t{}\n", fmt6(r)));
    }
    write_text(path.as_ref(), &out)
}

/// Country → home office, plus the countries for which an EPO filing counts
/// as a home filing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomeOfficeMap {
    overrides: BTreeMap<String, String>,
    epc: BTreeSet<String>,
}

impl Default for HomeOfficeMap {
    fn default() -> Self {
        HomeOfficeMap {
            overrides: BTreeMap::new(),
            epc: EPC_MEMBERS.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl HomeOfficeMap {
    pub fn new(epc: impl IntoIterator<Item = String>) -> Self {
        HomeOfficeMap {
            overrides: BTreeMap::new(),
            epc: epc.into_iter().collect(),
        }
    }

    /// Unless overridden, a country's home office carries its own code.
    pub fn with_office(mut self, country: &str, office: &str) -> Self {
        self.overrides.insert(country.to_string(), office.to_string());
        self
    }

    pub fn home_office<'a>(&'a self, country: &'a str) -> &'a str {
        self.overrides.get(country).map(String::as_str).unwrap_or(country)
    }

    pub fn is_epc(&self, country: &str) -> bool {
        self.epc.contains(country)
    }

    fn is_home_equivalent(&self, country: &str, office: &str) -> bool {
        office == self.home_office(country) || (office == EPO && self.is_epc(country))
    }
}

/// What to do when a family filed at its home office but the table has no
/// rate for that office-year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MissingHomeRate {
    #[default]
    Missing,
    FallbackToMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageRule {
    Home,
    Bypass,
    HomeRateMissing,
    NoRate,
    NoCountries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyCoverage {
    pub rate: Option<f64>,
    pub rule: CoverageRule,
}

fn max_rate<'a>(offices: impl Iterator<Item = &'a String>, year: i32, table: &OfficeCoverageTable) -> Option<f64> {
    offices.filter_map(|o| table.rate(o, year)).reduce(f64::max)
}

/// Coverage of a family seen from inventor `country`. If the family filed
/// at the home office (or the EPO for EPC countries) the home rate binds;
/// otherwise the best-covered publication office is used.
pub fn family_coverage(
    offices: &BTreeSet<String>,
    country: Option<&str>,
    year: i32,
    table: &OfficeCoverageTable,
    home: &HomeOfficeMap,
    policy: MissingHomeRate,
) -> FamilyCoverage {
    let Some(country) = country else {
        return FamilyCoverage {
            rate: None,
            rule: CoverageRule::NoCountries,
        };
    };
    let mut home_held = offices.iter().filter(|o| home.is_home_equivalent(country, o)).peekable();
    if home_held.peek().is_some() {
        if let Some(r) = max_rate(home_held, year, table) {
            return FamilyCoverage {
                rate: Some(r),
                rule: CoverageRule::Home,
            };
        }
        if policy == MissingHomeRate::Missing {
            return FamilyCoverage {
                rate: None,
                rule: CoverageRule::HomeRateMissing,
            };
        }
    }
    match max_rate(offices.iter(), year, table) {
        Some(r) => FamilyCoverage {
            rate: Some(r),
            rule: CoverageRule::Bypass,
        },
        None => FamilyCoverage {
            rate: None,
            rule: CoverageRule::NoRate,
        },
    }
}

/// Coverage for each inventor country of a family, keyed on the filing year.
pub fn family_coverages(
    family: &FamilyRecord,
    table: &OfficeCoverageTable,
    home: &HomeOfficeMap,
    policy: MissingHomeRate,
) -> Vec<(Option<String>, FamilyCoverage)> {
    let year = family.coverage_year();
    if family.countries.is_empty() {
        return vec![(None, family_coverage(&family.offices, None, year, table, home, policy))];
    }
    family
        .countries
        .iter()
        .map(|c| {
            (
                Some(c.clone()),
                family_coverage(&family.offices, Some(c), year, table, home, policy),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CohortCoverage {
    /// Families in the cohort, rated or not.
    pub n: usize,
    pub n_rated: usize,
    /// `None` when suppressed or when no family has a rate.
    pub mean_rate: Option<f64>,
    pub suppressed: bool,
}

/// Mean over rated families; suppressed below `min_n` families.
pub fn aggregate_coverage(rates: &[Option<f64>], min_n: usize) -> CohortCoverage {
    let n = rates.len();
    let rated: Vec<f64> = rates.iter().flatten().copied().collect();
    let suppressed = n < min_n;
    let mean_rate = if suppressed || rated.is_empty() {
        None
    } else {
        let s: CompensatedSum = rated.iter().copied().collect();
        Some(s.value() / rated.len() as f64)
    };
    CohortCoverage {
        n,
        n_rated: rated.len(),
        mean_rate,
        suppressed,
    }
}

#[derive(Debug, Clone, Default)]
pub struct CoverageReport {
    pub cohorts: BTreeMap<(String, i32), CohortCoverage>,
    /// Per (family, country) rate.
    pub family_rates: BTreeMap<(String, String), FamilyCoverage>,
    pub issues: Vec<Issue>,
}

impl CoverageReport {
    /// Country-year mean, `None` when suppressed or unrated.
    pub fn cohort_rate(&self, country: &str, year: i32) -> Option<f64> {
        self.cohorts
            .get(&(country.to_string(), year))
            .and_then(|c| c.mean_rate)
    }

    pub fn family_rate(&self, family_id: &str, country: &str) -> Option<f64> {
        self.family_rates
            .get(&(family_id.to_string(), country.to_string()))
            .and_then(|c| c.rate)
    }
}

#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub anchor: Anchor,
    pub min_cohort: usize,
    pub missing_home: MissingHomeRate,
    pub home: HomeOfficeMap,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            anchor: Anchor::Publication,
            min_cohort: DEFAULT_MIN_COHORT,
            missing_home: MissingHomeRate::Missing,
            home: HomeOfficeMap::default(),
        }
    }
}

/// Family rates and country-year cohorts. A family enters the cohort of each
/// of its inventor countries in its anchor year.
pub fn country_year_coverage<'a>(
    families: impl IntoParallelIterator<Item = &'a FamilyRecord>,
    table: &OfficeCoverageTable,
    config: &CoverageConfig,
) -> CoverageReport {
    let per_family: Vec<_> = families
        .into_par_iter()
        .map(|f| {
            let year = f.anchor_year(config.anchor);
            (f, year, family_coverages(f, table, &config.home, config.missing_home))
        })
        .collect();

    let mut report = CoverageReport::default();
    let mut groups: BTreeMap<(String, i32), Vec<Option<f64>>> = BTreeMap::new();
    for (f, year, rates) in per_family {
        for (country, cov) in rates {
            let Some(country) = country else {
                report
                    .issues
                    .push(Issue::new(0, "coverage_no_country", f.family_id.clone()));
                continue;
            };
            report
                .family_rates
                .insert((f.family_id.clone(), country.clone()), cov);
            match year {
                Some(y) => groups.entry((country, y)).or_default().push(cov.rate),
                None => report
                    .issues
                    .push(Issue::new(0, "coverage_no_anchor_year", f.family_id.clone())),
            }
        }
    }
    report.cohorts = groups
        .into_iter()
        .map(|(k, rates)| (k, aggregate_coverage(&rates, config.min_cohort)))
        .collect();
    report
}

pub fn render_coverage(report: &CoverageReport) -> String {
    let mut out = String::from("country\tyear\tn\tmean_rate\tsuppressed\n");
    for ((c, y), cohort) in &report.cohorts {
        out.push_str(&format!(
            "{c}\t{y}\t{}\t{}\t{}\n",
            cohort.n,
            cohort.mean_rate.map(fmt6).unwrap_or_default(),
            u8::from(cohort.suppressed)
        ));
    }
    out
}

pub fn write_coverage(path: impl AsRef<Path>, report: &CoverageReport) -> crate::Result<()> {
    write_text(path.as_ref(), &render_coverage(report))
}

fn write_text(path: &Path, body: &str) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| crate::Error::io(path, e))?);
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| crate::Error::io(path, e))
}
