//! Synthetic two-source corpora with known home bias, structural tilt and
//! US-centric truncation.
//!
//! Families arrive year by year. Each draws a Poisson number of backward
//! citations to earlier families, preferring its own country. A citer of
//! family `X` also cites one of `X`'s predecessors with probability
//! `tilt[country(X)]`, which moves citers from F to C and sets the
//! structural disruptiveness of that country. The restricted view keeps
//! only families with a US filing and drops each surviving link with a
//! probability that depends on the countries at its two ends.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bias::REFERENCE_COUNTRY;
use crate::corpus::{
    build_families, write_citations, write_patents, FamilyTable, PatentRow, RawEdge,
};
use crate::coverage::{write_coverage_table, OfficeCoverageTable, EPO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("parameter `{0}` must lie in [0, 1]")]
    Probability(String),
    #[error("domestic propensity {p_dom} is below foreign propensity {p_for}")]
    HomeBias { p_dom: f64, p_for: f64 },
    #[error("citation rate is zero but citations are expected")]
    ZeroCitationRate,
    #[error("year range {0}..={1} is empty")]
    Years(i32, i32),
    #[error("country list must contain {REFERENCE_COUNTRY} exactly once and no duplicates")]
    Countries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryParams {
    pub code: String,
    pub families_per_year: u32,
    /// Probability that a citer of a family from this country also cites
    /// one of that family's predecessors.
    pub tilt: f64,
    pub us_filing_share: f64,
    pub ep_filing_share: f64,
    pub jp_filing_share: f64,
}

/// Probability that a link between two US-filed families survives in the
/// restricted view, by the inventor countries at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Survival {
    /// Both ends US.
    pub us_us: f64,
    /// Ends in different countries.
    pub cross_border: f64,
    /// Both ends in the same non-US country.
    pub foreign_domestic: f64,
}

impl Survival {
    pub fn rate(&self, citing: &str, cited: &str) -> f64 {
        if citing == REFERENCE_COUNTRY && cited == REFERENCE_COUNTRY {
            self.us_us
        } else if citing == cited {
            self.foreign_domestic
        } else {
            self.cross_border
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub countries: Vec<CountryParams>,
    pub years: (i32, i32),
    /// Propensity to cite a same-country family (per candidate family).
    pub p_dom: f64,
    /// Propensity to cite a foreign family.
    pub p_for: f64,
    /// Mean number of drawn backward citations (Poisson).
    pub citation_rate: f64,
    /// Cited families are at most this many years older.
    pub lookback: u32,
    pub survival: Survival,
    pub co_invention_share: f64,
    pub max_inventors: u32,
    pub tech_fields: u32,
    /// Office → coverage rate in the first year.
    pub coverage_rates: Vec<(String, f64)>,
    /// Yearly change of every office's coverage rate.
    pub coverage_trend: f64,
    /// Half-width of the uniform office-year noise around the trend.
    pub coverage_jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self::mirage()
    }
}

fn country(code: &str, families_per_year: u32, tilt: f64, us: f64, ep: f64, jp: f64) -> CountryParams {
    CountryParams {
        code: code.into(),
        families_per_year,
        tilt,
        us_filing_share: us,
        ep_filing_share: ep,
        jp_filing_share: jp,
    }
}

impl SynthParams {
    /// Home bias with US-centric truncation, about 10⁵ families.
    pub fn mirage() -> Self {
        SynthParams {
            countries: vec![
                country("US", 1400, 0.6, 1.0, 0.3, 0.2),
                country("DE", 560, 0.7, 0.8, 0.7, 0.1),
                country("FR", 320, 0.65, 0.75, 0.7, 0.1),
                country("JP", 500, 0.5, 0.8, 0.2, 1.0),
            ],
            years: (1985, 2020),
            p_dom: 0.85,
            p_for: 0.15,
            citation_rate: 5.0,
            lookback: 8,
            survival: Survival {
                us_us: 1.0,
                cross_border: 0.6,
                foreign_domestic: 0.25,
            },
            co_invention_share: 0.05,
            max_inventors: 5,
            tech_fields: 5,
            coverage_rates: vec![
                ("DE".into(), 0.5),
                ("EP".into(), 0.6),
                ("FR".into(), 0.45),
                ("JP".into(), 0.4),
                ("US".into(), 0.55),
            ],
            coverage_trend: 0.0,
            coverage_jitter: 0.35,
        }
    }

    /// No home bias, equal tilts, equal filing behaviour and country-blind
    /// link survival: every country looks alike to both sources.
    pub fn symmetric() -> Self {
        let mut p = Self::mirage();
        for c in &mut p.countries {
            c.tilt = 0.6;
            c.us_filing_share = 1.0;
        }
        p.p_dom = 0.5;
        p.p_for = 0.5;
        p.survival = Survival {
            us_us: 0.6,
            cross_border: 0.6,
            foreign_domestic: 0.6,
        };
        p
    }

    /// Restricted view identical to the extended one.
    pub fn no_truncation() -> Self {
        let mut p = Self::mirage();
        for c in &mut p.countries {
            c.us_filing_share = 1.0;
        }
        p.survival = Survival {
            us_us: 1.0,
            cross_border: 1.0,
            foreign_domestic: 1.0,
        };
        p
    }

    /// Rescales volumes so the corpus holds about `families` families.
    pub fn with_total_families(mut self, families: u64) -> Self {
        let per_year: u64 = self.countries.iter().map(|c| u64::from(c.families_per_year)).sum();
        let years = (self.years.1 - self.years.0 + 1).max(1) as u64;
        let current = per_year * years;
        if current == 0 {
            return self;
        }
        let f = families as f64 / current as f64;
        for c in &mut self.countries {
            c.families_per_year = (f64::from(c.families_per_year) * f).round().max(1.0) as u32;
        }
        self
    }

    pub fn total_families(&self) -> u64 {
        let years = (self.years.1 - self.years.0 + 1).max(0) as u64;
        self.countries.iter().map(|c| u64::from(c.families_per_year)).sum::<u64>() * years
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |name: String, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SynthError::Probability(name))
            }
        };
        prob("p_dom".into(), self.p_dom)?;
        prob("p_for".into(), self.p_for)?;
        prob("co_invention_share".into(), self.co_invention_share)?;
        prob("survival.us_us".into(), self.survival.us_us)?;
        prob("survival.cross_border".into(), self.survival.cross_border)?;
        prob("survival.foreign_domestic".into(), self.survival.foreign_domestic)?;
        for c in &self.countries {
            prob(format!("{}.tilt", c.code), c.tilt)?;
            prob(format!("{}.us_filing_share", c.code), c.us_filing_share)?;
            prob(format!("{}.ep_filing_share", c.code), c.ep_filing_share)?;
            prob(format!("{}.jp_filing_share", c.code), c.jp_filing_share)?;
        }
        for (o, r) in &self.coverage_rates {
            prob(format!("coverage.{o}"), *r)?;
        }
        if self.p_dom < self.p_for {
            return Err(SynthError::HomeBias {
                p_dom: self.p_dom,
                p_for: self.p_for,
            });
        }
        if self.years.1 < self.years.0 {
            return Err(SynthError::Years(self.years.0, self.years.1));
        }
        let codes: BTreeSet<&str> = self.countries.iter().map(|c| c.code.as_str()).collect();
        if codes.len() != self.countries.len() || !codes.contains(REFERENCE_COUNTRY) {
            return Err(SynthError::Countries);
        }
        if !(self.citation_rate > 0.0) && self.total_families() > 0 && self.years.1 > self.years.0 {
            return Err(SynthError::ZeroCitationRate);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryPrediction {
    pub country: String,
    /// Expected share of a focal family's predecessor links missing from
    /// the restricted view.
    pub predecessor_link_loss: f64,
    pub loss_minus_us: f64,
    /// +1, 0 or −1.
    pub expected_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedSigns {
    pub countries: Vec<CountryPrediction>,
    /// Non-US countries by decreasing expected bias.
    pub ordering: Vec<String>,
}

/// Expected sign of `δ_c` from the link-loss gap between each country and
/// the US: missing predecessor links turn combined citers into focal-only
/// ones, which raises CD.
pub fn predicted_signs(params: &SynthParams) -> PredictedSigns {
    let weight = |from: &CountryParams, to: &CountryParams| {
        f64::from(to.families_per_year) * if from.code == to.code { params.p_dom } else { params.p_for }
    };
    let loss = |c: &CountryParams| {
        let total: f64 = params.countries.iter().map(|t| weight(c, t)).sum();
        if total == 0.0 {
            return 0.0;
        }
        params
            .countries
            .iter()
            .map(|t| weight(c, t) / total * (1.0 - t.us_filing_share * params.survival.rate(&c.code, &t.code)))
            .sum()
    };
    let us_loss = params
        .countries
        .iter()
        .find(|c| c.code == REFERENCE_COUNTRY)
        .map(loss)
        .unwrap_or(0.0);
    let countries: Vec<CountryPrediction> = params
        .countries
        .iter()
        .map(|c| {
            let l = loss(c);
            let d = l - us_loss;
            CountryPrediction {
                country: c.code.clone(),
                predecessor_link_loss: l,
                loss_minus_us: d,
                expected_sign: if d > 1e-12 {
                    1
                } else if d < -1e-12 {
                    -1
                } else {
                    0
                },
            }
        })
        .collect();
    let mut ordering: Vec<&CountryPrediction> = countries.iter().filter(|c| c.country != REFERENCE_COUNTRY).collect();
    ordering.sort_by(|a, b| b.loss_minus_us.total_cmp(&a.loss_minus_us).then(a.country.cmp(&b.country)));
    let ordering = ordering.into_iter().map(|c| c.country.clone()).collect();
    PredictedSigns { countries, ordering }
}

#[derive(Debug, Clone, Serialize)]
pub struct Truth {
    pub seed: u64,
    pub params: SynthParams,
    pub tilts: Vec<(String, f64)>,
    pub predicted: PredictedSigns,
    pub families: usize,
    pub extended_edges: usize,
    pub restricted_edges: usize,
}

#[derive(Debug, Clone)]
pub struct SynthFamily {
    pub family_id: String,
    pub year: i32,
    pub country: String,
    pub co_country: Option<String>,
    pub inventors: u32,
    pub offices: BTreeSet<String>,
    pub tech: String,
}

impl SynthFamily {
    pub fn us_filed(&self) -> bool {
        self.offices.contains("US")
    }

    fn member(&self, office: &str) -> String {
        format!("{}-{office}", self.family_id)
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub families: Vec<SynthFamily>,
    pub patents: Vec<PatentRow>,
    /// Patent-level citations, extended source.
    pub extended: Vec<(String, String)>,
    /// Patent-level citations between US members, restricted source.
    pub restricted: Vec<(String, String)>,
    pub coverage: OfficeCoverageTable,
    pub truth: Truth,
}

const PURPOSE_ATTRS: u64 = 0;
const PURPOSE_CITES: u64 = 1;
const PURPOSE_TRUNCATE: u64 = 2;
const PURPOSE_COVERAGE: u64 = 3;

/// Independent stream per (entity, purpose) under one seed.
fn entity_rng(seed: u64, entity: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(entity * 4 + purpose);
    rng
}

fn draw_family(params: &SynthParams, seed: u64, idx: usize, year: i32, c: &CountryParams) -> SynthFamily {
    let mut rng = entity_rng(seed, idx as u64, PURPOSE_ATTRS);
    let co_country = if params.countries.len() > 1 && rng.random_bool(params.co_invention_share) {
        let others: Vec<&CountryParams> = params.countries.iter().filter(|o| o.code != c.code).collect();
        Some(others[rng.random_range(0..others.len())].code.clone())
    } else {
        None
    };
    let inventors = rng.random_range(1..=params.max_inventors.max(1)).max(if co_country.is_some() { 2 } else { 1 });
    let mut offices = BTreeSet::from([c.code.clone()]);
    if c.code == REFERENCE_COUNTRY || rng.random_bool(c.us_filing_share) {
        offices.insert("US".to_string());
    }
    if rng.random_bool(c.ep_filing_share) {
        offices.insert(EPO.to_string());
    }
    if rng.random_bool(c.jp_filing_share) {
        offices.insert("JP".to_string());
    }
    let tech = (rng.random_range(0..params.tech_fields.max(1)) + 1).to_string();
    SynthFamily {
        family_id: format!("SF{idx:07}"),
        year,
        country: c.code.clone(),
        co_country,
        inventors,
        offices,
        tech,
    }
}

/// Builds both corpora. Deterministic in `(params, seed)` regardless of the
/// thread count.
pub fn generate(params: &SynthParams, seed: u64) -> Result<SynthCorpus, SynthError> {
    params.validate()?;
    let (y0, y1) = params.years;
    let n_years = (y1 - y0 + 1) as usize;
    let n_c = params.countries.len();

    // Families, ordered by (year, country, k).
    let mut specs = Vec::new();
    // bucket[(year offset) * n_c + country] = index range
    let mut buckets = Vec::with_capacity(n_years * n_c);
    for (yi, year) in (y0..=y1).enumerate() {
        for (ci, c) in params.countries.iter().enumerate() {
            let start = specs.len();
            for _ in 0..c.families_per_year {
                specs.push((year, ci));
            }
            buckets.push(start..specs.len());
            debug_assert_eq!(buckets.len(), yi * n_c + ci + 1);
        }
    }
    let families: Vec<SynthFamily> = specs
        .par_iter()
        .enumerate()
        .map(|(idx, &(year, ci))| draw_family(params, seed, idx, year, &params.countries[ci]))
        .collect();
    let country_idx: Vec<usize> = specs.iter().map(|s| s.1).collect();

    // Backward citations, one year at a time; within a year families only
    // cite earlier years, so they are independent.
    let poisson = (params.citation_rate > 0.0).then(|| Poisson::new(params.citation_rate).expect("positive rate"));
    let mut backward: Vec<Vec<u32>> = vec![Vec::new(); families.len()];
    for yi in 0..n_years {
        let lo = yi * n_c;
        let range = buckets[lo].start..buckets[lo + n_c - 1].end;
        let first_year = yi.saturating_sub(params.lookback as usize);
        if yi == 0 {
            continue;
        }
        let computed: Vec<Vec<u32>> = range
            .clone()
            .into_par_iter()
            .map(|idx| {
                let mut rng = entity_rng(seed, idx as u64, PURPOSE_CITES);
                let own = country_idx[idx];
                let k = poisson.as_ref().map(|p| p.sample(&mut rng) as u64).unwrap_or(0);
                let weights: Vec<f64> = params
                    .countries
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| f64::from(c.families_per_year) * if ci == own { params.p_dom } else { params.p_for })
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut out: Vec<u32> = Vec::new();
                if total <= 0.0 {
                    return out;
                }
                for _ in 0..k {
                    let mut u = rng.random_range(0.0..total);
                    let mut ci = 0;
                    while ci + 1 < n_c && u >= weights[ci] {
                        u -= weights[ci];
                        ci += 1;
                    }
                    let ty = rng.random_range(first_year..yi);
                    let b = &buckets[ty * n_c + ci];
                    if b.is_empty() {
                        continue;
                    }
                    let target = rng.random_range(b.clone());
                    out.push(target as u32);
                    let preds = &backward[target];
                    if !preds.is_empty() && rng.random_bool(params.countries[country_idx[target]].tilt) {
                        out.push(preds[rng.random_range(0..preds.len())]);
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        for (idx, list) in range.zip(computed) {
            backward[idx] = list;
        }
    }

    // Restricted view: US-filed ends only, country-dependent survival.
    let restricted_lists: Vec<Vec<u32>> = backward
        .par_iter()
        .enumerate()
        .map(|(idx, cited)| {
            if !families[idx].us_filed() {
                return Vec::new();
            }
            let mut rng = entity_rng(seed, idx as u64, PURPOSE_TRUNCATE);
            cited
                .iter()
                .copied()
                .filter(|&j| {
                    let target = &families[j as usize];
                    // One draw per link keeps streams aligned across rules.
                    let u: f64 = rng.random();
                    target.us_filed() && u < params.survival.rate(&families[idx].country, &target.country)
                })
                .collect()
        })
        .collect();

    let mut patents = Vec::new();
    for f in &families {
        let mut countries = vec![f.country.clone(); f.inventors as usize];
        if let Some(co) = &f.co_country {
            countries[1] = co.clone();
        }
        for office in &f.offices {
            patents.push(PatentRow {
                patent_id: f.member(office),
                family_id: f.family_id.clone(),
                office: office.clone(),
                pub_year: Some(f.year),
                filing_year: Some(f.year - 1),
                granted: true,
                is_us_utility: office == "US",
                countries: countries.clone(),
                tech_field: Some(f.tech.clone()),
            });
        }
    }
    let mut extended = Vec::new();
    let mut restricted = Vec::new();
    for (i, f) in families.iter().enumerate() {
        for &j in &backward[i] {
            let t = &families[j as usize];
            extended.push((f.member(&f.country), t.member(&t.country)));
        }
        for &j in &restricted_lists[i] {
            restricted.push((f.member("US"), families[j as usize].member("US")));
        }
    }

    let mut coverage = OfficeCoverageTable::new();
    for (k, (office, base)) in params.coverage_rates.iter().enumerate() {
        let mut rng = entity_rng(seed, k as u64, PURPOSE_COVERAGE);
        for year in (y0 - 1)..=y1 {
            let noise = if params.coverage_jitter > 0.0 {
                rng.random_range(-params.coverage_jitter..=params.coverage_jitter)
            } else {
                0.0
            };
            let rate = (base + params.coverage_trend * f64::from(year - y0) + noise).clamp(0.0, 1.0);
            coverage
                .insert(office, year, rate)
                .map_err(|_| SynthError::Probability(format!("coverage.{office}")))?;
        }
    }

    let truth = Truth {
        seed,
        params: params.clone(),
        tilts: params.countries.iter().map(|c| (c.code.clone(), c.tilt)).collect(),
        predicted: predicted_signs(params),
        families: families.len(),
        extended_edges: extended.len(),
        restricted_edges: restricted.len(),
    };
    Ok(SynthCorpus {
        families,
        patents,
        extended,
        restricted,
        coverage,
        truth,
    })
}

impl SynthCorpus {
    pub fn family_table(&self) -> FamilyTable {
        build_families(&self.patents)
    }

    fn raw(edges: &[(String, String)]) -> Vec<RawEdge> {
        edges
            .iter()
            .enumerate()
            .map(|(i, (a, b))| RawEdge {
                citing: a.clone(),
                cited: b.clone(),
                row_number: i + 2,
            })
            .collect()
    }

    pub fn extended_edges(&self) -> Vec<RawEdge> {
        Self::raw(&self.extended)
    }

    pub fn restricted_edges(&self) -> Vec<RawEdge> {
        Self::raw(&self.restricted)
    }

    /// Writes `patents.tsv`, `citations_extended.tsv`,
    /// `citations_restricted.tsv`, `coverage_table.tsv` and `truth.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> crate::Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        let p = |name: &str| dir.join(name);
        write_patents(p("patents.tsv"), &self.patents)?;
        write_citations(p("citations_extended.tsv"), &self.extended)?;
        write_citations(p("citations_restricted.tsv"), &self.restricted)?;
        write_coverage_table(p("coverage_table.tsv"), &self.coverage)?;
        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        std::fs::write(p("truth.json"), truth).map_err(|e| crate::Error::io(p("truth.json"), e))?;
        Ok(["patents.tsv", "citations_extended.tsv", "citations_restricted.tsv", "coverage_table.tsv", "truth.json"]
            .iter()
            .map(|n| p(n))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut p: SynthParams) -> SynthParams {
        p.years = (1995, 2004);
        p.with_total_families(3000)
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = small(SynthParams::mirage());
        let a = generate(&p, 7).unwrap();
        let b = generate(&p, 7).unwrap();
        assert_eq!(a.patents, b.patents);
        assert_eq!(a.extended, b.extended);
        assert_eq!(a.restricted, b.restricted);
        let c = generate(&p, 8).unwrap();
        assert_ne!(a.extended, c.extended);
    }

    #[test]
    fn restricted_links_are_extended_links() {
        let p = small(SynthParams::mirage());
        let c = generate(&p, 1).unwrap();
        let fam = |pid: &str| pid.split('-').next().unwrap().to_string();
        let ext: BTreeSet<(String, String)> = c.extended.iter().map(|(a, b)| (fam(a), fam(b))).collect();
        assert!(!c.restricted.is_empty());
        for (a, b) in &c.restricted {
            assert!(ext.contains(&(fam(a), fam(b))));
        }
    }

    #[test]
    fn zero_cross_border_survival_removes_cross_country_links() {
        let mut p = small(SynthParams::mirage());
        p.survival.cross_border = 0.0;
        let c = generate(&p, 2).unwrap();
        let country: std::collections::HashMap<&str, &str> =
            c.families.iter().map(|f| (f.family_id.as_str(), f.country.as_str())).collect();
        let fam = |pid: &str| pid.split('-').next().unwrap().to_string();
        for (a, b) in &c.restricted {
            assert_eq!(country[fam(a).as_str()], country[fam(b).as_str()]);
        }
    }

    #[test]
    fn validation() {
        let mut p = SynthParams::mirage();
        p.p_dom = 0.1;
        assert!(matches!(p.validate(), Err(SynthError::HomeBias { .. })));
        let mut p = SynthParams::mirage();
        p.citation_rate = 0.0;
        assert_eq!(p.validate(), Err(SynthError::ZeroCitationRate));
        let mut p = SynthParams::mirage();
        p.countries[1].tilt = 1.5;
        assert!(matches!(p.validate(), Err(SynthError::Probability(_))));
        let mut p = SynthParams::mirage();
        p.countries.remove(0);
        assert_eq!(p.validate(), Err(SynthError::Countries));
    }

    #[test]
    fn sign_predictions() {
        let m = predicted_signs(&SynthParams::mirage());
        for c in &m.countries {
            let want = if c.country == "US" { 0 } else { 1 };
            assert_eq!(c.expected_sign, want, "{}", c.country);
        }
        let s = predicted_signs(&SynthParams::symmetric());
        assert!(s.countries.iter().all(|c| c.expected_sign == 0));
        let n = predicted_signs(&SynthParams::no_truncation());
        assert!(n.countries.iter().all(|c| c.loss_minus_us == 0.0));

        // Harsher loss of same-country foreign links raises every foreign gap.
        let mut harsher = SynthParams::mirage();
        harsher.survival.foreign_domestic = 0.05;
        let h = predicted_signs(&harsher);
        for (a, b) in m.countries.iter().zip(&h.countries) {
            if a.country != "US" {
                assert!(b.loss_minus_us > a.loss_minus_us);
            }
        }
    }

    #[test]
    fn scaling_hits_target_volume() {
        let p = SynthParams::mirage().with_total_families(100_000);
        let total = p.total_families() as f64;
        assert!((total - 100_000.0).abs() / 100_000.0 < 0.01);
    }
}
