//! Restricted-vs-extended comparison of CD measurements.
//!
//! Patent level: `ΔCD = CD₁ − CD₀` and a per-citer join of bucket status
//! across the two networks ([`ShiftTally`]). Country level: paired means
//! `m_{c,1}`, `m_{c,0}`, `Bias_c = m_{c,1} − m_{c,0}` and
//! `RelBias_c = Bias_c − Bias_US`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cd_engine::{classify_citers, Bucket, CdError, CdRecord, Counts, Window};
use crate::corpus::{CitationNetwork, FamilyTable, FocalSet, Issue, Source};
use crate::numeric::{fmt6, CompensatedSum};

pub const REFERENCE_COUNTRY: &str = "US";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiasError {
    #[error("records belong to different families: `{0}` vs `{1}`")]
    FamilyMismatch(String, String),
    #[error("records use different windows or anchors")]
    WindowMismatch,
    #[error("expected a restricted and an extended record")]
    SourceMismatch,
    #[error("shift of {delta} exceeds n_c = {n_c}")]
    InfeasibleShift { n_c: u64, delta: u64 },
    #[error("base counts have a zero denominator")]
    ZeroDenominator,
    #[error("country `{0}` has no paired observations")]
    NoRows(String),
    #[error(transparent)]
    Cd(#[from] CdError),
}

/// `CD₁ − CD₀`; `None` if either side is undefined.
pub fn delta_cd(restricted: &CdRecord, extended: &CdRecord) -> Result<Option<f64>, BiasError> {
    if restricted.family_id != extended.family_id {
        return Err(BiasError::FamilyMismatch(
            restricted.family_id.clone(),
            extended.family_id.clone(),
        ));
    }
    if restricted.source != Source::Restricted || extended.source != Source::Extended {
        return Err(BiasError::SourceMismatch);
    }
    if restricted.window_years != extended.window_years || restricted.anchor != extended.anchor {
        return Err(BiasError::WindowMismatch);
    }
    Ok(match (restricted.cd, extended.cd) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    })
}

/// Citer status in one network.
fn slot(b: Option<Bucket>) -> usize {
    match b {
        None => 0,
        Some(Bucket::Focal) => 1,
        Some(Bucket::Combined) => 2,
        Some(Bucket::Predecessor) => 3,
    }
}

/// Joint bucket status of every in-window citer across the two sources,
/// indexed `[extended status][restricted status]` with status
/// `{absent, F, C, P}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ShiftTally {
    pub family_id: String,
    pub matrix: [[u64; 4]; 4],
}

impl ShiftTally {
    pub fn get(&self, extended: Option<Bucket>, restricted: Option<Bucket>) -> u64 {
        self.matrix[slot(extended)][slot(restricted)]
    }

    pub fn ff(&self) -> u64 {
        self.get(Some(Bucket::Focal), Some(Bucket::Focal))
    }
    pub fn cc(&self) -> u64 {
        self.get(Some(Bucket::Combined), Some(Bucket::Combined))
    }
    pub fn pp(&self) -> u64 {
        self.get(Some(Bucket::Predecessor), Some(Bucket::Predecessor))
    }
    /// Combined in the extended network, focal-only in the restricted one.
    pub fn c_to_f(&self) -> u64 {
        self.get(Some(Bucket::Combined), Some(Bucket::Focal))
    }
    pub fn c_to_p(&self) -> u64 {
        self.get(Some(Bucket::Combined), Some(Bucket::Predecessor))
    }
    /// Extended F-citers missing from the restricted view entirely.
    pub fn omitted_f(&self) -> u64 {
        self.get(Some(Bucket::Focal), None)
    }
    pub fn omitted_c(&self) -> u64 {
        self.get(Some(Bucket::Combined), None)
    }
    pub fn omitted_p(&self) -> u64 {
        self.get(Some(Bucket::Predecessor), None)
    }

    /// Transitions impossible when restricted links are a subset of the
    /// extended ones (F→C, F→P, P→F, P→C and restricted-only citers).
    pub fn anomalies(&self) -> u64 {
        let named = self.ff()
            + self.cc()
            + self.pp()
            + self.c_to_f()
            + self.c_to_p()
            + self.omitted_f()
            + self.omitted_c()
            + self.omitted_p();
        self.matrix.iter().flatten().sum::<u64>() - named
    }

    pub fn restricted_counts(&self) -> Counts {
        let col = |j: usize| (0..4).map(|i| self.matrix[i][j]).sum();
        Counts::new(col(1), col(2), col(3))
    }

    pub fn extended_counts(&self) -> Counts {
        let row = |i: usize| self.matrix[i].iter().sum();
        Counts::new(row(1), row(2), row(3))
    }
}

/// Joins the per-citer classification of `focal` across both networks.
/// A focal family missing from the restricted network has no restricted
/// citers at all.
pub fn classify_shifts(
    restricted: &CitationNetwork,
    extended: &CitationNetwork,
    focal: &str,
    window: &Window,
) -> Result<ShiftTally, BiasError> {
    let ext_node = extended
        .node(focal)
        .ok_or_else(|| CdError::NotInNetwork(focal.to_string()))?;
    let ext = classify_citers(extended, ext_node, window)?;
    let res = match restricted.node(focal) {
        Some(n) => classify_citers(restricted, n, window)?,
        None => Vec::new(),
    };

    // Node ids follow family-id order in both networks, so both lists are
    // sorted by family id and can be merged.
    let mut tally = ShiftTally {
        family_id: focal.to_string(),
        ..Default::default()
    };
    let (mut i, mut j) = (0, 0);
    while i < ext.len() || j < res.len() {
        let ord = match (ext.get(i), res.get(j)) {
            (Some(a), Some(b)) => extended.family_id(a.0).cmp(restricted.family_id(b.0)),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                tally.matrix[slot(Some(ext[i].1))][0] += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                tally.matrix[0][slot(Some(res[j].1))] += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                tally.matrix[slot(Some(ext[i].1))][slot(Some(res[j].1))] += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(tally)
}

/// [`classify_shifts`] over a focal set, in parallel, in focal order.
pub fn compute_shifts(
    restricted: &CitationNetwork,
    extended: &CitationNetwork,
    focal: &FocalSet,
    window: &Window,
) -> (Vec<ShiftTally>, Vec<Issue>) {
    let results: Vec<_> = focal
        .family_ids
        .par_iter()
        .map(|fid| classify_shifts(restricted, extended, fid, window))
        .collect();
    let mut tallies = Vec::with_capacity(results.len());
    let mut issues = Vec::new();
    for r in results {
        match r {
            Ok(t) => tallies.push(t),
            Err(e) => issues.push(Issue::new(0, "shift_failed", e.to_string())),
        }
    }
    (tallies, issues)
}

/// Effect of moving `delta` combined citers to focal-only vs to
/// predecessor-only, holding everything else fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplierAudit {
    pub base_cd: f64,
    pub cd_c_to_f: f64,
    pub cd_c_to_p: f64,
    pub delta_cd_c_to_f: f64,
    pub delta_cd_c_to_p: f64,
    pub numerator_change_c_to_f: i64,
    pub numerator_change_c_to_p: i64,
    pub denominator: u64,
}

pub fn multiplier_check(base: Counts, delta: u64) -> Result<MultiplierAudit, BiasError> {
    if delta > base.n_c {
        return Err(BiasError::InfeasibleShift { n_c: base.n_c, delta });
    }
    let base_cd = base.cd().ok_or(BiasError::ZeroDenominator)?;
    let to_f = Counts::new(base.n_f + delta, base.n_c - delta, base.n_p);
    let to_p = Counts::new(base.n_f, base.n_c - delta, base.n_p + delta);
    let numerator = |c: &Counts| c.n_f as i64 - c.n_c as i64;
    let cd_c_to_f = to_f.cd().ok_or(BiasError::ZeroDenominator)?;
    let cd_c_to_p = to_p.cd().ok_or(BiasError::ZeroDenominator)?;
    debug_assert_eq!(to_f.total(), base.total());
    debug_assert_eq!(to_p.total(), base.total());
    Ok(MultiplierAudit {
        base_cd,
        cd_c_to_f,
        cd_c_to_p,
        delta_cd_c_to_f: cd_c_to_f - base_cd,
        delta_cd_c_to_p: cd_c_to_p - base_cd,
        numerator_change_c_to_f: numerator(&to_f) - numerator(&base),
        numerator_change_c_to_p: numerator(&to_p) - numerator(&base),
        denominator: base.total(),
    })
}

/// A focal family with CD defined in both sources.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedCd {
    pub family_id: String,
    pub cd1: f64,
    pub cd0: f64,
}

impl PairedCd {
    pub fn delta(&self) -> f64 {
        self.cd1 - self.cd0
    }
}

/// Paired sample plus the composition diagnostics of what fell out.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Pairing {
    pub paired: Vec<PairedCd>,
    pub only_restricted: usize,
    pub only_extended: usize,
    pub neither: usize,
    pub missing_restricted_record: usize,
}

/// Joins restricted and extended records by family id, keeping families
/// whose CD is defined in both.
pub fn pair_cd_tables(restricted: &[CdRecord], extended: &[CdRecord]) -> Pairing {
    let res: BTreeMap<&str, &CdRecord> = restricted.iter().map(|r| (r.family_id.as_str(), r)).collect();
    let mut out = Pairing::default();
    for e in extended {
        let Some(r) = res.get(e.family_id.as_str()) else {
            out.missing_restricted_record += 1;
            continue;
        };
        match (r.cd, e.cd) {
            (Some(cd1), Some(cd0)) => out.paired.push(PairedCd {
                family_id: e.family_id.clone(),
                cd1,
                cd0,
            }),
            (Some(_), None) => out.only_restricted += 1,
            (None, Some(_)) => out.only_extended += 1,
            (None, None) => out.neither += 1,
        }
    }
    out.paired.sort_by(|a, b| a.family_id.cmp(&b.family_id));
    out
}

/// How a multi-country family enters country means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// One unit-weight row per family-country pair.
    #[default]
    FamilyCountry,
    /// Each family carries total weight one, split evenly over its countries.
    Fractional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryBias {
    pub country: String,
    /// Family-country rows (identical for both sources under pairing).
    pub n: usize,
    pub m_c1: f64,
    pub m_c0: f64,
    pub bias: f64,
    pub rel_bias: f64,
}

pub type CountryMap = BTreeMap<String, BTreeSet<String>>;

pub fn family_countries(families: &FamilyTable) -> CountryMap {
    families
        .families
        .values()
        .map(|f| (f.family_id.clone(), f.countries.clone()))
        .collect()
}

struct Means {
    n: usize,
    m1: f64,
    m0: f64,
}

fn country_means(paired: &[PairedCd], countries: &CountryMap, country: &str, weighting: Weighting) -> Option<Means> {
    let (mut s1, mut s0, mut sw) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut n = 0;
    for p in paired {
        let Some(cs) = countries.get(&p.family_id) else { continue };
        if !cs.contains(country) {
            continue;
        }
        let w = match weighting {
            Weighting::FamilyCountry => 1.0,
            Weighting::Fractional => 1.0 / cs.len() as f64,
        };
        s1.add(w * p.cd1);
        s0.add(w * p.cd0);
        sw.add(w);
        n += 1;
    }
    (n > 0).then(|| Means {
        n,
        m1: s1.value() / sw.value(),
        m0: s0.value() / sw.value(),
    })
}

/// Country-level bias and bias relative to the US reference.
pub fn country_bias(
    paired: &[PairedCd],
    countries: &CountryMap,
    country: &str,
    weighting: Weighting,
) -> Result<CountryBias, BiasError> {
    let c = country_means(paired, countries, country, weighting)
        .ok_or_else(|| BiasError::NoRows(country.to_string()))?;
    let us = country_means(paired, countries, REFERENCE_COUNTRY, weighting)
        .ok_or_else(|| BiasError::NoRows(REFERENCE_COUNTRY.to_string()))?;
    let bias = c.m1 - c.m0;
    let bias_us = us.m1 - us.m0;
    Ok(CountryBias {
        country: country.to_string(),
        n: c.n,
        m_c1: c.m1,
        m_c0: c.m0,
        bias,
        rel_bias: if country == REFERENCE_COUNTRY { 0.0 } else { bias - bias_us },
    })
}

/// [`country_bias`] for every country present in the paired sample,
/// sorted by country code.
pub fn all_country_biases(
    paired: &[PairedCd],
    countries: &CountryMap,
    weighting: Weighting,
) -> (Vec<CountryBias>, Vec<Issue>) {
    let present: BTreeSet<&String> = paired
        .iter()
        .filter_map(|p| countries.get(&p.family_id))
        .flatten()
        .collect();
    let mut out = Vec::new();
    let mut issues = Vec::new();
    for c in present {
        match country_bias(paired, countries, c, weighting) {
            Ok(b) => out.push(b),
            Err(e) => issues.push(Issue::new(0, "country_bias", e.to_string())),
        }
    }
    (out, issues)
}

/// Mean ΔCD split by the sign of the extended CD. Reported, not asserted:
/// the negative region mixes offsetting omission effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionDiagnostics {
    pub n_positive: usize,
    pub mean_delta_positive: Option<f64>,
    pub n_zero: usize,
    pub mean_delta_zero: Option<f64>,
    pub n_negative: usize,
    pub mean_delta_negative: Option<f64>,
}

pub fn region_diagnostics(paired: &[PairedCd]) -> RegionDiagnostics {
    let pick = |f: &dyn Fn(f64) -> bool| {
        let xs: Vec<f64> = paired.iter().filter(|p| f(p.cd0)).map(PairedCd::delta).collect();
        (xs.len(), crate::numeric::mean(xs))
    };
    let (n_positive, mean_delta_positive) = pick(&|x| x > 0.0);
    let (n_zero, mean_delta_zero) = pick(&|x| x == 0.0);
    let (n_negative, mean_delta_negative) = pick(&|x| x < 0.0);
    RegionDiagnostics {
        n_positive,
        mean_delta_positive,
        n_zero,
        mean_delta_zero,
        n_negative,
        mean_delta_negative,
    }
}

fn write_text(path: &Path, body: &str) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| crate::Error::io(path, e))?);
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| crate::Error::io(path, e))
}

pub fn render_bias_table(rows: &[CountryBias]) -> String {
    let mut out = String::from("country\tn\tm_c1\tm_c0\tbias\trel_bias\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.country,
            r.n,
            fmt6(r.m_c1),
            fmt6(r.m_c0),
            fmt6(r.bias),
            fmt6(r.rel_bias)
        ));
    }
    out
}

pub fn write_bias_table(path: impl AsRef<Path>, rows: &[CountryBias]) -> crate::Result<()> {
    write_text(path.as_ref(), &render_bias_table(rows))
}

pub fn render_shifts_table(tallies: &[ShiftTally]) -> String {
    let mut out = String::from("family_id\tf_to_f\tc_to_c\tp_to_p\tc_to_f\tc_to_p\tomitted_f\tomitted_c\tomitted_p\tanomalous\n");
    for t in tallies {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            t.family_id,
            t.ff(),
            t.cc(),
            t.pp(),
            t.c_to_f(),
            t.c_to_p(),
            t.omitted_f(),
            t.omitted_c(),
            t.omitted_p(),
            t.anomalies()
        ));
    }
    out
}

pub fn write_shifts_table(path: impl AsRef<Path>, tallies: &[ShiftTally]) -> crate::Result<()> {
    write_text(path.as_ref(), &render_shifts_table(tallies))
}
