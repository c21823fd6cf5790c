//! Forward-window citer classification and the CD index.
//!
//! For a focal family `f` with predecessor set `P` (the families `f` cites
//! in the same network), every citing family `g ≠ f` whose anchor year lies
//! in the window falls in exactly one bucket:
//!
//! - focal-only (F): cites `f` and nothing in `P`;
//! - combined (C): cites `f` and at least one member of `P`;
//! - predecessor-only (P): cites some member of `P` but not `f`.
//!
//! `CD = (n_f − n_c) / (n_f + n_c + n_p)`, undefined when nobody cites.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Anchor, CitationNetwork, FocalSet, Issue, NodeId, Source};
use crate::numeric::fmt6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CdError {
    #[error("family `{0}` is not a node of the network")]
    NotInNetwork(String),
    #[error("family `{0}` has no {1} year")]
    NoAnchorYear(String, Anchor),
    #[error("citation counts must be non-negative, got ({0}, {1}, {2})")]
    NegativeCount(i64, i64, i64),
    #[error("forward window must be at least one year")]
    EmptyWindow,
    #[error("malformed cd table: {0}")]
    Parse(String),
}

/// Forward citation window relative to the focal anchor year `t0`.
///
/// Citers with anchor year in `[t0, t0 + years]` are counted; with
/// `strict_start` the focal year itself is excluded (`(t0, t0 + years]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub anchor: Anchor,
    pub years: u32,
    pub strict_start: bool,
}

impl Window {
    pub fn new(anchor: Anchor, years: u32) -> Self {
        Window {
            anchor,
            years,
            strict_start: false,
        }
    }

    #[inline]
    pub fn contains(&self, t0: i32, t: i32) -> bool {
        let lo_ok = if self.strict_start { t > t0 } else { t >= t0 };
        lo_ok && t <= t0 + self.years as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Bucket {
    Focal,
    Combined,
    Predecessor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub n_f: u64,
    pub n_c: u64,
    pub n_p: u64,
}

impl Counts {
    pub fn new(n_f: u64, n_c: u64, n_p: u64) -> Self {
        Counts { n_f, n_c, n_p }
    }

    pub fn total(&self) -> u64 {
        self.n_f + self.n_c + self.n_p
    }

    /// CD value, `None` when the denominator is zero.
    pub fn cd(&self) -> Option<f64> {
        let den = self.total();
        (den > 0).then(|| (self.n_f as f64 - self.n_c as f64) / den as f64)
    }

    fn bump(&mut self, bucket: Bucket) {
        match bucket {
            Bucket::Focal => self.n_f += 1,
            Bucket::Combined => self.n_c += 1,
            Bucket::Predecessor => self.n_p += 1,
        }
    }
}

/// CD index from raw counts. `Ok(None)` means undefined (no citers).
pub fn cd_value(n_f: i64, n_c: i64, n_p: i64) -> Result<Option<f64>, CdError> {
    if n_f < 0 || n_c < 0 || n_p < 0 {
        return Err(CdError::NegativeCount(n_f, n_c, n_p));
    }
    Ok(Counts::new(n_f as u64, n_c as u64, n_p as u64).cd())
}

fn focal_node(network: &CitationNetwork, focal: &str) -> Result<NodeId, CdError> {
    network
        .node(focal)
        .ok_or_else(|| CdError::NotInNetwork(focal.to_string()))
}

/// Families the focal family cites in this network.
pub fn predecessors<'a>(network: &'a CitationNetwork, focal: &str) -> Result<&'a [NodeId], CdError> {
    Ok(network.cites(focal_node(network, focal)?))
}

const CITES_FOCAL: u8 = 1;
const CITES_PRED: u8 = 2;

/// Every in-window citer of the focal family or its predecessors, with its
/// bucket, sorted by node.
pub fn classify_citers(
    network: &CitationNetwork,
    focal: NodeId,
    window: &Window,
) -> Result<Vec<(NodeId, Bucket)>, CdError> {
    if window.years == 0 {
        return Err(CdError::EmptyWindow);
    }
    let t0 = network
        .anchor_year(focal, window.anchor)
        .ok_or_else(|| CdError::NoAnchorYear(network.family_id(focal).to_string(), window.anchor))?;

    let preds = network.cites(focal);
    let mut marks: Vec<(NodeId, u8)> = network
        .cited_by(focal)
        .iter()
        .map(|&g| (g, CITES_FOCAL))
        .collect();
    for &p in preds {
        marks.extend(network.cited_by(p).iter().map(|&g| (g, CITES_PRED)));
    }
    marks.sort_unstable();

    let mut out = Vec::new();
    let mut i = 0;
    while i < marks.len() {
        let g = marks[i].0;
        let mut flags = 0u8;
        while i < marks.len() && marks[i].0 == g {
            flags |= marks[i].1;
            i += 1;
        }
        if g == focal {
            continue;
        }
        let in_window = network
            .anchor_year(g, window.anchor)
            .is_some_and(|t| window.contains(t0, t));
        if !in_window {
            continue;
        }
        let bucket = match flags {
            f if f == CITES_FOCAL | CITES_PRED => Bucket::Combined,
            CITES_FOCAL => Bucket::Focal,
            _ => Bucket::Predecessor,
        };
        out.push((g, bucket));
    }
    Ok(out)
}

/// `(n_f, n_c, n_p)` for one focal family.
pub fn count_components(network: &CitationNetwork, focal: &str, window: &Window) -> Result<Counts, CdError> {
    let node = focal_node(network, focal)?;
    let mut counts = Counts::default();
    for (_, bucket) in classify_citers(network, node, window)? {
        counts.bump(bucket);
    }
    Ok(counts)
}

/// Per (family, source) CD measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdRecord {
    pub family_id: String,
    pub source: Source,
    pub n_f: u64,
    pub n_c: u64,
    pub n_p: u64,
    /// Size of the predecessor set in this source (backward citations).
    pub n_backward: u64,
    pub cd: Option<f64>,
    pub window_years: u32,
    pub anchor: Anchor,
}

impl CdRecord {
    pub fn counts(&self) -> Counts {
        Counts::new(self.n_f, self.n_c, self.n_p)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CdTable {
    /// Sorted by family id.
    pub records: Vec<CdRecord>,
    pub issues: Vec<Issue>,
}

/// CD records for every focal family, computed in parallel on the current
/// rayon pool. Output order follows the (sorted) focal set regardless of
/// the number of workers.
pub fn compute_all(network: &CitationNetwork, focal: &FocalSet, window: &Window) -> CdTable {
    let results: Vec<Result<CdRecord, CdError>> = focal
        .family_ids
        .par_iter()
        .map(|fid| {
            let node = focal_node(network, fid)?;
            let counts = count_components(network, fid, window)?;
            Ok(CdRecord {
                family_id: fid.clone(),
                source: network.source(),
                n_f: counts.n_f,
                n_c: counts.n_c,
                n_p: counts.n_p,
                n_backward: network.cites(node).len() as u64,
                cd: counts.cd(),
                window_years: window.years,
                anchor: window.anchor,
            })
        })
        .collect();
    let mut table = CdTable::default();
    for r in results {
        match r {
            Ok(rec) => table.records.push(rec),
            Err(e) => table
                .issues
                .push(Issue::new(0, "cd_failed", format!("{}: {e}", network.source()))),
        }
    }
    table
}

const CD_HEADER: &str = "family_id\tsource\tanchor\twindow\tn_f\tn_c\tn_p\tcd";

pub fn render_cd_table<'a>(records: impl IntoIterator<Item = &'a CdRecord>) -> String {
    let mut out = String::from(CD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.family_id,
            r.source.code(),
            r.anchor,
            r.window_years,
            r.n_f,
            r.n_c,
            r.n_p,
            r.cd.map(fmt6).unwrap_or_default()
        ));
    }
    out
}

pub fn write_cd_table<'a>(path: impl AsRef<Path>, records: impl IntoIterator<Item = &'a CdRecord>) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| crate::Error::io(path, e))?);
    w.write_all(render_cd_table(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| crate::Error::io(path, e))
}

/// Reads a `cd.tsv` back. The backward-citation count is not part of the
/// file and is left at zero.
pub fn read_cd_table(path: impl AsRef<Path>) -> crate::Result<Vec<CdRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| crate::Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| crate::Error::io(path, e))?
        .unwrap_or_default();
    if header.trim_end() != CD_HEADER {
        return Err(CdError::Parse(format!("unexpected header `{header}`")).into());
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| crate::Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(CdError::Parse(format!("bad row `{line}`")).into());
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| CdError::Parse(format!("bad count `{s}`")));
        let source = match f[1] {
            "1" => Source::Restricted,
            "0" => Source::Extended,
            s => return Err(CdError::Parse(format!("bad source `{s}`")).into()),
        };
        let anchor = match f[2] {
            "publication" => Anchor::Publication,
            "filing" => Anchor::Filing,
            s => return Err(CdError::Parse(format!("bad anchor `{s}`")).into()),
        };
        let cd = if f[7].is_empty() {
            None
        } else {
            Some(f[7].parse::<f64>().map_err(|_| CdError::Parse(format!("bad cd `{}`", f[7])))?)
        };
        out.push(CdRecord {
            family_id: f[0].to_string(),
            source,
            anchor,
            window_years: num(f[3])? as u32,
            n_f: num(f[4])?,
            n_c: num(f[5])?,
            n_p: num(f[6])?,
            n_backward: 0,
            cd,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FocalCriteria, NodeSpec};

    fn e(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    fn node(id: &str, year: i32) -> NodeSpec {
        NodeSpec {
            family_id: id.into(),
            pub_year: year,
            filing_year: Some(year - 1),
        }
    }

    /// F0 (2000) cites P1, P2; A→F0, B→{F0,P1}, C→P2, D→{F0,P2}.
    fn toy(extra: &[(String, String)], drop_b_p1: bool) -> CitationNetwork {
        let nodes = vec![
            node("F0", 2000),
            node("P1", 1995),
            node("P2", 1996),
            node("A", 2002),
            node("B", 2003),
            node("C", 2004),
            node("D", 2005),
            node("E", 2006),
        ];
        let mut edges = vec![
            e("F0", "P1"),
            e("F0", "P2"),
            e("A", "F0"),
            e("B", "F0"),
            e("C", "P2"),
            e("D", "F0"),
            e("D", "P2"),
        ];
        if !drop_b_p1 {
            edges.push(e("B", "P1"));
        }
        edges.extend_from_slice(extra);
        CitationNetwork::from_family_edges(Source::Extended, nodes, &edges).unwrap()
    }

    fn w5() -> Window {
        Window::new(Anchor::Publication, 5)
    }

    #[test]
    fn predecessors_of_toy_focal() {
        let net = toy(&[], false);
        let ids: Vec<&str> = predecessors(&net, "F0").unwrap().iter().map(|&n| net.family_id(n)).collect();
        assert_eq!(ids, vec!["P1", "P2"]);
        assert_eq!(predecessors(&net, "A").unwrap(), &[net.node("F0").unwrap()]);
        assert_eq!(predecessors(&net, "nope").unwrap_err(), CdError::NotInNetwork("nope".into()));
    }

    #[test]
    fn predecessors_after_edge_removal() {
        let nodes = vec![node("F0", 2000), node("P1", 1995), node("P2", 1996)];
        let net = CitationNetwork::from_family_edges(Source::Restricted, nodes, &[e("F0", "P2")]).unwrap();
        let ids: Vec<&str> = predecessors(&net, "F0").unwrap().iter().map(|&n| net.family_id(n)).collect();
        assert_eq!(ids, vec!["P2"]);
    }

    #[test]
    fn worked_example_counts() {
        assert_eq!(count_components(&toy(&[], false), "F0", &w5()).unwrap(), Counts::new(1, 2, 1));
    }

    #[test]
    fn missing_predecessor_link_turns_combined_into_focal_only() {
        assert_eq!(count_components(&toy(&[], true), "F0", &w5()).unwrap(), Counts::new(2, 1, 1));
    }

    #[test]
    fn window_end_is_inclusive_and_beyond_is_excluded() {
        // E is 2006 = 2000 + 5 + 1.
        let net = toy(&[e("E", "F0")], false);
        assert_eq!(count_components(&net, "F0", &w5()).unwrap(), Counts::new(1, 2, 1));
        let net = toy(&[e("E", "F0")], false);
        let w6 = Window::new(Anchor::Publication, 6);
        assert_eq!(count_components(&net, "F0", &w6).unwrap(), Counts::new(2, 2, 1));
    }

    #[test]
    fn strict_start_excludes_same_year_citers() {
        let nodes = vec![node("F", 2000), node("G", 2000)];
        let net = CitationNetwork::from_family_edges(Source::Extended, nodes, &[e("G", "F")]).unwrap();
        let mut w = w5();
        assert_eq!(count_components(&net, "F", &w).unwrap().n_f, 1);
        w.strict_start = true;
        assert_eq!(count_components(&net, "F", &w).unwrap().n_f, 0);
    }

    #[test]
    fn cd_value_examples() {
        assert_eq!(cd_value(1, 2, 1).unwrap(), Some(-0.25));
        for k in 1..50 {
            assert_eq!(cd_value(k, 0, 0).unwrap(), Some(1.0));
        }
        assert_eq!(cd_value(0, 0, 0).unwrap(), None);
        assert!(matches!(cd_value(-1, 0, 0), Err(CdError::NegativeCount(..))));
    }

    #[test]
    fn compute_all_matches_single_family_composition() {
        let net = toy(&[], false);
        let focal = FocalSet {
            family_ids: vec!["F0".into()],
            criteria: FocalCriteria::default(),
        };
        let t = compute_all(&net, &focal, &w5());
        assert_eq!(t.records.len(), 1);
        let r = &t.records[0];
        assert_eq!(r.counts(), count_components(&net, "F0", &w5()).unwrap());
        assert_eq!(r.cd, Some(-0.25));
        assert_eq!(r.n_backward, 2);
    }

    #[test]
    fn compute_all_reports_missing_focal_without_affecting_others() {
        let net = toy(&[], false);
        let focal = FocalSet {
            family_ids: vec!["F0".into(), "ZZ".into()],
            criteria: FocalCriteria::default(),
        };
        let t = compute_all(&net, &focal, &w5());
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.issues.len(), 1);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let net = toy(&[e("E", "P1")], false);
        let focal = FocalSet {
            family_ids: ["A", "B", "C", "D", "E", "F0", "P1", "P2"].map(String::from).to_vec(),
            criteria: FocalCriteria::default(),
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| compute_all(&net, &focal, &w5()));
        let b = four.install(|| compute_all(&net, &focal, &w5()));
        assert_eq!(render_cd_table(&a.records), render_cd_table(&b.records));
    }

    #[test]
    fn cd_table_round_trip_and_rendering() {
        let net = toy(&[], false);
        let focal = FocalSet {
            family_ids: vec!["F0".into(), "E".into()],
            criteria: FocalCriteria::default(),
        };
        let t = compute_all(&net, &focal, &w5());
        let text = render_cd_table(&t.records);
        assert!(text.contains("F0\t0\tpublication\t5\t1\t2\t1\t-0.250000\n"));
        // E has no citers: empty cd cell.
        assert!(text.contains("E\t0\tpublication\t5\t0\t0\t0\t\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cd.tsv");
        write_cd_table(&p, &t.records).unwrap();
        let back = read_cd_table(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].cd, Some(-0.25));
        assert_eq!(back[1].cd, None);
    }
}
