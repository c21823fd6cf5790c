use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use super::{normalize_country, is_known_country, CorpusError, FamilyRecord, Issue, PatentRow, Source};

const PATENT_COLUMNS: [&str; 9] = [
    "patent_id",
    "family_id",
    "office",
    "pub_year",
    "filing_year",
    "granted",
    "is_us_utility",
    "countries",
    "tech_field",
];

const CITATION_COLUMNS: [&str; 2] = ["citing_patent_id", "cited_patent_id"];

/// Parsed `patents.tsv`.
#[derive(Debug, Clone, Default)]
pub struct PatentTable {
    pub rows: Vec<PatentRow>,
    /// Rows whose `family_id` is empty. They are reported in `issues` and
    /// kept aside so the caller can turn them into singleton families.
    pub unassigned: Vec<PatentRow>,
    pub issues: Vec<Issue>,
    pub warnings: Vec<String>,
}

impl PatentTable {
    /// All rows, with unassigned patents given a singleton family id.
    pub fn rows_with_singletons(&self) -> Vec<PatentRow> {
        let mut rows = self.rows.clone();
        rows.extend(self.unassigned.iter().map(|r| PatentRow {
            family_id: format!("{}{}", super::SINGLETON_PREFIX, r.patent_id),
            ..r.clone()
        }));
        rows
    }
}

/// One patent-level citation as read from a `citations.tsv` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEdge {
    pub citing: String,
    pub cited: String,
    pub row_number: usize,
}

impl RawEdge {
    pub fn is_self_reference(&self) -> bool {
        self.citing == self.cited
    }
}

#[derive(Debug, Clone)]
pub struct CitationTable {
    pub source: Source,
    pub edges: Vec<RawEdge>,
    pub issues: Vec<Issue>,
}

fn tsv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader)
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_patents(path: impl AsRef<Path>) -> Result<PatentTable, CorpusError> {
    let path = path.as_ref();
    load_patents_from_reader(open(path)?, &path.display().to_string())
}

pub fn load_patents_from_reader<R: Read>(reader: R, name: &str) -> Result<PatentTable, CorpusError> {
    let mut rdr = tsv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| CorpusError::Csv {
            path: name.to_string(),
            source,
        })?
        .clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.trim().to_string(), i);
    }
    let mut cols = [0usize; 9];
    for (slot, col) in cols.iter_mut().zip(PATENT_COLUMNS) {
        *slot = *index.get(col).ok_or_else(|| CorpusError::MissingColumn {
            path: name.to_string(),
            column: col.to_string(),
        })?;
    }
    let mut table = PatentTable::default();
    for h in headers.iter() {
        if !PATENT_COLUMNS.contains(&h.trim()) {
            let msg = format!("{name}: ignoring unknown column `{}`", h.trim());
            warn!("{msg}");
            table.warnings.push(msg);
        }
    }

    for (i, record) in rdr.records().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                table.issues.push(Issue::new(line, "unreadable_row", e.to_string()));
                continue;
            }
        };
        if record.len() < headers.len() {
            table.issues.push(Issue::new(
                line,
                "short_row",
                format!("{} fields, expected {}", record.len(), headers.len()),
            ));
            continue;
        }
        let field = |k: usize| record.get(cols[k]).unwrap_or("").trim();

        match parse_patent(line, |k| field(k), &mut table.issues) {
            Some(row) if row.family_id.is_empty() => {
                table.issues.push(Issue::new(
                    line,
                    "empty_family_id",
                    format!("patent {} has no family", row.patent_id),
                ));
                table.unassigned.push(row);
            }
            Some(row) => table.rows.push(row),
            None => {}
        }
    }
    Ok(table)
}

fn parse_patent<'a>(
    line: usize,
    field: impl Fn(usize) -> &'a str,
    issues: &mut Vec<Issue>,
) -> Option<PatentRow> {
    let patent_id = field(0);
    if patent_id.is_empty() {
        issues.push(Issue::new(line, "empty_patent_id", ""));
        return None;
    }
    let office = field(2);
    if office.is_empty() {
        issues.push(Issue::new(line, "empty_office", patent_id));
        return None;
    }
    let year = |k: usize, code: &str, issues: &mut Vec<Issue>| -> Result<Option<i32>, ()> {
        let raw = field(k);
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<i32>().map(Some).map_err(|_| {
            issues.push(Issue::new(line, code, format!("{patent_id}: `{raw}`")));
        })
    };
    let flag = |k: usize, code: &str, issues: &mut Vec<Issue>| -> Result<bool, ()> {
        match field(k) {
            "1" => Ok(true),
            "0" | "" => Ok(false),
            raw => {
                issues.push(Issue::new(line, code, format!("{patent_id}: `{raw}`")));
                Err(())
            }
        }
    };
    let pub_year = year(3, "bad_pub_year", issues).ok()?;
    let filing_year = year(4, "bad_filing_year", issues).ok()?;
    let granted = flag(5, "bad_granted", issues).ok()?;
    let is_us_utility = flag(6, "bad_is_us_utility", issues).ok()?;
    let mut countries = Vec::new();
    for raw in field(7).split(';') {
        let code = normalize_country(raw);
        if code.is_empty() {
            continue;
        }
        if !is_known_country(&code) {
            issues.push(Issue::new(line, "unknown_country", format!("{patent_id}: `{code}`")));
        }
        countries.push(code);
    }
    let tech = field(8);
    Some(PatentRow {
        patent_id: patent_id.to_string(),
        family_id: field(1).to_string(),
        office: office.to_ascii_uppercase(),
        pub_year,
        filing_year,
        granted,
        is_us_utility,
        countries,
        tech_field: (!tech.is_empty()).then(|| tech.to_string()),
    })
}

pub fn load_citations(path: impl AsRef<Path>, source: Source) -> Result<CitationTable, CorpusError> {
    let path = path.as_ref();
    load_citations_from_reader(open(path)?, &path.display().to_string(), source)
}

pub fn load_citations_from_reader<R: Read>(
    reader: R,
    name: &str,
    source: Source,
) -> Result<CitationTable, CorpusError> {
    let mut rdr = tsv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| CorpusError::Csv {
            path: name.to_string(),
            source,
        })?
        .clone();
    let find = |col: &str| headers.iter().position(|h| h.trim() == col);
    let (citing_col, cited_col) = match (find(CITATION_COLUMNS[0]), find(CITATION_COLUMNS[1])) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CorpusError::UnknownSchema {
                path: name.to_string(),
                detail: format!(
                    "expected columns `{}` and `{}`, found `{}`",
                    CITATION_COLUMNS[0],
                    CITATION_COLUMNS[1],
                    headers.iter().collect::<Vec<_>>().join(" ")
                ),
            })
        }
    };
    let mut table = CitationTable {
        source,
        edges: Vec::new(),
        issues: Vec::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                table.issues.push(Issue::new(line, "unreadable_row", e.to_string()));
                continue;
            }
        };
        let citing = record.get(citing_col).unwrap_or("").trim();
        let cited = record.get(cited_col).unwrap_or("").trim();
        if citing.is_empty() || cited.is_empty() {
            table.issues.push(Issue::new(line, "empty_patent_id", ""));
            continue;
        }
        let edge = RawEdge {
            citing: citing.to_string(),
            cited: cited.to_string(),
            row_number: line,
        };
        if edge.is_self_reference() {
            table.issues.push(Issue::new(line, "self_reference", citing));
        }
        table.edges.push(edge);
    }
    Ok(table)
}

fn create(path: &Path) -> crate::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| crate::Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> crate::Result<()> {
    w.flush().map_err(|e| crate::Error::io(path, e))
}

/// Writes the `row_number issue detail` error report.
pub fn write_error_report(path: impl AsRef<Path>, issues: &[Issue]) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from("row_number\tissue\tdetail\n");
    for issue in issues {
        body.push_str(&format!(
            "{}\t{}\t{}\n",
            issue.row_number,
            issue.issue,
            issue.detail.replace(['\t', '\n'], " ")
        ));
    }
    w.write_all(body.as_bytes()).map_err(|e| crate::Error::io(path, e))?;
    finish(path, w)
}

pub fn write_patents(path: impl AsRef<Path>, rows: &[PatentRow]) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = PATENT_COLUMNS.join("\t");
    body.push('\n');
    let year = |y: Option<i32>| y.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.patent_id,
            r.family_id,
            r.office,
            year(r.pub_year),
            year(r.filing_year),
            u8::from(r.granted),
            u8::from(r.is_us_utility),
            r.countries.join(";"),
            r.tech_field.as_deref().unwrap_or("")
        ));
    }
    w.write_all(body.as_bytes()).map_err(|e| crate::Error::io(path, e))?;
    finish(path, w)
}

pub fn write_citations(path: impl AsRef<Path>, edges: &[(String, String)]) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = CITATION_COLUMNS.join("\t");
    body.push('\n');
    for (citing, cited) in edges {
        body.push_str(citing);
        body.push('\t');
        body.push_str(cited);
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(|e| crate::Error::io(path, e))?;
    finish(path, w)
}

/// Family-level summary written by `disruptr ingest`.
pub fn write_families<'a>(
    path: impl AsRef<Path>,
    families: impl IntoIterator<Item = &'a FamilyRecord>,
) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from(
        "family_id\tearliest_pub_year\tearliest_filing_year\toffices\tcountries\ttech_fields\thas_us_utility\tgranted_anywhere\thas_epo_filing\thas_jpo_filing\tnum_inventors\tcountry_missing\tsingleton\n",
    );
    let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(";");
    for f in families {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            f.family_id,
            f.earliest_pub_year,
            f.earliest_filing_year.map(|y| y.to_string()).unwrap_or_default(),
            join(&f.offices),
            join(&f.countries),
            join(&f.tech_fields),
            u8::from(f.has_us_utility),
            u8::from(f.granted_anywhere),
            u8::from(f.has_epo_filing),
            u8::from(f.has_jpo_filing),
            f.num_inventors,
            u8::from(f.country_missing),
            u8::from(f.singleton),
        ));
    }
    w.write_all(body.as_bytes()).map_err(|e| crate::Error::io(path, e))?;
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "patent_id\tfamily_id\toffice\tpub_year\tfiling_year\tgranted\tis_us_utility\tcountries\ttech_field\n";

    fn load(body: &str) -> PatentTable {
        load_patents_from_reader(body.as_bytes(), "patents.tsv").unwrap()
    }

    #[test]
    fn well_formed_rows() {
        let t = load(&format!(
            "{HEADER}p1\tA\tUS\t2001\t2000\t1\t1\tUS;de\t1\n\
             p2\tA\tEP\t1999\t1998\t1\t0\t\t1\n\
             p3\tB\tJP\t2003\t2002\t0\t0\tJP\t2\n"
        ));
        assert_eq!(t.rows.len(), 3);
        assert!(t.issues.is_empty());
        assert_eq!(t.rows[0].countries, vec!["US", "DE"]);
        assert!(t.rows[1].countries.is_empty());
        assert!(!t.rows[2].granted);
    }

    #[test]
    fn empty_family_id_is_an_error_record() {
        let t = load(&format!(
            "{HEADER}p1\tA\tUS\t2001\t2000\t1\t1\tUS\t1\n\
             p2\t\tUS\t2001\t2000\t1\t1\tUS\t1\n\
             p3\tB\tJP\t2003\t2002\t0\t0\tJP\t2\n"
        ));
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.issues.len(), 1);
        assert_eq!(t.issues[0].issue, "empty_family_id");
        assert_eq!(t.issues[0].row_number, 3);
        assert_eq!(t.unassigned.len(), 1);
        let all = t.rows_with_singletons();
        assert_eq!(all.last().unwrap().family_id, "SINGLETON:p2");
    }

    #[test]
    fn extra_column_is_ignored_with_warning() {
        let body = "patent_id\tfamily_id\toffice\tpub_year\tfiling_year\tgranted\tis_us_utility\tcountries\ttech_field\tassignee\n\
                    p1\tA\tUS\t2001\t2000\t1\t1\tUS\t1\tACME\n";
        let t = load(body);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.warnings.len(), 1);
        assert!(t.warnings[0].contains("assignee"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let body = "patent_id\tfamily_id\toffice\tpub_year\n";
        let err = load_patents_from_reader(body.as_bytes(), "p.tsv").unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn { ref column, .. } if column == "filing_year"));
    }

    #[test]
    fn unparsable_year_is_row_level() {
        let t = load(&format!(
            "{HEADER}p1\tA\tUS\t20x1\t2000\t1\t1\tUS\t1\np2\tA\tUS\t\t2000\t1\t1\tUS\t1\n"
        ));
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].pub_year, None);
        assert_eq!(t.issues[0].issue, "bad_pub_year");
    }

    #[test]
    fn unknown_country_is_kept_and_flagged() {
        let t = load(&format!("{HEADER}p1\tA\tUS\t2001\t2000\t1\t1\tUK\t1\n"));
        assert_eq!(t.rows[0].countries, vec!["UK"]);
        assert_eq!(t.issues[0].issue, "unknown_country");
    }

    #[test]
    fn citations_keep_duplicates_and_self_references() {
        let hdr = "citing_patent_id\tcited_patent_id\n";
        let t = load_citations_from_reader(format!("{hdr}A\tB\nA\tB\n").as_bytes(), "c", Source::Extended)
            .unwrap();
        assert_eq!(t.edges.len(), 2);

        let t = load_citations_from_reader(hdr.as_bytes(), "c", Source::Extended).unwrap();
        assert!(t.edges.is_empty());

        let t = load_citations_from_reader(format!("{hdr}A\tA\n").as_bytes(), "c", Source::Restricted)
            .unwrap();
        assert_eq!(t.edges.len(), 1);
        assert!(t.edges[0].is_self_reference());
        assert_eq!(t.issues[0].issue, "self_reference");
    }

    #[test]
    fn citation_schema_must_match() {
        let err = load_citations_from_reader("from\tto\nA\tB\n".as_bytes(), "c", Source::Extended)
            .unwrap_err();
        assert!(matches!(err, CorpusError::UnknownSchema { .. }));
    }
}
