//! Patent and citation ingestion, DOCDB-family collapse and per-source
//! citation networks.

mod countries;
mod family;
mod focal;
mod io;
mod network;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use countries::{is_known_country, normalize_country};
pub use family::{build_families, FamilyRecord, FamilyTable, SINGLETON_PREFIX};
pub use focal::{select_focal, FocalCriteria, FocalSet};
pub use io::{
    load_citations, load_citations_from_reader, load_patents, load_patents_from_reader,
    write_error_report, write_families, write_patents, write_citations, CitationTable, PatentTable,
    RawEdge,
};
pub use network::{build_network, CitationNetwork, NetworkBuild, NetworkPolicy, NodeId, NodeSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: unrecognised citation schema: {detail}")]
    UnknownSchema { path: String, detail: String },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("family `{0}` is not a node of the network")]
    UnknownFamily(String),
}

/// Citation source. The restricted source observes a subset of the links of
/// the extended one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Extended,
    Restricted,
}

impl Source {
    /// Numeric code used in output tables: restricted = 1, extended = 0.
    pub fn code(self) -> u8 {
        match self {
            Source::Restricted => 1,
            Source::Extended => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Source::Restricted => "restricted",
            Source::Extended => "extended",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "restricted" | "1" => Ok(Source::Restricted),
            "extended" | "0" => Ok(Source::Extended),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// Which family date anchors the focal year and the citer years.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    #[default]
    Publication,
    Filing,
}

impl Anchor {
    pub fn name(self) -> &'static str {
        match self {
            Anchor::Publication => "publication",
            Anchor::Filing => "filing",
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One patent document as read from `patents.tsv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRow {
    pub patent_id: String,
    pub family_id: String,
    pub office: String,
    pub pub_year: Option<i32>,
    pub filing_year: Option<i32>,
    pub granted: bool,
    pub is_us_utility: bool,
    /// One entry per listed inventor; duplicates are meaningful (team size).
    pub countries: Vec<String>,
    pub tech_field: Option<String>,
}

/// A row-level problem recorded instead of aborting ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub row_number: usize,
    pub issue: String,
    pub detail: String,
}

impl Issue {
    pub fn new(row_number: usize, issue: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            row_number,
            issue: issue.into(),
            detail: detail.into(),
        }
    }
}
