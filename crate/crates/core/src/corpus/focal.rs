use std::collections::BTreeSet;

use log::warn;
use serde::Serialize;

use super::{Anchor, FamilyRecord, FamilyTable};

/// Sample rules for focal families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FocalCriteria {
    pub anchor: Anchor,
    /// Inclusive anchor-year range.
    pub years: (i32, i32),
    pub triadic: bool,
    pub single_country: bool,
    /// Restrict to families whose primary technology field is listed.
    pub tech_fields: Option<BTreeSet<String>>,
}

impl Default for FocalCriteria {
    fn default() -> Self {
        FocalCriteria {
            anchor: Anchor::Publication,
            years: (1990, 2015),
            triadic: false,
            single_country: false,
            tech_fields: None,
        }
    }
}

impl FocalCriteria {
    pub fn admits(&self, f: &FamilyRecord) -> bool {
        if !f.has_us_utility {
            return false;
        }
        let Some(year) = f.anchor_year(self.anchor) else {
            return false;
        };
        if year < self.years.0 || year > self.years.1 {
            return false;
        }
        if self.triadic && !f.is_triadic() {
            return false;
        }
        if self.single_country && f.countries.len() != 1 {
            return false;
        }
        if let Some(fields) = &self.tech_fields {
            match f.primary_tech() {
                Some(t) if fields.contains(t) => {}
                _ => return false,
            }
        }
        true
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalSet {
    /// Sorted family ids.
    pub family_ids: Vec<String>,
    pub criteria: FocalCriteria,
}

impl FocalSet {
    pub fn len(&self) -> usize {
        self.family_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family_ids.is_empty()
    }
}

pub fn select_focal(families: &FamilyTable, criteria: &FocalCriteria) -> FocalSet {
    let family_ids: Vec<String> = families
        .families
        .values()
        .filter(|f| criteria.admits(f))
        .map(|f| f.family_id.clone())
        .collect();
    if family_ids.is_empty() {
        warn!("focal selection is empty for {criteria:?}");
    }
    FocalSet {
        family_ids,
        criteria: criteria.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_families, PatentRow};

    fn member(pid: &str, fid: &str, office: &str, year: i32, us: bool, countries: &[&str]) -> PatentRow {
        PatentRow {
            patent_id: pid.into(),
            family_id: fid.into(),
            office: office.into(),
            pub_year: Some(year),
            filing_year: Some(year - 1),
            granted: true,
            is_us_utility: us,
            countries: countries.iter().map(|c| c.to_string()).collect(),
            tech_field: Some("3".into()),
        }
    }

    #[test]
    fn year_window_excludes_1989() {
        let fams = build_families(&[member("a", "A", "US", 1989, true, &["US"]), member("b", "B", "US", 1990, true, &["US"])]);
        let set = select_focal(&fams, &FocalCriteria::default());
        assert_eq!(set.family_ids, vec!["B"]);
    }

    #[test]
    fn focal_families_need_a_us_utility_patent() {
        let fams = build_families(&[member("a", "A", "DE", 2000, false, &["DE"])]);
        assert!(select_focal(&fams, &FocalCriteria::default()).is_empty());
    }

    #[test]
    fn triadic_flag() {
        let fams = build_families(&[
            member("a1", "A", "US", 2000, true, &["DE"]),
            member("a2", "A", "EP", 2000, false, &["DE"]),
            member("a3", "A", "JP", 2001, false, &["DE"]),
            member("b1", "B", "US", 2000, true, &["DE"]),
            member("b2", "B", "EP", 2000, false, &["DE"]),
        ]);
        let c = FocalCriteria {
            triadic: true,
            ..Default::default()
        };
        assert_eq!(select_focal(&fams, &c).family_ids, vec!["A"]);
    }

    #[test]
    fn single_country_flag() {
        let fams = build_families(&[
            member("a", "A", "US", 2000, true, &["US", "DE"]),
            member("b", "B", "US", 2000, true, &["US", "US"]),
        ]);
        let c = FocalCriteria {
            single_country: true,
            ..Default::default()
        };
        assert_eq!(select_focal(&fams, &c).family_ids, vec!["B"]);
    }

    #[test]
    fn filing_anchor_uses_filing_year() {
        // Published 1990, filed 1989.
        let fams = build_families(&[member("a", "A", "US", 1990, true, &["US"])]);
        let c = FocalCriteria {
            anchor: Anchor::Filing,
            ..Default::default()
        };
        assert!(select_focal(&fams, &c).is_empty());
    }
}
