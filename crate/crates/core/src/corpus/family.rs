use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::{Anchor, Issue, PatentRow};

/// Family id prefix given to patents that carry no family assignment.
pub const SINGLETON_PREFIX: &str = "SINGLETON:";

/// One deduplicated invention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRecord {
    pub family_id: String,
    pub earliest_pub_year: i32,
    pub earliest_filing_year: Option<i32>,
    pub offices: BTreeSet<String>,
    pub countries: BTreeSet<String>,
    pub tech_fields: BTreeSet<String>,
    pub has_us_utility: bool,
    pub granted_anywhere: bool,
    pub has_epo_filing: bool,
    pub has_jpo_filing: bool,
    /// Largest inventor list over members (at least 1).
    pub num_inventors: u32,
    /// Some members listed no inventor country and inherited the union.
    pub countries_imputed: bool,
    pub country_missing: bool,
    pub singleton: bool,
    pub members: usize,
}

impl FamilyRecord {
    pub fn anchor_year(&self, anchor: Anchor) -> Option<i32> {
        match anchor {
            Anchor::Publication => Some(self.earliest_pub_year),
            Anchor::Filing => self.earliest_filing_year,
        }
    }

    /// Year used to look up office coverage statistics, which describe
    /// applications: the filing year, or the publication year when no
    /// filing date is known.
    pub fn coverage_year(&self) -> i32 {
        self.earliest_filing_year.unwrap_or(self.earliest_pub_year)
    }

    /// Deterministic single technology field (the smallest code).
    pub fn primary_tech(&self) -> Option<&str> {
        self.tech_fields.iter().next().map(String::as_str)
    }

    pub fn is_triadic(&self) -> bool {
        self.has_us_utility && self.has_epo_filing && self.has_jpo_filing
    }
}

#[derive(Debug, Clone, Default)]
pub struct FamilyTable {
    pub families: BTreeMap<String, FamilyRecord>,
    pub patent_to_family: HashMap<String, String>,
    pub issues: Vec<Issue>,
}

impl FamilyTable {
    pub fn get(&self, family_id: &str) -> Option<&FamilyRecord> {
        self.families.get(family_id)
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }
}

/// Aggregates patent rows to one record per family.
///
/// Dates are minima over dated members; flags are ORs; countries are the
/// union over members, so members with an empty inventor list inherit the
/// countries of their siblings. A family none of whose members has a
/// publication year is dropped and reported.
pub fn build_families(rows: &[PatentRow]) -> FamilyTable {
    let mut grouped: BTreeMap<&str, Vec<&PatentRow>> = BTreeMap::new();
    let mut table = FamilyTable::default();
    for row in rows {
        match table.patent_to_family.get(&row.patent_id) {
            Some(existing) if existing != &row.family_id => {
                table.issues.push(Issue::new(
                    0,
                    "conflicting_family",
                    format!(
                        "patent {} assigned to {} and {}; keeping {}",
                        row.patent_id, existing, row.family_id, existing
                    ),
                ));
                continue;
            }
            Some(_) => {
                table
                    .issues
                    .push(Issue::new(0, "duplicate_patent", row.patent_id.clone()));
                continue;
            }
            None => {}
        }
        table
            .patent_to_family
            .insert(row.patent_id.clone(), row.family_id.clone());
        grouped.entry(row.family_id.as_str()).or_default().push(row);
    }

    for (family_id, members) in grouped {
        let Some(earliest_pub_year) = members.iter().filter_map(|m| m.pub_year).min() else {
            table.issues.push(Issue::new(
                0,
                "undated_family",
                format!("family {family_id}: no member has a publication year"),
            ));
            continue;
        };
        let undated = members.iter().filter(|m| m.pub_year.is_none()).count();
        if undated > 0 {
            table.issues.push(Issue::new(
                0,
                "undated_member",
                format!("family {family_id}: {undated} member(s) without publication year"),
            ));
        }
        let countries: BTreeSet<String> =
            members.iter().flat_map(|m| m.countries.iter().cloned()).collect();
        let some_empty = members.iter().any(|m| m.countries.is_empty());
        let record = FamilyRecord {
            family_id: family_id.to_string(),
            earliest_pub_year,
            earliest_filing_year: members.iter().filter_map(|m| m.filing_year).min(),
            offices: members.iter().map(|m| m.office.clone()).collect(),
            tech_fields: members.iter().filter_map(|m| m.tech_field.clone()).collect(),
            has_us_utility: members.iter().any(|m| m.is_us_utility),
            granted_anywhere: members.iter().any(|m| m.granted),
            has_epo_filing: members.iter().any(|m| m.office == "EP"),
            has_jpo_filing: members.iter().any(|m| m.office == "JP"),
            num_inventors: members
                .iter()
                .map(|m| m.countries.len() as u32)
                .max()
                .unwrap_or(0)
                .max(1),
            countries_imputed: some_empty && !countries.is_empty(),
            country_missing: countries.is_empty(),
            singleton: family_id.starts_with(SINGLETON_PREFIX),
            members: members.len(),
            countries,
        };
        if record.country_missing {
            table.issues.push(Issue::new(
                0,
                "country_missing",
                format!("family {family_id}: no inventor country on any member"),
            ));
        }
        table.families.insert(record.family_id.clone(), record);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pid: &str, fid: &str, office: &str, pub_year: Option<i32>, countries: &[&str]) -> PatentRow {
        PatentRow {
            patent_id: pid.into(),
            family_id: fid.into(),
            office: office.into(),
            pub_year,
            filing_year: pub_year.map(|y| y - 1),
            granted: false,
            is_us_utility: false,
            countries: countries.iter().map(|s| s.to_string()).collect(),
            tech_field: Some("1".into()),
        }
    }

    #[test]
    fn earliest_publication_year_is_the_minimum() {
        let t = build_families(&[
            row("a1", "A", "US", Some(2001), &["US"]),
            row("a2", "A", "EP", Some(1999), &["US"]),
        ]);
        assert_eq!(t.get("A").unwrap().earliest_pub_year, 1999);
        assert_eq!(t.get("A").unwrap().earliest_filing_year, Some(1998));
        assert!(t.get("A").unwrap().has_epo_filing);
    }

    #[test]
    fn countries_are_filled_from_other_members() {
        let t = build_families(&[row("a1", "A", "US", Some(2001), &[]), row("a2", "A", "DE", Some(2000), &["DE"])]);
        let f = t.get("A").unwrap();
        assert_eq!(f.countries.iter().collect::<Vec<_>>(), vec!["DE"]);
        assert!(f.countries_imputed);
        assert!(!f.country_missing);
    }

    #[test]
    fn grant_flag_is_an_or() {
        let t = build_families(&[row("a1", "A", "US", Some(2001), &["US"]), row("a2", "A", "EP", Some(2001), &["US"])]);
        assert!(!t.get("A").unwrap().granted_anywhere);
        let mut g = row("a3", "B", "JP", Some(2001), &["JP"]);
        g.granted = true;
        let t = build_families(&[row("a4", "B", "US", Some(2001), &["JP"]), g]);
        assert!(t.get("B").unwrap().granted_anywhere);
    }

    #[test]
    fn undated_members_are_ignored_and_undated_families_dropped() {
        let t = build_families(&[
            row("a1", "A", "US", None, &["US"]),
            row("a2", "A", "EP", Some(2003), &["US"]),
            row("b1", "B", "US", None, &["US"]),
        ]);
        assert_eq!(t.get("A").unwrap().earliest_pub_year, 2003);
        assert!(t.get("B").is_none());
        assert!(t.issues.iter().any(|i| i.issue == "undated_family"));
        assert!(t.issues.iter().any(|i| i.issue == "undated_member"));
    }

    #[test]
    fn team_size_is_the_longest_inventor_list() {
        let t = build_families(&[
            row("a1", "A", "US", Some(2001), &["US", "US", "DE"]),
            row("a2", "A", "EP", Some(2001), &["US"]),
        ]);
        assert_eq!(t.get("A").unwrap().num_inventors, 3);
    }
}
