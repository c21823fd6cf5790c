//! In-memory orchestration of the stages, shared by the command line and
//! the bindings.

use std::path::Path;

use serde::Serialize;

use crate::bias::{
    all_country_biases, compute_shifts, family_countries, pair_cd_tables, region_diagnostics, CountryBias, Pairing,
    RegionDiagnostics, ShiftTally, Weighting,
};
use crate::cd_engine::{compute_all, CdTable, Window};
use crate::corpus::{
    build_families, build_network, load_citations, load_patents, select_focal, CitationTable, FamilyTable,
    FocalCriteria, FocalSet, Issue, NetworkBuild, NetworkPolicy, PatentTable, Source,
};
use crate::coverage::{country_year_coverage, load_coverage_table, CoverageConfig, CoverageReport, OfficeCoverageTable};
use crate::regress::{baseline_mean, build_stacked, fit_report, fit_stacked, FitReport, RegressSpec, RegressionFit, StackedTable};
use crate::synth::SynthCorpus;

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub focal: FocalCriteria,
    pub window: Window,
    pub regress: RegressSpec,
    #[serde(skip)]
    pub coverage: CoverageConfig,
    pub min_cohort: usize,
    pub weighting: Weighting,
    pub restricted_policy: NetworkPolicy,
    pub extended_policy: NetworkPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let coverage = CoverageConfig::default();
        PipelineConfig {
            focal: FocalCriteria::default(),
            window: Window::new(Default::default(), 5),
            regress: RegressSpec::default(),
            min_cohort: coverage.min_cohort,
            coverage,
            weighting: Weighting::default(),
            restricted_policy: NetworkPolicy::default_for(Source::Restricted),
            extended_policy: NetworkPolicy::default_for(Source::Extended),
        }
    }
}

impl PipelineConfig {
    /// Propagates the anchor to every stage that uses it.
    pub fn with_anchor(mut self, anchor: crate::corpus::Anchor) -> Self {
        self.focal.anchor = anchor;
        self.window.anchor = anchor;
        self.regress.anchor = anchor;
        self.coverage.anchor = anchor;
        self
    }
}

pub struct Inputs {
    pub patents: PatentTable,
    pub restricted: CitationTable,
    pub extended: CitationTable,
    pub coverage: Option<OfficeCoverageTable>,
}

impl Inputs {
    pub fn load(
        patents: &Path,
        restricted: &Path,
        extended: &Path,
        coverage: Option<&Path>,
    ) -> crate::Result<Self> {
        Ok(Inputs {
            patents: load_patents(patents)?,
            restricted: load_citations(restricted, Source::Restricted)?,
            extended: load_citations(extended, Source::Extended)?,
            coverage: coverage.map(load_coverage_table).transpose()?,
        })
    }

    pub fn from_synth(corpus: &SynthCorpus) -> Self {
        Inputs {
            patents: PatentTable {
                rows: corpus.patents.clone(),
                ..Default::default()
            },
            restricted: CitationTable {
                source: Source::Restricted,
                edges: corpus.restricted_edges(),
                issues: Vec::new(),
            },
            extended: CitationTable {
                source: Source::Extended,
                edges: corpus.extended_edges(),
                issues: Vec::new(),
            },
            coverage: Some(corpus.coverage.clone()),
        }
    }
}

/// Families, both networks and the focal sample.
pub struct Prepared {
    pub families: FamilyTable,
    pub restricted: NetworkBuild,
    pub extended: NetworkBuild,
    pub focal: FocalSet,
    /// Row-level issues from every ingestion step.
    pub issues: Vec<Issue>,
}

pub fn prepare(inputs: &Inputs, config: &PipelineConfig) -> Prepared {
    let families = build_families(&inputs.patents.rows_with_singletons());
    let restricted = build_network(&families, &inputs.restricted.edges, Source::Restricted, config.restricted_policy);
    let extended = build_network(&families, &inputs.extended.edges, Source::Extended, config.extended_policy);
    let focal = select_focal(&families, &config.focal);
    let mut issues = inputs.patents.issues.clone();
    for (source, t) in [("restricted", &inputs.restricted), ("extended", &inputs.extended)] {
        issues.extend(t.issues.iter().map(|i| Issue::new(i.row_number, i.issue.clone(), format!("{source}: {}", i.detail))));
    }
    issues.extend(families.issues.iter().cloned());
    issues.extend(restricted.issues.iter().cloned());
    issues.extend(extended.issues.iter().cloned());
    Prepared {
        families,
        restricted,
        extended,
        focal,
        issues,
    }
}

pub struct CdStage {
    pub restricted: CdTable,
    pub extended: CdTable,
}

impl CdStage {
    /// Extended rows first, then restricted, each in focal order.
    pub fn records(&self) -> impl Iterator<Item = &crate::cd_engine::CdRecord> {
        self.extended.records.iter().chain(&self.restricted.records)
    }
}

pub fn cd_stage(prepared: &Prepared, config: &PipelineConfig) -> CdStage {
    CdStage {
        restricted: compute_all(&prepared.restricted.network, &prepared.focal, &config.window),
        extended: compute_all(&prepared.extended.network, &prepared.focal, &config.window),
    }
}

pub struct BiasStage {
    pub shifts: Vec<ShiftTally>,
    pub pairing: Pairing,
    pub countries: Vec<CountryBias>,
    pub regions: RegionDiagnostics,
    pub issues: Vec<Issue>,
}

pub fn bias_stage(prepared: &Prepared, cd: &CdStage, config: &PipelineConfig) -> BiasStage {
    let (shifts, mut issues) = compute_shifts(
        &prepared.restricted.network,
        &prepared.extended.network,
        &prepared.focal,
        &config.window,
    );
    let pairing = pair_cd_tables(&cd.restricted.records, &cd.extended.records);
    let (countries, more) = all_country_biases(&pairing.paired, &family_countries(&prepared.families), config.weighting);
    issues.extend(more);
    BiasStage {
        regions: region_diagnostics(&pairing.paired),
        shifts,
        pairing,
        countries,
        issues,
    }
}

pub fn coverage_stage(prepared: &Prepared, table: &OfficeCoverageTable, config: &PipelineConfig) -> CoverageReport {
    let cfg = CoverageConfig {
        anchor: config.focal.anchor,
        min_cohort: config.min_cohort,
        ..config.coverage.clone()
    };
    let families: Vec<_> = prepared.families.families.values().collect();
    country_year_coverage(families, table, &cfg)
}

pub struct RegressStage {
    pub stacked: StackedTable,
    pub fit: RegressionFit,
    pub alpha_hat: f64,
    pub report: FitReport,
}

pub fn regress_stage(
    prepared: &Prepared,
    cd: &CdStage,
    coverage: Option<&CoverageReport>,
    config: &PipelineConfig,
) -> crate::Result<RegressStage> {
    let stacked = build_stacked(
        &cd.restricted.records,
        &cd.extended.records,
        &prepared.families,
        coverage,
        &config.regress,
    );
    let fit = fit_stacked(&stacked, &config.regress)?;
    let alpha_hat = baseline_mean(&fit, &stacked.rows)?;
    let report = fit_report(&fit, &config.regress, &stacked.countries, alpha_hat);
    Ok(RegressStage {
        stacked,
        fit,
        alpha_hat,
        report,
    })
}

/// Every stage in sequence.
pub struct Analysis {
    pub prepared: Prepared,
    pub cd: CdStage,
    pub bias: BiasStage,
    pub coverage: Option<CoverageReport>,
    pub regress: RegressStage,
}

pub fn run_all(inputs: &Inputs, config: &PipelineConfig) -> crate::Result<Analysis> {
    let prepared = prepare(inputs, config);
    let cd = cd_stage(&prepared, config);
    let bias = bias_stage(&prepared, &cd, config);
    let coverage = inputs.coverage.as_ref().map(|t| coverage_stage(&prepared, t, config));
    let regress = regress_stage(&prepared, &cd, coverage.as_ref(), config)?;
    Ok(Analysis {
        prepared,
        cd,
        bias,
        coverage,
        regress,
    })
}
