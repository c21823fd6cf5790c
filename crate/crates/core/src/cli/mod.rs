//! Command-line front end.
//!
//! Every analysis subcommand reads the raw inputs and recomputes the
//! upstream stages in memory, so running stages one at a time gives the
//! same artifacts as `all`. Exit codes: 0 success, 1 usage error, 2 data
//! error (with `error_report.tsv` still written).

pub mod manifest;
pub mod plot;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bias::{write_bias_table, write_shifts_table, Weighting};
use crate::cd_engine::{read_cd_table, write_cd_table, Window};
use crate::corpus::{write_error_report, write_families, Anchor, FocalCriteria, Issue, PatentTable};
use crate::coverage::{write_coverage, MissingHomeRate};
use crate::pipeline::{bias_stage, BiasStage, cd_stage, coverage_stage, prepare, regress_stage, Inputs, PipelineConfig};
use crate::regress::{
    bucket_countries, write_fit_report, write_stacked, BwTransform, CoverageMode, Model, RegressSpec, SmallSample,
    DEFAULT_COUNTRIES, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, REST_OF_WORLD,
};
use crate::synth::{generate, SynthParams};
use manifest::Manifest;
use plot::PlotStyle;

#[derive(Debug, Parser)]
#[command(name = "disruptr", version, about = "CD index and two-source truncation bias for patent citation networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collapse patents into families and report row-level issues.
    Ingest(AnalysisArgs),
    /// CD index per focal family in both sources.
    Cd(AnalysisArgs),
    /// Paired source differences, citer shifts and country biases.
    Bias(AnalysisArgs),
    /// Home-office coverage rates by country and year.
    Coverage(AnalysisArgs),
    /// Stacked two-source regression.
    Regress(AnalysisArgs),
    /// Write a synthetic corpus with known truncation.
    Simulate(SimulateArgs),
    /// Plot-ready series from a fit report or a CD table.
    Plotdata(PlotArgs),
    /// Every analysis stage plus plot data.
    All(AnalysisArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[arg(long)]
    pub patents: PathBuf,
    #[arg(long)]
    pub citations_restricted: PathBuf,
    #[arg(long)]
    pub citations_extended: PathBuf,
    #[arg(long)]
    pub coverage_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Anchor::Publication)]
    pub anchor: Anchor,
    /// Forward window in years: 5 or 10.
    #[arg(long, default_value_t = 5, value_parser = parse_window)]
    pub window: u32,
    /// Exclude citers from the focal year itself.
    #[arg(long)]
    pub strict_window: bool,
    /// Inclusive focal anchor-year range.
    #[arg(long, default_value = "1990:2015", value_parser = parse_years)]
    pub years: (i32, i32),
    #[arg(long)]
    pub triadic: bool,
    #[arg(long)]
    pub single_country: bool,
    /// Keep focal families whose primary tech field is listed.
    #[arg(long, value_delimiter = ',')]
    pub tech_fields: Option<Vec<String>>,
    /// Countries reported individually; others go to ROW.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_COUNTRIES.iter().map(|c| c.to_string()))]
    pub countries: Vec<String>,
    #[arg(long, value_enum, default_value_t = Model::Interacted)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = BwTransform::Log1p)]
    pub bw_transform: BwTransform,
    #[arg(long, value_enum, default_value_t = CoverageMode::CountryYear, requires = "coverage_table")]
    pub coverage_mode: CoverageMode,
    #[arg(long, value_enum, default_value_t = SmallSample::Cgm)]
    pub small_sample: SmallSample,
    /// Drop team size, country count and backward citations.
    #[arg(long)]
    pub no_controls: bool,
    #[arg(long, value_enum, default_value_t = Weighting::FamilyCountry)]
    pub weighting: Weighting,
    /// Smallest country-year cohort with a reported coverage rate.
    #[arg(long, default_value_t = crate::coverage::DEFAULT_MIN_COHORT)]
    pub min_cohort: usize,
    /// Use the best available office when the home rate is missing.
    #[arg(long, requires = "coverage_table")]
    pub coverage_fallback: bool,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Mirage,
    Symmetric,
    NoTruncation,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Mirage)]
    pub preset: Preset,
    /// Approximate number of families.
    #[arg(long)]
    pub families: Option<u64>,
    /// Inclusive range of family years.
    #[arg(long, value_parser = parse_years)]
    pub years: Option<(i32, i32)>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum, default_value_t = PlotStyle::ThreePanel)]
    pub style: PlotStyle,
    #[arg(long, required_if_eq("style", "three-panel"))]
    pub fit_report: Option<PathBuf>,
    #[arg(long, required_if_eq("style", "cdf"))]
    pub cd: Option<PathBuf>,
    /// Family countries for the CDF; without it every family is `ALL`.
    #[arg(long)]
    pub patents: Option<PathBuf>,
    /// Countries to keep.
    #[arg(long, value_delimiter = ',')]
    pub countries: Option<Vec<String>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_window(s: &str) -> Result<u32, String> {
    match s.trim() {
        "5" => Ok(5),
        "10" => Ok(10),
        _ => Err(format!("window must be 5 or 10, got `{s}`")),
    }
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got `{s}`"))?;
    let a: i32 = a.trim().parse().map_err(|_| format!("bad start year `{a}`"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("bad end year `{b}`"))?;
    if a > b {
        return Err(format!("empty year range {a}:{b}"));
    }
    Ok((a, b))
}

enum Failure {
    Usage(String),
    Data(crate::Error),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.into())
    }
}

/// Runs the command line; returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest(a) => analysis(Stage::Ingest, &a),
        Command::Cd(a) => analysis(Stage::Cd, &a),
        Command::Bias(a) => analysis(Stage::Bias, &a),
        Command::Coverage(a) => analysis(Stage::Coverage, &a),
        Command::Regress(a) => analysis(Stage::Regress, &a),
        Command::All(a) => analysis(Stage::All, &a),
        Command::Simulate(a) => simulate(&a),
        Command::Plotdata(a) => plotdata(&a),
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn require_files(paths: &[(&str, &Path)]) -> Result<(), Failure> {
    for (flag, p) in paths {
        if !p.is_file() {
            return Err(Failure::Usage(format!("--{flag} {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Data(crate::Error::io(dir, e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    Ingest,
    Cd,
    Bias,
    Coverage,
    Regress,
    All,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cd => "cd",
            Stage::Bias => "bias",
            Stage::Coverage => "coverage",
            Stage::Regress => "regress",
            Stage::All => "all",
        }
    }

    fn runs(self, other: Stage) -> bool {
        self == other || self == Stage::All
    }
}

impl AnalysisArgs {
    fn countries(&self) -> Result<Vec<String>, Failure> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.countries {
            let c = c.trim().to_ascii_uppercase();
            if c.is_empty() {
                continue;
            }
            if c == crate::bias::REFERENCE_COUNTRY || c == REST_OF_WORLD {
                return Err(Failure::Usage(format!("--countries may not list {c}")));
            }
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }

    pub fn config(&self) -> Result<PipelineConfig, String> {
        self.config_inner().map_err(|f| match f {
            Failure::Usage(m) => m,
            Failure::Data(e) => e.to_string(),
        })
    }

    fn config_inner(&self) -> Result<PipelineConfig, Failure> {
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(Failure::Usage("--tolerance and --max-iter must be positive".into()));
        }
        let mut cfg = PipelineConfig::default();
        cfg.focal = FocalCriteria {
            anchor: self.anchor,
            years: self.years,
            triadic: self.triadic,
            single_country: self.single_country,
            tech_fields: self
                .tech_fields
                .as_ref()
                .map(|v| v.iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()),
        };
        cfg.window = Window {
            anchor: self.anchor,
            years: self.window,
            strict_start: self.strict_window,
        };
        cfg.regress = RegressSpec {
            model: self.model,
            controls: !self.no_controls,
            bw_transform: self.bw_transform,
            coverage_mode: self.coverage_mode,
            countries: self.countries()?,
            anchor: self.anchor,
            small_sample: self.small_sample,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
        };
        cfg.coverage.anchor = self.anchor;
        cfg.coverage.min_cohort = self.min_cohort;
        cfg.coverage.missing_home = if self.coverage_fallback {
            MissingHomeRate::FallbackToMax
        } else {
            MissingHomeRate::Missing
        };
        cfg.min_cohort = self.min_cohort;
        cfg.weighting = self.weighting;
        Ok(cfg)
    }

    fn inputs(&self) -> Vec<(&'static str, PathBuf)> {
        let mut v = vec![
            ("patents", self.patents.clone()),
            ("citations_restricted", self.citations_restricted.clone()),
            ("citations_extended", self.citations_extended.clone()),
        ];
        if let Some(c) = &self.coverage_table {
            v.push(("coverage_table", c.clone()));
        }
        v
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    pipeline: &'a PipelineConfig,
    missing_home_rate: MissingHomeRate,
    coverage_table: bool,
}

#[derive(Serialize)]
struct BiasSummary<'a> {
    paired: usize,
    only_restricted: usize,
    only_extended: usize,
    neither: usize,
    missing_restricted_record: usize,
    regions: &'a crate::bias::RegionDiagnostics,
    shifts: ShiftTotals,
}

#[derive(Serialize, Default)]
struct ShiftTotals {
    f_to_f: u64,
    c_to_c: u64,
    p_to_p: u64,
    c_to_f: u64,
    c_to_p: u64,
    omitted_f: u64,
    omitted_c: u64,
    omitted_p: u64,
    anomalous: u64,
}

fn bias_summary(b: &BiasStage) -> BiasSummary<'_> {
    let mut t = ShiftTotals::default();
    for s in &b.shifts {
        t.f_to_f += s.ff();
        t.c_to_c += s.cc();
        t.p_to_p += s.pp();
        t.c_to_f += s.c_to_f();
        t.c_to_p += s.c_to_p();
        t.omitted_f += s.omitted_f();
        t.omitted_c += s.omitted_c();
        t.omitted_p += s.omitted_p();
        t.anomalous += s.anomalies();
    }
    BiasSummary {
        paired: b.pairing.paired.len(),
        only_restricted: b.pairing.only_restricted,
        only_extended: b.pairing.only_extended,
        neither: b.pairing.neither,
        missing_restricted_record: b.pairing.missing_restricted_record,
        regions: &b.regions,
        shifts: t,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| crate::Error::io(path, e))
}

fn analysis(stage: Stage, a: &AnalysisArgs) -> Result<(), Failure> {
    let cfg = a.config_inner()?;
    let mut files: Vec<(&str, &Path)> = vec![
        ("patents", &a.patents),
        ("citations-restricted", &a.citations_restricted),
        ("citations-extended", &a.citations_extended),
    ];
    if let Some(c) = &a.coverage_table {
        files.push(("coverage-table", c));
    } else if stage == Stage::Coverage {
        return Err(Failure::Usage("coverage requires --coverage-table".into()));
    }
    require_files(&files)?;
    let out = &a.output.out;
    create_dir(out)?;
    let pool = pool(a.output.threads)?;
    let mut issues = Vec::new();
    let result = pool.install(|| run_stages(stage, a, &cfg, &mut issues));
    let report = out.join("error_report.tsv");
    match result {
        Ok(mut outputs) => {
            write_error_report(&report, &issues)?;
            outputs.push(report);
            let echo = ConfigEcho {
                pipeline: &cfg,
                missing_home_rate: cfg.coverage.missing_home,
                coverage_table: a.coverage_table.is_some(),
            };
            let mut m = Manifest::new(stage.name(), serde_json::to_value(&echo)?, pool.current_num_threads())?;
            m.add_inputs(&a.inputs())?;
            m.add_outputs(&outputs)?;
            m.write(out)?;
            Ok(())
        }
        Err(e) => {
            issues.push(Issue::new(0, "fatal", e.to_string()));
            if let Err(w) = write_error_report(&report, &issues) {
                log::error!("could not write error report: {w}");
            }
            Err(Failure::Data(e))
        }
    }
}

fn run_stages(
    stage: Stage,
    a: &AnalysisArgs,
    cfg: &PipelineConfig,
    issues: &mut Vec<Issue>,
) -> crate::Result<Vec<PathBuf>> {
    let out = &a.output.out;
    let mut outputs = Vec::new();
    let stage_report = |name: &str, list: &[Issue], outputs: &mut Vec<PathBuf>| -> crate::Result<()> {
        let p = out.join(name);
        write_error_report(&p, list)?;
        outputs.push(p);
        Ok(())
    };

    let inputs = Inputs::load(&a.patents, &a.citations_restricted, &a.citations_extended, a.coverage_table.as_deref())?;
    let prepared = prepare(&inputs, cfg);
    issues.extend(prepared.issues.iter().cloned());
    log::info!(
        "{} families, {} focal, {} restricted / {} extended edges",
        prepared.families.len(),
        prepared.focal.len(),
        prepared.restricted.network.edge_count(),
        prepared.extended.network.edge_count()
    );
    if stage.runs(Stage::Ingest) {
        let p = out.join("families.tsv");
        write_families(&p, prepared.families.families.values())?;
        outputs.push(p);
    }
    if stage == Stage::Ingest {
        return Ok(outputs);
    }

    let coverage = if stage.runs(Stage::Coverage) || stage.runs(Stage::Regress) {
        inputs.coverage.as_ref().map(|t| coverage_stage(&prepared, t, cfg))
    } else {
        None
    };
    if stage.runs(Stage::Coverage) {
        if let Some(report) = &coverage {
            let p = out.join("coverage.tsv");
            write_coverage(&p, report)?;
            outputs.push(p);
            stage_report("coverage_issues.tsv", &report.issues, &mut outputs)?;
        }
    }
    if stage == Stage::Coverage {
        return Ok(outputs);
    }

    let cd = cd_stage(&prepared, cfg);
    if stage.runs(Stage::Cd) {
        let p = out.join("cd.tsv");
        write_cd_table(&p, cd.records())?;
        outputs.push(p);
        let cd_issues: Vec<Issue> = cd.extended.issues.iter().chain(&cd.restricted.issues).cloned().collect();
        stage_report("cd_issues.tsv", &cd_issues, &mut outputs)?;
    }
    if stage.runs(Stage::Bias) {
        let b = bias_stage(&prepared, &cd, cfg);
        for (name, write) in [
            ("bias.tsv", &(|p: &Path| write_bias_table(p, &b.countries)) as &dyn Fn(&Path) -> crate::Result<()>),
            ("shifts.tsv", &|p: &Path| write_shifts_table(p, &b.shifts)),
            ("bias_summary.json", &|p: &Path| write_json(p, &bias_summary(&b))),
        ] {
            let p = out.join(name);
            write(&p)?;
            outputs.push(p);
        }
        stage_report("bias_issues.tsv", &b.issues, &mut outputs)?;
    }
    if stage.runs(Stage::Regress) {
        let r = regress_stage(&prepared, &cd, coverage.as_ref(), cfg)?;
        let p = out.join("stacked.tsv");
        write_stacked(&p, &r.stacked)?;
        outputs.push(p);
        let p = out.join("fit_report.json");
        write_fit_report(&p, &r.report)?;
        outputs.push(p);
        if stage == Stage::All {
            let panels = plot::three_panel(&r.report, None)?;
            let p = out.join("plot_three_panel.tsv");
            plot::write(&p, &plot::render_three_panel(&panels))?;
            outputs.push(p);
            let listed = &cfg.regress.countries;
            let points = plot::cdf_series(cd.records(), |id| {
                prepared
                    .families
                    .get(id)
                    .map(|f| bucket_countries(&f.countries, listed).into_iter().collect())
                    .unwrap_or_default()
            })?;
            let p = out.join("plot_cdf.tsv");
            plot::write(&p, &plot::render_cdf(&points))?;
            outputs.push(p);
        }
    }
    Ok(outputs)
}

fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut params = match a.preset {
        Preset::Mirage => SynthParams::mirage(),
        Preset::Symmetric => SynthParams::symmetric(),
        Preset::NoTruncation => SynthParams::no_truncation(),
    };
    if let Some(y) = a.years {
        params.years = y;
    }
    if let Some(n) = a.families {
        params = params.with_total_families(n);
    }
    params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    create_dir(&a.output.out)?;
    let pool = pool(a.output.threads)?;
    let corpus = pool.install(|| generate(&params, a.seed)).map_err(crate::Error::from)?;
    let outputs = corpus.write(&a.output.out)?;
    #[derive(Serialize)]
    struct Echo<'a> {
        seed: u64,
        preset: Preset,
        params: &'a SynthParams,
    }
    let echo = Echo {
        seed: a.seed,
        preset: a.preset,
        params: &params,
    };
    let mut m = Manifest::new("simulate", serde_json::to_value(&echo)?, pool.current_num_threads())?;
    m.add_outputs(&outputs)?;
    m.write(&a.output.out)?;
    Ok(())
}

fn plotdata(a: &PlotArgs) -> Result<(), Failure> {
    let countries: Option<BTreeSet<String>> = a
        .countries
        .as_ref()
        .map(|v| v.iter().map(|c| c.trim().to_ascii_uppercase()).filter(|c| !c.is_empty()).collect());
    let (input_role, input) = match a.style {
        PlotStyle::ThreePanel => ("fit_report", a.fit_report.clone()),
        PlotStyle::Cdf => ("cd", a.cd.clone()),
    };
    let input = input.ok_or_else(|| Failure::Usage(format!("--style needs --{}", input_role.replace('_', "-"))))?;
    let mut files: Vec<(&str, &Path)> = vec![(input_role, &input)];
    if let Some(p) = &a.patents {
        files.push(("patents", p));
    }
    require_files(&files)?;
    let (name, body) = match a.style {
        PlotStyle::ThreePanel => {
            let text = std::fs::read_to_string(&input).map_err(|e| crate::Error::io(&input, e))?;
            let pts = plot::three_panel_from_json(&text, countries.as_ref())?;
            ("plot_three_panel.tsv", plot::render_three_panel(&pts))
        }
        PlotStyle::Cdf => {
            let records = read_cd_table(&input)?;
            let families = match &a.patents {
                Some(p) => {
                    let t: PatentTable = crate::corpus::load_patents(p).map_err(crate::Error::from)?;
                    Some(crate::corpus::build_families(&t.rows_with_singletons()))
                }
                None => None,
            };
            let keep = |c: &String| countries.as_ref().is_none_or(|set| set.contains(c));
            let pts = plot::cdf_series(&records, |id| match &families {
                Some(f) => f
                    .get(id)
                    .map(|r| r.countries.iter().filter(|c| keep(c)).cloned().collect())
                    .unwrap_or_default(),
                None => ["ALL".to_string()].into_iter().filter(keep).collect(),
            })?;
            ("plot_cdf.tsv", plot::render_cdf(&pts))
        }
    };
    create_dir(&a.output.out)?;
    let p = a.output.out.join(name);
    plot::write(&p, &body)?;
    let mut m = Manifest::new(
        "plotdata",
        serde_json::json!({ "style": format!("{:?}", a.style), "countries": countries }),
        1,
    )?;
    let mut inputs = vec![(input_role, input.clone())];
    if let Some(pt) = &a.patents {
        inputs.push(("patents", pt.clone()));
    }
    m.add_inputs(&inputs)?;
    m.add_outputs(&[p])?;
    m.write(&a.output.out)?;
    Ok(())
}
