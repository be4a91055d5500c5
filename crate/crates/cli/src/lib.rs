//! Command implementations behind the `lakeflow` binary.
//!
//! Every command reads a JSON run config plus the files it points at, writes
//! its reports into the output directory and reads each JSON report back to
//! validate it before reporting success.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lakeflow_core::annealer::AnnealConfig;
use lakeflow_core::dataset::Dataset;
use lakeflow_core::grading::ObjectiveMode;
use lakeflow_core::hydronet::{default_topology, ControlPlan, LakeId, NetworkTopology};
use lakeflow_core::indicators::OutlierRule;
use lakeflow_core::scenario::{fit_network, FitReport, Scenario, ScenarioPaths};
use lakeflow_core::sensitivity::{
    mean_rated_flow, run_sensitivity, standard_perturbations, Dispersion, Perturbation, SensitivityConfig,
    SensitivityReport, SensitivityScenario,
};
use lakeflow_core::series::YearMonth;
use lakeflow_core::synthetic::{generate, SyntheticConfig, CONSTRAINTS_FILE, EVALUATION_FILE, HISTORY_FILE, TOPOLOGY_FILE};
use lakeflow_core::wlpcm::{compare, mpc_run, optimize_year, passthrough_run, Comparison, LevelBand, MpcConfig, MpcRunRecord, YearPlan};
use lakeflow_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "lakeflow", version, about = "Great Lakes water-level simulation and dam control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run config (JSON); relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Data CSV: the record to fit, or a replacement for the scenario history.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random draw; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit rating curves for the level-driven rivers.
    Fit,
    /// Anneal a full-year release plan with the year's indicators known.
    Optimize,
    /// Run the receding-horizon controller over the evaluation period.
    Mpc,
    /// Perturbation sensitivity of the grades under a fixed plan.
    Sensitivity,
    /// Write a seeded synthetic scenario.
    GenerateSynthetic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Optimize => "optimize",
            Command::Mpc => "mpc",
            Command::Sensitivity => "sensitivity",
            Command::GenerateSynthetic => "generate-synthetic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apply_window: Option<usize>,
    pub emergency: std::collections::BTreeMap<LakeId, LevelBand>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    /// Explicit perturbations; when absent the three natural kinds are used
    /// at `standard_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<Vec<Perturbation>>,
    pub standard_fraction: f64,
    pub dispersion: Dispersion,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            perturbations: None,
            standard_fraction: 0.03,
            dispersion: Dispersion::Rmse,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioPaths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_rule: Option<OutlierRule>,
    /// Evaluation months to run; all of them when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub months: Option<usize>,
    pub objective: ObjectiveMode,
    pub anneal: AnnealConfig,
    pub mpc: MpcSection,
    pub sensitivity: SensitivitySection,
    pub synthetic: SyntheticConfig,
}

impl RunConfig {
    /// Load a config file, resolving scenario paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.scenario = config.scenario.map(|s| s.resolved(base));
        config.anneal.validate()?;
        Ok(config)
    }

    pub fn mpc_config(&self, seed: u64) -> MpcConfig {
        let d = MpcConfig::default();
        MpcConfig {
            horizon: self.mpc.horizon.unwrap_or(d.horizon),
            apply_window: self.mpc.apply_window.unwrap_or(d.apply_window),
            anneal: AnnealConfig { seed, ..self.anneal },
            objective: self.objective,
            emergency: self.mpc.emergency.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a report. No timestamps: equal manifests
/// must give byte-identical reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: Command,
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<InputFile>,
    pub inputs: Vec<InputFile>,
    pub out_dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcReport {
    pub months: usize,
    pub record: MpcRunRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub config: SyntheticConfig,
    pub files: Vec<String>,
}

/// Report contents that can check themselves after a round trip through disk.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

impl Validate for FitReport {
    fn validate(&self) -> Result<()> {
        for (_, fit) in self.coefficients.iter() {
            fit.validate()?;
        }
        if self.pairs.len() != self.coefficients.iter().count() {
            return Err(Error::Numerical("fit report pairs do not match coefficients".into()));
        }
        Ok(())
    }
}

impl Validate for YearPlan {
    fn validate(&self) -> Result<()> {
        self.grade.validate()?;
        self.passthrough_grade.validate()?;
        if !self.score.is_finite() || !self.passthrough_score.is_finite() {
            return Err(Error::Numerical("non-finite plan score".into()));
        }
        Ok(())
    }
}

impl Validate for MpcReport {
    fn validate(&self) -> Result<()> {
        for g in self.record.monthly_grades() {
            g.validate()?;
        }
        if self.error.is_none() && self.record.stopped.is_none() && self.record.months() != self.months {
            return Err(Error::Numerical(format!(
                "record covers {} months, expected {}",
                self.record.months(),
                self.months
            )));
        }
        Ok(())
    }
}

impl Validate for SensitivityReport {
    fn validate(&self) -> Result<()> {
        SensitivityReport::validate(self)
    }
}

impl Validate for GenerateReport {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn input_file(path: &Path) -> Result<InputFile> {
    Ok(InputFile {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// Serialize, write, read back and validate.
fn write_report<T: Serialize + DeserializeOwned + Validate>(path: &Path, report: &Report<T>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, &text)?;
    let back: Report<T> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Numerical(format!("{} does not read back: {e}", path.display())))?;
    back.result.validate()?;
    if back.manifest != report.manifest {
        return Err(Error::Numerical(format!("{} manifest does not read back", path.display())));
    }
    Ok(())
}

/// Resolved inputs of one invocation.
struct Context {
    command: Command,
    config: RunConfig,
    config_file: Option<InputFile>,
    data: Option<PathBuf>,
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let (config, config_file) = match &cli.config {
            Some(p) => (RunConfig::load(p)?, Some(input_file(p)?)),
            None => (RunConfig::default(), None),
        };
        let seed = match cli.command {
            Command::GenerateSynthetic => cli.seed.or(config.seed).unwrap_or(config.synthetic.seed),
            _ => cli.seed.or(config.seed).unwrap_or(0),
        };
        Ok(Self {
            command: cli.command,
            config,
            config_file,
            data: cli.data.clone(),
            out: cli.out.clone(),
            seed,
        })
    }

    fn manifest(&self, inputs: &[&Path]) -> Result<RunManifest> {
        Ok(RunManifest {
            subcommand: self.command,
            version: VERSION.to_string(),
            seed: self.seed,
            config: self.config_file.clone(),
            inputs: inputs.iter().map(|p| input_file(p)).collect::<Result<_>>()?,
            out_dir: self.out.display().to_string(),
        })
    }

    fn scenario_paths(&self) -> Result<ScenarioPaths> {
        let mut paths = self
            .config
            .scenario
            .clone()
            .ok_or_else(|| Error::Config("the run config needs a scenario section".into()))?;
        if let Some(d) = &self.data {
            paths.history = d.clone();
        }
        Ok(paths)
    }

    fn scenario(&self) -> Result<(Scenario, ScenarioPaths)> {
        let paths = self.scenario_paths()?;
        Ok((paths.load(self.config.outlier_rule)?, paths))
    }

    fn months(&self, scenario: &Scenario) -> usize {
        self.config.months.unwrap_or(scenario.months())
    }

    fn anneal(&self) -> AnnealConfig {
        AnnealConfig {
            seed: self.seed,
            ..self.config.anneal
        }
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Run one command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cli)?;
    std::fs::create_dir_all(&ctx.out)?;
    match ctx.command {
        Command::Fit => cmd_fit(&ctx),
        Command::Optimize => cmd_optimize(&ctx),
        Command::Mpc => cmd_mpc(&ctx),
        Command::Sensitivity => cmd_sensitivity(&ctx),
        Command::GenerateSynthetic => cmd_generate_synthetic(&ctx),
    }
}

/// Exit status for an error: 2 for bad input, 3 for model or optimizer failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

fn cmd_fit(ctx: &Context) -> Result<Vec<PathBuf>> {
    let scenario = ctx.config.scenario.as_ref();
    let data = ctx
        .data
        .clone()
        .or_else(|| scenario.map(|s| s.history.clone()))
        .ok_or_else(|| Error::Config("fit needs --data or a scenario history".into()))?;
    let mut inputs = vec![data.clone()];
    let topology = match scenario {
        Some(s) => {
            inputs.push(s.topology.clone());
            NetworkTopology::from_json(&read_text(&s.topology)?)?
        }
        None => default_topology(),
    };
    let dataset = Dataset::read_csv(open(&data)?)?;
    if dataset.is_empty() {
        return Err(Error::Data(format!("{} holds no series", data.display())));
    }
    let fit = fit_network(&dataset, &topology)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let manifest = ctx.manifest(&refs)?;

    let coef_path = ctx.out_file("coefficients.json");
    std::fs::write(&coef_path, serde_json::to_string_pretty(&fit.coefficients)? + "\n")?;
    let report_path = ctx.out_file("fit_report.json");
    write_report(&report_path, &Report { manifest, result: fit })?;
    Ok(vec![coef_path, report_path])
}

fn write_plan_csv(path: &Path, plan: &ControlPlan, start: YearMonth) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let mut header = vec!["month".to_string()];
    header.extend(plan.rivers().iter().map(|r| r.code().to_string()));
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for t in 0..plan.months() {
        let mut row = vec![start.add_months(t as i64).to_string()];
        row.extend(plan.rivers().iter().map(|r| plan.series(*r).expect("planned river")[t].to_string()));
        w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_optimize(ctx: &Context) -> Result<Vec<PathBuf>> {
    let (scenario, paths) = ctx.scenario()?;
    let months = ctx.months(&scenario);
    let year = optimize_year(&scenario, &ctx.anneal(), ctx.config.objective, months)?;
    log::info!("optimized score {:.4} (passthrough {:.4})", year.score, year.passthrough_score);
    let manifest = ctx.manifest(&paths.inputs())?;
    let plan_path = ctx.out_file("plan.csv");
    write_plan_csv(&plan_path, &year.plan, scenario.start())?;
    let report_path = ctx.out_file("optimize_report.json");
    write_report(&report_path, &Report { manifest, result: year })?;
    Ok(vec![plan_path, report_path])
}

/// One row per realized month: releases, end-of-month levels and the grade
/// of the 12-month window ending there.
fn write_mpc_csv(path: &Path, record: &MpcRunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let Some(first) = record.steps.first() else {
        w.flush()?;
        return Ok(());
    };
    let rivers = first.applied.rivers().to_vec();
    let mut header = vec!["month".to_string()];
    header.extend(rivers.iter().map(|r| format!("release_{}", r.code())));
    header.extend(LakeId::ALL.iter().map(|l| format!("level_{}", l.code())));
    header.extend(["g_l", "g_f", "total"].map(String::from));
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for step in &record.steps {
        for (k, state) in step.realized.iter().enumerate() {
            let g = &step.grades[k];
            let (g_l, g_f) = g.lake_means();
            let mut row = vec![step.month.add_months(k as i64).to_string()];
            row.extend(rivers.iter().map(|r| step.applied.series(*r).expect("applied river")[k].to_string()));
            row.extend(LakeId::ALL.iter().map(|l| state.levels[*l].to_string()));
            row.extend([g_l, g_f, g.total].map(|v| v.to_string()));
            w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean, minimum and median of the monthly G_L and G_F for both controllers.
fn write_summary_csv(path: &Path, c: &Comparison) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "controller,metric,mean,min,median")?;
    for (name, s) in [("wlpcm", &c.wlpcm), ("passthrough", &c.passthrough)] {
        for (metric, st) in [("g_l", &s.g_l), ("g_f", &s.g_f)] {
            writeln!(f, "{name},{metric},{},{},{}", st.mean, st.min, st.median)?;
        }
    }
    f.flush()?;
    Ok(())
}

fn cmd_mpc(ctx: &Context) -> Result<Vec<PathBuf>> {
    let (scenario, paths) = ctx.scenario()?;
    let months = ctx.months(&scenario);
    let config = ctx.config.mpc_config(ctx.seed);
    let manifest = ctx.manifest(&paths.inputs())?;
    let report_path = ctx.out_file("mpc_report.json");
    let csv_path = ctx.out_file("mpc_months.csv");

    let (record, failure) = match mpc_run(&scenario, &config, months) {
        Ok(r) => (r, None),
        Err(e) => (e.partial, Some(e.source)),
    };
    write_mpc_csv(&csv_path, &record)?;
    let comparison = if failure.is_none() && record.months() > 0 {
        let (_, _, base) = passthrough_run(&scenario, record.months())?;
        Some(compare(&record, &base)?)
    } else {
        None
    };
    let report = MpcReport {
        months,
        record,
        comparison,
        error: failure.as_ref().map(|e| e.to_string()),
    };
    write_report(&report_path, &Report { manifest, result: report.clone() })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut written = vec![report_path, csv_path];
    if let Some(c) = &report.comparison {
        log::info!("mean G_L: wlpcm {:.4}, passthrough {:.4}", c.wlpcm.g_l.mean, c.passthrough.g_l.mean);
        let summary = ctx.out_file("grade_summary.csv");
        write_summary_csv(&summary, c)?;
        written.push(summary);
    }
    Ok(written)
}

fn cmd_sensitivity(ctx: &Context) -> Result<Vec<PathBuf>> {
    let (scenario, paths) = ctx.scenario()?;
    let section = &ctx.config.sensitivity;
    let perturbations = match &section.perturbations {
        Some(p) => p.clone(),
        None => standard_perturbations(section.standard_fraction, mean_rated_flow(&scenario)),
    };
    let months = ctx.months(&scenario);
    let plan = scenario.passthrough_plan(scenario.start(), months)?;
    let mut scn = SensitivityScenario::from_scenario(&scenario, Some(plan))?;
    scn.forcing.truncate(months);
    let report = run_sensitivity(
        &scn,
        &SensitivityConfig {
            perturbations,
            dispersion: section.dispersion,
        },
    )?;
    let manifest = ctx.manifest(&paths.inputs())?;
    let path = ctx.out_file("sensitivity_report.json");
    write_report(&path, &Report { manifest, result: report })?;
    Ok(vec![path])
}

/// Run config written next to a generated scenario.
pub fn bundled_run_config(seed: u64) -> RunConfig {
    RunConfig {
        scenario: Some(ScenarioPaths {
            history: HISTORY_FILE.into(),
            evaluation: EVALUATION_FILE.into(),
            topology: TOPOLOGY_FILE.into(),
            constraints: CONSTRAINTS_FILE.into(),
            coefficients: None,
        }),
        seed: Some(seed),
        ..Default::default()
    }
}

fn cmd_generate_synthetic(ctx: &Context) -> Result<Vec<PathBuf>> {
    let config = SyntheticConfig {
        seed: ctx.seed,
        ..ctx.config.synthetic.clone()
    };
    let scenario = generate(&config)?;
    let mut files = scenario.write_to(&ctx.out)?;
    let run_path = ctx.out_file("run.json");
    std::fs::write(&run_path, serde_json::to_string_pretty(&bundled_run_config(0))? + "\n")?;
    files.push(run_path);

    let manifest = ctx.manifest(&[])?;
    let names = files
        .iter()
        .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
        .collect();
    let report_path = ctx.out_file("generate_report.json");
    write_report(&report_path, &Report { manifest, result: GenerateReport { config, files: names } })?;
    files.push(report_path);
    Ok(files)
}

/// Read a report written by one of the commands.
pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<Report<T>> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}
