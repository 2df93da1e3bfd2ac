//! Command-line pipeline: route generation, feature extraction, model
//! estimation, simulation and reporting.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wayfind::discrete_choice::{
    self, estimate, observations_from_json, EstimateOptions, EstimationResult, ModelSpec,
};
use wayfind::features::{
    feature_table, BehaviorMetrics, NumericTable, PauseRule, Trajectory, Trip,
};
use wayfind::modelsearch::{stepwise_search, SearchConfig, SearchPhases, SearchTrace};
use wayfind::netgraph::{replica_building, replica_tasks, Network};
use wayfind::regression::{self, run_three_models, ThreeModelConfig, ThreeModels, BEHAVIORS};
use wayfind::routeset::{bfs_le, sample_routes, RouteSetFile};
use wayfind::stats::correlation_matrix;
use wayfind::synth::{
    desk_network, desk_tasks, simulate_choices, simulate_trajectory, trajectory_seed,
    GenerativeConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input {
        path: String,
        source: wayfind::Error,
    },
    #[error(transparent)]
    Model(#[from] wayfind::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Parser)]
#[command(
    name = "wayfind",
    version,
    about = "Pedestrian route-choice and wayfinding models"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Network JSON file, or builtin:replica / builtin:desk.
    #[arg(long, global = true)]
    pub network: Option<String>,
    /// Input file(s); repeat for several.
    #[arg(long, global = true)]
    pub data: Vec<PathBuf>,
    /// Model specification or generative configuration JSON.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Master seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file (a directory for `simulate`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Reject unknown fields in input files.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate BFS-LE route sets.
    GenRoutes(GenRoutesArgs),
    /// Route and participant variables of chosen routes.
    Features,
    /// Hesitation, speed and head-rotation metrics from trajectories.
    DeriveMetrics(DeriveMetricsArgs),
    /// Estimate one MNL or PSL model.
    EstimateChoice(EstimateChoiceArgs),
    /// Stepwise search over choice-model specifications.
    SearchChoice(SearchChoiceArgs),
    /// Backward-stepwise regression models for behavior metrics.
    EstimateMlr(EstimateMlrArgs),
    /// Spearman correlation matrix of table columns.
    Correlate(CorrelateArgs),
    /// Simulate choices and trajectories from a known model.
    Simulate(SimulateArgs),
    /// Render estimation outputs as markdown tables.
    Report,
}

#[derive(Debug, Args)]
pub struct GenRoutesArgs {
    /// Origin and destination node ids, `A,B`.
    #[arg(long)]
    pub od: Option<String>,
    /// Task numbers of a builtin network; all tasks when absent.
    #[arg(long, value_delimiter = ',')]
    pub task: Vec<u32>,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Random subset size per set.
    #[arg(long)]
    pub sample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DeriveMetricsArgs {
    #[arg(long, default_value_t = 0.1)]
    pub pause_speed: f64,
    #[arg(long, default_value_t = 3.0)]
    pub pause_min: f64,
}

#[derive(Debug, Args)]
pub struct EstimateChoiceArgs {
    /// Family when no --spec is given.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub terms: Vec<String>,
    #[arg(long, default_value = wayfind::optimize::DEFAULT_MAXIMIZER)]
    pub maximizer: String,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SearchChoiceArgs {
    #[arg(long, default_value = "psl")]
    pub family: String,
    /// `infra` or `both`.
    #[arg(long, default_value = "infra")]
    pub phase: String,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub personal: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_t: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_chi2: f64,
    #[arg(long, default_value_t = 8)]
    pub max_stage: usize,
    /// Test extensions against every proper subset model.
    #[arg(long)]
    pub powerset: bool,
}

#[derive(Debug, Args)]
pub struct EstimateMlrArgs {
    /// Dependent variable; every behavior column present when absent.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Extra tasks as `A,B`; needed for file networks.
    #[arg(long)]
    pub od: Vec<String>,
    #[arg(long)]
    pub no_trajectories: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenRoutes(_) => "gen-routes",
            Command::Features => "features",
            Command::DeriveMetrics(_) => "derive-metrics",
            Command::EstimateChoice(_) => "estimate-choice",
            Command::SearchChoice(_) => "search-choice",
            Command::EstimateMlr(_) => "estimate-mlr",
            Command::Correlate(_) => "correlate",
            Command::Simulate(_) => "simulate",
            Command::Report => "report",
        }
    }
}

/// Default route variables searched by `search-choice`.
pub const DEFAULT_ROUTE_CANDIDATES: [&str; 12] = [
    "distot",
    "dist_firstturn",
    "dist_avg_straight",
    "dist_longeststretch",
    "turns_tot",
    "rot_abs",
    "ratio_wide",
    "window",
    "firedoor",
    "floorsigns",
    "level_no",
    "stairs_no",
];

/// Default person variables for interaction terms.
pub const DEFAULT_PERSONAL_CANDIDATES: [&str; 6] = [
    "age_young",
    "age_old",
    "gender",
    "familiar",
    "gaming_often",
    "orientation_bad",
];

/// Record written next to every output file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    /// SHA-256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file.
    pub outputs: BTreeMap<String, String>,
}

/// One produced file, relative to the output directory for directory
/// outputs.
struct Artifact {
    path: Option<PathBuf>,
    bytes: Vec<u8>,
}

struct Ctx {
    common: Common,
    inputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Ctx {
    fn read(&mut self, path: &Path) -> CliResult<String> {
        let bytes = fs::read(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|e| CliError::Input {
            path: path.display().to_string(),
            source: wayfind::Error::Parse(e.to_string()),
        })
    }

    fn parse<T>(
        &mut self,
        path: &Path,
        f: impl FnOnce(&str) -> wayfind::Result<T>,
    ) -> CliResult<T> {
        let text = self.read(path)?;
        f(&text).map_err(|e| CliError::Input {
            path: path.display().to_string(),
            source: e,
        })
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> CliResult<T> {
        self.parse(path, |t| {
            serde_json::from_str(t).map_err(wayfind::Error::from)
        })
    }

    fn format(&self, allowed: &[Format], default: Format) -> CliResult<Format> {
        let f = self.common.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(CliError::Usage(format!(
                "--format {f:?} is not supported here (use one of {allowed:?})"
            )))
        }
    }

    fn one_input(&self, what: &str) -> CliResult<PathBuf> {
        match self.common.data.as_slice() {
            [p] => Ok(p.clone()),
            [] => Err(CliError::Usage(format!("--data <{what}> is required"))),
            _ => Err(CliError::Usage(format!(
                "expected one --data file ({what})"
            ))),
        }
    }

    fn network(&mut self) -> CliResult<(Network, BTreeMap<u32, (String, String)>)> {
        let spec = self
            .common
            .network
            .clone()
            .ok_or_else(|| CliError::Usage("--network is required".into()))?;
        match spec.as_str() {
            "builtin:replica" => Ok((replica_building(), replica_tasks())),
            "builtin:desk" => Ok((desk_network(), desk_tasks())),
            s if s.starts_with("builtin:") => Err(CliError::Usage(format!(
                "unknown builtin network `{s}` (available: builtin:replica, builtin:desk)"
            ))),
            path => {
                let strict = self.common.strict;
                let net = self.parse(Path::new(path), |t| Network::from_json(t, strict))?;
                Ok((net, BTreeMap::new()))
            }
        }
    }

    /// Reads every --data table and joins them on (participant, task).
    fn joined_table(&mut self) -> CliResult<NumericTable> {
        let paths = self.common.data.clone();
        if paths.is_empty() {
            return Err(CliError::Usage("--data <table.csv> is required".into()));
        }
        let mut table: Option<NumericTable> = None;
        for p in &paths {
            let t = self.parse(p, NumericTable::from_csv)?;
            table = Some(match table {
                None => t,
                Some(acc) => acc.join(&t)?,
            });
        }
        Ok(table.unwrap())
    }
}

fn parse_od(s: &str) -> CliResult<(String, String)> {
    match s.split_once(',') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
            Ok((a.trim().to_string(), b.trim().to_string()))
        }
        _ => Err(CliError::Usage(format!(
            "--od expects `ORIGIN,DESTINATION`, got `{s}`"
        ))),
    }
}

fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn table_json(t: &NumericTable) -> Value {
    let rows: Vec<Value> = t
        .keys
        .iter()
        .zip(&t.rows)
        .map(|((p, task), row)| {
            let mut m = serde_json::Map::new();
            m.insert("participant".into(), json!(p));
            m.insert("task".into(), json!(task));
            for (c, v) in t.columns.iter().zip(row) {
                m.insert(c.clone(), json!(v));
            }
            Value::Object(m)
        })
        .collect();
    Value::Array(rows)
}

fn single(bytes: Vec<u8>) -> Vec<Artifact> {
    vec![Artifact { path: None, bytes }]
}

fn gen_routes(ctx: &mut Ctx, a: &GenRoutesArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Json, Format::Csv], Format::Json)?;
    let (net, tasks) = ctx.network()?;
    let jobs: Vec<(u32, (String, String))> = match &a.od {
        Some(od) => vec![(a.task.first().copied().unwrap_or(1), parse_od(od)?)],
        None if tasks.is_empty() => {
            return Err(CliError::Usage("--od is required for file networks".into()))
        }
        None if a.task.is_empty() => tasks.into_iter().collect(),
        None => a
            .task
            .iter()
            .map(|t| {
                tasks
                    .get(t)
                    .cloned()
                    .map(|od| (*t, od))
                    .ok_or_else(|| CliError::Usage(format!("unknown task {t}")))
            })
            .collect::<CliResult<_>>()?,
    };
    let seed = ctx.common.seed.unwrap_or(1);
    let mut files = Vec::new();
    for (task, (o, d)) in jobs {
        let full = bfs_le(&net, (&o, &d), a.depth)?;
        let generated = full.len();
        let set = match a.sample {
            Some(k) => sample_routes(&full, k, seed, task)?,
            None => full,
        };
        log::info!(
            "task {task}: {generated} routes generated, {} kept",
            set.len()
        );
        files.push(RouteSetFile::new(&set, task, generated));
    }
    let bytes = match fmt {
        Format::Json => to_json_bytes(&files),
        _ => {
            let mut s = String::from("task,route,total_length_cm,path_size,links\n");
            for f in &files {
                for (i, r) in f.routes.iter().enumerate() {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        f.task,
                        i,
                        f.total_length_cm[i],
                        f.path_sizes[i],
                        r.join(" ")
                    ));
                }
            }
            s.into_bytes()
        }
    };
    Ok(single(bytes))
}

fn features(ctx: &mut Ctx) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Csv, Format::Json], Format::Csv)?;
    let (net, _) = ctx.network()?;
    let path = ctx.one_input("trips.json")?;
    let trips: Vec<Trip> = ctx.json(&path)?;
    let table = feature_table(&net, &trips)?;
    Ok(single(match fmt {
        Format::Csv => table.to_csv().into_bytes(),
        _ => to_json_bytes(&table_json(&table)),
    }))
}

/// Parses `p<participant>_t<task>` file stems.
fn trip_key(path: &Path) -> Option<(u32, u32)> {
    let stem = path.file_stem()?.to_str()?;
    let (p, t) = stem.strip_prefix('p')?.split_once("_t")?;
    Some((p.parse().ok()?, t.parse().ok()?))
}

fn trajectory_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| CliError::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            for e in entries.flatten() {
                let path = e.path();
                if path.extension().is_some_and(|x| x == "csv") {
                    out.push(path);
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    Ok(out)
}

fn derive_metrics(ctx: &mut Ctx, a: &DeriveMetricsArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Csv, Format::Json], Format::Csv)?;
    if ctx.common.data.is_empty() {
        return Err(CliError::Usage(
            "--data <trajectory dir or files> is required".into(),
        ));
    }
    let rule = PauseRule {
        v_pause_mps: a.pause_speed,
        min_duration_s: a.pause_min,
    };
    let mut rows: Vec<((u32, u32), Vec<f64>)> = Vec::new();
    for path in trajectory_files(&ctx.common.data.clone())? {
        let key = trip_key(&path).ok_or_else(|| {
            CliError::Usage(format!(
                "{}: trajectory files must be named p<participant>_t<task>.csv",
                path.display()
            ))
        })?;
        let traj = ctx.parse(&path, Trajectory::from_csv)?;
        let m = BehaviorMetrics::derive(&traj, rule).map_err(|e| CliError::Input {
            path: path.display().to_string(),
            source: e,
        })?;
        rows.push((key, m.values().to_vec()));
    }
    if rows.is_empty() {
        return Err(CliError::Model(wayfind::Error::EmptyInput(
            "trajectory files",
        )));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let table = NumericTable {
        columns: BehaviorMetrics::NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        keys: rows.iter().map(|r| r.0).collect(),
        rows: rows.into_iter().map(|r| r.1).collect(),
    };
    Ok(single(match fmt {
        Format::Csv => table.to_csv().into_bytes(),
        _ => to_json_bytes(&table_json(&table)),
    }))
}

/// Estimation output file: every result field plus the rendered table.
#[derive(Debug, Serialize, Deserialize)]
pub struct EstimationFile {
    #[serde(flatten)]
    pub result: EstimationResult,
    pub table_markdown: String,
}

fn model_label(r: &EstimationResult) -> String {
    r.spec.family.to_ascii_uppercase()
}

fn estimate_choice(ctx: &mut Ctx, a: &EstimateChoiceArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Json, Format::Md], Format::Json)?;
    let spec = match (&ctx.common.spec.clone(), &a.family) {
        (Some(p), None) if a.terms.is_empty() => ctx.parse(p, ModelSpec::from_json)?,
        (None, Some(f)) => ModelSpec {
            family: f.clone(),
            terms: a.terms.clone(),
            interactions: Vec::new(),
        },
        _ => {
            return Err(CliError::Usage(
                "give either --spec <file> or --family with --terms".into(),
            ))
        }
    };
    let path = ctx.one_input("observations.json")?;
    let data = ctx.parse(&path, observations_from_json)?;
    let opts = EstimateOptions {
        max_iter: a.max_iter,
        maximizer: a.maximizer.clone(),
        ..Default::default()
    };
    let result = estimate(&spec, &data, &opts)?;
    if !result.converged {
        log::warn!(
            "estimation did not converge after {} iterations",
            result.iterations
        );
    }
    let md = discrete_choice::results_markdown(&[(model_label(&result), &result)]);
    Ok(single(match fmt {
        Format::Json => to_json_bytes(&EstimationFile {
            result,
            table_markdown: md,
        }),
        _ => md.into_bytes(),
    }))
}

fn names(list: &[String], default: &[&str]) -> Vec<String> {
    if list.is_empty() {
        default.iter().map(|s| s.to_string()).collect()
    } else {
        list.to_vec()
    }
}

fn search_markdown(trace: &SearchTrace) -> String {
    let mut s = String::from("| Rank (BIC) | Rank (AIC) | Terms | Log-likelihood | AIC | BIC |\n");
    s.push_str("|---:|---:|---|---:|---:|---:|\n");
    for r in &trace.ranking {
        s.push_str(&format!(
            "| {} | {} | {} | {:.2} | {:.1} | {:.1} |\n",
            r.rank_bic,
            r.rank_aic,
            r.terms.join(", "),
            r.log_likelihood,
            r.aic,
            r.bic
        ));
    }
    if let Some(d) = &trace.diagnostic {
        s.push_str(&format!("\n{d}\n"));
    }
    let mut models = Vec::new();
    if let Some(b) = &trace.best_infra {
        models.push((format!("{} infra", model_label(b)), b));
    }
    if let Some(b) = &trace.best {
        if Some(b) != trace.best_infra.as_ref() {
            models.push((format!("{} best", model_label(b)), b));
        }
    }
    if !models.is_empty() {
        s.push('\n');
        s.push_str(&discrete_choice::results_markdown(&models));
    }
    s
}

fn search_choice(ctx: &mut Ctx, a: &SearchChoiceArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Json, Format::Md], Format::Json)?;
    let phases: SearchPhases = a
        .phase
        .parse()
        .map_err(|e: wayfind::Error| CliError::Usage(e.to_string()))?;
    let path = ctx.one_input("observations.json")?;
    let data = ctx.parse(&path, observations_from_json)?;
    let config = SearchConfig {
        route_candidates: names(&a.candidates, &DEFAULT_ROUTE_CANDIDATES),
        personal_candidates: names(&a.personal, &DEFAULT_PERSONAL_CANDIDATES),
        alpha_t: a.alpha_t,
        alpha_chi2: a.alpha_chi2,
        max_stage: a.max_stage,
        powerset_lrt: a.powerset,
        estimate: EstimateOptions::default(),
    };
    let trace = stepwise_search(&config, &data, &a.family, phases)?;
    Ok(single(match fmt {
        Format::Json => to_json_bytes(&trace),
        _ => search_markdown(&trace).into_bytes(),
    }))
}

fn estimate_mlr(ctx: &mut Ctx, a: &EstimateMlrArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Json, Format::Md], Format::Json)?;
    let table = ctx.joined_table()?;
    let responses: Vec<String> = match &a.response {
        Some(r) => vec![r.clone()],
        None => BEHAVIORS
            .iter()
            .filter(|b| match table.column(b) {
                Some(v) if is_constant(&v) => {
                    log::warn!("skipping constant response `{b}`");
                    false
                }
                Some(_) => true,
                None => false,
            })
            .map(|s| s.to_string())
            .collect(),
    };
    if responses.is_empty() {
        return Err(CliError::Model(wayfind::Error::UnknownVariable(
            BEHAVIORS.join("|"),
        )));
    }
    let config = ThreeModelConfig {
        alpha_remove: a.alpha,
        ..Default::default()
    };
    let results: Vec<ThreeModels> = responses
        .iter()
        .map(|r| run_three_models(&table, r, &config))
        .collect::<wayfind::Result<_>>()?;
    Ok(single(match fmt {
        Format::Json => to_json_bytes(&results),
        _ => mlr_markdown(&results).into_bytes(),
    }))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

fn mlr_markdown(results: &[ThreeModels]) -> String {
    results
        .iter()
        .map(regression::three_models_markdown)
        .collect::<Vec<_>>()
        .join("\n")
}

fn correlate(ctx: &mut Ctx, a: &CorrelateArgs) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Csv, Format::Md, Format::Json], Format::Csv)?;
    let table = ctx.joined_table()?;
    let cols = if a.columns.is_empty() {
        table
            .columns
            .iter()
            .filter(|c| {
                let constant = table.column(c).is_some_and(|v| is_constant(&v));
                if constant {
                    log::warn!("skipping constant column `{c}`");
                }
                !constant
            })
            .cloned()
            .collect()
    } else {
        a.columns.clone()
    };
    let columns: Vec<(String, Vec<f64>)> = cols
        .iter()
        .map(|c| {
            table
                .column(c)
                .map(|v| (c.clone(), v))
                .ok_or_else(|| wayfind::Error::UnknownVariable(c.clone()))
        })
        .collect::<wayfind::Result<_>>()?;
    let m = correlation_matrix(&columns)?;
    Ok(single(match fmt {
        Format::Csv => m.to_csv().into_bytes(),
        Format::Md => m.to_markdown().into_bytes(),
        Format::Json => to_json_bytes(&m),
    }))
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> CliResult<Vec<Artifact>> {
    if ctx.common.out.is_none() {
        return Err(CliError::Usage("simulate needs --out <directory>".into()));
    }
    let (net, mut tasks) = ctx.network()?;
    let next = tasks.keys().max().copied().unwrap_or(0);
    for (i, od) in a.od.iter().enumerate() {
        tasks.insert(next + 1 + i as u32, parse_od(od)?);
    }
    if tasks.is_empty() {
        return Err(CliError::Usage("--od is required for file networks".into()));
    }
    let mut config: GenerativeConfig = match ctx.common.spec.clone() {
        Some(p) => ctx.json(&p)?,
        None => GenerativeConfig::default(),
    };
    if let Some(s) = ctx.common.seed {
        config.seed = s;
    }
    let obs = simulate_choices(&net, &tasks, &config)?;
    let trips: Vec<Trip> = obs
        .iter()
        .map(|o| Trip {
            participant: o.participant,
            task: o.task,
            route: o.routes[o.chosen_index].clone(),
            profile: o.profile,
        })
        .collect();
    let mut files = vec![
        Artifact {
            path: Some("config.json".into()),
            bytes: to_json_bytes(&config),
        },
        Artifact {
            path: Some("observations.json".into()),
            bytes: to_json_bytes(&obs),
        },
        Artifact {
            path: Some("trips.json".into()),
            bytes: to_json_bytes(&trips),
        },
    ];
    if !a.no_trajectories {
        use rayon::prelude::*;
        let trajs: Vec<wayfind::Result<Artifact>> = trips
            .par_iter()
            .map(|t| {
                let route = wayfind::routeset::Route::from_ids(&net, &t.route)?;
                let seed = trajectory_seed(config.seed, t.participant, t.task);
                let traj = simulate_trajectory(&route, &net, &config.trajectory, seed)?;
                Ok(Artifact {
                    path: Some(
                        Path::new("trajectories")
                            .join(format!("p{}_t{}.csv", t.participant, t.task)),
                    ),
                    bytes: traj.to_csv().into_bytes(),
                })
            })
            .collect();
        for t in trajs {
            files.push(t?);
        }
    }
    Ok(files)
}

#[derive(Debug, Serialize)]
struct ReportModel {
    label: String,
    source: String,
    result: EstimationResult,
}

fn report(ctx: &mut Ctx) -> CliResult<Vec<Artifact>> {
    let fmt = ctx.format(&[Format::Md, Format::Json], Format::Md)?;
    if ctx.common.data.is_empty() {
        return Err(CliError::Usage("--data <result.json> is required".into()));
    }
    let mut choice: Vec<ReportModel> = Vec::new();
    let mut mlr: Vec<ThreeModels> = Vec::new();
    for path in ctx.common.data.clone() {
        let v: Value = ctx.json(&path)?;
        let source = path.display().to_string();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model")
            .to_string();
        let bad = |e: serde_json::Error| CliError::Input {
            path: source.clone(),
            source: e.into(),
        };
        if v.get("stages").is_some() {
            let trace: SearchTrace = serde_json::from_value(v).map_err(bad)?;
            for (suffix, m) in [("infra", &trace.best_infra), ("best", &trace.best)] {
                if let Some(r) = m {
                    if suffix == "best" && trace.best == trace.best_infra {
                        continue;
                    }
                    choice.push(ReportModel {
                        label: format!("{} {suffix}", model_label(r)),
                        source: source.clone(),
                        result: r.clone(),
                    });
                }
            }
        } else if v.is_array() {
            mlr.extend(serde_json::from_value::<Vec<ThreeModels>>(v).map_err(bad)?);
        } else {
            let result: EstimationResult = serde_json::from_value(v).map_err(bad)?;
            choice.push(ReportModel {
                label: stem,
                source: source.clone(),
                result,
            });
        }
    }
    let bytes = match fmt {
        Format::Json => to_json_bytes(&json!({
            "converged": choice.iter().all(|m| m.result.converged),
            "choice_models": choice,
            "regression_models": mlr,
        })),
        _ => {
            let mut s = String::new();
            if !choice.is_empty() {
                s.push_str("## Route choice models\n\n");
                let models: Vec<(String, &EstimationResult)> = choice
                    .iter()
                    .map(|m| (m.label.clone(), &m.result))
                    .collect();
                s.push_str(&discrete_choice::results_markdown(&models));
            }
            if !mlr.is_empty() {
                if !s.is_empty() {
                    s.push('\n');
                }
                s.push_str("## Regression models\n\n");
                s.push_str(&mlr_markdown(&mlr));
            }
            s.into_bytes()
        }
    };
    Ok(single(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Manifest location for an output: `<out>.manifest.json`, or
/// `manifest.json` inside an output directory.
pub fn manifest_path(out: &Path, directory: bool) -> PathBuf {
    if directory {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

fn execute(cli: Cli, args: Vec<String>) -> CliResult<()> {
    let mut ctx = Ctx {
        common: cli.common.clone(),
        inputs: BTreeMap::new(),
    };
    let artifacts = match &cli.command {
        Command::GenRoutes(a) => gen_routes(&mut ctx, a)?,
        Command::Features => features(&mut ctx)?,
        Command::DeriveMetrics(a) => derive_metrics(&mut ctx, a)?,
        Command::EstimateChoice(a) => estimate_choice(&mut ctx, a)?,
        Command::SearchChoice(a) => search_choice(&mut ctx, a)?,
        Command::EstimateMlr(a) => estimate_mlr(&mut ctx, a)?,
        Command::Correlate(a) => correlate(&mut ctx, a)?,
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::Report => report(&mut ctx)?,
    };
    let Some(out) = ctx.common.out.clone() else {
        use std::io::Write;
        let mut stdout = std::io::stdout().lock();
        for a in &artifacts {
            stdout.write_all(&a.bytes).map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        }
        return Ok(());
    };
    let directory = matches!(cli.command, Command::Simulate(_));
    let mut outputs = BTreeMap::new();
    for a in &artifacts {
        let path = match (&a.path, directory) {
            (Some(rel), true) => out.join(rel),
            _ => out.clone(),
        };
        write_file(&path, &a.bytes)?;
        outputs.insert(path.display().to_string(), sha256_hex(&a.bytes));
    }
    let manifest = RunManifest {
        tool: "wayfind".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cli.command.name().into(),
        args,
        seed: ctx.common.seed,
        inputs: ctx.inputs,
        outputs,
    };
    write_file(&manifest_path(&out, directory), &to_json_bytes(&manifest))
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let jobs = cli.common.jobs;
    let result = match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli, args)),
            Err(e) => Err(CliError::Usage(e.to_string())),
        },
        None => execute(cli, args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Initializes logging from `WAYFIND_LOG` (default `warn`).
pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("WAYFIND_LOG", "warn"))
        .try_init();
}
