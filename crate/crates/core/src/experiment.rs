//! Seeded batch runs: every method on every (trajectory, seed, K), scored,
//! certified and evaluated with the MLE, then aggregated and written out.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{even_select, random_select, ManualPresets};
use crate::error::{Error, Result};
use crate::fisher::build_candidate_infos;
use crate::objective::{Objective, SelectionVector};
use crate::rng::run_seed;
use crate::scenario::{Scenario, ScenarioConfig, TrajectoryKind, PRESET_NAMES};
use crate::slam_eval::{evaluate_design, MleSettings};
use crate::solvers::{certify, frank_wolfe, greedy_select_traced, kmax_round, FwSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    /// K-max rounding of the final Frank-Wolfe iterate.
    Rounded,
    Random,
    Even,
    Manual,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Greedy,
        Method::Rounded,
        Method::Random,
        Method::Even,
        Method::Manual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Rounded => "rounded",
            Method::Random => "random",
            Method::Even => "even",
            Method::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Batch description, usually read from TOML.
///
/// `scenario` is a preset name or a path to a scenario TOML file. An empty
/// `trajectories` list runs the scenario's own trajectory kind only.
/// `workers = 0` uses every core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub trajectories: Vec<TrajectoryKind>,
    pub k_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub num_seeds: usize,
    pub root_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub evaluate_rmse: bool,
    /// Replaces the built-in manual presets.
    pub manual_presets: Option<PathBuf>,
    pub fw: FwSettings,
    pub mle: MleSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            trajectories: Vec::new(),
            k_values: vec![2, 3, 4, 5, 6],
            methods: vec![Method::Greedy, Method::Random, Method::Even, Method::Manual],
            num_seeds: 50,
            root_seed: 0,
            workers: 0,
            output_dir: PathBuf::from("results"),
            evaluate_rmse: true,
            manual_presets: None,
            fw: FwSettings::default(),
            mle: MleSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::format(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        if !PRESET_NAMES.contains(&cfg.scenario.as_str()) && Path::new(&cfg.scenario).is_relative() {
            cfg.scenario = base.join(&cfg.scenario).to_string_lossy().into_owned();
        }
        if let Some(p) = &cfg.manual_presets {
            if p.is_relative() {
                cfg.manual_presets = Some(base.join(p));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("experiment config serializes")
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        if PRESET_NAMES.contains(&self.scenario.as_str()) {
            ScenarioConfig::preset(&self.scenario)
        } else {
            ScenarioConfig::load(Path::new(&self.scenario))
        }
    }

    pub fn presets(&self) -> Result<ManualPresets> {
        match &self.manual_presets {
            Some(p) => ManualPresets::load(p),
            None => Ok(ManualPresets::builtin()),
        }
    }

    /// Checks the config against a candidate pool of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        if self.k_values.is_empty() {
            return Err(Error::Config("k_values list is empty".into()));
        }
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be positive".into()));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::Config(format!("K = {k} outside 1..={n}")));
        }
        if !(self.fw.gap_tol > 0.0) {
            return Err(Error::Config("fw.gap_tol must be positive".into()));
        }
        Ok(())
    }

    fn trajectory_kinds(&self, base: &ScenarioConfig) -> Vec<TrajectoryKind> {
        if self.trajectories.is_empty() {
            vec![base.trajectory.kind]
        } else {
            self.trajectories.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One (trajectory, seed, K, method) result. Field order is the CSV column
/// order; the three `*_time_s` columns come last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub trajectory: TrajectoryKind,
    pub seed_index: usize,
    pub seed: u64,
    pub k: usize,
    pub method: Method,
    pub scenario_hash: String,
    pub status: RowStatus,
    pub error: String,
    /// Selected candidate ids joined with `;`.
    pub selected: String,
    pub score: Option<f64>,
    pub rmse: Option<f64>,
    pub mle_converged: Option<bool>,
    pub mle_iterations: Option<usize>,
    pub upper_bound: Option<f64>,
    pub relative_gap: Option<f64>,
    pub fw_iterations: Option<usize>,
    pub fw_gap: Option<f64>,
    pub fw_converged: Option<bool>,
    pub rounded_score: Option<f64>,
    pub select_time_s: f64,
    pub fw_time_s: Option<f64>,
    pub mle_time_s: Option<f64>,
}

pub const CSV_COLUMNS: &[&str] = &[
    "trajectory",
    "seed_index",
    "seed",
    "k",
    "method",
    "scenario_hash",
    "status",
    "error",
    "selected",
    "score",
    "rmse",
    "mle_converged",
    "mle_iterations",
    "upper_bound",
    "relative_gap",
    "fw_iterations",
    "fw_gap",
    "fw_converged",
    "rounded_score",
    "select_time_s",
    "fw_time_s",
    "mle_time_s",
];

pub const TIMING_COLUMNS: usize = 3;

impl EvalRow {
    fn new(traj: TrajectoryKind, seed_index: usize, seed: u64, k: usize, method: Method) -> Self {
        Self {
            trajectory: traj,
            seed_index,
            seed,
            k,
            method,
            scenario_hash: String::new(),
            status: RowStatus::Ok,
            error: String::new(),
            selected: String::new(),
            score: None,
            rmse: None,
            mle_converged: None,
            mle_iterations: None,
            upper_bound: None,
            relative_gap: None,
            fw_iterations: None,
            fw_gap: None,
            fw_converged: None,
            rounded_score: None,
            select_time_s: 0.0,
            fw_time_s: None,
            mle_time_s: None,
        }
    }

    fn fail(&mut self, reason: impl fmt::Display) {
        self.status = RowStatus::Failed;
        if !self.error.is_empty() {
            self.error.push_str("; ");
        }
        self.error.push_str(&reason.to_string());
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn selected_ids(&self) -> Vec<usize> {
        self.selected
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("selected ids are integers"))
            .collect()
    }

    fn sort_key(&self) -> (TrajectoryKind, usize, usize, Method) {
        (self.trajectory, self.seed_index, self.k, self.method)
    }
}

fn join_ids(s: &SelectionVector) -> String {
    s.ids().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Runs the whole batch on `config.workers` threads. Rows come back in
/// canonical order (trajectory, seed, K, method).
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    let base = config.scenario_config()?;
    let presets = config.presets()?;
    let n = crate::scenario::generate_candidate_grid(&base.candidates.frame, &base.intrinsics()?)?.len();
    config.validate(n)?;

    let jobs: Vec<(TrajectoryKind, usize)> = config
        .trajectory_kinds(&base)
        .into_iter()
        .flat_map(|t| (0..config.num_seeds).map(move |i| (t, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<EvalRow> = pool.install(|| {
        jobs.par_iter()
            .flat_map_iter(|&(traj, idx)| run_job(config, &base, &presets, traj, idx))
            .collect()
    });
    rows.sort_by_key(|r| r.sort_key());
    Ok(EvalReport {
        config: config.clone(),
        rows,
    })
}

/// All rows of one scenario. Never fails: every error becomes a failed row.
fn run_job(
    config: &ExperimentConfig,
    base: &ScenarioConfig,
    presets: &ManualPresets,
    traj: TrajectoryKind,
    idx: usize,
) -> Vec<EvalRow> {
    let seed = run_seed(config.root_seed, idx as u64);
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.trajectory.kind = traj;
    let blank = |k, m| EvalRow::new(traj, idx, seed, k, m);

    let prepared = Scenario::generate(&cfg).and_then(|sc| {
        let infos = build_candidate_infos(&sc)?;
        Ok((sc, infos))
    });
    let (sc, infos) = match prepared {
        Ok(p) => p,
        Err(e) => {
            return config
                .k_values
                .iter()
                .flat_map(|&k| config.methods.iter().map(move |&m| (k, m)))
                .map(|(k, m)| {
                    let mut r = blank(k, m);
                    r.fail(format!("scenario: {e}"));
                    r
                })
                .collect();
        }
    };
    let hash = sc.hash();
    let obj = Objective::new(&infos);
    let n = sc.num_candidates();

    let mut rows = Vec::new();
    for &k in &config.k_values {
        let needs_relaxation = config
            .methods
            .iter()
            .any(|m| matches!(m, Method::Greedy | Method::Rounded));
        let relaxation = needs_relaxation.then(|| {
            let t = Instant::now();
            let fw = frank_wolfe(&obj, k, None, &config.fw);
            (fw, t.elapsed().as_secs_f64())
        });
        for &method in &config.methods {
            let mut row = blank(k, method);
            row.scenario_hash = hash.clone();
            let t = Instant::now();
            let selection: Result<SelectionVector> = match method {
                Method::Greedy => greedy_select_traced(&obj, k, true).map(|g| g.selection),
                Method::Rounded => match &relaxation {
                    Some((Ok(fw), _)) => Ok(kmax_round(&fw.weights, k)),
                    Some((Err(e), _)) => Err(Error::Config(format!("relaxation: {e}"))),
                    None => unreachable!("relaxation computed when rounded is requested"),
                },
                Method::Random => random_select(n, k, seed),
                Method::Even => match &sc.frame {
                    Some(frame) => even_select(&sc.candidates, frame, k),
                    None => Err(Error::invalid("even baseline needs a frame description")),
                },
                Method::Manual => presets.select(&sc.layout_name, n, k),
            };
            row.select_time_s = t.elapsed().as_secs_f64();
            let s = match selection {
                Ok(s) => s,
                Err(e) => {
                    row.fail(format!("selection: {e}"));
                    rows.push(row);
                    continue;
                }
            };
            row.selected = join_ids(&s);
            match obj.value_of(&s) {
                Ok(v) => row.score = Some(v),
                Err(e) => row.fail(format!("score: {e}")),
            }

            let certified = matches!(method, Method::Greedy | Method::Rounded);
            match (&relaxation, certified) {
                (Some((Ok(fw), fw_time)), true) => {
                    row.upper_bound = Some(fw.upper_bound);
                    row.fw_iterations = Some(fw.iterations);
                    row.fw_gap = Some(fw.gap);
                    row.fw_converged = Some(fw.converged);
                    row.fw_time_s = Some(*fw_time);
                    match obj.value_of(&kmax_round(&fw.weights, k)) {
                        Ok(rv) => {
                            row.rounded_score = Some(rv);
                            if let (Method::Greedy, Some(v)) = (method, row.score) {
                                row.relative_gap = Some(certify(v, fw, rv).relative_gap);
                            }
                        }
                        Err(e) => row.fail(format!("rounded score: {e}")),
                    }
                }
                (Some((Err(e), _)), true) if method == Method::Greedy => row.fail(format!("relaxation: {e}")),
                _ => {}
            }

            if config.evaluate_rmse {
                let t = Instant::now();
                match evaluate_design(&sc, &s, &config.mle, seed) {
                    Ok((sol, rmse)) => {
                        row.rmse = Some(rmse);
                        row.mle_converged = Some(sol.converged);
                        row.mle_iterations = Some(sol.iterations);
                    }
                    Err(e) => row.fail(format!("mle: {e}")),
                }
                row.mle_time_s = Some(t.elapsed().as_secs_f64());
            }
            rows.push(row);
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// aggregation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut values = values.to_vec();
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            n,
            median: median(&values),
            mean,
            std,
        })
    }
}

/// Median with the midpoint average for even counts; `total_cmp` order.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub trajectory: TrajectoryKind,
    pub k: usize,
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub score: Option<Stats>,
    pub rmse: Option<Stats>,
    /// Relative certificate gap of greedy rows.
    pub gamma: Option<Stats>,
    /// Fraction of greedy rows with gap at most 2%.
    pub gamma_within_2pct: Option<f64>,
    pub rounded_score: Option<Stats>,
}

/// Per (trajectory, K, method) statistics over successful rows.
pub fn aggregate(report: &EvalReport) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(TrajectoryKind, usize, Method), Vec<&EvalRow>> = BTreeMap::new();
    for r in &report.rows {
        groups.entry((r.trajectory, r.k, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((trajectory, k, method), rows)| {
            let ok: Vec<&EvalRow> = rows.iter().copied().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&EvalRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let gammas = col(|r| r.relative_gap);
            SummaryRow {
                trajectory,
                k,
                method,
                runs: rows.len(),
                failures: rows.len() - ok.len(),
                score: Stats::of(&col(|r| r.score)),
                rmse: Stats::of(&col(|r| r.rmse)),
                gamma: Stats::of(&gammas),
                gamma_within_2pct: (!gammas.is_empty())
                    .then(|| gammas.iter().filter(|&&g| g <= 0.02).count() as f64 / gammas.len() as f64),
                rounded_score: Stats::of(&col(|r| r.rounded_score)),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// emission

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot_long.csv";
pub const SCATTER_FILE: &str = "scatter.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
    pub scatter: PathBuf,
}

pub fn rows_to_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_rows(path: &Path) -> Result<Vec<EvalRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    rows_from_csv(&text).map_err(|e| Error::format(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

#[derive(Serialize)]
struct CertificateEntry<'a> {
    trajectory: TrajectoryKind,
    seed_index: usize,
    k: usize,
    scenario_hash: &'a str,
    greedy_score: Option<f64>,
    upper_bound: Option<f64>,
    relative_gap: Option<f64>,
    rounded_score: Option<f64>,
    fw_iterations: Option<usize>,
    fw_gap: Option<f64>,
    fw_converged: Option<bool>,
}

#[derive(Serialize)]
struct FailureEntry<'a> {
    trajectory: TrajectoryKind,
    seed_index: usize,
    k: usize,
    method: Method,
    reason: &'a str,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    rows: usize,
    failures: usize,
    summary: &'a [SummaryRow],
    certificates: Vec<CertificateEntry<'a>>,
    failed_rows: Vec<FailureEntry<'a>>,
}

/// Long-format statistics: one line per (trajectory, K, method, metric,
/// statistic).
pub fn plot_csv(summary: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trajectory", "k", "method", "metric", "statistic", "value", "n"])
        .map_err(csv_err)?;
    for s in summary {
        for (metric, stats) in [("score", s.score), ("rmse", s.rmse), ("gamma", s.gamma), ("rounded_score", s.rounded_score)] {
            let Some(st) = stats else { continue };
            for (stat, v) in [("median", st.median), ("mean", st.mean), ("std", st.std)] {
                w.write_record([
                    s.trajectory.to_string(),
                    s.k.to_string(),
                    s.method.to_string(),
                    metric.to_string(),
                    stat.to_string(),
                    v.to_string(),
                    st.n.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Score against RMSE, one line per row of the report.
pub fn scatter_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trajectory", "seed_index", "k", "method", "score", "rmse"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.trajectory.to_string(),
            r.seed_index.to_string(),
            r.k.to_string(),
            r.method.to_string(),
            opt(r.score),
            opt(r.rmse),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_json(report: &EvalReport, summary: &[SummaryRow]) -> String {
    let file = SummaryFile {
        config: &report.config,
        rows: report.rows.len(),
        failures: report.failures(),
        summary,
        certificates: report
            .rows
            .iter()
            .filter(|r| r.method == Method::Greedy && r.upper_bound.is_some())
            .map(|r| CertificateEntry {
                trajectory: r.trajectory,
                seed_index: r.seed_index,
                k: r.k,
                scenario_hash: &r.scenario_hash,
                greedy_score: r.score,
                upper_bound: r.upper_bound,
                relative_gap: r.relative_gap,
                rounded_score: r.rounded_score,
                fw_iterations: r.fw_iterations,
                fw_gap: r.fw_gap,
                fw_converged: r.fw_converged,
            })
            .collect(),
        failed_rows: report
            .rows
            .iter()
            .filter(|r| !r.is_ok())
            .map(|r| FailureEntry {
                trajectory: r.trajectory,
                seed_index: r.seed_index,
                k: r.k,
                method: r.method,
                reason: &r.error,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("summary serializes")
}

/// Writes the four result files into `dir`, creating it if needed.
pub fn emit(report: &EvalReport, summary: &[SummaryRow], dir: &Path) -> Result<EmittedFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = EmittedFiles {
        rows: dir.join(ROWS_FILE),
        summary: dir.join(SUMMARY_FILE),
        plot: dir.join(PLOT_FILE),
        scatter: dir.join(SCATTER_FILE),
    };
    let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&files.rows, rows_to_csv(&report.rows)?)?;
    write(&files.summary, summary_json(report, summary))?;
    write(&files.plot, plot_csv(summary)?)?;
    write(&files.scatter, scatter_csv(&report.rows)?)?;
    Ok(files)
}
