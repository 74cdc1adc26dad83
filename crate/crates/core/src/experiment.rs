//! Seeded scenarios, user-count sweeps and exact-versus-heuristic gaps, with
//! CSV metrics output.
//!
//! Scenario configs are JSON. Every field has a default, so `{}` is the
//! default scenario and a config only needs the keys it changes:
//!
//! ```json
//! { "id": "tight", "algorithm": "cpvnf", "seeds": [0, 1, 2],
//!   "workload": { "threshold_range": [40, 90] } }
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpvnf::{place_all, CpvnfParams};
use crate::error::{Error, Result};
use crate::exact::{solve_exact, SearchBudget};
use crate::placement::{check_feasibility, compute_metrics, PlacementSolution};
use crate::topology::{generate_topology, NodeId, Topology, TopologyGenParams};
use crate::workload::{generate_workload, Workload, WorkloadGenParams};

/// User counts swept by default.
pub const DEFAULT_USER_COUNTS: [u32; 5] = [9, 12, 15, 18, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Exact,
    Cpvnf,
    Both,
}

impl Algorithm {
    fn runs_exact(self) -> bool {
        matches!(self, Algorithm::Exact | Algorithm::Both)
    }

    fn runs_cpvnf(self) -> bool {
        matches!(self, Algorithm::Cpvnf | Algorithm::Both)
    }
}

/// Largest instance the exact solver is allowed to attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactGuard {
    pub max_surrogates: u32,
    pub max_users: u32,
    pub max_chain_length: u32,
    pub max_instances: u32,
}

impl Default for ExactGuard {
    fn default() -> Self {
        Self { max_surrogates: 5, max_users: 4, max_chain_length: 3, max_instances: 2 }
    }
}

impl ExactGuard {
    fn admits(&self, cfg: &ScenarioConfig) -> Result<()> {
        let (t, w) = (&cfg.topology, &cfg.workload);
        let checks = [
            ("surrogates", t.n_surrogates, self.max_surrogates),
            ("end-users", t.n_end_users, self.max_users),
            ("chain length", w.chain_length, self.max_chain_length),
            ("instances per type", w.max_instances, self.max_instances),
        ];
        for (what, value, limit) in checks {
            if value > limit {
                return Err(Error::InvalidParams(format!(
                    "exact-size guard: {what} = {value} exceeds the limit of {limit}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub id: String,
    pub topology: TopologyGenParams,
    pub workload: WorkloadGenParams,
    pub algorithm: Algorithm,
    pub cpvnf: CpvnfParams,
    pub budget: SearchBudget,
    pub exact_guard: ExactGuard,
    /// Each seed drives both the topology and the workload generator.
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    /// When set, every solution is written here as JSON, reloaded and
    /// re-checked before its row is emitted.
    pub solutions_dir: Option<PathBuf>,
    /// Leave the runtime column empty so reruns give identical files.
    pub record_runtime: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "default".into(),
            topology: TopologyGenParams::default(),
            workload: WorkloadGenParams::default(),
            algorithm: Algorithm::Cpvnf,
            cpvnf: CpvnfParams::default(),
            budget: SearchBudget::default(),
            exact_guard: ExactGuard::default(),
            seeds: vec![0, 1, 2],
            output: None,
            solutions_dir: None,
            record_runtime: true,
        }
    }
}

impl ScenarioConfig {
    /// Heavier VNFs, tighter delay thresholds and smaller servers.
    pub fn tight() -> Self {
        let mut cfg = Self { id: "tight".into(), ..Self::default() };
        cfg.topology.capacity_choices = vec![8, 16];
        cfg.workload.resource_range = (4, 8);
        cfg.workload.threshold_range = (40, 90);
        cfg
    }

    /// An instance small enough for the exact solver.
    pub fn tiny() -> Self {
        let mut cfg = Self { id: "tiny".into(), algorithm: Algorithm::Both, ..Self::default() };
        cfg.topology.n_surrogates = 4;
        cfg.topology.n_content_servers = 2;
        cfg.topology.n_end_users = 3;
        cfg.workload.chain_length = 2;
        cfg.workload.n_vnf_types = 3;
        cfg.workload.n_chain_templates = 2;
        cfg.workload.replication_degree = 1;
        cfg.workload.max_instances = 2;
        cfg
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::io::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(self, path.as_ref())
    }

    pub fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParams("scenario needs at least one seed".into()));
        }
        self.topology.check()?;
        self.workload.check(self.topology.n_content_servers as usize)?;
        self.cpvnf.check()?;
        if self.algorithm.runs_exact() {
            self.exact_guard.admits(self)?;
        }
        Ok(())
    }

    fn for_seed(&self, seed: u64) -> (TopologyGenParams, WorkloadGenParams) {
        let mut t = self.topology.clone();
        let mut w = self.workload.clone();
        t.seed = seed;
        w.seed = seed;
        (t, w)
    }

    fn with_users(&self, n: u32) -> Self {
        let mut cfg = self.clone();
        cfg.topology.n_end_users = n;
        cfg
    }
}

/// One CSV line: the metrics of one algorithm on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub algorithm: String,
    pub n_users: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub servers_used: usize,
    pub content_servers_used: usize,
    pub vnf_license: f64,
    pub site_license: f64,
    /// Licenses plus server usage.
    pub operational_cost: f64,
    pub communication_cost: f64,
    pub total_cost: f64,
    pub avg_response_time_ms: Option<f64>,
    pub retries_total: Option<u32>,
    pub runtime_ms: Option<f64>,
    pub proven_optimal: Option<bool>,
}

fn scenario_err(id: &str, seed: u64, e: Error) -> Error {
    Error::Scenario { id: id.to_string(), seed, source: Box::new(e) }
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    seed: u64,
}

impl Run<'_> {
    fn row(
        &self,
        algorithm: &str,
        t: &Topology,
        w: &Workload,
        solution: &PlacementSolution,
        runtime: Duration,
    ) -> Result<MetricsRow> {
        let violations = check_feasibility(solution, t, w);
        if !violations.is_empty() {
            return Err(Error::Infeasible(violations));
        }
        if let Some(dir) = &self.cfg.solutions_dir {
            audit_round_trip(
                dir,
                &format!("{}-{}-{}-{}", self.cfg.id, self.seed, w.requests.len(), algorithm),
                solution,
                t,
                w,
            )?;
        }
        let m = compute_metrics(solution, t, w, runtime)?;
        Ok(MetricsRow {
            scenario: self.cfg.id.clone(),
            seed: self.seed,
            algorithm: algorithm.into(),
            n_users: w.requests.len(),
            accepted: m.accepted,
            rejected: m.rejected,
            servers_used: m.servers_used,
            content_servers_used: m.content_servers_used,
            vnf_license: m.cost.vnf_license,
            site_license: m.cost.site_license,
            operational_cost: m.operational_cost,
            communication_cost: m.communication_cost,
            total_cost: m.total_cost,
            avg_response_time_ms: m.avg_response_time_ms,
            retries_total: None,
            runtime_ms: self.cfg.record_runtime.then_some(runtime.as_secs_f64() * 1000.0),
            proven_optimal: None,
        })
    }

    fn rows(&self, t: &Topology, w: &Workload) -> Result<Vec<MetricsRow>> {
        let mut rows = Vec::new();
        if self.cfg.algorithm.runs_exact() {
            let start = Instant::now();
            let r = solve_exact(t, w, &self.cfg.budget).map_err(Error::from)?;
            let mut row = self.row("exact", t, w, &r.solution, start.elapsed())?;
            row.proven_optimal = Some(r.proven_optimal);
            rows.push(row);
        }
        if self.cfg.algorithm.runs_cpvnf() {
            let start = Instant::now();
            let r = place_all(t, w, &self.cfg.cpvnf);
            let mut row = self.row("cpvnf", t, w, &r.solution, start.elapsed())?;
            row.retries_total = Some(r.retries_total());
            rows.push(row);
        }
        Ok(rows)
    }
}

fn audit_round_trip(dir: &Path, name: &str, s: &PlacementSolution, t: &Topology, w: &Workload) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(format!("{name}.json"));
    crate::placement::save_solution(s, &path)?;
    let back = crate::placement::load_solution(&path)?;
    let violations = check_feasibility(&back, t, w);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Infeasible(violations))
    }
}

/// Topology and workload for one seed of `cfg`.
pub fn instance(cfg: &ScenarioConfig, seed: u64) -> Result<(Topology, Workload)> {
    let (tp, wp) = cfg.for_seed(seed);
    let t = generate_topology(&tp)?;
    let w = generate_workload(&wp, &t)?;
    Ok((t, w))
}

fn run_rows(cfg: &ScenarioConfig) -> Result<Vec<MetricsRow>> {
    cfg.check()?;
    let per_seed: Vec<Result<Vec<MetricsRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (t, w) = instance(cfg, seed).map_err(|e| scenario_err(&cfg.id, seed, e))?;
            Run { cfg, seed }.rows(&t, &w).map_err(|e| scenario_err(&cfg.id, seed, e))
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(rows)
}

/// One row per (seed, algorithm), in seed order; the CSV is written to
/// `cfg.output` when set.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<MetricsRow>> {
    let rows = run_rows(cfg)?;
    if let Some(path) = &cfg.output {
        write_csv(&rows, path)?;
    }
    Ok(rows)
}

/// Runs `cfg` once per user count. The topology seed is shared, so the
/// surrogate and content layers are the same for every count.
///
/// With `nested`, the largest instance is generated once and each smaller
/// count keeps its first users, so every workload contains the smaller ones.
pub fn sweep_users(cfg: &ScenarioConfig, user_counts: &[u32], nested: bool) -> Result<Vec<MetricsRow>> {
    if user_counts.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one user count".into()));
    }
    let rows = if nested {
        nested_rows(cfg, user_counts)?
    } else {
        let mut rows = Vec::new();
        for &n in user_counts {
            rows.extend(run_rows(&cfg.with_users(n))?);
        }
        rows
    };
    if let Some(path) = &cfg.output {
        write_csv(&rows, path)?;
    }
    Ok(rows)
}

/// The first `n` users of a generated instance, as a self-contained instance.
pub fn nested_instance(t: &Topology, w: &Workload, n: usize) -> (Topology, Workload) {
    let keep: BTreeSet<NodeId> = t.end_users().into_iter().take(n).collect();
    let drop: BTreeSet<NodeId> = t.end_users().into_iter().filter(|u| !keep.contains(u)).collect();
    let sub = t.without_users(&drop);
    let mut sw = w.clone();
    sw.requests.retain(|r| keep.contains(&r.user));
    (sub, sw)
}

fn nested_rows(cfg: &ScenarioConfig, user_counts: &[u32]) -> Result<Vec<MetricsRow>> {
    let largest = *user_counts.iter().max().unwrap();
    for &n in user_counts {
        cfg.with_users(n).check()?;
    }
    let base = cfg.with_users(largest);
    let per_seed: Vec<Result<Vec<MetricsRow>>> = base
        .seeds
        .par_iter()
        .map(|&seed| {
            let err = |e| scenario_err(&cfg.id, seed, e);
            let (t, w) = instance(&base, seed).map_err(err)?;
            let mut rows = Vec::new();
            for &n in user_counts {
                let (st, sw) = nested_instance(&t, &w, n as usize);
                rows.extend(Run { cfg, seed }.rows(&st, &sw).map_err(err)?);
            }
            Ok(rows)
        })
        .collect();
    let mut rows: Vec<MetricsRow> = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    // group by user count like the independent sweep
    rows.sort_by_key(|r| r.n_users);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub seed: u64,
    pub cpvnf_total: f64,
    pub exact_total: Option<f64>,
    pub ratio: Option<f64>,
    /// Why the seed has no ratio.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub entries: Vec<GapEntry>,
    pub mean_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

impl GapReport {
    pub fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().filter_map(|e| e.ratio)
    }
}

/// CPVNF total cost over the exact optimum, per seed. Seeds where CPVNF
/// rejected a request are excluded, since the exact model has no rejection.
pub fn compare_gap(cfg: &ScenarioConfig) -> Result<GapReport> {
    let mut cfg = cfg.clone();
    cfg.algorithm = Algorithm::Both;
    cfg.check()?;
    let entries: Vec<Result<GapEntry>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let err = |e| scenario_err(&cfg.id, seed, e);
            let (t, w) = instance(&cfg, seed).map_err(err)?;
            gap_entry(&cfg, seed, &t, &w).map_err(err)
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = entries.iter().filter_map(|e| e.ratio).collect();
    let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    Ok(GapReport { entries, mean_ratio, max_ratio })
}

/// Gap on a single given instance.
pub fn gap_entry(cfg: &ScenarioConfig, seed: u64, t: &Topology, w: &Workload) -> Result<GapEntry> {
    let heuristic = place_all(t, w, &cfg.cpvnf);
    let cpvnf_total = crate::placement::compute_cost(&heuristic.solution, t, w)?.total;
    if !heuristic.all_accepted() {
        let rejected = heuristic.solution.rejected.len();
        return Ok(GapEntry {
            seed,
            cpvnf_total,
            exact_total: None,
            ratio: None,
            excluded: Some(format!("cpvnf rejected {rejected} request(s)")),
        });
    }
    match solve_exact(t, w, &cfg.budget) {
        Ok(r) if r.proven_optimal => Ok(GapEntry {
            seed,
            cpvnf_total,
            exact_total: Some(r.cost.total),
            ratio: Some(cpvnf_total / r.cost.total),
            excluded: None,
        }),
        Ok(r) => Ok(GapEntry {
            seed,
            cpvnf_total,
            exact_total: Some(r.cost.total),
            ratio: None,
            excluded: Some("exact search hit its budget".into()),
        }),
        Err(e) => Ok(GapEntry {
            seed,
            cpvnf_total,
            exact_total: None,
            ratio: None,
            excluded: Some(Error::from(e).to_string()),
        }),
    }
}

/// CSV text with a header row, in the fixed column order of [`MetricsRow`].
pub fn to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io { path: PathBuf::from("<csv>"), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const CSV_HEADER: [&str; 17] = [
    "scenario",
    "seed",
    "algorithm",
    "n_users",
    "accepted",
    "rejected",
    "servers_used",
    "content_servers_used",
    "vnf_license",
    "site_license",
    "operational_cost",
    "communication_cost",
    "total_cost",
    "avg_response_time_ms",
    "retries_total",
    "runtime_ms",
    "proven_optimal",
];

pub fn write_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_csv(rows)?.as_bytes())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?)
}
