use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use vnfplace::cpvnf::{place_all, CpvnfParams};
use vnfplace::exact::solve_exact;
use vnfplace::experiment::{self, Algorithm, MetricsRow, ScenarioConfig, DEFAULT_USER_COUNTS};
use vnfplace::placement::{compute_metrics, save_solution, PlacementSolution};
use vnfplace::topology::{generate_topology, load_topology, save_topology};
use vnfplace::workload::{generate_workload, load_workload, save_workload};

#[derive(Parser)]
#[command(name = "vnfplace", version, about = "VNF placement and chaining over CDN surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random topology.
    GenTopology {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate a workload for an existing topology.
    GenWorkload {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run a scenario, or solve one given topology and workload.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, requires = "workload")]
        topology: Option<PathBuf>,
        #[arg(long, requires = "topology")]
        workload: Option<PathBuf>,
        /// Where to write the solution when solving a given instance.
        #[arg(long, requires = "topology")]
        solution: Option<PathBuf>,
    },
    /// Run a scenario once per user count.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_USER_COUNTS)]
        counts: Vec<u32>,
        /// Smaller workloads are prefixes of the largest one.
        #[arg(long)]
        nested: bool,
    },
    /// Report CPVNF cost over the exact optimum on small instances.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config (JSON); omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the tight preset instead of the default scenario.
    #[arg(long, conflicts_with = "config")]
    tight: bool,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    users: Option<u32>,
    /// CSV (run, sweep) or JSON (compare) output path.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    solutions_dir: Option<PathBuf>,
    /// Leave the runtime column empty.
    #[arg(long)]
    no_runtime: bool,
    #[command(flatten)]
    cpvnf: CpvnfArgs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlgorithmArg {
    Exact,
    Cpvnf,
    Both,
}

#[derive(Args)]
struct CpvnfArgs {
    /// Capacity weight in the node mass.
    #[arg(long)]
    pi: Option<f64>,
    /// Teleport multiplier for servers hosting the type.
    #[arg(long)]
    gamma: Option<f64>,
    /// Content penalty coefficient.
    #[arg(long)]
    mu: Option<f64>,
    /// Damping factor.
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    k_paths: Option<usize>,
    #[arg(long)]
    stop: Option<u32>,
    #[arg(long)]
    pi_decay: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl CpvnfArgs {
    fn apply(&self, p: &mut CpvnfParams) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.sir.capacity_weight, self.pi);
        set(&mut p.sir.instance_weight, self.gamma);
        set(&mut p.sir.penalty_coeff, self.mu);
        set(&mut p.sir.damping, self.psi);
        set(&mut p.sir.convergence_tol, self.tol);
        set(&mut p.pi_decay, self.pi_decay);
        set(&mut p.epsilon, self.epsilon);
        if let Some(v) = self.max_iterations {
            p.sir.max_iterations = v;
        }
        if let Some(v) = self.k_paths {
            p.k_paths = v;
        }
        if let Some(v) = self.stop {
            p.stop = v;
        }
    }
}

impl ScenarioArgs {
    fn resolve(&self, base: ScenarioConfig) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None if self.tight => ScenarioConfig::tight(),
            None => base,
        };
        if let Some(a) = self.algorithm {
            cfg.algorithm = match a {
                AlgorithmArg::Exact => Algorithm::Exact,
                AlgorithmArg::Cpvnf => Algorithm::Cpvnf,
                AlgorithmArg::Both => Algorithm::Both,
            };
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(u) = self.users {
            cfg.topology.n_end_users = u;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.solutions_dir.is_some() {
            cfg.solutions_dir = self.solutions_dir.clone();
        }
        if self.no_runtime {
            cfg.record_runtime = false;
        }
        self.cpvnf.apply(&mut cfg.cpvnf);
        cfg.cpvnf.check()?;
        Ok(cfg)
    }
}

fn print_rows(rows: &[MetricsRow]) -> anyhow::Result<()> {
    print!("{}", experiment::to_csv(rows)?);
    Ok(())
}

fn solve_given(
    cfg: &ScenarioConfig,
    topology: &PathBuf,
    workload: &PathBuf,
    solution: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let t = load_topology(topology)?;
    let w = load_workload(workload, &t)?;
    let mut found: Vec<(&str, PlacementSolution, std::time::Duration)> = Vec::new();
    if matches!(cfg.algorithm, Algorithm::Exact | Algorithm::Both) {
        let start = std::time::Instant::now();
        let r = solve_exact(&t, &w, &cfg.budget).map_err(vnfplace::Error::from)?;
        found.push(("exact", r.solution, start.elapsed()));
    }
    if matches!(cfg.algorithm, Algorithm::Cpvnf | Algorithm::Both) {
        let start = std::time::Instant::now();
        let r = place_all(&t, &w, &cfg.cpvnf);
        found.push(("cpvnf", r.solution, start.elapsed()));
    }
    for (name, s, runtime) in &found {
        let m = compute_metrics(s, &t, &w, *runtime)?;
        println!(
            "{name}: accepted {} rejected {} servers {} total cost {:.2} avg delay {}",
            m.accepted,
            m.rejected,
            m.servers_used,
            m.total_cost,
            m.avg_response_time_ms.map_or("-".into(), |d| format!("{d:.2} ms"))
        );
    }
    if let Some(path) = solution {
        match found.as_slice() {
            [(_, s, _)] => save_solution(s, path)?,
            _ => bail!("--solution needs a single algorithm"),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenTopology { scenario, seed, out } => {
            let cfg = scenario.resolve(ScenarioConfig::default())?;
            let mut p = cfg.topology;
            p.seed = seed.unwrap_or(cfg.seeds.first().copied().unwrap_or(0));
            save_topology(&generate_topology(&p)?, &out)?;
        }
        Command::GenWorkload { scenario, topology, seed, out } => {
            let cfg = scenario.resolve(ScenarioConfig::default())?;
            let t = load_topology(&topology)?;
            let mut p = cfg.workload;
            p.seed = seed.unwrap_or(cfg.seeds.first().copied().unwrap_or(0));
            save_workload(&generate_workload(&p, &t)?, &out)?;
        }
        Command::Run { scenario, topology, workload, solution } => {
            let cfg = scenario.resolve(ScenarioConfig::default())?;
            match (topology, workload) {
                (Some(t), Some(w)) => solve_given(&cfg, &t, &w, solution.as_ref())?,
                _ => {
                    let rows = experiment::run_scenario(&cfg)?;
                    if cfg.output.is_none() {
                        print_rows(&rows)?;
                    }
                }
            }
        }
        Command::Sweep { scenario, counts, nested } => {
            let cfg = scenario.resolve(ScenarioConfig::default())?;
            let rows = experiment::sweep_users(&cfg, &counts, nested)?;
            if cfg.output.is_none() {
                print_rows(&rows)?;
            }
        }
        Command::Compare { scenario } => {
            let mut cfg = scenario.resolve(ScenarioConfig::tiny())?;
            let output = cfg.output.take();
            let report = experiment::compare_gap(&cfg)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match output {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
