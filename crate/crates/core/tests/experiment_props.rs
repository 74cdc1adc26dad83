mod support;

use std::collections::BTreeSet;

use support::{attrs, edge, enumerate_optimum, vnf};
use vnfplace::cpvnf::{place_all, CpvnfParams};
use vnfplace::exact::{solve_exact, SearchBudget};
use vnfplace::experiment::{
    gap_entry, read_csv, run_scenario, sweep_users, to_csv, write_csv, Algorithm, ScenarioConfig, CSV_HEADER,
    DEFAULT_USER_COUNTS,
};
use vnfplace::placement::{compute_cost, load_solution};
use vnfplace::topology::{NodeId, Topology};
use vnfplace::workload::{ServiceRequest, Workload};

fn two_site(delay_s0: f64, delay_s1: f64, delta_s0: f64, delta_s1: f64) -> (Topology, Workload) {
    let (s0, s1, w0, u0) = (NodeId::surrogate(0), NodeId::surrogate(1), NodeId::content(0), NodeId::user(0));
    let t = Topology::new(
        vec![s0, s1, w0, u0],
        vec![edge(w0, s0, delay_s0), edge(w0, s1, delay_s1), edge(s0, u0, 10.0), edge(s1, u0, 10.0)],
        [(s0, attrs(16.0, delta_s0)), (s1, attrs(16.0, delta_s1))].into_iter().collect(),
        10.0,
    );
    let w = Workload {
        catalog: vec![vnf(0, 4.0, 1.0, 1, &t, 5.0)],
        requests: vec![ServiceRequest {
            user: u0,
            chain: vec![0],
            load: 0.05,
            delay_threshold: 1000.0,
            content_servers: [w0].into_iter().collect(),
        }],
    };
    (t, w)
}

#[test]
fn default_sweep_has_one_group_per_count() {
    let cfg = ScenarioConfig { seeds: vec![0, 1], ..ScenarioConfig::default() };
    let rows = sweep_users(&cfg, &DEFAULT_USER_COUNTS, false).unwrap();
    assert_eq!(rows.len(), 10);
    let counts: BTreeSet<usize> = rows.iter().map(|r| r.n_users).collect();
    assert_eq!(counts, DEFAULT_USER_COUNTS.iter().map(|&n| n as usize).collect());
    for r in &rows {
        assert_eq!(r.accepted + r.rejected, r.n_users);
    }
}

#[test]
fn single_count_sweep_is_a_plain_run() {
    let cfg = ScenarioConfig { record_runtime: false, ..ScenarioConfig::default() };
    let swept = sweep_users(&cfg, &[cfg.topology.n_end_users], false).unwrap();
    assert_eq!(swept, run_scenario(&cfg).unwrap());
}

#[test]
fn nested_sweep_keeps_the_surrogate_layer() {
    let cfg = ScenarioConfig { seeds: vec![3], record_runtime: false, ..ScenarioConfig::default() };
    let rows = sweep_users(&cfg, &[9, 18], true).unwrap();
    assert_eq!(rows.iter().map(|r| r.n_users).collect::<Vec<_>>(), [9, 18]);
    assert!(rows[0].total_cost <= rows[1].total_cost);
}

#[test]
fn csv_is_reproducible_and_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig { record_runtime: false, ..ScenarioConfig::tight() };
    let rows = run_scenario(&cfg).unwrap();
    assert_eq!(to_csv(&rows).unwrap(), to_csv(&run_scenario(&cfg).unwrap()).unwrap());

    let path = dir.path().join("rows.csv");
    write_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(read_csv(&path).unwrap(), rows);
}

#[test]
fn output_path_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.csv");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let cfg = ScenarioConfig { output: Some(path.clone()), seeds: vec![0], ..ScenarioConfig::default() };
    let rows = run_scenario(&cfg).unwrap();
    assert_eq!(read_csv(&path).unwrap().len(), rows.len());
}

#[test]
fn saved_solutions_reload_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig { solutions_dir: Some(dir.path().to_path_buf()), ..ScenarioConfig::tiny() };
    let rows = run_scenario(&cfg).unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), rows.len());
    for f in files {
        let s = load_solution(&f).unwrap();
        assert!(s.accepted() > 0 || !s.rejected.is_empty());
    }
}

#[test]
fn heuristic_never_beats_exact_on_tiny_scenarios() {
    let cfg = ScenarioConfig { seeds: (0..8).collect(), ..ScenarioConfig::tiny() };
    assert_eq!(cfg.algorithm, Algorithm::Both);
    let rows = run_scenario(&cfg).unwrap();
    for seed in &cfg.seeds {
        let exact = rows.iter().find(|r| r.seed == *seed && r.algorithm == "exact");
        let cpvnf = rows.iter().find(|r| r.seed == *seed && r.algorithm == "cpvnf").unwrap();
        if let Some(e) = exact {
            assert_eq!(e.proven_optimal, Some(true));
            if cpvnf.rejected == 0 {
                assert!(cpvnf.total_cost >= e.total_cost, "seed {seed}");
            }
        }
    }
}

#[test]
fn gap_is_one_when_the_nearest_site_is_cheapest() {
    let (t, w) = two_site(10.0, 40.0, 5.0, 5.0);
    let e = gap_entry(&ScenarioConfig::tiny(), 0, &t, &w).unwrap();
    assert_eq!(e.ratio, Some(1.0));
    assert_eq!(e.cpvnf_total, 1121.0);
}

#[test]
fn greedy_head_can_miss_the_cheaper_site() {
    // s0 is close to the content but expensive to run on
    let (t, w) = two_site(1.0, 50.0, 50.0, 5.0);
    let heuristic = place_all(&t, &w, &CpvnfParams::default());
    assert_eq!(heuristic.solution.mappings[&NodeId::user(0)].hops[0].server, NodeId::surrogate(0));
    let cpvnf_total = compute_cost(&heuristic.solution, &t, &w).unwrap().total;

    let exact = solve_exact(&t, &w, &SearchBudget::default()).unwrap();
    assert_eq!(Some(exact.cost.total), enumerate_optimum(&t, &w));
    assert_eq!(exact.cost.total, 1121.0);
    assert_eq!(cpvnf_total, 1301.0);

    let e = gap_entry(&ScenarioConfig::tiny(), 0, &t, &w).unwrap();
    assert!(e.ratio.unwrap() > 1.0);
}
