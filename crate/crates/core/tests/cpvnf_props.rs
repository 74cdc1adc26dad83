mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;
use vnfplace::cpvnf::{place_all, place_request, select_head_host, CpvnfParams, Status};
use vnfplace::exact::{solve_exact, SearchBudget};
use vnfplace::experiment::{instance, ScenarioConfig};
use vnfplace::placement::{check_feasibility, compute_cost, service_delay, ResidualState};
use vnfplace::topology::{NodeId, Topology};
use vnfplace::workload::{ServiceRequest, Workload};

use support::{any_single_placement_feasible, attrs, edge, tiny_instance, vnf};

fn default_instance(seed: u64, users: u32) -> (Topology, Workload) {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.n_end_users = users;
    instance(&cfg, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solutions_are_feasible_and_conserve_resources(seed in 0u64..100_000, users in prop::sample::select(vec![9u32, 12, 15, 18, 25])) {
        let (t, w) = default_instance(seed, users);
        let r = place_all(&t, &w, &CpvnfParams::default());
        prop_assert!(check_feasibility(&r.solution, &t, &w).is_empty());
        prop_assert_eq!(r.outcomes.len(), w.requests.len());
        for m in r.solution.mappings.values() {
            let req = w.request(m.user).unwrap();
            prop_assert!(service_delay(m, &t, &w).unwrap() <= req.delay_threshold);
        }

        let mut used: BTreeMap<NodeId, f64> = BTreeMap::new();
        for s in &r.solution.slots {
            *used.entry(s.server).or_insert(0.0) += w.vnf(s.vnf_type).resource_requirement;
        }
        for n in t.surrogates() {
            let consumed = t.attrs(n).unwrap().capacity - r.solution.residual.server_capacity[&n];
            prop_assert!((consumed - used.get(&n).copied().unwrap_or(0.0)).abs() < 1e-9);
        }
        let mut load = vec![0.0; t.edges.len()];
        for m in r.solution.mappings.values() {
            for p in &m.routed_paths {
                for &e in p {
                    load[e] += w.request(m.user).unwrap().load;
                }
            }
        }
        for (e, l) in load.iter().enumerate() {
            let consumed = t.bandwidth_capacities()[e] - r.solution.residual.edge_bandwidth[e];
            prop_assert!((consumed - l).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..100_000) {
        let (t, w) = default_instance(seed, 12);
        let a = place_all(&t, &w, &CpvnfParams::default());
        let b = place_all(&t, &w, &CpvnfParams::default());
        prop_assert_eq!(a.solution, b.solution);
        prop_assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn zero_thresholds_reject_everything(seed in 0u64..100_000) {
        let (t, mut w) = default_instance(seed, 9);
        for r in &mut w.requests {
            r.delay_threshold = 0.0;
        }
        let r = place_all(&t, &w, &CpvnfParams::default());
        prop_assert_eq!(r.solution.accepted(), 0);
        prop_assert!(r.outcomes.iter().all(|o| o.retries_used == CpvnfParams::default().stop));
    }

    #[test]
    fn capacity_weight_never_changes_the_outcome(seed in 0u64..100_000, pi in 0.01f64..=1.0) {
        let (t, w) = default_instance(seed, 9);
        let a = place_all(&t, &w, &CpvnfParams::default());
        let mut p = CpvnfParams::default();
        p.sir.capacity_weight = pi;
        let b = place_all(&t, &w, &p);
        prop_assert_eq!(a.solution, b.solution);
    }
}

/// Complete surrogate layer with ample capacity: every user is reachable
/// from every host, so nothing should be turned away.
#[test]
fn unlimited_resources_accept_every_request() {
    for seed in 0..20 {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.surrogate_out_degree = (8, 8);
        cfg.topology.bandwidth_choices = vec![1e9];
        cfg.topology.capacity_range = (100_000, 100_000);
        cfg.workload.processing_capacity_range = (1e6, 1e6);
        let (t, mut w) = instance(&cfg, seed).unwrap();
        for r in &mut w.requests {
            r.delay_threshold = f64::INFINITY;
        }
        let r = place_all(&t, &w, &CpvnfParams::default());
        assert!(r.all_accepted(), "seed {seed}");
    }
}

#[test]
fn heuristic_never_beats_the_optimum() {
    for seed in 0..30 {
        let (t, w) = tiny_instance(seed);
        let r = place_all(&t, &w, &CpvnfParams::default());
        if !r.all_accepted() {
            continue;
        }
        let exact = solve_exact(&t, &w, &SearchBudget::default()).unwrap();
        assert!(compute_cost(&r.solution, &t, &w).unwrap().total >= exact.cost.total, "seed {seed}");
    }
}

/// s0 and s1 mirror each other except for their distance to w0.
fn mirrored(d0: f64, d1: f64) -> (Topology, Workload) {
    let (s0, s1, w0, u0) = (NodeId::surrogate(0), NodeId::surrogate(1), NodeId::content(0), NodeId::user(0));
    let t = Topology::new(
        vec![s0, s1, w0, u0],
        vec![
            edge(w0, s0, d0),
            edge(w0, s1, d1),
            edge(s0, s1, 5000.0),
            edge(s1, s0, 5000.0),
            edge(s0, u0, 1.0),
            edge(s1, u0, 1.0),
        ],
        [(s0, attrs(16.0, 5.0)), (s1, attrs(16.0, 5.0))].into_iter().collect(),
        10.0,
    );
    let w = Workload {
        catalog: vec![vnf(0, 4.0, 1.0, 2, &t, 1.0)],
        requests: vec![ServiceRequest {
            user: u0,
            chain: vec![0],
            load: 0.05,
            delay_threshold: 100.0,
            content_servers: [w0].into_iter().collect(),
        }],
    };
    (t, w)
}

#[test]
fn compound_score_hand_arithmetic() {
    // Q = 0.5 * (D * 0.05 / 100)^2 gives 0.125 and 0.5
    let (t, w) = mirrored(1000.0, 2000.0);
    let st = ResidualState::new(&t);
    let h = select_head_host(&t, &w, &st, &w.requests[0], &CpvnfParams::default()).unwrap();
    assert_eq!(h.surrogate, NodeId::surrogate(0));
    assert!((h.score - (0.5 + 1.0 / (0.125 + 1e-6))).abs() < 1e-6, "{}", h.score);

    // the 10 ms side wins when everything else is equal
    let (t, w) = mirrored(100.0, 10.0);
    let h = select_head_host(&t, &w, &ResidualState::new(&t), &w.requests[0], &CpvnfParams::default()).unwrap();
    assert_eq!(h.surrogate, NodeId::surrogate(1));
}

#[test]
fn unreachable_threshold_is_rejected_after_every_retry() {
    let (t, mut w) = mirrored(1000.0, 2000.0);
    w.requests[0].delay_threshold = 40.0;
    // no single placement meets 40 ms: the cheapest is 0.05 * (1000 + 1 + 1)
    assert!(!any_single_placement_feasible(&t, &w, &w.requests[0]));
    let params = CpvnfParams::default();
    let out = place_request(&t, &w, &mut ResidualState::new(&t), &w.requests[0], &params);
    assert_eq!(out.status, Status::Rejected);
    assert_eq!(out.retries_used, params.stop);
    assert!(out.mapping.is_none());
}
