#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnfplace::experiment::{instance, ScenarioConfig};
use vnfplace::paths::{k_shortest_paths, Arc, Digraph};
use vnfplace::placement::{check_feasibility, compute_cost, logical_edge, ChainMapping, Hop, PlacementSolution};
use vnfplace::topology::{Edge, NodeId, SurrogateAttrs, Topology};
use vnfplace::workload::{ServiceRequest, VnfType, Workload};

/// Small generated instance: up to 3 surrogates, 2 users, chains of 2 and
/// 2 instances per type. Capacities are cut so packing and QoS both matter.
pub fn tiny_instance(seed: u64) -> (Topology, Workload) {
    let mut cfg = ScenarioConfig::tiny();
    cfg.topology.n_surrogates = 2 + (seed % 2) as u32;
    cfg.topology.n_end_users = 1 + (seed / 2 % 2) as u32;
    cfg.topology.n_content_servers = 2;
    cfg.topology.capacity_choices = vec![4, 6, 8];
    cfg.workload.chain_length = 1 + (seed / 4 % 2) as u32;
    cfg.workload.max_instances = 1 + (seed / 8 % 2) as u32;
    cfg.workload.processing_capacity_range = (0.03, 0.08);
    cfg.workload.threshold_range = (30, 120);
    instance(&cfg, seed).expect("tiny instance")
}

/// Every content server, host sequence and instance-index sequence for one
/// request, routed on logical edges.
fn request_options(t: &Topology, w: &Workload, req: &ServiceRequest) -> Vec<ChainMapping> {
    let surrogates = t.surrogates();
    let len = req.chain.len();
    let max_idx: Vec<u32> = req.chain.iter().map(|&k| w.vnf(k).max_instances).collect();
    let mut out = Vec::new();
    for &c in &req.content_servers {
        let mut hosts = vec![0usize; len];
        loop {
            let mut idx = vec![0u32; len];
            loop {
                let hops: Vec<Hop> = (0..len)
                    .map(|i| Hop { vnf_type: req.chain[i], server: surrogates[hosts[i]], instance_index: idx[i] })
                    .collect();
                let mut ends = vec![c];
                ends.extend(hops.iter().map(|h| h.server));
                ends.push(req.user);
                let paths: Option<Vec<Vec<usize>>> =
                    ends.windows(2).map(|p| logical_edge(t, p[0], p[1]).map(|e| e.path)).collect();
                if let Some(routed_paths) = paths {
                    out.push(ChainMapping { user: req.user, content_server: c, hops, routed_paths });
                }
                if !odometer(&mut idx, |i| max_idx[i]) {
                    break;
                }
            }
            if !odometer(&mut hosts, |_| surrogates.len()) {
                break;
            }
        }
    }
    out
}

fn odometer<T: Copy + PartialOrd + std::ops::Add<Output = T> + From<u8>>(
    digits: &mut [T],
    base: impl Fn(usize) -> T,
) -> bool {
    for (i, d) in digits.iter_mut().enumerate() {
        *d = *d + T::from(1u8);
        if *d < base(i) {
            return true;
        }
        *d = T::from(0u8);
    }
    false
}

/// Minimum total cost over all joint assignments that pass the checker.
pub fn enumerate_optimum(t: &Topology, w: &Workload) -> Option<f64> {
    let options: Vec<Vec<ChainMapping>> = w.requests.iter().map(|r| request_options(t, w, r)).collect();
    if options.iter().any(Vec::is_empty) {
        return None;
    }
    let mut pick = vec![0usize; options.len()];
    let mut best: Option<f64> = None;
    loop {
        let mappings = pick.iter().enumerate().map(|(r, &i)| options[r][i].clone());
        let s = PlacementSolution::assemble(t, w, mappings, []);
        if check_feasibility(&s, t, w).is_empty() {
            let c = compute_cost(&s, t, w).unwrap().total;
            if best.is_none_or(|b| c < b) {
                best = Some(c);
            }
        }
        if !odometer(&mut pick, |r| options[r].len()) {
            break;
        }
    }
    best
}

/// Whether any single placement of `req` alone meets its threshold.
pub fn any_single_placement_feasible(t: &Topology, w: &Workload, req: &ServiceRequest) -> bool {
    let alone = Workload { catalog: w.catalog.clone(), requests: vec![req.clone()] };
    request_options(t, &alone, req).into_iter().any(|m| {
        let s = PlacementSolution::assemble(t, &alone, [m], []);
        check_feasibility(&s, t, &alone).is_empty()
    })
}

pub fn attrs(capacity: f64, delta: f64) -> SurrogateAttrs {
    SurrogateAttrs {
        capacity,
        site_license_cost: 1000.0,
        operational_cost_per_unit: delta,
        bandwidth_cost_per_unit: 10.0,
    }
}

pub fn edge(src: NodeId, dst: NodeId, delay: f64) -> Edge {
    Edge { src, dst, bandwidth: 1000.0, delay_per_unit_load: delay, hop_count: 1 }
}

pub fn vnf(id: u32, r: f64, p: f64, max_instances: u32, t: &Topology, delay: f64) -> VnfType {
    VnfType {
        id,
        resource_requirement: r,
        processing_capacity: p,
        license_cost: 100.0,
        max_instances,
        processing_delay: t.surrogates().into_iter().map(|s| (s, delay)).collect::<BTreeMap<_, _>>(),
    }
}

/// Every simple path from `src` to `dst` whose edges all have residual at
/// least `min_bw`, with its delay.
pub fn all_simple_paths(g: &Digraph, residual: &[f64], src: usize, dst: usize, min_bw: f64) -> Vec<(f64, Vec<usize>)> {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        g: &Digraph,
        residual: &[f64],
        at: usize,
        dst: usize,
        min_bw: f64,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        if at == dst {
            out.push((g.path_delay(path), path.clone()));
            return;
        }
        for &e in g.out_edges(at) {
            let Arc { dst: next, .. } = *g.arc(e);
            if seen[next] || residual[e] < min_bw {
                continue;
            }
            seen[next] = true;
            path.push(e);
            walk(g, residual, next, dst, min_bw, seen, path, out);
            path.pop();
            seen[next] = false;
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[src] = true;
    let mut out = Vec::new();
    walk(g, residual, src, dst, min_bw, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Up to 7 nodes, integer delays (so ties happen) and mixed residuals.
pub fn random_graph(seed: u64) -> (Digraph, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=7);
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(0.4) {
                arcs.push(Arc { src: u, dst: v, delay: rng.gen_range(1..=5) as f64 });
            }
        }
    }
    let residual = arcs.iter().map(|_| [0.5, 2.0, 10.0][rng.gen_range(0..3)]).collect();
    (Digraph::new(n, arcs), residual)
}

pub fn check_against_enumeration(g: &Digraph, residual: &[f64], src: usize, dst: usize, k: usize, min_bw: f64) {
    let got = k_shortest_paths(g, residual, src, dst, k, min_bw);
    let mut all = all_simple_paths(g, residual, src, dst, min_bw);
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    assert_eq!(got.len(), k.min(all.len()));
    for w in got.windows(2) {
        assert!(w[0].total_delay_per_unit_load <= w[1].total_delay_per_unit_load);
        assert_ne!(w[0].edges, w[1].edges);
    }
    for (i, p) in got.iter().enumerate() {
        // same delay profile as the enumeration; equal-delay paths may swap
        assert_eq!(p.total_delay_per_unit_load, all[i].0);
        assert!(all.iter().any(|(_, e)| *e == p.edges), "not a simple feasible path: {:?}", p.edges);
        assert_eq!(p.hop_count, p.edges.len());
    }
    let distinct: std::collections::BTreeSet<&Vec<usize>> = got.iter().map(|p| &p.edges).collect();
    assert_eq!(distinct.len(), got.len());
}
