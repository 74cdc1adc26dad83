//! The CPVNF heuristic: requests are placed one at a time in ranked order.
//! The head VNF goes to the surrogate with the best compound score
//! `SIR + 1 / (Q + epsilon)`, every later VNF to the best-ranked surrogate that
//! can host it and is reachable from its predecessor, and each hop is routed
//! on the lowest-delay bandwidth-feasible path. A mapping that misses its
//! delay threshold is retried with a decayed capacity weight, then rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{k_shortest_paths, EdgeId};
use crate::placement::{delay_of, ChainMapping, Hop, PlacementSolution, ResidualState};
use crate::sir::{content_penalty, personalized_sir, SirParams};
use crate::topology::{NodeId, Topology};
use crate::workload::{rank_requests, ServiceRequest, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpvnfParams {
    pub sir: SirParams,
    /// Candidate paths examined per hop.
    pub k_paths: usize,
    /// Retries after the first attempt before a request is rejected.
    pub stop: u32,
    /// Factor applied to the capacity weight on every retry.
    pub pi_decay: f64,
    /// Guard in the compound score's `1 / (Q + epsilon)`.
    pub epsilon: f64,
}

impl Default for CpvnfParams {
    fn default() -> Self {
        Self { sir: SirParams::default(), k_paths: 5, stop: 3, pi_decay: 0.5, epsilon: 1e-6 }
    }
}

impl CpvnfParams {
    pub fn check(&self) -> Result<()> {
        self.sir.check()?;
        if self.k_paths == 0 || !(self.pi_decay > 0.0 && self.pi_decay < 1.0) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("CPVNF parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub user: NodeId,
    pub status: Status,
    pub mapping: Option<ChainMapping>,
    pub retries_used: u32,
}

#[derive(Debug, Clone)]
pub struct CpvnfResult {
    pub solution: PlacementSolution,
    pub outcomes: Vec<RequestOutcome>,
}

impl CpvnfResult {
    pub fn retries_total(&self) -> u32 {
        self.outcomes.iter().map(|o| o.retries_used).sum()
    }

    pub fn all_accepted(&self) -> bool {
        self.outcomes.iter().all(|o| o.status == Status::Accepted)
    }
}

/// Places every request of `w` in ranked order, committing each accepted
/// request's resources before the next one is considered.
pub fn place_all(t: &Topology, w: &Workload, params: &CpvnfParams) -> CpvnfResult {
    let mut state = ResidualState::new(t);
    let mut outcomes = Vec::with_capacity(w.requests.len());
    for req in rank_requests(w) {
        outcomes.push(place_request(t, w, &mut state, &req, params));
    }
    let mappings = outcomes.iter().filter_map(|o| o.mapping.clone());
    let rejected = outcomes.iter().filter(|o| o.status == Status::Rejected).map(|o| o.user);
    let solution = PlacementSolution::assemble(t, w, mappings, rejected);
    CpvnfResult { solution, outcomes }
}

/// Maps one request against `state`. Reservations made by a failed attempt
/// are discarded; `state` only changes when the request is accepted.
pub fn place_request(
    t: &Topology,
    w: &Workload,
    state: &mut ResidualState,
    req: &ServiceRequest,
    params: &CpvnfParams,
) -> RequestOutcome {
    // pi starts from its default for every request
    let mut attempt_params = *params;
    for attempt in 0..=params.stop {
        let mut scratch = state.clone();
        if let Some(mapping) = try_map(t, w, &mut scratch, req, &attempt_params) {
            *state = scratch;
            return RequestOutcome {
                user: req.user,
                status: Status::Accepted,
                mapping: Some(mapping),
                retries_used: attempt,
            };
        }
        attempt_params.sir.capacity_weight *= params.pi_decay;
    }
    RequestOutcome { user: req.user, status: Status::Rejected, mapping: None, retries_used: params.stop }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadChoice {
    pub surrogate: NodeId,
    pub content_server: NodeId,
    pub score: f64,
}

/// Argmax of `phi + 1 / (min_w Q(w, n) + epsilon)` over surrogates that can
/// host the head VNF and are reachable from some content server of the
/// request over a path with enough residual bandwidth. `None` when no such
/// surrogate exists.
pub fn select_head_host(
    t: &Topology,
    w: &Workload,
    state: &ResidualState,
    req: &ServiceRequest,
    params: &CpvnfParams,
) -> Option<HeadChoice> {
    let head = req.head();
    let sir = personalized_sir(t, state, head, &params.sir).vector;
    let mut best: Option<HeadChoice> = None;
    for n in t.surrogates() {
        if state.find_slot(w, head, n, req.load).is_none() {
            continue;
        }
        let mut chosen: Option<(NodeId, f64)> = None;
        for &c in &req.content_servers {
            if route(t, state, c, n, req.load, 1).is_none() {
                continue;
            }
            let q = content_penalty(t, c, n, req, params.sir.penalty_coeff);
            if q.is_finite() && chosen.is_none_or(|(_, bq)| q < bq) {
                chosen = Some((c, q));
            }
        }
        let Some((content_server, q)) = chosen else { continue };
        let score = sir.get(n) + 1.0 / (q + params.epsilon);
        if best.is_none_or(|b| score > b.score) {
            best = Some(HeadChoice { surrogate: n, content_server, score });
        }
    }
    best
}

/// Lowest-delay path among the `k` shortest with bottleneck >= `load`.
fn route(t: &Topology, state: &ResidualState, from: NodeId, to: NodeId, load: f64, k: usize) -> Option<Vec<EdgeId>> {
    let (src, dst) = (t.dense_index(from)?, t.dense_index(to)?);
    k_shortest_paths(t.graph(), state.edge_bandwidth(), src, dst, k, load).into_iter().next().map(|p| p.edges)
}

fn try_map(
    t: &Topology,
    w: &Workload,
    state: &mut ResidualState,
    req: &ServiceRequest,
    params: &CpvnfParams,
) -> Option<ChainMapping> {
    let load = req.load;
    let head = select_head_host(t, w, state, req, params)?;
    let head_type = req.head();
    let first_path = route(t, state, head.content_server, head.surrogate, load, params.k_paths)?;
    state.reserve_path(&first_path, load);
    let slot = state.find_slot(w, head_type, head.surrogate, load)?;
    state.assign(w, head_type, head.surrogate, slot, load);

    let mut hops = vec![Hop { vnf_type: head_type, server: head.surrogate, instance_index: slot.index() }];
    let mut paths = vec![first_path];
    let mut prev = head.surrogate;

    for &k in &req.chain[1..] {
        let ranked = personalized_sir(t, state, k, &params.sir).vector.ranked();
        let (host, slot, path) = ranked.into_iter().find_map(|n| {
            let slot = state.find_slot(w, k, n, load)?;
            let path = route(t, state, prev, n, load, params.k_paths)?;
            Some((n, slot, path))
        })?;
        state.reserve_path(&path, load);
        state.assign(w, k, host, slot, load);
        hops.push(Hop { vnf_type: k, server: host, instance_index: slot.index() });
        paths.push(path);
        prev = host;
    }

    let last = route(t, state, prev, req.user, load, params.k_paths)?;
    state.reserve_path(&last, load);
    paths.push(last);

    let delay = delay_of(t, w, req, &hops, &paths);
    (delay <= req.delay_threshold).then_some(ChainMapping {
        user: req.user,
        content_server: head.content_server,
        hops,
        routed_paths: paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::compute_cost;
    use crate::topology::{Edge, SurrogateAttrs};
    use crate::workload::VnfType;

    fn edge(src: NodeId, dst: NodeId, delay: f64) -> Edge {
        Edge { src, dst, bandwidth: 1000.0, delay_per_unit_load: delay, hop_count: 1 }
    }

    /// w0 feeds s0 (10 ms/Gbps) and s1 (40 ms/Gbps); s0 and s1 link both
    /// ways and both serve u0 and u1.
    fn two_surrogates() -> Topology {
        let (s0, s1, w0) = (NodeId::surrogate(0), NodeId::surrogate(1), NodeId::content(0));
        let (u0, u1) = (NodeId::user(0), NodeId::user(1));
        let attrs = SurrogateAttrs {
            capacity: 16.0,
            site_license_cost: 1000.0,
            operational_cost_per_unit: 5.0,
            bandwidth_cost_per_unit: 10.0,
        };
        Topology::new(
            vec![s0, s1, w0, u0, u1],
            vec![
                edge(w0, s0, 10.0),
                edge(w0, s1, 40.0),
                edge(s0, s1, 10.0),
                edge(s1, s0, 10.0),
                edge(s0, u0, 10.0),
                edge(s1, u0, 10.0),
                edge(s0, u1, 10.0),
                edge(s1, u1, 10.0),
            ],
            [(s0, attrs.clone()), (s1, attrs)].into_iter().collect(),
            10.0,
        )
    }

    fn workload(users: &[u32], threshold: f64) -> Workload {
        let delays = [(NodeId::surrogate(0), 5.0), (NodeId::surrogate(1), 5.0)].into_iter().collect();
        Workload {
            catalog: vec![VnfType {
                id: 0,
                resource_requirement: 4.0,
                processing_capacity: 1.0,
                license_cost: 100.0,
                max_instances: 2,
                processing_delay: delays,
            }],
            requests: users
                .iter()
                .map(|&u| ServiceRequest {
                    user: NodeId::user(u),
                    chain: vec![0],
                    load: 0.05,
                    delay_threshold: threshold,
                    content_servers: [NodeId::content(0)].into_iter().collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_workload_costs_nothing() {
        let t = two_surrogates();
        let r = place_all(&t, &workload(&[], 100.0), &CpvnfParams::default());
        assert!(r.outcomes.is_empty());
        assert_eq!(compute_cost(&r.solution, &t, &workload(&[], 100.0)).unwrap().total, 0.0);
    }

    #[test]
    fn single_request_lands_on_the_near_surrogate() {
        let t = two_surrogates();
        let w = workload(&[0], 100.0);
        let r = place_all(&t, &w, &CpvnfParams::default());
        assert!(r.all_accepted());
        let m = &r.solution.mappings[&NodeId::user(0)];
        assert_eq!(m.hops[0].server, NodeId::surrogate(0));
        let c = compute_cost(&r.solution, &t, &w).unwrap();
        // license 100, site 1000, 4 x 5 operational, two one-hop segments at 0.5
        assert_eq!(c.total, 100.0 + 1000.0 + 20.0 + 1.0);
    }

    #[test]
    fn identical_requests_share_an_instance() {
        let t = two_surrogates();
        let w = workload(&[0, 1], 100.0);
        let r = place_all(&t, &w, &CpvnfParams::default());
        assert!(r.all_accepted());
        assert_eq!(r.solution.slots.len(), 1);
        assert_eq!(r.solution.slots[0].assigned_load, 0.1);
    }

    #[test]
    fn impossible_threshold_is_rejected_after_all_retries() {
        let t = two_surrogates();
        let w = workload(&[0], 0.5);
        let params = CpvnfParams::default();
        let mut state = ResidualState::new(&t);
        let before = state.clone();
        let out = place_request(&t, &w, &mut state, &w.requests[0], &params);
        assert_eq!(out.status, Status::Rejected);
        assert_eq!(out.retries_used, params.stop);
        assert_eq!(state, before);
    }

    #[test]
    fn head_selection_examples() {
        let t = two_surrogates();
        let w = workload(&[0], 100.0);
        let st = ResidualState::new(&t);
        let h = select_head_host(&t, &w, &st, &w.requests[0], &CpvnfParams::default()).unwrap();
        assert_eq!((h.surrogate, h.content_server), (NodeId::surrogate(0), NodeId::content(0)));

        // remove both feeder links: no head can be reached
        let mut cut = t.clone();
        cut.edges.retain(|e| e.src != NodeId::content(0));
        let cut = Topology::new(cut.nodes.clone(), cut.edges.clone(), cut.surrogate_attrs.clone(), 10.0);
        let st = ResidualState::new(&cut);
        assert!(select_head_host(&cut, &w, &st, &w.requests[0], &CpvnfParams::default()).is_none());
    }

    #[test]
    fn capacity_weight_does_not_change_placement() {
        let t = two_surrogates();
        let w = workload(&[0, 1], 100.0);
        let a = place_all(&t, &w, &CpvnfParams::default());
        let mut p = CpvnfParams::default();
        p.sir.capacity_weight = 0.1;
        let b = place_all(&t, &w, &p);
        assert_eq!(a.solution, b.solution);
    }
}
