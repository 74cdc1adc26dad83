//! Exact placement by depth-first branch and bound.
//!
//! Requests are taken in ranked order. For each request the search picks a
//! content server, then one (surrogate, instance) per chain position; every
//! chain edge is routed on its logical edge (the least-delay physical path),
//! so edge usage follows directly from the assignment. Instances of a type on
//! a server are opened in index order, which removes symmetric duplicates.
//!
//! Pruning uses an admissible bound: the cost already committed plus, per VNF
//! type, the cheapest license and operational cost of the instances its total
//! demand still forces open, plus one site license if nothing is open yet.
//! Communication is bounded by zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::EdgeId;
use crate::placement::{
    check_feasibility, cost_unchecked, logical_edge, mapping_communication, within_capacity, ChainMapping,
    CostBreakdown, Hop, LogicalEdge, PlacementSolution, ResidualState, SlotChoice,
};
use crate::topology::{NodeId, Topology};
use crate::workload::{rank_requests, ServiceRequest, VnfTypeId, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub max_nodes_expanded: u64,
    /// Wall-clock limit, in seconds in config files.
    #[serde(with = "seconds")]
    pub time_limit: Duration,
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_nodes_expanded: 20_000_000, time_limit: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub solution: PlacementSolution,
    pub cost: CostBreakdown,
    pub proven_optimal: bool,
    pub nodes_expanded: u64,
}

/// Outcome of an exact solve that produced no solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoSolution {
    /// The whole space was searched and nothing serves every request.
    Infeasible { nodes_expanded: u64 },
    /// The budget ran out before any feasible solution was found.
    BudgetExhausted { nodes_expanded: u64 },
}

impl From<NoSolution> for Error {
    fn from(n: NoSolution) -> Self {
        match n {
            NoSolution::Infeasible { nodes_expanded } => Error::NoFeasiblePlacement { nodes_expanded },
            NoSolution::BudgetExhausted { nodes_expanded } => Error::BudgetExhausted { nodes_expanded },
        }
    }
}

/// Minimum-cost placement serving every request of `w`.
pub fn solve_exact(t: &Topology, w: &Workload, budget: &SearchBudget) -> std::result::Result<ExactResult, NoSolution> {
    ExactSearch::new(t, w).solve(budget, true)
}

/// Same search with the bound disabled: only infeasible branches are cut.
pub fn solve_exhaustive(
    t: &Topology,
    w: &Workload,
    budget: &SearchBudget,
) -> std::result::Result<ExactResult, NoSolution> {
    ExactSearch::new(t, w).solve(budget, false)
}

#[derive(Debug, Clone, PartialEq)]
struct OpenRequest {
    content_server: NodeId,
    hops: Vec<Hop>,
    paths: Vec<Vec<EdgeId>>,
}

/// A node of the search tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAssignment {
    state: ResidualState,
    done: Vec<ChainMapping>,
    open: Option<OpenRequest>,
    next: usize,
}

impl PartialAssignment {
    /// Number of requests fully mapped.
    pub fn mapped(&self) -> usize {
        self.done.len()
    }
}

type LexKey = Vec<(NodeId, Vec<NodeId>, Vec<u32>)>;

/// Search context over a fixed topology and workload.
pub struct ExactSearch<'a> {
    t: &'a Topology,
    w: &'a Workload,
    ranked: Vec<ServiceRequest>,
    surrogates: Vec<NodeId>,
    logical: HashMap<(NodeId, NodeId), Option<LogicalEdge>>,
    /// Instances each type must open in total, from its aggregate demand.
    required: BTreeMap<VnfTypeId, u32>,
    min_operational: f64,
    min_site: f64,
}

struct Incumbent {
    total: f64,
    key: LexKey,
    solution: PlacementSolution,
    cost: CostBreakdown,
}

struct Run {
    prune: bool,
    budget: SearchBudget,
    started: Instant,
    nodes: u64,
    exhausted: bool,
    best: Option<Incumbent>,
}

impl<'a> ExactSearch<'a> {
    pub fn new(t: &'a Topology, w: &'a Workload) -> Self {
        let ranked = rank_requests(w);
        let surrogates = t.surrogates();
        let mut logical = HashMap::new();
        let mut want = |u: NodeId, v: NodeId| {
            logical.entry((u, v)).or_insert_with(|| logical_edge(t, u, v));
        };
        for r in &ranked {
            for &s in &surrogates {
                for &c in &r.content_servers {
                    want(c, s);
                }
                want(s, r.user);
            }
        }
        for &a in &surrogates {
            for &b in &surrogates {
                want(a, b);
            }
        }

        let mut demand: BTreeMap<VnfTypeId, f64> = BTreeMap::new();
        for r in &ranked {
            for &k in &r.chain {
                *demand.entry(k).or_insert(0.0) += r.load;
            }
        }
        let required = demand
            .into_iter()
            .map(|(k, d)| {
                let p = w.vnf(k).processing_capacity;
                (k, ((d / p) - 1e-9).ceil().max(0.0) as u32)
            })
            .collect();
        let attrs = surrogates.iter().filter_map(|&s| t.attrs(s));
        let min_operational = attrs.clone().map(|a| a.operational_cost_per_unit).fold(f64::INFINITY, f64::min);
        let min_site = attrs.map(|a| a.site_license_cost).fold(f64::INFINITY, f64::min);

        Self { t, w, ranked, surrogates, logical, required, min_operational, min_site }
    }

    pub fn root(&self) -> PartialAssignment {
        PartialAssignment { state: ResidualState::new(self.t), done: Vec::new(), open: None, next: 0 }
    }

    pub fn is_complete(&self, p: &PartialAssignment) -> bool {
        p.next == self.ranked.len()
    }

    fn logical(&self, u: NodeId, v: NodeId) -> Option<&LogicalEdge> {
        self.logical.get(&(u, v)).and_then(Option::as_ref)
    }

    /// Feasible children in best-first order (bound, then lexicographic).
    pub fn children(&self, p: &PartialAssignment) -> Vec<PartialAssignment> {
        if self.is_complete(p) {
            return Vec::new();
        }
        let req = &self.ranked[p.next];
        let mut kids: Vec<PartialAssignment> = match &p.open {
            None => req
                .content_servers
                .iter()
                .map(|&c| {
                    let mut child = p.clone();
                    child.open = Some(OpenRequest { content_server: c, hops: Vec::new(), paths: Vec::new() });
                    child
                })
                .collect(),
            Some(open) => self.place_next(p, req, open),
        };
        let mut keyed: Vec<(f64, PartialAssignment)> = kids.drain(..).map(|c| (self.lower_bound(&c), c)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| self.branch_key(&a.1).cmp(&self.branch_key(&b.1))));
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    /// Position of the most recent decision, for deterministic ordering.
    fn branch_key(&self, p: &PartialAssignment) -> (NodeId, Vec<(NodeId, u32)>) {
        match &p.open {
            Some(o) => (o.content_server, o.hops.iter().map(|h| (h.server, h.instance_index)).collect()),
            None => {
                let m = p.done.last().expect("child of a completed request");
                (m.content_server, m.hops.iter().map(|h| (h.server, h.instance_index)).collect())
            }
        }
    }

    fn place_next(&self, p: &PartialAssignment, req: &ServiceRequest, open: &OpenRequest) -> Vec<PartialAssignment> {
        let pos = open.hops.len();
        let k = req.chain[pos];
        let vnf = self.w.vnf(k);
        let prev = open.hops.last().map_or(open.content_server, |h| h.server);
        let last = pos + 1 == req.chain.len();
        let mut out = Vec::new();

        for &n in &self.surrogates {
            let Some(edge) = self.logical(prev, n) else { continue };
            let mut choices: Vec<SlotChoice> = Vec::new();
            let mut count = 0;
            for (j, used) in p.state.instances_on(k, n) {
                if within_capacity(used + req.load, vnf.processing_capacity) {
                    choices.push(SlotChoice::Existing(j));
                }
                count = count.max(j + 1);
            }
            if count < vnf.max_instances
                && within_capacity(req.load, vnf.processing_capacity)
                && within_capacity(vnf.resource_requirement, p.state.capacity(n))
            {
                choices.push(SlotChoice::New(count));
            }

            for choice in choices {
                let mut child = p.clone();
                if !self.reserve(&mut child.state, &edge.path, req.load) {
                    continue;
                }
                child.state.assign(self.w, k, n, choice, req.load);
                let o = child.open.as_mut().unwrap();
                o.hops.push(Hop { vnf_type: k, server: n, instance_index: choice.index() });
                o.paths.push(edge.path.clone());

                if last {
                    let Some(tail) = self.logical(n, req.user) else { continue };
                    if !self.reserve(&mut child.state, &tail.path, req.load) {
                        continue;
                    }
                    let o = child.open.take().unwrap();
                    let mut paths = o.paths;
                    paths.push(tail.path.clone());
                    let delay = crate::placement::delay_of(self.t, self.w, req, &o.hops, &paths);
                    if !(delay <= req.delay_threshold) {
                        continue;
                    }
                    child.done.push(ChainMapping {
                        user: req.user,
                        content_server: o.content_server,
                        hops: o.hops,
                        routed_paths: paths,
                    });
                    child.next += 1;
                } else {
                    let o = child.open.as_ref().unwrap();
                    let partial = crate::placement::delay_of(self.t, self.w, req, &o.hops, &o.paths);
                    if partial > req.delay_threshold {
                        continue;
                    }
                }
                out.push(child);
            }
        }
        out
    }

    /// Charges `load` to every edge of `path`; false if an edge overflows.
    fn reserve(&self, state: &mut ResidualState, path: &[EdgeId], load: f64) -> bool {
        state.reserve_path(path, load);
        let caps = self.t.bandwidth_capacities();
        path.iter().all(|&e| within_capacity(caps[e] - state.edge_bandwidth()[e], caps[e]))
    }

    /// Cost components of everything committed so far, summed in the same
    /// order as the cost accountant so a complete assignment reproduces it.
    fn committed(&self, p: &PartialAssignment) -> (f64, f64, f64, f64) {
        let mut vnf_license = 0.0;
        let mut operational = 0.0;
        let mut used = BTreeSet::new();
        for key in p.state.instances.keys() {
            let v = self.w.vnf(key.vnf_type);
            vnf_license += v.license_cost;
            operational +=
                v.resource_requirement * self.t.attrs(key.server).map_or(0.0, |a| a.operational_cost_per_unit);
            used.insert(key.server);
        }
        let site: f64 = used.iter().map(|n| self.t.attrs(*n).map_or(0.0, |a| a.site_license_cost)).sum();

        let mut per_user: BTreeMap<NodeId, f64> =
            p.done.iter().map(|m| (m.user, mapping_communication(self.t, self.w, m))).collect();
        if let Some(o) = &p.open {
            let req = &self.ranked[p.next];
            let mut ends = vec![o.content_server];
            ends.extend(o.hops.iter().map(|h| h.server));
            let partial: f64 = o
                .paths
                .iter()
                .enumerate()
                .map(|(i, path)| {
                    crate::placement::bandwidth_cost(
                        req.load,
                        crate::placement::path_hops(self.t, path),
                        self.t.bandwidth_cost_from(ends[i]),
                    )
                })
                .sum();
            per_user.insert(req.user, partial);
        }
        let communication: f64 = per_user.values().sum();
        (vnf_license, site, operational, communication)
    }

    /// Admissible lower bound on the cost of any completion of `p`; equals
    /// the exact cost once every request is mapped.
    pub fn lower_bound(&self, p: &PartialAssignment) -> f64 {
        let (mut vnf_license, mut site, mut operational, communication) = self.committed(p);
        let mut open_count: BTreeMap<VnfTypeId, u32> = BTreeMap::new();
        for key in p.state.instances.keys() {
            *open_count.entry(key.vnf_type).or_insert(0) += 1;
        }
        let mut extra_vnf = 0.0;
        let mut extra_op = 0.0;
        let mut any_missing = false;
        for (&k, &need) in &self.required {
            let missing = need.saturating_sub(open_count.get(&k).copied().unwrap_or(0));
            if missing > 0 {
                any_missing = true;
                let v = self.w.vnf(k);
                extra_vnf += missing as f64 * v.license_cost;
                extra_op += missing as f64 * v.resource_requirement * self.min_operational;
            }
        }
        vnf_license += extra_vnf;
        operational += extra_op;
        if p.state.instances.is_empty() && (any_missing || !self.is_complete(p)) && self.min_site.is_finite() {
            site += self.min_site;
        }
        CostBreakdown::from_components(vnf_license, site, operational, communication).total
    }

    fn lex_key(&self, p: &PartialAssignment) -> LexKey {
        p.done
            .iter()
            .map(|m| {
                (
                    m.content_server,
                    m.hops.iter().map(|h| h.server).collect(),
                    m.hops.iter().map(|h| h.instance_index).collect(),
                )
            })
            .collect()
    }

    fn solve(&self, budget: &SearchBudget, prune: bool) -> std::result::Result<ExactResult, NoSolution> {
        let mut run = Run { prune, budget: *budget, started: Instant::now(), nodes: 0, exhausted: false, best: None };
        self.dfs(self.root(), &mut run);
        let nodes_expanded = run.nodes;
        match run.best {
            Some(best) => Ok(ExactResult {
                solution: best.solution,
                cost: best.cost,
                proven_optimal: !run.exhausted,
                nodes_expanded,
            }),
            None if run.exhausted => Err(NoSolution::BudgetExhausted { nodes_expanded }),
            None => Err(NoSolution::Infeasible { nodes_expanded }),
        }
    }

    fn dfs(&self, p: PartialAssignment, run: &mut Run) {
        if run.exhausted {
            return;
        }
        if self.is_complete(&p) {
            self.offer(&p, run);
            return;
        }
        run.nodes += 1;
        if run.nodes > run.budget.max_nodes_expanded
            || (run.nodes.is_multiple_of(1024) && run.started.elapsed() > run.budget.time_limit)
        {
            run.exhausted = true;
            return;
        }
        for child in self.children(&p) {
            if run.prune {
                if let Some(best) = &run.best {
                    let slack = 1e-9 * best.total.abs().max(1.0);
                    if self.lower_bound(&child) > best.total + slack {
                        continue;
                    }
                }
            }
            self.dfs(child, run);
            if run.exhausted {
                return;
            }
        }
    }

    fn offer(&self, p: &PartialAssignment, run: &mut Run) {
        let solution = PlacementSolution::assemble(self.t, self.w, p.done.iter().cloned(), []);
        if !check_feasibility(&solution, self.t, self.w).is_empty() {
            return;
        }
        let cost = cost_unchecked(&solution, self.t, self.w);
        let key = self.lex_key(p);
        let better = match &run.best {
            None => true,
            Some(b) => cost.total < b.total || (cost.total == b.total && key < b.key),
        };
        if better {
            run.best = Some(Incumbent { total: cost.total, key, solution, cost });
        }
    }
}

/// Convenience wrapper returning the crate error type.
pub fn solve_exact_or_err(t: &Topology, w: &Workload, budget: &SearchBudget) -> Result<ExactResult> {
    solve_exact(t, w, budget).map_err(Error::from)
}
