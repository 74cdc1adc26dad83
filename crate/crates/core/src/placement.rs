//! Placement solutions and the accountants that judge them: logical edges,
//! service delay, the feasibility checker, the cost breakdown and metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{least_delay_path, EdgeId};
use crate::topology::{NodeId, Topology};
use crate::workload::{ServiceRequest, VnfTypeId, Workload};

/// Capacity comparisons allow this much relative slack for summation order.
const CAPACITY_SLACK: f64 = 1e-9;

/// `used <= capacity`, up to floating-point summation noise.
pub fn within_capacity(used: f64, capacity: f64) -> bool {
    used <= capacity + CAPACITY_SLACK * capacity.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub vnf_type: VnfTypeId,
    pub server: NodeId,
    pub instance_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSlot {
    pub vnf_type: VnfTypeId,
    pub server: NodeId,
    pub instance_index: u32,
    /// Gbps.
    pub assigned_load: f64,
}

impl InstanceSlot {
    pub fn key(&self) -> InstanceKey {
        InstanceKey { vnf_type: self.vnf_type, server: self.server, instance_index: self.instance_index }
    }
}

/// One chain position mapped onto an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub vnf_type: VnfTypeId,
    pub server: NodeId,
    pub instance_index: u32,
}

impl Hop {
    pub fn key(&self) -> InstanceKey {
        InstanceKey { vnf_type: self.vnf_type, server: self.server, instance_index: self.instance_index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMapping {
    pub user: NodeId,
    pub content_server: NodeId,
    pub hops: Vec<Hop>,
    /// Content server to head, each chain edge, tail to user; edge ids.
    pub routed_paths: Vec<Vec<EdgeId>>,
}

impl ChainMapping {
    /// Nodes the routed paths must join: content server, hosts, user.
    pub fn endpoints(&self) -> Vec<NodeId> {
        let mut v = Vec::with_capacity(self.hops.len() + 2);
        v.push(self.content_server);
        v.extend(self.hops.iter().map(|h| h.server));
        v.push(self.user);
        v
    }
}

/// Remaining capacities after a solution's consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Gbps per edge id.
    pub edge_bandwidth: Vec<f64>,
    /// vCPU per surrogate.
    pub server_capacity: BTreeMap<NodeId, f64>,
}

impl Residual {
    pub fn full(t: &Topology) -> Self {
        Self {
            edge_bandwidth: t.bandwidth_capacities().to_vec(),
            server_capacity: t.surrogate_attrs.iter().map(|(&n, a)| (n, a.capacity)).collect(),
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.edge_bandwidth.len() == other.edge_bandwidth.len()
            && self.edge_bandwidth.iter().zip(&other.edge_bandwidth).all(|(a, b)| close(*a, *b))
            && self.server_capacity.len() == other.server_capacity.len()
            && self.server_capacity.iter().zip(&other.server_capacity).all(|((n, a), (m, b))| n == m && close(*a, *b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub slots: Vec<InstanceSlot>,
    pub mappings: BTreeMap<NodeId, ChainMapping>,
    pub rejected: BTreeSet<NodeId>,
    pub used_servers: BTreeSet<NodeId>,
    pub residual: Residual,
}

impl PlacementSolution {
    pub fn empty(t: &Topology) -> Self {
        Self {
            slots: Vec::new(),
            mappings: BTreeMap::new(),
            rejected: BTreeSet::new(),
            used_servers: BTreeSet::new(),
            residual: Residual::full(t),
        }
    }

    /// Builds the solution implied by `mappings`: one slot per referenced
    /// instance with its aggregated load, the used-server set and residuals.
    pub fn assemble(
        t: &Topology,
        w: &Workload,
        mappings: impl IntoIterator<Item = ChainMapping>,
        rejected: impl IntoIterator<Item = NodeId>,
    ) -> Self {
        let mappings: BTreeMap<NodeId, ChainMapping> = mappings.into_iter().map(|m| (m.user, m)).collect();
        let loads = instance_loads(w, &mappings);
        let slots: Vec<InstanceSlot> = loads
            .iter()
            .map(|(k, &load)| InstanceSlot {
                vnf_type: k.vnf_type,
                server: k.server,
                instance_index: k.instance_index,
                assigned_load: load,
            })
            .collect();
        let used_servers = slots.iter().map(|s| s.server).collect();
        let mut solution = Self {
            slots,
            mappings,
            rejected: rejected.into_iter().collect(),
            used_servers,
            residual: Residual::full(t),
        };
        solution.residual = recompute_residual(&solution, t, w);
        solution
    }

    pub fn accepted(&self) -> usize {
        self.mappings.len()
    }
}

/// Aggregated load per instance, recomputed from the mappings.
fn instance_loads(w: &Workload, mappings: &BTreeMap<NodeId, ChainMapping>) -> BTreeMap<InstanceKey, f64> {
    let mut loads = BTreeMap::new();
    for m in mappings.values() {
        let Some(req) = w.request(m.user) else { continue };
        for h in &m.hops {
            *loads.entry(h.key()).or_insert(0.0) += req.load;
        }
    }
    loads
}

/// Per-edge load summed over every routed path of every mapping.
fn edge_loads(t: &Topology, w: &Workload, mappings: &BTreeMap<NodeId, ChainMapping>) -> Vec<f64> {
    let mut loads = vec![0.0; t.edges.len()];
    for m in mappings.values() {
        let Some(req) = w.request(m.user) else { continue };
        for path in &m.routed_paths {
            for &e in path {
                if e < loads.len() {
                    loads[e] += req.load;
                }
            }
        }
    }
    loads
}

/// Residual capacities recomputed from scratch.
pub fn recompute_residual(s: &PlacementSolution, t: &Topology, w: &Workload) -> Residual {
    let mut r = Residual::full(t);
    for (e, load) in edge_loads(t, w, &s.mappings).into_iter().enumerate() {
        r.edge_bandwidth[e] -= load;
    }
    for slot in &s.slots {
        if let (Some(cap), Some(v)) = (r.server_capacity.get_mut(&slot.server), w.try_vnf(slot.vnf_type)) {
            *cap -= v.resource_requirement;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalEdge {
    pub delay_per_unit_load: f64,
    pub hop_count: u32,
    pub path: Vec<EdgeId>,
}

/// The canonical least-delay physical path between `u` and `v`; a node to
/// itself is a zero-delay, zero-hop edge.
pub fn logical_edge(t: &Topology, u: NodeId, v: NodeId) -> Option<LogicalEdge> {
    if u == v {
        return Some(LogicalEdge { delay_per_unit_load: 0.0, hop_count: 0, path: Vec::new() });
    }
    let (src, dst) = (t.dense_index(u)?, t.dense_index(v)?);
    let p = least_delay_path(t.graph(), t.bandwidth_capacities(), src, dst)?;
    Some(LogicalEdge {
        delay_per_unit_load: p.total_delay_per_unit_load,
        hop_count: path_hops(t, &p.edges),
        path: p.edges,
    })
}

/// sigma of a routed path: the summed hop counts of its edges.
pub fn path_hops(t: &Topology, path: &[EdgeId]) -> u32 {
    path.iter().map(|&e| t.edge(e).hop_count).sum()
}

/// beta = load (Gbps) x hops x B ($/Gbps/hop).
pub fn bandwidth_cost(load: f64, hop_count: u32, per_unit_cost: f64) -> f64 {
    load * hop_count as f64 * per_unit_cost
}

/// End-to-end delay (ms) of a mapping: load times the summed path delays and
/// the processing delay of every chain VNF on its host, each counted once.
pub fn service_delay(m: &ChainMapping, t: &Topology, w: &Workload) -> Result<f64> {
    let req = w.request(m.user).ok_or_else(|| Error::InvalidWorkload(format!("no request for user {}", m.user)))?;
    if m.routed_paths.len() != m.hops.len() + 1 {
        return Err(Error::MissingPath(m.user.to_string()));
    }
    Ok(delay_of(t, w, req, &m.hops, &m.routed_paths))
}

pub(crate) fn delay_of(t: &Topology, w: &Workload, req: &ServiceRequest, hops: &[Hop], paths: &[Vec<EdgeId>]) -> f64 {
    let g = t.graph();
    let network: f64 = paths.iter().map(|p| g.path_delay(p)).sum();
    let processing: f64 = hops.iter().map(|h| w.vnf(h.vnf_type).delay_on(h.server)).sum();
    req.load * (network + processing)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Mapping or rejection for a user without a request.
    UnknownRequest {
        user: NodeId,
    },
    /// Request neither mapped nor rejected, or both.
    Unaccounted {
        user: NodeId,
    },
    ContentSelection {
        user: NodeId,
        content_server: NodeId,
    },
    ChainMismatch {
        user: NodeId,
        detail: String,
    },
    UnknownInstance {
        user: NodeId,
        position: usize,
        instance: InstanceKey,
    },
    InvalidSlot {
        instance: InstanceKey,
        detail: String,
    },
    InstanceCapacity {
        instance: InstanceKey,
        load: f64,
        capacity: f64,
    },
    ServerCapacity {
        server: NodeId,
        used: f64,
        capacity: f64,
    },
    Routing {
        user: NodeId,
        segment: usize,
        detail: String,
    },
    BandwidthCapacity {
        edge: EdgeId,
        load: f64,
        capacity: f64,
    },
    DelayThreshold {
        user: NodeId,
        delay: f64,
        threshold: f64,
    },
    Bookkeeping {
        detail: String,
    },
}

impl Violation {
    pub fn tag(&self) -> &'static str {
        use Violation::*;
        match self {
            UnknownRequest { .. } => "unknown-request",
            Unaccounted { .. } => "unaccounted-request",
            ContentSelection { .. } => "content-selection",
            ChainMismatch { .. } => "vnf-assignment",
            UnknownInstance { .. } => "vnf-assignment",
            InvalidSlot { .. } => "invalid-slot",
            InstanceCapacity { .. } => "instance-capacity",
            ServerCapacity { .. } => "server-capacity",
            Routing { .. } => "chain-routing",
            BandwidthCapacity { .. } => "bandwidth-capacity",
            DelayThreshold { .. } => "delay-threshold",
            Bookkeeping { .. } => "bookkeeping",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        write!(f, "[{}] ", self.tag())?;
        match self {
            UnknownRequest { user } => write!(f, "{user} has no request"),
            Unaccounted { user } => write!(f, "{user} must be either mapped or rejected"),
            ContentSelection { user, content_server } => {
                write!(f, "{user} selects {content_server}, which lacks the content")
            }
            ChainMismatch { user, detail } => write!(f, "{user}: {detail}"),
            UnknownInstance { user, position, instance } => {
                write!(f, "{user} position {position} uses missing instance {instance:?}")
            }
            InvalidSlot { instance, detail } => write!(f, "{instance:?}: {detail}"),
            InstanceCapacity { instance, load, capacity } => write!(f, "{instance:?} carries {load} Gbps > {capacity}"),
            ServerCapacity { server, used, capacity } => write!(f, "{server} uses {used} vCPU > {capacity}"),
            Routing { user, segment, detail } => write!(f, "{user} segment {segment}: {detail}"),
            BandwidthCapacity { edge, load, capacity } => write!(f, "edge {edge} carries {load} Gbps > {capacity}"),
            DelayThreshold { user, delay, threshold } => write!(f, "{user} delay {delay} ms > {threshold} ms"),
            Bookkeeping { detail } => write!(f, "{detail}"),
        }
    }
}

/// All constraint violations of `s`; empty iff the solution is feasible.
pub fn check_feasibility(s: &PlacementSolution, t: &Topology, w: &Workload) -> Vec<Violation> {
    let mut out = Vec::new();

    for user in s.mappings.keys().chain(&s.rejected) {
        if w.request(*user).is_none() {
            out.push(Violation::UnknownRequest { user: *user });
        }
    }
    for r in &w.requests {
        let mapped = s.mappings.contains_key(&r.user);
        let rejected = s.rejected.contains(&r.user);
        if mapped == rejected {
            out.push(Violation::Unaccounted { user: r.user });
        }
    }

    let mut slot_keys = BTreeSet::new();
    for slot in &s.slots {
        let key = slot.key();
        if !slot_keys.insert(key) {
            out.push(Violation::InvalidSlot { instance: key, detail: "duplicate slot".into() });
        }
        match w.try_vnf(slot.vnf_type) {
            None => out.push(Violation::InvalidSlot { instance: key, detail: "unknown VNF type".into() }),
            Some(v) if slot.instance_index >= v.max_instances => out.push(Violation::InvalidSlot {
                instance: key,
                detail: format!("instance index exceeds max_instances {}", v.max_instances),
            }),
            Some(_) => {}
        }
        if t.attrs(slot.server).is_none() {
            out.push(Violation::InvalidSlot { instance: key, detail: "host is not a surrogate".into() });
        }
    }

    for (user, m) in &s.mappings {
        let Some(req) = w.request(*user) else { continue };
        if m.user != *user {
            out.push(Violation::Bookkeeping { detail: format!("mapping keyed {user} names user {}", m.user) });
        }
        if !req.content_servers.contains(&m.content_server) {
            out.push(Violation::ContentSelection { user: *user, content_server: m.content_server });
        }
        let mut chain_ok = m.hops.len() == req.chain.len();
        if !chain_ok {
            out.push(Violation::ChainMismatch {
                user: *user,
                detail: format!("{} hops for a chain of {}", m.hops.len(), req.chain.len()),
            });
        }
        for (i, (h, k)) in m.hops.iter().zip(&req.chain).enumerate() {
            if h.vnf_type != *k {
                chain_ok = false;
                out.push(Violation::ChainMismatch {
                    user: *user,
                    detail: format!("position {i} maps type {} instead of {k}", h.vnf_type),
                });
            } else if !slot_keys.contains(&h.key()) {
                chain_ok = false;
                out.push(Violation::UnknownInstance { user: *user, position: i, instance: h.key() });
            }
        }

        let mut routing_ok = m.routed_paths.len() == m.hops.len() + 1;
        if !routing_ok {
            out.push(Violation::Routing {
                user: *user,
                segment: m.routed_paths.len(),
                detail: format!("{} routed paths for {} segments", m.routed_paths.len(), m.hops.len() + 1),
            });
        } else {
            let ends = m.endpoints();
            for (i, path) in m.routed_paths.iter().enumerate() {
                if let Err(detail) = check_path(t, path, ends[i], ends[i + 1]) {
                    routing_ok = false;
                    out.push(Violation::Routing { user: *user, segment: i, detail });
                }
            }
        }

        if chain_ok && routing_ok {
            let delay = delay_of(t, w, req, &m.hops, &m.routed_paths);
            if !(delay <= req.delay_threshold) {
                out.push(Violation::DelayThreshold { user: *user, delay, threshold: req.delay_threshold });
            }
        }
    }

    let loads = instance_loads(w, &s.mappings);
    for slot in &s.slots {
        let load = loads.get(&slot.key()).copied().unwrap_or(0.0);
        if (load - slot.assigned_load).abs() > 1e-9 {
            out.push(Violation::Bookkeeping {
                detail: format!("slot {:?} records {} Gbps but mappings assign {load}", slot.key(), slot.assigned_load),
            });
        }
        if let Some(v) = w.try_vnf(slot.vnf_type) {
            if !within_capacity(load, v.processing_capacity) {
                out.push(Violation::InstanceCapacity { instance: slot.key(), load, capacity: v.processing_capacity });
            }
        }
    }

    let mut server_use: BTreeMap<NodeId, f64> = BTreeMap::new();
    for slot in &s.slots {
        if let Some(v) = w.try_vnf(slot.vnf_type) {
            *server_use.entry(slot.server).or_insert(0.0) += v.resource_requirement;
        }
    }
    for (&server, &used) in &server_use {
        if let Some(a) = t.attrs(server) {
            if !within_capacity(used, a.capacity) {
                out.push(Violation::ServerCapacity { server, used, capacity: a.capacity });
            }
        }
    }

    for (e, load) in edge_loads(t, w, &s.mappings).into_iter().enumerate() {
        let capacity = t.edge(e).bandwidth_gbps();
        if !within_capacity(load, capacity) {
            out.push(Violation::BandwidthCapacity { edge: e, load, capacity });
        }
    }

    let hosting: BTreeSet<NodeId> = s.slots.iter().map(|s| s.server).collect();
    if hosting != s.used_servers {
        out.push(Violation::Bookkeeping { detail: "used_servers differs from the servers hosting slots".into() });
    }
    if !recompute_residual(s, t, w).approx_eq(&s.residual) {
        out.push(Violation::Bookkeeping { detail: "stored residual differs from recomputed residual".into() });
    }
    out
}

/// A routed path must be a contiguous walk from `from` to `to`, empty iff they coincide.
fn check_path(t: &Topology, path: &[EdgeId], from: NodeId, to: NodeId) -> std::result::Result<(), String> {
    if from == to {
        return if path.is_empty() { Ok(()) } else { Err("co-located endpoints must use an empty path".into()) };
    }
    if path.is_empty() {
        return Err(format!("no path from {from} to {to}"));
    }
    let mut at = from;
    for &e in path {
        if e >= t.edges.len() {
            return Err(format!("unknown edge {e}"));
        }
        let edge = t.edge(e);
        if edge.src != at {
            return Err(format!("edge {e} starts at {} but the walk is at {at}", edge.src));
        }
        at = edge.dst;
    }
    if at != to {
        return Err(format!("path ends at {at} instead of {to}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub vnf_license: f64,
    pub site_license: f64,
    /// Server usage: R_k x delta_n summed over instances.
    pub operational: f64,
    pub communication: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn from_components(vnf_license: f64, site_license: f64, operational: f64, communication: f64) -> Self {
        Self {
            vnf_license,
            site_license,
            operational,
            communication,
            total: vnf_license + site_license + operational + communication,
        }
    }

    /// License plus server usage, the grouping reported as operational cost.
    pub fn operational_with_licenses(&self) -> f64 {
        self.vnf_license + self.site_license + self.operational
    }
}

/// Cost of a feasible solution; infeasible solutions are refused.
pub fn compute_cost(s: &PlacementSolution, t: &Topology, w: &Workload) -> Result<CostBreakdown> {
    let violations = check_feasibility(s, t, w);
    if !violations.is_empty() {
        return Err(Error::Infeasible(violations));
    }
    Ok(cost_unchecked(s, t, w))
}

/// Cost terms without the feasibility gate. Slots are summed in key order so
/// the result does not depend on their storage order.
pub(crate) fn cost_unchecked(s: &PlacementSolution, t: &Topology, w: &Workload) -> CostBreakdown {
    let mut slots: Vec<&InstanceSlot> = s.slots.iter().collect();
    slots.sort_by_key(|s| s.key());

    let mut vnf_license = 0.0;
    let mut operational = 0.0;
    for slot in &slots {
        let v = w.vnf(slot.vnf_type);
        vnf_license += v.license_cost;
        operational += v.resource_requirement * t.attrs(slot.server).map_or(0.0, |a| a.operational_cost_per_unit);
    }
    let site_license: f64 = s.used_servers.iter().map(|n| t.attrs(*n).map_or(0.0, |a| a.site_license_cost)).sum();
    let communication: f64 = s.mappings.values().map(|m| mapping_communication(t, w, m)).sum();
    CostBreakdown::from_components(vnf_license, site_license, operational, communication)
}

/// Bandwidth cost of one mapping: every segment billed at its sender's rate.
pub(crate) fn mapping_communication(t: &Topology, w: &Workload, m: &ChainMapping) -> f64 {
    let Some(req) = w.request(m.user) else { return 0.0 };
    let ends = m.endpoints();
    m.routed_paths
        .iter()
        .enumerate()
        .map(|(i, p)| bandwidth_cost(req.load, path_hops(t, p), t.bandwidth_cost_from(ends[i])))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub servers_used: usize,
    pub content_servers_used: usize,
    pub cost: CostBreakdown,
    /// License plus server usage.
    pub operational_cost: f64,
    pub communication_cost: f64,
    pub total_cost: f64,
    pub avg_response_time_ms: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub runtime: Duration,
}

/// Evaluation metrics of a feasible solution.
pub fn compute_metrics(s: &PlacementSolution, t: &Topology, w: &Workload, runtime: Duration) -> Result<Metrics> {
    let cost = compute_cost(s, t, w)?;
    let delays = s.mappings.values().map(|m| service_delay(m, t, w)).collect::<Result<Vec<f64>>>()?;
    let avg = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
    let content: BTreeSet<NodeId> = s.mappings.values().map(|m| m.content_server).collect();
    let operational_cost = cost.operational_with_licenses();
    Ok(Metrics {
        servers_used: s.used_servers.len(),
        content_servers_used: content.len(),
        operational_cost,
        communication_cost: cost.communication,
        total_cost: operational_cost + cost.communication,
        cost,
        avg_response_time_ms: avg,
        accepted: s.mappings.len(),
        rejected: s.rejected.len(),
        runtime,
    })
}

pub fn save_solution(s: &PlacementSolution, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_json(s, path.as_ref())
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<PlacementSolution> {
    crate::io::read_json(path.as_ref())
}

/// Mutable resource view used while building solutions: remaining server
/// capacity, remaining edge bandwidth and the load on every open instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState {
    pub residual: Residual,
    pub instances: BTreeMap<InstanceKey, f64>,
}

/// Where a VNF would land on a given server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotChoice {
    Existing(u32),
    New(u32),
}

impl SlotChoice {
    pub fn index(self) -> u32 {
        match self {
            SlotChoice::Existing(j) | SlotChoice::New(j) => j,
        }
    }
}

impl ResidualState {
    pub fn new(t: &Topology) -> Self {
        Self { residual: Residual::full(t), instances: BTreeMap::new() }
    }

    pub fn capacity(&self, server: NodeId) -> f64 {
        self.residual.server_capacity.get(&server).copied().unwrap_or(0.0)
    }

    pub fn edge_bandwidth(&self) -> &[f64] {
        &self.residual.edge_bandwidth
    }

    /// Instances of `k` on `n`, ordered by index.
    pub fn instances_on(&self, k: VnfTypeId, n: NodeId) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = InstanceKey { vnf_type: k, server: n, instance_index: 0 };
        let hi = InstanceKey { vnf_type: k, server: n, instance_index: u32::MAX };
        self.instances.range(lo..=hi).map(|(key, &load)| (key.instance_index, load))
    }

    pub fn hosts_type(&self, k: VnfTypeId, n: NodeId) -> bool {
        self.instances_on(k, n).next().is_some()
    }

    /// First-fit: an existing instance with spare processing capacity, else a
    /// new one if the per-server instance limit and server capacity allow.
    pub fn find_slot(&self, w: &Workload, k: VnfTypeId, n: NodeId, load: f64) -> Option<SlotChoice> {
        let v = w.vnf(k);
        let mut count = 0u32;
        for (j, used) in self.instances_on(k, n) {
            if within_capacity(used + load, v.processing_capacity) {
                return Some(SlotChoice::Existing(j));
            }
            count = count.max(j + 1);
        }
        let fits = within_capacity(load, v.processing_capacity)
            && count < v.max_instances
            && within_capacity(v.resource_requirement, self.capacity(n));
        fits.then_some(SlotChoice::New(count))
    }

    pub fn assign(&mut self, w: &Workload, k: VnfTypeId, n: NodeId, choice: SlotChoice, load: f64) {
        let key = InstanceKey { vnf_type: k, server: n, instance_index: choice.index() };
        if let SlotChoice::New(_) = choice {
            *self.residual.server_capacity.entry(n).or_insert(0.0) -= w.vnf(k).resource_requirement;
        }
        *self.instances.entry(key).or_insert(0.0) += load;
    }

    pub fn reserve_path(&mut self, path: &[EdgeId], load: f64) {
        for &e in path {
            self.residual.edge_bandwidth[e] -= load;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Edge, SurrogateAttrs};
    use crate::workload::VnfType;

    fn attrs(capacity: f64, delta: f64) -> SurrogateAttrs {
        SurrogateAttrs {
            capacity,
            site_license_cost: 1000.0,
            operational_cost_per_unit: delta,
            bandwidth_cost_per_unit: 10.0,
        }
    }

    fn edge(src: NodeId, dst: NodeId, delay: f64) -> Edge {
        Edge { src, dst, bandwidth: 1000.0, delay_per_unit_load: delay, hop_count: 1 }
    }

    /// w0 -> s0 -> u0, with s0 hosting everything.
    fn single_server() -> (Topology, Workload) {
        let (s0, w0, u0) = (NodeId::surrogate(0), NodeId::content(0), NodeId::user(0));
        let t = Topology::new(
            vec![s0, w0, u0],
            vec![edge(w0, s0, 400.0), edge(s0, u0, 400.0)],
            [(s0, attrs(16.0, 5.0))].into_iter().collect(),
            10.0,
        );
        let w = Workload {
            catalog: vec![VnfType {
                id: 0,
                resource_requirement: 4.0,
                processing_capacity: 1.0,
                license_cost: 100.0,
                max_instances: 2,
                processing_delay: [(s0, 600.0)].into_iter().collect(),
            }],
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

    fn mapping() -> ChainMapping {
        ChainMapping {
            user: NodeId::user(0),
            content_server: NodeId::content(0),
            hops: vec![Hop { vnf_type: 0, server: NodeId::surrogate(0), instance_index: 0 }],
            routed_paths: vec![vec![0], vec![1]],
        }
    }

    #[test]
    fn bandwidth_cost_examples() {
        assert_eq!(bandwidth_cost(0.015, 2, 10.0), 0.30);
        assert_eq!(bandwidth_cost(0.5, 0, 10.0), 0.0);
        assert_eq!(bandwidth_cost(1.0, 1, 10.0), 10.0);
    }

    #[test]
    fn logical_edge_to_self_is_free() {
        let (t, _) = single_server();
        let e = logical_edge(&t, NodeId::surrogate(0), NodeId::surrogate(0)).unwrap();
        assert_eq!((e.delay_per_unit_load, e.hop_count, e.path.len()), (0.0, 0, 0));
        let e = logical_edge(&t, NodeId::content(0), NodeId::surrogate(0)).unwrap();
        assert_eq!((e.delay_per_unit_load, e.hop_count, e.path), (400.0, 1, vec![0]));
        assert!(logical_edge(&t, NodeId::user(0), NodeId::content(0)).is_none());
    }

    #[test]
    fn single_vnf_delay_and_cost() {
        let (t, w) = single_server();
        let s = PlacementSolution::assemble(&t, &w, [mapping()], []);
        // 0.05 * (400 + 400 + 600)
        assert_eq!(service_delay(&s.mappings[&NodeId::user(0)], &t, &w).unwrap(), 0.05 * 1400.0);
        assert!(check_feasibility(&s, &t, &w).is_empty());
        let c = compute_cost(&s, &t, &w).unwrap();
        assert_eq!(c.vnf_license, 100.0);
        assert_eq!(c.site_license, 1000.0);
        assert_eq!(c.operational, 20.0);
        // two single-hop segments at 0.05 Gbps and 10 $/Gbps/hop
        assert_eq!(c.communication, 0.5 + 0.5);
        assert_eq!(c.total, c.vnf_license + c.site_license + c.operational + c.communication);
    }

    #[test]
    fn missing_path_is_a_structural_error() {
        let (t, w) = single_server();
        let mut m = mapping();
        m.routed_paths.pop();
        assert!(matches!(service_delay(&m, &t, &w), Err(Error::MissingPath(_))));
    }

    #[test]
    fn empty_solution_costs_nothing() {
        let (t, w) = single_server();
        let s = PlacementSolution::assemble(&t, &w, [], [NodeId::user(0)]);
        let c = compute_cost(&s, &t, &w).unwrap();
        assert_eq!(c, CostBreakdown::from_components(0.0, 0.0, 0.0, 0.0));
        let m = compute_metrics(&s, &t, &w, Duration::ZERO).unwrap();
        assert_eq!(m.avg_response_time_ms, None);
        assert_eq!((m.accepted, m.rejected), (0, 1));
    }

    #[test]
    fn foreign_content_server_is_flagged() {
        let (t, mut w) = single_server();
        w.requests[0].content_servers = [NodeId::content(7)].into_iter().collect();
        let s = PlacementSolution::assemble(&t, &w, [mapping()], []);
        let v = check_feasibility(&s, &t, &w);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].tag(), "content-selection");
    }

    #[test]
    fn delay_over_threshold_is_flagged_and_cost_refused() {
        let (t, mut w) = single_server();
        w.requests[0].delay_threshold = 69.0;
        let s = PlacementSolution::assemble(&t, &w, [mapping()], []);
        let v = check_feasibility(&s, &t, &w);
        assert_eq!(v.iter().map(Violation::tag).collect::<Vec<_>>(), vec!["delay-threshold"]);
        assert!(matches!(compute_cost(&s, &t, &w), Err(Error::Infeasible(_))));
    }

    #[test]
    fn broken_walk_is_flagged() {
        let (t, w) = single_server();
        let mut m = mapping();
        m.routed_paths = vec![vec![1], vec![1]];
        let s = PlacementSolution::assemble(&t, &w, [m], []);
        let v = check_feasibility(&s, &t, &w);
        assert!(v.iter().any(|v| v.tag() == "chain-routing"));
    }

    #[test]
    fn tampered_residual_is_flagged() {
        let (t, w) = single_server();
        let mut s = PlacementSolution::assemble(&t, &w, [mapping()], []);
        s.residual.server_capacity.insert(NodeId::surrogate(0), 16.0);
        let v = check_feasibility(&s, &t, &w);
        assert_eq!(v.iter().map(Violation::tag).collect::<Vec<_>>(), vec!["bookkeeping"]);
    }

    #[test]
    fn first_fit_reuses_then_opens() {
        let (t, w) = single_server();
        let n = NodeId::surrogate(0);
        let mut st = ResidualState::new(&t);
        assert_eq!(st.find_slot(&w, 0, n, 0.6), Some(SlotChoice::New(0)));
        st.assign(&w, 0, n, SlotChoice::New(0), 0.6);
        assert_eq!(st.find_slot(&w, 0, n, 0.3), Some(SlotChoice::Existing(0)));
        assert_eq!(st.find_slot(&w, 0, n, 0.6), Some(SlotChoice::New(1)));
        st.assign(&w, 0, n, SlotChoice::New(1), 0.6);
        // both instances hold 0.6 and the per-server limit is two
        assert_eq!(st.find_slot(&w, 0, n, 0.6), None);
        assert_eq!(st.capacity(n), 8.0);
    }
}
