//! Physical CDN network: surrogate servers, content servers and end-users
//! joined by directed edges with bandwidth, per-unit-load delay and hop count.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::paths::{Arc, Digraph, EdgeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Surrogate,
    ContentServer,
    EndUser,
}

impl Role {
    fn prefix(self) -> char {
        match self {
            Role::Surrogate => 's',
            Role::ContentServer => 'w',
            Role::EndUser => 'u',
        }
    }
}

/// A node of the network. Serialized compactly as `s3`, `w0`, `u12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub role: Role,
    pub index: u32,
}

impl NodeId {
    pub const fn surrogate(index: u32) -> Self {
        Self { role: Role::Surrogate, index }
    }

    pub const fn content(index: u32) -> Self {
        Self { role: Role::ContentServer, index }
    }

    pub const fn user(index: u32) -> Self {
        Self { role: Role::EndUser, index }
    }

    pub fn is_surrogate(&self) -> bool {
        self.role == Role::Surrogate
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.role.prefix(), self.index)
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut chars = s.chars();
        let role = match chars.next() {
            Some('s') => Role::Surrogate,
            Some('w') => Role::ContentServer,
            Some('u') => Role::EndUser,
            _ => return Err(format!("invalid node id `{s}`: expected prefix s, w or u")),
        };
        let index = chars.as_str().parse().map_err(|_| format!("invalid node id `{s}`: bad index"))?;
        Ok(Self { role, index })
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// Mbps.
    pub bandwidth: f64,
    /// ms per Gbps of load.
    pub delay_per_unit_load: f64,
    pub hop_count: u32,
}

impl Edge {
    pub fn bandwidth_gbps(&self) -> f64 {
        self.bandwidth / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateAttrs {
    /// vCPU.
    pub capacity: f64,
    /// Dollars, paid once when the server hosts anything.
    pub site_license_cost: f64,
    /// Dollars per vCPU.
    pub operational_cost_per_unit: f64,
    /// Dollars per Gbps per hop for traffic sent from this server.
    pub bandwidth_cost_per_unit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AttrsEntry {
    node: NodeId,
    #[serde(flatten)]
    attrs: SurrogateAttrs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    #[serde(default = "units_header")]
    units: BTreeMap<String, String>,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    surrogate_attrs: Vec<AttrsEntry>,
    #[serde(default = "default_bandwidth_cost")]
    default_bandwidth_cost: f64,
}

fn units_header() -> BTreeMap<String, String> {
    [
        ("bandwidth", "Mbps"),
        ("delay_per_unit_load", "ms per Gbps"),
        ("hop_count", "hops"),
        ("capacity", "vCPU"),
        ("site_license_cost", "dollars"),
        ("operational_cost_per_unit", "dollars per vCPU"),
        ("bandwidth_cost_per_unit", "dollars per Gbps per hop"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn default_bandwidth_cost() -> f64 {
    10.0
}

#[derive(Debug)]
struct Derived {
    index: HashMap<NodeId, usize>,
    graph: Digraph,
    capacities: Vec<f64>,
}

/// Validated topologies are treated as immutable: the dense graph view is
/// built on first use, so edit the public fields only before querying it.
#[derive(Debug, Serialize, Deserialize)]
#[serde(into = "TopologyFile", from = "TopologyFile")]
pub struct Topology {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
    pub surrogate_attrs: BTreeMap<NodeId, SurrogateAttrs>,
    /// B used for senders without surrogate attributes (content servers).
    pub default_bandwidth_cost: f64,
    derived: OnceLock<Derived>,
}

impl Clone for Topology {
    fn clone(&self) -> Self {
        Self::new(self.nodes.clone(), self.edges.clone(), self.surrogate_attrs.clone(), self.default_bandwidth_cost)
    }
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.surrogate_attrs == other.surrogate_attrs
            && self.default_bandwidth_cost == other.default_bandwidth_cost
    }
}

impl From<TopologyFile> for Topology {
    fn from(f: TopologyFile) -> Self {
        Topology::new(
            f.nodes,
            f.edges,
            f.surrogate_attrs.into_iter().map(|e| (e.node, e.attrs)).collect(),
            f.default_bandwidth_cost,
        )
    }
}

impl From<Topology> for TopologyFile {
    fn from(t: Topology) -> Self {
        TopologyFile {
            units: units_header(),
            surrogate_attrs: t
                .surrogate_attrs
                .iter()
                .map(|(&node, attrs)| AttrsEntry { node, attrs: attrs.clone() })
                .collect(),
            nodes: t.nodes.clone(),
            edges: t.edges.clone(),
            default_bandwidth_cost: t.default_bandwidth_cost,
        }
    }
}

impl Topology {
    pub fn new(
        nodes: Vec<NodeId>,
        edges: Vec<Edge>,
        surrogate_attrs: BTreeMap<NodeId, SurrogateAttrs>,
        default_bandwidth_cost: f64,
    ) -> Self {
        Self { nodes, edges, surrogate_attrs, default_bandwidth_cost, derived: OnceLock::new() }
    }

    fn derived(&self) -> &Derived {
        self.derived.get_or_init(|| {
            let index: HashMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
            let arcs = self
                .edges
                .iter()
                .map(|e| Arc {
                    src: *index.get(&e.src).expect("dangling edge source; validate the topology first"),
                    dst: *index.get(&e.dst).expect("dangling edge target; validate the topology first"),
                    delay: e.delay_per_unit_load,
                })
                .collect();
            let graph = Digraph::new(self.nodes.len(), arcs);
            let capacities = self.edges.iter().map(Edge::bandwidth_gbps).collect();
            Derived { index, graph, capacities }
        })
    }

    /// Dense graph view; arc ids equal indices into `edges`.
    pub fn graph(&self) -> &Digraph {
        &self.derived().graph
    }

    pub fn dense_index(&self, node: NodeId) -> Option<usize> {
        self.derived().index.get(&node).copied()
    }

    pub fn node_at(&self, dense: usize) -> NodeId {
        self.nodes[dense]
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.dense_index(node).is_some()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    fn by_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied().filter(move |n| n.role == role)
    }

    /// Surrogates in ascending index order.
    pub fn surrogates(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self.by_role(Role::Surrogate).collect();
        v.sort();
        v
    }

    pub fn content_servers(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self.by_role(Role::ContentServer).collect();
        v.sort();
        v
    }

    pub fn end_users(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self.by_role(Role::EndUser).collect();
        v.sort();
        v
    }

    pub fn attrs(&self, node: NodeId) -> Option<&SurrogateAttrs> {
        self.surrogate_attrs.get(&node)
    }

    /// B for traffic leaving `node`.
    pub fn bandwidth_cost_from(&self, node: NodeId) -> f64 {
        self.attrs(node).map(|a| a.bandwidth_cost_per_unit).unwrap_or(self.default_bandwidth_cost)
    }

    /// Edge capacities in Gbps, indexed by edge id.
    pub fn bandwidth_capacities(&self) -> &[f64] {
        &self.derived().capacities
    }

    /// Surrogate-to-surrogate out-neighbours of `node`, with the edge id.
    pub fn surrogate_out_edges(&self, node: NodeId) -> Vec<(EdgeId, NodeId)> {
        let g = self.graph();
        let Some(i) = self.dense_index(node) else { return Vec::new() };
        g.out_edges(i).iter().map(|&e| (e, self.nodes[g.arc(e).dst])).filter(|(_, n)| n.is_surrogate()).collect()
    }

    /// Copy without the given end-users (and their incident edges).
    pub fn without_users(&self, users: &BTreeSet<NodeId>) -> Topology {
        Topology::new(
            self.nodes.iter().copied().filter(|n| !users.contains(n)).collect(),
            self.edges.iter().filter(|e| !users.contains(&e.src) && !users.contains(&e.dst)).cloned().collect(),
            self.surrogate_attrs.clone(),
            self.default_bandwidth_cost,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyViolation {
    DuplicateNode(NodeId),
    DanglingEndpoint { edge: usize, node: NodeId },
    DuplicateEdge { edge: usize, src: NodeId, dst: NodeId },
    SelfLoop { edge: usize },
    InvalidEdge { edge: usize, reason: String },
    MissingSurrogateAttrs(NodeId),
    UnexpectedAttrs(NodeId),
    InvalidSurrogateAttrs { node: NodeId, reason: String },
    UnreachableEndUser(NodeId),
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TopologyViolation::*;
        match self {
            DuplicateNode(n) => write!(f, "duplicate node {n}"),
            DanglingEndpoint { edge, node } => {
                write!(f, "dangling endpoint: edge {edge} references unknown node {node}")
            }
            DuplicateEdge { edge, src, dst } => write!(f, "duplicate edge {edge} ({src} -> {dst})"),
            SelfLoop { edge } => write!(f, "edge {edge} is a self loop"),
            InvalidEdge { edge, reason } => write!(f, "edge {edge}: {reason}"),
            MissingSurrogateAttrs(n) => write!(f, "surrogate {n} has no attributes"),
            UnexpectedAttrs(n) => write!(f, "{n} has surrogate attributes but is not a known surrogate"),
            InvalidSurrogateAttrs { node, reason } => write!(f, "surrogate {node}: {reason}"),
            UnreachableEndUser(n) => {
                write!(f, "unreachable end-user {n}: no content server reaches it through a surrogate")
            }
        }
    }
}

/// Every violated invariant, one entry each; empty iff the topology is valid.
pub fn validate(t: &Topology) -> Vec<TopologyViolation> {
    let mut out = Vec::new();
    let mut index: HashMap<NodeId, usize> = HashMap::new();
    for (i, &n) in t.nodes.iter().enumerate() {
        if index.insert(n, i).is_some() {
            out.push(TopologyViolation::DuplicateNode(n));
        }
    }

    let mut seen_pairs = BTreeSet::new();
    let mut valid_edges = Vec::new();
    for (id, e) in t.edges.iter().enumerate() {
        let mut ok = true;
        for node in [e.src, e.dst] {
            if !index.contains_key(&node) {
                out.push(TopologyViolation::DanglingEndpoint { edge: id, node });
                ok = false;
            }
        }
        if e.src == e.dst {
            out.push(TopologyViolation::SelfLoop { edge: id });
            ok = false;
        }
        if !seen_pairs.insert((e.src, e.dst)) {
            out.push(TopologyViolation::DuplicateEdge { edge: id, src: e.src, dst: e.dst });
        }
        if !(e.bandwidth > 0.0) {
            out.push(TopologyViolation::InvalidEdge {
                edge: id,
                reason: format!("bandwidth {} must be positive", e.bandwidth),
            });
        }
        if !(e.delay_per_unit_load >= 0.0) || !e.delay_per_unit_load.is_finite() {
            out.push(TopologyViolation::InvalidEdge {
                edge: id,
                reason: format!("delay_per_unit_load {} must be finite and non-negative", e.delay_per_unit_load),
            });
        }
        if e.hop_count < 1 {
            out.push(TopologyViolation::InvalidEdge { edge: id, reason: "hop_count must be at least 1".into() });
        }
        if ok {
            valid_edges.push(e);
        }
    }

    for &n in &t.nodes {
        if n.is_surrogate() && !t.surrogate_attrs.contains_key(&n) {
            out.push(TopologyViolation::MissingSurrogateAttrs(n));
        }
    }
    for (&n, a) in &t.surrogate_attrs {
        if !n.is_surrogate() || !index.contains_key(&n) {
            out.push(TopologyViolation::UnexpectedAttrs(n));
            continue;
        }
        let costs = [a.site_license_cost, a.operational_cost_per_unit, a.bandwidth_cost_per_unit];
        if !(a.capacity > 0.0) {
            out.push(TopologyViolation::InvalidSurrogateAttrs {
                node: n,
                reason: format!("capacity {} must be positive", a.capacity),
            });
        }
        if costs.iter().any(|c| !(*c >= 0.0)) {
            out.push(TopologyViolation::InvalidSurrogateAttrs { node: n, reason: "costs must be non-negative".into() });
        }
    }

    for u in unreachable_users(t, &valid_edges) {
        out.push(TopologyViolation::UnreachableEndUser(u));
    }
    out
}

/// End-users with no content-server path that passes through a surrogate.
fn unreachable_users(t: &Topology, edges: &[&Edge]) -> Vec<NodeId> {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for e in edges {
        adj.entry(e.src).or_default().push(e.dst);
    }
    // state: (node, passed a surrogate)
    let mut seen: BTreeSet<(NodeId, bool)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    for w in t.nodes.iter().filter(|n| n.role == Role::ContentServer) {
        if seen.insert((*w, false)) {
            queue.push_back((*w, false));
        }
    }
    while let Some((n, via)) = queue.pop_front() {
        for &m in adj.get(&n).map(Vec::as_slice).unwrap_or_default() {
            let state = (m, via || m.is_surrogate());
            if seen.insert(state) {
                queue.push_back(state);
            }
        }
    }
    let mut users: Vec<NodeId> =
        t.nodes.iter().copied().filter(|n| n.role == Role::EndUser && !seen.contains(&(*n, true))).collect();
    users.sort();
    users.dedup();
    users
}

pub fn save_topology(t: &Topology, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_json(t, path.as_ref())
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let t: Topology = crate::io::read_json(path.as_ref())?;
    let violations = validate(&t);
    if violations.is_empty() {
        Ok(t)
    } else {
        Err(Error::InvalidTopology(violations))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyGenParams {
    pub n_surrogates: u32,
    pub n_content_servers: u32,
    pub n_end_users: u32,
    /// Mbps.
    pub bandwidth_choices: Vec<f64>,
    pub surrogate_out_degree: (u32, u32),
    /// Number of surrogates each end-user attaches to.
    pub end_user_links: (u32, u32),
    pub content_out_degree: (u32, u32),
    /// vCPU, inclusive integer range.
    pub capacity_range: (u32, u32),
    /// When non-empty, capacities are drawn from this set instead.
    pub capacity_choices: Vec<u32>,
    /// ms per Gbps.
    pub delay_range: (f64, f64),
    pub site_license_cost: f64,
    /// Dollars per vCPU, inclusive integer range.
    pub operational_cost_range: (u32, u32),
    pub bandwidth_cost: f64,
    pub seed: u64,
}

impl Default for TopologyGenParams {
    fn default() -> Self {
        Self {
            n_surrogates: 9,
            n_content_servers: 5,
            n_end_users: 9,
            bandwidth_choices: vec![100.0, 1000.0, 10000.0],
            surrogate_out_degree: (1, 4),
            end_user_links: (1, 2),
            content_out_degree: (1, 3),
            capacity_range: (16, 64),
            capacity_choices: Vec::new(),
            delay_range: (50.0, 500.0),
            site_license_cost: 1000.0,
            operational_cost_range: (5, 10),
            bandwidth_cost: 10.0,
            seed: 0,
        }
    }
}

impl TopologyGenParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n_surrogates == 0 || self.n_content_servers == 0 || self.n_end_users == 0 {
            return bad("node counts must be at least 1");
        }
        if self.bandwidth_choices.is_empty() || self.bandwidth_choices.iter().any(|b| !(*b > 0.0)) {
            return bad("bandwidth_choices must be non-empty and positive");
        }
        for (name, (lo, hi)) in [
            ("surrogate_out_degree", self.surrogate_out_degree),
            ("end_user_links", self.end_user_links),
            ("content_out_degree", self.content_out_degree),
            ("capacity_range", self.capacity_range),
            ("operational_cost_range", self.operational_cost_range),
        ] {
            if lo > hi {
                return bad(&format!("{name}: min exceeds max"));
            }
        }
        if self.end_user_links.0 == 0 || self.content_out_degree.0 == 0 {
            return bad("end-users and content servers need at least one link");
        }
        if self.capacity_choices.is_empty() && self.capacity_range.0 == 0 {
            return bad("capacity must be positive");
        }
        if self.capacity_choices.contains(&0) {
            return bad("capacity choices must be positive");
        }
        let (dlo, dhi) = self.delay_range;
        if !(dlo >= 0.0 && dlo <= dhi && dhi.is_finite()) {
            return bad("delay_range must satisfy 0 <= min <= max");
        }
        if !(self.site_license_cost >= 0.0 && self.bandwidth_cost >= 0.0) {
            return bad("costs must be non-negative");
        }
        Ok(())
    }
}

const MAX_GENERATION_ATTEMPTS: u32 = 50;

/// Sub-seed for attempt `attempt` of a generator seeded with `seed`.
pub(crate) fn sub_seed(seed: u64, attempt: u64) -> u64 {
    seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Random topology; the edge set is redrawn until every end-user is reachable.
pub fn generate_topology(params: &TopologyGenParams) -> Result<Topology> {
    params.check()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, attempt as u64));
        let t = draw(params, &mut rng);
        if validate(&t).is_empty() {
            return Ok(t);
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
        reason: "some end-user stayed unreachable from every content server".into(),
    })
}

fn draw(p: &TopologyGenParams, rng: &mut ChaCha8Rng) -> Topology {
    let surrogates: Vec<NodeId> = (0..p.n_surrogates).map(NodeId::surrogate).collect();
    let contents: Vec<NodeId> = (0..p.n_content_servers).map(NodeId::content).collect();
    let users: Vec<NodeId> = (0..p.n_end_users).map(NodeId::user).collect();

    let mut attrs = BTreeMap::new();
    for &s in &surrogates {
        let capacity = if p.capacity_choices.is_empty() {
            rng.gen_range(p.capacity_range.0..=p.capacity_range.1)
        } else {
            *p.capacity_choices.choose(rng).unwrap()
        };
        let op = rng.gen_range(p.operational_cost_range.0..=p.operational_cost_range.1);
        attrs.insert(
            s,
            SurrogateAttrs {
                capacity: capacity as f64,
                site_license_cost: p.site_license_cost,
                operational_cost_per_unit: op as f64,
                bandwidth_cost_per_unit: p.bandwidth_cost,
            },
        );
    }

    let mut edges = Vec::new();
    let mut link = |rng: &mut ChaCha8Rng, src: NodeId, dst: NodeId| {
        let (lo, hi) = p.delay_range;
        edges.push(Edge {
            src,
            dst,
            bandwidth: *p.bandwidth_choices.choose(rng).unwrap(),
            delay_per_unit_load: if lo == hi { lo } else { rng.gen_range(lo..=hi) },
            hop_count: 1,
        });
    };

    for &s in &surrogates {
        let others: Vec<NodeId> = surrogates.iter().copied().filter(|&o| o != s).collect();
        for dst in pick(rng, &others, p.surrogate_out_degree) {
            link(rng, s, dst);
        }
    }
    for &w in &contents {
        for dst in pick(rng, &surrogates, p.content_out_degree) {
            link(rng, w, dst);
        }
    }
    for &u in &users {
        for src in pick(rng, &surrogates, p.end_user_links) {
            link(rng, src, u);
        }
    }

    let nodes = surrogates.into_iter().chain(contents).chain(users).collect();
    Topology::new(nodes, edges, attrs, p.bandwidth_cost)
}

/// Distinct targets, count drawn from `range` and clamped to the pool size;
/// returned in ascending order.
fn pick(rng: &mut ChaCha8Rng, pool: &[NodeId], range: (u32, u32)) -> Vec<NodeId> {
    let hi = (range.1 as usize).min(pool.len());
    let lo = (range.0 as usize).min(hi);
    let count = rng.gen_range(lo..=hi);
    let mut chosen: Vec<NodeId> = pool.choose_multiple(rng, count).copied().collect();
    chosen.sort();
    chosen
}
