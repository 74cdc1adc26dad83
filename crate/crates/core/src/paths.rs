//! Loopless k-shortest paths by delay over a directed graph with residual
//! bandwidth filtering.
//!
//! Paths are totally ordered by `(total delay, edge-id sequence)`, so equal
//! delay routes come out in lexicographic edge order and every query is
//! deterministic. Delays are always summed from the source along the path,
//! which makes the reported totals bit-identical to a naive re-summation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Index of an edge in its owning graph (and in the topology edge list).
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
    /// ms per Gbps of carried load.
    pub delay: f64,
}

/// Dense directed graph. Node ids are `0..node_count`, edge ids index `arcs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Digraph {
    node_count: usize,
    arcs: Vec<Arc>,
    out: Vec<Vec<EdgeId>>,
}

impl Digraph {
    pub fn new(node_count: usize, arcs: Vec<Arc>) -> Self {
        let mut out = vec![Vec::new(); node_count];
        for (id, arc) in arcs.iter().enumerate() {
            assert!(arc.src < node_count && arc.dst < node_count, "arc endpoint out of range");
            out[arc.src].push(id);
        }
        Self { node_count, arcs, out }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arc(&self, id: EdgeId) -> &Arc {
        &self.arcs[id]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn out_edges(&self, node: usize) -> &[EdgeId] {
        &self.out[node]
    }

    /// Sum of edge delays, accumulated from the first edge.
    pub fn path_delay(&self, edges: &[EdgeId]) -> f64 {
        edges.iter().fold(0.0, |acc, &e| acc + self.arcs[e].delay)
    }

    /// Node sequence visited by `edges` starting at `src`.
    fn path_nodes(&self, src: usize, edges: &[EdgeId]) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(edges.len() + 1);
        nodes.push(src);
        nodes.extend(edges.iter().map(|&e| self.arcs[e].dst));
        nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedPath {
    pub edges: Vec<EdgeId>,
    pub total_delay_per_unit_load: f64,
    pub hop_count: usize,
    /// Minimum residual bandwidth along the path (Gbps); infinite when empty.
    pub bottleneck_bandwidth: f64,
}

impl RoutedPath {
    fn from_edges(g: &Digraph, residual: &[f64], edges: Vec<EdgeId>) -> Self {
        let bottleneck = edges.iter().map(|&e| residual[e]).fold(f64::INFINITY, f64::min);
        Self {
            total_delay_per_unit_load: g.path_delay(&edges),
            hop_count: edges.len(),
            bottleneck_bandwidth: bottleneck,
            edges,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn order(&self, other: &Self) -> Ordering {
        self.total_delay_per_unit_load
            .total_cmp(&other.total_delay_per_unit_load)
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

struct Blocked<'a> {
    nodes: &'a [bool],
    edges: &'a [bool],
}

/// Least `(delay, edge sequence)` path from `src` to `dst` using only edges
/// with `residual >= min_bandwidth` that are not blocked.
fn dijkstra(
    g: &Digraph,
    residual: &[f64],
    min_bandwidth: f64,
    src: usize,
    dst: usize,
    blocked: &Blocked<'_>,
) -> Option<Vec<EdgeId>> {
    let n = g.node_count();
    let mut label: Vec<Option<(f64, Vec<EdgeId>)>> = vec![None; n];
    let mut settled = vec![false; n];
    label[src] = Some((0.0, Vec::new()));

    loop {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if settled[v] {
                continue;
            }
            let Some((d, seq)) = &label[v] else { continue };
            let better = match best {
                None => true,
                Some(b) => {
                    let (bd, bseq) = label[b].as_ref().unwrap();
                    d.total_cmp(bd).then_with(|| seq.cmp(bseq)) == Ordering::Less
                }
            };
            if better {
                best = Some(v);
            }
        }
        let u = best?;
        if u == dst {
            return label[u].take().map(|(_, seq)| seq);
        }
        settled[u] = true;
        let (du, seq_u) = label[u].clone().unwrap();
        for &e in g.out_edges(u) {
            let arc = g.arc(e);
            let v = arc.dst;
            if settled[v] || blocked.nodes[v] || blocked.edges[e] || residual[e] < min_bandwidth {
                continue;
            }
            let dv = du + arc.delay;
            let replace = match &label[v] {
                None => true,
                Some((old_d, old_seq)) => match dv.total_cmp(old_d) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        // compare seq_u + [e] against old_seq lexicographically
                        let mut cand = seq_u.clone();
                        cand.push(e);
                        cand < *old_seq
                    }
                },
            };
            if replace {
                let mut seq = seq_u.clone();
                seq.push(e);
                label[v] = Some((dv, seq));
            }
        }
    }
}

/// Up to `k` loopless paths from `src` to `dst`, in nondecreasing delay order,
/// each with bottleneck residual bandwidth at least `min_bandwidth`.
pub fn k_shortest_paths(
    g: &Digraph,
    residual: &[f64],
    src: usize,
    dst: usize,
    k: usize,
    min_bandwidth: f64,
) -> Vec<RoutedPath> {
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(residual.len(), g.edge_count(), "residual length mismatch");
    if src == dst {
        return vec![RoutedPath::from_edges(g, residual, Vec::new())];
    }
    let n = g.node_count();
    let no_nodes = vec![false; n];
    let no_edges = vec![false; g.edge_count()];
    let unblocked = Blocked { nodes: &no_nodes, edges: &no_edges };

    let Some(first) = dijkstra(g, residual, min_bandwidth, src, dst, &unblocked) else {
        return Vec::new();
    };
    let mut accepted = vec![RoutedPath::from_edges(g, residual, first)];
    let mut candidates: Vec<RoutedPath> = Vec::new();

    while accepted.len() < k {
        let prev = accepted.last().unwrap().edges.clone();
        let prev_nodes = g.path_nodes(src, &prev);
        for spur_idx in 0..prev.len() {
            let spur_node = prev_nodes[spur_idx];
            let root = &prev[..spur_idx];

            let mut blocked_edges = vec![false; g.edge_count()];
            for p in &accepted {
                if p.edges.len() > spur_idx && &p.edges[..spur_idx] == root {
                    blocked_edges[p.edges[spur_idx]] = true;
                }
            }
            let mut blocked_nodes = vec![false; n];
            for &v in &prev_nodes[..spur_idx] {
                blocked_nodes[v] = true;
            }
            let blocked = Blocked { nodes: &blocked_nodes, edges: &blocked_edges };
            if let Some(spur) = dijkstra(g, residual, min_bandwidth, spur_node, dst, &blocked) {
                let mut edges = root.to_vec();
                edges.extend(spur);
                if !accepted.iter().any(|p| p.edges == edges) && !candidates.iter().any(|p| p.edges == edges) {
                    candidates.push(RoutedPath::from_edges(g, residual, edges));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let best = (0..candidates.len()).min_by(|&a, &b| candidates[a].order(&candidates[b])).unwrap();
        accepted.push(candidates.swap_remove(best));
    }
    accepted
}

/// Least-delay path ignoring bandwidth; `None` iff `dst` is unreachable.
pub fn least_delay_path(g: &Digraph, residual: &[f64], src: usize, dst: usize) -> Option<RoutedPath> {
    k_shortest_paths(g, residual, src, dst, 1, 0.0).into_iter().next()
}
