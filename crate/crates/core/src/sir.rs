//! Surrogate Importance Rank (SIR): a personalized PageRank over the
//! surrogate graph that favours servers already hosting the VNF type being
//! placed, plus the quadratic content-server penalty used for head placement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::logical_edge;
pub use crate::placement::ResidualState;
use crate::topology::{NodeId, Topology};
use crate::workload::{ServiceRequest, VnfTypeId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SirParams {
    /// pi, in (0, 1].
    pub capacity_weight: f64,
    /// psi, in (0, 1).
    pub damping: f64,
    /// Gamma >= 1, teleport multiplier for servers hosting the type.
    pub instance_weight: f64,
    /// mu > 0.
    pub penalty_coeff: f64,
    /// L1 change below which iteration stops.
    pub convergence_tol: f64,
    pub max_iterations: usize,
}

impl Default for SirParams {
    fn default() -> Self {
        Self {
            capacity_weight: 0.8,
            damping: 0.85,
            instance_weight: 2.0,
            penalty_coeff: 0.5,
            convergence_tol: 1e-8,
            max_iterations: 100,
        }
    }
}

impl SirParams {
    pub fn check(&self) -> Result<()> {
        let ok = self.capacity_weight > 0.0
            && self.capacity_weight <= 1.0
            && self.damping > 0.0
            && self.damping < 1.0
            && self.instance_weight >= 1.0
            && self.penalty_coeff > 0.0
            && self.convergence_tol > 0.0
            && self.max_iterations >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("SIR parameters out of range: {self:?}")))
        }
    }
}

/// phi per surrogate for one VNF type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirVector(pub BTreeMap<NodeId, f64>);

impl SirVector {
    pub fn get(&self, n: NodeId) -> f64 {
        self.0.get(&n).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }

    /// Surrogates by descending rank, ties to the smaller id.
    pub fn ranked(&self) -> Vec<NodeId> {
        let mut v: Vec<(NodeId, f64)> = self.0.iter().map(|(&n, &p)| (n, p)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.into_iter().map(|(n, _)| n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirOutcome {
    pub vector: SirVector,
    pub converged: bool,
    pub iterations: usize,
}

/// M_n = (pi * C'_n) * ((1 - pi) * sum of residual bandwidth on n's
/// surrogate out-links), taken literally in its multiplicative form.
pub fn node_mass(t: &Topology, n: NodeId, state: &ResidualState, pi: f64) -> f64 {
    let capacity = state.capacity(n).max(0.0);
    let bandwidth: f64 = t.surrogate_out_edges(n).iter().map(|&(e, _)| state.edge_bandwidth()[e].max(0.0)).sum();
    (pi * capacity) * ((1.0 - pi) * bandwidth)
}

/// Masses normalised to a probability vector.
pub fn initial_sir(t: &Topology, state: &ResidualState, pi: f64) -> Result<SirVector> {
    let masses: Vec<(NodeId, f64)> = t.surrogates().into_iter().map(|n| (n, node_mass(t, n, state, pi))).collect();
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateState);
    }
    Ok(SirVector(masses.into_iter().map(|(n, m)| (n, m / total)).collect()))
}

/// Surrogate subgraph in dense form: in-neighbours and out-degrees.
struct SurrogateGraph {
    nodes: Vec<NodeId>,
    incoming: Vec<Vec<usize>>,
    out_degree: Vec<usize>,
}

impl SurrogateGraph {
    fn new(t: &Topology) -> Self {
        let nodes = t.surrogates();
        let pos: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut out_degree = vec![0; nodes.len()];
        for (i, &n) in nodes.iter().enumerate() {
            for (_, dst) in t.surrogate_out_edges(n) {
                incoming[pos[&dst]].push(i);
                out_degree[i] += 1;
            }
        }
        Self { nodes, incoming, out_degree }
    }
}

/// Fixed point of phi_n = Gamma_k(n) (1 - psi) / |N| + psi * sum over
/// in-neighbours i of phi_i / outdeg(i), iterated from the initial SIR.
/// Stops once the vector is provably within the tolerance of the fixed
/// point in L1 distance.
/// Rank held by surrogates without out-links is spread uniformly.
pub fn personalized_sir(t: &Topology, state: &ResidualState, k: VnfTypeId, params: &SirParams) -> SirOutcome {
    let g = SurrogateGraph::new(t);
    let n = g.nodes.len();
    assert!(n > 0, "topology has no surrogates");
    let psi = params.damping;
    let teleport: Vec<f64> = g
        .nodes
        .iter()
        .map(|&s| {
            let gamma = if state.hosts_type(k, s) { params.instance_weight } else { 1.0 };
            gamma * (1.0 - psi) / n as f64
        })
        .collect();

    let mut phi: Vec<f64> = match initial_sir(t, state, params.capacity_weight) {
        Ok(v) => g.nodes.iter().map(|&s| v.get(s)).collect(),
        Err(_) => vec![1.0 / n as f64; n],
    };

    let inv_n = 1.0 / n as f64;
    // one application of the fixed-point map to entry v
    let map = |phi: &[f64], v: usize, dangling: f64| {
        let inflow: f64 = g.incoming[v].iter().map(|&i| phi[i] / g.out_degree[i] as f64).sum();
        teleport[v] + psi * (inflow + dangling * inv_n)
    };

    // Gauss-Seidel sweeps: entries are updated in place, so later entries of
    // a sweep already see earlier ones.
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let mut dangling: f64 = (0..n).filter(|&i| g.out_degree[i] == 0).map(|i| phi[i]).sum();
        for v in 0..n {
            let next = map(&phi, v, dangling);
            if g.out_degree[v] == 0 {
                dangling += next - phi[v];
            }
            phi[v] = next;
        }
        // The map is a psi-contraction in L1, so the distance to the fixed
        // point is at most residual / (1 - psi).
        let residual: f64 = (0..n).map(|v| (map(&phi, v, dangling) - phi[v]).abs()).sum();
        if residual / (1.0 - psi) < params.convergence_tol {
            converged = true;
            break;
        }
    }

    // The fixed point's total mass is known exactly: sum(Gamma) / |N|.
    let mass: f64 = teleport.iter().sum::<f64>() / (1.0 - psi);
    let total: f64 = phi.iter().sum();
    if converged && total > 0.0 {
        for x in &mut phi {
            *x *= mass / total;
        }
    }

    SirOutcome { vector: SirVector(g.nodes.iter().copied().zip(phi).collect()), converged, iterations }
}

/// Q(w, n) = mu * (D(w, n) / D_h)^2 with D the least-delay path delay at the
/// request's load; unreachable pairs get an infinite penalty.
pub fn content_penalty(t: &Topology, w: NodeId, n: NodeId, req: &ServiceRequest, mu: f64) -> f64 {
    match logical_edge(t, w, n) {
        Some(e) => penalty(e.delay_per_unit_load * req.load, req.delay_threshold, mu),
        None => f64::INFINITY,
    }
}

pub(crate) fn penalty(delay_ms: f64, threshold_ms: f64, mu: f64) -> f64 {
    let ratio = delay_ms / threshold_ms;
    mu * ratio * ratio
}
