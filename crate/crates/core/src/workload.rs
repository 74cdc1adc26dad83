//! VNF catalog and per-user service requests.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{sub_seed, NodeId, Role, Topology};

pub type VnfTypeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfType {
    pub id: VnfTypeId,
    /// vCPU per instance (R_k).
    pub resource_requirement: f64,
    /// Gbps one instance can process (P_k).
    pub processing_capacity: f64,
    /// Dollars per instance (alpha_k).
    pub license_cost: f64,
    /// Instances of this type a single surrogate may host.
    pub max_instances: u32,
    /// ms per Gbps on each surrogate (T_{k,n}).
    pub processing_delay: BTreeMap<NodeId, f64>,
}

impl VnfType {
    pub fn delay_on(&self, server: NodeId) -> f64 {
        self.processing_delay.get(&server).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub user: NodeId,
    pub chain: Vec<VnfTypeId>,
    /// Gbps.
    pub load: f64,
    /// ms.
    pub delay_threshold: f64,
    pub content_servers: BTreeSet<NodeId>,
}

impl ServiceRequest {
    pub fn head(&self) -> VnfTypeId {
        self.chain[0]
    }

    pub fn tail(&self) -> VnfTypeId {
        *self.chain.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Workload {
    pub catalog: Vec<VnfType>,
    pub requests: Vec<ServiceRequest>,
}

impl Workload {
    /// Panics on an unknown id; workloads are validated before use.
    pub fn vnf(&self, id: VnfTypeId) -> &VnfType {
        self.try_vnf(id).unwrap_or_else(|| panic!("unknown VNF type {id}"))
    }

    pub fn try_vnf(&self, id: VnfTypeId) -> Option<&VnfType> {
        self.catalog.iter().find(|v| v.id == id)
    }

    pub fn request(&self, user: NodeId) -> Option<&ServiceRequest> {
        self.requests.iter().find(|r| r.user == user)
    }

    /// Total vCPU of a request's chain.
    pub fn chain_resources(&self, req: &ServiceRequest) -> f64 {
        req.chain.iter().map(|&k| self.vnf(k).resource_requirement).sum()
    }

    /// The first `n` requests, sharing the same catalog.
    pub fn prefix(&self, n: usize) -> Workload {
        Workload { catalog: self.catalog.clone(), requests: self.requests[..n.min(self.requests.len())].to_vec() }
    }

    /// Checks every workload invariant against `t`.
    pub fn validate(&self, t: &Topology) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorkload(m));
        let mut ids = BTreeSet::new();
        for v in &self.catalog {
            if !ids.insert(v.id) {
                return bad(format!("duplicate VNF type {}", v.id));
            }
            if !(v.resource_requirement > 0.0 && v.processing_capacity > 0.0) || v.max_instances == 0 {
                return bad(format!("VNF type {} needs positive R, P and max_instances", v.id));
            }
            if !(v.license_cost >= 0.0) {
                return bad(format!("VNF type {} has a negative license cost", v.id));
            }
            for s in t.surrogates() {
                match v.processing_delay.get(&s) {
                    Some(d) if *d >= 0.0 => {}
                    _ => return bad(format!("VNF type {} lacks a processing delay for {s}", v.id)),
                }
            }
        }
        let mut users = BTreeSet::new();
        for r in &self.requests {
            if r.user.role != Role::EndUser || !t.contains(r.user) {
                return bad(format!("request user {} is not an end-user of the topology", r.user));
            }
            if !users.insert(r.user) {
                return bad(format!("user {} has more than one request", r.user));
            }
            if r.chain.is_empty() {
                return bad(format!("request of {} has an empty chain", r.user));
            }
            let distinct: BTreeSet<_> = r.chain.iter().collect();
            if distinct.len() != r.chain.len() {
                return bad(format!("request of {} repeats a VNF type", r.user));
            }
            if let Some(k) = r.chain.iter().find(|k| !ids.contains(k)) {
                return bad(format!("request of {} uses unknown VNF type {k}", r.user));
            }
            if !(r.load > 0.0) || !(r.delay_threshold > 0.0) {
                return bad(format!("request of {} needs positive load and threshold", r.user));
            }
            if r.content_servers.is_empty() {
                return bad(format!("request of {} has no content server", r.user));
            }
            if let Some(w) = r.content_servers.iter().find(|w| w.role != Role::ContentServer || !t.contains(**w)) {
                return bad(format!("request of {} lists {w}, which is not a content server", r.user));
            }
        }
        Ok(())
    }
}

pub fn save_workload(w: &Workload, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_json(w, path.as_ref())
}

pub fn load_workload(path: impl AsRef<Path>, t: &Topology) -> Result<Workload> {
    let w: Workload = crate::io::read_json(path.as_ref())?;
    w.validate(t)?;
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadGenParams {
    pub chain_length: u32,
    /// Mbps, inclusive integer range.
    pub load_range: (u32, u32),
    /// ms, inclusive integer range.
    pub threshold_range: (u32, u32),
    /// Minimum number of content servers holding each request's content.
    pub replication_degree: u32,
    pub n_vnf_types: u32,
    /// Distinct chains requests draw from; small pools make users share chains.
    pub n_chain_templates: u32,
    /// vCPU, inclusive integer range.
    pub resource_range: (u32, u32),
    /// Gbps.
    pub processing_capacity_range: (f64, f64),
    pub license_cost: f64,
    pub max_instances: u32,
    /// ms per Gbps.
    pub processing_delay_range: (f64, f64),
    pub seed: u64,
}

impl Default for WorkloadGenParams {
    fn default() -> Self {
        Self {
            chain_length: 3,
            load_range: (15, 50),
            threshold_range: (80, 250),
            replication_degree: 3,
            n_vnf_types: 6,
            n_chain_templates: 4,
            resource_range: (1, 4),
            processing_capacity_range: (0.1, 0.3),
            license_cost: 100.0,
            max_instances: 8,
            processing_delay_range: (20.0, 100.0),
            seed: 0,
        }
    }
}

impl WorkloadGenParams {
    pub fn check(&self, n_content_servers: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.chain_length == 0 || self.chain_length > self.n_vnf_types {
            return bad("chain_length must be in 1..=n_vnf_types");
        }
        if self.n_chain_templates == 0 || self.max_instances == 0 {
            return bad("n_chain_templates and max_instances must be positive");
        }
        for (name, (lo, hi)) in [
            ("load_range", self.load_range),
            ("threshold_range", self.threshold_range),
            ("resource_range", self.resource_range),
        ] {
            if lo == 0 || lo > hi {
                return bad(&format!("{name} must satisfy 0 < min <= max"));
            }
        }
        let (plo, phi) = self.processing_capacity_range;
        if !(plo > 0.0 && plo <= phi) {
            return bad("processing_capacity_range must satisfy 0 < min <= max");
        }
        let (tlo, thi) = self.processing_delay_range;
        if !(tlo >= 0.0 && tlo <= thi) {
            return bad("processing_delay_range must satisfy 0 <= min <= max");
        }
        if self.replication_degree == 0 || self.replication_degree as usize > n_content_servers {
            return bad("replication_degree must be in 1..=number of content servers");
        }
        if !(self.license_cost >= 0.0) {
            return bad("license_cost must be non-negative");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// One request per end-user of `t`, in ascending user order.
pub fn generate_workload(params: &WorkloadGenParams, t: &Topology) -> Result<Workload> {
    let contents = t.content_servers();
    params.check(contents.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, 0x574B));
    let surrogates = t.surrogates();

    let catalog: Vec<VnfType> = (0..params.n_vnf_types)
        .map(|id| {
            let resource = rng.gen_range(params.resource_range.0..=params.resource_range.1);
            let capacity = uniform(&mut rng, params.processing_capacity_range);
            let processing_delay =
                surrogates.iter().map(|&s| (s, uniform(&mut rng, params.processing_delay_range))).collect();
            VnfType {
                id,
                resource_requirement: resource as f64,
                processing_capacity: capacity,
                license_cost: params.license_cost,
                max_instances: params.max_instances,
                processing_delay,
            }
        })
        .collect();

    let type_ids: Vec<VnfTypeId> = catalog.iter().map(|v| v.id).collect();
    let templates: Vec<Vec<VnfTypeId>> = (0..params.n_chain_templates)
        .map(|_| {
            let mut ids = type_ids.clone();
            ids.shuffle(&mut rng);
            ids.truncate(params.chain_length as usize);
            ids
        })
        .collect();

    let requests = t
        .end_users()
        .into_iter()
        .map(|user| {
            let chain = templates.choose(&mut rng).unwrap().clone();
            let load_mbps = rng.gen_range(params.load_range.0..=params.load_range.1);
            let threshold = rng.gen_range(params.threshold_range.0..=params.threshold_range.1);
            let copies = rng.gen_range(params.replication_degree as usize..=contents.len());
            let mut pool = contents.clone();
            pool.shuffle(&mut rng);
            ServiceRequest {
                user,
                chain,
                load: load_mbps as f64 / 1000.0,
                delay_threshold: threshold as f64,
                content_servers: pool.into_iter().take(copies).collect(),
            }
        })
        .collect();

    Ok(Workload { catalog, requests })
}

/// Aggregate demand used for ordering: load times total chain vCPU.
pub fn demand_score(w: &Workload, r: &ServiceRequest) -> f64 {
    r.load * w.chain_resources(r)
}

fn rank_order(w: &Workload, a: &ServiceRequest, b: &ServiceRequest) -> Ordering {
    demand_score(w, b)
        .total_cmp(&demand_score(w, a))
        .then_with(|| a.delay_threshold.total_cmp(&b.delay_threshold))
        .then_with(|| a.user.cmp(&b.user))
}

/// Requests by descending demand, then ascending threshold, then user.
pub fn rank_requests(w: &Workload) -> Vec<ServiceRequest> {
    let mut ranked = w.requests.clone();
    ranked.sort_by(|a, b| rank_order(w, a, b));
    ranked
}
