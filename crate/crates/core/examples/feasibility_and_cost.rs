//! Build a one-server instance by hand, then check and price a placement of it.

use vnfplace::placement::{check_feasibility, compute_cost, service_delay, ChainMapping, Hop, PlacementSolution};
use vnfplace::topology::{Edge, NodeId, SurrogateAttrs, Topology};
use vnfplace::workload::{ServiceRequest, VnfType, Workload};

fn main() -> vnfplace::Result<()> {
    let (s0, w0, u0) = (NodeId::surrogate(0), NodeId::content(0), NodeId::user(0));
    let link = |src, dst| Edge { src, dst, bandwidth: 1000.0, delay_per_unit_load: 20.0, hop_count: 1 };
    let attrs = SurrogateAttrs {
        capacity: 16.0,
        site_license_cost: 1000.0,
        operational_cost_per_unit: 5.0,
        bandwidth_cost_per_unit: 10.0,
    };
    let t = Topology::new(vec![s0, w0, u0], vec![link(w0, s0), link(s0, u0)], [(s0, attrs)].into(), 10.0);

    let firewall = VnfType {
        id: 0,
        resource_requirement: 4.0,
        processing_capacity: 0.1,
        license_cost: 100.0,
        max_instances: 1,
        processing_delay: [(s0, 30.0)].into(),
    };
    let request = |threshold| ServiceRequest {
        user: u0,
        chain: vec![0],
        load: 0.05,
        delay_threshold: threshold,
        content_servers: [w0].into(),
    };
    let mapping = ChainMapping {
        user: u0,
        content_server: w0,
        hops: vec![Hop { vnf_type: 0, server: s0, instance_index: 0 }],
        routed_paths: vec![vec![0], vec![1]],
    };

    for threshold in [100.0, 2.0] {
        let w = Workload { catalog: vec![firewall.clone()], requests: vec![request(threshold)] };
        let s = PlacementSolution::assemble(&t, &w, [mapping.clone()], []);
        println!("threshold {threshold} ms, delay {:.2} ms", service_delay(&mapping, &t, &w)?);
        let violations = check_feasibility(&s, &t, &w);
        if violations.is_empty() {
            let c = compute_cost(&s, &t, &w)?;
            println!(
                "  feasible: license {} site {} operational {} communication {} total {}",
                c.vnf_license, c.site_license, c.operational, c.communication, c.total
            );
        }
        for v in violations {
            println!("  {v}");
        }
    }
    Ok(())
}
