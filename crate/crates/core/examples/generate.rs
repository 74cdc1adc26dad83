//! Generate a seeded topology and workload, validate them and save both as JSON.
//!
//! cargo run --example generate -- [seed] [out-dir]

use vnfplace::topology::{generate_topology, save_topology, validate, TopologyGenParams};
use vnfplace::workload::{generate_workload, rank_requests, save_workload, WorkloadGenParams};

fn main() -> vnfplace::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let out = args.next().map_or_else(std::env::temp_dir, Into::into);

    let t = generate_topology(&TopologyGenParams { seed, ..Default::default() })?;
    assert!(validate(&t).is_empty());
    let w = generate_workload(&WorkloadGenParams { seed, ..Default::default() }, &t)?;

    println!(
        "{} surrogates, {} content servers, {} users, {} links",
        t.surrogates().len(),
        t.content_servers().len(),
        t.end_users().len(),
        t.graph().edge_count()
    );
    for s in t.surrogates() {
        let a = t.attrs(s).unwrap();
        println!("  {s}: capacity {} delta {}", a.capacity, a.operational_cost_per_unit);
    }
    println!("{} VNF types, requests in placement order:", w.catalog.len());
    for r in rank_requests(&w) {
        println!("  {} chain {:?} load {:.3} Gbps threshold {} ms", r.user, r.chain, r.load, r.delay_threshold);
    }

    let (tp, wp) = (out.join(format!("topology-{seed}.json")), out.join(format!("workload-{seed}.json")));
    save_topology(&t, &tp)?;
    save_workload(&w, &wp)?;
    println!("wrote {} and {}", tp.display(), wp.display());
    Ok(())
}
