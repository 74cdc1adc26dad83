//! Place a generated workload with the heuristic and report each request.
//!
//! cargo run --release --example cpvnf -- [seed] [users]

use std::time::Instant;

use vnfplace::cpvnf::{place_all, CpvnfParams};
use vnfplace::experiment::{instance, ScenarioConfig};
use vnfplace::placement::{check_feasibility, compute_metrics, service_delay};

fn main() -> vnfplace::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let seed = args.next().unwrap_or(0);
    let mut cfg = ScenarioConfig::default();
    cfg.topology.n_end_users = args.next().unwrap_or(15) as u32;
    let (t, w) = instance(&cfg, seed)?;

    let start = Instant::now();
    let r = place_all(&t, &w, &CpvnfParams::default());
    let runtime = start.elapsed();
    assert!(check_feasibility(&r.solution, &t, &w).is_empty());

    for o in &r.outcomes {
        match &o.mapping {
            Some(m) => {
                let hosts: Vec<String> = m.hops.iter().map(|h| format!("{}#{}", h.server, h.instance_index)).collect();
                let d = service_delay(m, &t, &w)?;
                let limit = w.request(o.user).unwrap().delay_threshold;
                println!("{} via {}: {} ({d:.1} of {limit} ms)", o.user, m.content_server, hosts.join(" -> "));
            }
            None => println!("{} rejected after {} retries", o.user, o.retries_used),
        }
    }
    let m = compute_metrics(&r.solution, &t, &w, runtime)?;
    println!(
        "accepted {} rejected {} servers {} total cost {:.2} in {runtime:.2?}",
        m.accepted, m.rejected, m.servers_used, m.total_cost
    );
    Ok(())
}
