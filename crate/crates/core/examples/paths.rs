//! k shortest loopless paths with a bandwidth floor on a small graph.

use vnfplace::paths::{k_shortest_paths, least_delay_path, Arc, Digraph};

fn main() {
    let arc = |src, dst, delay| Arc { src, dst, delay };
    let g = Digraph::new(
        5,
        vec![
            arc(0, 1, 1.0),
            arc(1, 4, 1.0),
            arc(0, 2, 2.0),
            arc(2, 4, 2.0),
            arc(0, 3, 1.0),
            arc(3, 4, 5.0),
            arc(1, 2, 1.0),
        ],
    );
    let residual = [0.2, 0.2, 5.0, 5.0, 5.0, 5.0, 5.0];

    let best = least_delay_path(&g, &residual, 0, 4).unwrap();
    println!("least delay: edges {:?}, delay {}", best.edges, best.total_delay_per_unit_load);

    for min_bw in [0.0, 1.0] {
        println!("k = 4, bottleneck >= {min_bw} Gbps:");
        for p in k_shortest_paths(&g, &residual, 0, 4, 4, min_bw) {
            println!(
                "  edges {:?} delay {} hops {} bottleneck {}",
                p.edges, p.total_delay_per_unit_load, p.hop_count, p.bottleneck_bandwidth
            );
        }
    }
}
