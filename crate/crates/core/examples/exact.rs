//! Solve tiny instances to optimality and compare with the heuristic.

use std::time::Duration;

use vnfplace::cpvnf::{place_all, CpvnfParams};
use vnfplace::exact::{solve_exact, NoSolution, SearchBudget};
use vnfplace::experiment::{instance, ScenarioConfig};
use vnfplace::placement::compute_cost;

fn main() -> vnfplace::Result<()> {
    let cfg = ScenarioConfig::tiny();
    let budget = SearchBudget { time_limit: Duration::from_secs(10), ..Default::default() };
    for seed in 0..6 {
        let (t, w) = instance(&cfg, seed)?;
        let heuristic = place_all(&t, &w, &CpvnfParams::default());
        let h = compute_cost(&heuristic.solution, &t, &w)?.total;
        match solve_exact(&t, &w, &budget) {
            Ok(r) => println!(
                "seed {seed}: optimum {:.2} ({} nodes, proven {}), heuristic {h:.2} with {} rejected",
                r.cost.total,
                r.nodes_expanded,
                r.proven_optimal,
                heuristic.solution.rejected.len()
            ),
            Err(NoSolution::Infeasible { nodes_expanded }) => {
                println!("seed {seed}: no placement serves every request ({nodes_expanded} nodes)")
            }
            Err(e) => println!("seed {seed}: {}", vnfplace::Error::from(e)),
        }
    }
    Ok(())
}
