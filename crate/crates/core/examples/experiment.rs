//! Scenario runs, a user-count sweep and the heuristic-to-optimum gap.

use vnfplace::experiment::{compare_gap, run_scenario, sweep_users, to_csv, ScenarioConfig, DEFAULT_USER_COUNTS};

fn main() -> vnfplace::Result<()> {
    let default = ScenarioConfig { seeds: (0..5).collect(), record_runtime: false, ..ScenarioConfig::default() };
    let tight = ScenarioConfig { seeds: default.seeds.clone(), record_runtime: false, ..ScenarioConfig::tight() };
    print!("{}", to_csv(&run_scenario(&default)?)?);
    print!("{}", to_csv(&run_scenario(&tight)?)?);

    println!("\nmean total cost by user count (nested workloads):");
    let rows = sweep_users(&default, &DEFAULT_USER_COUNTS, true)?;
    for n in DEFAULT_USER_COUNTS {
        let group: Vec<_> = rows.iter().filter(|r| r.n_users == n as usize).collect();
        let mean = group.iter().map(|r| r.total_cost).sum::<f64>() / group.len() as f64;
        let accepted: usize = group.iter().map(|r| r.accepted).sum();
        println!("  {n:>2} users: {mean:.1} ({accepted}/{} accepted)", n as usize * group.len());
    }

    let report = compare_gap(&ScenarioConfig { seeds: (0..10).collect(), ..ScenarioConfig::tiny() })?;
    println!("\ngap over 10 tiny seeds:");
    for e in &report.entries {
        match (e.ratio, &e.excluded) {
            (Some(r), _) => {
                println!("  seed {}: {:.1} / {:.1} = {r:.3}", e.seed, e.cpvnf_total, e.exact_total.unwrap())
            }
            (None, Some(why)) => println!("  seed {}: excluded, {why}", e.seed),
            (None, None) => unreachable!(),
        }
    }
    if let (Some(mean), Some(max)) = (report.mean_ratio, report.max_ratio) {
        println!("  mean {mean:.3}, max {max:.3}");
    }
    Ok(())
}
