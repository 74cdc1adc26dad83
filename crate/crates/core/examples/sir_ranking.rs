//! Rank the surrogates of a generated topology for each VNF type, before and
//! after instances are placed.

use vnfplace::experiment::{instance, ScenarioConfig};
use vnfplace::sir::{personalized_sir, ResidualState, SirParams};

fn main() -> vnfplace::Result<()> {
    let (t, w) = instance(&ScenarioConfig::default(), 7)?;
    let params = SirParams::default();
    let mut state = ResidualState::new(&t);

    let show = |state: &ResidualState, label: &str| {
        println!("{label}");
        for k in w.catalog.iter().map(|v| v.id).take(3) {
            let out = personalized_sir(&t, state, k, &params);
            let top: Vec<String> =
                out.vector.ranked().into_iter().map(|n| format!("{n} {:.4}", out.vector.get(n))).collect();
            println!("  type {k}: {} ({} iterations)", top.join(", "), out.iterations);
        }
    };
    show(&state, "empty network");

    // host type 0 on the two lowest-ranked surrogates
    let ranked = personalized_sir(&t, &state, 0, &params).vector.ranked();
    for &n in ranked.iter().rev().take(2) {
        let slot = state.find_slot(&w, 0, n, 0.01).expect("empty server has room");
        state.assign(&w, 0, n, slot, 0.01);
    }
    show(&state, "after placing type 0 on the two lowest-ranked surrogates");
    Ok(())
}
