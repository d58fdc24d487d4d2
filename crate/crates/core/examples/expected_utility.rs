//! Expected utility of every strategy for one archetype, in every history.
//!
//! cargo run --example expected_utility

use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let spec = GeneratorSpec::bundled();
    let archetype = &spec.archetypes[1];
    println!("archetype {:?}", archetype.name);

    for h in model.histories() {
        let eus = model.strategy_utilities(&archetype.values, h.id)?;
        let (best, eu) = model.best_strategy(&archetype.values, h.id)?;
        println!("\n{} (prior {})", h.label, h.prior);
        for (s, v) in model.strategies().iter().zip(&eus) {
            let mark = if s.id == best { "*" } else { " " };
            println!("  {mark} {:<22} {v:.5}", s.label);
        }
        println!("  best: {} ({eu:.5})", model.strategies()[best].description);
    }
    Ok(())
}
