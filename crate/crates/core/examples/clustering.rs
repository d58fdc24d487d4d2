//! Group-average clustering of the synthetic corpus under the utility-loss
//! distance, compared with the archetypes that generated it.
//!
//! cargo run --example clustering

use std::collections::BTreeMap;

use elicit::clustering::hac;
use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let spec = GeneratorSpec::bundled();
    let (db, truth) = spec.generate()?;

    for h in 0..model.histories().len() {
        let c = hac(&db, &model, h, 4)?;
        println!("{}:", model.histories()[h].label);
        for (label, cluster) in c.clusters.iter().enumerate() {
            let mut sources: BTreeMap<&str, usize> = BTreeMap::new();
            for &m in &cluster.members {
                *sources
                    .entry(spec.archetypes[truth[m]].name.as_str())
                    .or_default() += 1;
            }
            let proto = &db.functions()[cluster.prototype];
            let (best, _) = model.best_strategy(&proto.values, h)?;
            println!(
                "  cluster {label}: {:>2} members {:?}, prototype {} -> {}",
                cluster.members.len(),
                sources,
                proto.id,
                model.strategies()[best].label
            );
        }
    }
    Ok(())
}
