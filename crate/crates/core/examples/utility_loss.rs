//! Utility loss and distance on a three-outcome, two-strategy model.
//!
//! cargo run --example utility_loss

use elicit::model::DecisionModel;
use elicit::utility::{averaged_distance, distance, utility_loss};

const MODEL: &str = r#"{
  "outcomes": [
    {"id": 0, "label": "A", "question_text": "outcome A"},
    {"id": 1, "label": "B", "question_text": "outcome B"},
    {"id": 2, "label": "C", "question_text": "outcome C"}
  ],
  "histories": [{"id": 0, "label": "ANY", "prior": 1.0}],
  "strategies": [
    {"id": 0, "label": "s1", "description": "A or B with equal odds"},
    {"id": 1, "label": "s2", "description": "mostly A, sometimes C"}
  ],
  "prob": [[[0.5, 0.5, 0.0]], [[0.8, 0.0, 0.2]]],
  "best_anchor": 0,
  "worst_anchor": 2
}"#;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::from_json(MODEL)?;
    let user = [1.0, 0.9, 0.0];
    let proto = [1.0, 0.2, 0.0];

    for (name, u) in [("user", &user), ("prototype", &proto)] {
        let eus = model.strategy_utilities(u, 0)?;
        println!("{name:<9} EU(s1) = {:.2}  EU(s2) = {:.2}", eus[0], eus[1]);
    }
    println!(
        "UL(user, prototype)  = {:.2}",
        utility_loss(&model, user, proto, 0)?
    );
    println!(
        "UL(prototype, user)  = {:.2}",
        utility_loss(&model, proto, user, 0)?
    );
    println!(
        "distance             = {:.3}",
        distance(&model, user, proto, 0)?
    );
    println!(
        "averaged distance    = {:.3}",
        averaged_distance(&model, user, proto)?
    );
    Ok(())
}
