//! A session answered by a simulated user whose utilities are known.
//! Pass `--ask` to answer the questions yourself on stdin.
//!
//! cargo run --example interactive_session [-- --ask]

use std::io::BufRead;
use std::sync::Arc;

use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;
use elicit::session::{Artifacts, SessionManager};
use elicit::tree::DEFAULT_GAP;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let spec = GeneratorSpec::bundled();
    let (db, _) = spec.generate()?;
    let manager = SessionManager::new(Arc::new(Artifacts::new(model.clone(), db, 4, DEFAULT_GAP)?));
    let ask = std::env::args().any(|a| a == "--ask");
    let user = &spec.archetypes[3];

    let mut session = manager.create_session("45YO")?;
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    while !session.is_complete() {
        let q = manager.get_question(&session.id)?;
        println!("Q: {}", q.text);
        let answer = if ask {
            let line = lines.next().and_then(|l| l.ok()).unwrap_or_default();
            line.trim().starts_with('y')
        } else {
            let tree = manager.artifacts().tree(session.history)?;
            let elicit::tree::TreeNode::Split { question, .. } =
                tree.root.descend(session.answers()).unwrap()
            else {
                unreachable!()
            };
            question.answer(&user.values)
        };
        println!("A: {}", if answer { "yes" } else { "no" });
        session = manager.submit_answer(&session.id, answer)?;
    }

    let r = session.result.as_ref().expect("complete");
    let s = &model.strategies()[r.strategy];
    println!("\ncluster {} (prototype {})", r.label, r.prototype);
    println!("recommended: {} - {}", s.label, s.description);
    println!(
        "expected utility under the prototype: {:.5}",
        r.expected_utility
    );
    if !ask {
        let (own, _) = model.best_strategy(&user.values, session.history)?;
        println!(
            "the {} archetype's own best strategy: {}",
            user.name,
            model.strategies()[own].label
        );
    }
    Ok(())
}
