//! Grows the question tree for one history and prints it.
//!
//! cargo run --example build_tree -- 45YO

use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;
use elicit::pipeline::Elicitor;
use elicit::tree::{TreeNode, DEFAULT_GAP};

fn print(node: &TreeNode, indent: usize) {
    let pad = "  ".repeat(indent);
    match node {
        TreeNode::Leaf(leaf) => println!(
            "{pad}-> cluster {} (prototype {}, {:?})",
            leaf.label, leaf.prototype, leaf.counts
        ),
        TreeNode::Split { question, yes, no } => {
            println!("{pad}{}", question.text);
            println!("{pad}yes:");
            print(yes, indent + 1);
            println!("{pad}no:");
            print(no, indent + 1);
        }
    }
}

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let selector = std::env::args().nth(1).unwrap_or_else(|| "35YO".into());
    let h = model
        .find_history(&selector)
        .ok_or(elicit::error::Error::UnknownHistory(selector))?;
    let (db, _) = GeneratorSpec::bundled_noisy().generate()?;

    let e = Elicitor::train(&db, &model, h, 4, DEFAULT_GAP)?;
    println!(
        "{}: {} training functions, depth {}, {} leaves\n",
        model.histories()[h].label,
        db.len(),
        e.tree.depth(),
        e.tree.root.leaves().len()
    );
    print(&e.tree.root, 0);
    Ok(())
}
