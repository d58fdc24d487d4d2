//! Holdout error against training-set size on the noisy corpus.
//!
//! cargo run --release --example learning_curve

use elicit::corpus::GeneratorSpec;
use elicit::evaluation::learning_curve;
use elicit::model::DecisionModel;
use elicit::tree::DEFAULT_GAP;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let (db, _) = GeneratorSpec::bundled_noisy().generate()?;
    let report = learning_curve(
        &db,
        &model,
        2,
        4,
        DEFAULT_GAP,
        &[8, 16, 24, 32, 40, 48],
        500,
        11,
    )?;
    print!("{}", report.summary(&model));
    println!();
    print!("{}", report.to_csv());
    Ok(())
}
