//! Leave-one-out error as the cluster count grows, on the noisy corpus.
//!
//! cargo run --release --example loocv

use elicit::corpus::GeneratorSpec;
use elicit::evaluation::loocv_over_k;
use elicit::model::DecisionModel;
use elicit::tree::DEFAULT_GAP;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let (db, _) = GeneratorSpec::bundled_noisy().generate()?;
    let n = db.len();
    let report = loocv_over_k(&db, &model, 0, 1..=12, DEFAULT_GAP)?;
    for p in &report.points {
        println!(
            "k = {:>2}  {:.5}  {}",
            p.x,
            p.mean_error,
            "#".repeat((p.mean_error * 2000.0) as usize)
        );
    }
    let far = loocv_over_k(&db, &model, 0, n - 1..=n - 1, DEFAULT_GAP)?;
    println!("k = {:>2}  {:.5}", n - 1, far.points[0].mean_error);
    Ok(())
}
