//! Generates a corpus, writes it as CSV, and reads it back.
//!
//! cargo run --example synthetic_corpus

use elicit::corpus::{load_database, save_database, GeneratorSpec};
use elicit::model::DecisionModel;

fn main() -> elicit::error::Result<()> {
    let model = DecisionModel::mini_panda();
    let mut spec = GeneratorSpec::bundled();
    spec.samples = 12;
    for w in spec.validate()? {
        println!("warning: {w}");
    }
    println!(
        "archetype separation {:.4}, noise {}",
        spec.separation(),
        spec.noise
    );

    let (db, labels) = spec.generate()?;
    for (u, &l) in db.functions().iter().zip(&labels) {
        println!(
            "{} {:<16} {:?}",
            u.id,
            spec.archetypes[l].name,
            &u.values[..5]
        );
    }

    let dir = std::env::temp_dir().join("elicit-example");
    std::fs::create_dir_all(&dir).map_err(|e| elicit::error::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("corpus.csv");
    save_database(&db, &path)?;
    let back = load_database(&path, &model)?;
    println!(
        "\nreloaded {} rows ({} dropped) from {}, same fingerprint: {}",
        back.db.len(),
        back.dropped,
        path.display(),
        back.db.fingerprint() == db.fingerprint()
    );
    Ok(())
}
