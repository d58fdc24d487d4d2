//! Utility databases on disk and a synthetic generator.
//!
//! The CSV layout has an `id` column followed by one column per outcome id.
//! Anchor columns may be left out and are filled with 1 and 0 on load. A row
//! with any empty cell is dropped and counted.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::utility::{UtilityDatabase, UtilityFunction};

const FOUR_ARCHETYPES: &str = include_str!("../data/four_archetypes.json");
const FOUR_ARCHETYPES_NOISY: &str = include_str!("../data/four_archetypes_noisy.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    #[serde(default)]
    pub name: String,
    pub values: Vec<f64>,
}

/// Recipe for a synthetic database: noisy copies of a few archetypal
/// utility functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub archetypes: Vec<Archetype>,
    /// Prevalence of each archetype; sums to one.
    pub weights: Vec<f64>,
    /// Half-width of the uniform per-coordinate noise.
    pub noise: f64,
    pub samples: usize,
    pub seed: u64,
    pub best_anchor: usize,
    pub worst_anchor: usize,
}

impl GeneratorSpec {
    /// Four archetypes over the bundled model's 22 outcomes, each optimal for a
    /// different strategy in every history; noise 0.02, 60 samples.
    pub fn bundled() -> Self {
        serde_json::from_str(FOUR_ARCHETYPES).expect("bundled spec parses")
    }

    /// Same archetypes with much stronger noise, so that cluster membership
    /// and optimal strategies blur.
    pub fn bundled_noisy() -> Self {
        serde_json::from_str(FOUR_ARCHETYPES_NOISY).expect("bundled spec parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.archetypes.first().map_or(0, |a| a.values.len())
    }

    /// Smallest, over archetype pairs, of the largest coordinate difference.
    pub fn separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for (i, a) in self.archetypes.iter().enumerate() {
            for b in &self.archetypes[i + 1..] {
                let widest = a
                    .values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                sep = sep.min(widest);
            }
        }
        sep
    }

    /// Checks the spec; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.archetypes.is_empty() {
            return bad("no archetypes".into());
        }
        if self.weights.len() != self.archetypes.len() {
            return bad(format!(
                "{} weights for {} archetypes",
                self.weights.len(),
                self.archetypes.len()
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be non-negative".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {total}, expected 1"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!(
                "noise {} must be a non-negative number",
                self.noise
            ));
        }
        let d = self.dim();
        for a in &self.archetypes {
            if a.values.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: a.values.len(),
                });
            }
            UtilityFunction::new(
                a.name.clone(),
                a.values.clone(),
                self.best_anchor,
                self.worst_anchor,
            )
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        }
        let mut warnings = Vec::new();
        let sep = self.separation();
        if self.archetypes.len() > 1 && self.noise >= sep / 4.0 {
            warnings.push(format!(
                "noise {} is at least a quarter of the archetype separation {sep}",
                self.noise
            ));
        }
        Ok(warnings)
    }

    /// Samples the database and the generating archetype of every function.
    ///
    /// Archetype counts are allocated by largest remainder of
    /// `samples × weight` and then shuffled, so every archetype with a
    /// non-negligible weight appears.
    pub fn generate(&self) -> Result<(UtilityDatabase, Vec<usize>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut labels = allocate(&self.weights, self.samples)
            .into_iter()
            .enumerate()
            .flat_map(|(label, count)| std::iter::repeat_n(label, count))
            .collect::<Vec<_>>();
        labels.shuffle(&mut rng);

        let width = self.samples.to_string().len().max(3);
        let functions = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let values = self.archetypes[label]
                    .values
                    .iter()
                    .enumerate()
                    .map(|(o, &v)| {
                        if o == self.best_anchor {
                            1.0
                        } else if o == self.worst_anchor {
                            0.0
                        } else if self.noise > 0.0 {
                            (v + rng.gen_range(-self.noise..=self.noise)).clamp(0.0, 1.0)
                        } else {
                            v
                        }
                    })
                    .collect();
                UtilityFunction {
                    id: format!("u{:0width$}", i + 1),
                    values,
                }
            })
            .collect();
        let db = UtilityDatabase::new(functions, self.dim())?
            .with_source(format!("synthetic seed {}", self.seed));
        Ok((db, labels))
    }
}

fn allocate(weights: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// A database read from CSV and the number of rows dropped for missing
/// values.
#[derive(Clone, Debug)]
pub struct LoadedDatabase {
    pub db: UtilityDatabase,
    pub dropped: usize,
}

pub fn load_database(path: impl AsRef<Path>, model: &DecisionModel) -> Result<LoadedDatabase> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut loaded = read_database(file, model)?;
    loaded.db = loaded.db.with_source(path.display().to_string());
    Ok(loaded)
}

pub fn read_database(reader: impl Read, model: &DecisionModel) -> Result<LoadedDatabase> {
    let d = model.outcome_count();
    let (best, worst) = (model.best_anchor(), model.worst_anchor());
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDatabase);
    }

    let mut id_column = None;
    let mut columns: Vec<(usize, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for (col, name) in headers.iter().enumerate() {
        if name == "id" {
            id_column = Some(col);
            continue;
        }
        let outcome: usize = name.parse().map_err(|_| Error::MalformedRow {
            row: 0,
            reason: format!("header {name:?} is not an outcome id"),
        })?;
        if outcome >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: outcome + 1,
            });
        }
        if !seen.insert(outcome) {
            return Err(Error::MalformedRow {
                row: 0,
                reason: format!("outcome {outcome} appears twice"),
            });
        }
        columns.push((col, outcome));
    }
    let id_column = id_column.ok_or_else(|| Error::MalformedRow {
        row: 0,
        reason: "missing id column".into(),
    })?;
    if let Some(missing) = (0..d).find(|o| *o != best && *o != worst && !seen.contains(o)) {
        return Err(Error::MalformedRow {
            row: 0,
            reason: format!("no column for outcome {missing}"),
        });
    }

    let mut functions = Vec::new();
    let mut dropped = 0;
    let mut rows = 0;
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record?;
        rows += 1;
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        if columns.iter().any(|&(col, _)| record[col].is_empty()) {
            dropped += 1;
            continue;
        }
        let mut values = vec![0.0; d];
        values[best] = 1.0;
        for &(col, outcome) in &columns {
            let v: f64 = record[col].parse().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("{:?} is not a number", &record[col]),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("value {v} for outcome {outcome} is outside [0, 1]"),
                });
            }
            values[outcome] = v;
        }
        let id = record[id_column].to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                reason: "empty id".into(),
            });
        }
        functions.push(UtilityFunction::new(id, values, best, worst)?);
    }
    if rows == 0 || functions.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    Ok(LoadedDatabase {
        db: UtilityDatabase::new(functions, d)?,
        dropped,
    })
}

pub fn save_database(db: &UtilityDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_database(db, file)
}

/// Writes every outcome column. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_database(db: &UtilityDatabase, writer: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..db.outcome_count()).map(|o| o.to_string()));
    csv.write_record(&header)?;
    for f in db.functions() {
        let mut record = vec![f.id.clone()];
        record.extend(f.values.iter().map(|v| format!("{v}")));
        csv.write_record(&record)?;
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes `id,label` rows.
pub fn save_labels(db: &UtilityDatabase, labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record(["id", "label"])?;
    for (f, l) in db.functions().iter().zip(labels) {
        csv.write_record([f.id.as_str(), &l.to_string()])?;
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
