//! Utility functions, normalization, and the utility-loss distance.
//!
//! Utility loss `UL(u_true, u_proto | h)` is the expected-utility shortfall,
//! measured under `u_true`, of following the strategy that is optimal for
//! `u_proto` instead of the one optimal for `u_true`. It is asymmetric; the
//! distance between two utility functions is the mean of both directions and
//! is not a metric.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{argmax, DecisionModel};

/// A normalized utility vector, one value per outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityFunction {
    pub id: String,
    pub values: Vec<f64>,
}

impl UtilityFunction {
    /// Validates `values` against the anchor convention: `values[best] = 1`,
    /// `values[worst] = 0` and everything in `[0, 1]`.
    pub fn new(id: impl Into<String>, values: Vec<f64>, best: usize, worst: usize) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidUtility {
            id: id.clone(),
            reason,
        };
        if best >= values.len() || worst >= values.len() {
            return Err(invalid(format!(
                "anchors out of range for {} values",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(invalid(format!(
                "value {v} at outcome {i} is outside [0, 1]"
            )));
        }
        if values[best] != 1.0 || values[worst] != 0.0 {
            return Err(invalid(format!(
                "anchor values are {} and {}, expected 1 and 0",
                values[best], values[worst]
            )));
        }
        Ok(UtilityFunction { id, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for UtilityFunction {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Result of [`normalize`]: the function plus the outcome indices whose
/// transformed values fell outside `[0, 1]` and were clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub function: UtilityFunction,
    pub clamped: Vec<usize>,
}

/// Maps `raw` by the positive affine transform sending the best anchor to 1
/// and the worst to 0, clamping any residual values into `[0, 1]`.
pub fn normalize(
    id: impl Into<String>,
    raw: &[f64],
    best: usize,
    worst: usize,
) -> Result<Normalized> {
    let id = id.into();
    if best >= raw.len() || worst >= raw.len() || best == worst {
        return Err(Error::InvalidUtility {
            id,
            reason: "invalid anchor indices".into(),
        });
    }
    let (hi, lo) = (raw[best], raw[worst]);
    if hi.is_nan() || lo.is_nan() || hi <= lo || !(hi - lo).is_finite() {
        return Err(Error::NotNormalizable {
            best: hi,
            worst: lo,
        });
    }
    let span = hi - lo;
    let mut clamped = Vec::new();
    let values = raw
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if i == best {
                return 1.0;
            }
            if i == worst {
                return 0.0;
            }
            let t = (v - lo) / span;
            if !(0.0..=1.0).contains(&t) {
                clamped.push(i);
                if t > 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                t
            }
        })
        .collect();
    Ok(Normalized {
        function: UtilityFunction { id, values },
        clamped,
    })
}

/// `UL(u_true, u_proto | history)`.
///
/// When `u_proto` has several optimal strategies the lowest-id one is the one
/// evaluated under `u_true`.
pub fn utility_loss(
    model: &DecisionModel,
    u_true: impl AsRef<[f64]>,
    u_proto: impl AsRef<[f64]>,
    history: usize,
) -> Result<f64> {
    let own = model.strategy_utilities(u_true.as_ref(), history)?;
    let (proto_choice, _) = model.best_strategy(u_proto.as_ref(), history)?;
    let (_, best) = argmax(&own).ok_or(Error::NoStrategies)?;
    Ok(best - own[proto_choice])
}

/// Symmetrized utility loss for one history.
pub fn distance(
    model: &DecisionModel,
    u_i: impl AsRef<[f64]>,
    u_j: impl AsRef<[f64]>,
    history: usize,
) -> Result<f64> {
    let (a, b) = (u_i.as_ref(), u_j.as_ref());
    Ok((utility_loss(model, a, b, history)? + utility_loss(model, b, a, history)?) / 2.0)
}

/// Prior-weighted distance over all histories of the model.
pub fn averaged_distance(
    model: &DecisionModel,
    u_i: impl AsRef<[f64]>,
    u_j: impl AsRef<[f64]>,
) -> Result<f64> {
    let (a, b) = (u_i.as_ref(), u_j.as_ref());
    model
        .histories()
        .iter()
        .map(|h| Ok(h.prior * distance(model, a, b, h.id)?))
        .sum()
}

/// Precomputed expected utilities of a set of functions for one history, so
/// pairwise utility losses cost O(1). Values are bit-identical to
/// [`utility_loss`].
#[derive(Clone, Debug)]
pub struct LossTable {
    /// `eu[i][s]`: expected utility of strategy `s` under function `i`.
    eu: Vec<Vec<f64>>,
    best: Vec<usize>,
}

impl LossTable {
    pub fn new<U: AsRef<[f64]>>(
        model: &DecisionModel,
        functions: &[U],
        history: usize,
    ) -> Result<Self> {
        let mut eu = Vec::with_capacity(functions.len());
        let mut best = Vec::with_capacity(functions.len());
        for f in functions {
            let row = model.strategy_utilities(f.as_ref(), history)?;
            best.push(argmax(&row).ok_or(Error::NoStrategies)?.0);
            eu.push(row);
        }
        Ok(LossTable { eu, best })
    }

    pub fn len(&self) -> usize {
        self.eu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eu.is_empty()
    }

    /// Optimal strategy of function `i`.
    pub fn best_strategy(&self, i: usize) -> usize {
        self.best[i]
    }

    /// `UL(i, j)`: loss to `i` when advised by `j`.
    pub fn loss(&self, i: usize, j: usize) -> f64 {
        let row = &self.eu[i];
        row[self.best[i]] - row[self.best[j]]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.loss(i, j) + self.loss(j, i)) / 2.0
    }
}

/// A database of normalized utility functions sharing one outcome space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityDatabase {
    functions: Vec<UtilityFunction>,
    outcome_count: usize,
    #[serde(default)]
    pub source: Option<String>,
}

impl UtilityDatabase {
    pub fn new(functions: Vec<UtilityFunction>, outcome_count: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &functions {
            if f.dim() != outcome_count {
                return Err(Error::DimensionMismatch {
                    expected: outcome_count,
                    actual: f.dim(),
                });
            }
            if !seen.insert(f.id.as_str()) {
                return Err(Error::InvalidUtility {
                    id: f.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(UtilityDatabase {
            functions,
            outcome_count,
            source: None,
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn functions(&self) -> &[UtilityFunction] {
        &self.functions
    }

    pub fn get(&self, index: usize) -> Option<&UtilityFunction> {
        self.functions.get(index)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_count
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.id == id)
    }

    /// The database restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> UtilityDatabase {
        UtilityDatabase {
            functions: indices.iter().map(|&i| self.functions[i].clone()).collect(),
            outcome_count: self.outcome_count,
            source: self.source.clone(),
        }
    }

    /// Checks that the database fits `model`'s outcome space and anchors.
    pub fn check_against(&self, model: &DecisionModel) -> Result<()> {
        if self.outcome_count != model.outcome_count() {
            return Err(Error::DimensionMismatch {
                expected: model.outcome_count(),
                actual: self.outcome_count,
            });
        }
        for f in &self.functions {
            UtilityFunction::new(
                f.id.clone(),
                f.values.clone(),
                model.best_anchor(),
                model.worst_anchor(),
            )?;
        }
        Ok(())
    }

    /// SHA-256 over ids and the exact bit patterns of all values.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.outcome_count as u64).to_le_bytes());
        for f in &self.functions {
            hasher.update(f.id.as_bytes());
            hasher.update([0u8]);
            for v in &f.values {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}
