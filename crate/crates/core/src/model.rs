//! Decision model: outcomes, patient histories, strategies and the outcome
//! distribution each strategy induces for each history.
//!
//! The distribution is stored directly as a `(strategy, history, outcome)`
//! table. Every row is validated to sum to one on load and then renormalized
//! exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted on load.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const MINI_PANDA: &str = include_str!("../data/mini_panda.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: usize,
    pub label: String,
    /// Phrase used when the outcome appears inside a question.
    pub question_text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub id: usize,
    pub label: String,
    pub prior: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub id: usize,
    pub label: String,
    pub description: String,
}

/// On-disk layout of a model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    outcomes: Vec<Outcome>,
    histories: Vec<History>,
    strategies: Vec<Strategy>,
    prob: Vec<Vec<Vec<f64>>>,
    best_anchor: usize,
    worst_anchor: usize,
}

/// A validated, immutable decision model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DecisionModel {
    name: Option<String>,
    description: Option<String>,
    outcomes: Vec<Outcome>,
    histories: Vec<History>,
    strategies: Vec<Strategy>,
    /// Flattened `[strategy][history][outcome]`.
    prob: Vec<f64>,
    best_anchor: usize,
    worst_anchor: usize,
}

impl TryFrom<ModelFile> for DecisionModel {
    type Error = Error;

    fn try_from(mut file: ModelFile) -> Result<Self> {
        file.outcomes.sort_by_key(|o| o.id);
        file.histories.sort_by_key(|h| h.id);
        file.strategies.sort_by_key(|s| s.id);
        check_dense("outcome", file.outcomes.iter().map(|o| o.id))?;
        check_dense("history", file.histories.iter().map(|h| h.id))?;
        check_dense("strategy", file.strategies.iter().map(|s| s.id))?;

        let d = file.outcomes.len();
        let n_hist = file.histories.len();
        let n_strat = file.strategies.len();
        if d < 2 {
            return Err(Error::InvalidModel(
                "at least two outcomes are required".into(),
            ));
        }
        if n_hist == 0 {
            return Err(Error::InvalidModel(
                "at least one history is required".into(),
            ));
        }
        if n_strat < 2 {
            return Err(Error::InvalidModel(
                "at least two strategies are required".into(),
            ));
        }
        for h in &file.histories {
            if !(0.0..=1.0).contains(&h.prior) {
                return Err(Error::InvalidModel(format!(
                    "prior of history {} is outside [0, 1]",
                    h.id
                )));
            }
        }
        let prior_sum: f64 = file.histories.iter().map(|h| h.prior).sum();
        if (prior_sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "history priors sum to {prior_sum}, expected 1"
            )));
        }
        for (kind, anchor) in [
            ("best anchor", file.best_anchor),
            ("worst anchor", file.worst_anchor),
        ] {
            if anchor >= d {
                return Err(Error::InvalidModel(format!(
                    "{kind} {anchor} is not an outcome id"
                )));
            }
        }
        if file.best_anchor == file.worst_anchor {
            return Err(Error::InvalidModel(
                "best and worst anchors coincide".into(),
            ));
        }

        if file.prob.len() != n_strat {
            return Err(Error::InvalidModel(format!(
                "prob has {} strategy rows, expected {n_strat}",
                file.prob.len()
            )));
        }
        let mut prob = Vec::with_capacity(n_strat * n_hist * d);
        for (s, per_history) in file.prob.iter().enumerate() {
            if per_history.len() != n_hist {
                return Err(Error::InvalidModel(format!(
                    "prob[{s}] has {} history rows, expected {n_hist}",
                    per_history.len()
                )));
            }
            for (h, row) in per_history.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::InvalidModel(format!(
                        "prob[{s}][{h}] has {} entries, expected {d}",
                        row.len()
                    )));
                }
                if let Some(bad) = row
                    .iter()
                    .find(|p| !(p.is_finite() && **p >= 0.0 && **p <= 1.0))
                {
                    return Err(Error::InvalidModel(format!(
                        "prob[{s}][{h}] contains {bad}, outside [0, 1]"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::RowSum {
                        strategy: s,
                        history: h,
                        sum,
                    });
                }
                if sum == 1.0 {
                    prob.extend_from_slice(row);
                } else {
                    prob.extend(row.iter().map(|p| p / sum));
                }
            }
        }

        Ok(DecisionModel {
            name: file.name,
            description: file.description,
            outcomes: file.outcomes,
            histories: file.histories,
            strategies: file.strategies,
            prob,
            best_anchor: file.best_anchor,
            worst_anchor: file.worst_anchor,
        })
    }
}

impl From<DecisionModel> for ModelFile {
    fn from(model: DecisionModel) -> Self {
        let prob = (0..model.strategies.len())
            .map(|s| {
                (0..model.histories.len())
                    .map(|h| model.distribution(s, h).to_vec())
                    .collect()
            })
            .collect();
        ModelFile {
            name: model.name,
            description: model.description,
            outcomes: model.outcomes,
            histories: model.histories,
            strategies: model.strategies,
            prob,
            best_anchor: model.best_anchor,
            worst_anchor: model.worst_anchor,
        }
    }
}

fn check_dense(kind: &'static str, ids: impl Iterator<Item = usize>) -> Result<()> {
    for (expected, id) in ids.enumerate() {
        if id != expected {
            return Err(Error::InvalidModel(format!(
                "{kind} ids must be dense and unique starting at 0 (found {id} at position {expected})"
            )));
        }
    }
    Ok(())
}

impl DecisionModel {
    /// Builds a model from parts; `prob` is indexed `[strategy][history][outcome]`.
    pub fn new(
        outcomes: Vec<Outcome>,
        histories: Vec<History>,
        strategies: Vec<Strategy>,
        prob: Vec<Vec<Vec<f64>>>,
        best_anchor: usize,
        worst_anchor: usize,
    ) -> Result<Self> {
        ModelFile {
            name: None,
            description: None,
            outcomes,
            histories,
            strategies,
            prob,
            best_anchor,
            worst_anchor,
        }
        .try_into()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// The bundled illustrative prenatal-testing model (22 outcomes,
    /// 18 strategies, 4 age histories). Its probabilities are synthetic.
    pub fn mini_panda() -> Self {
        Self::from_json(MINI_PANDA).expect("bundled model is valid")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn best_anchor(&self) -> usize {
        self.best_anchor
    }

    pub fn worst_anchor(&self) -> usize {
        self.worst_anchor
    }

    /// Resolves a history by numeric id or by (case-insensitive) label.
    pub fn find_history(&self, selector: &str) -> Option<usize> {
        let selector = selector.trim();
        if let Ok(id) = selector.parse::<usize>() {
            return (id < self.histories.len()).then_some(id);
        }
        self.histories
            .iter()
            .position(|h| h.label.eq_ignore_ascii_case(selector))
    }

    /// `P(· | strategy, history)`.
    pub fn distribution(&self, strategy: usize, history: usize) -> &[f64] {
        let d = self.outcomes.len();
        let start = (strategy * self.histories.len() + history) * d;
        &self.prob[start..start + d]
    }

    pub fn check_history(&self, history: usize) -> Result<()> {
        if history < self.histories.len() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "history",
                id: history,
            })
        }
    }

    fn check_strategy(&self, strategy: usize) -> Result<()> {
        if strategy < self.strategies.len() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "strategy",
                id: strategy,
            })
        }
    }

    fn check_dimension(&self, utility: &[f64]) -> Result<()> {
        if utility.len() == self.outcomes.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.outcomes.len(),
                actual: utility.len(),
            })
        }
    }

    /// `Σ_o P(o | strategy, history) · utility[o]`.
    ///
    /// No clamping is applied, so the result is linear in `utility`.
    pub fn expected_utility(
        &self,
        utility: &[f64],
        strategy: usize,
        history: usize,
    ) -> Result<f64> {
        self.check_dimension(utility)?;
        self.check_strategy(strategy)?;
        self.check_history(history)?;
        Ok(dot(self.distribution(strategy, history), utility))
    }

    /// Expected utility of every strategy, indexed by strategy id.
    pub fn strategy_utilities(&self, utility: &[f64], history: usize) -> Result<Vec<f64>> {
        self.check_dimension(utility)?;
        self.check_history(history)?;
        Ok((0..self.strategies.len())
            .map(|s| dot(self.distribution(s, history), utility))
            .collect())
    }

    /// The EU-maximizing strategy and its expected utility. Ties go to the
    /// lowest strategy id.
    pub fn best_strategy(&self, utility: &[f64], history: usize) -> Result<(usize, f64)> {
        let eus = self.strategy_utilities(utility, history)?;
        argmax(&eus).ok_or(Error::NoStrategies)
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(json))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First index of the maximum; `None` for an empty slice.
pub(crate) fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}
