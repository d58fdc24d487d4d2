//! Greedy induction of a binary tree of yes/no preference questions over a
//! cluster-labeled utility database, and classification by traversal.
//!
//! Two question kinds are considered at every node:
//!
//! * preference: "is outcome `i` preferred to outcome `j`?" (`i < j`), answered
//!   yes iff `u[i] > u[j]`;
//! * feature: "is outcome `i` preferred to the standard lottery giving the best
//!   outcome with probability `c` and the worst otherwise?", answered yes iff
//!   `u[i] > c`, since that lottery is worth exactly `c` under a normalized
//!   utility.
//!
//! Indifference answers "no". Feature thresholds sit at the midpoints of gaps
//! between consecutive observed values and only gaps at least `gap` wide are
//! used, so a user is never asked about a lottery close to a value seen in
//! the training data.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::utility::UtilityDatabase;

/// Default minimum gap width for feature splits.
pub const DEFAULT_GAP: f64 = 0.05;

/// Gains within this distance of the best are considered tied.
const GAIN_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitKind {
    Preference { first: usize, second: usize },
    Feature { outcome: usize, threshold: f64 },
}

impl SplitKind {
    /// Answer implied by a utility vector.
    pub fn answer(&self, utility: &[f64]) -> bool {
        match *self {
            SplitKind::Preference { first, second } => utility[first] > utility[second],
            SplitKind::Feature { outcome, threshold } => utility[outcome] > threshold,
        }
    }

    pub fn is_preference(&self) -> bool {
        matches!(self, SplitKind::Preference { .. })
    }
}

/// A tree question with its plain-language rendering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuestionWire", into = "QuestionWire")]
pub struct SplitQuestion {
    pub kind: SplitKind,
    pub text: String,
}

impl SplitQuestion {
    pub fn new(kind: SplitKind, model: &DecisionModel) -> Self {
        let text = render_question(&kind, model);
        SplitQuestion { kind, text }
    }

    pub fn answer(&self, utility: &[f64]) -> bool {
        self.kind.answer(utility)
    }
}

/// Answer to `split` given a user's utility function.
pub fn answer(split: &SplitQuestion, utility: impl AsRef<[f64]>) -> bool {
    split.answer(utility.as_ref())
}

/// Formats a probability as a percentage without trailing zeros.
pub fn percent(p: f64) -> String {
    let s = format!("{:.2}", p * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

fn render_question(kind: &SplitKind, model: &DecisionModel) -> String {
    let text = |i: usize| model.outcomes()[i].question_text.as_str();
    match *kind {
        SplitKind::Preference { first, second } => {
            format!("Would you prefer {} to {}?", text(first), text(second))
        }
        SplitKind::Feature { outcome, threshold } => format!(
            "Would you prefer {} for certain to a gamble with a {} chance of {} and a {} chance of {}?",
            text(outcome),
            percent(threshold),
            text(model.best_anchor()),
            percent(1.0 - threshold),
            text(model.worst_anchor()),
        ),
    }
}

#[derive(Serialize, Deserialize)]
struct QuestionWire {
    kind: String,
    o_i: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    o_j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    text: String,
}

impl From<SplitQuestion> for QuestionWire {
    fn from(q: SplitQuestion) -> Self {
        match q.kind {
            SplitKind::Preference { first, second } => QuestionWire {
                kind: "preference".into(),
                o_i: first,
                o_j: Some(second),
                c: None,
                text: q.text,
            },
            SplitKind::Feature { outcome, threshold } => QuestionWire {
                kind: "feature".into(),
                o_i: outcome,
                o_j: None,
                c: Some(threshold),
                text: q.text,
            },
        }
    }
}

impl TryFrom<QuestionWire> for SplitQuestion {
    type Error = String;

    fn try_from(w: QuestionWire) -> std::result::Result<Self, String> {
        let kind = match (w.kind.as_str(), w.o_j, w.c) {
            ("preference", Some(j), None) if j != w.o_i => SplitKind::Preference {
                first: w.o_i,
                second: j,
            },
            ("feature", None, Some(c)) if c > 0.0 && c < 1.0 => SplitKind::Feature {
                outcome: w.o_i,
                threshold: c,
            },
            _ => return Err(format!("invalid question: kind {}", w.kind)),
        };
        Ok(SplitQuestion { kind, text: w.text })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub label: usize,
    pub prototype: String,
    /// Training examples reaching this leaf, per cluster label.
    pub counts: BTreeMap<usize, usize>,
}

impl Leaf {
    pub fn is_pure(&self) -> bool {
        self.counts.len() <= 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        question: SplitQuestion,
        yes: Box<TreeNode>,
        no: Box<TreeNode>,
    },
    Leaf(Leaf),
}

/// Untagged decoding goes through this struct because map keys inside
/// buffered untagged content cannot be parsed as integers.
#[derive(Deserialize)]
struct NodeWire {
    question: Option<SplitQuestion>,
    yes: Option<Box<TreeNode>>,
    no: Option<Box<TreeNode>>,
    label: Option<usize>,
    prototype: Option<String>,
    counts: Option<BTreeMap<usize, usize>>,
}

impl<'de> Deserialize<'de> for TreeNode {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = NodeWire::deserialize(deserializer)?;
        match (w.question, w.yes, w.no, w.label, w.prototype, w.counts) {
            (Some(question), Some(yes), Some(no), None, None, None) => {
                Ok(TreeNode::Split { question, yes, no })
            }
            (None, None, None, Some(label), Some(prototype), Some(counts)) => {
                Ok(TreeNode::Leaf(Leaf {
                    label,
                    prototype,
                    counts,
                }))
            }
            _ => Err(D::Error::custom(
                "a tree node needs either question/yes/no or label/prototype/counts",
            )),
        }
    }
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { yes, no, .. } => 1 + yes.depth().max(no.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        match self {
            TreeNode::Leaf(l) => vec![l],
            TreeNode::Split { yes, no, .. } => {
                let mut out = yes.leaves();
                out.extend(no.leaves());
                out
            }
        }
    }

    /// Follows `path` (true = yes) from this node.
    pub fn descend(&self, path: &[bool]) -> Option<&TreeNode> {
        let mut node = self;
        for &step in path {
            node = match node {
                TreeNode::Split { yes, no, .. } => {
                    if step {
                        yes
                    } else {
                        no
                    }
                }
                TreeNode::Leaf(_) => return None,
            };
        }
        Some(node)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub db_fingerprint: String,
    pub k: usize,
    pub gap: f64,
    pub examples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationTree {
    pub history: usize,
    pub root: TreeNode,
    pub meta: TrainingMeta,
}

impl ElicitationTree {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Entropy in bits of a label histogram.
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let total = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * (1.0 / p).log2()
        })
        .sum())
}

/// Information gain of splitting a node with label histogram `parent` so
/// that `yes` goes to the yes child and the remainder to the no child.
pub fn gain(parent: &[usize], yes: &[usize]) -> Result<f64> {
    let no: Vec<usize> = parent.iter().zip(yes).map(|(p, y)| p - y).collect();
    let total: usize = parent.iter().sum();
    let mut g = entropy(parent)?;
    for child in [yes, no.as_slice()] {
        let n: usize = child.iter().sum();
        if n > 0 {
            g -= (n as f64 / total as f64) * entropy(child)?;
        }
    }
    Ok(g)
}

/// Preference splits for every `i < j`, then feature splits at the midpoint
/// of every gap of width `≥ gap` between consecutive distinct observed values.
pub fn candidate_splits<U: AsRef<[f64]>>(examples: &[U], gap: f64) -> Vec<SplitKind> {
    let d = examples.first().map_or(0, |u| u.as_ref().len());
    let mut out = Vec::with_capacity(d * (d.saturating_sub(1)) / 2);
    for first in 0..d {
        for second in first + 1..d {
            out.push(SplitKind::Preference { first, second });
        }
    }
    for outcome in 0..d {
        let mut observed: Vec<f64> = examples.iter().map(|u| u.as_ref()[outcome]).collect();
        observed.sort_by(f64::total_cmp);
        observed.dedup();
        for pair in observed.windows(2) {
            if pair[1] - pair[0] >= gap {
                out.push(SplitKind::Feature {
                    outcome,
                    threshold: (pair[0] + pair[1]) / 2.0,
                });
            }
        }
    }
    out
}

/// A database together with one cluster label per function and the
/// prototype id of each label.
#[derive(Clone, Debug)]
pub struct TrainingSet<'a> {
    pub db: &'a UtilityDatabase,
    pub labels: Vec<usize>,
    pub prototypes: Vec<String>,
    pub k: usize,
}

impl<'a> TrainingSet<'a> {
    pub fn from_clustering(db: &'a UtilityDatabase, clustering: &Clustering) -> Result<Self> {
        Ok(TrainingSet {
            db,
            labels: crate::clustering::label_database(db, clustering)?,
            prototypes: (0..clustering.len())
                .map(|l| clustering.prototype_id(l).to_string())
                .collect(),
            k: clustering.k_requested,
        })
    }

    fn label_count(&self) -> usize {
        self.prototypes
            .len()
            .max(self.labels.iter().max().map_or(0, |m| m + 1))
    }
}

/// Grows the tree greedily by information gain until every node is pure or
/// cannot be separated further.
///
/// Among equal-gain splits, preference questions win over feature questions,
/// then the lowest `(i, j)` or `(outcome, threshold)`. A node where no split
/// has positive gain but some split still separates its examples is split on
/// the first such question, so purity is pursued whenever it is reachable;
/// otherwise a majority leaf is emitted.
pub fn build_tree(
    training: &TrainingSet<'_>,
    model: &DecisionModel,
    history: usize,
    gap: f64,
) -> Result<ElicitationTree> {
    if training.db.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if training.labels.len() != training.db.len() {
        return Err(Error::DimensionMismatch {
            expected: training.db.len(),
            actual: training.labels.len(),
        });
    }
    if training.db.outcome_count() != model.outcome_count() {
        return Err(Error::DimensionMismatch {
            expected: model.outcome_count(),
            actual: training.db.outcome_count(),
        });
    }
    model.check_history(history)?;
    let builder = Builder {
        training,
        model,
        gap,
        labels: training.label_count(),
    };
    let all: Vec<usize> = (0..training.db.len()).collect();
    let root = builder.grow(&all);
    Ok(ElicitationTree {
        history,
        root,
        meta: TrainingMeta {
            db_fingerprint: training.db.fingerprint(),
            k: training.k,
            gap,
            examples: training.db.len(),
        },
    })
}

struct Builder<'a, 'b> {
    training: &'a TrainingSet<'b>,
    model: &'a DecisionModel,
    gap: f64,
    labels: usize,
}

impl Builder<'_, '_> {
    fn values(&self, i: usize) -> &[f64] {
        &self.training.db.functions()[i].values
    }

    fn histogram(&self, members: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut counts = vec![0; self.labels];
        for i in members {
            counts[self.training.labels[i]] += 1;
        }
        counts
    }

    fn leaf(&self, counts: &[usize]) -> TreeNode {
        // max_by_key keeps the last maximum; scan in reverse so ties go to the lowest label
        let label = counts
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &c)| c)
            .map_or(0, |(l, _)| l);
        TreeNode::Leaf(Leaf {
            label,
            prototype: self
                .training
                .prototypes
                .get(label)
                .cloned()
                .unwrap_or_default(),
            counts: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(l, &c)| (l, c))
                .collect(),
        })
    }

    fn grow(&self, members: &[usize]) -> TreeNode {
        let counts = self.histogram(members.iter().copied());
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            return self.leaf(&counts);
        }
        let rows: Vec<&[f64]> = members.iter().map(|&i| self.values(i)).collect();
        let candidates = candidate_splits(&rows, self.gap);
        let scored: Vec<(f64, usize)> = candidates
            .par_iter()
            .map(|split| {
                let yes = members
                    .iter()
                    .copied()
                    .filter(|&i| split.answer(self.values(i)));
                let yes_counts = self.histogram(yes);
                let n_yes: usize = yes_counts.iter().sum();
                let g = gain(&counts, &yes_counts).unwrap_or(0.0);
                (g, n_yes)
            })
            .collect();

        let best_gain = scored
            .iter()
            .map(|(g, _)| *g)
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = if best_gain > GAIN_TIE {
            scored.iter().position(|(g, _)| *g >= best_gain - GAIN_TIE)
        } else {
            scored
                .iter()
                .position(|&(_, n_yes)| n_yes > 0 && n_yes < members.len())
        };
        let Some(chosen) = chosen else {
            return self.leaf(&counts);
        };
        let split = candidates[chosen];
        let (yes, no): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| split.answer(self.values(i)));
        TreeNode::Split {
            question: SplitQuestion::new(split, self.model),
            yes: Box::new(self.grow(&yes)),
            no: Box::new(self.grow(&no)),
        }
    }
}

/// Outcome of a traversal.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub label: usize,
    pub prototype: String,
    pub questions_asked: usize,
    /// Questions asked and the answers received, in order.
    pub transcript: Vec<(SplitQuestion, bool)>,
}

/// Walks from the root, asking `oracle` each question until a leaf.
pub fn classify(
    tree: &ElicitationTree,
    mut oracle: impl FnMut(&SplitQuestion) -> bool,
) -> Classification {
    let mut node = &tree.root;
    let mut transcript = Vec::new();
    loop {
        match node {
            TreeNode::Leaf(leaf) => {
                return Classification {
                    label: leaf.label,
                    prototype: leaf.prototype.clone(),
                    questions_asked: transcript.len(),
                    transcript,
                }
            }
            TreeNode::Split { question, yes, no } => {
                let a = oracle(question);
                transcript.push((question.clone(), a));
                node = if a { yes } else { no };
            }
        }
    }
}
