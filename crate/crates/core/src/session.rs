//! Stateful question-by-question elicitation over shared, immutable trees.
//!
//! [`Artifacts`] owns the model, the training database, and one tree per
//! history. Trees are grown the first time a history is requested, or all at
//! once with [`Artifacts::warm_up`], or loaded from files. [`SessionManager`]
//! keeps sessions in memory, optionally mirrored to a JSON snapshot file.
//! Each session accepts one answer at a time; a second concurrent answer is
//! rejected with [`Error::SessionBusy`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringCache;
use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::tree::{build_tree, ElicitationTree, SplitKind, SplitQuestion, TrainingSet, TreeNode};
use crate::utility::UtilityDatabase;

pub struct Artifacts {
    model: DecisionModel,
    db: UtilityDatabase,
    k: usize,
    gap: f64,
    clusterings: ClusteringCache,
    trees: RwLock<HashMap<usize, Arc<ElicitationTree>>>,
}

impl Artifacts {
    pub fn new(model: DecisionModel, db: UtilityDatabase, k: usize, gap: f64) -> Result<Self> {
        db.check_against(&model)?;
        if db.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        if k == 0 || k > db.len() {
            return Err(Error::InvalidClusterCount { k, n: db.len() });
        }
        Ok(Artifacts {
            model,
            db,
            k,
            gap,
            clusterings: ClusteringCache::new(),
            trees: RwLock::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &DecisionModel {
        &self.model
    }

    pub fn db(&self) -> &UtilityDatabase {
        &self.db
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_built(&self, history: usize) -> bool {
        self.trees.read().expect("tree lock").contains_key(&history)
    }

    /// The tree for `history`, grown on first use.
    pub fn tree(&self, history: usize) -> Result<Arc<ElicitationTree>> {
        self.model.check_history(history)?;
        if let Some(t) = self.trees.read().expect("tree lock").get(&history) {
            return Ok(Arc::clone(t));
        }
        let clustering = self
            .clusterings
            .get_or_compute(&self.db, &self.model, history, self.k)?;
        let training = TrainingSet::from_clustering(&self.db, &clustering)?;
        let tree = Arc::new(build_tree(&training, &self.model, history, self.gap)?);
        let mut trees = self.trees.write().expect("tree lock");
        Ok(Arc::clone(trees.entry(history).or_insert(tree)))
    }

    /// Grows the trees of every history up front.
    pub fn warm_up(&self) -> Result<()> {
        (0..self.model.histories().len())
            .into_par_iter()
            .try_for_each(|h| self.tree(h).map(|_| ()))
    }

    /// Installs a prebuilt tree, replacing any cached one for its history.
    pub fn insert_tree(&self, tree: ElicitationTree) -> Result<()> {
        self.model.check_history(tree.history)?;
        let d = self.model.outcome_count();
        for leaf in tree.root.leaves() {
            if self.db.position(&leaf.prototype).is_none() {
                return Err(Error::UnknownPrototype(leaf.prototype.clone()));
            }
        }
        check_questions(&tree.root, d)?;
        self.trees
            .write()
            .expect("tree lock")
            .insert(tree.history, Arc::new(tree));
        Ok(())
    }

    /// Recommendation for a user assigned to the prototype `prototype`.
    pub fn result_for(
        &self,
        label: usize,
        prototype: &str,
        history: usize,
    ) -> Result<SessionResult> {
        let pos = self
            .db
            .position(prototype)
            .ok_or_else(|| Error::UnknownPrototype(prototype.to_string()))?;
        let values = self.db.functions()[pos].values.clone();
        let (strategy, expected_utility) = self.model.best_strategy(&values, history)?;
        Ok(SessionResult {
            label,
            prototype: prototype.to_string(),
            prototype_values: values,
            strategy,
            expected_utility,
        })
    }
}

fn check_questions(node: &TreeNode, outcomes: usize) -> Result<()> {
    if let TreeNode::Split { question, yes, no } = node {
        let (a, b) = match question.kind {
            SplitKind::Preference { first, second } => (first, second),
            SplitKind::Feature { outcome, .. } => (outcome, outcome),
        };
        if a >= outcomes || b >= outcomes {
            return Err(Error::InvalidId {
                kind: "outcome",
                id: a.max(b),
            });
        }
        check_questions(yes, outcomes)?;
        check_questions(no, outcomes)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    InProgress,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question: SplitQuestion,
    pub answer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub label: usize,
    pub prototype: String,
    pub prototype_values: Vec<f64>,
    pub strategy: usize,
    /// Expected utility of `strategy` under the prototype.
    pub expected_utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub history: usize,
    /// Answers given so far; also the position in the tree.
    pub path: Vec<bool>,
    pub transcript: Vec<TranscriptEntry>,
    pub status: SessionStatus,
    pub result: Option<SessionResult>,
}

impl Session {
    fn start(
        id: String,
        history: usize,
        tree: &ElicitationTree,
        artifacts: &Artifacts,
    ) -> Result<Self> {
        let mut s = Session {
            id,
            history,
            path: Vec::new(),
            transcript: Vec::new(),
            status: SessionStatus::InProgress,
            result: None,
        };
        s.settle(tree, artifacts)?;
        Ok(s)
    }

    fn node<'t>(&self, tree: &'t ElicitationTree) -> Result<&'t TreeNode> {
        tree.root.descend(&self.path).ok_or_else(|| {
            Error::InvalidSpec(format!(
                "session {} does not match the current tree",
                self.id
            ))
        })
    }

    /// Completes the session if it sits on a leaf.
    fn settle(&mut self, tree: &ElicitationTree, artifacts: &Artifacts) -> Result<()> {
        if let TreeNode::Leaf(leaf) = self.node(tree)? {
            self.result = Some(artifacts.result_for(leaf.label, &leaf.prototype, self.history)?);
            self.status = SessionStatus::Complete;
        }
        Ok(())
    }

    fn answer(
        &mut self,
        answer: bool,
        tree: &ElicitationTree,
        artifacts: &Artifacts,
    ) -> Result<()> {
        let TreeNode::Split { question, .. } = self.node(tree)? else {
            return Err(Error::SessionComplete(self.id.clone()));
        };
        self.transcript.push(TranscriptEntry {
            question: question.clone(),
            answer,
        });
        self.path.push(answer);
        self.settle(tree, artifacts)
    }

    pub fn is_complete(&self) -> bool {
        self.status == SessionStatus::Complete
    }

    pub fn answers(&self) -> &[bool] {
        &self.path
    }
}

/// A question ready for display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub kind: String,
    pub text: String,
    pub outcome_ids: Vec<String>,
    pub outcome_labels: Vec<String>,
    /// Chance of the best outcome in the lottery, for feature questions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lottery: Option<LotteryView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LotteryView {
    pub best_outcome: String,
    pub worst_outcome: String,
    pub p_best: f64,
    pub p_worst: f64,
}

impl QuestionView {
    pub fn new(question: &SplitQuestion, model: &DecisionModel) -> Self {
        let label = |i: usize| model.outcomes()[i].label.clone();
        match question.kind {
            SplitKind::Preference { first, second } => QuestionView {
                kind: "preference".into(),
                text: question.text.clone(),
                outcome_ids: vec![first.to_string(), second.to_string()],
                outcome_labels: vec![label(first), label(second)],
                c: None,
                lottery: None,
            },
            SplitKind::Feature { outcome, threshold } => QuestionView {
                kind: "feature".into(),
                text: question.text.clone(),
                outcome_ids: vec![outcome.to_string()],
                outcome_labels: vec![label(outcome)],
                c: Some(threshold),
                lottery: Some(LotteryView {
                    best_outcome: label(model.best_anchor()),
                    worst_outcome: label(model.worst_anchor()),
                    p_best: threshold,
                    p_worst: 1.0 - threshold,
                }),
            },
        }
    }

    /// Longer explanation naming the outcomes and lottery odds.
    pub fn rationale(&self) -> String {
        match &self.lottery {
            None => format!(
                "Answer yes if you value outcome {} more than outcome {}. Indifference counts as no.",
                self.outcome_labels[0], self.outcome_labels[1]
            ),
            Some(l) => format!(
                "Answer yes if you would rather have {} for sure than a lottery giving {} with probability {} and {} with probability {}. Indifference counts as no.",
                self.outcome_labels[0], l.best_outcome, l.p_best, l.worst_outcome, l.p_worst
            ),
        }
    }
}

struct Slot {
    busy: AtomicBool,
    session: Mutex<Session>,
}

pub struct SessionManager {
    artifacts: Arc<Artifacts>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    snapshot: Option<PathBuf>,
}

/// Exclusive right to answer one session's current question.
pub struct AnswerGuard<'a> {
    manager: &'a SessionManager,
    slot: Arc<Slot>,
}

impl AnswerGuard<'_> {
    pub fn submit(self, answer: bool) -> Result<Session> {
        let session = {
            let mut s = self.slot.session.lock().expect("session lock");
            if s.is_complete() {
                return Err(Error::SessionComplete(s.id.clone()));
            }
            let tree = self.manager.artifacts.tree(s.history)?;
            let mut next = s.clone();
            next.answer(answer, &tree, &self.manager.artifacts)?;
            *s = next.clone();
            next
        };
        self.manager.persist()?;
        Ok(session)
    }
}

impl Drop for AnswerGuard<'_> {
    fn drop(&mut self) {
        self.slot.busy.store(false, Ordering::Release);
    }
}

impl SessionManager {
    pub fn new(artifacts: Arc<Artifacts>) -> Self {
        SessionManager {
            artifacts,
            sessions: RwLock::new(HashMap::new()),
            snapshot: None,
        }
    }

    /// Mirrors every change to `path`, restoring sessions already stored
    /// there.
    pub fn with_snapshot(mut self, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if path.exists() {
            self.restore(&path)?;
        }
        self.snapshot = Some(path);
        Ok(self)
    }

    pub fn artifacts(&self) -> &Arc<Artifacts> {
        &self.artifacts
    }

    /// Starts a session; `history` is an index or a label.
    pub fn create_session(&self, history: &str) -> Result<Session> {
        let h = self
            .artifacts
            .model
            .find_history(history)
            .ok_or_else(|| Error::UnknownHistory(history.to_string()))?;
        let tree = self.artifacts.tree(h)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::start(id.clone(), h, &tree, &self.artifacts)?;
        self.sessions.write().expect("session table").insert(
            id,
            Arc::new(Slot {
                busy: AtomicBool::new(false),
                session: Mutex::new(session.clone()),
            }),
        );
        self.persist()?;
        Ok(session)
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<Session> {
        Ok(self.slot(id)?.session.lock().expect("session lock").clone())
    }

    pub fn get_question(&self, id: &str) -> Result<QuestionView> {
        let s = self.get(id)?;
        let tree = self.artifacts.tree(s.history)?;
        match s.node(&tree)? {
            TreeNode::Split { question, .. } => {
                Ok(QuestionView::new(question, &self.artifacts.model))
            }
            TreeNode::Leaf(_) => Err(Error::SessionComplete(s.id)),
        }
    }

    /// Claims the session for one answer; fails if another answer is in
    /// flight.
    pub fn begin_answer(&self, id: &str) -> Result<AnswerGuard<'_>> {
        let slot = self.slot(id)?;
        if slot
            .busy
            .compare_exchange(false, true, Ordering::Acquire, Ordering::Relaxed)
            .is_err()
        {
            return Err(Error::SessionBusy(id.to_string()));
        }
        Ok(AnswerGuard {
            manager: self,
            slot,
        })
    }

    pub fn submit_answer(&self, id: &str, answer: bool) -> Result<Session> {
        self.begin_answer(id)?.submit(answer)
    }

    /// Runs `answers` against a fresh session of `history`.
    pub fn replay(&self, history: &str, answers: &[bool]) -> Result<Session> {
        let mut s = self.create_session(history)?;
        for &a in answers {
            s = self.submit_answer(&s.id, a)?;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session table").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn all(&self) -> Vec<Session> {
        let mut out: Vec<Session> = self
            .sessions
            .read()
            .expect("session table")
            .values()
            .map(|slot| slot.session.lock().expect("session lock").clone())
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.all())?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn restore(&self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sessions: Vec<Session> = serde_json::from_str(&text)?;
        let n = sessions.len();
        let mut table = self.sessions.write().expect("session table");
        for s in sessions {
            self.artifacts.model.check_history(s.history)?;
            table.insert(
                s.id.clone(),
                Arc::new(Slot {
                    busy: AtomicBool::new(false),
                    session: Mutex::new(s),
                }),
            );
        }
        Ok(n)
    }

    fn persist(&self) -> Result<()> {
        match &self.snapshot {
            Some(p) => self.save_snapshot(p),
            None => Ok(()),
        }
    }
}
