//! Clustering and tree induction for one history, bundled with the training
//! data needed to turn a leaf into a strategy recommendation.

use serde::{Deserialize, Serialize};

use crate::clustering::{hac, Clustering};
use crate::error::Result;
use crate::model::DecisionModel;
use crate::tree::{
    build_tree, classify, Classification, ElicitationTree, SplitQuestion, TrainingSet,
};
use crate::utility::{UtilityDatabase, UtilityFunction};

/// What a classified user is told to do.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub label: usize,
    pub prototype: String,
    pub strategy: usize,
    /// Expected utility of `strategy` under the prototype.
    pub expected_utility: f64,
}

#[derive(Clone, Debug)]
pub struct Elicitor {
    pub history: usize,
    pub clustering: Clustering,
    pub tree: ElicitationTree,
    training: UtilityDatabase,
}

impl Elicitor {
    /// Clusters `db` into `k` groups for `history` and grows the question tree.
    pub fn train(
        db: &UtilityDatabase,
        model: &DecisionModel,
        history: usize,
        k: usize,
        gap: f64,
    ) -> Result<Self> {
        let clustering = hac(db, model, history, k)?;
        Self::from_clustering(db, model, clustering, gap)
    }

    pub fn from_clustering(
        db: &UtilityDatabase,
        model: &DecisionModel,
        clustering: Clustering,
        gap: f64,
    ) -> Result<Self> {
        let training = TrainingSet::from_clustering(db, &clustering)?;
        let tree = build_tree(&training, model, clustering.history, gap)?;
        Ok(Elicitor {
            history: clustering.history,
            clustering,
            tree,
            training: db.clone(),
        })
    }

    pub fn training(&self) -> &UtilityDatabase {
        &self.training
    }

    /// Training labels, by database position.
    pub fn labels(&self) -> Vec<usize> {
        self.clustering.labels()
    }

    pub fn prototype(&self, label: usize) -> &UtilityFunction {
        &self.training.functions()[self.clustering.clusters[label].prototype]
    }

    pub fn classify(&self, oracle: impl FnMut(&SplitQuestion) -> bool) -> Classification {
        classify(&self.tree, oracle)
    }

    /// Classifies a user whose full utility function is known.
    pub fn classify_function(&self, utility: &[f64]) -> Classification {
        classify(&self.tree, |q| q.answer(utility))
    }

    /// Best strategy for the prototype of `label` in this history.
    pub fn recommend(&self, model: &DecisionModel, label: usize) -> Result<Recommendation> {
        let prototype = self.prototype(label);
        let (strategy, expected_utility) = model.best_strategy(&prototype.values, self.history)?;
        Ok(Recommendation {
            label,
            prototype: prototype.id.clone(),
            strategy,
            expected_utility,
        })
    }
}
