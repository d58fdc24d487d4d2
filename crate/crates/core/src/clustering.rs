//! Group-average hierarchical agglomerative clustering under the
//! utility-loss distance, with prototype selection.
//!
//! Function indices are database positions. Cluster labels are assigned in
//! order of each cluster's smallest member, so labels are stable for a fixed
//! database order.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::utility::{LossTable, UtilityDatabase};

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Database positions, ascending.
    pub members: Vec<usize>,
    pub prototype: usize,
    /// `Σ_j UL(u_j, u_prototype | h)` over the members.
    pub prototype_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub history: usize,
    pub k_requested: usize,
    pub clusters: Vec<Cluster>,
    ids: Vec<String>,
    distances: Vec<f64>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Ids of the clustered functions, by database position.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Cached base distance between database positions `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.ids.len() + j]
    }

    /// Cluster label of each database position.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.ids.len()];
        for (label, cluster) in self.clusters.iter().enumerate() {
            for &m in &cluster.members {
                labels[m] = label;
            }
        }
        labels
    }

    pub fn prototype_id(&self, label: usize) -> &str {
        &self.ids[self.clusters[label].prototype]
    }

    pub fn export(&self) -> ClusteringExport {
        ClusteringExport {
            history: self.history,
            k: self.k_requested,
            clusters: self
                .clusters
                .iter()
                .enumerate()
                .map(|(label, c)| ClusterExport {
                    label,
                    members: c.members.iter().map(|&m| self.ids[m].clone()).collect(),
                    prototype: self.ids[c.prototype].clone(),
                    prototype_score: c.prototype_score,
                })
                .collect(),
        }
    }
}

/// Structured-text form of a clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringExport {
    pub history: usize,
    pub k: usize,
    pub clusters: Vec<ClusterExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterExport {
    pub label: usize,
    pub members: Vec<String>,
    pub prototype: String,
    pub prototype_score: f64,
}

impl ClusteringExport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One agglomeration step.
#[derive(Clone, Debug, PartialEq)]
pub struct Merge {
    /// Slot that survives; always the smaller of the two.
    pub into: usize,
    pub from: usize,
    pub distance: f64,
}

/// Incremental group-average agglomeration.
///
/// Every cluster lives in the slot of its smallest member. The inter-cluster
/// distance is maintained with the size-weighted recurrence
/// `d(C_r ∪ C_s, C_i) = (|C_r| d(C_r, C_i) + |C_s| d(C_s, C_i)) / (|C_r| + |C_s|)`.
#[derive(Clone, Debug)]
pub struct Agglomeration {
    n: usize,
    slots: Vec<Option<Vec<usize>>>,
    linkage: Vec<f64>,
    active: usize,
}

impl Agglomeration {
    /// Starts from singletons with a full symmetric `n × n` distance matrix.
    pub fn new(n: usize, distances: Vec<f64>) -> Self {
        assert_eq!(distances.len(), n * n, "distance matrix must be n x n");
        Agglomeration {
            n,
            slots: (0..n).map(|i| Some(vec![i])).collect(),
            linkage: distances,
            active: n,
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.active
    }

    /// Active clusters as `(slot, members)`, in slot order.
    pub fn clusters(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_deref().map(|m| (i, m)))
    }

    /// Maintained distance between the clusters in slots `a` and `b`.
    pub fn linkage(&self, a: usize, b: usize) -> f64 {
        self.linkage[a * self.n + b]
    }

    /// The closest pair of active clusters. Ties go to the lexicographically
    /// smallest `(slot_a, slot_b)`, i.e. smallest member ids.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let live: Vec<usize> = self.clusters().map(|(i, _)| i).collect();
        let mut best: Option<(usize, usize, f64)> = None;
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                let d = self.linkage(a, b);
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        best
    }

    /// Merges the closest pair; `None` once a single cluster remains.
    pub fn step(&mut self) -> Option<Merge> {
        let (r, s, d) = self.closest_pair()?;
        let size_r = self.slots[r].as_ref().map_or(0, Vec::len) as f64;
        let size_s = self.slots[s].as_ref().map_or(0, Vec::len) as f64;
        let n = self.n;
        for i in 0..n {
            if i == r || i == s || self.slots[i].is_none() {
                continue;
            }
            let updated = (size_r * self.linkage[r * n + i] + size_s * self.linkage[s * n + i])
                / (size_r + size_s);
            self.linkage[r * n + i] = updated;
            self.linkage[i * n + r] = updated;
        }
        let absorbed = self.slots[s].take().unwrap_or_default();
        let target = self.slots[r].as_mut().expect("active slot");
        target.extend(absorbed);
        target.sort_unstable();
        self.active -= 1;
        Some(Merge {
            into: r,
            from: s,
            distance: d,
        })
    }

    /// Merges until at most `k` clusters remain.
    pub fn run_until(&mut self, k: usize) -> Vec<Merge> {
        let mut merges = Vec::new();
        while self.active > k {
            match self.step() {
                Some(m) => merges.push(m),
                None => break,
            }
        }
        merges
    }
}

/// Pairwise base distances of the table's functions as an `n × n` matrix.
pub fn distance_matrix(table: &LossTable) -> Vec<f64> {
    let n = table.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = table.distance(i, j);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Clusters `db` for `history` into exactly `k` clusters (when `k ≤ N`).
pub fn hac(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k: usize,
) -> Result<Clustering> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if k < 1 || k > db.len() {
        return Err(Error::InvalidClusterCount { k, n: db.len() });
    }
    let table = LossTable::new(model, db.functions(), history)?;
    let distances = distance_matrix(&table);
    let mut agglomeration = Agglomeration::new(db.len(), distances.clone());
    agglomeration.run_until(k);

    let clusters = agglomeration
        .clusters()
        .map(|(_, members)| {
            let (prototype, prototype_score) = prototype_in_table(&table, members)?;
            Ok(Cluster {
                members: members.to_vec(),
                prototype,
                prototype_score,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Clustering {
        history,
        k_requested: k,
        clusters,
        ids: db.functions().iter().map(|f| f.id.clone()).collect(),
        distances,
    })
}

/// Member minimizing `Σ_{j ∈ members} UL(u_j, candidate)`; ties go to the
/// lowest index.
pub(crate) fn prototype_in_table(table: &LossTable, members: &[usize]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &candidate in members {
        let score: f64 = members.iter().map(|&j| table.loss(j, candidate)).sum();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((candidate, score));
        }
    }
    best.ok_or(Error::EmptyCluster)
}

/// Prototype of the cluster formed by database positions `members`.
/// Returns the chosen position and its score.
pub fn select_prototype(
    db: &UtilityDatabase,
    members: &[usize],
    model: &DecisionModel,
    history: usize,
) -> Result<(usize, f64)> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let subset = db.subset(&sorted);
    let table = LossTable::new(model, subset.functions(), history)?;
    let local: Vec<usize> = (0..sorted.len()).collect();
    let (idx, score) = prototype_in_table(&table, &local)?;
    Ok((sorted[idx], score))
}

/// Cluster label of every function of `db`, matched by id.
pub fn label_database(db: &UtilityDatabase, clustering: &Clustering) -> Result<Vec<usize>> {
    let by_id: HashMap<&str, usize> = clustering
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let labels = clustering.labels();
    db.functions()
        .iter()
        .map(|f| {
            by_id
                .get(f.id.as_str())
                .map(|&pos| labels[pos])
                .ok_or_else(|| Error::NotClustered(f.id.clone()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    db: String,
    model: String,
    history: usize,
    k: usize,
}

/// Per-history clustering cache for offline precomputation or online reuse.
/// Readers share the lock; inserts take it exclusively.
#[derive(Debug, Default)]
pub struct ClusteringCache {
    entries: RwLock<HashMap<CacheKey, Arc<Clustering>>>,
}

impl ClusteringCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        db: &UtilityDatabase,
        model: &DecisionModel,
        history: usize,
        k: usize,
    ) -> Result<Arc<Clustering>> {
        let key = CacheKey {
            db: db.fingerprint(),
            model: model.fingerprint(),
            history,
            k,
        };
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(hac(db, model, history, k)?);
        let mut entries = self.entries.write().expect("cache lock");
        Ok(Arc::clone(entries.entry(key).or_insert(fresh)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
