//! Enrichment from an unlabeled pool by farthest-point selection against
//! semantic anchors.
//!
//! Every pool scene is scored by its cosine distance to the *nearest* anchor;
//! each step adds the highest-scoring scene not yet added. Under
//! [`AnchorPolicy::Dynamic`] the added scene becomes an anchor itself, which
//! turns the loop into farthest-point sampling seeded by the cluster anchors.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::datamodel::{
    read_json, write_json, Addition, Dataset, DatasetBuilder, EnrichmentParams, EnrichmentReport,
    Space,
};
use crate::error::{Error, Result};
use crate::vecstore::{cosine_unchecked, norm, sq_dist_mixed, UNIT_TOLERANCE};

pub const ANCHORS_FILE: &str = "anchors.json";
pub const POOL_SOURCE: &str = "pool";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorPolicy {
    /// Anchors stay fixed for the whole run.
    Static,
    /// Each added scene joins the anchor set.
    #[default]
    Dynamic,
}

impl std::str::FromStr for AnchorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(AnchorPolicy::Static),
            "dynamic" => Ok(AnchorPolicy::Dynamic),
            other => Err(Error::InvalidParam(format!(
                "anchor policy {other:?} (expected static or dynamic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnchorOrigin {
    Cluster,
    Added,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: String,
    pub vector: Vec<f32>,
    pub origin: AnchorOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<Anchor>,
    pub policy: AnchorPolicy,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Anchor>, policy: AnchorPolicy) -> Result<Self> {
        let set = Self { anchors, policy };
        set.validate()?;
        Ok(set)
    }

    pub fn with_policy(mut self, policy: AnchorPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::InvalidParam("anchor set is empty".into()));
        }
        let dim = self.anchors[0].vector.len();
        for a in &self.anchors {
            if a.vector.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: a.vector.len(),
                });
            }
            let n = norm(&a.vector);
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidParam(format!(
                    "anchor {:?} has norm {n}, expected unit",
                    a.id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let set: AnchorSet = read_json(path)?;
        set.validate()?;
        Ok(set)
    }
}

/// One anchor per non-empty cluster: the member whose semantic embedding is
/// nearest the centroid (squared Euclidean; ties to canonical order).
///
/// `dataset` must be the dataset the model was fitted on, so that the model's
/// assignment is indexed by canonical scene position.
pub fn anchors_from_clusters(model: &ClusterModel, dataset: &Dataset) -> Result<AnchorSet> {
    if model.assignment.len() != dataset.len() {
        return Err(Error::InvalidParam(format!(
            "model covers {} scenes, dataset has {}",
            model.assignment.len(),
            dataset.len()
        )));
    }
    let semantic = dataset.require(Space::Semantic)?;
    if semantic.dim() != model.dim {
        return Err(Error::DimMismatch {
            expected: model.dim,
            actual: semantic.dim(),
        });
    }
    let mut anchors = Vec::new();
    for (c, members) in model.members().iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for &p in members {
            let v = dataset
                .vector(Space::Semantic, p)
                .ok_or_else(|| Error::Binding {
                    space: "semantic",
                    message: format!(
                        "scene {:?} has no semantic row",
                        dataset.scenes()[p].scene_id
                    ),
                })?;
            let d = sq_dist_mixed(v, model.centroid(c));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p, d));
            }
        }
        if let Some((p, _)) = best {
            anchors.push(Anchor {
                id: dataset.scenes()[p].scene_id.clone(),
                vector: dataset.vector(Space::Semantic, p).unwrap().to_vec(),
                origin: AnchorOrigin::Cluster,
            });
        }
    }
    assert!(
        !anchors.is_empty() || dataset.is_empty(),
        "a fitted model has at least one non-empty cluster"
    );
    AnchorSet::new(anchors, AnchorPolicy::default())
}

#[derive(Debug, Clone)]
pub struct Enrichment {
    pub dataset: Dataset,
    pub report: EnrichmentReport,
    /// Anchor set after the run; includes added scenes under the dynamic
    /// policy.
    pub anchors: AnchorSet,
}

/// Adds `budget` pool scenes to `selected`, farthest from the anchors first.
pub fn enrich(
    selected: &Dataset,
    pool: &Dataset,
    anchors: &AnchorSet,
    budget: usize,
) -> Result<Enrichment> {
    anchors.validate()?;
    if budget > pool.len() {
        return Err(Error::InvalidParam(format!(
            "budget {budget} exceeds pool size {}",
            pool.len()
        )));
    }
    let rows = pool.ordered_matrix(Space::Semantic)?;
    let dim = anchors.anchors[0].vector.len();
    if rows.dim() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: rows.dim(),
        });
    }
    let n = rows.count();
    let row_norms: Vec<f64> = rows.rows().map(norm).collect();
    let mut set = anchors.clone();
    let anchor_norms: Vec<f64> = set.anchors.iter().map(|a| norm(&a.vector)).collect();

    // (distance to nearest anchor, index of that anchor); earlier anchors win ties
    let mut nearest: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, 0);
            for (a, anchor) in set.anchors.iter().enumerate() {
                let d = 1.0
                    - cosine_unchecked(rows.row(i), &anchor.vector, row_norms[i], anchor_norms[a]);
                if d < best.0 {
                    best = (d, a);
                }
            }
            best
        })
        .collect();

    let mut added = vec![false; n];
    let mut additions = Vec::with_capacity(budget);
    let mut order = Vec::with_capacity(budget);
    for step in 0..budget {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if !added[i] && pick.is_none_or(|p| nearest[i].0 > nearest[p].0) {
                pick = Some(i);
            }
        }
        let p = pick.expect("budget <= pool size");
        added[p] = true;
        order.push(p);
        let (distance, anchor) = nearest[p];
        additions.push(Addition {
            step,
            scene_id: pool.scenes()[p].scene_id.clone(),
            nearest_anchor_id: set.anchors[anchor].id.clone(),
            semantic_distance: distance,
        });

        if set.policy == AnchorPolicy::Dynamic {
            let new_index = set.anchors.len();
            let pv = rows.row(p);
            let pn = row_norms[p];
            nearest
                .par_iter_mut()
                .enumerate()
                .filter(|(i, _)| !added[*i])
                .for_each(|(i, slot)| {
                    let d = 1.0 - cosine_unchecked(rows.row(i), pv, row_norms[i], pn);
                    if d < slot.0 {
                        *slot = (d, new_index);
                    }
                });
            set.anchors.push(Anchor {
                id: pool.scenes()[p].scene_id.clone(),
                vector: pv.to_vec(),
                origin: AnchorOrigin::Added,
            });
        }
    }

    let mut b = DatasetBuilder::new(format!("{}-enriched", selected.name));
    for p in 0..selected.len() {
        b.push_from(selected, p, None)?;
    }
    for &p in &order {
        b.push_from(pool, p, Some(POOL_SOURCE))?;
    }
    let report = EnrichmentReport {
        params: EnrichmentParams {
            budget,
            anchor_policy: anchors.policy,
        },
        additions,
        provenance: None,
    };
    Ok(Enrichment {
        dataset: b.build()?,
        report,
        anchors: set,
    })
}
