//! Desk-scale analyses: retention versus epsilon, sessions per cluster,
//! object counts and k sweeps.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::selection::{check_epsilon, fit_clusters, prune_with_model, select, SelectionParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionPoint {
    pub epsilon: f64,
    pub fraction_remaining: f64,
}

/// Clusters once, then prunes at every epsilon against the shared model.
/// `params.epsilon` is ignored.
pub fn retention_curve(
    dataset: &Dataset,
    params: &SelectionParams,
    epsilons: &[f64],
) -> Result<Vec<RetentionPoint>> {
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let model = fit_clusters(dataset, params)?;
    retention_curve_with_model(dataset, &model, params, epsilons)
}

pub fn retention_curve_with_model(
    dataset: &Dataset,
    model: &ClusterModel,
    params: &SelectionParams,
    epsilons: &[f64],
) -> Result<Vec<RetentionPoint>> {
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let p = SelectionParams { epsilon, ..*params };
            let (_, report) = prune_with_model(dataset, model, &p)?;
            Ok(RetentionPoint {
                epsilon,
                fraction_remaining: report.retention(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSessions {
    pub cluster: usize,
    pub members: usize,
    pub unique_sessions: usize,
}

/// Distinct `session_id`s per cluster. `model` must be fitted on `dataset`.
pub fn unique_sessions_per_cluster(
    model: &ClusterModel,
    dataset: &Dataset,
) -> Result<Vec<ClusterSessions>> {
    if model.assignment.len() != dataset.len() {
        return Err(Error::InvalidParam(format!(
            "model covers {} scenes, dataset has {}",
            model.assignment.len(),
            dataset.len()
        )));
    }
    Ok(model
        .members()
        .iter()
        .enumerate()
        .map(|(cluster, members)| {
            let sessions: HashSet<&str> = members
                .iter()
                .map(|&p| dataset.scenes()[p].session_id.as_str())
                .collect();
            ClusterSessions {
                cluster,
                members: members.len(),
                unique_sessions: sessions.len(),
            }
        })
        .collect())
}

/// Mean unique-session count over non-empty clusters.
pub fn mean_unique_sessions(rows: &[ClusterSessions]) -> f64 {
    let non_empty: Vec<_> = rows.iter().filter(|r| r.members > 0).collect();
    if non_empty.is_empty() {
        return 0.0;
    }
    non_empty
        .iter()
        .map(|r| r.unique_sessions as f64)
        .sum::<f64>()
        / non_empty.len() as f64
}

/// Total object instances per class. Every scene must be labeled.
pub fn object_counts(dataset: &Dataset) -> Result<BTreeMap<String, u64>> {
    dataset.all_labeled()?;
    let mut out = BTreeMap::new();
    for s in dataset.scenes() {
        for (class, &n) in s.labels.iter().flatten() {
            *out.entry(class.clone()).or_insert(0) += n;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSweepPoint {
    pub k: usize,
    pub fraction_remaining: f64,
    pub objective: f64,
}

/// Full selection per k with everything else taken from `base`.
pub fn k_sweep(
    dataset: &Dataset,
    ks: &[usize],
    base: &SelectionParams,
) -> Result<Vec<KSweepPoint>> {
    for &k in ks {
        if k == 0 || k > dataset.len() {
            return Err(Error::InvalidParam(format!(
                "k = {k} must be in [1, {}]",
                dataset.len()
            )));
        }
    }
    ks.par_iter()
        .map(|&k| {
            let sel = select(dataset, &SelectionParams { k, ..*base })?;
            Ok(KSweepPoint {
                k,
                fraction_remaining: sel.report.retention(),
                objective: sel.model.objective,
            })
        })
        .collect()
}

/// Renders rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidParam(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidParam(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
