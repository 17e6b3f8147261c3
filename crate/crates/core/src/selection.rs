//! Semantic data selection and the baseline selectors.
//!
//! [`select`] clusters the dataset in semantic space and then, inside each
//! cluster, greedily drops scenes whose visual embedding sits closer than
//! `epsilon` (cosine distance, strict `<`) to an earlier kept scene. Members
//! are visited in canonical order, so the earliest scene of a near-duplicate
//! group is the one that survives.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    kmeans_fit, ClusterModel, KMeansConfig, DEFAULT_MAX_ITERS, DEFAULT_N_INIT, DEFAULT_TOL,
};
use crate::datamodel::{Dataset, SelectionCounts, SelectionEntry, SelectionReport, Space, Verdict};
use crate::error::{Error, Result};
use crate::vecstore::{cosine_unchecked, norm, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub k: usize,
    /// Pruning threshold on cosine distance, in `[0, 2]`.
    pub epsilon: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub n_init: usize,
    /// Embedding space used for clustering. `Visual` gives the
    /// visual-clustering baseline; pruning always uses visual embeddings.
    pub cluster_space: Space,
}

impl SelectionParams {
    pub fn new(k: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            seed,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            n_init: DEFAULT_N_INIT,
            cluster_space: Space::Semantic,
        }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            seed: self.seed,
            max_iters: self.max_iters,
            tol: self.tol,
            n_init: self.n_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)
    }
}

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if (0.0..=2.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("epsilon {eps} outside [0, 2]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunedMember {
    /// Position of the pruned member in the input slice.
    pub member: usize,
    /// Position of the kept member that caused the prune.
    pub keeper: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneOutcome {
    /// Positions in the input slice, ascending.
    pub kept: Vec<usize>,
    /// In the order the prunes happened.
    pub pruned: Vec<PrunedMember>,
}

/// Greedy visual deduplication of one cluster.
///
/// `members` are rows of `visual` in canonical order. Each member not yet
/// removed is kept, then every later surviving member `j` with
/// `1 - cos(v_i, v_j) < epsilon` is removed with keeper `i`.
pub fn greedy_prune_cluster(
    members: &[usize],
    visual: &EmbeddingMatrix,
    epsilon: f64,
) -> Result<PruneOutcome> {
    check_epsilon(epsilon)?;
    let rows = members
        .iter()
        .map(|&r| visual.get(r))
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
    let n = rows.len();
    let mut removed = vec![false; n];
    let mut out = PruneOutcome::default();
    for i in 0..n {
        if removed[i] {
            continue;
        }
        out.kept.push(i);
        for j in i + 1..n {
            if removed[j] {
                continue;
            }
            let s = cosine_unchecked(rows[i], rows[j], norms[i], norms[j]);
            if 1.0 - s < epsilon {
                removed[j] = true;
                out.pruned.push(PrunedMember {
                    member: j,
                    keeper: i,
                    similarity: s,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub dataset: Dataset,
    pub report: SelectionReport,
    pub model: ClusterModel,
}

/// Clusters `dataset` and prunes each cluster.
pub fn select(dataset: &Dataset, params: &SelectionParams) -> Result<Selection> {
    params.validate()?;
    dataset.require(Space::Semantic)?;
    dataset.require(Space::Visual)?;
    let model = fit_clusters(dataset, params)?;
    let (selected, report) = prune_with_model(dataset, &model, params)?;
    Ok(Selection {
        dataset: selected,
        report,
        model,
    })
}

/// Runs k-means over the dataset's rows in `params.cluster_space`, in
/// canonical order.
pub fn fit_clusters(dataset: &Dataset, params: &SelectionParams) -> Result<ClusterModel> {
    let m = dataset.ordered_matrix(params.cluster_space)?;
    kmeans_fit(&m, &params.kmeans_config())
}

/// Pruning stage of [`select`] against an already fitted model whose
/// assignment is indexed by canonical scene position.
pub fn prune_with_model(
    dataset: &Dataset,
    model: &ClusterModel,
    params: &SelectionParams,
) -> Result<(Dataset, SelectionReport)> {
    params.validate()?;
    if model.assignment.len() != dataset.len() {
        return Err(Error::InvalidParam(format!(
            "model covers {} scenes, dataset has {}",
            model.assignment.len(),
            dataset.len()
        )));
    }
    let visual = dataset.require(Space::Visual)?;
    let scenes = dataset.scenes();

    let per_cluster: Vec<Vec<(usize, Verdict, bool)>> = model
        .members()
        .par_iter()
        .map(|members| -> Result<Vec<(usize, Verdict, bool)>> {
            let (with, without): (Vec<usize>, Vec<usize>) = members
                .iter()
                .partition(|&&p| scenes[p].visual_row.is_some());
            let rows: Vec<usize> = with
                .iter()
                .map(|&p| scenes[p].visual_row.unwrap())
                .collect();
            let outcome = greedy_prune_cluster(&rows, visual, params.epsilon)?;
            let mut verdicts = Vec::with_capacity(members.len());
            verdicts.extend(
                outcome
                    .kept
                    .iter()
                    .map(|&i| (with[i], Verdict::Kept, false)),
            );
            verdicts.extend(outcome.pruned.iter().map(|p| {
                (
                    with[p.member],
                    Verdict::Pruned {
                        keeper_scene_id: scenes[with[p.keeper]].scene_id.clone(),
                        visual_similarity: p.similarity,
                    },
                    false,
                )
            }));
            verdicts.extend(without.iter().map(|&p| (p, Verdict::Kept, true)));
            Ok(verdicts)
        })
        .collect::<Result<_>>()?;

    let mut slots: Vec<Option<(Verdict, bool)>> = vec![None; dataset.len()];
    for (p, v, missing) in per_cluster.into_iter().flatten() {
        slots[p] = Some((v, missing));
    }
    let mut entries = Vec::with_capacity(dataset.len());
    let mut kept_positions = Vec::new();
    for (p, slot) in slots.into_iter().enumerate() {
        let (verdict, missing_visual) = slot.expect("every scene belongs to a cluster");
        if missing_visual {
            log::warn!(
                "scene {:?} has no visual embedding; kept without deduplication",
                scenes[p].scene_id
            );
        }
        if verdict == Verdict::Kept {
            kept_positions.push(p);
        }
        entries.push(SelectionEntry {
            scene_id: scenes[p].scene_id.clone(),
            cluster_id: model.assignment[p],
            verdict,
            missing_visual,
        });
    }
    let counts = SelectionCounts {
        total: dataset.len(),
        kept: kept_positions.len(),
        pruned: dataset.len() - kept_positions.len(),
    };
    let report = SelectionReport {
        params: SelectionParams {
            k: model.k,
            ..*params
        },
        counts,
        entries,
        provenance: None,
    };
    let selected = dataset.subset(format!("{}-selected", dataset.name), &kept_positions)?;
    Ok((selected, report))
}

/// Number of scenes kept for a fraction of `n`: `ceil(fraction * n)`, at
/// least one when `n > 0`.
pub fn target_count(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // absorb representation error such as 0.7 * 10 = 7.000000000000001
    let raw = (fraction * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "fraction {fraction} outside (0, 1]"
        )))
    }
}

/// Seeded permutation of `0..n`. Random and RFS selection share it, so RFS
/// with all scores equal reproduces random selection exactly.
fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Uniform sample without replacement of `ceil(fraction * n)` scenes.
pub fn random_select(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    check_fraction(fraction)?;
    let n = dataset.len();
    let mut keep: Vec<usize> = seeded_permutation(n, seed)
        .into_iter()
        .take(target_count(fraction, n))
        .collect();
    keep.sort_unstable();
    dataset.subset(format!("{}-random", dataset.name), &keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedScene {
    pub scene_id: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct RfsSelection {
    pub dataset: Dataset,
    /// Every scene, best first.
    pub ranking: Vec<RankedScene>,
}

/// Repeat-factor sampling baseline.
///
/// Class frequency `f(c)` is the fraction of scenes containing at least one
/// instance of `c`; its repeat factor is `max(1, sqrt(t / f(c)))`. A scene
/// scores the maximum factor over classes it contains, or 1 with none. The
/// top `ceil(fraction * n)` scenes are kept.
pub fn rfs_select(dataset: &Dataset, fraction: f64, t: f64, seed: u64) -> Result<RfsSelection> {
    check_fraction(fraction)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "rfs threshold t = {t} outside (0, 1]"
        )));
    }
    dataset.all_labeled()?;
    let scores = repeat_factors(dataset, t);
    let n = dataset.len();
    let mut shuffle_rank = vec![0usize; n];
    for (rank, p) in seeded_permutation(n, seed).into_iter().enumerate() {
        shuffle_rank[p] = rank;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(shuffle_rank[a].cmp(&shuffle_rank[b]))
            .then(a.cmp(&b))
    });
    let ranking = order
        .iter()
        .map(|&p| RankedScene {
            scene_id: dataset.scenes()[p].scene_id.clone(),
            score: scores[p],
        })
        .collect();
    let mut keep: Vec<usize> = order[..target_count(fraction, n)].to_vec();
    keep.sort_unstable();
    Ok(RfsSelection {
        dataset: dataset.subset(format!("{}-rfs", dataset.name), &keep)?,
        ranking,
    })
}

/// Per-scene repeat factor, in canonical order. Scenes must be labeled.
pub fn repeat_factors(dataset: &Dataset, t: f64) -> Vec<f64> {
    use std::collections::BTreeMap;
    let n = dataset.len() as f64;
    let present = |s: &crate::datamodel::SceneRecord| -> Vec<String> {
        s.labels
            .iter()
            .flatten()
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k.clone())
            .collect()
    };
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for s in dataset.scenes() {
        for c in present(s) {
            *freq.entry(c).or_default() += 1;
        }
    }
    let factor: BTreeMap<String, f64> = freq
        .into_iter()
        .map(|(c, cnt)| (c, (t / (cnt as f64 / n)).sqrt().max(1.0)))
        .collect();
    dataset
        .scenes()
        .iter()
        .map(|s| present(s).iter().map(|c| factor[c]).fold(1.0f64, f64::max))
        .collect()
}
