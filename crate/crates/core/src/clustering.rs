//! Seeded k-means over unit-normalized embeddings.
//!
//! Initialization is greedy k-means++ (several D²-sampled candidates per
//! step, keeping the one that lowers the potential most), repeated `n_init`
//! times from one ChaCha8 stream; the lowest-objective run wins. Lloyd
//! iterations use squared Euclidean distance with centroids left
//! unnormalized.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{read_json, write_json};
use crate::error::{Error, Result};
use crate::vecstore::{read_embeddings, sq_dist_mixed, write_embeddings, EmbeddingMatrix};

pub const DEFAULT_K: usize = 300;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_N_INIT: usize = 4;

pub const CENTROIDS_FILE: &str = "clusters.ssev";
pub const MODEL_FILE: &str = "clusters.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative objective improvement drops below this.
    pub tol: f64,
    /// Independent initializations; the lowest final objective is kept.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            n_init: DEFAULT_N_INIT,
        }
    }
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self::new(DEFAULT_K, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Assignment did not change; centroids are exact member means.
    FixedPoint,
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// `k * dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances of each row to its assigned centroid.
    pub objective: f64,
    pub iterations_run: usize,
    pub seed: u64,
    pub stop: StopReason,
    /// Objective after the initial assignment and after every iteration of
    /// the winning run.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Member row indices per cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &c in &self.assignment {
            out[c] += 1;
        }
        out
    }

    /// Writes the centroids as SSEV plus a JSON metadata file.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let data: Vec<f32> = self.centroids.iter().map(|&x| x as f32).collect();
        let m = EmbeddingMatrix::new(self.dim, data, false)?;
        write_embeddings(&m, dir.join(CENTROIDS_FILE))?;
        write_json(
            dir.join(MODEL_FILE),
            &ModelMeta {
                k: self.k,
                dim: self.dim,
                seed: self.seed,
                objective: self.objective,
                iterations_run: self.iterations_run,
                stop: self.stop,
                objective_trace: self.objective_trace.clone(),
                assignment: self.assignment.clone(),
            },
        )
    }

    /// Loads a saved model. Centroids come back at `f32` precision.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: ModelMeta = read_json(dir.join(MODEL_FILE))?;
        let m = read_embeddings(dir.join(CENTROIDS_FILE))?;
        if m.count() != meta.k || m.dim() != meta.dim {
            return Err(Error::Format(format!(
                "centroid file is {}x{}, metadata says {}x{}",
                m.count(),
                m.dim(),
                meta.k,
                meta.dim
            )));
        }
        Ok(Self {
            k: meta.k,
            dim: meta.dim,
            centroids: m.as_slice().iter().map(|&x| x as f64).collect(),
            assignment: meta.assignment,
            objective: meta.objective,
            iterations_run: meta.iterations_run,
            seed: meta.seed,
            stop: meta.stop,
            objective_trace: meta.objective_trace,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    k: usize,
    dim: usize,
    seed: u64,
    objective: f64,
    iterations_run: usize,
    stop: StopReason,
    objective_trace: Vec<f64>,
    assignment: Vec<usize>,
}

/// Fits k-means to the rows of `m`, which must be normalized.
pub fn kmeans_fit(m: &EmbeddingMatrix, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let n = m.count();
    if !m.is_normalized() {
        return Err(Error::InvalidParam(
            "k-means input must be normalized".into(),
        ));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::InvalidParam(format!(
            "k = {} must be in [1, {n}] (row count)",
            cfg.k
        )));
    }
    if cfg.max_iters == 0 || cfg.n_init == 0 {
        return Err(Error::InvalidParam(
            "max_iters and n_init must be >= 1".into(),
        ));
    }
    if !(cfg.tol >= 0.0 && cfg.tol.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "tol = {} must be >= 0",
            cfg.tol
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..cfg.n_init {
        let init = plus_plus_init(m, cfg.k, &mut rng);
        let model = lloyd(m, init, cfg);
        if best.as_ref().is_none_or(|b| model.objective < b.objective) {
            best = Some(model);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Nearest centroid per row (squared Euclidean, ties to the lowest index).
pub fn assign(model: &ClusterModel, m: &EmbeddingMatrix) -> Result<Vec<usize>> {
    if m.dim() != model.dim {
        return Err(Error::DimMismatch {
            expected: model.dim,
            actual: m.dim(),
        });
    }
    Ok(assign_rows(m, &model.centroids, model.k).0)
}

fn nearest(row: &[f32], centroids: &[f64], k: usize) -> (usize, f64) {
    let dim = row.len();
    let mut best = (0, f64::INFINITY);
    for c in 0..k {
        let d = sq_dist_mixed(row, &centroids[c * dim..(c + 1) * dim]);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign_rows(m: &EmbeddingMatrix, centroids: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    (0..m.count())
        .into_par_iter()
        .map(|i| nearest(m.row(i), centroids, k))
        .unzip()
}

fn sq_dists_to(m: &EmbeddingMatrix, point: &[f32]) -> Vec<f64> {
    let p: Vec<f64> = point.iter().map(|&x| x as f64).collect();
    (0..m.count())
        .into_par_iter()
        .map(|i| sq_dist_mixed(m.row(i), &p))
        .collect()
}

fn plus_plus_init(m: &EmbeddingMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = m.count();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut chosen = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    chosen.push(first);
    let mut closest = sq_dists_to(m, m.row(first));

    while chosen.len() < k {
        let total: f64 = closest.iter().sum();
        if total <= 0.0 {
            // every row coincides with a chosen center; pick uniformly among the rest
            let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            let pick = rest[rng.gen_range(0..rest.len())];
            chosen.push(pick);
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let target = rng.gen::<f64>() * total;
            let cand = sample_index(&closest, target);
            let d = sq_dists_to(m, m.row(cand));
            let merged: Vec<f64> = closest.iter().zip(&d).map(|(&a, &b)| a.min(b)).collect();
            let potential: f64 = merged.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((cand, potential, merged));
            }
        }
        let (cand, _, merged) = best.expect("trials >= 2");
        chosen.push(cand);
        closest = merged;
    }

    chosen
        .iter()
        .flat_map(|&i| m.row(i).iter().map(|&x| x as f64))
        .collect()
}

fn sample_index(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if acc > target {
            return i;
        }
    }
    last
}

/// Moves each non-empty cluster's centroid to its members' mean and returns
/// the member counts.
fn update_means(
    m: &EmbeddingMatrix,
    assignment: &[usize],
    centroids: &mut [f64],
    k: usize,
) -> Vec<usize> {
    let dim = m.dim();
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(m.row(i)) {
            *s += x as f64;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (dst, s) in centroids[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *dst = s / n;
            }
        }
    }
    counts
}

fn lloyd(m: &EmbeddingMatrix, mut centroids: Vec<f64>, cfg: &KMeansConfig) -> ClusterModel {
    let (k, dim, n) = (cfg.k, m.dim(), m.count());
    let (mut assignment, d2) = assign_rows(m, &centroids, k);
    let mut objective: f64 = d2.iter().sum();
    let mut trace = vec![objective];
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;

        let counts = update_means(m, &assignment, &mut centroids, k);
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            // reseed each empty cluster on the row farthest from its current centroid
            let mut spread: Vec<(usize, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let c = assignment[i];
                    (
                        i,
                        sq_dist_mixed(m.row(i), &centroids[c * dim..(c + 1) * dim]),
                    )
                })
                .collect();
            spread.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (c, &(row, _)) in empty.iter().zip(&spread) {
                for (dst, &x) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(m.row(row)) {
                    *dst = x as f64;
                }
            }
        }

        let (next, d2) = assign_rows(m, &centroids, k);
        let next_objective: f64 = d2.iter().sum();
        trace.push(next_objective);
        let changed = next != assignment;
        let improvement = if objective > 0.0 {
            (objective - next_objective) / objective
        } else {
            0.0
        };
        assignment = next;
        objective = next_objective;
        if !changed {
            stop = StopReason::FixedPoint;
            break;
        }
        if improvement < cfg.tol {
            stop = StopReason::Tolerance;
            break;
        }
    }

    if stop != StopReason::FixedPoint {
        // The last assignment moved; finish with a mean update so centroids
        // are the means of the reported members.
        update_means(m, &assignment, &mut centroids, k);
        // collected first: a parallel float sum would depend on the thread count
        let d2: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let c = assignment[i];
                sq_dist_mixed(m.row(i), &centroids[c * dim..(c + 1) * dim])
            })
            .collect();
        objective = d2.iter().sum();
        trace.push(objective);
    }

    ClusterModel {
        k,
        dim,
        centroids,
        assignment,
        objective,
        iterations_run: iterations,
        seed: cfg.seed,
        stop,
        objective_trace: trace,
    }
}
