//! Independent reference implementations used by the integration tests.
//! Everything here is written directly from the definitions, without calling
//! into the library's kernels.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sse_curate::{Dataset, EmbeddingMatrix, SceneRecord};

pub fn cos64(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

/// A unit vector at roughly `spread` (angle-ish) around `center`.
pub fn jitter(rng: &mut ChaCha8Rng, center: &[f32], spread: f64) -> Vec<f32> {
    let v: Vec<f64> = center
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            c as f64 + spread * z / (center.len() as f64).sqrt()
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

pub fn matrix(rows: &[Vec<f32>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows, true).unwrap()
}

/// Dataset `name` with ids `{prefix}{i:04}`, row `i` bound to scene `i`.
pub fn dataset(name: &str, prefix: &str, semantic: &[Vec<f32>], visual: &[Vec<f32>]) -> Dataset {
    assert_eq!(semantic.len(), visual.len());
    let scenes = (0..semantic.len())
        .map(|i| SceneRecord {
            caption: format!("{prefix} caption {i}"),
            semantic_row: Some(i),
            visual_row: Some(i),
            ..SceneRecord::new(format!("{prefix}{i:04}"), format!("session-{}", i % 7))
        })
        .collect();
    Dataset::new(name, scenes)
        .unwrap()
        .bind(Some(matrix(semantic)), Some(matrix(visual)))
        .unwrap()
}

/// Greedy dedup replayed scene by scene: a scene is pruned by the earliest
/// already-kept scene within `eps` cosine distance, else kept.
/// Returns, per row, `None` when kept or `Some((keeper, similarity))`.
pub fn greedy_replay(rows: &[Vec<f32>], eps: f64) -> Vec<Option<(usize, f64)>> {
    let mut out: Vec<Option<(usize, f64)>> = Vec::with_capacity(rows.len());
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..rows.len() {
        let hit = kept
            .iter()
            .map(|&i| (i, cos64(&rows[i], &rows[j])))
            .find(|&(_, s)| 1.0 - s < eps);
        if hit.is_none() {
            kept.push(j);
        }
        out.push(hit);
    }
    out
}

/// One farthest-point step record: pool index, anchor index, distance.
pub type FpsStep = (usize, usize, f64);

/// Brute-force farthest-point selection: every step recomputes every
/// remaining candidate's distance to every current anchor from scratch.
pub fn fps_oracle(
    pool: &[Vec<f32>],
    anchors: &[Vec<f32>],
    budget: usize,
    dynamic: bool,
) -> Vec<FpsStep> {
    let mut anchors: Vec<Vec<f32>> = anchors.to_vec();
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    for _ in 0..budget {
        let mut best: Option<FpsStep> = None;
        for (i, p) in pool.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let mut near = (0usize, f64::INFINITY);
            for (a, v) in anchors.iter().enumerate() {
                let d = 1.0 - cos64(p, v);
                if d < near.1 {
                    near = (a, d);
                }
            }
            if best.is_none_or(|b| near.1 > b.2) {
                best = Some((i, near.0, near.1));
            }
        }
        let step = best.expect("budget within pool");
        taken[step.0] = true;
        if dynamic {
            anchors.push(pool[step.0].clone());
        }
        out.push(step);
    }
    out
}

/// Full sort by similarity descending, ties by index.
pub fn sorted_by_similarity(rows: &[Vec<f32>], q: &[f32]) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, cos64(r, q)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

/// Best label-matching accuracy over all cluster-to-label bijections, by
/// brute force over permutations (k up to 8).
pub fn matched_accuracy(labels: &[usize], clusters: &[usize], k: usize) -> f64 {
    assert!(k <= 8);
    let mut confusion = vec![vec![0usize; k]; k];
    for (&l, &c) in labels.iter().zip(clusters) {
        confusion[c][l] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let hits: usize = (0..k).map(|c| confusion[c][p[c]]).sum();
        best = best.max(hits);
    });
    best as f64 / labels.len() as f64
}

fn permute(v: &mut Vec<usize>, at: usize, f: &mut dyn FnMut(&[usize])) {
    if at == v.len() {
        f(v);
        return;
    }
    for i in at..v.len() {
        v.swap(at, i);
        permute(v, at + 1, f);
        v.swap(at, i);
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sse() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_sse"))
}

/// Runs the CLI in `cwd`.
pub fn run_sse(cwd: &Path, args: &[&str]) -> Output {
    Command::new(sse())
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("sse binary runs")
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "sse failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}
