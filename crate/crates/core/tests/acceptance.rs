//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs with `harness = false` so the lines always print.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use sse_curate::clustering::{kmeans_fit, KMeansConfig, StopReason};
use sse_curate::datamodel::{SelectionReport, Space, Verdict};
use sse_curate::enrichment::{Anchor, AnchorOrigin};
use sse_curate::metrics::{
    mean_unique_sessions, retention_curve_with_model, unique_sessions_per_cluster,
};
use sse_curate::selection::{fit_clusters, greedy_prune_cluster, prune_with_model};
use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::{
    enrich, random_select, retrieve, rfs_select, AnchorPolicy, AnchorSet, Dataset, SceneRecord,
    SelectionParams,
};

// Pinned tolerances.
const SIM_TOL: f64 = 1e-6;
const DIST_TOL: f64 = 1e-6;
const CENTROID_TOL: f64 = 1e-5;
const RECOVERY_MIN: f64 = 0.99;
const SESSION_RATIO_MIN: f64 = 1.5;
const PRUNE_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Rows of one random cluster: a few visual "themes" with members jittered
/// around them, so every epsilon both keeps and prunes.
fn random_cluster(rng: &mut rand_chacha::ChaCha8Rng, size: usize, dim: usize) -> Vec<Vec<f32>> {
    use rand::Rng;
    let themes: Vec<Vec<f32>> = (0..rng.gen_range(1..=6))
        .map(|_| random_unit(rng, dim))
        .collect();
    (0..size)
        .map(|_| {
            let t = &themes[rng.gen_range(0..themes.len())];
            let spread = [0.05, 0.3, 0.8][rng.gen_range(0..3)];
            jitter(rng, t, spread)
        })
        .collect()
}

/// Exhaustive check that kept members of each cluster are pairwise at
/// least `eps` apart. Returns (violating pairs, pairs checked).
fn separation_violations(ds: &Dataset, report: &SelectionReport) -> (usize, usize) {
    let mut by_cluster: BTreeMap<usize, Vec<&[f32]>> = BTreeMap::new();
    for e in &report.entries {
        if e.verdict == Verdict::Kept && !e.missing_visual {
            let p = ds.position(&e.scene_id).unwrap();
            by_cluster
                .entry(e.cluster_id)
                .or_default()
                .push(ds.vector(Space::Visual, p).unwrap());
        }
    }
    let eps = report.params.epsilon;
    let (mut bad, mut pairs) = (0, 0);
    for kept in by_cluster.values() {
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                pairs += 1;
                if 1.0 - cos64(kept[i], kept[j]) < eps {
                    bad += 1;
                }
            }
        }
    }
    (bad, pairs)
}

fn eight_blobs() -> sse_curate::synthgen::Synthetic {
    generate(&SynthConfig::new(8, 250, 32, 0.05, 2024)).unwrap()
}

fn epsilon_grid() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.05).collect()
}

// 1 and the random-cluster half of 2.
fn greedy_prune_oracle(violations: &mut usize, checked: &mut usize) -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let mut max_diff: f64 = 0.0;
    let mut runs = 0;
    for cluster in 0..100 {
        use rand::Rng;
        let size = rng.gen_range(1..=64);
        let rows = random_cluster(&mut rng, size, 16);
        let m = matrix(&rows);
        let members: Vec<usize> = (0..size).collect();
        for eps in [0.05, 0.2, 0.5] {
            runs += 1;
            let got = greedy_prune_cluster(&members, &m, eps).map_err(|e| e.to_string())?;
            let want = greedy_replay(&rows, eps);
            let want_kept: Vec<usize> = (0..size).filter(|&i| want[i].is_none()).collect();
            check(got.kept == want_kept, || {
                format!(
                    "cluster {cluster} eps {eps}: kept {:?} != oracle {:?}",
                    got.kept, want_kept
                )
            })?;
            check(got.pruned.len() + got.kept.len() == size, || {
                format!("cluster {cluster} eps {eps}: verdict count mismatch")
            })?;
            for p in &got.pruned {
                let (keeper, sim) = want[p.member].ok_or_else(|| {
                    format!(
                        "cluster {cluster} eps {eps}: member {} pruned, oracle keeps it",
                        p.member
                    )
                })?;
                check(p.keeper == keeper, || {
                    format!(
                        "cluster {cluster} eps {eps}: member {} keeper {} != {keeper}",
                        p.member, p.keeper
                    )
                })?;
                let diff = (p.similarity - sim).abs();
                max_diff = max_diff.max(diff);
                check(diff <= SIM_TOL, || {
                    format!("cluster {cluster} eps {eps}: similarity off by {diff:e}")
                })?;
            }
            // survivor separation
            for (x, &i) in got.kept.iter().enumerate() {
                for &j in &got.kept[x + 1..] {
                    *checked += 1;
                    if 1.0 - cos64(&rows[i], &rows[j]) < eps {
                        *violations += 1;
                    }
                }
            }
        }
    }
    let took = started.elapsed();
    check(took < PRUNE_BUDGET, || {
        format!("took {took:?}, budget {PRUNE_BUDGET:?}")
    })?;
    Ok(format!(
        "{runs} runs, max |similarity diff| {max_diff:.1e} (tol {SIM_TOL:.0e}), {:.2}s",
        took.as_secs_f64()
    ))
}

// 3 and the synthetic half of 2.
fn retention_monotone(violations: &mut usize, checked: &mut usize) -> Outcome {
    let synth = eight_blobs();
    let ds = &synth.dataset;
    check(ds.len() == 2000, || {
        format!("synthetic has {} scenes", ds.len())
    })?;
    let params = SelectionParams::new(8, 0.0, 7);
    let model = fit_clusters(ds, &params).map_err(|e| e.to_string())?;
    let grid = epsilon_grid();
    let curve =
        retention_curve_with_model(ds, &model, &params, &grid).map_err(|e| e.to_string())?;
    check(curve[0].fraction_remaining == 1.0, || {
        format!("retention at eps 0 is {}", curve[0].fraction_remaining)
    })?;
    for w in curve.windows(2) {
        check(w[1].fraction_remaining <= w[0].fraction_remaining, || {
            format!(
                "retention rises from {} at eps {} to {} at eps {}",
                w[0].fraction_remaining, w[0].epsilon, w[1].fraction_remaining, w[1].epsilon
            )
        })?;
    }
    for &eps in &grid {
        let p = SelectionParams {
            epsilon: eps,
            ..params
        };
        let (_, report) = prune_with_model(ds, &model, &p).map_err(|e| e.to_string())?;
        let (bad, pairs) = separation_violations(ds, &report);
        *violations += bad;
        *checked += pairs;
    }
    let points: Vec<String> = curve
        .iter()
        .step_by(4)
        .map(|p| format!("{:.2}->{:.3}", p.epsilon, p.fraction_remaining))
        .collect();
    Ok(format!(
        "{} points non-increasing; {}",
        curve.len(),
        points.join(" ")
    ))
}

fn enrichment_oracle() -> Outcome {
    let mut rng = rng(4);
    let dim = 16;
    let mut cases = 0;
    let mut max_diff: f64 = 0.0;
    for pool_size in [50, 200] {
        for n_anchors in [1, 5, 10] {
            let anchor_rows: Vec<Vec<f32>> =
                (0..n_anchors).map(|_| random_unit(&mut rng, dim)).collect();
            let pool_rows: Vec<Vec<f32>> =
                (0..pool_size).map(|_| random_unit(&mut rng, dim)).collect();
            let selected = dataset("sel", "sel-", &anchor_rows, &anchor_rows);
            let pool = dataset("pool", "pool-", &pool_rows, &pool_rows);
            let anchors: Vec<Anchor> = anchor_rows
                .iter()
                .enumerate()
                .map(|(i, v)| Anchor {
                    id: format!("sel-{i:04}"),
                    vector: v.clone(),
                    origin: AnchorOrigin::Cluster,
                })
                .collect();
            for budget in [1, 7, 20] {
                for policy in [AnchorPolicy::Static, AnchorPolicy::Dynamic] {
                    cases += 1;
                    let set = AnchorSet::new(anchors.clone(), policy).unwrap();
                    let run = enrich(&selected, &pool, &set, budget).map_err(|e| e.to_string())?;
                    let want = fps_oracle(
                        &pool_rows,
                        &anchor_rows,
                        budget,
                        policy == AnchorPolicy::Dynamic,
                    );
                    let label =
                        format!("pool {pool_size} anchors {n_anchors} budget {budget} {policy:?}");
                    check(run.report.additions.len() == want.len(), || {
                        format!("{label}: wrong count")
                    })?;
                    for (got, &(p, a, d)) in run.report.additions.iter().zip(&want) {
                        let want_id = format!("pool-{p:04}");
                        let anchor_id = if a < n_anchors {
                            format!("sel-{a:04}")
                        } else {
                            format!("pool-{:04}", want[a - n_anchors].0)
                        };
                        check(got.scene_id == want_id, || {
                            format!("{label} step {}: {} != {want_id}", got.step, got.scene_id)
                        })?;
                        check(got.nearest_anchor_id == anchor_id, || {
                            format!(
                                "{label} step {}: anchor {} != {anchor_id}",
                                got.step, got.nearest_anchor_id
                            )
                        })?;
                        let diff = (got.semantic_distance - d).abs();
                        max_diff = max_diff.max(diff);
                        check(diff <= DIST_TOL, || {
                            format!("{label} step {}: distance off by {diff:e}", got.step)
                        })?;
                    }
                    if policy == AnchorPolicy::Static {
                        for w in run.report.additions.windows(2) {
                            check(w[1].semantic_distance <= w[0].semantic_distance, || {
                                format!("{label}: static distances increase at step {}", w[1].step)
                            })?;
                        }
                    }
                    check(run.dataset.len() == selected.len() + budget, || {
                        format!("{label}: D_e size")
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "{cases} cases, max |distance diff| {max_diff:.1e} (tol {DIST_TOL:.0e})"
    ))
}

fn kmeans_invariants() -> Outcome {
    let mut worst_centroid: f64 = 0.0;
    for run in 0..50u64 {
        use rand::Rng;
        let mut r = rng(500 + run);
        let n = r.gen_range(40..200);
        let dim = r.gen_range(2..12);
        let k = r.gen_range(1..=10.min(n));
        let rows: Vec<Vec<f32>> = (0..n).map(|_| random_unit(&mut r, dim)).collect();
        let m = matrix(&rows);
        let cfg = KMeansConfig {
            max_iters: 100,
            ..KMeansConfig::new(k, run)
        };
        let model = kmeans_fit(&m, &cfg).map_err(|e| e.to_string())?;
        for w in model.objective_trace.windows(2) {
            check(w[1] <= w[0], || {
                format!("run {run}: objective rose {} -> {}", w[0], w[1])
            })?;
        }
        check(
            model.objective == *model.objective_trace.last().unwrap(),
            || format!("run {run}: objective is not the last trace value"),
        )?;
        check(model.stop != StopReason::MaxIters, || {
            format!("run {run}: did not converge")
        })?;
        // centroid == mean of its members
        for (c, members) in model.members().iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            for (d, &got) in model.centroid(c).iter().enumerate() {
                let mean =
                    members.iter().map(|&i| rows[i][d] as f64).sum::<f64>() / members.len() as f64;
                let diff = (got - mean).abs();
                worst_centroid = worst_centroid.max(diff);
                check(diff <= CENTROID_TOL, || {
                    format!("run {run}: centroid {c} off mean by {diff:e}")
                })?;
            }
        }
    }

    let synth = eight_blobs();
    let m = synth.dataset.ordered_matrix(Space::Semantic).unwrap();
    let model = kmeans_fit(&m, &KMeansConfig::new(8, 11)).map_err(|e| e.to_string())?;
    let acc = matched_accuracy(&synth.truth.blob_labels(), &model.assignment, 8);
    check(acc >= RECOVERY_MIN, || {
        format!("planted recovery {acc:.4} < {RECOVERY_MIN}")
    })?;
    Ok(format!(
        "50 runs monotone, max centroid-mean diff {worst_centroid:.1e} (tol {CENTROID_TOL:.0e}); 8-blob recovery {:.2}%",
        100.0 * acc
    ))
}

fn sessions_semantic_vs_visual() -> Outcome {
    let synth = eight_blobs();
    let ds = &synth.dataset;
    let mean = |space: Space| -> Result<f64, String> {
        let params = SelectionParams {
            cluster_space: space,
            ..SelectionParams::new(8, 0.0, 3)
        };
        let model = fit_clusters(ds, &params).map_err(|e| e.to_string())?;
        let rows = unique_sessions_per_cluster(&model, ds).map_err(|e| e.to_string())?;
        Ok(mean_unique_sessions(&rows))
    };
    let semantic = mean(Space::Semantic)?;
    let visual = mean(Space::Visual)?;
    let ratio = semantic / visual;
    check(ratio >= SESSION_RATIO_MIN, || {
        format!("semantic {semantic:.2} / visual {visual:.2} = {ratio:.2} < {SESSION_RATIO_MIN}")
    })?;
    Ok(format!(
        "mean unique sessions semantic {semantic:.2}, visual {visual:.2}, ratio {ratio:.2} (min {SESSION_RATIO_MIN})"
    ))
}

/// Every file under `dir`, relative path -> bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn pipeline(threads: &str) -> BTreeMap<String, Vec<u8>> {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let t = ["--threads", threads];
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "synth",
            "--out",
            "data",
            "--blobs",
            "6",
            "--per-blob",
            "60",
            "--dim",
            "16",
            "--noise",
            "0.2",
            "--duplicate-pairs",
            "5",
            "--label-classes",
            "4",
            "--visual-session-weight",
            "0.6",
            "--seed",
            "5",
        ],
        vec![
            "synth",
            "--out",
            "pool",
            "--blobs",
            "3",
            "--per-blob",
            "40",
            "--dim",
            "16",
            "--noise",
            "0.4",
            "--id-prefix",
            "pool",
            "--label-classes",
            "4",
            "--seed",
            "6",
        ],
        vec![
            "select",
            "--dataset",
            "data",
            "--k",
            "12",
            "--epsilon",
            "0.3",
            "--seed",
            "9",
            "--out",
            "sel",
            "--prompt",
            "describe the scene",
        ],
        vec![
            "enrich",
            "--selected",
            "sel",
            "--pool",
            "pool",
            "--target-fraction",
            "0.9",
            "--out",
            "enr",
        ],
        vec![
            "enrich",
            "--selected",
            "sel",
            "--pool",
            "pool",
            "--budget",
            "15",
            "--anchor-policy",
            "static",
            "--out",
            "enr-static",
        ],
        vec![
            "sample",
            "--dataset",
            "data",
            "--method",
            "rfs",
            "--fraction",
            "0.5",
            "--out",
            "rfs",
        ],
        vec![
            "report",
            "retention",
            "--dataset",
            "data",
            "--k",
            "12",
            "--out",
            "retention.json",
        ],
        vec![
            "report",
            "sessions",
            "--dataset",
            "data",
            "--k",
            "12",
            "--out",
            "sessions.json",
        ],
        vec![
            "report",
            "objects",
            "--dataset",
            "enr",
            "--format",
            "csv",
            "--out",
            "objects.csv",
        ],
        vec![
            "report",
            "ksweep",
            "--dataset",
            "data",
            "--ks",
            "2,6,12",
            "--epsilon",
            "0.3",
            "--out",
            "ksweep.json",
        ],
    ];
    let mut stdout = Vec::new();
    for s in steps {
        let args: Vec<&str> = t.iter().copied().chain(s).collect();
        stdout.extend(ok(&run_sse(dir, &args)).into_bytes());
    }
    let mut snap = snapshot(dir);
    snap.insert("<stdout>".into(), stdout);
    snap
}

fn cli_determinism() -> Outcome {
    let a = pipeline("1");
    let b = pipeline("8");
    let c = pipeline("8");
    for (other, label) in [(&b, "threads 8"), (&c, "threads 8 rerun")] {
        let names_a: Vec<_> = a.keys().collect();
        let names_o: Vec<_> = other.keys().collect();
        check(names_a == names_o, || {
            format!("{label}: different file sets")
        })?;
        for (name, bytes) in &a {
            check(other[name] == *bytes, || {
                format!("{label}: {name} differs from threads 1")
            })?;
        }
    }
    let reports = a
        .keys()
        .filter(|k| k.ends_with(".json") || k.ends_with(".csv") || k.ends_with(".jsonl"))
        .count();
    Ok(format!(
        "{} files ({reports} manifests/reports) byte-identical across threads 1, 8, 8",
        a.len()
    ))
}

fn retrieval_exact() -> Outcome {
    let mut r = rng(8);
    let dim = 16;
    let mut rows: Vec<Vec<f32>> = (0..500).map(|_| random_unit(&mut r, dim)).collect();
    // a few exact duplicates so ties are exercised
    for i in 0..10 {
        rows[490 + i] = rows[i * 7].clone();
    }
    let ds = dataset("ret", "s", &rows, &rows);
    for qi in 0..100 {
        let q = if qi % 10 == 0 {
            rows[qi].clone()
        } else {
            random_unit(&mut r, dim)
        };
        let want = sorted_by_similarity(&rows, &q);
        let top = retrieve(&ds, &q, 10).map_err(|e| e.to_string())?;
        check(top.len() == 10, || {
            format!("query {qi}: {} hits", top.len())
        })?;
        for (rank, (h, &(i, s))) in top.iter().zip(&want).enumerate() {
            check(h.scene_id == format!("s{i:04}"), || {
                format!("query {qi} rank {rank}: {} != s{i:04}", h.scene_id)
            })?;
            check((h.similarity - s).abs() <= SIM_TOL, || {
                format!("query {qi} rank {rank}: similarity")
            })?;
        }
        for n in 1..=10 {
            let prefix = retrieve(&ds, &q, n).map_err(|e| e.to_string())?;
            check(prefix[..] == top[..n], || {
                format!("query {qi}: top-{n} is not a prefix of top-10")
            })?;
        }
    }
    Ok("100 queries over 500 scenes match full sort; prefixes hold for n = 1..10".into())
}

fn labeled(n: usize, rare_at: Option<usize>) -> Dataset {
    let scenes = (0..n)
        .map(|i| {
            let mut labels = BTreeMap::from([("car".to_string(), 1 + (i % 3) as u64)]);
            if Some(i) == rare_at {
                labels.insert("bicycle".into(), 1);
            }
            SceneRecord {
                labels: Some(labels),
                ..SceneRecord::new(format!("s{i:04}"), "x")
            }
        })
        .collect();
    Dataset::new("labeled", scenes).unwrap()
}

fn rfs_sanity() -> Outcome {
    let n = 200;
    let rare = 137;
    let ds = labeled(n, Some(rare));
    let freq = 1.0 / n as f64;
    for t in [0.01, 0.1, 0.5, 1.0] {
        check(t > freq, || "threshold below frequency".into())?;
        for seed in 0..5 {
            let sel = rfs_select(&ds, 0.1, t, seed).map_err(|e| e.to_string())?;
            let first = &sel.ranking[0];
            check(first.scene_id == format!("s{rare:04}"), || {
                format!("t {t} seed {seed}: {} ranked first", first.scene_id)
            })?;
            let want = (t / freq).sqrt();
            check((first.score - want).abs() < 1e-12, || {
                format!("t {t}: score {} != {want}", first.score)
            })?;
            check(sel.dataset.position(&first.scene_id).is_some(), || {
                "rare scene not kept".into()
            })?;
        }
    }

    let uniform = labeled(n, None);
    let mut distinct = HashSet::new();
    for seed in 0..10 {
        for fraction in [0.05, 0.3, 0.7] {
            let rfs = rfs_select(&uniform, fraction, 0.3, seed).map_err(|e| e.to_string())?;
            let rnd = random_select(&uniform, fraction, seed).map_err(|e| e.to_string())?;
            let ids = |d: &Dataset| {
                d.scenes()
                    .iter()
                    .map(|s| s.scene_id.clone())
                    .collect::<Vec<_>>()
            };
            check(ids(&rfs.dataset) == ids(&rnd), || {
                format!("uniform classes, seed {seed} fraction {fraction}: rfs != random")
            })?;
            if fraction == 0.3 {
                distinct.insert(ids(&rnd));
            }
        }
    }
    check(distinct.len() == 10, || {
        "different seeds gave identical subsets".into()
    })?;
    Ok("rare scene first for t in {0.01, 0.1, 0.5, 1}; uniform classes equal seeded random for 30 cases".into())
}

fn separation(violations: usize, checked: usize) -> Outcome {
    check(violations == 0, || {
        format!("{violations} violating pairs of {checked}")
    })?;
    Ok(format!("0 violations over {checked} surviving pairs"))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let mut violations = 0;
    let mut checked = 0;
    let mut results: HashMap<u8, (&str, Outcome)> = HashMap::new();
    results.insert(
        1,
        (
            "greedy prune equals replay oracle",
            guarded(|| greedy_prune_oracle(&mut violations, &mut checked)),
        ),
    );
    results.insert(
        3,
        (
            "retention non-increasing in epsilon",
            guarded(|| retention_monotone(&mut violations, &mut checked)),
        ),
    );
    results.insert(
        2,
        (
            "surviving scenes pairwise separated",
            separation(violations, checked),
        ),
    );
    results.insert(
        4,
        (
            "enrichment equals farthest-point oracle",
            guarded(enrichment_oracle),
        ),
    );
    results.insert(
        5,
        (
            "k-means invariants and planted recovery",
            guarded(kmeans_invariants),
        ),
    );
    results.insert(
        6,
        (
            "semantic clusters span more sessions",
            guarded(sessions_semantic_vs_visual),
        ),
    );
    results.insert(
        7,
        (
            "CLI outputs byte-identical across threads",
            guarded(cli_determinism),
        ),
    );
    results.insert(
        8,
        (
            "retrieval equals full-sort oracle",
            guarded(retrieval_exact),
        ),
    );
    results.insert(9, ("repeat-factor sampling sanity", guarded(rfs_sanity)));

    let mut failed = 0;
    for id in 1..=9u8 {
        let (name, outcome) = &results[&id];
        match outcome {
            Ok(detail) => println!("PASS [{id}] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{id}] {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
