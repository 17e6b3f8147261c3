//! Synthetic datasets with planted structure.
//!
//! Semantic rows are noisy copies of `blobs` well-separated unit directions.
//! Sessions cut across blobs: blob `b`'s `i`-th scene belongs to session
//! `(b * sessions_per_blob + i) mod (blobs * sessions_per_blob)`, so every
//! session holds scenes from many blobs. Visual rows mix a per-session
//! direction with per-scene randomness,
//! `normalize(w * session + (1 - w) * u)`, so visual similarity follows
//! sessions while semantic similarity follows blobs. Exact visual duplicate
//! pairs can be planted for deduplication tests; both members of a pair share
//! a blob and a session.
//!
//! All randomness comes from one ChaCha8 stream consumed in a fixed order,
//! so a seed pins the output byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{read_json, write_json, Dataset, SceneRecord};
use crate::error::{Error, Result};
use crate::vecstore::{normalized, EmbeddingMatrix};

pub const TRUTH_FILE: &str = "truth.json";

/// Maximum pairwise cosine between planted blob centers.
pub const MAX_CENTER_COSINE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProfile {
    pub classes: usize,
    /// Instance counts for a present class are drawn from `1..=max_count`.
    pub max_count: u64,
}

impl LabelProfile {
    pub fn class_name(c: usize) -> String {
        format!("class_{c:02}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub blobs: usize,
    pub points_per_blob: usize,
    pub dim: usize,
    /// Standard deviation of the Gaussian noise added to blob centers.
    pub noise: f64,
    pub sessions_per_blob: usize,
    pub duplicate_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelProfile>,
    pub seed: u64,
    /// Weight of the session direction in visual rows, in `[0, 1]`.
    pub visual_session_weight: f64,
    pub id_prefix: String,
}

impl SynthConfig {
    pub fn new(blobs: usize, points_per_blob: usize, dim: usize, noise: f64, seed: u64) -> Self {
        Self {
            blobs,
            points_per_blob,
            dim,
            noise,
            sessions_per_blob: 4,
            duplicate_pairs: 0,
            labels: None,
            seed,
            visual_session_weight: 0.9,
            id_prefix: "scene".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.dim < 2 {
            return bad("synthetic dim must be >= 2");
        }
        if self.blobs == 0 || self.points_per_blob == 0 || self.sessions_per_blob == 0 {
            return bad("blob, point and session counts must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise sigma must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.visual_session_weight) {
            return bad("visual_session_weight must be in [0, 1]");
        }
        if 2 * self.duplicate_pairs > (self.points_per_blob / 2) * 2 * self.blobs {
            return bad("too many duplicate pairs for the number of scenes");
        }
        if let Some(l) = &self.labels {
            if l.classes == 0 || l.max_count == 0 {
                return bad("label profile needs at least one class and max_count >= 1");
            }
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.blobs * self.points_per_blob
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub scene_id: String,
    pub blob: usize,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<String>,
}

/// Everything the generator planted, in canonical scene order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub scenes: Vec<TruthRow>,
    /// `(original, copy)` pairs with identical visual rows.
    pub duplicate_pairs: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn blob_labels(&self) -> Vec<usize> {
        self.scenes.iter().map(|r| r.blob).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

impl Synthetic {
    /// Writes a dataset directory plus `truth.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.dataset.save_dir(dir)?;
        write_json(dir.join(TRUTH_FILE), &self.truth)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit64(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn to_unit32(v: &[f64]) -> Vec<f32> {
    normalized(&v.iter().map(|&x| x as f32).collect::<Vec<_>>())
}

fn blob_centers(rng: &mut ChaCha8Rng, blobs: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    const MAX_ATTEMPTS: usize = 100_000;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(blobs);
    let mut attempts = 0;
    while centers.len() < blobs {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::InvalidParam(format!(
                "could not place {blobs} blob centers with pairwise cosine < {MAX_CENTER_COSINE} in dim {dim}"
            )));
        }
        let c = unit64(&gaussian(rng, dim));
        let ok = centers
            .iter()
            .all(|o| o.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() < MAX_CENTER_COSINE);
        if ok {
            centers.push(c);
        }
    }
    Ok(centers)
}

pub fn generate(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.dim;
    let centers = blob_centers(&mut rng, cfg.blobs, dim)?;
    let n_sessions = cfg.blobs * cfg.sessions_per_blob;
    let session_dirs: Vec<Vec<f64>> = (0..n_sessions)
        .map(|_| unit64(&gaussian(&mut rng, dim)))
        .collect();
    let w = cfg.visual_session_weight;

    let mut scenes = Vec::with_capacity(cfg.total());
    let mut truth = Vec::with_capacity(cfg.total());
    let mut semantic = Vec::with_capacity(cfg.total());
    let mut visual = Vec::with_capacity(cfg.total());
    let mut sessions = Vec::with_capacity(cfg.total());
    for (b, center) in centers.iter().enumerate() {
        for i in 0..cfg.points_per_blob {
            let pos = scenes.len();
            let noise = gaussian(&mut rng, dim);
            let sem: Vec<f64> = center
                .iter()
                .zip(&noise)
                .map(|(c, z)| c + cfg.noise * z)
                .collect();
            let session = (b * cfg.sessions_per_blob + i) % n_sessions;
            let own = unit64(&gaussian(&mut rng, dim));
            let vis: Vec<f64> = session_dirs[session]
                .iter()
                .zip(&own)
                .map(|(s, u)| w * s + (1.0 - w) * u)
                .collect();
            let labels = cfg.labels.as_ref().map(|profile| {
                let mut m = BTreeMap::new();
                for c in 0..profile.classes {
                    // long-tailed presence: class c appears with probability 1/(c+1)
                    if rng.gen_bool(1.0 / (c as f64 + 1.0)) {
                        m.insert(
                            LabelProfile::class_name(c),
                            rng.gen_range(1..=profile.max_count),
                        );
                    }
                }
                m
            });
            let scene_id = format!("{}-{pos:05}", cfg.id_prefix);
            scenes.push(SceneRecord {
                caption: format!("synthetic scene {pos}: theme {b}, drive {session}"),
                semantic_row: Some(pos),
                visual_row: Some(pos),
                labels,
                ..SceneRecord::new(scene_id.clone(), "")
            });
            truth.push(TruthRow {
                scene_id,
                blob: b,
                session_id: String::new(),
                duplicate_of: None,
            });
            semantic.push(to_unit32(&sem));
            visual.push(to_unit32(&vis));
            sessions.push(session);
        }
    }

    let mut pairs = Vec::with_capacity(cfg.duplicate_pairs);
    let mut used = vec![false; cfg.total()];
    for _ in 0..cfg.duplicate_pairs {
        // both members of a pair come from the same blob so they share a cluster
        let open: Vec<usize> = (0..cfg.blobs)
            .filter(|&b| {
                (0..cfg.points_per_blob)
                    .filter(|&i| !used[b * cfg.points_per_blob + i])
                    .count()
                    >= 2
            })
            .collect();
        let b = open[rng.gen_range(0..open.len())];
        let free: Vec<usize> = (0..cfg.points_per_blob)
            .map(|i| b * cfg.points_per_blob + i)
            .filter(|&p| !used[p])
            .collect();
        let two = sample(&mut rng, free.len(), 2);
        let (x, y) = (free[two.index(0)], free[two.index(1)]);
        let (a, c) = (x.min(y), x.max(y));
        used[a] = true;
        used[c] = true;
        visual[c] = visual[a].clone();
        sessions[c] = sessions[a];
        truth[c].duplicate_of = Some(truth[a].scene_id.clone());
        pairs.push((truth[a].scene_id.clone(), truth[c].scene_id.clone()));
    }

    for (pos, &s) in sessions.iter().enumerate() {
        let id = format!("session-{s:03}");
        scenes[pos].session_id = id.clone();
        truth[pos].session_id = id;
    }

    let sem = EmbeddingMatrix::from_rows(&semantic, true)?;
    let vis = EmbeddingMatrix::from_rows(&visual, true)?;
    let dataset =
        Dataset::new(format!("{}-synthetic", cfg.id_prefix), scenes)?.bind(Some(sem), Some(vis))?;
    Ok(Synthetic {
        dataset,
        truth: GroundTruth {
            config: cfg.clone(),
            scenes: truth,
            duplicate_pairs: pairs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Space;
    use crate::vecstore::cosine;

    #[test]
    fn zero_noise_collapses_blobs() {
        let s = generate(&SynthConfig::new(3, 5, 8, 0.0, 1)).unwrap();
        for b in 0..3 {
            let first = s.dataset.vector(Space::Semantic, b * 5).unwrap().to_vec();
            for i in 1..5 {
                assert_eq!(
                    s.dataset.vector(Space::Semantic, b * 5 + i).unwrap(),
                    first.as_slice()
                );
            }
        }
    }

    #[test]
    fn duplicate_pairs_are_exact() {
        let cfg = SynthConfig {
            duplicate_pairs: 3,
            ..SynthConfig::new(4, 20, 8, 0.05, 2)
        };
        let s = generate(&cfg).unwrap();
        assert_eq!(s.truth.duplicate_pairs.len(), 3);
        for (a, b) in &s.truth.duplicate_pairs {
            let pa = s.dataset.position(a).unwrap();
            let pb = s.dataset.position(b).unwrap();
            assert!(pa < pb);
            let d = 1.0
                - cosine(
                    s.dataset.vector(Space::Visual, pa).unwrap(),
                    s.dataset.vector(Space::Visual, pb).unwrap(),
                )
                .unwrap();
            assert!(d.abs() < 1e-12);
            assert_eq!(
                s.dataset.scenes()[pa].session_id,
                s.dataset.scenes()[pb].session_id
            );
        }
        let flagged = s
            .truth
            .scenes
            .iter()
            .filter(|r| r.duplicate_of.is_some())
            .count();
        assert_eq!(flagged, 3);
    }

    #[test]
    fn centers_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = blob_centers(&mut rng, 8, 16).unwrap();
        for i in 0..8 {
            for j in i + 1..8 {
                let cos: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                assert!(cos < MAX_CENTER_COSINE);
            }
        }
    }

    #[test]
    fn sessions_span_blobs() {
        let s = generate(&SynthConfig::new(4, 40, 8, 0.05, 3)).unwrap();
        let mut blobs_per_session: BTreeMap<&str, std::collections::BTreeSet<usize>> =
            BTreeMap::new();
        for r in &s.truth.scenes {
            blobs_per_session
                .entry(&r.session_id)
                .or_default()
                .insert(r.blob);
        }
        assert_eq!(blobs_per_session.len(), 16);
        assert!(blobs_per_session.values().all(|b| b.len() == 4));
    }

    #[test]
    fn labels_follow_profile() {
        let cfg = SynthConfig {
            labels: Some(LabelProfile {
                classes: 5,
                max_count: 3,
            }),
            ..SynthConfig::new(2, 50, 4, 0.1, 4)
        };
        let s = generate(&cfg).unwrap();
        s.dataset.all_labeled().unwrap();
        let with_c0 = s
            .dataset
            .scenes()
            .iter()
            .filter(|r| r.labels.as_ref().unwrap().contains_key("class_00"))
            .count();
        assert_eq!(with_c0, 100);
        for r in s.dataset.scenes() {
            assert!(r
                .labels
                .as_ref()
                .unwrap()
                .values()
                .all(|&n| (1..=3).contains(&n)));
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&SynthConfig::new(2, 5, 1, 0.1, 0)).is_err());
        assert!(generate(&SynthConfig::new(0, 5, 4, 0.1, 0)).is_err());
        assert!(generate(&SynthConfig::new(2, 5, 4, -1.0, 0)).is_err());
        let too_many = SynthConfig {
            duplicate_pairs: 6,
            ..SynthConfig::new(2, 5, 4, 0.1, 0)
        };
        assert!(generate(&too_many).is_err());
        // 40 mutually separated directions do not fit in 2 dimensions
        assert!(generate(&SynthConfig::new(40, 1, 2, 0.0, 0)).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            duplicate_pairs: 2,
            ..SynthConfig::new(3, 10, 6, 0.05, 9)
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(
            a.dataset.semantic().unwrap().to_bytes(),
            b.dataset.semantic().unwrap().to_bytes()
        );
        assert_eq!(
            a.dataset.visual().unwrap().to_bytes(),
            b.dataset.visual().unwrap().to_bytes()
        );
        assert_eq!(a.truth, b.truth);
    }
}
