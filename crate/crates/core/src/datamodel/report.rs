use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_json, write_json};
use crate::enrichment::AnchorPolicy;
use crate::error::{Error, Result};
use crate::selection::SelectionParams;

/// Parameters, seeds and input digests of the run that produced an output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Kept,
    Pruned {
        keeper_scene_id: String,
        visual_similarity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub scene_id: String,
    pub cluster_id: usize,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Kept without comparison because the scene has no visual embedding.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing_visual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub total: usize,
    pub kept: usize,
    pub pruned: usize,
}

/// Keep/prune verdict for every scene of a selection run, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub params: SelectionParams,
    pub counts: SelectionCounts,
    pub entries: Vec<SelectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SelectionReport {
    pub fn retention(&self) -> f64 {
        if self.counts.total == 0 {
            1.0
        } else {
            self.counts.kept as f64 / self.counts.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Addition {
    pub step: usize,
    pub scene_id: String,
    pub nearest_anchor_id: String,
    pub semantic_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentParams {
    pub budget: usize,
    pub anchor_policy: AnchorPolicy,
}

/// Pool scenes added during enrichment, in the order they were picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentReport {
    pub params: EnrichmentParams,
    pub additions: Vec<Addition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub trait Report: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()>;
}

impl Report for SelectionReport {
    fn validate(&self) -> Result<()> {
        let c = self.counts;
        let bad = |m: String| Err(Error::InvalidReport(m));
        if c.kept + c.pruned != c.total {
            return bad(format!(
                "kept {} + pruned {} != total {}",
                c.kept, c.pruned, c.total
            ));
        }
        if self.entries.len() != c.total {
            return bad(format!(
                "{} entries for total {}",
                self.entries.len(),
                c.total
            ));
        }
        let eps = self.params.epsilon;
        if !(0.0..=2.0).contains(&eps) {
            return bad(format!("epsilon {eps} outside [0, 2]"));
        }
        let mut kept: HashMap<&str, usize> = HashMap::new();
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.scene_id.as_str()) {
                return bad(format!("scene {:?} listed twice", e.scene_id));
            }
            if e.cluster_id >= self.params.k {
                return bad(format!(
                    "scene {:?} in cluster {} >= k",
                    e.scene_id, e.cluster_id
                ));
            }
            if e.verdict == Verdict::Kept {
                kept.insert(&e.scene_id, e.cluster_id);
            }
        }
        if kept.len() != c.kept {
            return bad(format!(
                "{} KEPT entries but counts say {}",
                kept.len(),
                c.kept
            ));
        }
        for e in &self.entries {
            if let Verdict::Pruned {
                keeper_scene_id,
                visual_similarity,
            } = &e.verdict
            {
                match kept.get(keeper_scene_id.as_str()) {
                    Some(&cl) if cl == e.cluster_id => {}
                    Some(_) => {
                        return bad(format!(
                            "{:?} pruned by {keeper_scene_id:?} from another cluster",
                            e.scene_id
                        ))
                    }
                    None => {
                        return bad(format!(
                            "{:?} pruned by {keeper_scene_id:?}, which is not KEPT",
                            e.scene_id
                        ))
                    }
                }
                if !(-1.0..=1.0).contains(visual_similarity) || 1.0 - visual_similarity >= eps {
                    return bad(format!(
                        "{:?} pruned at similarity {visual_similarity}, not above 1 - epsilon",
                        e.scene_id
                    ));
                }
            }
        }
        Ok(())
    }
}

impl Report for EnrichmentReport {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidReport(m));
        if self.additions.len() != self.params.budget {
            return bad(format!(
                "{} additions for budget {}",
                self.additions.len(),
                self.params.budget
            ));
        }
        let mut seen = HashSet::new();
        for (i, a) in self.additions.iter().enumerate() {
            if a.step != i {
                return bad(format!("addition {i} has step {}", a.step));
            }
            if !seen.insert(a.scene_id.as_str()) {
                return bad(format!("scene {:?} added twice", a.scene_id));
            }
            if !(0.0..=2.0).contains(&a.semantic_distance) {
                return bad(format!("distance {} outside [0, 2]", a.semantic_distance));
            }
        }
        Ok(())
    }
}

/// Validates and writes a report as pretty JSON.
pub fn save_report<R: Report>(report: &R, path: impl AsRef<Path>) -> Result<()> {
    report.validate()?;
    write_json(path, report)
}

pub fn load_report<R: Report>(path: impl AsRef<Path>) -> Result<R> {
    let r: R = read_json(path)?;
    r.validate()?;
    Ok(r)
}
