//! Scene records, datasets, JSON Lines manifests and dataset directories.
//!
//! A [`Dataset`] is an ordered list of [`SceneRecord`]s plus optional semantic
//! and visual [`EmbeddingMatrix`] handles. The list order is the canonical
//! order used to break every tie in the crate. Bound matrices are always held
//! normalized, and each bound row is referenced by exactly one scene.

mod report;

pub use report::{
    load_report, save_report, Addition, EnrichmentParams, EnrichmentReport, InputDigest,
    Provenance, Report, SelectionCounts, SelectionEntry, SelectionReport, Verdict,
};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecstore::{read_embeddings, write_embeddings, EmbeddingMatrix};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SEMANTIC_FILE: &str = "semantic.ssev";
pub const VISUAL_FILE: &str = "visual.ssev";
pub const DATASET_FILE: &str = "dataset.json";

/// One curation unit: a driving scene with its caption and embedding rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub scene_id: String,
    pub session_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_row: Option<usize>,
    /// Class name to object count. Absent means unlabeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<String, u64>>,
    /// Where the scene came from when it was merged in, e.g. `"pool"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl SceneRecord {
    pub fn new(scene_id: impl Into<String>, session_id: impl Into<String>) -> Self {
        Self {
            scene_id: scene_id.into(),
            session_id: session_id.into(),
            caption: String::new(),
            semantic_row: None,
            visual_row: None,
            labels: None,
            source: None,
        }
    }

    fn check(&self, line: usize) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(Error::InvalidRecord {
                line,
                message: "empty scene_id".into(),
            });
        }
        if self.session_id.is_empty() {
            return Err(Error::InvalidRecord {
                line,
                message: format!("scene {:?} has an empty session_id", self.scene_id),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Semantic,
    Visual,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Semantic => "semantic",
            Space::Visual => "visual",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    scenes: Vec<SceneRecord>,
    positions: HashMap<String, usize>,
    semantic: Option<Arc<EmbeddingMatrix>>,
    visual: Option<Arc<EmbeddingMatrix>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.scenes == other.scenes
            && self.semantic == other.semantic
            && self.visual == other.visual
    }
}

impl Dataset {
    /// Builds an unbound dataset, rejecting invalid records and duplicate ids.
    /// Reported line numbers are 1-based positions in `scenes`.
    pub fn new(name: impl Into<String>, scenes: Vec<SceneRecord>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(scenes.len());
        for (i, s) in scenes.iter().enumerate() {
            s.check(i + 1)?;
            if let Some(first) = positions.insert(s.scene_id.clone(), i) {
                return Err(Error::DuplicateSceneId {
                    id: s.scene_id.clone(),
                    line: i + 1,
                    first_line: first + 1,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            scenes,
            positions,
            semantic: None,
            visual: None,
        })
    }

    /// Attaches embedding matrices. Every row reference must be in range and
    /// each matrix row must be referenced by exactly one scene. Matrices are
    /// normalized if they are not already.
    pub fn bind(
        mut self,
        semantic: Option<EmbeddingMatrix>,
        visual: Option<EmbeddingMatrix>,
    ) -> Result<Self> {
        if let Some(m) = semantic {
            self.check_binding(Space::Semantic, &m)?;
            self.semantic = Some(Arc::new(ensure_normalized(m)));
        }
        if let Some(m) = visual {
            self.check_binding(Space::Visual, &m)?;
            self.visual = Some(Arc::new(ensure_normalized(m)));
        }
        Ok(self)
    }

    fn check_binding(&self, space: Space, m: &EmbeddingMatrix) -> Result<()> {
        let count = m.count();
        let mut seen = vec![None::<usize>; count];
        let mut refs = 0usize;
        for (i, s) in self.scenes.iter().enumerate() {
            let Some(row) = row_of(s, space) else {
                continue;
            };
            if row >= count {
                return Err(Error::DanglingRow {
                    space: space.name(),
                    scene_id: s.scene_id.clone(),
                    row,
                    count,
                });
            }
            if let Some(prev) = seen[row] {
                return Err(Error::Binding {
                    space: space.name(),
                    message: format!(
                        "row {row} referenced by both {:?} and {:?}",
                        self.scenes[prev].scene_id, s.scene_id
                    ),
                });
            }
            seen[row] = Some(i);
            refs += 1;
        }
        if refs != count {
            return Err(Error::Binding {
                space: space.name(),
                message: format!("matrix has {count} rows but {refs} scenes reference it"),
            });
        }
        Ok(())
    }

    pub fn scenes(&self) -> &[SceneRecord] {
        &self.scenes
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn position(&self, scene_id: &str) -> Option<usize> {
        self.positions.get(scene_id).copied()
    }

    pub fn scene(&self, scene_id: &str) -> Option<&SceneRecord> {
        self.position(scene_id).map(|i| &self.scenes[i])
    }

    pub fn matrix(&self, space: Space) -> Option<&EmbeddingMatrix> {
        match space {
            Space::Semantic => self.semantic.as_deref(),
            Space::Visual => self.visual.as_deref(),
        }
    }

    pub fn semantic(&self) -> Option<&EmbeddingMatrix> {
        self.matrix(Space::Semantic)
    }

    pub fn visual(&self) -> Option<&EmbeddingMatrix> {
        self.matrix(Space::Visual)
    }

    pub fn require(&self, space: Space) -> Result<&EmbeddingMatrix> {
        self.matrix(space)
            .ok_or_else(|| Error::MissingMatrix(self.name.clone(), space.name()))
    }

    /// The bound vector of the scene at `pos` in `space`, if any.
    pub fn vector(&self, space: Space, pos: usize) -> Option<&[f32]> {
        let m = self.matrix(space)?;
        row_of(&self.scenes[pos], space).map(|r| m.row(r))
    }

    /// Gathers the vectors of every scene in canonical order. Fails if any
    /// scene lacks a row in `space`.
    pub fn ordered_matrix(&self, space: Space) -> Result<EmbeddingMatrix> {
        let m = self.require(space)?;
        let rows = self
            .scenes
            .iter()
            .map(|s| {
                row_of(s, space).ok_or_else(|| Error::Binding {
                    space: space.name(),
                    message: format!("scene {:?} has no {} row", s.scene_id, space.name()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        m.gather(&rows)
    }

    /// Scenes at `positions`, in the given order, with embeddings compacted.
    pub fn subset(&self, name: impl Into<String>, positions: &[usize]) -> Result<Dataset> {
        let mut b = DatasetBuilder::new(name);
        for &p in positions {
            b.push_from(self, p, None)?;
        }
        b.build()
    }

    pub fn all_labeled(&self) -> Result<()> {
        match self.scenes.iter().find(|s| s.labels.is_none()) {
            Some(s) => Err(Error::Unlabeled(s.scene_id.clone())),
            None => Ok(()),
        }
    }

    /// Writes `manifest.jsonl`, any bound matrices, and `dataset.json`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_manifest(self, dir.join(MANIFEST_FILE))?;
        if let Some(m) = &self.semantic {
            write_embeddings(m, dir.join(SEMANTIC_FILE))?;
        }
        if let Some(m) = &self.visual {
            write_embeddings(m, dir.join(VISUAL_FILE))?;
        }
        let meta = DatasetMeta {
            name: self.name.clone(),
            scenes: self.len(),
            semantic: self.semantic.as_ref().map(|_| SEMANTIC_FILE.to_string()),
            visual: self.visual.as_ref().map(|_| VISUAL_FILE.to_string()),
        };
        write_json(dir.join(DATASET_FILE), &meta)
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
        let dir = dir.as_ref();
        let meta: DatasetMeta = read_json(dir.join(DATASET_FILE))?;
        let mut ds = load_manifest(dir.join(MANIFEST_FILE))?;
        ds.name = meta.name;
        let semantic = meta
            .semantic
            .map(|f| read_embeddings(dir.join(f)))
            .transpose()?;
        let visual = meta
            .visual
            .map(|f| read_embeddings(dir.join(f)))
            .transpose()?;
        ds.bind(semantic, visual)
    }
}

fn ensure_normalized(m: EmbeddingMatrix) -> EmbeddingMatrix {
    if m.is_normalized() {
        m
    } else {
        m.normalize()
    }
}

fn row_of(s: &SceneRecord, space: Space) -> Option<usize> {
    match space {
        Space::Semantic => s.semantic_row,
        Space::Visual => s.visual_row,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    name: String,
    scenes: usize,
    semantic: Option<String>,
    visual: Option<String>,
}

/// Assembles a bound dataset from scenes of other datasets, renumbering
/// embedding rows so the result stays compact.
#[derive(Debug)]
pub struct DatasetBuilder {
    name: String,
    scenes: Vec<SceneRecord>,
    semantic: Option<EmbeddingMatrix>,
    visual: Option<EmbeddingMatrix>,
}

impl DatasetBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scenes: Vec::new(),
            semantic: None,
            visual: None,
        }
    }

    /// Copies scene `pos` of `from`, tagging it with `source` when given.
    pub fn push_from(&mut self, from: &Dataset, pos: usize, source: Option<&str>) -> Result<()> {
        let mut rec = from
            .scenes
            .get(pos)
            .ok_or(Error::IndexOutOfRange {
                index: pos,
                len: from.len(),
            })?
            .clone();
        if let Some(src) = source {
            rec.source = Some(src.to_string());
        }
        rec.semantic_row = push_vec(&mut self.semantic, from.vector(Space::Semantic, pos))?;
        rec.visual_row = push_vec(&mut self.visual, from.vector(Space::Visual, pos))?;
        self.scenes.push(rec);
        Ok(())
    }

    pub fn build(self) -> Result<Dataset> {
        Dataset::new(self.name, self.scenes)?.bind(self.semantic, self.visual)
    }
}

fn push_vec(m: &mut Option<EmbeddingMatrix>, v: Option<&[f32]>) -> Result<Option<usize>> {
    let Some(v) = v else { return Ok(None) };
    let m = m.get_or_insert_with(|| EmbeddingMatrix::empty(v.len()));
    let row = m.count();
    m.push_row(v)?;
    Ok(Some(row))
}

/// Reads a JSON Lines manifest. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scenes = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SceneRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.check(line_no)?;
        if let Some(&first) = first_line.get(&rec.scene_id) {
            return Err(Error::DuplicateSceneId {
                id: rec.scene_id,
                line: line_no,
                first_line: first,
            });
        }
        first_line.insert(rec.scene_id.clone(), line_no);
        scenes.push(rec);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, scenes)
}

pub fn save_manifest(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for s in &ds.scenes {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::json(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}
