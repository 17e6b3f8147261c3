//! Exact semantic retrieval by full scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Space};
use crate::error::{Error, Result};
use crate::vecstore::{cosine_unchecked, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub scene_id: String,
    pub similarity: f64,
    pub caption: String,
}

/// Top `top_n` scenes by cosine similarity to `query`, best first. Ties go
/// to canonical order. Scenes without a semantic row are skipped.
pub fn retrieve(dataset: &Dataset, query: &[f32], top_n: usize) -> Result<Vec<Hit>> {
    if top_n == 0 {
        return Err(Error::InvalidParam("top_n must be >= 1".into()));
    }
    let m = dataset.require(Space::Semantic)?;
    if query.len() != m.dim() {
        return Err(Error::DimMismatch {
            expected: m.dim(),
            actual: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(Error::InvalidParam("query vector is zero".into()));
    }
    let mut scored: Vec<(usize, f64)> = (0..dataset.len())
        .into_par_iter()
        .filter_map(|p| {
            dataset
                .vector(Space::Semantic, p)
                .map(|v| (p, cosine_unchecked(v, query, norm(v), qn)))
        })
        .collect();
    let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let keep = top_n.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep, by_rank);
        scored.truncate(keep);
    }
    scored.sort_by(by_rank);
    Ok(scored
        .into_iter()
        .map(|(p, similarity)| {
            let s = &dataset.scenes()[p];
            Hit {
                scene_id: s.scene_id.clone(),
                similarity,
                caption: s.caption.clone(),
            }
        })
        .collect())
}
