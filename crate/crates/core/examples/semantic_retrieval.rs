//! Text-to-scene retrieval through the file-backed embedding provider.
//!
//! The file provider binds precomputed vectors by position, and looks up
//! query vectors in a JSON sidecar keyed by query text.
//!
//! ```bash
//! cargo run -p sse-curate --example semantic_retrieval
//! ```

use std::collections::BTreeMap;

use sse_curate::datamodel::Space;
use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::{embed_query, embed_texts, retrieve, Error, ProviderConfig};

fn main() -> sse_curate::Result<()> {
    let synth = generate(&SynthConfig::new(4, 25, 16, 0.1, 5))?;
    let ds = &synth.dataset;
    let dir = std::env::temp_dir().join("sse-retrieval-example");
    ds.save_dir(&dir)?;

    // Pretend a text model mapped this query near theme 2's first scene.
    let query = "construction zone with cones";
    let anchor = ds.vector(Space::Semantic, 50).unwrap().to_vec();
    let sidecar: BTreeMap<&str, Vec<f32>> = BTreeMap::from([(query, anchor)]);
    let sidecar_path = dir.join("queries.json");
    std::fs::write(&sidecar_path, serde_json::to_vec(&sidecar).unwrap())
        .map_err(|e| Error::Format(e.to_string()))?;

    let cfg = ProviderConfig::File {
        path: dir.join("semantic.ssev"),
        query_sidecar: Some(sidecar_path),
    };
    let captions: Vec<String> = ds.scenes().iter().map(|s| s.caption.clone()).collect();
    let m = embed_texts(&cfg, &captions)?;
    println!(
        "file provider returned {} rows of dim {}",
        m.count(),
        m.dim()
    );

    let q = embed_query(&cfg, query)?;
    for hit in retrieve(ds, &q, 5)? {
        println!("{:.4}  {}  {}", hit.similarity, hit.scene_id, hit.caption);
    }
    Ok(())
}
