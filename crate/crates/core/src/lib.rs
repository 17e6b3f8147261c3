//! Semantic selection and enrichment of driving-scene datasets.
//!
//! Works entirely over precomputed embeddings: a semantic embedding of each
//! scene's caption and a visual embedding of its image. The pipeline:
//!
//! 1. [`clustering`]: seeded k-means over semantic embeddings.
//! 2. [`selection`]: inside each cluster, greedily drop scenes that are visual
//!    near-duplicates of an earlier kept scene (cosine distance below
//!    `epsilon`).
//! 3. [`enrichment`]: add scenes from an unlabeled pool that are farthest from
//!    the nearest semantic anchor (the member closest to each centroid).
//! 4. [`retrieval`]: exact top-n search of scenes for a text query.
//!
//! Every keep/prune/add decision is recorded in a report that names the
//! scene responsible for it and the similarity involved.
//!
//! ## Examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! - **`embeddings_io`** - write and read SSEV files, normalize, cosine kernels
//! - **`cluster_scenes`** - k-means on a planted synthetic dataset
//! - **`semantic_selection`** - selection with the explainability report
//! - **`baselines`** - random, repeat-factor and visual-clustering baselines
//! - **`enrichment`** - static and dynamic anchor enrichment from a pool
//! - **`semantic_retrieval`** - retrieval through a file-backed provider
//! - **`http_provider`** - the `/embed` HTTP provider against a loopback stub
//! - **`curation_metrics`** - retention curve, sessions per cluster, k sweep
//! - **`full_pipeline`** - synth, select, enrich and report end to end
//!
//! ```bash
//! cargo run -p sse-curate --release --example semantic_selection
//! ```
//!
//! The `sse` binary exposes the same pipeline on the command line.

pub mod cli;
pub mod clustering;
pub mod datamodel;
pub mod enrichment;
pub mod error;
pub mod metrics;
pub mod providers;
pub mod retrieval;
pub mod selection;
pub mod synthgen;
pub mod vecstore;

pub use clustering::{assign, kmeans_fit, ClusterModel, KMeansConfig};
pub use datamodel::{
    load_manifest, load_report, save_manifest, save_report, Dataset, EnrichmentReport, SceneRecord,
    SelectionReport, Space,
};
pub use enrichment::{anchors_from_clusters, enrich, AnchorPolicy, AnchorSet};
pub use error::{Error, Result};
pub use providers::{embed_query, embed_texts, ProviderConfig};
pub use retrieval::{retrieve, Hit};
pub use selection::{greedy_prune_cluster, random_select, rfs_select, select, SelectionParams};
pub use synthgen::{generate, SynthConfig};
pub use vecstore::{
    cosine, pairwise_distances, read_embeddings, write_embeddings, EmbeddingMatrix,
};
