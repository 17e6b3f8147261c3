//! Seeded k-means on a planted synthetic dataset.
//!
//! ```bash
//! cargo run -p sse-curate --release --example cluster_scenes
//! ```

use sse_curate::datamodel::Space;
use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::{kmeans_fit, KMeansConfig};

fn main() -> sse_curate::Result<()> {
    let synth = generate(&SynthConfig::new(8, 250, 32, 0.05, 2024))?;
    let m = synth.dataset.ordered_matrix(Space::Semantic)?;
    let model = kmeans_fit(&m, &KMeansConfig::new(8, 11))?;

    println!(
        "{} scenes, k = {}: objective {:.4} after {} iterations ({:?})",
        m.count(),
        model.k,
        model.objective,
        model.iterations_run,
        model.stop
    );
    println!(
        "objective trace: {:?}",
        model
            .objective_trace
            .iter()
            .map(|o| format!("{o:.3}"))
            .collect::<Vec<_>>()
    );

    // Each cluster should be one planted blob.
    let blobs = synth.truth.blob_labels();
    for (c, members) in model.members().iter().enumerate() {
        let mut counts = [0usize; 8];
        for &p in members {
            counts[blobs[p]] += 1;
        }
        let (blob, hits) = counts.iter().enumerate().max_by_key(|(_, n)| **n).unwrap();
        println!(
            "cluster {c}: {} scenes, {hits} from blob {blob}",
            members.len()
        );
    }
    Ok(())
}
