//! Semantic selection with the per-scene explainability report.
//!
//! ```bash
//! cargo run -p sse-curate --release --example semantic_selection
//! ```

use sse_curate::datamodel::Verdict;
use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::{select, SelectionParams};

fn main() -> sse_curate::Result<()> {
    let cfg = SynthConfig {
        duplicate_pairs: 10,
        visual_session_weight: 0.6,
        ..SynthConfig::new(6, 100, 24, 0.1, 7)
    };
    let synth = generate(&cfg)?;
    let params = SelectionParams::new(12, 0.3, 42);
    let sel = select(&synth.dataset, &params)?;

    let c = &sel.report.counts;
    println!(
        "kept {} of {} scenes ({:.1}%), pruned {}",
        c.kept,
        c.total,
        100.0 * sel.report.retention(),
        c.pruned
    );

    // Every prune names the kept scene responsible and how similar it was.
    println!("first prunes:");
    for e in sel
        .report
        .entries
        .iter()
        .filter(|e| e.verdict != Verdict::Kept)
        .take(5)
    {
        if let Verdict::Pruned {
            keeper_scene_id,
            visual_similarity,
        } = &e.verdict
        {
            println!(
                "  {} (cluster {}) duplicates {keeper_scene_id} at similarity {visual_similarity:.4}",
                e.scene_id, e.cluster_id
            );
        }
    }

    // A planted exact duplicate is always removed when it lands in the same
    // cluster as its original.
    let cluster_of = |id: &str| {
        sel.report
            .entries
            .iter()
            .find(|e| e.scene_id == id)
            .map(|e| e.cluster_id)
    };
    let together: Vec<_> = synth
        .truth
        .duplicate_pairs
        .iter()
        .filter(|(a, b)| cluster_of(a) == cluster_of(b))
        .collect();
    let removed = together
        .iter()
        .filter(|(_, copy)| sel.dataset.position(copy).is_none())
        .count();
    println!(
        "planted duplicates sharing a cluster: {} of {}, copies removed: {removed}",
        together.len(),
        synth.truth.duplicate_pairs.len()
    );
    Ok(())
}
