//! Enriching a selected dataset from an unlabeled pool, under both anchor
//! policies.
//!
//! ```bash
//! cargo run -p sse-curate --release --example enrichment
//! ```

use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::{anchors_from_clusters, enrich, select, AnchorPolicy, SelectionParams};

fn main() -> sse_curate::Result<()> {
    let base = generate(&SynthConfig {
        visual_session_weight: 0.6,
        ..SynthConfig::new(5, 80, 16, 0.15, 1)
    })?;
    // The pool has different themes than the base data.
    let pool = generate(&SynthConfig {
        id_prefix: "pool".into(),
        ..SynthConfig::new(10, 20, 16, 0.15, 99)
    })?;

    let sel = select(&base.dataset, &SelectionParams::new(5, 0.3, 0))?;
    let anchors = anchors_from_clusters(&sel.model, &base.dataset)?;
    println!("{} anchors from {} clusters", anchors.len(), sel.model.k);

    for policy in [AnchorPolicy::Static, AnchorPolicy::Dynamic] {
        let run = enrich(
            &sel.dataset,
            &pool.dataset,
            &anchors.clone().with_policy(policy),
            8,
        )?;
        println!(
            "{policy:?}: {} -> {} scenes",
            sel.dataset.len(),
            run.dataset.len()
        );
        for a in &run.report.additions {
            println!(
                "  step {}: {} (nearest anchor {}, distance {:.3})",
                a.step, a.scene_id, a.nearest_anchor_id, a.semantic_distance
            );
        }
    }
    Ok(())
}
