//! The comparison baselines: random sampling, repeat-factor sampling and
//! visual clustering, next to semantic selection at the same size.
//!
//! ```bash
//! cargo run -p sse-curate --release --example baselines
//! ```

use sse_curate::datamodel::Space;
use sse_curate::metrics::object_counts;
use sse_curate::synthgen::{generate, LabelProfile, SynthConfig};
use sse_curate::{random_select, rfs_select, select, Dataset, SelectionParams};

fn describe(name: &str, d: &Dataset) -> sse_curate::Result<()> {
    let counts = object_counts(d)?;
    let rare = counts.get("class_05").copied().unwrap_or(0);
    println!(
        "{name:>10}: {:4} scenes, {:5} instances of the rarest class",
        d.len(),
        rare
    );
    Ok(())
}

fn main() -> sse_curate::Result<()> {
    let cfg = SynthConfig {
        labels: Some(LabelProfile {
            classes: 6,
            max_count: 4,
        }),
        visual_session_weight: 0.6,
        ..SynthConfig::new(8, 150, 24, 0.1, 3)
    };
    let ds = generate(&cfg)?.dataset;
    describe("full", &ds)?;

    let semantic = select(&ds, &SelectionParams::new(24, 0.3, 1))?;
    let fraction = semantic.report.retention();
    describe("semantic", &semantic.dataset)?;

    let visual = select(
        &ds,
        &SelectionParams {
            cluster_space: Space::Visual,
            ..SelectionParams::new(24, 0.3, 1)
        },
    )?;
    describe("visual", &visual.dataset)?;

    describe("random", &random_select(&ds, fraction, 1)?)?;

    let rfs = rfs_select(&ds, fraction, 0.3, 1)?;
    describe("rfs", &rfs.dataset)?;
    println!(
        "top repeat factor: {} ({:.2})",
        rfs.ranking[0].scene_id, rfs.ranking[0].score
    );
    Ok(())
}
