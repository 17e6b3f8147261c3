//! Analysis tables: retention against epsilon, unique sessions per cluster
//! under semantic and visual clustering, and a k sweep.
//!
//! ```bash
//! cargo run -p sse-curate --release --example curation_metrics
//! ```

use sse_curate::datamodel::Space;
use sse_curate::metrics::{
    k_sweep, mean_unique_sessions, retention_curve, to_csv, unique_sessions_per_cluster,
};
use sse_curate::selection::fit_clusters;
use sse_curate::synthgen::{generate, SynthConfig};
use sse_curate::SelectionParams;

fn main() -> sse_curate::Result<()> {
    let synth = generate(&SynthConfig {
        visual_session_weight: 0.7,
        ..SynthConfig::new(8, 120, 32, 0.1, 12)
    })?;
    let ds = &synth.dataset;
    let params = SelectionParams::new(16, 0.0, 3);

    let eps: Vec<f64> = (0..=8).map(|i| i as f64 / 10.0).collect();
    print!("{}", to_csv(&retention_curve(ds, &params, &eps)?)?);

    for space in [Space::Semantic, Space::Visual] {
        let p = SelectionParams {
            cluster_space: space,
            ..params
        };
        let model = fit_clusters(ds, &p)?;
        let rows = unique_sessions_per_cluster(&model, ds)?;
        println!(
            "{}: mean unique sessions per cluster {:.2}",
            space.name(),
            mean_unique_sessions(&rows)
        );
    }

    let sweep = k_sweep(
        ds,
        &[4, 8, 16, 64],
        &SelectionParams {
            epsilon: 0.35,
            ..params
        },
    )?;
    print!("{}", to_csv(&sweep)?);
    Ok(())
}
