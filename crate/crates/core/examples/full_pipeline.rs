//! End to end through the `sse` command line: synth, select, enrich, report.
//!
//! ```bash
//! cargo run -p sse-curate --release --example full_pipeline
//! ```

use sse_curate::cli::run_from;

fn sse(args: &[&str]) {
    println!("$ sse {}", args.join(" "));
    let argv = std::iter::once("sse")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let code = run_from(argv);
    assert_eq!(code, 0, "sse {} failed", args.join(" "));
}

fn main() {
    let dir = std::env::temp_dir().join("sse-full-pipeline");
    let _ = std::fs::remove_dir_all(&dir);
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (data, pool, sel, enr) = (p("data"), p("pool"), p("selected"), p("enriched"));

    sse(&[
        "synth",
        "--out",
        &data,
        "--blobs",
        "8",
        "--per-blob",
        "200",
        "--label-classes",
        "6",
        "--visual-session-weight",
        "0.6",
        "--duplicate-pairs",
        "20",
        "--seed",
        "1",
    ]);
    sse(&[
        "synth",
        "--out",
        &pool,
        "--blobs",
        "12",
        "--per-blob",
        "40",
        "--label-classes",
        "6",
        "--id-prefix",
        "pool",
        "--seed",
        "2",
    ]);
    sse(&[
        "select",
        "--dataset",
        &data,
        "--k",
        "64",
        "--epsilon",
        "0.3",
        "--seed",
        "7",
        "--out",
        &sel,
        "--prompt",
        "Describe the weather, road layout and unusual objects.",
    ]);
    sse(&[
        "enrich",
        "--selected",
        &sel,
        "--pool",
        &pool,
        "--target-fraction",
        "1.0",
        "--out",
        &enr,
    ]);
    sse(&["report", "objects", "--dataset", &enr, "--format", "csv"]);
    sse(&[
        "report",
        "retention",
        "--dataset",
        &data,
        "--k",
        "64",
        "--seed",
        "7",
        "--format",
        "csv",
    ]);
    println!("outputs in {}", dir.display());
}
