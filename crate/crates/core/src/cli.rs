//! The `sse` command line.
//!
//! Every flag of a subcommand may also come from a JSON config file passed
//! with `--config`; keys are flag names (`max_iters` or `max-iters`), and
//! flags given on the command line win. Failures print one JSON line
//! `{"error": <code>, "message": <text>}` to stderr and exit nonzero.

use std::fs::{self, File};
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clustering::{DEFAULT_K, DEFAULT_MAX_ITERS, DEFAULT_N_INIT, DEFAULT_TOL};
use crate::datamodel::{
    load_manifest, read_json, save_report, write_json, Dataset, EnrichmentReport, InputDigest,
    Provenance, SelectionReport, Space, Verdict, MANIFEST_FILE, SEMANTIC_FILE, VISUAL_FILE,
};
use crate::enrichment::{anchors_from_clusters, enrich, AnchorPolicy, AnchorSet, ANCHORS_FILE};
use crate::error::{Error, Result};
use crate::metrics::{
    k_sweep, mean_unique_sessions, object_counts, retention_curve_with_model, to_csv,
    unique_sessions_per_cluster,
};
use crate::providers::{embed_query, ProviderConfig};
use crate::retrieval::retrieve;
use crate::selection::{
    fit_clusters, random_select, rfs_select, select, target_count, SelectionParams,
};
use crate::synthgen::{generate, LabelProfile, SynthConfig};
use crate::vecstore::read_embeddings;

pub const SELECTION_REPORT_FILE: &str = "selection_report.json";
pub const ENRICHMENT_REPORT_FILE: &str = "enrichment_report.json";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const SAMPLE_REPORT_FILE: &str = "sample_report.json";

const TOOL: &str = "sse";

#[derive(Debug, Parser)]
#[command(
    name = "sse",
    version,
    about = "Semantic selection and enrichment of scene datasets"
)]
pub struct Cli {
    /// Worker threads; never changes any output byte.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON file supplying default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bind a manifest to its embedding files and write a dataset directory.
    Ingest(IngestArgs),
    /// Cluster semantically and prune visual near-duplicates.
    Select(SelectArgs),
    /// Add pool scenes farthest from the semantic anchors.
    Enrich(EnrichArgs),
    /// Random or repeat-factor baseline subsets.
    Sample(SampleArgs),
    /// Top-n scenes for a text query.
    Retrieve(RetrieveArgs),
    /// Analysis tables.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterOn {
    Semantic,
    Visual,
}

impl From<ClusterOn> for Space {
    fn from(c: ClusterOn) -> Space {
        match c {
            ClusterOn::Semantic => Space::Semantic,
            ClusterOn::Visual => Space::Visual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Static,
    Dynamic,
}

impl From<PolicyArg> for AnchorPolicy {
    fn from(p: PolicyArg) -> AnchorPolicy {
        match p {
            PolicyArg::Static => AnchorPolicy::Static,
            PolicyArg::Dynamic => AnchorPolicy::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMethod {
    Random,
    Rfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    #[arg(long)]
    pub visual: Option<PathBuf>,
    /// Dataset name; defaults to the output directory name.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Clustering flags shared by `select` and the reports.
#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_N_INIT)]
    pub n_init: usize,
    #[arg(long, value_enum, default_value_t = ClusterOn::Semantic)]
    pub cluster_on: ClusterOn,
}

impl ClusterArgs {
    fn params(&self, epsilon: f64) -> SelectionParams {
        SelectionParams {
            k: self.k,
            epsilon,
            seed: self.seed,
            max_iters: self.max_iters,
            tol: self.tol,
            n_init: self.n_init,
            cluster_space: self.cluster_on.into(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Print one line per keep/prune decision.
    #[arg(long)]
    pub explain: bool,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnrichArgs {
    /// Output directory of `select`.
    #[arg(long)]
    pub selected: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// Number of pool scenes to add.
    #[arg(
        long,
        conflicts_with = "target_fraction",
        required_unless_present = "target_fraction"
    )]
    pub budget: Option<usize>,
    /// Final size as a fraction of the dataset `select` started from.
    #[arg(long)]
    pub target_fraction: Option<f64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Dynamic)]
    pub anchor_policy: PolicyArg,
    #[arg(long)]
    pub explain: bool,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub method: SampleMethod,
    /// Fraction of scenes to keep, in `[0, 1]`.
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repeat-factor threshold `t`.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub query: String,
    /// Provider config JSON.
    #[arg(long)]
    pub provider: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Fraction of scenes kept as epsilon grows, against one clustering.
    Retention {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6"
        )]
        epsilons: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Unique sessions per cluster.
    Sessions {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Object instances per class. Requires labels.
    Objects {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Retention and k-means objective per k.
    Ksweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_N_INIT)]
        n_init: usize,
        #[arg(long, value_enum, default_value_t = ClusterOn::Semantic)]
        cluster_on: ClusterOn,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub blobs: usize,
    #[arg(long, default_value_t = 250)]
    pub per_blob: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 4)]
    pub sessions_per_blob: usize,
    #[arg(long, default_value_t = 0)]
    pub duplicate_pairs: usize,
    /// Number of object classes; omit for unlabeled scenes.
    #[arg(long)]
    pub label_classes: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub label_max_count: u64,
    #[arg(long, default_value_t = 0.9)]
    pub visual_session_weight: f64,
    #[arg(long, default_value = "scene")]
    pub id_prefix: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    run_from(std::env::args().collect())
}

/// Like [`main`] with explicit arguments (`args[0]` is the program name).
pub fn run_from(args: Vec<String>) -> i32 {
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            // Keep clap's message up to the usage block, on one line.
            let msg = e.to_string();
            let summary: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            print_error("usage", summary.join(" ").trim_start_matches("error: "));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    print_error(e.code(), &e.to_string());
    1
}

fn print_error(code: &str, message: &str) {
    eprintln!("{}", json!({ "error": code, "message": message }));
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest_cmd(a),
        Command::Select(a) => select_cmd(a),
        Command::Enrich(a) => enrich_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Retrieve(a) => retrieve_cmd(a),
        Command::Report(r) => report_cmd(r),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let mut ds = load_manifest(&a.manifest)?;
    let semantic = a.semantic.as_ref().map(read_embeddings).transpose()?;
    let visual = a.visual.as_ref().map(read_embeddings).transpose()?;
    ds = ds.bind(semantic, visual)?;
    ds.name = a.name.clone().unwrap_or_else(|| dir_name(&a.out));
    ds.save_dir(&a.out)?;

    let mut inputs = vec![digest("manifest", &a.manifest)?];
    if let Some(p) = &a.semantic {
        inputs.push(digest("semantic", p)?);
    }
    if let Some(p) = &a.visual {
        inputs.push(digest("visual", p)?);
    }
    let prov = provenance("ingest", json!({ "name": ds.name }), inputs, a.prompt);
    write_json(
        a.out.join(INGEST_REPORT_FILE),
        &json!({ "scenes": ds.len(), "provenance": prov }),
    )?;
    println!("ingested {} scenes into {}", ds.len(), a.out.display());
    Ok(())
}

fn select_cmd(a: SelectArgs) -> Result<()> {
    let ds = Dataset::load_dir(&a.dataset)?;
    let params = a.cluster.params(a.epsilon);
    let sel = select(&ds, &params)?;
    let anchors = anchors_from_clusters(&sel.model, &ds)?;

    let mut report = sel.report;
    report.provenance = Some(provenance(
        "select",
        to_value(&params),
        dataset_digests("dataset", &a.dataset)?,
        a.prompt,
    ));
    sel.dataset.save_dir(&a.out)?;
    sel.model.save(&a.out)?;
    anchors.save(a.out.join(ANCHORS_FILE))?;
    save_report(&report, a.out.join(SELECTION_REPORT_FILE))?;

    let mut out = io::stdout().lock();
    if a.explain {
        for e in &report.entries {
            let _ = match &e.verdict {
                Verdict::Kept => writeln!(out, "KEPT {} cluster={}", e.scene_id, e.cluster_id),
                Verdict::Pruned {
                    keeper_scene_id,
                    visual_similarity,
                } => writeln!(
                    out,
                    "PRUNED {} cluster={} keeper={} similarity={:.6}",
                    e.scene_id, e.cluster_id, keeper_scene_id, visual_similarity
                ),
            };
        }
    }
    let _ = writeln!(
        out,
        "kept {} of {} scenes ({:.2}% retained) across {} clusters",
        report.counts.kept,
        report.counts.total,
        100.0 * report.retention(),
        sel.model.k
    );
    Ok(())
}

fn enrich_cmd(a: EnrichArgs) -> Result<()> {
    let selected = Dataset::load_dir(&a.selected)?;
    let pool = Dataset::load_dir(&a.pool)?;
    let policy: AnchorPolicy = a.anchor_policy.into();
    let anchors_path = a.selected.join(ANCHORS_FILE);
    let anchors = AnchorSet::load(&anchors_path)?.with_policy(policy);

    let budget = match (a.budget, a.target_fraction) {
        (Some(b), _) => b,
        (None, Some(f)) => {
            let sel: SelectionReport = read_json(a.selected.join(SELECTION_REPORT_FILE))?;
            let target = target_count(f, sel.counts.total);
            target.checked_sub(selected.len()).ok_or_else(|| {
                Error::InvalidParam(format!(
                    "target of {target} scenes is below the {} already selected",
                    selected.len()
                ))
            })?
        }
        (None, None) => unreachable!("clap requires --budget or --target-fraction"),
    };

    let run = enrich(&selected, &pool, &anchors, budget)?;
    let mut report: EnrichmentReport = run.report;
    let mut inputs = dataset_digests("selected", &a.selected)?;
    inputs.push(digest("selected/anchors.json", &anchors_path)?);
    inputs.extend(dataset_digests("pool", &a.pool)?);
    report.provenance = Some(provenance(
        "enrich",
        json!({
            "budget": budget,
            "target_fraction": a.target_fraction,
            "anchor_policy": policy,
        }),
        inputs,
        a.prompt,
    ));
    run.dataset.save_dir(&a.out)?;
    run.anchors.save(a.out.join(ANCHORS_FILE))?;
    save_report(&report, a.out.join(ENRICHMENT_REPORT_FILE))?;

    let mut out = io::stdout().lock();
    if a.explain {
        for add in &report.additions {
            let _ = writeln!(
                out,
                "ADDED {} step={} anchor={} distance={:.6}",
                add.scene_id, add.step, add.nearest_anchor_id, add.semantic_distance
            );
        }
    }
    let _ = writeln!(
        out,
        "added {} pool scenes; dataset now has {} scenes",
        report.additions.len(),
        run.dataset.len()
    );
    Ok(())
}

fn sample_cmd(a: SampleArgs) -> Result<()> {
    let ds = Dataset::load_dir(&a.dataset)?;
    let (subset, parameters) = match a.method {
        SampleMethod::Random => (
            random_select(&ds, a.fraction, a.seed)?,
            json!({ "method": "random", "fraction": a.fraction, "seed": a.seed }),
        ),
        SampleMethod::Rfs => (
            rfs_select(&ds, a.fraction, a.threshold, a.seed)?.dataset,
            json!({ "method": "rfs", "fraction": a.fraction, "seed": a.seed, "threshold": a.threshold }),
        ),
    };
    subset.save_dir(&a.out)?;
    let prov = provenance(
        "sample",
        parameters,
        dataset_digests("dataset", &a.dataset)?,
        None,
    );
    write_json(
        a.out.join(SAMPLE_REPORT_FILE),
        &json!({
            "scenes": subset.len(),
            "scene_ids": subset.scenes().iter().map(|s| &s.scene_id).collect::<Vec<_>>(),
            "provenance": prov,
        }),
    )?;
    println!("sampled {} of {} scenes", subset.len(), ds.len());
    Ok(())
}

fn retrieve_cmd(a: RetrieveArgs) -> Result<()> {
    let ds = Dataset::load_dir(&a.dataset)?;
    let cfg = ProviderConfig::load(&a.provider)?;
    let q = embed_query(&cfg, &a.query)?;
    let hits = retrieve(&ds, &q, a.top)?;
    let text = serde_json::to_string_pretty(&hits).expect("hits serialize");
    println!("{text}");
    Ok(())
}

fn report_cmd(r: ReportCommand) -> Result<()> {
    match r {
        ReportCommand::Retention {
            dataset,
            cluster,
            epsilons,
            output,
        } => {
            let ds = Dataset::load_dir(&dataset)?;
            let params = cluster.params(0.0);
            let model = fit_clusters(&ds, &params)?;
            let rows = retention_curve_with_model(&ds, &model, &params, &epsilons)?;
            let mut p = to_value(&params);
            p["epsilons"] = json!(epsilons);
            let prov = provenance(
                "report retention",
                p,
                dataset_digests("dataset", &dataset)?,
                None,
            );
            emit(&output, &rows, json!({}), prov)
        }
        ReportCommand::Sessions {
            dataset,
            cluster,
            output,
        } => {
            let ds = Dataset::load_dir(&dataset)?;
            let params = cluster.params(0.0);
            let model = fit_clusters(&ds, &params)?;
            let rows = unique_sessions_per_cluster(&model, &ds)?;
            let mut p = to_value(&params);
            if let Some(o) = p.as_object_mut() {
                o.remove("epsilon");
            }
            let prov = provenance(
                "report sessions",
                p,
                dataset_digests("dataset", &dataset)?,
                None,
            );
            let extra = json!({ "mean_unique_sessions": mean_unique_sessions(&rows) });
            emit(&output, &rows, extra, prov)
        }
        ReportCommand::Objects { dataset, output } => {
            let ds = Dataset::load_dir(&dataset)?;
            #[derive(Serialize)]
            struct Row {
                class: String,
                count: u64,
            }
            let rows: Vec<Row> = object_counts(&ds)?
                .into_iter()
                .map(|(class, count)| Row { class, count })
                .collect();
            let prov = provenance(
                "report objects",
                json!({}),
                dataset_digests("dataset", &dataset)?,
                None,
            );
            emit(&output, &rows, json!({}), prov)
        }
        ReportCommand::Ksweep {
            dataset,
            ks,
            epsilon,
            seed,
            max_iters,
            tol,
            n_init,
            cluster_on,
            output,
        } => {
            let ds = Dataset::load_dir(&dataset)?;
            let base = ClusterArgs {
                k: ks[0],
                seed,
                max_iters,
                tol,
                n_init,
                cluster_on,
            }
            .params(epsilon);
            let rows = k_sweep(&ds, &ks, &base)?;
            let mut p = to_value(&base);
            p["k"] = json!(ks);
            let prov = provenance(
                "report ksweep",
                p,
                dataset_digests("dataset", &dataset)?,
                None,
            );
            emit(&output, &rows, json!({}), prov)
        }
    }
}

/// JSON output is `{"rows": [...], ...extra, "provenance": {...}}`; CSV
/// output carries the rows only.
fn emit<T: Serialize>(
    output: &OutputArgs,
    rows: &[T],
    extra: Value,
    prov: Provenance,
) -> Result<()> {
    let text = match output.format {
        Format::Csv => to_csv(rows)?,
        Format::Json => {
            let mut doc = json!({ "rows": rows });
            if let (Some(d), Some(e)) = (doc.as_object_mut(), extra.as_object()) {
                d.extend(e.clone());
                d.insert("provenance".into(), to_value(&prov));
            }
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
    };
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        blobs: a.blobs,
        points_per_blob: a.per_blob,
        dim: a.dim,
        noise: a.noise,
        sessions_per_blob: a.sessions_per_blob,
        duplicate_pairs: a.duplicate_pairs,
        labels: a.label_classes.map(|classes| LabelProfile {
            classes,
            max_count: a.label_max_count,
        }),
        seed: a.seed,
        visual_session_weight: a.visual_session_weight,
        id_prefix: a.id_prefix,
    };
    let synth = generate(&cfg)?;
    synth.write(&a.out)?;
    println!(
        "wrote {} synthetic scenes to {}",
        synth.dataset.len(),
        a.out.display()
    );
    Ok(())
}

fn provenance(
    command: &str,
    parameters: Value,
    inputs: Vec<InputDigest>,
    prompt: Option<String>,
) -> Provenance {
    Provenance {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        parameters,
        inputs,
        prompt,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("parameters serialize")
}

fn digest(name: &str, path: &Path) -> Result<InputDigest> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        name: name.into(),
        sha256: hex::encode(h.finalize()),
    })
}

/// Digests of a dataset directory's manifest and embedding files. Names are
/// role-relative so outputs do not depend on where inputs live.
fn dataset_digests(role: &str, dir: &Path) -> Result<Vec<InputDigest>> {
    let mut out = Vec::new();
    for file in [MANIFEST_FILE, SEMANTIC_FILE, VISUAL_FILE] {
        let p = dir.join(file);
        if p.exists() {
            out.push(digest(&format!("{role}/{file}"), &p)?);
        }
    }
    Ok(out)
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Splices flags from a `--config` JSON object into `args`, right after the
/// subcommand, skipping any flag already present on the command line.
fn apply_config(mut args: Vec<String>) -> Result<Vec<String>> {
    let Some(i) = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = if let Some(v) = args[i].strip_prefix("--config=") {
        let v = v.to_string();
        args.remove(i);
        v
    } else {
        if i + 1 >= args.len() {
            return Ok(args); // let clap report the missing value
        }
        args.remove(i);
        args.remove(i)
    };
    let path = PathBuf::from(path);
    let value: Value = read_json(&path)?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidParam(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    };

    // Locate the (possibly nested) subcommand.
    let root = Cli::command();
    let mut cmd = &root;
    let mut insert_at = None;
    let mut j = 1;
    while j < args.len() {
        let a = &args[j];
        if a == "--threads" {
            j += 2;
            continue;
        }
        if a.starts_with('-') {
            j += 1;
            continue;
        }
        match cmd.find_subcommand(a) {
            Some(sub) => {
                cmd = sub;
                insert_at = Some(j + 1);
                j += 1;
            }
            None => break,
        }
    }
    let Some(insert_at) = insert_at else {
        return Ok(args);
    };

    let accepts =
        |c: &clap::Command, flag: &str| c.get_arguments().any(|x| x.get_long() == Some(flag));
    let mut all = vec![&root];
    let mut k = 0;
    while k < all.len() {
        let subs: Vec<_> = all[k].get_subcommands().collect();
        all.extend(subs);
        k += 1;
    }

    let mut extra = Vec::new();
    for (key, v) in map {
        let flag = key.replace('_', "-");
        if flag == "config" {
            return Err(Error::InvalidParam(
                "config files cannot nest --config".into(),
            ));
        }
        if !accepts(cmd, &flag) && flag != "threads" {
            if all.iter().any(|c| accepts(c, &flag)) {
                continue;
            }
            return Err(Error::InvalidParam(format!("unknown config key {key:?}")));
        }
        let long = format!("--{flag}");
        let given = args
            .iter()
            .any(|a| *a == long || a.starts_with(&format!("{long}=")));
        if given {
            continue;
        }
        let text = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(Error::InvalidParam(format!(
                "config key {key:?} has an unsupported value"
            ))),
        };
        match &v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => extra.push(long),
            Value::Array(items) => {
                let parts = items.iter().map(text).collect::<Result<Vec<_>>>()?;
                extra.push(long);
                extra.push(parts.join(","));
            }
            other => {
                extra.push(long);
                extra.push(text(other)?);
            }
        }
    }
    args.splice(insert_at..insert_at, extra);
    Ok(args)
}
