//! Single-binary command line: `compose`, `augment`, `split`, `manifest`,
//! `eval`, `select`, `run`, `bench`, and `verify` subcommands.
//!
//! Reproducibility plumbing: `--seed` (or the `DETBENCH_SEED` environment
//! variable) feeds every random draw and defaults to a fixed constant, so two
//! runs with the same inputs and flags produce byte-identical artifacts.
//! `--jobs` caps worker parallelism globally. `--json` switches each
//! subcommand's summary from a human line to machine-readable JSON. Every
//! subcommand takes `--out` and writes only beneath it (for `bench`, `--out`
//! is the report file itself).
//!
//! Exit codes: 0 success, 1 domain error (unplaceable asset, split leak,
//! undefined AP, …), 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use image::RgbImage;
use serde::Serialize;

use crate::annotation::{write_detection_file, write_label_file};
use crate::augment::{apply_spec, AppliedKernel, AugmentationSpec};
use crate::compositor::{generate_dataset, AssetKind, CompositeParams, ForegroundAsset};
use crate::evaluator::{evaluate_dirs, select_model, EvalError, EvalReport};
use crate::pipeline::{
    bench, run_pipeline, run_pipeline_sync, DetectorBackend, DirectorySource, ExternalBackend,
    RunOptions, StageTimings, StubBackend,
};
use crate::seed::derive_seed;
use crate::strategy::{
    build_manifest, split, verify_manifest, ExperimentManifest, Inventory, Provenance, SplitSpec,
    StrategyId,
};

/// Master seed used when neither `--seed` nor `DETBENCH_SEED` is given, so
/// every run is reproducible unless the user opts into entropy explicitly.
pub const DEFAULT_MASTER_SEED: u64 = 1729;

#[derive(Parser)]
#[command(
    name = "detbench",
    version,
    about = "Semi-synthetic detection dataset builder, augmenter, split manager, evaluator, and latency bench",
    propagate_version = true
)]
struct Cli {
    /// Master seed for all random draws (env fallback: DETBENCH_SEED)
    #[arg(long, global = true, env = "DETBENCH_SEED", default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,

    /// Cap worker parallelism (default: one worker per core)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Emit machine-readable JSON summaries instead of human text
    #[arg(long, global = true)]
    json: bool,

    /// Increase verbosity (repeatable)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
pub struct GlobalConfig {
    pub seed: u64,
    pub verbosity: u8,
    pub json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Composite foreground assets onto background photos with auto-labels
    Compose(ComposeArgs),
    /// Apply distortion kernels to an image directory (labels pass through)
    Augment(AugmentArgs),
    /// Partition an inventory into train/val/test sets
    Split(SplitArgs),
    /// Emit the train/val/test manifest for one strategy
    Manifest(ManifestArgs),
    /// Score detections against ground truth (mAP@0.5)
    Eval(EvalArgs),
    /// Pick the best model from evaluation reports
    Select(SelectArgs),
    /// Stream frames through a detector backend
    Run(RunArgs),
    /// Measure per-stage detector latency
    Bench(BenchArgs),
    /// Re-check a manifest for leaks and missing or corrupt files
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ComposeArgs {
    /// Directory of background photos (png/jpg/jpeg)
    #[arg(long)]
    backgrounds: PathBuf,
    /// Directory of foreground assets. Subdirectories `real-cutout/` and
    /// `render/` set the asset kind; loose files count as real cutouts.
    /// Masks come from the alpha channel or a sibling `<stem>.mask.png`.
    #[arg(long)]
    assets: PathBuf,
    /// Number of composites to generate
    #[arg(long)]
    count: usize,
    /// Output directory (creates images/, labels/, generation.json)
    #[arg(long)]
    out: PathBuf,
    /// Fraction of background height eligible for placement (default 0.4)
    #[arg(long)]
    top_band: Option<f64>,
    /// Probability of inserting two objects (default 0.02)
    #[arg(long)]
    dual_prob: Option<f64>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Directory of images with optional sibling .txt label files
    #[arg(long)]
    input: PathBuf,
    /// Kernel configuration TOML (default: the built-in six-kernel set)
    #[arg(long)]
    aug_config: Option<PathBuf>,
    /// Seed for augmentation draws (default: the global --seed)
    #[arg(long)]
    aug_seed: Option<u64>,
    /// Output directory (augmented images, untouched label copies, augment_log.json)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Inventory root holding real-normal/, real-difficult/, gen-real/,
    /// gen-render/ subdirectories
    #[arg(long)]
    inventory: PathBuf,
    /// Output directory for splits.json (default: print to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ManifestArgs {
    /// Inventory root (the split is recomputed deterministically from it)
    #[arg(long)]
    inventory: PathBuf,
    /// Strategy: rr, rg, gg, gr, or mr
    #[arg(long, value_parser = parse_strategy)]
    strategy: StrategyId,
    /// Output directory for manifest-<strategy>.json (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth label directory (<stem>.txt)
    #[arg(long)]
    gt: PathBuf,
    /// Detection directory (<stem>.det.txt)
    #[arg(long)]
    det: PathBuf,
    /// Difficult-set ground-truth directory
    #[arg(long, requires = "det_difficult")]
    gt_difficult: Option<PathBuf>,
    /// Difficult-set detection directory
    #[arg(long, requires = "gt_difficult")]
    det_difficult: Option<PathBuf>,
    /// Validation ground-truth directory
    #[arg(long, requires = "det_val")]
    gt_val: Option<PathBuf>,
    /// Validation detection directory
    #[arg(long, requires = "gt_val")]
    det_val: Option<PathBuf>,
    /// Model name recorded in the report
    #[arg(long, default_value = "model")]
    model: String,
    /// Output directory for eval_report.json (default: print only)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Evaluation report JSON files (one per model)
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Output directory for selection.json (default: print only)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Directory of frames, streamed in lexicographic filename order
    #[arg(long)]
    source: PathBuf,
    /// Backend: `stub`, `stub:PRE,INF,POST` (fixed timings, ms), or
    /// `external:<command>` (paths substituted for {image} {dets} {timing},
    /// or appended)
    #[arg(long)]
    backend: String,
    /// Inter-stage queue capacity (arriving frames evict the oldest when full)
    #[arg(long, default_value_t = 1)]
    queue: usize,
    /// Step the stages synchronously instead of concurrently (no drops)
    #[arg(long)]
    sync: bool,
    /// Output directory (detections/ per frame, run_summary.json)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Backend: `stub`, `stub:PRE,INF,POST`, or `external:<command>`
    #[arg(long)]
    backend: String,
    /// Unrecorded warmup iterations
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Recorded iterations (cycles the image set)
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Directory of benchmark images (default: one synthetic gray frame)
    #[arg(long)]
    source: Option<PathBuf>,
    /// Report file to write (JSON), e.g. report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Manifest JSON produced by `manifest`
    #[arg(long)]
    manifest: PathBuf,
    /// Dataset root that the manifest's relative paths resolve against
    #[arg(long, default_value = ".")]
    root: PathBuf,
    /// Output directory for verify_report.json (default: print only)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<StrategyId, String> {
    s.parse::<StrategyId>().map_err(|e| e.to_string())
}

/// Domain failures exit 1; usage failures exit 2.
enum CliError {
    Domain(String),
    Usage(String),
}

fn domain(e: impl Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn io_err(path: &Path, e: impl Display) -> CliError {
    CliError::Domain(format!("{}: {e}", path.display()))
}

/// Parse argv and execute; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore the error if a pool already exists (e.g. repeated dispatch
        // in one process); the cap applies on first configuration.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let global = GlobalConfig { seed: cli.seed, verbosity: cli.verbose, json: cli.json };
    let result = match &cli.command {
        Command::Compose(a) => cmd_compose(&global, a),
        Command::Augment(a) => cmd_augment(&global, a),
        Command::Split(a) => cmd_split(&global, a),
        Command::Manifest(a) => cmd_manifest(&global, a),
        Command::Eval(a) => cmd_eval(&global, a),
        Command::Select(a) => cmd_select(&global, a),
        Command::Run(a) => cmd_run(&global, a),
        Command::Bench(a) => cmd_bench(&global, a),
        Command::Verify(a) => cmd_verify(&global, a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}

fn is_mask_sidecar(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.to_ascii_lowercase().ends_with(".mask.png"))
}

fn sorted_image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let rd = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_image_file(p) && !is_mask_sidecar(p))
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    Ok(files)
}

fn load_image_dir(dir: &Path) -> Result<Vec<(String, RgbImage)>, CliError> {
    let mut out = Vec::new();
    for path in sorted_image_files(dir)? {
        let img = image::open(&path).map_err(|e| io_err(&path, e))?.to_rgb8();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        out.push((id, img));
    }
    Ok(out)
}

fn load_assets(dir: &Path) -> Result<Vec<ForegroundAsset>, CliError> {
    let mut assets = Vec::new();
    for (sub, kind) in [("real-cutout", AssetKind::RealCutout), ("render", AssetKind::Render)] {
        let sub_dir = dir.join(sub);
        if sub_dir.is_dir() {
            for path in sorted_image_files(&sub_dir)? {
                assets.push(ForegroundAsset::load(&path, kind).map_err(domain)?);
            }
        }
    }
    for path in sorted_image_files(dir)? {
        assets.push(ForegroundAsset::load(&path, AssetKind::RealCutout).map_err(domain)?);
    }
    Ok(assets)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn to_pretty_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(domain)
}

fn write_json_file(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = to_pretty_json(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    println!("{}", to_pretty_json(value)?);
    Ok(())
}

fn emit_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn parse_backend(
    spec: &str,
    scratch: Option<&Path>,
) -> Result<Box<dyn DetectorBackend>, CliError> {
    if spec == "stub" {
        return Ok(Box::new(StubBackend::fixed(Vec::new(), StageTimings::ZERO)));
    }
    if let Some(rest) = spec.strip_prefix("stub:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "stub timings need 3 comma-separated numbers (PRE,INF,POST ms), got {rest:?}"
            )));
        }
        let mut ms = [0.0f64; 3];
        for (i, p) in parts.iter().enumerate() {
            ms[i] = p
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad stub timing {p:?}")))?;
        }
        let timings = StageTimings::new(ms[0], ms[1], ms[2]);
        if !timings.is_valid() {
            return Err(CliError::Usage(format!("stub timings must be finite and >= 0: {rest:?}")));
        }
        return Ok(Box::new(StubBackend::fixed(Vec::new(), timings)));
    }
    if let Some(rest) = spec.strip_prefix("external:") {
        let argv: Vec<String> = rest.split_whitespace().map(String::from).collect();
        if argv.is_empty() {
            return Err(CliError::Usage("external backend command is empty".into()));
        }
        let backend = ExternalBackend::new(argv).map_err(domain)?;
        let backend = match scratch {
            Some(dir) => backend.with_workdir(dir.join("backend_scratch")).map_err(domain)?,
            None => backend,
        };
        return Ok(Box::new(backend));
    }
    Err(CliError::Usage(format!(
        "unknown backend {spec:?}; expected stub, stub:PRE,INF,POST, or external:<command>"
    )))
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn cmd_compose(g: &GlobalConfig, a: &ComposeArgs) -> Result<(), CliError> {
    let backgrounds = load_image_dir(&a.backgrounds)?;
    let assets = load_assets(&a.assets)?;
    if g.verbosity >= 1 {
        eprintln!("loaded {} backgrounds, {} assets", backgrounds.len(), assets.len());
    }
    let mut params = CompositeParams::default();
    if let Some(band) = a.top_band {
        params.top_band_fraction = band;
    }
    if let Some(p) = a.dual_prob {
        params.dual_insert_prob = p;
    }

    let dataset = generate_dataset(&backgrounds, &assets, a.count, &params, g.seed).map_err(domain)?;
    emit_warnings(&dataset.warnings);

    let images_dir = a.out.join("images");
    let labels_dir = a.out.join("labels");
    ensure_dir(&images_dir)?;
    ensure_dir(&labels_dir)?;
    let mut origin_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (i, result) in dataset.results.iter().enumerate() {
        let stem = format!("composite_{i:05}");
        let img_path = images_dir.join(format!("{stem}.png"));
        result.image.save(&img_path).map_err(|e| io_err(&img_path, e))?;
        let label_path = labels_dir.join(format!("{stem}.txt"));
        let text = write_label_file(&result.ground_truths).map_err(domain)?;
        std::fs::write(&label_path, text).map_err(|e| io_err(&label_path, e))?;
        *origin_counts.entry(result.origin.as_str()).or_insert(0) += 1;
        if g.verbosity >= 2 {
            eprintln!("wrote {stem}.png ({})", result.origin.as_str());
        }
    }
    let manifest_path = a.out.join("generation.json");
    write_json_file(&manifest_path, &dataset.manifest)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        seed: u64,
        count: usize,
        origins: &'a BTreeMap<&'static str, usize>,
        out: String,
        warnings: usize,
    }
    if g.json {
        print_json(&Summary {
            command: "compose",
            seed: g.seed,
            count: dataset.results.len(),
            origins: &origin_counts,
            out: a.out.display().to_string(),
            warnings: dataset.warnings.len(),
        })?;
    } else {
        let origins: Vec<String> =
            origin_counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        println!(
            "composed {} images ({}) into {}",
            dataset.results.len(),
            origins.join(", "),
            a.out.display()
        );
    }
    Ok(())
}

fn cmd_augment(g: &GlobalConfig, a: &AugmentArgs) -> Result<(), CliError> {
    let spec = match &a.aug_config {
        Some(path) => AugmentationSpec::load(path).map_err(domain)?,
        None => AugmentationSpec::default(),
    };
    let seed = a.aug_seed.unwrap_or(g.seed);
    let files = sorted_image_files(&a.input)?;
    if files.is_empty() {
        return Err(CliError::Domain(format!(
            "no images found in {}",
            a.input.display()
        )));
    }
    ensure_dir(&a.out)?;

    #[derive(Serialize)]
    struct LogEntry {
        file: String,
        applied: Vec<AppliedKernel>,
    }
    let mut log = Vec::with_capacity(files.len());
    let mut labels_copied = 0usize;
    for (i, path) in files.iter().enumerate() {
        let img = image::open(path).map_err(|e| io_err(path, e))?.to_rgb8();
        let image_seed = derive_seed(seed, i as u64);
        let (augmented, applied) = apply_spec(&img, &spec, image_seed).map_err(domain)?;
        let name = path.file_name().expect("listed file has a name");
        let out_path = a.out.join(name);
        augmented.save(&out_path).map_err(|e| io_err(&out_path, e))?;

        // Labels describe object positions, which augmentation never moves:
        // copy them through byte-identical.
        let label_src = path.with_extension("txt");
        if label_src.is_file() {
            let label_dst = a.out.join(label_src.file_name().expect("label file name"));
            std::fs::copy(&label_src, &label_dst).map_err(|e| io_err(&label_dst, e))?;
            labels_copied += 1;
        }
        if g.verbosity >= 2 {
            eprintln!("augmented {} ({} kernels)", name.to_string_lossy(), applied.len());
        }
        log.push(LogEntry { file: name.to_string_lossy().into_owned(), applied });
    }
    write_json_file(&a.out.join("augment_log.json"), &log)?;

    #[derive(Serialize)]
    struct Summary {
        command: &'static str,
        seed: u64,
        images: usize,
        labels_copied: usize,
        out: String,
    }
    if g.json {
        print_json(&Summary {
            command: "augment",
            seed,
            images: log.len(),
            labels_copied,
            out: a.out.display().to_string(),
        })?;
    } else {
        println!(
            "augmented {} images ({} label files copied through) into {}",
            log.len(),
            labels_copied,
            a.out.display()
        );
    }
    Ok(())
}

/// Wire form of a split: provenance plus relative path lists, stable across
/// runs for byte-identical output.
#[derive(Serialize)]
struct SplitFile {
    provenance: Provenance,
    real_train: Vec<String>,
    real_val: Vec<String>,
    real_test: Vec<String>,
    gen_train: Vec<String>,
    gen_val: Vec<String>,
    test_difficult: Vec<String>,
}

fn path_strings(entries: &[crate::annotation::ImageEntry]) -> Vec<String> {
    entries.iter().map(|e| e.path.display().to_string()).collect()
}

fn compute_split(inventory_dir: &Path, seed: u64) -> Result<(crate::strategy::SplitSets, SplitFile), CliError> {
    let inventory = Inventory::scan(inventory_dir).map_err(domain)?;
    let spec = SplitSpec::new(seed);
    let sets = split(&inventory, &spec).map_err(domain)?;
    let file = SplitFile {
        provenance: Provenance {
            seed: spec.seed,
            real_ratios: spec.real_ratios,
            gen_ratios: spec.gen_ratios,
            inventory_hash: sets.inventory_hash.clone(),
        },
        real_train: path_strings(&sets.real_train),
        real_val: path_strings(&sets.real_val),
        real_test: path_strings(&sets.real_test),
        gen_train: path_strings(&sets.gen_train),
        gen_val: path_strings(&sets.gen_val),
        test_difficult: path_strings(&sets.test_difficult),
    };
    Ok((sets, file))
}

fn cmd_split(g: &GlobalConfig, a: &SplitArgs) -> Result<(), CliError> {
    let (sets, file) = compute_split(&a.inventory, g.seed)?;
    match &a.out {
        Some(out) => {
            ensure_dir(out)?;
            write_json_file(&out.join("splits.json"), &file)?;
            if g.json {
                #[derive(Serialize)]
                struct Summary {
                    command: &'static str,
                    seed: u64,
                    real: (usize, usize, usize),
                    generated: (usize, usize),
                    test_difficult: usize,
                    inventory_hash: String,
                    out: String,
                }
                print_json(&Summary {
                    command: "split",
                    seed: g.seed,
                    real: (sets.real_train.len(), sets.real_val.len(), sets.real_test.len()),
                    generated: (sets.gen_train.len(), sets.gen_val.len()),
                    test_difficult: sets.test_difficult.len(),
                    inventory_hash: sets.inventory_hash.clone(),
                    out: out.display().to_string(),
                })?;
            } else {
                println!(
                    "split real {}/{}/{} generated {}/{} difficult {} -> {}",
                    sets.real_train.len(),
                    sets.real_val.len(),
                    sets.real_test.len(),
                    sets.gen_train.len(),
                    sets.gen_val.len(),
                    sets.test_difficult.len(),
                    out.join("splits.json").display()
                );
            }
        }
        // No --out: the splits JSON itself is the output.
        None => print_json(&file)?,
    }
    Ok(())
}

fn cmd_manifest(g: &GlobalConfig, a: &ManifestArgs) -> Result<(), CliError> {
    let (sets, _) = compute_split(&a.inventory, g.seed)?;
    let manifest = build_manifest(a.strategy, &sets).map_err(domain)?;
    match &a.out {
        Some(out) => {
            ensure_dir(out)?;
            let path = out.join(format!("manifest-{}.json", a.strategy.as_str()));
            write_json_file(&path, &manifest)?;
            if g.json {
                #[derive(Serialize)]
                struct Summary {
                    command: &'static str,
                    strategy: &'static str,
                    train: usize,
                    val: usize,
                    test_normal: usize,
                    test_difficult: usize,
                    out: String,
                }
                print_json(&Summary {
                    command: "manifest",
                    strategy: a.strategy.as_str(),
                    train: manifest.train.len(),
                    val: manifest.val.len(),
                    test_normal: manifest.test_normal.len(),
                    test_difficult: manifest.test_difficult.len(),
                    out: path.display().to_string(),
                })?;
            } else {
                println!(
                    "{}: train {} val {} test-normal {} test-difficult {} -> {}",
                    a.strategy.as_str(),
                    manifest.train.len(),
                    manifest.val.len(),
                    manifest.test_normal.len(),
                    manifest.test_difficult.len(),
                    path.display()
                );
            }
        }
        None => print_json(&manifest)?,
    }
    Ok(())
}

fn cmd_eval(g: &GlobalConfig, a: &EvalArgs) -> Result<(), CliError> {
    let test_normal = evaluate_dirs(&a.gt, &a.det).map_err(domain)?;
    let test_difficult = match (&a.gt_difficult, &a.det_difficult) {
        (Some(gt), Some(det)) => Some(evaluate_dirs(gt, det).map_err(domain)?),
        _ => None,
    };
    let val = match (&a.gt_val, &a.det_val) {
        (Some(gt), Some(det)) => Some(evaluate_dirs(gt, det).map_err(domain)?),
        _ => None,
    };
    let report = EvalReport {
        model: a.model.clone(),
        val_ap: val,
        test_normal_ap: Some(test_normal),
        test_difficult_ap: test_difficult,
    };

    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_json_file(&out.join("eval_report.json"), &report)?;
    }
    if g.json {
        print_json(&report)?;
    } else {
        if let Some(v) = report.val_ap {
            println!("mAP@0.5 (val) = {v:.6}");
        }
        match report.test_difficult_ap {
            Some(d) => {
                println!("mAP@0.5 (test-normal) = {test_normal:.6}");
                println!("mAP@0.5 (test-difficult) = {d:.6}");
                let avg = report.test_average().expect("both test APs present");
                let diff = report.test_difference().expect("both test APs present");
                println!("test average = {avg:.6}");
                println!("test difference = {diff:.6}");
            }
            None => println!("mAP@0.5 = {test_normal:.6}"),
        }
    }
    Ok(())
}

fn cmd_select(g: &GlobalConfig, a: &SelectArgs) -> Result<(), CliError> {
    let mut reports = Vec::with_capacity(a.reports.len());
    for path in &a.reports {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let report: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    let selected = select_model(&reports).map_err(domain)?;

    #[derive(Serialize)]
    struct Selection<'a> {
        command: &'static str,
        selected: &'a str,
        test_average: f64,
        test_difference: f64,
        candidates: &'a [EvalReport],
    }
    let selection = Selection {
        command: "select",
        selected: &selected.model,
        test_average: selected.test_average().ok_or(EvalError::IncompleteReport {
            model: selected.model.clone(),
        })
        .map_err(domain)?,
        test_difference: selected.test_difference().expect("average implies difference"),
        candidates: &reports,
    };
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_json_file(&out.join("selection.json"), &selection)?;
    }
    if g.json {
        print_json(&selection)?;
    } else {
        print!("{}", crate::evaluator::report_csv(&reports));
        println!(
            "selected: {} (test average {:.3}, test difference {:.3})",
            selection.selected, selection.test_average, selection.test_difference
        );
    }
    Ok(())
}

fn cmd_run(g: &GlobalConfig, a: &RunArgs) -> Result<(), CliError> {
    let source = DirectorySource::new(&a.source).map_err(domain)?;
    if g.verbosity >= 1 {
        eprintln!("streaming {} frames from {}", source.len(), a.source.display());
    }
    let backend = parse_backend(&a.backend, a.out.as_deref())?;

    let det_dir = match &a.out {
        Some(out) => {
            let dir = out.join("detections");
            ensure_dir(&dir)?;
            Some(dir)
        }
        None => None,
    };
    let mut sink_error: Option<CliError> = None;
    let sink = |_frame: &crate::pipeline::Frame, msg: &crate::pipeline::DetectionMessage| {
        if sink_error.is_some() {
            return;
        }
        if let Some(dir) = &det_dir {
            let path = dir.join(format!("frame_{:08}.det.txt", msg.seq));
            let write = write_detection_file(&msg.detections)
                .map_err(domain)
                .and_then(|text| std::fs::write(&path, text).map_err(|e| io_err(&path, e)));
            if let Err(e) = write {
                sink_error = Some(e);
            }
        }
    };

    let summary = if a.sync {
        run_pipeline_sync(source, backend, sink).map_err(domain)?
    } else {
        let options = RunOptions { queue_capacity: a.queue };
        run_pipeline(source, backend, sink, &options).map_err(domain)?
    };
    if let Some(e) = sink_error {
        return Err(e);
    }

    if let Some(out) = &a.out {
        write_json_file(&out.join("run_summary.json"), &summary)?;
    }
    if g.json {
        print_json(&summary)?;
    } else {
        println!(
            "frames {}: processed {}, dropped {}, failed {}",
            summary.frames_in, summary.processed, summary.dropped, summary.failed
        );
    }
    Ok(())
}

fn cmd_bench(g: &GlobalConfig, a: &BenchArgs) -> Result<(), CliError> {
    let scratch = a.out.as_deref().and_then(Path::parent).filter(|p| !p.as_os_str().is_empty());
    let mut backend = parse_backend(&a.backend, scratch)?;
    let images: Vec<RgbImage> = match &a.source {
        Some(dir) => {
            let loaded = load_image_dir(dir)?;
            loaded.into_iter().map(|(_, img)| img).collect()
        }
        None => {
            let (w, h) = backend.input_size();
            vec![RgbImage::from_pixel(w.max(1), h.max(1), image::Rgb([128, 128, 128]))]
        }
    };
    let report = bench(&mut *backend, &images, a.warmup, a.iters).map_err(domain)?;
    emit_warnings(&report.warnings);

    if let Some(out) = &a.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_json_file(out, &report)?;
    }
    if g.json {
        print_json(&report)?;
    } else {
        println!("stage        mean        median      min         max      (ms)");
        for (name, s) in [
            ("preprocess", &report.preprocess),
            ("inference", &report.inference),
            ("postprocess", &report.postprocess),
            ("total", &report.total),
        ] {
            println!(
                "{name:<12} {:<11.3} {:<11.3} {:<11.3} {:<8.3}",
                s.mean, s.median, s.min, s.max
            );
        }
        println!(
            "frames {} (warmup {} excluded), possible FPS {}",
            report.frames,
            report.warmup_excluded,
            report.fps_display()
        );
    }
    Ok(())
}

fn cmd_verify(g: &GlobalConfig, a: &VerifyArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|e| io_err(&a.manifest, e))?;
    let manifest: ExperimentManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Domain(format!("{}: {e}", a.manifest.display())))?;
    let report = verify_manifest(&manifest, &a.root);

    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_json_file(&out.join("verify_report.json"), &report)?;
    }
    if g.json {
        print_json(&report)?;
    } else if report.pass {
        println!("{}: PASS ({} files checked against {})",
            manifest.strategy.as_str(),
            manifest.train.len() + manifest.val.len() + manifest.test_normal.len() + manifest.test_difficult.len(),
            a.root.display());
    } else {
        for v in &report.violations {
            println!("{}: {} ({})", v.kind, v.path, v.detail);
        }
        println!("{}: FAIL ({} violations)", manifest.strategy.as_str(), report.violations.len());
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "manifest {} failed verification with {} violations",
            a.manifest.display(),
            report.violations.len()
        )))
    }
}
