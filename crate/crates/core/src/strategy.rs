//! Dataset splitting and experiment-manifest construction.
//!
//! An inventory lists images grouped by origin (`real-normal`,
//! `real-difficult`, `gen-real`, `gen-render`). It is split once —
//! real 60:20:20 into train/val/test, each generated subset 80:20 into
//! train/val, real-difficult wholesale into test-difficult — and the five
//! training strategies are materialized from that single split:
//!
//! | strategy | train                  | validation |
//! |----------|------------------------|------------|
//! | `rr`     | real-train             | real-val   |
//! | `rg`     | real-train             | gen-val    |
//! | `gg`     | gen-train              | gen-val    |
//! | `gr`     | gen-train              | real-val   |
//! | `mr`     | real-train ∪ gen-train | real-val   |
//!
//! Both test sets (`test-normal` = real-test, `test-difficult`) are identical
//! for all five strategies, so scores stay comparable and no training or
//! validation image can leak into a test set.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotation::{parse_label_file, write_label_file, ImageEntry, OriginTag};
use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("invalid split ratios: {reason}")]
    InvalidRatios { reason: String },
    #[error("inventory group {group:?} is empty")]
    EmptyGroup { group: &'static str },
    #[error("strategy {strategy} requires non-empty {group:?}")]
    MissingGroup { strategy: StrategyId, group: &'static str },
    #[error("duplicate image path in inventory: {path}")]
    DuplicatePath { path: String },
    #[error("inventory: {reason}")]
    InvalidInventory { reason: String },
    #[error("failed reading {path}: {message}")]
    Io { path: String, message: String },
}

/// The five train/validation pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    Rr,
    Rg,
    Gg,
    Gr,
    Mr,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] =
        [StrategyId::Rr, StrategyId::Rg, StrategyId::Gg, StrategyId::Gr, StrategyId::Mr];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyId::Rr => "rr",
            StrategyId::Rg => "rg",
            StrategyId::Gg => "gg",
            StrategyId::Gr => "gr",
            StrategyId::Mr => "mr",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == lower)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected rr, rg, gg, gr, or mr)"))
    }
}

/// An origin-tagged image collection with unique paths.
#[derive(Debug, Clone, Default)]
pub struct Inventory {
    entries: Vec<ImageEntry>,
}

impl Inventory {
    pub fn new(entries: Vec<ImageEntry>) -> Result<Self, StrategyError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.clone()) {
                return Err(StrategyError::DuplicatePath { path: e.path.display().to_string() });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ImageEntry] {
        &self.entries
    }

    pub fn by_origin(&self, origin: OriginTag) -> Vec<&ImageEntry> {
        self.entries.iter().filter(|e| e.origin == origin).collect()
    }

    /// Scan a directory laid out as one subdirectory per origin tag
    /// (`real-normal/`, `real-difficult/`, `gen-real/`, `gen-render/`), each
    /// holding images (`.png`/`.jpg`/`.jpeg`) with sibling `.txt` label files.
    /// Entries come back sorted by path; a missing label file means an image
    /// without objects.
    pub fn scan(root: &Path) -> Result<Self, StrategyError> {
        let mut entries = Vec::new();
        for tag in [OriginTag::RealNormal, OriginTag::RealDifficult, OriginTag::GenReal, OriginTag::GenRender] {
            let dir = root.join(tag.as_str());
            if !dir.is_dir() {
                continue;
            }
            let io_err = |p: &Path, e: std::io::Error| StrategyError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            };
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| io_err(&dir, e))?
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| io_err(&dir, e))?
                .into_iter()
                .map(|d| d.path())
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                        Some("png") | Some("jpg") | Some("jpeg")
                    )
                })
                .collect();
            files.sort();
            for img_path in files {
                let (width, height) = image::image_dimensions(&img_path)
                    .map_err(|e| StrategyError::Io { path: img_path.display().to_string(), message: e.to_string() })?;
                let label_path = img_path.with_extension("txt");
                let ground_truths = if label_path.exists() {
                    let text = std::fs::read_to_string(&label_path).map_err(|e| io_err(&label_path, e))?;
                    parse_label_file(&text, width, height).map_err(|e| StrategyError::InvalidInventory {
                        reason: format!("{}: {e}", label_path.display()),
                    })?
                } else {
                    Vec::new()
                };
                let rel = img_path.strip_prefix(root).unwrap_or(&img_path).to_path_buf();
                entries.push(ImageEntry { path: rel, width, height, origin: tag, ground_truths });
            }
        }
        Inventory::new(entries)
    }

    /// Content hash over the canonical serialization (sorted by path), used
    /// as split provenance to detect silent dataset drift.
    pub fn content_hash(&self) -> String {
        let mut sorted: Vec<&ImageEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.path.cmp(&b.path));
        let mut hasher = Sha256::new();
        for e in sorted {
            let labels = write_label_file(&e.ground_truths).unwrap_or_default();
            hasher.update(e.path.to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(format!("{}x{} {}", e.width, e.height, e.origin).as_bytes());
            hasher.update([0]);
            hasher.update(labels.as_bytes());
            hasher.update([0xff]);
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Split ratios plus the shuffle seed. Defaults: real 60:20:20, generated 80:20.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub real_ratios: (f64, f64, f64),
    pub gen_ratios: (f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self { real_ratios: (0.6, 0.2, 0.2), gen_ratios: (0.8, 0.2), seed }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let (rt, rv, rx) = self.real_ratios;
        let (gt, gv) = self.gen_ratios;
        let all = [rt, rv, rx, gt, gv];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(StrategyError::InvalidRatios { reason: "ratios must lie in [0,1]".into() });
        }
        if (rt + rv + rx - 1.0).abs() > 1e-9 {
            return Err(StrategyError::InvalidRatios {
                reason: format!("real ratios ({rt}, {rv}, {rx}) do not sum to 1"),
            });
        }
        if (gt + gv - 1.0).abs() > 1e-9 {
            return Err(StrategyError::InvalidRatios {
                reason: format!("generated ratios ({gt}, {gv}) do not sum to 1"),
            });
        }
        Ok(())
    }
}

/// The result of one split. `gen_train`/`gen_val` are the unions of the
/// per-subset (gen-real, gen-render) partitions, gen-real entries first.
/// `test_difficult` carries every real-difficult entry wholesale.
#[derive(Debug, Clone)]
pub struct SplitSets {
    pub real_train: Vec<ImageEntry>,
    pub real_val: Vec<ImageEntry>,
    pub real_test: Vec<ImageEntry>,
    pub gen_train: Vec<ImageEntry>,
    pub gen_val: Vec<ImageEntry>,
    pub test_difficult: Vec<ImageEntry>,
    pub spec: SplitSpec,
    pub inventory_hash: String,
}

/// Shuffle-and-cut one group: `cuts` are the floor(ratio×N) sizes of the
/// non-train parts; train absorbs the remainder.
fn partition(mut entries: Vec<ImageEntry>, seed: u64, stream: u64, cuts: &[f64]) -> Vec<Vec<ImageEntry>> {
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut rng = rng_for(seed, stream);
    entries.shuffle(&mut rng);
    let n = entries.len();
    let sizes: Vec<usize> = cuts.iter().map(|r| (r * n as f64).floor() as usize).collect();
    let tail: usize = sizes.iter().sum();
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut rest = entries.split_off(n - tail);
    parts.push(entries); // train = remainder
    for &s in &sizes {
        let next = rest.split_off(s);
        parts.push(rest);
        rest = next;
    }
    parts
}

/// Split an inventory. Deterministic per (inventory content, spec): each
/// group is sorted by path, shuffled by a seed-derived stream (real-normal,
/// gen-real, gen-render use independent streams), then cut. Validation and
/// test take `floor(ratio×N)` entries; train takes the remainder.
pub fn split(inventory: &Inventory, spec: &SplitSpec) -> Result<SplitSets, StrategyError> {
    spec.validate()?;
    let collect = |tag: OriginTag| -> Vec<ImageEntry> {
        inventory.by_origin(tag).into_iter().cloned().collect()
    };
    let real_normal = collect(OriginTag::RealNormal);
    if real_normal.is_empty() {
        return Err(StrategyError::EmptyGroup { group: "real-normal" });
    }
    let (_, rv, rx) = spec.real_ratios;
    let mut real_parts = partition(real_normal, spec.seed, 0, &[rv, rx]);
    let real_test = real_parts.pop().expect("test part");
    let real_val = real_parts.pop().expect("val part");
    let real_train = real_parts.pop().expect("train part");

    let (_, gv) = spec.gen_ratios;
    let mut gen_train = Vec::new();
    let mut gen_val = Vec::new();
    for (tag, stream) in [(OriginTag::GenReal, 1u64), (OriginTag::GenRender, 2u64)] {
        let group = collect(tag);
        if group.is_empty() {
            continue;
        }
        let mut parts = partition(group, spec.seed, stream, &[gv]);
        let val = parts.pop().expect("gen val part");
        let train = parts.pop().expect("gen train part");
        gen_train.extend(train);
        gen_val.extend(val);
    }

    Ok(SplitSets {
        real_train,
        real_val,
        real_test,
        gen_train,
        gen_val,
        test_difficult: collect(OriginTag::RealDifficult),
        spec: *spec,
        inventory_hash: inventory.content_hash(),
    })
}

/// Split provenance embedded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub real_ratios: (f64, f64, f64),
    pub gen_ratios: (f64, f64),
    pub inventory_hash: String,
}

/// A resolved experiment: which files train, validate, and test a model.
/// Paths are relative to the inventory root; label files sit next to each
/// image with the extension replaced by `.txt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub strategy: StrategyId,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test_normal: Vec<String>,
    pub test_difficult: Vec<String>,
    pub provenance: Provenance,
}

fn paths_of(entries: &[ImageEntry]) -> Vec<String> {
    entries.iter().map(|e| e.path.to_string_lossy().into_owned()).collect()
}

/// Materialize one strategy from a split. Train/val pairing per the module
/// table; both test lists are the same for every strategy.
pub fn build_manifest(strategy: StrategyId, splits: &SplitSets) -> Result<ExperimentManifest, StrategyError> {
    let need = |entries: &[ImageEntry], group: &'static str| -> Result<(), StrategyError> {
        if entries.is_empty() {
            Err(StrategyError::MissingGroup { strategy, group })
        } else {
            Ok(())
        }
    };
    let (train, val) = match strategy {
        StrategyId::Rr => {
            need(&splits.real_train, "real-train")?;
            need(&splits.real_val, "real-val")?;
            (paths_of(&splits.real_train), paths_of(&splits.real_val))
        }
        StrategyId::Rg => {
            need(&splits.real_train, "real-train")?;
            need(&splits.gen_val, "gen-val")?;
            (paths_of(&splits.real_train), paths_of(&splits.gen_val))
        }
        StrategyId::Gg => {
            need(&splits.gen_train, "gen-train")?;
            need(&splits.gen_val, "gen-val")?;
            (paths_of(&splits.gen_train), paths_of(&splits.gen_val))
        }
        StrategyId::Gr => {
            need(&splits.gen_train, "gen-train")?;
            need(&splits.real_val, "real-val")?;
            (paths_of(&splits.gen_train), paths_of(&splits.real_val))
        }
        StrategyId::Mr => {
            need(&splits.real_train, "real-train")?;
            need(&splits.gen_train, "gen-train")?;
            need(&splits.real_val, "real-val")?;
            let mut train = paths_of(&splits.real_train);
            train.extend(paths_of(&splits.gen_train));
            (train, paths_of(&splits.real_val))
        }
    };

    let manifest = ExperimentManifest {
        strategy,
        train,
        val,
        test_normal: paths_of(&splits.real_test),
        test_difficult: paths_of(&splits.test_difficult),
        provenance: Provenance {
            seed: splits.spec.seed,
            real_ratios: splits.spec.real_ratios,
            gen_ratios: splits.spec.gen_ratios,
            inventory_hash: splits.inventory_hash.clone(),
        },
    };

    // Safety net: a leak here would invalidate every downstream score.
    let train_set: HashSet<&String> = manifest.train.iter().collect();
    let val_set: HashSet<&String> = manifest.val.iter().collect();
    for p in manifest.test_normal.iter().chain(&manifest.test_difficult) {
        if train_set.contains(p) || val_set.contains(p) {
            return Err(StrategyError::InvalidInventory {
                reason: format!("internal error: {p:?} leaked into a test set"),
            });
        }
    }
    if manifest.train.iter().any(|p| val_set.contains(p)) {
        return Err(StrategyError::InvalidInventory {
            reason: "internal error: train and val overlap".into(),
        });
    }
    Ok(manifest)
}

/// One problem found by [`verify_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: &'static str,
    pub path: String,
    pub detail: String,
}

/// Outcome of checking a manifest against the filesystem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub strategy: StrategyId,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// Re-check a manifest: disjointness of train/val against both test lists
/// (and train against val), image-file existence, and label-file
/// parsability. Failures are report entries, never errors.
pub fn verify_manifest(manifest: &ExperimentManifest, root: &Path) -> VerifyReport {
    let mut violations = Vec::new();

    let train: HashSet<&String> = manifest.train.iter().collect();
    let val: HashSet<&String> = manifest.val.iter().collect();
    for p in manifest.test_normal.iter().chain(&manifest.test_difficult) {
        if train.contains(p) {
            violations.push(Violation {
                kind: "leak",
                path: p.clone(),
                detail: "test image also appears in train".into(),
            });
        }
        if val.contains(p) {
            violations.push(Violation {
                kind: "leak",
                path: p.clone(),
                detail: "test image also appears in val".into(),
            });
        }
    }
    for p in &manifest.train {
        if val.contains(p) {
            violations.push(Violation {
                kind: "leak",
                path: p.clone(),
                detail: "image appears in both train and val".into(),
            });
        }
    }

    for list in [&manifest.train, &manifest.val, &manifest.test_normal, &manifest.test_difficult] {
        for p in list {
            let img = root.join(p);
            if !img.exists() {
                violations.push(Violation {
                    kind: "missing-image",
                    path: p.clone(),
                    detail: format!("{} not found", img.display()),
                });
                continue;
            }
            let label = img.with_extension("txt");
            if !label.exists() {
                violations.push(Violation {
                    kind: "missing-label",
                    path: p.clone(),
                    detail: format!("{} not found", label.display()),
                });
                continue;
            }
            let dims = image::image_dimensions(&img);
            let (w, h) = match dims {
                Ok(d) => d,
                Err(e) => {
                    violations.push(Violation {
                        kind: "bad-image",
                        path: p.clone(),
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            match std::fs::read_to_string(&label) {
                Ok(text) => {
                    if let Err(e) = parse_label_file(&text, w, h) {
                        violations.push(Violation { kind: "bad-label", path: p.clone(), detail: e.to_string() });
                    }
                }
                Err(e) => {
                    violations.push(Violation { kind: "bad-label", path: p.clone(), detail: e.to_string() });
                }
            }
        }
    }

    VerifyReport { strategy: manifest.strategy, pass: violations.is_empty(), violations }
}
