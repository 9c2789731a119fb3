//! detbench: build, split, augment, and evaluate semi-synthetic object-detection datasets.
//!
//! The crate is organized around a small set of self-contained modules:
//!
//! - [`annotation`] — normalized bounding boxes, label/detection file formats, IoU.
//! - [`compositor`] — paste sensor foregrounds onto backgrounds with seeded placement,
//!   adaptive brightness, and mask feathering, emitting auto-annotations.
//! - [`augment`] — six deterministic distortion kernels with per-kernel application
//!   probability.
//! - [`strategy`] — train/val/test splitting and the five experiment manifests
//!   (R-R, R-G, G-G, G-R, M-R), with leak verification.
//! - [`evaluator`] — mAP@0.5 with greedy matching, average/difference aggregation,
//!   and the model-selection rule.
//! - [`pipeline`] — a three-stage streaming harness (source → detector → sink) with
//!   latest-wins queues and per-stage latency accounting.
//! - [`cli`] — the `detbench` command-line entry point tying it all together.
//!
//! All randomness is driven by explicit 64-bit seeds (see [`seed`]); every operation
//! that consumes a seed is reproducible byte-for-byte across runs and machines given
//! identical input bytes.

pub mod annotation;
pub mod augment;
pub mod cli;
pub mod compositor;
pub mod evaluator;
pub mod pipeline;
pub mod raster;
pub mod seed;
pub mod strategy;
