//! Three-stage streaming inference harness: a frame source, a detector, and
//! a synchronizing sink, connected by bounded latest-wins queues.
//!
//! The shape mirrors a camera → detector → debug-consumer node graph. A
//! navigation consumer wants the freshest frame rather than a backlog, so
//! each inter-stage queue holds `capacity` frames (1 by default) and an
//! arriving frame evicts the oldest queued one when full; evictions are
//! counted as drops. For every run, `processed + dropped + failed` equals the
//! number of frames the source emitted.
//!
//! Detector backends are pluggable behind [`DetectorBackend`]: a
//! deterministic in-process stub for tests and benchmarks, and an external
//! command bridge (image path in; detection file + one-line timing file out)
//! for real model runtimes — the toolkit never links a model runtime.
//!
//! [`bench`] aggregates backend-reported per-phase timings into a
//! [`LatencyReport`]; the possible-FPS figure is always recomputed as
//! `1000 / mean-total-ms`, never stored.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{parse_detection_file, Detection};

pub const DEFAULT_INPUT_SIZE: (u32, u32) = (320, 320);
pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend i/o: {0}")]
    Io(String),
    #[error("backend timed out after {0:.1} s")]
    Timeout(f64),
    #[error("backend exited with status {0}")]
    NonzeroExit(String),
    #[error("backend output invalid: {0}")]
    BadOutput(String),
    #[error("injected failure for frame {0}")]
    Injected(u64),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("source emitted no frames")]
    EmptySource,
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("all {attempts} benchmark iterations failed")]
    AllIterationsFailed { attempts: usize },
    #[error("source: {0}")]
    Source(String),
}

/// One captured image plus its identity in the stream.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Strictly increasing per run.
    pub seq: u64,
    /// Monotonic capture time, nanoseconds since the source started.
    pub timestamp_ns: u64,
    pub image: RgbImage,
}

/// Wall-clock cost of the three detector phases, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocess_ms: f64,
    pub inference_ms: f64,
    pub postprocess_ms: f64,
}

impl StageTimings {
    pub fn new(preprocess_ms: f64, inference_ms: f64, postprocess_ms: f64) -> Self {
        Self { preprocess_ms, inference_ms, postprocess_ms }
    }

    pub const ZERO: StageTimings =
        StageTimings { preprocess_ms: 0.0, inference_ms: 0.0, postprocess_ms: 0.0 };

    pub fn total_ms(&self) -> f64 {
        self.preprocess_ms + self.inference_ms + self.postprocess_ms
    }

    pub fn is_valid(&self) -> bool {
        [self.preprocess_ms, self.inference_ms, self.postprocess_ms]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// What the detector stage emits for one frame.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionMessage {
    pub seq: u64,
    pub detections: Vec<Detection>,
    pub timings: StageTimings,
}

/// A detector implementation: consumes a frame (image + id), produces
/// detections plus per-phase timings measured around preprocess, inference,
/// and postprocess separately.
pub trait DetectorBackend: Send {
    /// The input resolution the detector expects (informational; backends
    /// handle their own resizing).
    fn input_size(&self) -> (u32, u32);

    fn detect(
        &mut self,
        frame: &Frame,
        input_size: (u32, u32),
    ) -> Result<(Vec<Detection>, StageTimings), BackendError>;
}

impl<B: DetectorBackend + ?Sized> DetectorBackend for Box<B> {
    fn input_size(&self) -> (u32, u32) {
        (**self).input_size()
    }

    fn detect(
        &mut self,
        frame: &Frame,
        input_size: (u32, u32),
    ) -> Result<(Vec<Detection>, StageTimings), BackendError> {
        (**self).detect(frame, input_size)
    }
}

/// Pull-based frame producer. `None` means the stream ended.
pub trait FrameSource: Send {
    fn next_frame(&mut self) -> Option<Frame>;
}

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

/// Streams the images of a directory in lexicographic filename order.
pub struct DirectorySource {
    files: VecDeque<PathBuf>,
    epoch: Instant,
    next_seq: u64,
}

impl DirectorySource {
    pub fn new(dir: &Path) -> Result<Self, PipelineError> {
        let rd = std::fs::read_dir(dir)
            .map_err(|e| PipelineError::Source(format!("{}: {e}", dir.display())))?;
        let mut files: Vec<PathBuf> = rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("png") | Some("jpg") | Some("jpeg")
                )
            })
            .collect();
        files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
        Ok(Self { files: files.into(), epoch: Instant::now(), next_seq: 0 })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for DirectorySource {
    fn next_frame(&mut self) -> Option<Frame> {
        loop {
            let path = self.files.pop_front()?;
            match image::open(&path) {
                Ok(img) => {
                    let frame = Frame {
                        seq: self.next_seq,
                        timestamp_ns: self.epoch.elapsed().as_nanos() as u64,
                        image: img.to_rgb8(),
                    };
                    self.next_seq += 1;
                    return Some(frame);
                }
                Err(_) => continue, // unreadable file: skip, keep streaming
            }
        }
    }
}

/// Emits `count` copies of a template image, optionally pacing them with a
/// fixed inter-frame interval. Deterministic; for tests and dry runs.
pub struct SyntheticSource {
    template: RgbImage,
    remaining: u64,
    next_seq: u64,
    interval: Option<Duration>,
    epoch: Instant,
}

impl SyntheticSource {
    pub fn new(template: RgbImage, count: u64, interval: Option<Duration>) -> Self {
        Self { template, remaining: count, next_seq: 0, interval, epoch: Instant::now() }
    }
}

impl FrameSource for SyntheticSource {
    fn next_frame(&mut self) -> Option<Frame> {
        if self.remaining == 0 {
            return None;
        }
        if let (Some(interval), true) = (self.interval, self.next_seq > 0) {
            std::thread::sleep(interval);
        }
        self.remaining -= 1;
        let frame = Frame {
            seq: self.next_seq,
            timestamp_ns: self.epoch.elapsed().as_nanos() as u64,
            image: self.template.clone(),
        };
        self.next_seq += 1;
        Some(frame)
    }
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Deterministic in-process test double. Replies with a fixed response, or a
/// per-sequence-id script (unscripted ids get empty detections and zero
/// timings). Optional artificial delay simulates a slow detector; optional
/// failure injection simulates a crashing one.
pub struct StubBackend {
    input_size: (u32, u32),
    fixed: Option<(Vec<Detection>, StageTimings)>,
    script: HashMap<u64, (Vec<Detection>, StageTimings)>,
    delay: Option<Duration>,
    fail_ids: HashSet<u64>,
}

impl StubBackend {
    /// Same detections + timings for every frame.
    pub fn fixed(detections: Vec<Detection>, timings: StageTimings) -> Self {
        Self {
            input_size: DEFAULT_INPUT_SIZE,
            fixed: Some((detections, timings)),
            script: HashMap::new(),
            delay: None,
            fail_ids: HashSet::new(),
        }
    }

    /// Per-sequence-id responses; ids missing from the script yield empty
    /// detections with zero timings.
    pub fn scripted(script: HashMap<u64, (Vec<Detection>, StageTimings)>) -> Self {
        Self {
            input_size: DEFAULT_INPUT_SIZE,
            fixed: None,
            script,
            delay: None,
            fail_ids: HashSet::new(),
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn with_input_size(mut self, size: (u32, u32)) -> Self {
        self.input_size = size;
        self
    }

    pub fn failing_on(mut self, ids: impl IntoIterator<Item = u64>) -> Self {
        self.fail_ids = ids.into_iter().collect();
        self
    }
}

impl DetectorBackend for StubBackend {
    fn input_size(&self) -> (u32, u32) {
        self.input_size
    }

    fn detect(
        &mut self,
        frame: &Frame,
        _input_size: (u32, u32),
    ) -> Result<(Vec<Detection>, StageTimings), BackendError> {
        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }
        if self.fail_ids.contains(&frame.seq) {
            return Err(BackendError::Injected(frame.seq));
        }
        if let Some(fixed) = &self.fixed {
            return Ok(fixed.clone());
        }
        Ok(self
            .script
            .get(&frame.seq)
            .cloned()
            .unwrap_or_else(|| (Vec::new(), StageTimings::ZERO)))
    }
}

/// Bridges to an external detector process per frame.
///
/// Protocol: the frame is written as a PNG, then the command runs with three
/// paths — the image to read, the detection file to write (detection text
/// format: `class cx cy w h confidence` per line; an empty file means no
/// detections), and the timing file to write (one ASCII line, three
/// space-separated millisecond numbers: `pre inf post`). Tokens containing
/// `{image}`, `{dets}`, or `{timing}` are substituted; a command with no
/// placeholders gets the three paths appended as arguments. Nonzero exit,
/// missing or unparsable outputs, and timeouts are frame failures.
pub struct ExternalBackend {
    argv: Vec<String>,
    workdir: PathBuf,
    _workdir_guard: Option<tempfile::TempDir>,
    timeout: Duration,
    input_size: (u32, u32),
}

/// The child process runs inside the scratch workdir, so a path-like command
/// (`./detector.sh`, `tools/run`) must be pinned to the launch directory up
/// front or it would silently resolve somewhere else. Bare names (`python3`)
/// are left for PATH lookup.
fn resolve_command(token: &str) -> String {
    let path = Path::new(token);
    if path.is_relative() && path.components().count() > 1 {
        if let Ok(abs) = std::path::absolute(path) {
            return abs.display().to_string();
        }
    }
    token.to_string()
}

impl ExternalBackend {
    pub fn new(mut argv: Vec<String>) -> Result<Self, BackendError> {
        if argv.is_empty() {
            return Err(BackendError::BadOutput("empty command".into()));
        }
        argv[0] = resolve_command(&argv[0]);
        let guard = tempfile::tempdir().map_err(|e| BackendError::Io(e.to_string()))?;
        Ok(Self {
            argv,
            workdir: guard.path().to_path_buf(),
            _workdir_guard: Some(guard),
            timeout: DEFAULT_EXTERNAL_TIMEOUT,
            input_size: DEFAULT_INPUT_SIZE,
        })
    }

    /// Use a caller-owned scratch directory instead of a self-cleaning one.
    /// Relative paths are pinned to the current directory so the protocol
    /// files stay addressable from both parent and child.
    pub fn with_workdir(mut self, dir: PathBuf) -> Result<Self, BackendError> {
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Io(e.to_string()))?;
        self.workdir = std::path::absolute(&dir).map_err(|e| BackendError::Io(e.to_string()))?;
        self._workdir_guard = None;
        Ok(self)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_input_size(mut self, size: (u32, u32)) -> Self {
        self.input_size = size;
        self
    }
}

/// Parse the one-line timing protocol: `pre_ms inf_ms post_ms`.
pub fn parse_timing_line(text: &str) -> Result<StageTimings, BackendError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(BackendError::BadOutput(format!(
            "timing line must hold 3 numbers, got {}: {text:?}",
            fields.len()
        )));
    }
    let mut vals = [0.0f64; 3];
    for (i, f) in fields.iter().enumerate() {
        vals[i] = f
            .parse::<f64>()
            .map_err(|_| BackendError::BadOutput(format!("bad timing number {f:?}")))?;
    }
    let t = StageTimings::new(vals[0], vals[1], vals[2]);
    if !t.is_valid() {
        return Err(BackendError::BadOutput(format!("negative or non-finite timing: {text:?}")));
    }
    Ok(t)
}

impl DetectorBackend for ExternalBackend {
    fn input_size(&self) -> (u32, u32) {
        self.input_size
    }

    fn detect(
        &mut self,
        frame: &Frame,
        _input_size: (u32, u32),
    ) -> Result<(Vec<Detection>, StageTimings), BackendError> {
        let stem = format!("frame_{:08}", frame.seq);
        let img_path = self.workdir.join(format!("{stem}.png"));
        let det_path = self.workdir.join(format!("{stem}.det.txt"));
        let timing_path = self.workdir.join(format!("{stem}.timing.txt"));
        for stale in [&det_path, &timing_path] {
            let _ = std::fs::remove_file(stale);
        }
        frame.image.save(&img_path).map_err(|e| BackendError::Io(e.to_string()))?;

        let substitutions = [
            ("{image}", img_path.display().to_string()),
            ("{dets}", det_path.display().to_string()),
            ("{timing}", timing_path.display().to_string()),
        ];
        let has_placeholder =
            self.argv.iter().any(|a| substitutions.iter().any(|(p, _)| a.contains(p)));
        let mut argv: Vec<String> = self
            .argv
            .iter()
            .map(|a| {
                let mut token = a.clone();
                for (pat, value) in &substitutions {
                    token = token.replace(pat, value);
                }
                token
            })
            .collect();
        if !has_placeholder {
            argv.push(img_path.display().to_string());
            argv.push(det_path.display().to_string());
            argv.push(timing_path.display().to_string());
        }

        let mut child = std::process::Command::new(&argv[0])
            .args(&argv[1..])
            .current_dir(&self.workdir)
            .spawn()
            .map_err(|e| BackendError::Io(format!("spawn {:?}: {e}", argv[0])))?;

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait().map_err(|e| BackendError::Io(e.to_string()))? {
                Some(status) => break status,
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(BackendError::Timeout(self.timeout.as_secs_f64()));
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        let cleanup = |paths: [&PathBuf; 3]| {
            for p in paths {
                let _ = std::fs::remove_file(p);
            }
        };
        if !status.success() {
            cleanup([&img_path, &det_path, &timing_path]);
            return Err(BackendError::NonzeroExit(status.to_string()));
        }

        let det_text = std::fs::read_to_string(&det_path)
            .map_err(|e| BackendError::BadOutput(format!("detection file: {e}")));
        let timing_text = std::fs::read_to_string(&timing_path)
            .map_err(|e| BackendError::BadOutput(format!("timing file: {e}")));
        cleanup([&img_path, &det_path, &timing_path]);
        let det_text = det_text?;
        let timing_text = timing_text?;

        let detections = parse_detection_file(&det_text, frame.image.width().max(1), frame.image.height().max(1))
            .map_err(|e| BackendError::BadOutput(format!("detection file: {e}")))?;
        let timings = parse_timing_line(&timing_text)?;
        Ok((detections, timings))
    }
}

// ---------------------------------------------------------------------------
// Latest-wins bounded queue
// ---------------------------------------------------------------------------

struct SlotState<T> {
    queue: VecDeque<T>,
    closed: bool,
    dropped: u64,
}

/// Bounded MPSC-ish channel with eviction: pushing onto a full queue evicts
/// the oldest element (counted as a drop) so consumers always see the
/// freshest frames. `close` lets the consumer drain what remains, then end.
struct Slot<T> {
    state: Mutex<SlotState<T>>,
    cond: Condvar,
    capacity: usize,
}

impl<T> Slot<T> {
    fn new(capacity: usize) -> Self {
        Self {
            state: Mutex::new(SlotState { queue: VecDeque::new(), closed: false, dropped: 0 }),
            cond: Condvar::new(),
            capacity,
        }
    }

    fn push(&self, value: T) {
        let mut state = self.state.lock().expect("slot lock");
        if state.closed {
            state.dropped += 1;
            return;
        }
        if state.queue.len() == self.capacity {
            state.queue.pop_front();
            state.dropped += 1;
        }
        state.queue.push_back(value);
        drop(state);
        self.cond.notify_one();
    }

    fn pop(&self) -> Option<T> {
        let mut state = self.state.lock().expect("slot lock");
        loop {
            if let Some(v) = state.queue.pop_front() {
                return Some(v);
            }
            if state.closed {
                return None;
            }
            state = self.cond.wait(state).expect("slot wait");
        }
    }

    fn close(&self) {
        let mut state = self.state.lock().expect("slot lock");
        state.closed = true;
        drop(state);
        self.cond.notify_all();
    }

    fn dropped(&self) -> u64 {
        self.state.lock().expect("slot lock").dropped
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Inter-stage queue capacity; an arriving frame evicts the oldest when
    /// full.
    pub queue_capacity: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { queue_capacity: 1 }
    }
}

/// Outcome accounting for one pipeline run. Always:
/// `processed + dropped + failed == frames_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    /// Frames the source emitted.
    pub frames_in: u64,
    /// Frames fully delivered to the sink.
    pub processed: u64,
    /// Frames evicted at either queue.
    pub dropped: u64,
    /// Frames the backend errored on.
    pub failed: u64,
}

/// Run the three stages concurrently: source feeds queue A, the detector
/// drains A and feeds queue B with (frame, message) pairs, the sink drains B.
/// Source exhaustion closes the queues downstream, flushing in-flight frames.
/// Backend failures are counted and skipped; the run keeps going.
pub fn run_pipeline<S, B, F>(
    mut source: S,
    mut backend: B,
    mut sink: F,
    options: &RunOptions,
) -> Result<RunSummary, PipelineError>
where
    S: FrameSource,
    B: DetectorBackend,
    F: FnMut(&Frame, &DetectionMessage) + Send,
{
    if options.queue_capacity == 0 {
        return Err(PipelineError::InvalidOptions("queue_capacity must be >= 1".into()));
    }
    let slot_a: Slot<Frame> = Slot::new(options.queue_capacity);
    let slot_b: Slot<(Frame, DetectionMessage)> = Slot::new(options.queue_capacity);

    let mut frames_in = 0u64;
    let mut failed = 0u64;
    let mut processed = 0u64;

    std::thread::scope(|scope| {
        let slot_a_ref = &slot_a;
        let slot_b_ref = &slot_b;

        let source_thread = scope.spawn({
            let frames_in = &mut frames_in;
            move || {
                while let Some(frame) = source.next_frame() {
                    *frames_in += 1;
                    slot_a_ref.push(frame);
                }
                slot_a_ref.close();
            }
        });

        let detect_thread = scope.spawn({
            let failed = &mut failed;
            move || {
                let input_size = backend.input_size();
                while let Some(frame) = slot_a_ref.pop() {
                    match backend.detect(&frame, input_size) {
                        Ok((detections, timings)) => {
                            let msg = DetectionMessage { seq: frame.seq, detections, timings };
                            slot_b_ref.push((frame, msg));
                        }
                        Err(_) => *failed += 1,
                    }
                }
                slot_b_ref.close();
            }
        });

        let sink_thread = scope.spawn({
            let processed = &mut processed;
            move || {
                while let Some((frame, msg)) = slot_b_ref.pop() {
                    debug_assert_eq!(frame.seq, msg.seq);
                    sink(&frame, &msg);
                    *processed += 1;
                }
            }
        });

        source_thread.join().expect("source stage panicked");
        detect_thread.join().expect("detector stage panicked");
        sink_thread.join().expect("sink stage panicked");
    });

    if frames_in == 0 {
        return Err(PipelineError::EmptySource);
    }
    Ok(RunSummary { frames_in, processed, dropped: slot_a.dropped() + slot_b.dropped(), failed })
}

/// Single-threaded equivalent of [`run_pipeline`]: steps the stages in order
/// per frame, so nothing is ever dropped. Accounting is identical otherwise.
pub fn run_pipeline_sync<S, B, F>(
    mut source: S,
    mut backend: B,
    mut sink: F,
) -> Result<RunSummary, PipelineError>
where
    S: FrameSource,
    B: DetectorBackend,
    F: FnMut(&Frame, &DetectionMessage),
{
    let input_size = backend.input_size();
    let mut summary = RunSummary { frames_in: 0, processed: 0, dropped: 0, failed: 0 };
    while let Some(frame) = source.next_frame() {
        summary.frames_in += 1;
        match backend.detect(&frame, input_size) {
            Ok((detections, timings)) => {
                let msg = DetectionMessage { seq: frame.seq, detections, timings };
                sink(&frame, &msg);
                summary.processed += 1;
            }
            Err(_) => summary.failed += 1,
        }
    }
    if summary.frames_in == 0 {
        return Err(PipelineError::EmptySource);
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Benchmarking
// ---------------------------------------------------------------------------

/// Mean / median / min / max over one timing series, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn stage_stats(values: &[f64]) -> StageStats {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite timing"));
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    StageStats {
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

/// Latency statistics over the recorded (post-warmup) iterations of a
/// [`bench`] run. `total` aggregates per-frame totals (pre + inf + post).
/// The possible-FPS figure is derived on demand — see [`LatencyReport::possible_fps`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub preprocess: StageStats,
    pub inference: StageStats,
    pub postprocess: StageStats,
    pub total: StageStats,
    pub frames: usize,
    pub warmup_excluded: usize,
    pub warnings: Vec<String>,
}

impl LatencyReport {
    /// `1000 / mean-total-ms`; infinite when the mean total is zero (the
    /// degenerate all-zero-timings case, which also carries a warning).
    pub fn possible_fps(&self) -> f64 {
        if self.total.mean <= 0.0 {
            f64::INFINITY
        } else {
            1000.0 / self.total.mean
        }
    }

    /// FPS at the three-decimal precision used in latency tables
    /// (round-half-even, e.g. `6.365`); `"inf"` for the degenerate case.
    pub fn fps_display(&self) -> String {
        let fps = self.possible_fps();
        if fps.is_finite() {
            format!("{fps:.3}")
        } else {
            "inf".to_string()
        }
    }
}

#[derive(Serialize)]
struct LatencyReportWire<'a> {
    preprocess: &'a StageStats,
    inference: &'a StageStats,
    postprocess: &'a StageStats,
    total: &'a StageStats,
    frames: usize,
    warmup_excluded: usize,
    /// `null` when infinite (all-zero timings).
    possible_fps: Option<f64>,
    possible_fps_display: String,
    warnings: &'a [String],
}

impl Serialize for LatencyReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let fps = self.possible_fps();
        LatencyReportWire {
            preprocess: &self.preprocess,
            inference: &self.inference,
            postprocess: &self.postprocess,
            total: &self.total,
            frames: self.frames,
            warmup_excluded: self.warmup_excluded,
            possible_fps: fps.is_finite().then_some(fps),
            possible_fps_display: self.fps_display(),
            warnings: &self.warnings,
        }
        .serialize(serializer)
    }
}

/// Time a backend over an image set: `warmup_n` unrecorded calls, then
/// `iterations` recorded calls cycling the set. Failed iterations are noted
/// as warnings and excluded; every iteration failing is an error.
pub fn bench(
    backend: &mut dyn DetectorBackend,
    images: &[RgbImage],
    warmup_n: usize,
    iterations: usize,
) -> Result<LatencyReport, PipelineError> {
    if iterations == 0 {
        return Err(PipelineError::InvalidOptions("iterations must be >= 1".into()));
    }
    if images.is_empty() {
        return Err(PipelineError::InvalidOptions("image set is empty".into()));
    }
    let input_size = backend.input_size();
    let epoch = Instant::now();
    let mut seq = 0u64;
    let mut frame_for = |img: &RgbImage| {
        let f = Frame { seq, timestamp_ns: epoch.elapsed().as_nanos() as u64, image: img.clone() };
        seq += 1;
        f
    };

    for i in 0..warmup_n {
        let frame = frame_for(&images[i % images.len()]);
        let _ = backend.detect(&frame, input_size);
    }

    let mut warnings = Vec::new();
    let mut recorded: Vec<StageTimings> = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let frame = frame_for(&images[i % images.len()]);
        match backend.detect(&frame, input_size) {
            Ok((_, timings)) if timings.is_valid() => recorded.push(timings),
            Ok((_, timings)) => {
                warnings.push(format!("iteration {i}: invalid timings {timings:?}; excluded"))
            }
            Err(e) => warnings.push(format!("iteration {i} failed: {e}")),
        }
    }
    if recorded.is_empty() {
        return Err(PipelineError::AllIterationsFailed { attempts: iterations });
    }

    let series = |f: fn(&StageTimings) -> f64| -> Vec<f64> { recorded.iter().map(f).collect() };
    let totals: Vec<f64> = recorded.iter().map(StageTimings::total_ms).collect();
    let total = stage_stats(&totals);
    if total.mean <= 0.0 {
        warnings.push("mean total latency is zero; possible FPS reported as infinite".to_string());
    }
    Ok(LatencyReport {
        preprocess: stage_stats(&series(|t| t.preprocess_ms)),
        inference: stage_stats(&series(|t| t.inference_ms)),
        postprocess: stage_stats(&series(|t| t.postprocess_ms)),
        total,
        frames: recorded.len(),
        warmup_excluded: warmup_n,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::BoundingBox;

    fn tiny_image() -> RgbImage {
        RgbImage::from_pixel(8, 8, image::Rgb([120, 130, 140]))
    }

    fn det(conf: f64) -> Detection {
        Detection {
            class_id: 0,
            bbox: BoundingBox::new(0.5, 0.25, 0.2, 0.2).unwrap(),
            confidence: conf,
        }
    }

    #[test]
    fn unpaced_source_accounting_balances_and_flushes_tail() {
        // An unthrottled source may outrun the detector; evictions are the
        // intended latest-wins behavior. What must hold: the books balance,
        // ordering is monotone, and the in-flight tail is flushed at shutdown.
        let source = SyntheticSource::new(tiny_image(), 10, None);
        let backend = StubBackend::fixed(vec![det(0.9)], StageTimings::new(1.0, 5.0, 1.0));
        let mut seqs = Vec::new();
        let summary = run_pipeline(
            source,
            backend,
            |frame, msg| {
                assert_eq!(frame.seq, msg.seq);
                seqs.push(msg.seq);
            },
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(summary.frames_in, 10);
        assert_eq!(summary.processed + summary.dropped + summary.failed, 10);
        assert_eq!(summary.failed, 0);
        assert_eq!(summary.processed, seqs.len() as u64);
        assert!(seqs.windows(2).all(|w| w[0] < w[1]), "ordering broken: {seqs:?}");
        assert_eq!(*seqs.last().unwrap(), 9, "final frame must be flushed");
    }

    #[test]
    fn slow_backend_drops_but_accounting_balances() {
        let source = SyntheticSource::new(tiny_image(), 100, Some(Duration::from_millis(1)));
        let backend = StubBackend::fixed(vec![], StageTimings::ZERO).with_delay(Duration::from_millis(6));
        let mut seqs = Vec::new();
        let summary =
            run_pipeline(source, backend, |_, msg| seqs.push(msg.seq), &RunOptions::default()).unwrap();
        assert_eq!(summary.frames_in, 100);
        assert_eq!(summary.processed + summary.dropped + summary.failed, 100);
        assert!(summary.dropped > 0, "expected backpressure drops, got {summary:?}");
        assert!(seqs.windows(2).all(|w| w[0] < w[1]), "sink ordering broken: {seqs:?}");
        // the in-flight tail is flushed on shutdown: the last frame always lands
        assert_eq!(*seqs.last().unwrap(), 99);
    }

    #[test]
    fn backend_failures_are_counted_and_skipped() {
        // Sync driver: every frame reaches the detector, so failure counts
        // are exact and the run keeps going past them.
        let source = SyntheticSource::new(tiny_image(), 10, None);
        let backend =
            StubBackend::fixed(vec![], StageTimings::ZERO).failing_on([2u64, 5, 7]);
        let summary = run_pipeline_sync(source, backend, |_, _| {}).unwrap();
        assert_eq!(summary.failed, 3);
        assert_eq!(summary.processed, 7);
        assert_eq!(summary.processed + summary.dropped + summary.failed, 10);
    }

    #[test]
    fn empty_source_is_an_error() {
        let source = SyntheticSource::new(tiny_image(), 0, None);
        let backend = StubBackend::fixed(vec![], StageTimings::ZERO);
        assert!(matches!(
            run_pipeline(source, backend, |_, _| {}, &RunOptions::default()),
            Err(PipelineError::EmptySource)
        ));
    }

    #[test]
    fn sync_driver_matches_concurrent_accounting_without_drops() {
        let source = SyntheticSource::new(tiny_image(), 25, None);
        let backend = StubBackend::fixed(vec![det(0.5)], StageTimings::new(1.0, 2.0, 3.0))
            .failing_on([4u64]);
        let mut count = 0u64;
        let summary = run_pipeline_sync(source, backend, |_, msg| {
            assert_eq!(msg.timings.total_ms(), 6.0);
            count += 1;
        })
        .unwrap();
        assert_eq!(summary.frames_in, 25);
        assert_eq!(summary.processed, 24);
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.dropped, 0);
        assert_eq!(count, 24);
    }

    #[test]
    fn scripted_stub_replays_exactly() {
        let mut script = HashMap::new();
        script.insert(3u64, (vec![det(0.8)], StageTimings::new(1.0, 5.0, 1.0)));
        let mut backend = StubBackend::scripted(script);
        let epoch = Instant::now();
        let frame = |seq: u64| Frame {
            seq,
            timestamp_ns: epoch.elapsed().as_nanos() as u64,
            image: tiny_image(),
        };
        let (d3, t3) = backend.detect(&frame(3), (320, 320)).unwrap();
        assert_eq!(d3.len(), 1);
        assert_eq!(t3, StageTimings::new(1.0, 5.0, 1.0));
        let (d4, t4) = backend.detect(&frame(4), (320, 320)).unwrap();
        assert!(d4.is_empty());
        assert_eq!(t4, StageTimings::ZERO);
        let (d3b, _) = backend.detect(&frame(3), (320, 320)).unwrap();
        assert_eq!(d3.len(), d3b.len());
    }

    #[test]
    fn bench_reproduces_latency_table_arithmetic() {
        let mut backend = StubBackend::fixed(vec![], StageTimings::new(3.1, 153.5, 0.5));
        let report = bench(&mut backend, &[tiny_image()], 2, 20).unwrap();
        assert!((report.total.mean - 157.1).abs() < 1e-9);
        assert_eq!(report.fps_display(), "6.365");
        assert_eq!(report.frames, 20);
        assert_eq!(report.warmup_excluded, 2);

        let mut backend = StubBackend::fixed(vec![], StageTimings::new(9.8, 597.5, 2.1));
        let report = bench(&mut backend, &[tiny_image()], 0, 5).unwrap();
        assert!((report.total.mean - 609.4).abs() < 1e-9);
        let fps = report.possible_fps();
        assert!((fps - 1.640).abs() <= 0.001, "fps {fps}");
        assert_eq!(report.fps_display(), "1.641");
    }

    #[test]
    fn bench_zero_timings_yields_infinite_fps_with_warning() {
        let mut backend = StubBackend::fixed(vec![], StageTimings::ZERO);
        let report = bench(&mut backend, &[tiny_image()], 0, 3).unwrap();
        assert!(report.possible_fps().is_infinite());
        assert_eq!(report.fps_display(), "inf");
        assert!(report.warnings.iter().any(|w| w.contains("infinite")));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"possible_fps\":null"));
    }

    #[test]
    fn bench_validates_options_and_failures() {
        let mut backend = StubBackend::fixed(vec![], StageTimings::ZERO);
        assert!(matches!(
            bench(&mut backend, &[tiny_image()], 0, 0),
            Err(PipelineError::InvalidOptions(_))
        ));
        assert!(matches!(
            bench(&mut backend, &[], 0, 5),
            Err(PipelineError::InvalidOptions(_))
        ));
        let mut failing = StubBackend::fixed(vec![], StageTimings::ZERO).failing_on(0u64..100);
        assert!(matches!(
            bench(&mut failing, &[tiny_image()], 0, 5),
            Err(PipelineError::AllIterationsFailed { attempts: 5 })
        ));
    }

    #[test]
    fn bench_accounting_identity_and_fps_identity() {
        let mut backend = StubBackend::fixed(vec![], StageTimings::new(1.5, 20.25, 0.75));
        let report = bench(&mut backend, &[tiny_image()], 1, 7).unwrap();
        let total = report.preprocess.mean + report.inference.mean + report.postprocess.mean;
        assert!((report.total.mean - total).abs() < 1e-9);
        let fps = report.possible_fps();
        assert!((fps - 1000.0 / report.total.mean).abs() / fps < 1e-6);
    }

    #[test]
    fn stage_stats_median_even_and_odd() {
        let s = stage_stats(&[3.0, 1.0, 2.0]);
        assert_eq!((s.median, s.min, s.max), (2.0, 1.0, 3.0));
        let s = stage_stats(&[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
    }

    #[test]
    fn timing_line_parses_published_row() {
        let t = parse_timing_line("3.1 153.5 0.5").unwrap();
        assert_eq!(t, StageTimings::new(3.1, 153.5, 0.5));
        assert!(parse_timing_line("1.0 2.0").is_err());
        assert!(parse_timing_line("a b c").is_err());
        assert!(parse_timing_line("-1 2 3").is_err());
    }

    #[test]
    fn directory_source_streams_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.png", "c.png"] {
            tiny_image().save(dir.path().join(name)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let mut source = DirectorySource::new(dir.path()).unwrap();
        assert_eq!(source.len(), 3);
        let mut seqs = Vec::new();
        while let Some(f) = source.next_frame() {
            seqs.push(f.seq);
        }
        assert_eq!(seqs, vec![0, 1, 2]);
    }

    #[cfg(unix)]
    #[test]
    fn external_backend_round_trips_canned_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fake_detector.sh");
        std::fs::write(
            &script,
            "#!/bin/sh\n\
             printf '0 0.500000 0.250000 0.200000 0.200000 0.900000' > \"$2\"\n\
             printf '3.1 153.5 0.5' > \"$3\"\n",
        )
        .unwrap();
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

        let mut backend = ExternalBackend::new(vec![script.display().to_string()]).unwrap();
        let frame = Frame { seq: 0, timestamp_ns: 0, image: tiny_image() };
        let (dets, timings) = backend.detect(&frame, (320, 320)).unwrap();
        assert_eq!(dets.len(), 1);
        assert!((dets[0].confidence - 0.9).abs() < 1e-9);
        assert_eq!(timings, StageTimings::new(3.1, 153.5, 0.5));
    }

    #[test]
    fn resolve_command_pins_path_like_tokens_only() {
        // Bare names stay untouched for PATH lookup.
        assert_eq!(resolve_command("python3"), "python3");
        // Absolute paths stay untouched.
        let abs = if cfg!(unix) { "/usr/bin/env" } else { "C:\\tool.exe" };
        assert_eq!(resolve_command(abs), abs);
        // Relative path-like commands become absolute against the launch
        // directory (the child itself runs in the scratch workdir).
        let resolved = PathBuf::from(resolve_command("./detector.sh"));
        assert!(resolved.is_absolute(), "{resolved:?}");
        assert!(resolved.ends_with("detector.sh"));
        let nested = PathBuf::from(resolve_command("tools/run.sh"));
        assert!(nested.is_absolute(), "{nested:?}");
    }

    #[cfg(unix)]
    #[test]
    fn external_backend_runs_a_relative_path_command() {
        // Regression: the child runs with the scratch dir as its cwd, so a
        // command addressed relative to the launch directory used to fail to
        // spawn. The script is created so that this literal relative path is
        // valid from the test's own cwd.
        let cwd = std::env::current_dir().unwrap();
        let scratch_abs = cwd.join("../../target/rel-cmd-test");
        std::fs::create_dir_all(&scratch_abs).unwrap();
        let name = format!("rel_detector_{}.sh", std::process::id());
        let script_abs = scratch_abs.join(&name);
        std::fs::write(&script_abs, "#!/bin/sh\nprintf '' > \"$2\"\nprintf '1.0 2.0 3.0' > \"$3\"\n")
            .unwrap();
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script_abs, std::fs::Permissions::from_mode(0o755)).unwrap();

        let rel = format!("../../target/rel-cmd-test/{name}");
        let mut backend = ExternalBackend::new(vec![rel]).unwrap();
        let frame = Frame { seq: 0, timestamp_ns: 0, image: tiny_image() };
        let result = backend.detect(&frame, (320, 320));
        let _ = std::fs::remove_file(&script_abs);
        let (dets, timings) = result.unwrap();
        assert!(dets.is_empty());
        assert_eq!(timings, StageTimings::new(1.0, 2.0, 3.0));
    }

    #[cfg(unix)]
    #[test]
    fn external_backend_nonzero_exit_is_frame_failure() {
        let mut backend = ExternalBackend::new(vec!["false".to_string()]).unwrap();
        let frame = Frame { seq: 0, timestamp_ns: 0, image: tiny_image() };
        assert!(matches!(
            backend.detect(&frame, (320, 320)),
            Err(BackendError::NonzeroExit(_))
        ));
    }

    #[cfg(unix)]
    #[test]
    fn external_backend_timeout_kills_and_fails() {
        // The {image} placeholder keeps the protocol paths out of sleep's
        // argument list (they would make it exit 1 instead of sleeping).
        let argv = vec!["sh".to_string(), "-c".to_string(), "sleep 5 # {image}".to_string()];
        let mut backend = ExternalBackend::new(argv)
            .unwrap()
            .with_timeout(Duration::from_millis(100));
        let frame = Frame { seq: 0, timestamp_ns: 0, image: tiny_image() };
        let start = Instant::now();
        assert!(matches!(backend.detect(&frame, (320, 320)), Err(BackendError::Timeout(_))));
        assert!(start.elapsed() < Duration::from_secs(3));
    }
}
