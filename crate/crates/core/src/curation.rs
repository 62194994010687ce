//! Turns per-frame polygon annotations of text instances into single-object
//! tracking samples.
//!
//! Each instance's annotations are sorted by frame, cut wherever a frame is
//! missing, short pieces are dropped, polygons become enclosing boxes, and
//! every surviving piece is written as its own re-indexed sample:
//!
//! ```text
//! <out>/<video>-<instance>-<split>/groundtruth.txt   # x,y,w,h per frame
//! <out>/<video>-<instance>-<split>/frames.map        # <new index> <video>/<frame>.<ext>
//! ```
//!
//! Input is one JSON object per line:
//! `{"video_id": "v1", "frame_id": 3, "instance_id": "A", "polygon": [[x, y], ...]}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bbox::{boxes_from_text, boxes_to_text, BBox};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_LENGTH: usize = 5;
pub const GROUNDTRUTH_FILE: &str = "groundtruth.txt";
pub const FRAMES_MAP_FILE: &str = "frames.map";

#[derive(Debug, Clone, PartialEq)]
pub struct VtsAnnotation {
    pub video_id: String,
    pub frame_id: u32,
    pub instance_id: String,
    pub polygon: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based input line.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedAnnotations {
    pub annotations: Vec<VtsAnnotation>,
    pub rejects: Vec<Reject>,
}

impl ParsedAnnotations {
    /// Fails with every reject listed when any record was malformed.
    pub fn into_valid(self) -> Result<Vec<VtsAnnotation>> {
        if self.rejects.is_empty() {
            return Ok(self.annotations);
        }
        let details = self
            .rejects
            .iter()
            .map(|r| format!("line {}: {}", r.line, r.reason))
            .collect::<Vec<_>>()
            .join("\n");
        Err(Error::Schema {
            count: self.rejects.len(),
            details,
        })
    }
}

pub(crate) fn id_field(obj: &serde_json::Map<String, Value>, key: &str) -> std::result::Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::Number(n)) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
        Some(_) => Err(format!("field `{key}` must be a non-empty string or integer")),
        None => Err(format!("missing field `{key}`")),
    }
}

pub(crate) fn frame_field(obj: &serde_json::Map<String, Value>, key: &str) -> std::result::Result<u32, String> {
    match obj.get(key).and_then(Value::as_u64) {
        Some(f) if f >= 1 && f <= u64::from(u32::MAX) => Ok(f as u32),
        Some(_) => Err(format!("`{key}` must be a positive integer")),
        None => Err(format!("missing or non-integer `{key}`")),
    }
}

pub(crate) fn polygon_field(value: &Value) -> std::result::Result<Vec<(f64, f64)>, String> {
    let points = value.as_array().ok_or("`polygon` must be an array of [x, y] pairs")?;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let xy = p
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
            .ok_or("polygon vertices must be [x, y] number pairs")?;
        out.push(xy);
    }
    if out.len() < 3 {
        return Err("degenerate polygon".into());
    }
    Ok(out)
}

fn parse_record(line: &str) -> std::result::Result<VtsAnnotation, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("record must be a JSON object")?;
    let polygon = polygon_field(obj.get("polygon").ok_or("missing field `polygon`")?)?;
    Ok(VtsAnnotation {
        video_id: id_field(obj, "video_id")?,
        frame_id: frame_field(obj, "frame_id")?,
        instance_id: id_field(obj, "instance_id")?,
        polygon,
    })
}

/// Parses annotation lines; blank lines are ignored and malformed records
/// are collected with their reason instead of being dropped.
pub fn parse_annotations(input: &str) -> ParsedAnnotations {
    let mut out = ParsedAnnotations::default();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(a) => out.annotations.push(a),
            Err(reason) => out.rejects.push(Reject { line: i + 1, reason }),
        }
    }
    out
}

/// Groups one video's annotations by instance, each group sorted by frame.
pub fn group_and_sort(anns: Vec<VtsAnnotation>) -> Result<BTreeMap<String, Vec<VtsAnnotation>>> {
    let mut groups: BTreeMap<String, Vec<VtsAnnotation>> = BTreeMap::new();
    for a in anns {
        groups.entry(a.instance_id.clone()).or_default().push(a);
    }
    for (id, group) in &mut groups {
        group.sort_by_key(|a| a.frame_id);
        if let Some(w) = group.windows(2).find(|w| w[0].frame_id == w[1].frame_id) {
            return Err(Error::DuplicateAnnotation {
                instance: id.clone(),
                frame: w[0].frame_id,
            });
        }
    }
    Ok(groups)
}

/// Cuts a strictly increasing frame sequence wherever consecutive ids differ by more than one.
pub fn split_continuity<T: Clone>(sorted: &[(u32, T)]) -> Vec<Vec<(u32, T)>> {
    let mut segments: Vec<Vec<(u32, T)>> = Vec::new();
    for item in sorted {
        match segments.last_mut() {
            Some(seg) if seg.last().is_some_and(|(f, _)| f + 1 == item.0) => seg.push(item.clone()),
            _ => segments.push(vec![item.clone()]),
        }
    }
    segments
}

/// Keeps segments with at least `min_length` frames, tagged with their
/// position in the input. Returns the kept segments and the discard count.
pub fn filter_min_length<T>(segments: Vec<Vec<T>>, min_length: usize) -> (Vec<(usize, Vec<T>)>, usize) {
    let total = segments.len();
    let kept: Vec<_> = segments
        .into_iter()
        .enumerate()
        .filter(|(_, s)| s.len() >= min_length)
        .collect();
    let discarded = total - kept.len();
    (kept, discarded)
}

/// Minimal enclosing axis-aligned box.
pub fn polygon_to_bbox(polygon: &[(f64, f64)]) -> Result<BBox> {
    if polygon.len() < 3 {
        return Err(Error::InvalidArgument("degenerate polygon".into()));
    }
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in polygon {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    Ok(BBox::new(x0, y0, x1 - x0, y1 - y0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkMode {
    /// Write `frames.map` only.
    #[default]
    RelativeManifest,
    /// Also copy the referenced images under `img/`.
    Copy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub min_length: usize,
    pub output_root: PathBuf,
    pub link_mode: LinkMode,
    /// Replace existing sample directories instead of failing.
    pub force: bool,
    /// Where source frames live (`<image_root>/<video>/<frame:06>.<ext>`); needed for copy mode.
    pub image_root: Option<PathBuf>,
    pub image_ext: String,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            min_length: DEFAULT_MIN_LENGTH,
            output_root: PathBuf::from("sot"),
            link_mode: LinkMode::RelativeManifest,
            force: false,
            image_root: None,
            image_ext: "jpg".into(),
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_length < 1 {
            return Err(Error::InvalidArgument("min_length must be at least 1".into()));
        }
        if self.link_mode == LinkMode::Copy && self.image_root.is_none() {
            return Err(Error::InvalidArgument("copy mode needs image_root".into()));
        }
        Ok(())
    }
}

/// A gap-free run of one instance's boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub source_video: String,
    pub instance_id: String,
    pub split_index: usize,
    pub frames: Vec<(u32, BBox)>,
}

impl Tracklet {
    pub fn name(&self) -> String {
        format!("{}-{}-{}", self.source_video, self.instance_id, self.split_index)
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.frames.iter().map(|(_, b)| *b).collect()
    }

    pub fn frame_ids(&self) -> Vec<u32> {
        self.frames.iter().map(|(f, _)| *f).collect()
    }
}

/// Relative path of an original frame image.
pub fn frame_path(video: &str, frame: u32, ext: &str) -> String {
    format!("{video}/{frame:06}.{ext}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedSample {
    pub dir: PathBuf,
    pub frames: usize,
}

pub fn emit_sot_sample(tracklet: &Tracklet, cfg: &CurationConfig) -> Result<EmittedSample> {
    let dir = cfg.output_root.join(tracklet.name());
    if dir.exists() {
        if !cfg.force {
            return Err(Error::Collision(dir));
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let gt = boxes_to_text(&tracklet.boxes());
    let mut map = String::new();
    for (i, (frame, _)) in tracklet.frames.iter().enumerate() {
        let _ = writeln!(map, "{} {}", i + 1, frame_path(&tracklet.source_video, *frame, &cfg.image_ext));
    }
    let gt_path = dir.join(GROUNDTRUTH_FILE);
    fs::write(&gt_path, gt).map_err(|e| Error::io(&gt_path, e))?;
    let map_path = dir.join(FRAMES_MAP_FILE);
    fs::write(&map_path, map).map_err(|e| Error::io(&map_path, e))?;

    if cfg.link_mode == LinkMode::Copy {
        let root = cfg
            .image_root
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("copy mode needs image_root".into()))?;
        let img = dir.join("img");
        fs::create_dir_all(&img).map_err(|e| Error::io(&img, e))?;
        for (i, (frame, _)) in tracklet.frames.iter().enumerate() {
            let src = root.join(frame_path(&tracklet.source_video, *frame, &cfg.image_ext));
            let dst = img.join(format!("{:06}.{}", i + 1, cfg.image_ext));
            fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
        }
    }
    Ok(EmittedSample {
        dir,
        frames: tracklet.frames.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CurationSummary {
    pub videos: usize,
    pub instances: usize,
    pub segments: usize,
    pub tracklets: usize,
    pub discarded: usize,
    /// Emitted boxes with zero width or height.
    pub warnings: usize,
}

impl CurationSummary {
    pub fn to_kv(&self) -> String {
        format!(
            "videos={}\ninstances={}\nsegments={}\ntracklets={}\ndiscarded={}\nwarnings={}\n",
            self.videos, self.instances, self.segments, self.tracklets, self.discarded, self.warnings
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurationReport {
    pub summary: CurationSummary,
    pub tracklets: Vec<Tracklet>,
    /// Human-readable notes about degenerate boxes.
    pub warnings: Vec<String>,
}

/// Builds tracklets without touching the filesystem.
pub fn build_tracklets(anns: Vec<VtsAnnotation>, min_length: usize) -> Result<CurationReport> {
    let mut by_video: BTreeMap<String, Vec<VtsAnnotation>> = BTreeMap::new();
    for a in anns {
        by_video.entry(a.video_id.clone()).or_default().push(a);
    }
    let mut report = CurationReport::default();
    report.summary.videos = by_video.len();
    for (video, anns) in by_video {
        let groups = group_and_sort(anns)?;
        report.summary.instances += groups.len();
        for (instance, group) in groups {
            let frames = group
                .iter()
                .map(|a| Ok((a.frame_id, polygon_to_bbox(&a.polygon)?)))
                .collect::<Result<Vec<_>>>()?;
            let segments = split_continuity(&frames);
            report.summary.segments += segments.len();
            let (kept, discarded) = filter_min_length(segments, min_length);
            report.summary.discarded += discarded;
            for (split_index, frames) in kept {
                let t = Tracklet {
                    source_video: video.clone(),
                    instance_id: instance.clone(),
                    split_index,
                    frames,
                };
                for (f, b) in &t.frames {
                    if b.is_degenerate() {
                        report.summary.warnings += 1;
                        report
                            .warnings
                            .push(format!("{}: frame {f} has a zero-area box {b}", t.name()));
                    }
                }
                report.tracklets.push(t);
            }
        }
    }
    report.summary.tracklets = report.tracklets.len();
    Ok(report)
}

/// Parses, groups, splits, filters and writes every sample.
pub fn curate(input: &str, cfg: &CurationConfig) -> Result<CurationReport> {
    cfg.validate()?;
    let anns = parse_annotations(input).into_valid()?;
    let report = build_tracklets(anns, cfg.min_length)?;
    if !report.tracklets.is_empty() {
        fs::create_dir_all(&cfg.output_root).map_err(|e| Error::io(&cfg.output_root, e))?;
    }
    for t in &report.tracklets {
        emit_sot_sample(t, cfg)?;
    }
    Ok(report)
}

pub fn curate_file(path: &Path, cfg: &CurationConfig) -> Result<CurationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    curate(&text, cfg)
}

/// A curated sample read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SotSample {
    pub name: String,
    pub video: String,
    pub frame_ids: Vec<u32>,
    pub boxes: Vec<BBox>,
}

fn parse_map_line(line: &str, location: &dyn Fn() -> String) -> Result<(String, u32)> {
    let bad = |m: &str| Error::Parse {
        location: location(),
        message: m.to_string(),
    };
    let (_, path) = line.split_once(' ').ok_or_else(|| bad("expected `<index> <path>`"))?;
    let (video, file) = path.rsplit_once('/').ok_or_else(|| bad("frame path lacks a video directory"))?;
    let stem = file.split('.').next().unwrap_or(file);
    let frame = stem.parse().map_err(|_| bad("frame file name is not a frame number"))?;
    Ok((video.to_string(), frame))
}

pub fn load_sot_sample(dir: &Path) -> Result<SotSample> {
    let gt_path = dir.join(GROUNDTRUTH_FILE);
    let gt = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let boxes = boxes_from_text(&gt)?;
    let map_path = dir.join(FRAMES_MAP_FILE);
    let map = fs::read_to_string(&map_path).map_err(|e| Error::io(&map_path, e))?;
    let mut video = String::new();
    let mut frame_ids = Vec::new();
    for (i, line) in map.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let loc = || format!("{}:{}", map_path.display(), i + 1);
        let (v, f) = parse_map_line(line, &loc)?;
        video = v;
        frame_ids.push(f);
    }
    if frame_ids.len() != boxes.len() {
        return Err(Error::LengthMismatch {
            name: dir.display().to_string(),
            left: boxes.len(),
            right: frame_ids.len(),
        });
    }
    Ok(SotSample {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        video,
        frame_ids,
        boxes,
    })
}

/// Every sample directory under `root`, sorted by name.
pub fn load_sot_tree(root: &Path) -> Result<Vec<SotSample>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.join(GROUNDTRUTH_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| load_sot_sample(d)).collect()
}
