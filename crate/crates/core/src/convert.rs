//! Conversion of video-text-spotting tracker output into per-object
//! single-object prediction files, and alignment of those files with curated
//! ground-truth tracklets.
//!
//! Input is one JSON object per line. Each video needs a header line
//! `{"video_id": "v", "frame_count": 120}`; detections are
//! `{"video_id": "v", "frame_id": 3, "object_id": "17", "bbox": [x, y, w, h]}`
//! (a `polygon` may be given instead of `bbox`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::bbox::{boxes_from_text, boxes_to_text, BBox};
use crate::curation::{frame_field, id_field, polygon_field, polygon_to_bbox, Reject, SotSample};
use crate::error::{Error, Result};
use crate::metrics::{iou, EvalPair};

#[derive(Debug, Clone, PartialEq)]
pub struct VtsResult {
    pub video_id: String,
    pub frame_count: u32,
    pub detections: BTreeMap<String, Vec<(u32, BBox)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub object_id: String,
    /// One box per frame, frame 1 first.
    pub boxes: Vec<BBox>,
}

impl PredictionFile {
    /// Box at a 1-based frame id; the zero box beyond the end.
    pub fn at(&self, frame: u32) -> BBox {
        frame
            .checked_sub(1)
            .and_then(|i| self.boxes.get(i as usize))
            .copied()
            .unwrap_or(BBox::ZERO)
    }
}

enum Line {
    Header { video: String, frame_count: u32 },
    Detection { video: String, frame: u32, object: String, bbox: BBox },
}

fn parse_line(line: &str) -> std::result::Result<Line, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("record must be a JSON object")?;
    let video = id_field(obj, "video_id")?;
    if obj.contains_key("frame_count") {
        return Ok(Line::Header {
            video,
            frame_count: frame_field(obj, "frame_count")?,
        });
    }
    let bbox = match (obj.get("bbox"), obj.get("polygon")) {
        (Some(b), _) => {
            let v: Vec<f64> = b
                .as_array()
                .filter(|a| a.len() == 4)
                .and_then(|a| a.iter().map(Value::as_f64).collect())
                .ok_or("`bbox` must be [x, y, w, h]")?;
            if v[2] < 0.0 || v[3] < 0.0 {
                return Err("`bbox` width and height must be >= 0".into());
            }
            BBox::new(v[0], v[1], v[2], v[3])
        }
        (None, Some(p)) => polygon_to_bbox(&polygon_field(p)?).map_err(|e| e.to_string())?,
        (None, None) => return Err("missing `bbox` or `polygon`".into()),
    };
    Ok(Line::Detection {
        video,
        frame: frame_field(obj, "frame_id")?,
        object: id_field(obj, "object_id")?,
        bbox,
    })
}

/// Parses consolidated tracker output, one [`VtsResult`] per video in id order.
pub fn parse_vts_results(input: &str) -> Result<Vec<VtsResult>> {
    let mut headers: BTreeMap<String, u32> = BTreeMap::new();
    let mut dets: BTreeMap<String, BTreeMap<String, Vec<(u32, BBox)>>> = BTreeMap::new();
    let mut rejects = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(Line::Header { video, frame_count }) => {
                if headers.insert(video.clone(), frame_count).is_some() {
                    rejects.push(Reject { line: i + 1, reason: format!("second header for video {video}") });
                }
            }
            Ok(Line::Detection { video, frame, object, bbox }) => {
                dets.entry(video).or_default().entry(object).or_default().push((frame, bbox));
            }
            Err(reason) => rejects.push(Reject { line: i + 1, reason }),
        }
    }
    for video in dets.keys() {
        if !headers.contains_key(video) {
            rejects.push(Reject { line: 0, reason: format!("no frame_count header for video {video}") });
        }
    }
    if !rejects.is_empty() {
        return Err(Error::Schema {
            count: rejects.len(),
            details: rejects
                .iter()
                .map(|r| format!("line {}: {}", r.line, r.reason))
                .collect::<Vec<_>>()
                .join("\n"),
        });
    }
    Ok(headers
        .into_iter()
        .map(|(video_id, frame_count)| {
            let mut detections = dets.remove(&video_id).unwrap_or_default();
            for list in detections.values_mut() {
                list.sort_by_key(|(f, _)| *f);
            }
            VtsResult { video_id, frame_count, detections }
        })
        .collect())
}

/// Carries the latest detection forward; frames before the first detection get the zero box.
pub fn fill_gaps(detections: &[(u32, BBox)], frame_count: u32) -> Result<Vec<BBox>> {
    for &(f, _) in detections {
        if f < 1 || f > frame_count {
            return Err(Error::FrameOutOfRange { frame: f, frame_count });
        }
    }
    if detections.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidArgument("detections must have strictly increasing frame ids".into()));
    }
    let mut out = Vec::with_capacity(frame_count as usize);
    let mut current = BBox::ZERO;
    let mut next = detections.iter().peekable();
    for frame in 1..=frame_count {
        if let Some(&(_, b)) = next.next_if(|(f, _)| *f == frame) {
            current = b;
        }
        out.push(current);
    }
    Ok(out)
}

/// Gap-filled prediction per object.
pub fn to_prediction_files(result: &VtsResult) -> Result<Vec<PredictionFile>> {
    result
        .detections
        .iter()
        .map(|(object_id, dets)| {
            if dets.is_empty() {
                return Err(Error::EmptyTrajectory(object_id.clone()));
            }
            Ok(PredictionFile {
                object_id: object_id.clone(),
                boxes: fill_gaps(dets, result.frame_count)?,
            })
        })
        .collect()
}

/// Writes `<out_dir>/<video_id>/<object_id>.txt` for every object.
pub fn emit_predictions(result: &VtsResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let files = to_prediction_files(result)?;
    let dir = out_dir.join(&result.video_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    files
        .iter()
        .map(|p| {
            let path = dir.join(format!("{}.txt", p.object_id));
            fs::write(&path, boxes_to_text(&p.boxes)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

pub fn convert_file(input: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut written = Vec::new();
    for result in parse_vts_results(&text)? {
        written.extend(emit_predictions(&result, out_dir)?);
    }
    Ok(written)
}

/// Reads every `<object>.txt` in a video's prediction directory, sorted by object id.
pub fn load_prediction_dir(dir: &Path) -> Result<Vec<PredictionFile>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok(PredictionFile {
                object_id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                boxes: boxes_from_text(&text)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub gt_name: String,
    /// `None` when nothing overlapped and the zero prediction was used.
    pub object_id: Option<String>,
    pub mean_iou: f64,
    /// Prediction restricted to the tracklet's frames.
    pub boxes: Vec<BBox>,
}

fn restrict(p: &PredictionFile, frames: &[u32]) -> Vec<BBox> {
    frames.iter().map(|&f| p.at(f)).collect()
}

/// Pairs every ground-truth tracklet with the prediction file of highest mean
/// IoU over its frames (first on ties). Several tracklets may share one file.
pub fn align_to_gt(predictions: &[PredictionFile], gts: &[SotSample]) -> Vec<Alignment> {
    gts.iter()
        .map(|gt| {
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in predictions.iter().enumerate() {
                let boxes = restrict(p, &gt.frame_ids);
                let m = boxes.iter().zip(&gt.boxes).map(|(a, b)| iou(a, b)).sum::<f64>() / gt.boxes.len().max(1) as f64;
                if best.is_none_or(|(_, v)| m > v) {
                    best = Some((i, m));
                }
            }
            match best {
                Some((i, m)) if m > 0.0 => Alignment {
                    gt_name: gt.name.clone(),
                    object_id: Some(predictions[i].object_id.clone()),
                    mean_iou: m,
                    boxes: restrict(&predictions[i], &gt.frame_ids),
                },
                _ => Alignment {
                    gt_name: gt.name.clone(),
                    object_id: None,
                    mean_iou: 0.0,
                    boxes: vec![BBox::ZERO; gt.boxes.len()],
                },
            }
        })
        .collect()
}

/// Evaluation pairs for one video: the aligned file as the assigned
/// prediction and all files at each frame as the id-agnostic pool.
pub fn eval_pairs(predictions: &[PredictionFile], gts: &[SotSample]) -> Vec<EvalPair> {
    align_to_gt(predictions, gts)
        .into_iter()
        .zip(gts)
        .map(|(a, gt)| EvalPair {
            name: gt.name.clone(),
            gt: gt.boxes.clone(),
            prediction: a.boxes,
            pool: Some(
                gt.frame_ids
                    .iter()
                    .map(|&f| predictions.iter().map(|p| p.at(f)).collect())
                    .collect(),
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: f64) -> BBox {
        BBox::new(v, v, 10.0, 10.0)
    }

    #[test]
    fn fill_gaps_examples() {
        let out = fill_gaps(&[(1, b(1.0)), (4, b(4.0))], 5).unwrap();
        assert_eq!(out, vec![b(1.0), b(1.0), b(1.0), b(4.0), b(4.0)]);

        let out = fill_gaps(&[(3, b(3.0))], 4).unwrap();
        assert_eq!(out, vec![BBox::ZERO, BBox::ZERO, b(3.0), b(3.0)]);

        let all: Vec<_> = (1..=4).map(|f| (f, b(f as f64))).collect();
        assert_eq!(fill_gaps(&all, 4).unwrap(), all.iter().map(|(_, x)| *x).collect::<Vec<_>>());

        assert!(matches!(
            fill_gaps(&[(6, b(0.0))], 5),
            Err(Error::FrameOutOfRange { frame: 6, frame_count: 5 })
        ));
    }

    #[test]
    fn empty_trajectory_is_rejected() {
        let mut detections = BTreeMap::new();
        detections.insert("ghost".to_string(), vec![]);
        let r = VtsResult { video_id: "v".into(), frame_count: 3, detections };
        assert!(matches!(to_prediction_files(&r), Err(Error::EmptyTrajectory(id)) if id == "ghost"));
    }

    #[test]
    fn parse_and_emit() {
        let input = r#"{"video_id":"v","frame_count":5}
{"video_id":"v","frame_id":4,"object_id":"a","bbox":[4,4,10,10]}
{"video_id":"v","frame_id":1,"object_id":"a","bbox":[1,1,10,10]}
{"video_id":"v","frame_id":2,"object_id":"b","polygon":[[0,0],[2,0],[2,3]]}
{"video_id":"v","frame_id":5,"object_id":3,"bbox":[0,0,1,1]}
"#;
        let results = parse_vts_results(input).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].detections["a"][0].0, 1);
        let tmp = tempfile::tempdir().unwrap();
        let written = emit_predictions(&results[0], tmp.path()).unwrap();
        assert_eq!(written.len(), 3);
        let a = fs::read_to_string(tmp.path().join("v/a.txt")).unwrap();
        assert_eq!(a, "1,1,10,10\n1,1,10,10\n1,1,10,10\n4,4,10,10\n4,4,10,10\n");
        let loaded = load_prediction_dir(&tmp.path().join("v")).unwrap();
        assert_eq!(loaded.iter().map(|p| p.object_id.as_str()).collect::<Vec<_>>(), vec!["3", "a", "b"]);
    }

    #[test]
    fn parse_rejects_missing_header_and_bad_records() {
        let err = parse_vts_results(r#"{"video_id":"v","frame_id":1,"object_id":"a","bbox":[1,1,1,1]}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { count: 1, .. }));
        let err = parse_vts_results("{\"video_id\":\"v\",\"frame_count\":2}\n{\"video_id\":\"v\",\"frame_id\":1,\"object_id\":\"a\",\"bbox\":[1,1]}").unwrap_err();
        assert!(matches!(err, Error::Schema { count: 1, .. }));
    }

    fn sample(name: &str, frames: &[u32], boxes: Vec<BBox>) -> SotSample {
        SotSample { name: name.into(), video: "v".into(), frame_ids: frames.to_vec(), boxes }
    }

    #[test]
    fn align_examples() {
        let gt = sample("g", &[2, 3], vec![b(0.0), b(0.0)]);
        let only = PredictionFile { object_id: "x".into(), boxes: vec![b(0.0); 4] };
        let a = align_to_gt(std::slice::from_ref(&only), std::slice::from_ref(&gt));
        assert_eq!(a[0].object_id.as_deref(), Some("x"));
        assert_eq!(a[0].mean_iou, 1.0);

        // 0.8 vs 0.1 mean IoU
        let good = PredictionFile { object_id: "good".into(), boxes: vec![BBox::new(0.0, 0.0, 10.0, 8.0); 4] };
        let poor = PredictionFile { object_id: "poor".into(), boxes: vec![BBox::new(0.0, 0.0, 10.0, 1.0); 4] };
        let a = align_to_gt(&[poor, good], &[gt.clone()]);
        assert_eq!(a[0].object_id.as_deref(), Some("good"));
        assert!((a[0].mean_iou - 0.8).abs() < 1e-12);

        let a = align_to_gt(&[], &[gt]);
        assert_eq!(a[0].object_id, None);
        assert_eq!(a[0].boxes, vec![BBox::ZERO; 2]);
    }

    #[test]
    fn eval_pairs_restrict_to_tracklet_frames() {
        let gt = sample("g", &[3, 4], vec![b(3.0), b(4.0)]);
        let p = PredictionFile { object_id: "p".into(), boxes: (1..=5).map(|f| b(f as f64)).collect() };
        let pairs = eval_pairs(&[p], &[gt]);
        assert_eq!(pairs[0].prediction, vec![b(3.0), b(4.0)]);
        assert_eq!(pairs[0].pool.as_ref().unwrap()[1], vec![b(4.0)]);
    }
}
