//! Single-object tracking metrics: success AUC, precision, normalized
//! precision and overlap precision, per tracklet and averaged over tracklets.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};

pub const DEFAULT_PRECISION_THRESHOLD_PX: f64 = 20.0;
pub const DEFAULT_NORM_PRECISION_THRESHOLD: f64 = 0.2;
pub const DEFAULT_OP_THRESHOLD: f64 = 0.75;

/// `0.00, 0.05, …, 1.00`.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub iou_thresholds: Vec<f64>,
    pub precision_threshold_px: f64,
    pub norm_precision_threshold: f64,
    pub op_threshold: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: default_iou_thresholds(),
            precision_threshold_px: DEFAULT_PRECISION_THRESHOLD_PX,
            norm_precision_threshold: DEFAULT_NORM_PRECISION_THRESHOLD,
            op_threshold: DEFAULT_OP_THRESHOLD,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = &self.iou_thresholds;
        if grid.is_empty()
            || grid.iter().any(|t| !(0.0..=1.0).contains(t))
            || grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "iou_thresholds must be strictly ascending within [0, 1]".into(),
            ));
        }
        if !(self.precision_threshold_px >= 0.0) || !(self.norm_precision_threshold >= 0.0) {
            return Err(Error::InvalidArgument("precision thresholds must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.op_threshold) {
            return Err(Error::InvalidArgument("op_threshold must be within [0, 1]".into()));
        }
        Ok(())
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn center_error(pred: &BBox, gt: &BBox) -> f64 {
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    (px - gx).hypot(py - gy)
}

/// Center offset scaled by the ground-truth width and height.
pub fn norm_center_error(pred: &BBox, gt: &BBox) -> Result<f64> {
    if !(gt.w > 0.0 && gt.h > 0.0) {
        return Err(Error::InvalidArgument("normalized error needs a non-degenerate ground truth".into()));
    }
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    Ok(((px - gx) / gt.w).hypot((py - gy) / gt.h))
}

fn fraction(values: &[f64], what: &'static str, pass: impl Fn(f64) -> bool) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty(what));
    }
    Ok(values.iter().filter(|&&v| pass(v)).count() as f64 / values.len() as f64)
}

/// Mean over the threshold grid of the fraction of frames with IoU ≥ t.
pub fn success_auc(ious: &[f64], cfg: &MetricConfig) -> Result<f64> {
    let curve = success_curve(ious, &cfg.iou_thresholds)?;
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

pub fn success_curve(ious: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    thresholds
        .iter()
        .map(|&t| fraction(ious, "success curve", |v| v >= t))
        .collect()
}

/// Fraction of frames whose error is at most `threshold`.
pub fn precision_at(errors: &[f64], threshold: f64) -> Result<f64> {
    fraction(errors, "precision", |e| e <= threshold)
}

/// Fraction of frames with IoU ≥ `threshold`.
pub fn op_at(ious: &[f64], threshold: f64) -> Result<f64> {
    fraction(ious, "overlap precision", |v| v >= threshold)
}

/// Picks the prediction with the highest IoU against `gt`, first one on ties.
/// An empty pool yields the zero box with IoU 0.
pub fn id_agnostic_match(predictions: &[BBox], gt: &BBox) -> Result<(BBox, f64)> {
    if !(gt.area() > 0.0) {
        return Err(Error::InvalidArgument("id-agnostic matching needs a ground truth with positive area".into()));
    }
    let mut best = (BBox::ZERO, 0.0);
    let mut found = false;
    for p in predictions {
        let v = iou(p, gt);
        if !found || v > best.1 {
            best = (*p, v);
            found = true;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    #[default]
    StrictId,
    IdAgnostic,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::StrictId => "strict-id",
            EvalMode::IdAgnostic => "id-agnostic",
        }
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict-id" => Ok(EvalMode::StrictId),
            "id-agnostic" => Ok(EvalMode::IdAgnostic),
            other => Err(Error::InvalidArgument(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

/// One ground-truth tracklet with its assigned prediction and, for the
/// id-agnostic protocol, every prediction available at each frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalPair {
    pub name: String,
    pub gt: Vec<BBox>,
    pub prediction: Vec<BBox>,
    pub pool: Option<Vec<Vec<BBox>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackletMetrics {
    pub name: String,
    pub frames: usize,
    pub auc: f64,
    pub p: f64,
    pub p_norm: f64,
    pub op75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregate {
    pub auc: f64,
    pub p: f64,
    pub p_norm: f64,
    pub op75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub rows: Vec<TrackletMetrics>,
    pub aggregate: Aggregate,
    /// `(threshold, mean success)` over the IoU grid.
    pub success_curve: Vec<(f64, f64)>,
    /// `(pixels, mean precision)` for 0..=50 px.
    pub precision_curve: Vec<(f64, f64)>,
    /// `(normalized threshold, mean precision)` for 0.00..=0.50.
    pub norm_precision_curve: Vec<(f64, f64)>,
}

struct FrameScores {
    ious: Vec<f64>,
    errors: Vec<f64>,
    norm_errors: Vec<f64>,
}

fn score_pair(pair: &EvalPair, mode: EvalMode) -> Result<FrameScores> {
    let n = pair.gt.len();
    if n == 0 {
        return Err(Error::Empty("ground-truth tracklet"));
    }
    let mismatch = |right: usize| Error::LengthMismatch {
        name: pair.name.clone(),
        left: n,
        right,
    };
    if pair.prediction.len() != n {
        return Err(mismatch(pair.prediction.len()));
    }
    if let Some(pool) = &pair.pool {
        if pool.len() != n {
            return Err(mismatch(pool.len()));
        }
    }
    let mut s = FrameScores {
        ious: Vec::with_capacity(n),
        errors: Vec::with_capacity(n),
        norm_errors: Vec::with_capacity(n),
    };
    for (f, gt) in pair.gt.iter().enumerate() {
        let assigned = pair.prediction[f];
        let pred = match mode {
            EvalMode::StrictId => assigned,
            // degenerate ground truth cannot be matched; keep the assigned box
            EvalMode::IdAgnostic if gt.area() > 0.0 => {
                let mut candidates = vec![assigned];
                if let Some(pool) = &pair.pool {
                    candidates.extend_from_slice(&pool[f]);
                }
                id_agnostic_match(&candidates, gt)?.0
            }
            EvalMode::IdAgnostic => assigned,
        };
        s.ious.push(iou(&pred, gt));
        s.errors.push(center_error(&pred, gt));
        s.norm_errors.push(norm_center_error(&pred, gt).unwrap_or(f64::INFINITY));
    }
    Ok(s)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores every pair frame by frame and averages the per-tracklet metrics
/// with equal weight per tracklet.
pub fn evaluate(pairs: &[EvalPair], cfg: &MetricConfig, mode: EvalMode) -> Result<EvalReport> {
    cfg.validate()?;
    let px_grid: Vec<f64> = (0..=50).map(f64::from).collect();
    let norm_grid: Vec<f64> = (0..=50).map(|i| f64::from(i) / 100.0).collect();

    let mut rows = Vec::with_capacity(pairs.len());
    let mut success = vec![0.0; cfg.iou_thresholds.len()];
    let mut prec = vec![0.0; px_grid.len()];
    let mut nprec = vec![0.0; norm_grid.len()];
    for pair in pairs {
        let s = score_pair(pair, mode)?;
        let curve = success_curve(&s.ious, &cfg.iou_thresholds)?;
        for (acc, v) in success.iter_mut().zip(&curve) {
            *acc += v;
        }
        for (acc, &t) in prec.iter_mut().zip(&px_grid) {
            *acc += precision_at(&s.errors, t)?;
        }
        for (acc, &t) in nprec.iter_mut().zip(&norm_grid) {
            *acc += precision_at(&s.norm_errors, t)?;
        }
        rows.push(TrackletMetrics {
            name: pair.name.clone(),
            frames: pair.gt.len(),
            auc: curve.iter().sum::<f64>() / curve.len() as f64,
            p: precision_at(&s.errors, cfg.precision_threshold_px)?,
            p_norm: precision_at(&s.norm_errors, cfg.norm_precision_threshold)?,
            op75: op_at(&s.ious, cfg.op_threshold)?,
        });
    }
    let k = pairs.len().max(1) as f64;
    let avg = |grid: &[f64], acc: Vec<f64>| grid.iter().copied().zip(acc.into_iter().map(|v| v / k)).collect();
    let aggregate = Aggregate {
        auc: mean(rows.iter().map(|r| r.auc)),
        p: mean(rows.iter().map(|r| r.p)),
        p_norm: mean(rows.iter().map(|r| r.p_norm)),
        op75: mean(rows.iter().map(|r| r.op75)),
    };
    Ok(EvalReport {
        mode,
        aggregate,
        success_curve: avg(&cfg.iou_thresholds, success),
        precision_curve: avg(&px_grid, prec),
        norm_precision_curve: avg(&norm_grid, nprec),
        rows,
    })
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "tracklet,frames,auc,p,p_norm,op75";

    /// Per-tracklet rows in input order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.name, r.frames, r.auc, r.p, r.p_norm, r.op75
            );
        }
        out
    }

    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let a = &self.aggregate;
        format!(
            "mode={}\ntracklets={}\nauc={:.6}\np_norm={:.6}\np={:.6}\nop75={:.6}\n",
            self.mode.as_str(),
            self.rows.len(),
            a.auc,
            a.p_norm,
            a.p,
            a.op75
        )
    }

    /// `curve,threshold,value` rows for external plotting.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("curve,threshold,value\n");
        for (name, curve) in [
            ("success", &self.success_curve),
            ("precision", &self.precision_curve),
            ("norm_precision", &self.norm_precision_curve),
        ] {
            for (t, v) in curve {
                let _ = writeln!(out, "{name},{t},{v:.6}");
            }
        }
        out
    }

    /// Parses rows written by [`EvalReport::to_csv`].
    pub fn rows_from_csv(text: &str) -> Result<Vec<TrackletMetrics>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::CSV_HEADER => {}
            other => {
                return Err(Error::Parse {
                    location: "report csv".into(),
                    message: format!("unexpected header {other:?}"),
                })
            }
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = |m: String| Error::Parse {
                    location: format!("report csv line {}", i + 2),
                    message: m,
                };
                let f: Vec<&str> = line.rsplitn(6, ',').collect();
                if f.len() != 6 {
                    return Err(bad(format!("expected 6 fields in {line:?}")));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
                Ok(TrackletMetrics {
                    name: f[5].to_string(),
                    frames: f[4].parse().map_err(|e| bad(format!("{:?}: {e}", f[4])))?,
                    auc: num(f[3])?,
                    p: num(f[2])?,
                    p_norm: num(f[1])?,
                    op75: num(f[0])?,
                })
            })
            .collect()
    }
}
