//! Adaptive inference: Hann-windowed confidence, confidence-gated multi-scale
//! re-search, and constant-velocity smoothing of the box center.

mod kalman;

pub use kalman::{
    kalman_predict, kalman_update, KalmanState, DEFAULT_MEASUREMENT_NOISE, DEFAULT_PROCESS_NOISE,
    INITIAL_POSITION_VARIANCE, INITIAL_VELOCITY_VARIANCE,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_TAU_UNCERT: f64 = 0.98;
pub const DEFAULT_SCALE_FACTORS: [f64; 2] = [0.95, 1.05];
pub const DEFAULT_ALPHA_KALMAN: f64 = 0.5;
pub const DEFAULT_SEARCH_FACTOR: f64 = 4.0;

/// Which center feeds the Kalman update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KalmanInput {
    /// The blend of measurement and prediction.
    #[default]
    Fused,
    /// The tracker's measurement as is.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AieConfig {
    pub tau_uncert: f64,
    pub scale_factors: Vec<f64>,
    pub alpha_kalman: f64,
    pub search_factor: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub kalman_input: KalmanInput,
}

impl Default for AieConfig {
    fn default() -> Self {
        Self {
            tau_uncert: DEFAULT_TAU_UNCERT,
            scale_factors: DEFAULT_SCALE_FACTORS.to_vec(),
            alpha_kalman: DEFAULT_ALPHA_KALMAN,
            search_factor: DEFAULT_SEARCH_FACTOR,
            process_noise: DEFAULT_PROCESS_NOISE,
            measurement_noise: DEFAULT_MEASUREMENT_NOISE,
            kalman_input: KalmanInput::Fused,
        }
    }
}

impl AieConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tau_uncert > 0.0 && self.tau_uncert <= 1.0) {
            return bad(format!("tau_uncert must be in (0, 1], got {}", self.tau_uncert));
        }
        if !(0.0..=1.0).contains(&self.alpha_kalman) {
            return bad(format!("alpha_kalman must be in [0, 1], got {}", self.alpha_kalman));
        }
        if let Some(s) = self.scale_factors.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("scale factors must be positive, got {s}"));
        }
        if !(self.search_factor > 0.0) {
            return bad(format!("search_factor must be positive, got {}", self.search_factor));
        }
        if !(self.process_noise >= 0.0) || !(self.measurement_noise > 0.0) {
            return bad("process noise must be >= 0 and measurement noise > 0".into());
        }
        Ok(())
    }
}

/// A response map computed over `region` at search scale `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub scores: Tensor,
    pub region: BBox,
    pub scale: f64,
}

/// Symmetric Hann window with zero endpoints; a single sample is 1.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    // mirrored so w[i] == w[n-1-i] bit for bit
    (0..n)
        .map(|i| {
            let i = i.min(n - 1 - i);
            0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos())
        })
        .collect()
}

/// Peak of the score map after multiplying by the 2-D Hann window.
/// Ties resolve to the smallest row, then the smallest column.
pub fn hann_confidence(map: &ScoreMap) -> Result<(f64, (usize, usize))> {
    let (h, w) = match map.scores.shape() {
        [h, w] => (*h, *w),
        other => return Err(Error::InvalidArgument(format!("score map must be H×W, got {other:?}"))),
    };
    if h == 0 || w == 0 {
        return Err(Error::Empty("score map"));
    }
    let wy = hann_window(h);
    let wx = hann_window(w);
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for (r, row) in map.scores.data().chunks(w).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let windowed = v * wy[r] * wx[c];
            if windowed > best.0 {
                best = (windowed, (r, c));
            }
        }
    }
    Ok(best)
}

pub fn needs_rescue(confidence: f64, cfg: &AieConfig) -> bool {
    confidence < cfg.tau_uncert
}

/// A tracker answer for one search scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub scale: f64,
    pub confidence: f64,
    pub bbox: BBox,
    /// The search region the answer was computed over.
    pub region: BBox,
}

/// Highest confidence wins; ties go to scale 1.0, then to the earlier entry.
pub fn multiscale_select(candidates: &[Candidate]) -> Result<Candidate> {
    let mut iter = candidates.iter();
    let mut best = *iter.next().ok_or(Error::Empty("multiscale candidates"))?;
    for c in iter {
        let better = c.confidence > best.confidence
            || (c.confidence == best.confidence && c.scale == 1.0 && best.scale != 1.0);
        if better {
            best = *c;
        }
    }
    Ok(best)
}

pub fn fuse_estimate(z_center: (f64, f64), predicted: (f64, f64), alpha: f64) -> (f64, f64) {
    (
        alpha * z_center.0 + (1.0 - alpha) * predicted.0,
        alpha * z_center.1 + (1.0 - alpha) * predicted.1,
    )
}

/// Square region of side `search_factor·sqrt(w·h)·scale` centered on `center`.
pub fn search_region(center: (f64, f64), target_wh: (f64, f64), scale: f64, cfg: &AieConfig) -> Result<BBox> {
    let (w, h) = target_wh;
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!("target size must be positive, got {w}×{h}")));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let side = cfg.search_factor * (w * h).sqrt() * scale;
    Ok(BBox::from_center(center.0, center.1, side, side))
}

/// Search region coverage: the fraction of the ground-truth area inside the search box.
pub fn src(b_search: &BBox, b_gt: &BBox) -> Result<f64> {
    let gt_area = b_gt.area();
    if !(gt_area > 0.0) {
        return Err(Error::InvalidArgument("SRC needs a ground truth box with positive area".into()));
    }
    Ok((b_search.intersection_area(b_gt) / gt_area).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Confidence of the base (scale 1.0) answer.
    pub confidence: f64,
    /// Confidence of the answer actually used.
    pub selected_confidence: f64,
    pub rescue_fired: bool,
    pub scale: f64,
    pub src: Option<f64>,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str = "frame,confidence,rescue_fired,scale,src";

    pub fn csv_row(&self, frame: u32) -> String {
        let src = self.src.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{frame},{:.6},{},{},{src}",
            self.confidence,
            u8::from(self.rescue_fired),
            self.scale
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AieOutput {
    pub bbox: BBox,
    pub state: KalmanState,
    pub diagnostics: StepDiagnostics,
}

/// One frame of adaptive inference.
///
/// `rescue` is asked for a candidate at each configured alternative scale,
/// only when the base confidence falls below the threshold. `gt`, when
/// given, is used to record coverage of the selected search region.
pub fn aie_step<F>(
    state: &KalmanState,
    base: Candidate,
    mut rescue: F,
    cfg: &AieConfig,
    gt: Option<&BBox>,
) -> Result<AieOutput>
where
    F: FnMut(f64) -> Result<Candidate>,
{
    let rescue_fired = needs_rescue(base.confidence, cfg);
    let selected = if rescue_fired && !cfg.scale_factors.is_empty() {
        let mut candidates = Vec::with_capacity(cfg.scale_factors.len() + 1);
        candidates.push(base);
        for &s in &cfg.scale_factors {
            candidates.push(rescue(s)?);
        }
        multiscale_select(&candidates)?
    } else {
        base
    };

    let predicted = kalman_predict(state, cfg.process_noise);
    let measured = selected.bbox.center();
    let fused = fuse_estimate(measured, predicted.center(), cfg.alpha_kalman);
    let observation = match cfg.kalman_input {
        KalmanInput::Fused => fused,
        KalmanInput::Raw => measured,
    };
    let posterior = kalman_update(&predicted, observation, cfg.measurement_noise)?;

    let src = gt.map(|g| src(&selected.region, g)).transpose()?;
    Ok(AieOutput {
        bbox: selected.bbox.with_center(fused),
        state: posterior,
        diagnostics: StepDiagnostics {
            confidence: base.confidence,
            selected_confidence: selected.confidence,
            rescue_fired,
            scale: selected.scale,
            src,
        },
    })
}
