//! Synthetic sequences, score maps and the tracking loop that ties the
//! feature and inference stages together without trained weights.
//!
//! The oracle renders a Gaussian response at the (jittered) target centre on
//! a square grid covering the search region. Its peak height is 1 when the
//! searched scale matches the target and falls off with the log size ratio,
//! which is what lets confidence-gated re-search pick a better scale.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aie::{self, AieConfig, Candidate, KalmanState, ScoreMap, StepDiagnostics};
use crate::bbox::BBox;
use crate::cec::{self, CecWeights};
use crate::error::{Error, Result};
use crate::metrics;
use crate::ptr::{self, PtrWeights};
use crate::tensor::Tensor;
use crate::weights::DEFAULT_WEIGHT_SEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    ConstantVelocity,
    #[default]
    ScaleRamp,
    Piecewise,
}

impl std::str::FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-velocity" => Ok(Self::ConstantVelocity),
            "scale-ramp" => Ok(Self::ScaleRamp),
            "piecewise" => Ok(Self::Piecewise),
            _ => Err(Error::InvalidArgument(format!("unknown motion kind {s:?}"))),
        }
    }
}

/// Parameters of one synthetic sequence.
///
/// Positions are in pixels. Under `scale-ramp` both the box sides and the
/// per-frame displacement grow by `scale_rate` each frame, the way text
/// approaching the camera drifts away from the vanishing point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSpec {
    pub length: usize,
    pub motion: MotionKind,
    pub start_center: [f64; 2],
    pub start_size: [f64; 2],
    pub velocity: [f64; 2],
    pub scale_rate: f64,
    /// `piecewise` only: `[frames, vx, vy]` runs; the last one extends forever.
    pub segments: Vec<[f64; 3]>,
    /// Std of the per-frame offset between the true centre and the response peak.
    pub noise_std: f64,
    pub distractors: usize,
    /// Distractor `k` sits at `centre + (k+1)·offset ⊙ (w, h)`.
    pub distractor_offset: [f64; 2],
    pub distractor_amplitude: f64,
    pub frame_size: [f64; 2],
    pub seed: u64,
}

pub const DEFAULT_SEQUENCE_LENGTH: usize = 60;
pub const DEFAULT_SCALE_RATE: f64 = 1.03;
pub const DEFAULT_DISTRACTOR_AMPLITUDE: f64 = 0.9;

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            length: DEFAULT_SEQUENCE_LENGTH,
            motion: MotionKind::ScaleRamp,
            start_center: [320.0, 240.0],
            start_size: [120.0, 12.0],
            velocity: [12.0, 2.0],
            scale_rate: DEFAULT_SCALE_RATE,
            segments: Vec::new(),
            noise_std: 1.0,
            distractors: 0,
            distractor_offset: [0.0, 1.5],
            distractor_amplitude: DEFAULT_DISTRACTOR_AMPLITUDE,
            frame_size: [640.0, 480.0],
            seed: 0,
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("sequence: {m}")));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.length < 2 {
            return bad("length must be at least 2");
        }
        if !finite(&self.start_center) || !finite(&self.velocity) || !finite(&self.distractor_offset) {
            return bad("non-finite position parameter");
        }
        if !self.start_size.iter().all(|&s| s.is_finite() && s > 0.0) {
            return bad("start_size must be positive");
        }
        if !self.frame_size.iter().all(|&s| s.is_finite() && s > 0.0) {
            return bad("frame_size must be positive");
        }
        if !(self.scale_rate.is_finite() && self.scale_rate > 0.0) {
            return bad("scale_rate must be positive");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if !(self.distractor_amplitude.is_finite() && self.distractor_amplitude >= 0.0) {
            return bad("distractor_amplitude must be non-negative");
        }
        if self.motion == MotionKind::Piecewise {
            if self.segments.is_empty() {
                return bad("piecewise motion needs at least one segment");
            }
            if self.segments.iter().any(|s| !finite(s) || s[0] < 1.0) {
                return bad("piecewise segments must be [frames >= 1, vx, vy]");
            }
        }
        Ok(())
    }

    fn velocity_at(&self, step: usize) -> (f64, f64) {
        let [vx, vy] = self.velocity;
        match self.motion {
            MotionKind::ConstantVelocity => (vx, vy),
            MotionKind::ScaleRamp => {
                let g = self.scale_rate.powi(step as i32);
                (vx * g, vy * g)
            }
            MotionKind::Piecewise => {
                let mut remaining = step as f64;
                for s in &self.segments {
                    if remaining < s[0] {
                        return (s[1], s[2]);
                    }
                    remaining -= s[0];
                }
                let last = self.segments[self.segments.len() - 1];
                (last[1], last[2])
            }
        }
    }

    fn size_at(&self, step: usize) -> (f64, f64) {
        let [w, h] = self.start_size;
        match self.motion {
            MotionKind::ScaleRamp => {
                let g = self.scale_rate.powi(step as i32);
                (w * g, h * g)
            }
            _ => (w, h),
        }
    }
}

/// Knobs of the synthetic tracker answering each search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerModel {
    /// Cells per side of the square score map; odd puts a cell on the region centre.
    pub map_size: usize,
    /// Response σ as a fraction of `sqrt(w·h)`.
    pub sigma_factor: f64,
    /// Log-ratio std of the peak falloff under scale mismatch.
    pub scale_tolerance: f64,
    /// Weight of the scaled previous size in the size regression.
    pub size_inertia: f64,
    /// Run the feature-space smoke path every frame.
    pub feature_smoke: bool,
}

impl Default for TrackerModel {
    fn default() -> Self {
        Self {
            map_size: 31,
            sigma_factor: 0.25,
            scale_tolerance: 0.1,
            size_inertia: 0.85,
            feature_smoke: true,
        }
    }
}

impl TrackerModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("tracker: {m}")));
        if self.map_size < 3 {
            return bad("map_size must be at least 3");
        }
        if !(self.sigma_factor.is_finite() && self.sigma_factor > 0.0) {
            return bad("sigma_factor must be positive");
        }
        if !(self.scale_tolerance.is_finite() && self.scale_tolerance > 0.0) {
            return bad("scale_tolerance must be positive");
        }
        if !(0.0..=1.0).contains(&self.size_inertia) {
            return bad("size_inertia must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One generated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub frame: u32,
    pub gt: BBox,
    /// Where the response peaks: the gt centre plus observation jitter.
    pub peak: (f64, f64),
    pub distractors: Vec<BBox>,
}

pub fn gen_sequence(spec: &SequenceSpec) -> Result<Vec<SimFrame>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    let (mut cx, mut cy) = (spec.start_center[0], spec.start_center[1]);
    let mut out = Vec::with_capacity(spec.length);
    for i in 0..spec.length {
        if i > 0 {
            let (vx, vy) = spec.velocity_at(i - 1);
            cx += vx;
            cy += vy;
        }
        let (w, h) = spec.size_at(i);
        let gt = BBox::from_center(cx, cy, w, h);
        let peak = if spec.noise_std > 0.0 {
            (cx + noise.sample(&mut rng), cy + noise.sample(&mut rng))
        } else {
            (cx, cy)
        };
        let distractors = (1..=spec.distractors)
            .map(|k| {
                let k = k as f64;
                gt.translate(k * spec.distractor_offset[0] * w, k * spec.distractor_offset[1] * h)
            })
            .collect();
        out.push(SimFrame {
            frame: i as u32 + 1,
            gt,
            peak,
            distractors,
        });
    }
    Ok(out)
}

/// Renders score maps and answers searches for one frame.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticOracle<'a> {
    pub frame: &'a SimFrame,
    pub model: &'a TrackerModel,
    pub distractor_amplitude: f64,
}

impl SyntheticOracle<'_> {
    /// Peak height for a search expecting a target of size `expected_wh`.
    pub fn amplitude(&self, expected_wh: (f64, f64)) -> f64 {
        let gt = &self.frame.gt;
        let ratio = (gt.w * gt.h).sqrt() / (expected_wh.0 * expected_wh.1).sqrt();
        let l = ratio.ln() / self.model.scale_tolerance;
        (-0.5 * l * l).exp()
    }

    pub fn score_map(&self, region: BBox, expected_wh: (f64, f64), scale: f64) -> ScoreMap {
        let n = self.model.map_size;
        let gt = &self.frame.gt;
        let sigma = self.model.sigma_factor * (gt.w * gt.h).sqrt();
        let inv = 1.0 / (2.0 * sigma * sigma);
        let amp = self.amplitude(expected_wh);
        let mut bumps = vec![(self.frame.peak, amp)];
        bumps.extend(
            self.frame
                .distractors
                .iter()
                .map(|d| (d.center(), amp * self.distractor_amplitude)),
        );
        let (cw, ch) = (region.w / n as f64, region.h / n as f64);
        let scores = Tensor::from_fn(&[n, n], |i| {
            let px = region.x + ((i % n) as f64 + 0.5) * cw;
            let py = region.y + ((i / n) as f64 + 0.5) * ch;
            bumps
                .iter()
                .map(|&((bx, by), a)| a * (-((px - bx).powi(2) + (py - by).powi(2)) * inv).exp())
                .fold(0.0, f64::max)
        });
        ScoreMap { scores, region, scale }
    }

    /// The tracker's answer when searching around `estimate` at `scale`.
    pub fn answer(&self, estimate: &BBox, scale: f64, cfg: &AieConfig) -> Result<Candidate> {
        let region = aie::search_region(estimate.center(), (estimate.w, estimate.h), scale, cfg)?;
        let expected = (estimate.w * scale, estimate.h * scale);
        let map = self.score_map(region, expected, scale);
        let (confidence, (r, c)) = aie::hann_confidence(&map)?;
        let n = self.model.map_size;
        let row = |k: usize| map.scores.at(&[r, k]);
        let col = |k: usize| map.scores.at(&[k, c]);
        let dx = subcell_offset(c, n, row);
        let dy = subcell_offset(r, n, col);
        let px = region.x + (c as f64 + 0.5 + dx) * region.w / n as f64;
        let py = region.y + (r as f64 + 0.5 + dy) * region.h / n as f64;

        let lam = self.model.size_inertia;
        let gt = &self.frame.gt;
        let w = (1.0 - lam) * gt.w + lam * expected.0;
        let h = (1.0 - lam) * gt.h + lam * expected.1;
        Ok(Candidate {
            scale,
            confidence,
            bbox: BBox::from_center(px, py, w, h),
            region,
        })
    }
}

const MAX_SUBCELL_SHIFT: f64 = 1.5;

// Vertex of the parabola through the log-scores of three neighbours.
// Exact for a Gaussian response; zero at the border or on flat/underflowed cells.
fn subcell_offset(i: usize, n: usize, at: impl Fn(usize) -> f64) -> f64 {
    if i == 0 || i + 1 >= n {
        return 0.0;
    }
    let (a, b, c) = (at(i - 1), at(i), at(i + 1));
    if a <= 1e-300 || b <= 1e-300 || c <= 1e-300 {
        return 0.0;
    }
    let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
    let denom = la - 2.0 * lb + lc;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (la - lc) / denom).clamp(-MAX_SUBCELL_SHIFT, MAX_SUBCELL_SHIFT)
}

/// Tiny PTR + CEC pipeline run on random tensors each frame.
struct FeatureSmoke {
    ptr: PtrWeights,
    cec: CecWeights,
    template: Tensor,
    z_txt: Tensor,
    rng: ChaCha8Rng,
}

const SMOKE_CHANNELS: usize = 8;
const SMOKE_HW: usize = 8;
const SMOKE_GRID: usize = 4;
const SMOKE_TEXT_DIM: usize = 8;
const SMOKE_EMBED: usize = 8;
const SMOKE_HEADS: usize = 2;

impl FeatureSmoke {
    fn new(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draw = |shape: &[usize]| Tensor::from_fn(shape, |_| std.sample(&mut rng));
        let template = draw(&[SMOKE_GRID, SMOKE_CHANNELS]);
        let z_txt = draw(&[SMOKE_GRID, SMOKE_TEXT_DIM]);
        Ok(Self {
            ptr: PtrWeights::seeded(SMOKE_CHANNELS, 3, DEFAULT_WEIGHT_SEED)?,
            cec: CecWeights::seeded(SMOKE_TEXT_DIM, SMOKE_EMBED, SMOKE_HEADS, DEFAULT_WEIGHT_SEED)?,
            template,
            z_txt,
            rng,
        })
    }

    /// Energy of the calibrated features for a fresh random frame.
    fn step(&mut self) -> Result<f64> {
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let rng = &mut self.rng;
        let f_x = Tensor::from_fn(&[SMOKE_CHANNELS, SMOKE_HW, SMOKE_HW], |_| std.sample(rng));
        let x_txt = Tensor::from_fn(&[SMOKE_GRID * SMOKE_GRID, SMOKE_TEXT_DIM], |_| std.sample(rng));
        let rect = ptr::forward(&self.template, &f_x, &self.ptr)?;
        let cal = cec::forward(&self.z_txt, &x_txt, SMOKE_GRID, SMOKE_GRID, &rect.f_hat, &self.cec)?;
        let in_range = |m: &Tensor| m.data().iter().all(|&v| v > 0.0 && v < 1.0);
        if !cal.f_calib.is_finite() || !in_range(&rect.mask) || !in_range(&cal.m_calib) {
            return Err(Error::InvalidArgument("feature smoke path left its invariants".into()));
        }
        let energy = cal.f_calib.energy();
        if energy > f_x.energy() {
            return Err(Error::InvalidArgument("calibrated features gained energy".into()));
        }
        Ok(energy)
    }
}

/// Per-frame record of a tracked frame (frame 1 is the given initialisation).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u32,
    pub step: StepDiagnostics,
    pub iou: f64,
    pub center_error: f64,
    pub calib_energy: Option<f64>,
}

impl FrameRecord {
    pub const CSV_HEADER: &'static str = "frame,confidence,rescue_fired,scale,src,iou,center_error,calib_energy";

    pub fn csv_row(&self) -> String {
        let energy = self.calib_energy.map(|e| format!("{e:.6}")).unwrap_or_default();
        format!(
            "{},{:.6},{:.6},{energy}",
            self.step.csv_row(self.frame),
            self.iou,
            self.center_error
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub gt: Vec<BBox>,
    pub predicted: Vec<BBox>,
    /// The tracker's own answer per frame, before any temporal fusion.
    pub measured: Vec<BBox>,
    pub records: Vec<FrameRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSummary {
    pub frames: usize,
    pub mean_iou: f64,
    pub mean_src: f64,
    pub rescue_rate: f64,
    pub mean_center_error: f64,
    pub max_center_error: f64,
}

impl SimSummary {
    pub fn to_kv(&self) -> String {
        format!(
            "frames={}\nmean_iou={:.6}\nmean_src={:.6}\nrescue_rate={:.6}\nmean_center_error={:.6}\nmax_center_error={:.6}\n",
            self.frames, self.mean_iou, self.mean_src, self.rescue_rate, self.mean_center_error, self.max_center_error
        )
    }

    fn mean_of(runs: &[SimSummary]) -> SimSummary {
        let n = runs.len() as f64;
        let avg = |f: fn(&SimSummary) -> f64| runs.iter().map(f).sum::<f64>() / n;
        SimSummary {
            frames: runs.iter().map(|r| r.frames).sum(),
            mean_iou: avg(|r| r.mean_iou),
            mean_src: avg(|r| r.mean_src),
            rescue_rate: avg(|r| r.rescue_rate),
            mean_center_error: avg(|r| r.mean_center_error),
            max_center_error: runs.iter().map(|r| r.max_center_error).fold(0.0, f64::max),
        }
    }
}

impl SimRun {
    pub fn summary(&self) -> SimSummary {
        let n = self.records.len() as f64;
        let mean = |f: &dyn Fn(&FrameRecord) -> f64| self.records.iter().map(f).sum::<f64>() / n;
        SimSummary {
            frames: self.records.len(),
            mean_iou: mean(&|r| r.iou),
            mean_src: mean(&|r| r.step.src.unwrap_or(0.0)),
            rescue_rate: mean(&|r| f64::from(u8::from(r.step.rescue_fired))),
            mean_center_error: mean(&|r| r.center_error),
            max_center_error: self.records.iter().map(|r| r.center_error).fold(0.0, f64::max),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(FrameRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Tracks one synthetic sequence, with the adaptive inference layer or with
/// the raw tracker answer.
pub fn simulate_track(spec: &SequenceSpec, model: &TrackerModel, cfg: &AieConfig, use_aie: bool) -> Result<SimRun> {
    cfg.validate()?;
    model.validate()?;
    let frames = gen_sequence(spec)?;
    let mut smoke = model.feature_smoke.then(|| FeatureSmoke::new(spec.seed)).transpose()?;

    let first = frames[0].gt;
    let mut estimate = first;
    let mut state = KalmanState::new(first.center());
    let mut run = SimRun {
        gt: vec![first],
        predicted: vec![first],
        measured: vec![first],
        records: Vec::with_capacity(frames.len() - 1),
    };

    for f in &frames[1..] {
        let oracle = SyntheticOracle {
            frame: f,
            model,
            distractor_amplitude: spec.distractor_amplitude,
        };
        let base = oracle.answer(&estimate, 1.0, cfg)?;
        let (bbox, measured, step) = if use_aie {
            let mut rescued = Vec::new();
            let out = aie::aie_step(
                &state,
                base,
                |s| {
                    let c = oracle.answer(&estimate, s, cfg)?;
                    rescued.push(c);
                    Ok(c)
                },
                cfg,
                Some(&f.gt),
            )?;
            let chosen = rescued
                .into_iter()
                .find(|c| c.scale == out.diagnostics.scale && out.diagnostics.rescue_fired)
                .unwrap_or(base);
            state = out.state;
            (out.bbox, chosen.bbox, out.diagnostics)
        } else {
            let step = StepDiagnostics {
                confidence: base.confidence,
                selected_confidence: base.confidence,
                rescue_fired: false,
                scale: 1.0,
                src: Some(aie::src(&base.region, &f.gt)?),
            };
            (base.bbox, base.bbox, step)
        };
        estimate = bbox;
        let calib_energy = smoke.as_mut().map(FeatureSmoke::step).transpose()?;
        run.records.push(FrameRecord {
            frame: f.frame,
            step,
            iou: metrics::iou(&bbox, &f.gt),
            center_error: metrics::center_error(&bbox, &f.gt),
            calib_energy,
        });
        run.gt.push(f.gt);
        run.predicted.push(bbox);
        run.measured.push(measured);
    }
    Ok(run)
}

/// Axes of the adaptive-inference sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub tau_uncert: Vec<f64>,
    pub scale_factors: Vec<Vec<f64>>,
    pub alpha_kalman: Vec<f64>,
    /// Sequence seeds averaged per cell.
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            tau_uncert: vec![0.97, 0.98, 0.99],
            scale_factors: vec![vec![0.90, 1.10], vec![0.95, 1.05], vec![0.985, 1.015]],
            alpha_kalman: vec![0.4, 0.5, 0.6],
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau_uncert: f64,
    pub scale_factors: Vec<f64>,
    pub alpha_kalman: f64,
    pub summary: SimSummary,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "tau_uncert,scale_factors,alpha_kalman,mean_iou,mean_src,rescue_rate,mean_center_error";

    pub fn csv_row(&self) -> String {
        let scales = self
            .scale_factors
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let s = &self.summary;
        format!(
            "{},{scales},{},{:.6},{:.6},{:.6},{:.6}",
            self.tau_uncert, self.alpha_kalman, s.mean_iou, s.mean_src, s.rescue_rate, s.mean_center_error
        )
    }
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Runs every cell of the grid (tau-major, then scale set, then alpha) over
/// all seeds. Cells run on separate threads; row order is fixed.
pub fn sweep_aie(grid: &SweepGrid, spec: &SequenceSpec, model: &TrackerModel, base: &AieConfig) -> Result<Vec<SweepRow>> {
    if grid.seeds.is_empty() {
        return Err(Error::Empty("sweep seeds"));
    }
    let mut cells = Vec::new();
    for &tau in &grid.tau_uncert {
        for scales in &grid.scale_factors {
            for &alpha in &grid.alpha_kalman {
                let cfg = AieConfig {
                    tau_uncert: tau,
                    scale_factors: scales.clone(),
                    alpha_kalman: alpha,
                    ..base.clone()
                };
                cfg.validate()?;
                cells.push(cfg);
            }
        }
    }
    let run_cell = |cfg: &AieConfig| -> Result<SweepRow> {
        let runs = grid
            .seeds
            .iter()
            .map(|&seed| {
                let spec = SequenceSpec { seed, ..spec.clone() };
                simulate_track(&spec, model, cfg, true).map(|r| r.summary())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepRow {
            tau_uncert: cfg.tau_uncert,
            scale_factors: cfg.scale_factors.clone(),
            alpha_kalman: cfg.alpha_kalman,
            summary: SimSummary::mean_of(&runs),
        })
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = cells.iter().map(|cfg| scope.spawn(move || run_cell(cfg))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

/// Mean squared centre error of the fused output and of the raw tracker
/// answer, both against the ground truth, over the tracked frames.
pub fn smoothing_errors(run: &SimRun) -> (f64, f64) {
    let mse = |boxes: &[BBox]| {
        let n = (boxes.len() - 1) as f64;
        boxes[1..]
            .iter()
            .zip(&run.gt[1..])
            .map(|(b, g)| metrics::center_error(b, g).powi(2))
            .sum::<f64>()
            / n
    };
    (mse(&run.predicted), mse(&run.measured))
}
