//! Cross-expert calibration.
//!
//! Template and search tokens from the textual expert share one linear
//! projection, the search tokens attend over the template tokens, and the
//! normalized residual is reshaped onto the search grid and passed through a
//! 3×3 single-channel head and a sigmoid. The resulting spatial mask gates
//! the rectified features a second time.

use crate::error::{Error, Result};
use crate::tensor::{self, AttentionWeights, Tensor};
use crate::weights::{SeededInit, WeightBundle};

pub const DEFAULT_EMBED_DIM: usize = 256;
pub const DEFAULT_HEADS: usize = 4;
pub const HEAD_KERNEL: usize = 3;
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CecWeights {
    /// `d×C_txt` shared projection.
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub attn: AttentionWeights,
    pub ln_gamma: Tensor,
    pub ln_beta: Tensor,
    pub ln_eps: f64,
    /// `1×d×3×3` calibration head.
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl CecWeights {
    pub fn new(
        proj_w: Tensor,
        proj_b: Tensor,
        attn: AttentionWeights,
        ln_gamma: Tensor,
        ln_beta: Tensor,
        head_w: Tensor,
        head_b: Tensor,
    ) -> Result<Self> {
        let d = match proj_w.shape() {
            [d, _] => *d,
            other => return Err(Error::InvalidArgument(format!("projection must be d×C_txt, got {other:?}"))),
        };
        if proj_b.shape() != [d] || ln_gamma.shape() != [d] || ln_beta.shape() != [d] {
            return Err(Error::InvalidArgument(format!("bias and norm parameters must have length {d}")));
        }
        if attn.dim() != d {
            return Err(Error::shape("cec attention", &[d, d], attn.wq.shape()));
        }
        if attn.heads == 0 || d % attn.heads != 0 {
            return Err(Error::InvalidArgument(format!("embed dim {d} not divisible by {} heads", attn.heads)));
        }
        if head_w.shape() != [1, d, HEAD_KERNEL, HEAD_KERNEL] || head_b.shape() != [1] {
            return Err(Error::shape("cec head", head_w.shape(), &[1, d, HEAD_KERNEL, HEAD_KERNEL]));
        }
        Ok(Self {
            proj_w,
            proj_b,
            attn,
            ln_gamma,
            ln_beta,
            ln_eps: LN_EPS,
            head_w,
            head_b,
        })
    }

    /// Identity attention, unit norm, zero head: the calibration mask is 0.5 everywhere.
    pub fn neutral(text_dim: usize, d: usize, heads: usize) -> Result<Self> {
        let mut init = SeededInit::new(crate::weights::DEFAULT_WEIGHT_SEED);
        Self::new(
            init.tensor(&[d, text_dim], text_dim),
            Tensor::zeros(&[d]),
            AttentionWeights::identity(d, heads),
            Tensor::ones(&[d]),
            Tensor::zeros(&[d]),
            Tensor::zeros(&[1, d, HEAD_KERNEL, HEAD_KERNEL]),
            Tensor::zeros(&[1]),
        )
    }

    pub fn seeded(text_dim: usize, d: usize, heads: usize, seed: u64) -> Result<Self> {
        let mut init = SeededInit::new(seed);
        let attn = AttentionWeights {
            heads,
            wq: init.tensor(&[d, d], d),
            wk: init.tensor(&[d, d], d),
            wv: init.tensor(&[d, d], d),
            wo: init.tensor(&[d, d], d),
        };
        Self::new(
            init.tensor(&[d, text_dim], text_dim),
            Tensor::zeros(&[d]),
            attn,
            Tensor::ones(&[d]),
            Tensor::zeros(&[d]),
            init.tensor(&[1, d, HEAD_KERNEL, HEAD_KERNEL], d * HEAD_KERNEL * HEAD_KERNEL),
            Tensor::zeros(&[1]),
        )
    }

    pub fn embed_dim(&self) -> usize {
        self.proj_w.shape()[0]
    }

    pub fn text_dim(&self) -> usize {
        self.proj_w.shape()[1]
    }

    pub fn to_bundle(&self) -> WeightBundle {
        let mut b = WeightBundle::default()
            .with_meta("kind", "cec")
            .with_meta("heads", self.attn.heads)
            .with_meta("ln_eps", format!("{:?}", self.ln_eps));
        for (name, t) in [
            ("proj.weight", &self.proj_w),
            ("proj.bias", &self.proj_b),
            ("attn.wq", &self.attn.wq),
            ("attn.wk", &self.attn.wk),
            ("attn.wv", &self.attn.wv),
            ("attn.wo", &self.attn.wo),
            ("ln.gamma", &self.ln_gamma),
            ("ln.beta", &self.ln_beta),
            ("head.weight", &self.head_w),
            ("head.bias", &self.head_b),
        ] {
            b.push(name, t.clone());
        }
        b
    }

    pub fn from_bundle(mut b: WeightBundle) -> Result<Self> {
        if b.meta("kind")? != "cec" {
            return Err(Error::InvalidArgument("bundle is not a cec weight set".into()));
        }
        let heads: usize = b.meta_parse("heads")?;
        let ln_eps: f64 = b.meta_parse("ln_eps")?;
        let attn = AttentionWeights {
            heads,
            wq: b.take("attn.wq")?,
            wk: b.take("attn.wk")?,
            wv: b.take("attn.wv")?,
            wo: b.take("attn.wo")?,
        };
        let mut w = Self::new(
            b.take("proj.weight")?,
            b.take("proj.bias")?,
            attn,
            b.take("ln.gamma")?,
            b.take("ln.beta")?,
            b.take("head.weight")?,
            b.take("head.bias")?,
        )?;
        w.ln_eps = ln_eps;
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedFeatures {
    pub f_calib: Tensor,
    pub m_calib: Tensor,
}

fn project(x: &Tensor, w: &CecWeights) -> Result<Tensor> {
    match x.shape() {
        [_, c] if *c == w.text_dim() => {}
        other => return Err(Error::shape("project_textual", other, w.proj_w.shape())),
    }
    let y = tensor::matmul(x, &w.proj_w.transpose()?)?;
    let d = w.embed_dim();
    let mut data = y.into_data();
    for row in data.chunks_mut(d) {
        for (v, b) in row.iter_mut().zip(w.proj_b.data()) {
            *v += b;
        }
    }
    Tensor::new(vec![data.len() / d, d], data)
}

/// Maps template and search textual tokens through the same projection.
pub fn project_textual(z_txt: &Tensor, x_txt: &Tensor, w: &CecWeights) -> Result<(Tensor, Tensor)> {
    Ok((project(z_txt, w)?, project(x_txt, w)?))
}

/// `LayerNorm(x + Attn(q = x, k = v = z))`.
pub fn enhance(x_proj: &Tensor, z_proj: &Tensor, w: &CecWeights) -> Result<Tensor> {
    let attended = tensor::multi_head_cross_attention(x_proj, z_proj, z_proj, &w.attn)?;
    tensor::layer_norm(&x_proj.add(&attended)?, &w.ln_gamma, &w.ln_beta, w.ln_eps)
}

/// Nearest-neighbour resampling of an `h×w` plane to `out_h×out_w`.
pub fn resample_nearest(plane: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w) = match plane.shape() {
        [h, w] => (*h, *w),
        other => return Err(Error::InvalidArgument(format!("expected a plane, got {other:?}"))),
    };
    if (h, w) == (out_h, out_w) {
        return Ok(plane.clone());
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("resample target must be non-empty".into()));
    }
    Ok(Tensor::from_fn(&[out_h, out_w], |i| {
        let (y, x) = (i / out_w, i % out_w);
        plane.data()[(y * h / out_h) * w + x * w / out_w]
    }))
}

/// Reshapes `grid_h·grid_w` tokens row-major onto the grid, applies the head
/// and sigmoid, and resamples to `out_hw` when given and different.
pub fn calibration_mask(
    x_fused: &Tensor,
    grid_h: usize,
    grid_w: usize,
    out_hw: Option<(usize, usize)>,
    w: &CecWeights,
) -> Result<Tensor> {
    let d = w.embed_dim();
    let n = match x_fused.shape() {
        [n, dd] if *dd == d => *n,
        other => return Err(Error::shape("calibration_mask", other, &[grid_h * grid_w, d])),
    };
    if grid_h == 0 || grid_w == 0 || n != grid_h * grid_w {
        return Err(Error::InvalidArgument(format!(
            "{n} tokens do not form a {grid_h}×{grid_w} grid"
        )));
    }
    let grid = x_fused.transpose()?.reshape(&[d, grid_h, grid_w])?;
    let logits = tensor::conv2d(&grid, &w.head_w, &w.head_b)?.reshape(&[grid_h, grid_w])?;
    let mask = tensor::sigmoid(&logits);
    match out_hw {
        Some((oh, ow)) => resample_nearest(&mask, oh, ow),
        None => Ok(mask),
    }
}

pub fn fuse_calibrated(f_hat: &Tensor, m_calib: &Tensor) -> Result<CalibratedFeatures> {
    Ok(CalibratedFeatures {
        f_calib: f_hat.scale_by_plane(m_calib)?,
        m_calib: m_calib.clone(),
    })
}

/// Full calibration from textual tokens and rectified features `f_hat: C×H×W`.
pub fn forward(
    z_txt: &Tensor,
    x_txt: &Tensor,
    grid_h: usize,
    grid_w: usize,
    f_hat: &Tensor,
    w: &CecWeights,
) -> Result<CalibratedFeatures> {
    let (h, wd) = match f_hat.shape() {
        [_, h, wd] => (*h, *wd),
        other => return Err(Error::InvalidArgument(format!("rectified features must be C×H×W, got {other:?}"))),
    };
    let (z_proj, x_proj) = project_textual(z_txt, x_txt, w)?;
    let fused = enhance(&x_proj, &z_proj, w)?;
    let mask = calibration_mask(&fused, grid_h, grid_w, Some((h, wd)), w)?;
    fuse_calibrated(f_hat, &mask)
}
