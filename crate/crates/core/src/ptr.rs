//! Predictive token rectification.
//!
//! A semantic query is averaged from the template tokens, mapped by a small
//! MLP to a per-channel modulation vector, injected as the bias of a
//! depth-wise correlation over the search features, and squeezed by a 1×1
//! convolution and a sigmoid into a single-plane gate that rescales every
//! channel of the search map.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};
use crate::weights::{SeededInit, WeightBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    /// tanh approximation of GELU.
    #[default]
    Gelu,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
                0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
            }
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

/// Affine layer `y = W·x + b` with `W: out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([out, _], [b]) if out == b => Ok(Self { weight, bias }),
            _ => Err(Error::shape("linear", weight.shape(), bias.shape())),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != [self.in_dim()] {
            return Err(Error::shape("linear", self.weight.shape(), x.shape()));
        }
        let col = x.clone().reshape(&[self.in_dim(), 1])?;
        let y = tensor::matmul(&self.weight, &col)?.reshape(&[self.out_dim()])?;
        y.add(&self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtrWeights {
    pub mlp: Vec<Linear>,
    pub activation: Activation,
    /// `C×k×k` depth-wise correlation kernels.
    pub dw_kernels: Tensor,
    /// `1×C` channel squeeze.
    pub conv1_w: Tensor,
    /// `[1]`.
    pub conv1_b: Tensor,
}

impl PtrWeights {
    /// Validates layer widths against the channel count `C`.
    pub fn new(
        mlp: Vec<Linear>,
        activation: Activation,
        dw_kernels: Tensor,
        conv1_w: Tensor,
        conv1_b: Tensor,
    ) -> Result<Self> {
        let c = match dw_kernels.shape() {
            [c, k, k2] if k == k2 && k % 2 == 1 => *c,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "depth-wise kernels must be C×k×k with odd k, got {other:?}"
                )))
            }
        };
        let first = mlp.first().ok_or(Error::Empty("ptr mapping network"))?;
        if first.in_dim() != c || mlp.last().map(Linear::out_dim) != Some(c) {
            return Err(Error::InvalidArgument(format!(
                "mapping network must map {c} → {c} channels"
            )));
        }
        if mlp.windows(2).any(|p| p[0].out_dim() != p[1].in_dim()) {
            return Err(Error::InvalidArgument("mapping network layer widths disagree".into()));
        }
        if conv1_w.shape() != [1, c] || conv1_b.shape() != [1] {
            return Err(Error::shape("ptr gating conv", conv1_w.shape(), &[1, c]));
        }
        Ok(Self {
            mlp,
            activation,
            dw_kernels,
            conv1_w,
            conv1_b,
        })
    }

    /// All-zero weights with a two-layer `C→C→C` mapping network. The gate
    /// under these weights is exactly 0.5 everywhere.
    pub fn neutral(channels: usize, kernel: usize) -> Result<Self> {
        let layer = || Linear::new(Tensor::zeros(&[channels, channels]), Tensor::zeros(&[channels]));
        Self::new(
            vec![layer()?, layer()?],
            Activation::default(),
            Tensor::zeros(&[channels, kernel, kernel]),
            Tensor::zeros(&[1, channels]),
            Tensor::zeros(&[1]),
        )
    }

    /// Pseudo-random weights from a fixed seed.
    pub fn seeded(channels: usize, kernel: usize, seed: u64) -> Result<Self> {
        let mut init = SeededInit::new(seed);
        let mut layer = || {
            Linear::new(
                init.tensor(&[channels, channels], channels),
                Tensor::zeros(&[channels]),
            )
        };
        let mlp = vec![layer()?, layer()?];
        Self::new(
            mlp,
            Activation::default(),
            init.tensor(&[channels, kernel, kernel], kernel * kernel),
            init.tensor(&[1, channels], channels),
            Tensor::zeros(&[1]),
        )
    }

    pub fn channels(&self) -> usize {
        self.dw_kernels.shape()[0]
    }

    pub fn to_bundle(&self) -> WeightBundle {
        let mut b = WeightBundle::default()
            .with_meta("kind", "ptr")
            .with_meta("activation", self.activation)
            .with_meta("layers", self.mlp.len());
        for (i, l) in self.mlp.iter().enumerate() {
            b.push(format!("mlp.{i}.weight"), l.weight.clone());
            b.push(format!("mlp.{i}.bias"), l.bias.clone());
        }
        b.push("dw_kernels", self.dw_kernels.clone());
        b.push("conv1.weight", self.conv1_w.clone());
        b.push("conv1.bias", self.conv1_b.clone());
        b
    }

    pub fn from_bundle(mut b: WeightBundle) -> Result<Self> {
        if b.meta("kind")? != "ptr" {
            return Err(Error::InvalidArgument("bundle is not a ptr weight set".into()));
        }
        let layers: usize = b.meta_parse("layers")?;
        let activation: Activation = b.meta_parse("activation")?;
        let mlp = (0..layers)
            .map(|i| Linear::new(b.take(&format!("mlp.{i}.weight"))?, b.take(&format!("mlp.{i}.bias"))?))
            .collect::<Result<Vec<_>>>()?;
        let dw = b.take("dw_kernels")?;
        let w = b.take("conv1.weight")?;
        let bias = b.take("conv1.bias")?;
        Self::new(mlp, activation, dw, w, bias)
    }
}

/// Output of the rectification stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedFeatures {
    /// `C×H×W` gated features.
    pub f_hat: Tensor,
    /// `H×W` gate, strictly inside (0, 1).
    pub mask: Tensor,
}

/// Mean of the template tokens (`Nz×C` → `C`).
pub fn distill_semantic_query(template_tokens: &Tensor) -> Result<Tensor> {
    if template_tokens.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "template tokens must be Nz×C, got {:?}",
            template_tokens.shape()
        )));
    }
    tensor::mean_rows(template_tokens).map_err(|e| match e {
        Error::Empty(_) => Error::Empty("template token set"),
        other => other,
    })
}

pub fn map_modulation(q_sem: &Tensor, weights: &PtrWeights) -> Result<Tensor> {
    let mut x = q_sem.clone();
    let last = weights.mlp.len() - 1;
    for (i, layer) in weights.mlp.iter().enumerate() {
        x = layer.forward(&x)?;
        if i < last {
            x = x.map(|v| weights.activation.apply(v));
        }
    }
    Ok(x)
}

/// `sigmoid(conv1x1(depthwise(f_x; bias = w_m)))` squeezed to `H×W`.
pub fn gating_mask(f_x: &Tensor, w_m: &Tensor, weights: &PtrWeights) -> Result<Tensor> {
    let corr = tensor::depthwise_conv(f_x, &weights.dw_kernels, w_m)?;
    let logits = tensor::conv1x1(&corr, &weights.conv1_w, &weights.conv1_b)?;
    let (h, w) = (logits.shape()[1], logits.shape()[2]);
    tensor::sigmoid(&logits).reshape(&[h, w])
}

pub fn rectify(f_x: &Tensor, mask: &Tensor) -> Result<RectifiedFeatures> {
    Ok(RectifiedFeatures {
        f_hat: f_x.scale_by_plane(mask)?,
        mask: mask.clone(),
    })
}

/// The whole rectification stage from template tokens and search features.
pub fn forward(template_tokens: &Tensor, f_x: &Tensor, weights: &PtrWeights) -> Result<RectifiedFeatures> {
    let q = distill_semantic_query(template_tokens)?;
    let w_m = map_modulation(&q, weights)?;
    let mask = gating_mask(f_x, &w_m, weights)?;
    rectify(f_x, &mask)
}
