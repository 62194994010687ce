//! Dense row-major tensors and the handful of kernels the feature-calibration
//! stages are built from.
//!
//! Shapes are always explicit. The only broadcasting supported is a scalar
//! bias per output channel and a single spatial plane applied across channels
//! ([`Tensor::scale_by_plane`]).

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a 1-D tensor.
    pub fn vector(values: &[f64]) -> Result<Self> {
        Self::new(vec![values.len()], values.to_vec())
    }

    /// Builds a 2-D tensor from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(vec![m, n], rows.concat())
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                assert!(i < d, "index {index:?} out of bounds for {:?}", self.shape);
                acc * d + i
            })
    }

    /// Element at a multi-dimensional index. Panics when out of bounds.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Sum of squared elements.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Maximum absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.expect_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn expect_same_shape(&self, op: &'static str, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(())
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [m, n] => Ok((m, n)),
            _ => Err(Error::InvalidArgument(format!(
                "{op}: expected a 2-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::InvalidArgument(format!(
                "{op}: expected a 3-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    fn dims1(&self, op: &'static str) -> Result<usize> {
        match self.shape[..] {
            [n] => Ok(n),
            _ => Err(Error::InvalidArgument(format!(
                "{op}: expected a 1-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.expect_same_shape("add", other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|x| x * factor)
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2("transpose")?;
        Ok(Tensor::from_fn(&[n, m], |idx| {
            let (j, i) = (idx / m, idx % m);
            self.data[i * n + j]
        }))
    }

    /// Rows `start..end` of a 2-D tensor restricted to columns `c0..c1`.
    pub fn slice_cols(&self, c0: usize, c1: usize) -> Result<Tensor> {
        let (m, n) = self.dims2("slice_cols")?;
        if c0 >= c1 || c1 > n {
            return Err(Error::InvalidArgument(format!(
                "column range {c0}..{c1} invalid for width {n}"
            )));
        }
        let w = c1 - c0;
        Ok(Tensor::from_fn(&[m, w], |idx| {
            self.data[(idx / w) * n + c0 + idx % w]
        }))
    }

    /// Horizontal concatenation of 2-D tensors with equal row counts.
    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Empty("concat_cols"))?;
        let (m, _) = first.dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (pm, pn) = p.dims2("concat_cols")?;
            if pm != m {
                return Err(Error::shape("concat_cols", first.shape(), p.shape()));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&p.data[i * w..(i + 1) * w]);
            }
        }
        Tensor::new(vec![m, total], data)
    }

    /// Multiplies every channel of a `C×H×W` tensor by the same `H×W` plane.
    pub fn scale_by_plane(&self, plane: &Tensor) -> Result<Tensor> {
        let (c, h, w) = self.dims3("scale_by_plane")?;
        let (ph, pw) = plane.dims2("scale_by_plane")?;
        if (ph, pw) != (h, w) {
            return Err(Error::shape("scale_by_plane", &self.shape, &plane.shape));
        }
        let hw = h * w;
        let mut data = self.data.clone();
        for ch in 0..c {
            for (x, m) in data[ch * hw..(ch + 1) * hw].iter_mut().zip(&plane.data) {
                *x *= m;
            }
        }
        Tensor::new(vec![c, h, w], data)
    }

    /// Serializes to the debug text format: a `shape:` header line followed by
    /// whitespace-separated values (shortest round-trip decimal form).
    pub fn to_text(&self) -> String {
        let mut out = String::from("shape:");
        for d in &self.shape {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        let row = *self.shape.last().unwrap_or(&1);
        for chunk in self.data.chunks(row.max(1)) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Tensor> {
        let parse_err = |message: String| Error::Parse {
            location: "tensor text".into(),
            message,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("missing shape header".into()))?;
        let dims = header
            .strip_prefix("shape:")
            .ok_or_else(|| parse_err(format!("expected `shape:` header, got {header:?}")))?;
        let shape = dims
            .split_whitespace()
            .map(|d| d.parse::<usize>().map_err(|e| parse_err(format!("{d:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let data = lines
            .flat_map(str::split_whitespace)
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data)
    }
}

/// `c = a·b` for `a: m×k`, `b: k×n`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul")?;
    let (kb, n) = b.dims2("matmul")?;
    if k != kb {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            let av = a.data[i * k + t];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b.data[t * n..(t + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    let (_, n) = a.dims2("softmax_rows")?;
    let mut data = a.data.clone();
    for row in data.chunks_mut(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    Tensor::new(a.shape.clone(), data)
}

/// Per-row normalization with population variance, then `·gamma + beta`.
pub fn layer_norm(a: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let (_, n) = a.dims2("layer_norm")?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("layer_norm eps must be > 0, got {eps}")));
    }
    if gamma.dims1("layer_norm")? != n {
        return Err(Error::shape("layer_norm", a.shape(), gamma.shape()));
    }
    if beta.dims1("layer_norm")? != n {
        return Err(Error::shape("layer_norm", a.shape(), beta.shape()));
    }
    let mut data = a.data.clone();
    for row in data.chunks_mut(n) {
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for ((x, g), b) in row.iter_mut().zip(&gamma.data).zip(&beta.data) {
            *x = (*x - mean) * inv * g + b;
        }
    }
    Tensor::new(a.shape.clone(), data)
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    // Branching keeps exp() from overflowing for large |x|.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    a.map(sigmoid_scalar)
}

/// Column-wise mean of an `N×C` tensor.
pub fn mean_rows(a: &Tensor) -> Result<Tensor> {
    let (m, n) = match a.shape[..] {
        [m, n] => (m, n),
        _ => return Err(Error::InvalidArgument(format!("mean_rows: expected 2-D, got {:?}", a.shape))),
    };
    if m == 0 {
        return Err(Error::Empty("mean_rows"));
    }
    let mut out = vec![0.0; n];
    for row in a.data.chunks(n) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= m as f64;
    }
    Tensor::new(vec![n], out)
}

/// Pointwise channel mixing: `out[k] = Σ_c w[k,c]·f[c] + b[k]` at every site.
pub fn conv1x1(f: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (c, h, wd) = f.dims3("conv1x1")?;
    let (k, wc) = w.dims2("conv1x1")?;
    if wc != c {
        return Err(Error::shape("conv1x1", f.shape(), w.shape()));
    }
    if b.dims1("conv1x1")? != k {
        return Err(Error::shape("conv1x1", w.shape(), b.shape()));
    }
    let hw = h * wd;
    let mut out = vec![0.0; k * hw];
    for ko in 0..k {
        let dst = &mut out[ko * hw..(ko + 1) * hw];
        dst.fill(b.data[ko]);
        for ci in 0..c {
            let weight = w.data[ko * c + ci];
            for (o, x) in dst.iter_mut().zip(&f.data[ci * hw..(ci + 1) * hw]) {
                *o += weight * x;
            }
        }
    }
    Tensor::new(vec![k, h, wd], out)
}

fn odd_kernel(op: &'static str, kh: usize, kw: usize) -> Result<usize> {
    if kh != kw || kh % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "{op}: kernel must be square with odd size, got {kh}×{kw}"
        )));
    }
    Ok(kh)
}

/// Correlates `plane` (`h×w`) with a `k×k` kernel under zero padding, accumulating into `out`.
fn correlate_into(out: &mut [f64], plane: &[f64], kernel: &[f64], h: usize, w: usize, k: usize) {
    let r = (k / 2) as isize;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k {
                let sy = y as isize + ky as isize - r;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - r;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    acc += kernel[ky * k + kx] * plane[sy as usize * w + sx as usize];
                }
            }
            out[y * w + x] += acc;
        }
    }
}

/// Per-channel 2-D correlation with "same" zero padding plus a per-channel bias.
pub fn depthwise_conv(f: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, h, w) = f.dims3("depthwise_conv")?;
    let (kc, kh, kw) = kernels.dims3("depthwise_conv")?;
    let k = odd_kernel("depthwise_conv", kh, kw)?;
    if kc != c {
        return Err(Error::shape("depthwise_conv", f.shape(), kernels.shape()));
    }
    if bias.dims1("depthwise_conv")? != c {
        return Err(Error::shape("depthwise_conv", f.shape(), bias.shape()));
    }
    let hw = h * w;
    let mut out = vec![0.0; c * hw];
    for ch in 0..c {
        let dst = &mut out[ch * hw..(ch + 1) * hw];
        dst.fill(bias.data[ch]);
        correlate_into(
            dst,
            &f.data[ch * hw..(ch + 1) * hw],
            &kernels.data[ch * k * k..(ch + 1) * k * k],
            h,
            w,
            k,
        );
    }
    Tensor::new(vec![c, h, w], out)
}

/// Dense 2-D correlation: `f: C×H×W`, `w: K×C×k×k`, `b: K`, stride 1, same padding.
pub fn conv2d(f: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (c, h, wd) = f.dims3("conv2d")?;
    let (ko, kc, kh, kw) = match w.shape[..] {
        [a, b2, c2, d] => (a, b2, c2, d),
        _ => return Err(Error::InvalidArgument(format!("conv2d: expected 4-D kernel, got {:?}", w.shape))),
    };
    let k = odd_kernel("conv2d", kh, kw)?;
    if kc != c {
        return Err(Error::shape("conv2d", f.shape(), w.shape()));
    }
    if b.dims1("conv2d")? != ko {
        return Err(Error::shape("conv2d", w.shape(), b.shape()));
    }
    let hw = h * wd;
    let kk = k * k;
    let mut out = vec![0.0; ko * hw];
    for o in 0..ko {
        let dst = &mut out[o * hw..(o + 1) * hw];
        dst.fill(b.data[o]);
        for ci in 0..c {
            let kernel = &w.data[(o * c + ci) * kk..(o * c + ci + 1) * kk];
            correlate_into(dst, &f.data[ci * hw..(ci + 1) * hw], kernel, h, wd, k);
        }
    }
    Tensor::new(vec![ko, h, wd], out)
}

/// Projection weights for multi-head attention. All matrices are `d×d` and
/// applied on the right (`Q = q·Wq`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub heads: usize,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

impl AttentionWeights {
    pub fn identity(d: usize, heads: usize) -> Self {
        Self {
            heads,
            wq: Tensor::eye(d),
            wk: Tensor::eye(d),
            wv: Tensor::eye(d),
            wo: Tensor::eye(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.shape()[0]
    }

    fn validate(&self) -> Result<usize> {
        let d = self.dim();
        for m in [&self.wq, &self.wk, &self.wv, &self.wo] {
            if m.shape() != [d, d] {
                return Err(Error::shape("attention weights", &[d, d], m.shape()));
            }
        }
        if self.heads == 0 || d % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "model dim {d} is not divisible by {} heads",
                self.heads
            )));
        }
        Ok(d)
    }
}

/// Scaled dot-product attention of `q` over `(k, v)` split into `heads`
/// heads of width `d/heads`, concatenated and projected by `Wo`.
pub fn multi_head_cross_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    weights: &AttentionWeights,
) -> Result<Tensor> {
    let d = weights.validate()?;
    let (_, qd) = q.dims2("attention query")?;
    let (nk, kd) = k.dims2("attention key")?;
    let (nv, vd) = v.dims2("attention value")?;
    if qd != d || kd != d || vd != d {
        return Err(Error::InvalidArgument(format!(
            "attention inputs must have width {d}, got q {qd}, k {kd}, v {vd}"
        )));
    }
    if nk != nv {
        return Err(Error::shape("attention key/value", k.shape(), v.shape()));
    }
    let qp = matmul(q, &weights.wq)?;
    let kp = matmul(k, &weights.wk)?;
    let vp = matmul(v, &weights.wv)?;
    let dh = d / weights.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(weights.heads);
    for h in 0..weights.heads {
        let (c0, c1) = (h * dh, (h + 1) * dh);
        let qh = qp.slice_cols(c0, c1)?;
        let kh = kp.slice_cols(c0, c1)?;
        let vh = vp.slice_cols(c0, c1)?;
        let scores = matmul(&qh, &kh.transpose()?)?.scale(scale);
        heads.push(matmul(&softmax_rows(&scores)?, &vh)?);
    }
    matmul(&Tensor::concat_cols(&heads)?, &weights.wo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let a = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Tensor::eye(2), &a).unwrap(), a);
        let r = matmul(&t2(&[&[1.0, 2.0]]), &t2(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(r.data(), &[11.0]);
        let z = matmul(&Tensor::zeros(&[2, 3]), &Tensor::ones(&[3, 2])).unwrap();
        assert_eq!(z, Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn matmul_error_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.matches("[2, 3]").count() == 2, "{msg}");
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&t2(&[&[2.0, 2.0, 2.0]])).unwrap();
        for x in s.data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax_rows(&t2(&[&[-7.5]])).unwrap().data(), &[1.0]);
        let s = softmax_rows(&t2(&[&[0.0, 3f64.ln()]])).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-12);
        assert!((s.data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let s = softmax_rows(&t2(&[&[1000.0, 1000.0]])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn layer_norm_examples() {
        let g = Tensor::ones(&[3]);
        let b = Tensor::zeros(&[3]);
        let out = layer_norm(&t2(&[&[4.0, 4.0, 4.0]]), &g, &b, 1e-5).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 0.0]);

        let out = layer_norm(&t2(&[&[1.0, 3.0]]), &Tensor::ones(&[2]), &Tensor::zeros(&[2]), 1e-300)
            .unwrap();
        assert!((out.data()[0] + 1.0).abs() < 1e-12);
        assert!((out.data()[1] - 1.0).abs() < 1e-12);

        let out = layer_norm(
            &t2(&[&[1.0, -2.0, 9.0]]),
            &Tensor::zeros(&[3]),
            &Tensor::full(&[3], 5.0),
            1e-5,
        )
        .unwrap();
        assert_eq!(out.data(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn layer_norm_rejects_nonpositive_eps() {
        let r = layer_norm(&t2(&[&[1.0]]), &Tensor::ones(&[1]), &Tensor::zeros(&[1]), 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn sigmoid_examples() {
        let s = sigmoid(&Tensor::vector(&[0.0, 100.0, 1.0, -800.0]).unwrap());
        assert_eq!(s.data()[0], 0.5);
        assert!((s.data()[1] - 1.0).abs() < 1e-9);
        assert!((s.data()[2] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert!((s.data()[2] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(s.data()[3] >= 0.0 && s.data()[3].is_finite());
    }

    #[test]
    fn mean_rows_examples() {
        assert_eq!(mean_rows(&t2(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap().data(), &[2.0, 3.0]);
        assert_eq!(mean_rows(&t2(&[&[5.0, -1.0]])).unwrap().data(), &[5.0, -1.0]);
        assert_eq!(mean_rows(&t2(&[&[2.5], &[-2.5]])).unwrap().data(), &[0.0]);
    }

    #[test]
    fn conv1x1_examples() {
        let f = Tensor::from_fn(&[2, 2, 3], |i| i as f64 * 0.5 - 1.0);
        assert_eq!(conv1x1(&f, &Tensor::eye(2), &Tensor::zeros(&[2])).unwrap(), f);

        let out = conv1x1(&f, &Tensor::zeros(&[1, 2]), &Tensor::vector(&[1.5]).unwrap()).unwrap();
        assert_eq!(out, Tensor::full(&[1, 2, 3], 1.5));

        let site = Tensor::new(vec![2, 1, 1], vec![1.0, 2.0]).unwrap();
        let out = conv1x1(&site, &t2(&[&[1.0, 1.0]]), &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.data(), &[3.0]);

        assert!(conv1x1(&f, &Tensor::zeros(&[1, 3]), &Tensor::zeros(&[1])).is_err());
    }

    fn delta_kernels(c: usize, k: usize) -> Tensor {
        let mut t = Tensor::zeros(&[c, k, k]);
        for ch in 0..c {
            t.set(&[ch, k / 2, k / 2], 1.0);
        }
        t
    }

    #[test]
    fn depthwise_examples() {
        let f = Tensor::from_fn(&[3, 4, 5], |i| (i as f64).sin());
        let out = depthwise_conv(&f, &delta_kernels(3, 3), &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out, f);

        let bias = Tensor::vector(&[0.5, -1.0, 2.0]).unwrap();
        let out = depthwise_conv(&f, &Tensor::zeros(&[3, 3, 3]), &bias).unwrap();
        for ch in 0..3 {
            for y in 0..4 {
                for x in 0..5 {
                    assert_eq!(out.at(&[ch, y, x]), bias.data()[ch]);
                }
            }
        }

        let out = depthwise_conv(
            &Tensor::ones(&[1, 3, 3]),
            &Tensor::ones(&[1, 3, 3]),
            &Tensor::zeros(&[1]),
        )
        .unwrap();
        assert_eq!(out.at(&[0, 1, 1]), 9.0);
        assert_eq!(out.at(&[0, 0, 0]), 4.0);
        assert_eq!(out.at(&[0, 2, 2]), 4.0);
        assert_eq!(out.at(&[0, 0, 1]), 6.0);
    }

    #[test]
    fn depthwise_rejects_even_kernel() {
        let r = depthwise_conv(&Tensor::ones(&[1, 3, 3]), &Tensor::ones(&[1, 2, 2]), &Tensor::zeros(&[1]));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn conv2d_center_tap_matches_conv1x1() {
        let f = Tensor::from_fn(&[3, 2, 4], |i| (i as f64 * 0.37).cos());
        let w1 = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.0);
        let b = Tensor::vector(&[0.1, -0.2]).unwrap();
        let mut w3 = Tensor::zeros(&[2, 3, 3, 3]);
        for o in 0..2 {
            for c in 0..3 {
                w3.set(&[o, c, 1, 1], w1.at(&[o, c]));
            }
        }
        let a = conv1x1(&f, &w1, &b).unwrap();
        let c = conv2d(&f, &w3, &b).unwrap();
        assert!(a.max_abs_diff(&c).unwrap() < 1e-15);
    }

    #[test]
    fn attention_single_key_returns_value() {
        let w = AttentionWeights::identity(3, 1);
        let q = t2(&[&[0.3, -1.0, 2.0]]);
        let k = t2(&[&[5.0, 1.0, 0.0]]);
        let v = t2(&[&[7.0, 8.0, 9.0]]);
        assert_eq!(multi_head_cross_attention(&q, &k, &v, &w).unwrap(), v);
    }

    #[test]
    fn attention_identical_keys_return_shared_value() {
        let w = AttentionWeights::identity(4, 2);
        let q = t2(&[&[0.3, -1.0, 2.0, 0.0], &[9.0, 9.0, -9.0, 1.0]]);
        let kv = t2(&[&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]]);
        let out = multi_head_cross_attention(&q, &kv, &kv, &w).unwrap();
        for row in out.data().chunks(4) {
            for (x, e) in row.iter().zip([1.0, 2.0, 3.0, 4.0]) {
                assert!((x - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rejects_indivisible_heads() {
        let w = AttentionWeights::identity(6, 4);
        let x = Tensor::zeros(&[1, 6]);
        assert!(multi_head_cross_attention(&x, &x, &x, &w).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let t = Tensor::from_fn(&[2, 3], |i| i as f64 / 3.0 - 0.1);
        let text = t.to_text();
        assert!(text.starts_with("shape: 2 3\n"));
        assert_eq!(Tensor::from_text(&text).unwrap(), t);
        assert!(Tensor::from_text("shape: 2\n1.0").is_err());
        assert!(Tensor::from_text("dims: 1\n1.0").is_err());
    }

    #[test]
    fn new_rejects_bad_lengths() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }
}
