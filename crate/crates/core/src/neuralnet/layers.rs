use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// A parameter array. Frozen parameters are never updated and always report
/// a zero gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Vec<f64>,
    pub trainable: bool,
}

impl Param {
    pub fn learnable(value: Vec<f64>) -> Self {
        Param {
            value,
            trainable: true,
        }
    }

    pub fn frozen(value: Vec<f64>) -> Self {
        Param {
            value,
            trainable: false,
        }
    }
}

/// `y = x W^T + b` with `W` stored `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
}

/// Valid, stride-1 square convolution. `weight` is stored
/// `out_channels x in_channels x kernel x kernel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Param,
    pub bias: Param,
}

/// Bank of fixed linear filters applied to a single-channel `size x size`
/// matrix. Channel `c` computes
/// `alpha_c A + 1 (row_c^T A) + (A col_c) 1^T + beta_c sum(A) / size^2`,
/// i.e. a weighted row profile broadcast down the columns, a weighted column
/// profile broadcast across the rows and a global density term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub size: usize,
    pub alpha: Param,
    pub row: Param,
    pub col: Param,
    pub beta: Param,
}

impl Probe {
    pub fn channels(&self) -> usize {
        self.alpha.value.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Relu,
    /// Inverted dropout: kept activations are scaled by `1 / (1 - rate)`.
    Dropout { rate: f64 },
    Flatten,
    Probe(Probe),
    /// Zeroes entries strictly below the diagonal of every channel.
    TriangularMask,
}

/// Per-layer state kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    None,
    Mask(Vec<f64>),
    Cols(Vec<f64>),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Probe(_) => "probe",
            Layer::TriangularMask => "triangular_mask",
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Conv2d(c) => vec![&c.weight, &c.bias],
            Layer::Probe(p) => vec![&p.alpha, &p.row, &p.col, &p.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Probe(p) => vec![&mut p.alpha, &mut p.row, &mut p.col, &mut p.beta],
            _ => Vec::new(),
        }
    }

    /// Output shape for a batch input of shape `input` (batch first).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch {
            expected,
            got: input.to_vec(),
        };
        match self {
            Layer::Dense(d) => match input {
                [b, f] if *f == d.inputs => Ok(vec![*b, d.outputs]),
                _ => Err(mismatch(vec![0, d.inputs])),
            },
            Layer::Conv2d(c) => match input {
                [b, ch, h, w] if *ch == c.in_channels && *h >= c.kernel && *w >= c.kernel => {
                    Ok(vec![*b, c.out_channels, h - c.kernel + 1, w - c.kernel + 1])
                }
                _ => Err(mismatch(vec![0, c.in_channels, c.kernel, c.kernel])),
            },
            Layer::Probe(p) => match input {
                [b, 1, h, w] if *h == p.size && *w == p.size => {
                    Ok(vec![*b, p.channels(), p.size, p.size])
                }
                _ => Err(mismatch(vec![0, 1, p.size, p.size])),
            },
            Layer::TriangularMask => match input {
                [_, _, h, w] if h == w => Ok(input.to_vec()),
                _ => Err(mismatch(vec![0, 0, 0, 0])),
            },
            Layer::Flatten => match input {
                [b, rest @ ..] => Ok(vec![*b, rest.iter().product()]),
                [] => Err(mismatch(vec![0])),
            },
            Layer::Relu | Layer::Dropout { .. } => Ok(input.to_vec()),
        }
    }

    /// Forward pass. Dropout is only active when `rng` is given.
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        rng: Option<&mut R>,
        keep_cache: bool,
    ) -> Result<(Tensor, Cache)> {
        let out_shape = self.output_shape(x.shape())?;
        let mut y = Tensor::zeros(out_shape.clone());
        let mut cache = Cache::None;
        match self {
            Layer::Dense(d) => {
                let b = x.batch();
                let out = y.data_mut();
                for row in out.chunks_mut(d.outputs) {
                    row.copy_from_slice(&d.bias.value);
                }
                gemm(b, d.inputs, d.outputs, 1.0, x.data(), false, &d.weight.value, true, 1.0, out);
            }
            Layer::Conv2d(c) => {
                let [b, ch, h, w] = x.shape()[..] else { unreachable!() };
                let (oh, ow) = (out_shape[2], out_shape[3]);
                let p = oh * ow;
                let kk = ch * c.kernel * c.kernel;
                let mut all_cols = if keep_cache { vec![0.0; b * kk * p] } else { Vec::new() };
                let mut cols = vec![0.0; kk * p];
                for s in 0..b {
                    let xs = &x.data()[s * ch * h * w..(s + 1) * ch * h * w];
                    im2col(xs, ch, h, w, c.kernel, &mut cols);
                    let ys = &mut y.data_mut()[s * c.out_channels * p..(s + 1) * c.out_channels * p];
                    for (o, plane) in ys.chunks_mut(p).enumerate() {
                        plane.fill(c.bias.value[o]);
                    }
                    gemm(c.out_channels, kk, p, 1.0, &c.weight.value, false, &cols, false, 1.0, ys);
                    if keep_cache {
                        all_cols[s * kk * p..(s + 1) * kk * p].copy_from_slice(&cols);
                    }
                }
                if keep_cache {
                    cache = Cache::Cols(all_cols);
                }
            }
            Layer::Relu => {
                for (o, &v) in y.data_mut().iter_mut().zip(x.data()) {
                    *o = v.max(0.0);
                }
            }
            Layer::Dropout { rate } => match rng {
                Some(rng) if *rate > 0.0 => {
                    let scale = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.gen::<f64>() >= *rate { scale } else { 0.0 })
                        .collect();
                    for ((o, &v), &m) in y.data_mut().iter_mut().zip(x.data()).zip(&mask) {
                        *o = v * m;
                    }
                    cache = Cache::Mask(mask);
                }
                _ => y.data_mut().copy_from_slice(x.data()),
            },
            Layer::Flatten => y.data_mut().copy_from_slice(x.data()),
            Layer::Probe(pr) => {
                let n = pr.size;
                let chans = pr.channels();
                for s in 0..x.batch() {
                    let a = &x.data()[s * n * n..(s + 1) * n * n];
                    let total: f64 = a.iter().sum();
                    let ys = &mut y.data_mut()[s * chans * n * n..(s + 1) * chans * n * n];
                    for (c, plane) in ys.chunks_mut(n * n).enumerate() {
                        let r = &pr.row.value[c * n..(c + 1) * n];
                        let q = &pr.col.value[c * n..(c + 1) * n];
                        // Weighted sum of rows (indexed by column) and of columns (by row).
                        let row_profile: Vec<f64> = (0..n)
                            .map(|j| (0..n).map(|k| r[k] * a[k * n + j]).sum())
                            .collect();
                        let col_profile: Vec<f64> = (0..n)
                            .map(|i| (0..n).map(|k| a[i * n + k] * q[k]).sum())
                            .collect();
                        let density = pr.beta.value[c] * total / (n * n) as f64;
                        for i in 0..n {
                            for j in 0..n {
                                plane[i * n + j] = pr.alpha.value[c] * a[i * n + j]
                                    + row_profile[j]
                                    + col_profile[i]
                                    + density;
                            }
                        }
                    }
                }
            }
            Layer::TriangularMask => {
                let n = x.shape()[2];
                for (plane_out, plane_in) in y.data_mut().chunks_mut(n * n).zip(x.data().chunks(n * n)) {
                    for i in 0..n {
                        plane_out[i * n + i..(i + 1) * n].copy_from_slice(&plane_in[i * n + i..(i + 1) * n]);
                    }
                }
            }
        }
        Ok((y, cache))
    }

    /// Backward pass. Accumulates parameter gradients into `grads` (one
    /// buffer per entry of [`Layer::params`]) and returns the input gradient
    /// when `need_dx` is set.
    pub(crate) fn backward(
        &self,
        x: &Tensor,
        cache: &Cache,
        dy: &Tensor,
        grads: &mut [Vec<f64>],
        need_dx: bool,
    ) -> Option<Tensor> {
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape().to_vec()));
        match self {
            Layer::Dense(d) => {
                let b = x.batch();
                let (gw, gb) = grads.split_at_mut(1);
                if d.weight.trainable {
                    gemm(d.outputs, b, d.inputs, 1.0, dy.data(), true, x.data(), false, 1.0, &mut gw[0]);
                }
                if d.bias.trainable {
                    for row in dy.data().chunks(d.outputs) {
                        for (g, &v) in gb[0].iter_mut().zip(row) {
                            *g += v;
                        }
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    gemm(b, d.outputs, d.inputs, 1.0, dy.data(), false, &d.weight.value, false, 0.0, dx.data_mut());
                }
            }
            Layer::Conv2d(c) => {
                let [b, ch, h, w] = x.shape()[..] else { unreachable!() };
                let (oh, ow) = (dy.shape()[2], dy.shape()[3]);
                let p = oh * ow;
                let kk = ch * c.kernel * c.kernel;
                let Cache::Cols(all_cols) = cache else {
                    panic!("conv backward without cached columns");
                };
                let (gw, gb) = grads.split_at_mut(1);
                let mut dcols = vec![0.0; kk * p];
                for s in 0..b {
                    let cols = &all_cols[s * kk * p..(s + 1) * kk * p];
                    let dys = &dy.data()[s * c.out_channels * p..(s + 1) * c.out_channels * p];
                    if c.weight.trainable {
                        gemm(c.out_channels, p, kk, 1.0, dys, false, cols, true, 1.0, &mut gw[0]);
                    }
                    if c.bias.trainable {
                        for (g, plane) in gb[0].iter_mut().zip(dys.chunks(p)) {
                            *g += plane.iter().sum::<f64>();
                        }
                    }
                    if let Some(dx) = dx.as_mut() {
                        gemm(kk, c.out_channels, p, 1.0, &c.weight.value, true, dys, false, 0.0, &mut dcols);
                        let dxs = &mut dx.data_mut()[s * ch * h * w..(s + 1) * ch * h * w];
                        col2im(&dcols, ch, h, w, c.kernel, dxs);
                    }
                }
            }
            Layer::Relu => {
                if let Some(dx) = dx.as_mut() {
                    for ((o, &g), &v) in dx.data_mut().iter_mut().zip(dy.data()).zip(x.data()) {
                        *o = if v > 0.0 { g } else { 0.0 };
                    }
                }
            }
            Layer::Dropout { .. } => {
                if let Some(dx) = dx.as_mut() {
                    match cache {
                        Cache::Mask(mask) => {
                            for ((o, &g), &m) in dx.data_mut().iter_mut().zip(dy.data()).zip(mask) {
                                *o = g * m;
                            }
                        }
                        _ => dx.data_mut().copy_from_slice(dy.data()),
                    }
                }
            }
            Layer::Flatten => {
                if let Some(dx) = dx.as_mut() {
                    dx.data_mut().copy_from_slice(dy.data());
                }
            }
            Layer::Probe(pr) => {
                if let Some(dx) = dx.as_mut() {
                    let n = pr.size;
                    let chans = pr.channels();
                    for s in 0..x.batch() {
                        let g_all = &dy.data()[s * chans * n * n..(s + 1) * chans * n * n];
                        let da = &mut dx.data_mut()[s * n * n..(s + 1) * n * n];
                        for (c, g) in g_all.chunks(n * n).enumerate() {
                            let r = &pr.row.value[c * n..(c + 1) * n];
                            let q = &pr.col.value[c * n..(c + 1) * n];
                            let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| g[i * n + j]).sum()).collect();
                            let row_sums: Vec<f64> = (0..n).map(|i| g[i * n..(i + 1) * n].iter().sum()).collect();
                            let density = pr.beta.value[c] * g.iter().sum::<f64>() / (n * n) as f64;
                            for k in 0..n {
                                for j in 0..n {
                                    da[k * n + j] += pr.alpha.value[c] * g[k * n + j]
                                        + r[k] * col_sums[j]
                                        + q[j] * row_sums[k]
                                        + density;
                                }
                            }
                        }
                    }
                }
            }
            Layer::TriangularMask => {
                if let Some(dx) = dx.as_mut() {
                    let n = x.shape()[2];
                    for (out, g) in dx.data_mut().chunks_mut(n * n).zip(dy.data().chunks(n * n)) {
                        for i in 0..n {
                            out[i * n + i..(i + 1) * n].copy_from_slice(&g[i * n + i..(i + 1) * n]);
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Unfolds a `ch x h x w` image into a `(ch k k) x (oh ow)` column matrix.
fn im2col(x: &[f64], ch: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    for c in 0..ch {
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((c * k + ki) * k + kj) * p..][..p];
                for i in 0..oh {
                    let src = &x[c * h * w + (i + ki) * w + kj..][..ow];
                    row[i * ow..(i + 1) * ow].copy_from_slice(src);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into image positions.
fn col2im(cols: &[f64], ch: usize, h: usize, w: usize, k: usize, x: &mut [f64]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    for c in 0..ch {
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((c * k + ki) * k + kj) * p..][..p];
                for i in 0..oh {
                    let dst = &mut x[c * h * w + (i + ki) * w + kj..][..ow];
                    for (d, &v) in dst.iter_mut().zip(&row[i * ow..(i + 1) * ow]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn im2col_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for arbitrary x and c.
        let (ch, h, w, k) = (2, 5, 4, 3);
        let x: Vec<f64> = (0..ch * h * w).map(|v| (v as f64 * 0.37).sin()).collect();
        let p = (h - k + 1) * (w - k + 1);
        let c: Vec<f64> = (0..ch * k * k * p).map(|v| (v as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&x, ch, h, w, k, &mut cols);
        let mut back = vec![0.0; x.len()];
        col2im(&c, ch, h, w, k, &mut back);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn triangular_mask_keeps_upper_part() {
        let x = Tensor::new(vec![1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let (y, _) = Layer::TriangularMask.forward::<ChaCha8Rng>(&x, None, false).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 0.0, 5.0, 6.0, 0.0, 0.0, 9.0]);
    }

    #[test]
    fn dropout_is_identity_at_inference() {
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        let d = Layer::Dropout { rate: 0.2 };
        let (y, _) = d.forward::<ChaCha8Rng>(&x, None, false).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn dropout_preserves_mean_in_training() {
        use rand::SeedableRng;
        let x = Tensor::new(vec![1, 100_000], vec![1.0; 100_000]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (y, _) = Layer::Dropout { rate: 0.2 }.forward(&x, Some(&mut rng), true).unwrap();
        let mean = y.data().iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.01);
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.2).abs() < 0.01);
    }

    #[test]
    fn shape_errors() {
        let d = Layer::Dense(Dense {
            inputs: 4,
            outputs: 2,
            weight: Param::learnable(vec![0.0; 8]),
            bias: Param::learnable(vec![0.0; 2]),
        });
        assert!(d.output_shape(&[3, 5]).is_err());
        assert_eq!(d.output_shape(&[3, 4]).unwrap(), vec![3, 2]);
        assert_eq!(Layer::Flatten.output_shape(&[2, 3, 4, 5]).unwrap(), vec![2, 60]);
    }
}
