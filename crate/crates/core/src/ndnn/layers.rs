use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Negative-side slope of the leaky-ReLU activation.
pub const LEAKY_SLOPE: f64 = 0.01;

/// 2-D convolution over HWC tensors. Weights are stored
/// `[k_h][k_w][c_in][c_out]` so the innermost loop runs over output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    pub k_h: usize,
    pub k_w: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(k: usize, c_in: usize, c_out: usize, stride: usize, padding: usize) -> Self {
        ConvLayer {
            k_h: k,
            k_w: k,
            c_in,
            c_out,
            stride,
            padding,
            weight: vec![T::zero(); k * k * c_in * c_out],
            bias: vec![T::zero(); c_out],
        }
    }

    /// He-uniform weights with bound √(6 / fan_in), zero bias.
    pub fn init<R: Rng>(
        k: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(k, c_in, c_out, stride, padding);
        let bound = (6.0 / (k * k * c_in) as f64).sqrt();
        for w in &mut layer.weight {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        layer
    }

    /// Weight count excluding biases.
    pub fn weight_count(&self) -> usize {
        self.k_h * self.k_w * self.c_in * self.c_out
    }

    #[inline]
    fn w_index(&self, ky: usize, kx: usize, ci: usize) -> usize {
        ((ky * self.k_w + kx) * self.c_in + ci) * self.c_out
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < self.k_h || pw < self.k_w {
            return Err(Error::Shape(format!(
                "input {h}x{w} smaller than kernel {}x{}",
                self.k_h, self.k_w
            )));
        }
        Ok(((ph - self.k_h) / self.stride + 1, (pw - self.k_w) / self.stride + 1))
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            k_h: self.k_h,
            k_w: self.k_w,
            c_in: self.c_in,
            c_out: self.c_out,
            stride: self.stride,
            padding: self.padding,
            weight: self.weight.iter().map(|v| U::from(*v).unwrap()).collect(),
            bias: self.bias.iter().map(|v| U::from(*v).unwrap()).collect(),
        }
    }
}

/// Input coordinate for kernel tap `k` at output position `o`, if inside the image.
#[inline]
fn tap(o: usize, k: usize, stride: usize, pad: usize, dim: usize) -> Option<usize> {
    let p = o * stride + k;
    if p < pad || p - pad >= dim {
        None
    } else {
        Some(p - pad)
    }
}

pub fn conv2d<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let (h, w, c) = input.hwc()?;
    if c != layer.c_in {
        return Err(Error::Shape(format!(
            "input {:?} has {c} channels but kernel {}x{}x{}x{} expects {}",
            input.shape(),
            layer.k_h,
            layer.k_w,
            layer.c_in,
            layer.c_out,
            layer.c_in
        )));
    }
    let (oh, ow) = layer.out_dims(h, w)?;
    let co = layer.c_out;
    let x = input.data();
    let mut out = vec![T::zero(); oh * ow * co];
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * co..][..co];
            acc.copy_from_slice(&layer.bias);
            for ky in 0..layer.k_h {
                let Some(iy) = tap(oy, ky, layer.stride, layer.padding, h) else {
                    continue;
                };
                for kx in 0..layer.k_w {
                    let Some(ix) = tap(ox, kx, layer.stride, layer.padding, w) else {
                        continue;
                    };
                    let pix = &x[(iy * w + ix) * c..][..c];
                    let base = layer.w_index(ky, kx, 0);
                    for (ci, &xv) in pix.iter().enumerate() {
                        let row = &layer.weight[base + ci * co..][..co];
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[oh, ow, co], out)
}

/// Accumulates parameter gradients into `grad` and returns the input gradient.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    grad_out: &Tensor<T>,
    grad: &mut ConvLayer<T>,
) -> Result<Tensor<T>> {
    let (h, w, c) = input.hwc()?;
    let (oh, ow) = layer.out_dims(h, w)?;
    let co = layer.c_out;
    if grad_out.shape() != [oh, ow, co] {
        return Err(Error::Shape(format!(
            "conv output gradient {:?} does not match {:?}",
            grad_out.shape(),
            [oh, ow, co]
        )));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut gin = vec![T::zero(); x.len()];
    for oy in 0..oh {
        for ox in 0..ow {
            let gpos = &g[(oy * ow + ox) * co..][..co];
            for (b, &gv) in grad.bias.iter_mut().zip(gpos) {
                *b += gv;
            }
            for ky in 0..layer.k_h {
                let Some(iy) = tap(oy, ky, layer.stride, layer.padding, h) else {
                    continue;
                };
                for kx in 0..layer.k_w {
                    let Some(ix) = tap(ox, kx, layer.stride, layer.padding, w) else {
                        continue;
                    };
                    let pbase = (iy * w + ix) * c;
                    let base = layer.w_index(ky, kx, 0);
                    for ci in 0..c {
                        let xv = x[pbase + ci];
                        let row = &layer.weight[base + ci * co..][..co];
                        let grow = &mut grad.weight[base + ci * co..][..co];
                        let mut dot = T::zero();
                        for ((gw, &wv), &gv) in grow.iter_mut().zip(row).zip(gpos) {
                            *gw += xv * gv;
                            dot += wv * gv;
                        }
                        gin[pbase + ci] += dot;
                    }
                }
            }
        }
    }
    Tensor::from_vec(input.shape(), gin)
}

/// Ceil-mode pooled size; the last window must start inside the input.
pub fn maxpool_out_dim(dim: usize, kernel: usize, stride: usize) -> usize {
    if dim <= kernel {
        return 1;
    }
    let mut out = (dim - kernel).div_ceil(stride) + 1;
    if (out - 1) * stride >= dim {
        out -= 1;
    }
    out
}

/// Flat input index of the maximum feeding each output element.
pub type PoolIndices = Vec<usize>;

/// Max pooling with windows clipped at the border (ceil mode).
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor<T>, PoolIndices)> {
    let (h, w, c) = input.hwc()?;
    let (oh, ow) = (maxpool_out_dim(h, kernel, stride), maxpool_out_dim(w, kernel, stride));
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut idx = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        let (y0, y1) = (oy * stride, (oy * stride + kernel).min(h));
        for ox in 0..ow {
            let (x0, x1) = (ox * stride, (ox * stride + kernel).min(w));
            for ch in 0..c {
                let mut best = (y0 * w + x0) * c + ch;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        let i = (iy * w + ix) * c + ch;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[oh, ow, c], out)?, idx))
}

/// Routes each output gradient to the argmax position of its window.
pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let mut gin = Tensor::zeros(input_shape);
    let d = gin.data_mut();
    for (&i, &g) in indices.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(gin)
}

/// Channelwise maximum over all spatial positions → 1×1×c.
pub fn global_maxpool<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let (h, w, c) = input.hwc()?;
    let x = input.data();
    let mut out = Vec::with_capacity(c);
    let mut idx = Vec::with_capacity(c);
    for ch in 0..c {
        let mut best = ch;
        for p in 1..h * w {
            if x[p * c + ch] > x[best] {
                best = p * c + ch;
            }
        }
        out.push(x[best]);
        idx.push(best);
    }
    Ok((Tensor::from_vec(&[1, 1, c], out)?, idx))
}

pub fn global_maxpool_backward<T: Scalar>(
    input_shape: &[usize],
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    maxpool2d_backward(input_shape, indices, grad_out)
}

pub fn leaky_relu<T: Scalar>(input: &Tensor<T>, slope: f64) -> Tensor<T> {
    let s = T::lit(slope);
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = *v * s;
        }
    }
    out
}

/// Gradient through leaky-ReLU given the pre-activation input.
pub fn leaky_relu_backward<T: Scalar>(pre: &Tensor<T>, grad_out: &Tensor<T>, slope: f64) -> Tensor<T> {
    let s = T::lit(slope);
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(pre.data()) {
        if x < T::zero() {
            *gv = *gv * s;
        }
    }
    g
}

/// Fully connected layer; `weight` is `n_in × n_out` row-major, so column
/// `j` holds the weights feeding output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer {
            n_in,
            n_out,
            weight: vec![T::zero(); n_in * n_out],
            bias: vec![T::zero(); n_out],
        }
    }

    pub fn init<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(n_in, n_out);
        let bound = (6.0 / n_in as f64).sqrt();
        for w in &mut layer.weight {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        layer
    }

    pub fn from_parts(n_in: usize, n_out: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weight.len() != n_in * n_out || bias.len() != n_out {
            return Err(Error::Shape(format!(
                "dense {n_in}->{n_out} needs {} weights and {n_out} biases",
                n_in * n_out
            )));
        }
        Ok(DenseLayer {
            n_in,
            n_out,
            weight,
            bias,
        })
    }

    pub fn weight_count(&self) -> usize {
        self.n_in * self.n_out
    }

    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            n_in: self.n_in,
            n_out: self.n_out,
            weight: self.weight.iter().map(|v| U::from(*v).unwrap()).collect(),
            bias: self.bias.iter().map(|v| U::from(*v).unwrap()).collect(),
        }
    }
}

pub fn dense<T: Scalar>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<Tensor<T>> {
    if input.len() != layer.n_in {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {:?}",
            layer.n_in,
            input.shape()
        )));
    }
    let mut out = layer.bias.clone();
    for (i, &x) in input.data().iter().enumerate() {
        let row = &layer.weight[i * layer.n_out..][..layer.n_out];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    Tensor::from_vec(&[layer.n_out], out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &DenseLayer<T>,
    grad_out: &Tensor<T>,
    grad: &mut DenseLayer<T>,
) -> Result<Tensor<T>> {
    if grad_out.len() != layer.n_out || input.len() != layer.n_in {
        return Err(Error::Shape("dense backward shape mismatch".into()));
    }
    let g = grad_out.data();
    for (b, &gv) in grad.bias.iter_mut().zip(g) {
        *b += gv;
    }
    let mut gin = vec![T::zero(); layer.n_in];
    for (i, &x) in input.data().iter().enumerate() {
        let row = &layer.weight[i * layer.n_out..][..layer.n_out];
        let grow = &mut grad.weight[i * layer.n_out..][..layer.n_out];
        let mut dot = T::zero();
        for ((gw, &w), &gv) in grow.iter_mut().zip(row).zip(g) {
            *gw += x * gv;
            dot += w * gv;
        }
        gin[i] = dot;
    }
    Tensor::from_vec(input.shape(), gin)
}

/// Concatenates two tensors into one flat vector.
pub fn concat<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    let n = data.len();
    Tensor::from_vec(&[n], data).expect("nonempty concat")
}

/// Splits a concatenated gradient back into the two operand gradients.
pub fn concat_backward<T: Scalar>(
    a_shape: &[usize],
    b_shape: &[usize],
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let na: usize = a_shape.iter().product();
    let nb: usize = b_shape.iter().product();
    if grad.len() != na + nb {
        return Err(Error::Shape("concat gradient length mismatch".into()));
    }
    Ok((
        Tensor::from_vec(a_shape, grad.data()[..na].to_vec())?,
        Tensor::from_vec(b_shape, grad.data()[na..].to_vec())?,
    ))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &[T]) -> Result<(T, Tensor<T>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    let n = T::from_usize(pred.len()).unwrap();
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target) {
        let d = p - t;
        loss += d * d;
        grad.push((d + d) / n);
    }
    Ok((loss / n, Tensor::from_vec(pred.shape(), grad)?))
}
