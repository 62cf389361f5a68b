use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `out[m×n] += a[m×k] · b[k×n]`
fn matmul_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
fn matmul_bt_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            out[i * n + j] += s;
        }
    }
}

/// `out[m×n] += a[k×m]ᵀ · b[k×n]`
fn matmul_at_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let api = a[p * m + i];
            if api == T::zero() {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += api * bv;
            }
        }
    }
}

fn kaiming<T: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(normal.sample(rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches generated data")
}

#[derive(Debug, Clone)]
pub struct Conv2d<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Conv2d {
            weight: kaiming(&[out_channels, in_channels, kernel, kernel], fan_in, rng),
            bias: Tensor::zeros(&[out_channels]),
            kernel,
            stride,
            padding,
            input: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Result<Self> {
        weight.expect_rank("conv2d weight", 4)?;
        let (o, k) = (weight.shape()[0], weight.shape()[2]);
        if weight.shape()[3] != k || bias.shape() != [o] {
            return Err(Error::shape("conv2d parts", &[o, weight.shape()[1], k, k], weight.shape()));
        }
        Ok(Conv2d {
            weight,
            bias,
            kernel: k,
            stride,
            padding,
            input: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 4 || input[1] != self.in_channels() {
            return Err(Error::shape(
                "conv2d",
                &[input.first().copied().unwrap_or(0), self.in_channels(), 0, 0],
                input,
            ));
        }
        let (h, w) = (input[2] + 2 * self.padding, input[3] + 2 * self.padding);
        if h < self.kernel || w < self.kernel {
            return Err(Error::shape("conv2d", &[input[0], input[1], self.kernel, self.kernel], input));
        }
        Ok(vec![
            input[0],
            self.out_channels(),
            (h - self.kernel) / self.stride + 1,
            (w - self.kernel) / self.stride + 1,
        ])
    }

    #[allow(clippy::too_many_arguments)]
    fn im2col(&self, x: &[T], c: usize, h: usize, w: usize, oh: usize, ow: usize, cols: &mut [T]) {
        let k = self.kernel;
        let p = oh * ow;
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            dst[oy * ow + ox] = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                x[(ci * h + iy as usize) * w + ix as usize]
                            } else {
                                T::zero()
                            };
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn col2im(&self, cols: &[T], c: usize, h: usize, w: usize, oh: usize, ow: usize, dx: &mut [T]) {
        let k = self.kernel;
        let p = oh * ow;
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            dx[(ci * h + iy as usize) * w + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (o, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
        let ckk = c * self.kernel * self.kernel;
        let p = oh * ow;
        let mut out = Tensor::zeros(&out_shape);
        let mut cols = vec![T::zero(); ckk * p];
        for b in 0..n {
            self.im2col(x.item(b), c, h, w, oh, ow, &mut cols);
            let dst = out.item_mut(b);
            for (oc, chunk) in dst.chunks_mut(p).enumerate() {
                chunk.iter_mut().for_each(|v| *v = self.bias.data()[oc]);
            }
            matmul_acc(self.weight.data(), &cols, dst, o, ckk, p);
        }
        self.input = Some(x.detach());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::State("conv2d backward called before forward".into()))?;
        let out_shape = self.output_shape(x.shape())?;
        if grad_out.shape() != out_shape.as_slice() {
            return Err(Error::shape("conv2d backward", &out_shape, grad_out.shape()));
        }
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (o, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
        let ckk = c * self.kernel * self.kernel;
        let p = oh * ow;
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = vec![T::zero(); ckk * p];
        let mut dcols = vec![T::zero(); ckk * p];
        let mut dw = vec![T::zero(); o * ckk];
        let mut db = vec![T::zero(); o];
        for b in 0..n {
            let gy = grad_out.item(b);
            self.im2col(x.item(b), c, h, w, oh, ow, &mut cols);
            matmul_bt_acc(gy, &cols, &mut dw, o, p, ckk);
            for (oc, chunk) in gy.chunks(p).enumerate() {
                db[oc] += chunk.iter().copied().sum::<T>();
            }
            dcols.iter_mut().for_each(|v| *v = T::zero());
            matmul_at_acc(self.weight.data(), gy, &mut dcols, ckk, o, p);
            self.col2im(&dcols, c, h, w, oh, ow, dx.item_mut(b));
        }
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        self.input = Some(x);
        Ok(dx)
    }
}

fn accumulate<T: Scalar>(param: &mut Tensor<T>, delta: &[T]) {
    for (g, &d) in param.grad_or_zeros().iter_mut().zip(delta) {
        *g += d;
    }
}

/// Fully connected layer `y = x·Wᵀ + b` over `(batch, in)` inputs.
#[derive(Debug, Clone)]
pub struct Linear<T: Scalar = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        Linear {
            weight: kaiming(&[out_features, in_features], in_features, rng),
            bias: Tensor::zeros(&[out_features]),
            input: None,
        }
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[out_features, in_features]),
            bias: Tensor::zeros(&[out_features]),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 || input[1] != self.in_features() {
            return Err(Error::shape(
                "linear",
                &[input.first().copied().unwrap_or(0), self.in_features()],
                input,
            ));
        }
        Ok(vec![input[0], self.out_features()])
    }

    /// Forward pass without caching; safe to call on a shared head.
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.output_shape(x.shape())?;
        let (n, i, o) = (shape[0], self.in_features(), shape[1]);
        let mut out = Tensor::zeros(&shape);
        for b in 0..n {
            out.item_mut(b).copy_from_slice(self.bias.data());
        }
        matmul_bt_acc(x.data(), self.weight.data(), out.data_mut(), n, i, o);
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.apply(x)?;
        self.input = Some(x.detach());
        Ok(out)
    }

    /// Accumulates parameter gradients for an explicit input and returns
    /// the gradient with respect to that input.
    pub fn backward_from(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.output_shape(x.shape())?;
        if grad_out.shape() != shape.as_slice() {
            return Err(Error::shape("linear backward", &shape, grad_out.shape()));
        }
        let (n, i, o) = (shape[0], self.in_features(), shape[1]);
        let mut dw = vec![T::zero(); o * i];
        matmul_at_acc(grad_out.data(), x.data(), &mut dw, o, n, i);
        let mut db = vec![T::zero(); o];
        for b in 0..n {
            for (d, &g) in db.iter_mut().zip(grad_out.item(b)) {
                *d += g;
            }
        }
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        let mut dx = Tensor::zeros(x.shape());
        matmul_acc(grad_out.data(), self.weight.data(), dx.data_mut(), n, o, i);
        Ok(dx)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::State("linear backward called before forward".into()))?;
        let dx = self.backward_from(&x, grad_out);
        self.input = Some(x);
        dx
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Relu {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mask: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
        let data = x
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { T::zero() })
            .collect();
        self.mask = Some((x.shape().to_vec(), mask));
        Tensor::from_vec(x.shape(), data)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, mask) = self
            .mask
            .as_ref()
            .ok_or_else(|| Error::State("relu backward called before forward".into()))?;
        if grad_out.shape() != shape.as_slice() {
            return Err(Error::shape("relu backward", shape, grad_out.shape()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor::from_vec(shape, data)
    }
}

/// Max pooling with square window; ties resolve to the first maximum.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            argmax: None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 4 || input[2] < self.kernel || input[3] < self.kernel {
            return Err(Error::shape("maxpool2d", &[0, 0, self.kernel, self.kernel], input));
        }
        Ok(vec![
            input[0],
            input[1],
            (input[2] - self.kernel) / self.stride + 1,
            (input[3] - self.kernel) / self.stride + 1,
        ])
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.output_shape(x.shape())?;
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let (oh, ow) = (shape[2], shape[3]);
        let planes = shape[0] * shape[1];
        let mut out = Tensor::zeros(&shape);
        let mut argmax = vec![0usize; out.len()];
        let src = x.data();
        for pl in 0..planes {
            let base = pl * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * self.stride * w + ox * self.stride;
                    for ky in 0..self.kernel {
                        for kx in 0..self.kernel {
                            let idx = base + (oy * self.stride + ky) * w + ox * self.stride + kx;
                            if src[idx] > src[best] {
                                best = idx;
                            }
                        }
                    }
                    let o = (pl * oh + oy) * ow + ox;
                    out.data_mut()[o] = src[best];
                    argmax[o] = best;
                }
            }
        }
        self.argmax = Some((x.shape().to_vec(), argmax));
        Ok(out)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (in_shape, argmax) = self
            .argmax
            .as_ref()
            .ok_or_else(|| Error::State("maxpool2d backward called before forward".into()))?;
        if grad_out.len() != argmax.len() {
            return Err(Error::shape("maxpool2d backward", &[argmax.len()], &[grad_out.len()]));
        }
        let mut dx = Tensor::zeros(in_shape);
        for (&g, &i) in grad_out.data().iter().zip(argmax) {
            dx.data_mut()[i] += g;
        }
        Ok(dx)
    }
}

/// Global average pooling `(N, C, H, W) -> (N, C)`.
#[derive(Debug, Clone, Default)]
pub struct Gap {
    in_shape: Option<Vec<usize>>,
}

impl Gap {
    pub fn output_shape(input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 4 {
            return Err(Error::shape("gap", &[0, 0, 0, 0], input));
        }
        Ok(vec![input[0], input[1]])
    }

    pub fn apply<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = Self::output_shape(x.shape())?;
        let hw = x.shape()[2] * x.shape()[3];
        let inv = T::from_f64_lossy(1.0 / hw as f64);
        let data = x
            .data()
            .chunks(hw)
            .map(|plane| plane.iter().copied().sum::<T>() * inv)
            .collect();
        Tensor::from_vec(&shape, data)
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = Self::apply(x)?;
        self.in_shape = Some(x.shape().to_vec());
        Ok(out)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let in_shape = self
            .in_shape
            .as_ref()
            .ok_or_else(|| Error::State("gap backward called before forward".into()))?;
        Self::backward_for(in_shape, grad_out)
    }

    pub fn backward_for<T: Scalar>(in_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let expected = Self::output_shape(in_shape)?;
        if grad_out.shape() != expected.as_slice() {
            return Err(Error::shape("gap backward", &expected, grad_out.shape()));
        }
        let hw = in_shape[2] * in_shape[3];
        let inv = T::from_f64_lossy(1.0 / hw as f64);
        let mut dx = Tensor::zeros(in_shape);
        for (plane, &g) in dx.data_mut().chunks_mut(hw).zip(grad_out.data()) {
            plane.iter_mut().for_each(|v| *v = g * inv);
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T: Scalar = f32> {
    Conv2d(Conv2d<T>),
    Linear(Linear<T>),
    Relu(Relu),
    MaxPool2d(MaxPool2d),
    Gap(Gap),
    Identity(Option<Vec<usize>>),
}

impl<T: Scalar> Layer<T> {
    pub fn identity() -> Self {
        Layer::Identity(None)
    }

    pub fn relu() -> Self {
        Layer::Relu(Relu::default())
    }

    pub fn gap() -> Self {
        Layer::Gap(Gap::default())
    }

    pub fn maxpool(kernel: usize, stride: usize) -> Self {
        Layer::MaxPool2d(MaxPool2d::new(kernel, stride))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Linear(_) => "linear",
            Layer::Relu(_) => "relu",
            Layer::MaxPool2d(_) => "maxpool2d",
            Layer::Gap(_) => "gap",
            Layer::Identity(_) => "identity",
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2d(l) => l.output_shape(input),
            Layer::Linear(l) => l.output_shape(input),
            Layer::Relu(_) | Layer::Identity(_) => Ok(input.to_vec()),
            Layer::MaxPool2d(l) => l.output_shape(input),
            Layer::Gap(_) => Gap::output_shape(input),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.forward(x),
            Layer::Linear(l) => l.forward(x),
            Layer::Relu(l) => l.forward(x),
            Layer::MaxPool2d(l) => l.forward(x),
            Layer::Gap(l) => l.forward(x),
            Layer::Identity(seen) => {
                *seen = Some(x.shape().to_vec());
                Ok(x.detach())
            }
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d(l) => l.backward(grad_out),
            Layer::Linear(l) => l.backward(grad_out),
            Layer::Relu(l) => l.backward(grad_out),
            Layer::MaxPool2d(l) => l.backward(grad_out),
            Layer::Gap(l) => l.backward(grad_out),
            Layer::Identity(seen) => match seen {
                Some(shape) if shape.as_slice() == grad_out.shape() => Ok(grad_out.detach()),
                Some(shape) => Err(Error::shape("identity backward", shape, grad_out.shape())),
                None => Err(Error::State("identity backward called before forward".into())),
            },
        }
    }

    /// Trainable parameters as `(suffix, tensor)` pairs in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::Linear(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::Linear(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            _ => Vec::new(),
        }
    }
}
