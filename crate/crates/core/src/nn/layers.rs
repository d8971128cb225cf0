use rand::Rng;

use super::ops::{col2im, gemm, im2col};
use super::{Init, Module, NnRng, Param, Real, Tensor};

struct ConvCache<T: Real> {
    cols: Vec<T>,
    in_shape: (usize, usize, usize),
    out_hw: (usize, usize),
}

/// 2-D convolution with square kernel, symmetric zero padding.
pub struct Conv2d<T: Real> {
    weight: Param<T>,
    bias: Param<T>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    cache: Option<ConvCache<T>>,
}

impl<T: Real> Conv2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        assert!(kernel >= 1 && stride >= 1);
        let shape = [out_channels, in_channels, kernel, kernel];
        let w = init.weights(shape, in_channels * kernel * kernel, rng);
        Self {
            weight: Param::new(format!("{name}.weight"), shape.to_vec(), w, true),
            bias: Param::zeros(format!("{name}.bias"), vec![out_channels], false),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> &Param<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Param<T> {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut Param<T> {
        &mut self.bias
    }

    /// Spatial output size for an input of `height x width`.
    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let k = self.kernel;
        assert!(
            height + 2 * self.pad >= k && width + 2 * self.pad >= k,
            "input {height}x{width} smaller than kernel {k}"
        );
        (
            (height + 2 * self.pad - k) / self.stride + 1,
            (width + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }

    fn compute(&self, x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
        let (c, h, w) = x.shape();
        assert_eq!(c, self.in_channels, "{}: channel mismatch", self.weight.name);
        let (oh, ow) = self.output_size(h, w);
        let cols = if self.is_pointwise() {
            x.data().to_vec()
        } else {
            im2col(x.data(), c, h, w, self.kernel, self.stride, self.pad, oh, ow)
        };
        let n = oh * ow;
        let kk = c * self.kernel * self.kernel;
        let mut out = vec![T::zero(); self.out_channels * n];
        gemm(self.out_channels, kk, n, &self.weight.value, false, &cols, false, T::zero(), &mut out);
        for (o, &b) in self.bias.value.iter().enumerate() {
            out[o * n..(o + 1) * n].iter_mut().for_each(|v| *v += b);
        }
        (Tensor::from_vec(self.out_channels, oh, ow, out), cols)
    }
}

impl<T: Real> Module<T> for Conv2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        self.compute(x).0
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut NnRng) -> Tensor<T> {
        let (y, cols) = self.compute(x);
        self.cache = Some(ConvCache {
            cols,
            in_shape: x.shape(),
            out_hw: (y.height(), y.width()),
        });
        y
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let cache = self.cache.take().expect("Conv2d::backward without forward_train");
        let (c, h, w) = cache.in_shape;
        let (oh, ow) = cache.out_hw;
        let n = oh * ow;
        let kk = c * self.kernel * self.kernel;
        let g = grad.data();
        gemm(self.out_channels, n, kk, g, false, &cache.cols, true, T::one(), &mut self.weight.grad);
        for (o, db) in self.bias.grad.iter_mut().enumerate() {
            *db += g[o * n..(o + 1) * n].iter().copied().sum::<T>();
        }
        let mut dcols = vec![T::zero(); kk * n];
        gemm(kk, self.out_channels, n, &self.weight.value, true, g, false, T::zero(), &mut dcols);
        let dx = if self.is_pointwise() {
            dcols
        } else {
            col2im(&dcols, c, h, w, self.kernel, self.stride, self.pad, oh, ow)
        };
        Tensor::from_vec(c, h, w, dx)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Transposed ("fractionally strided") convolution; weight layout
/// `[in, out, k, k]`. Output side is `(in - 1) * stride - 2 * pad + k`.
pub struct ConvTranspose2d<T: Real> {
    weight: Param<T>,
    bias: Param<T>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Real> ConvTranspose2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let shape = [in_channels, out_channels, kernel, kernel];
        // Each output pixel receives about in * (k / stride)^2 taps.
        let fan_in = (in_channels * kernel * kernel / (stride * stride)).max(1);
        let w = init.weights(shape, fan_in, rng);
        Self {
            weight: Param::new(format!("{name}.weight"), shape.to_vec(), w, true),
            bias: Param::zeros(format!("{name}.bias"), vec![out_channels], false),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            cache: None,
        }
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let grow = |n: usize| (n - 1) * self.stride + self.kernel - 2 * self.pad;
        (grow(height), grow(width))
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
}

impl<T: Real> Module<T> for ConvTranspose2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (c, h, w) = x.shape();
        assert_eq!(c, self.in_channels, "{}: channel mismatch", self.weight.name);
        let (oh, ow) = self.output_size(h, w);
        let rows = self.out_channels * self.kernel * self.kernel;
        let mut cols = vec![T::zero(); rows * h * w];
        gemm(rows, c, h * w, &self.weight.value, true, x.data(), false, T::zero(), &mut cols);
        let mut out = col2im(&cols, self.out_channels, oh, ow, self.kernel, self.stride, self.pad, h, w);
        let plane = oh * ow;
        for (o, &b) in self.bias.value.iter().enumerate() {
            out[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v += b);
        }
        Tensor::from_vec(self.out_channels, oh, ow, out)
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut NnRng) -> Tensor<T> {
        self.cache = Some(x.clone());
        self.forward(x)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let x = self.cache.take().expect("ConvTranspose2d::backward without forward_train");
        let (c, h, w) = x.shape();
        let (_, oh, ow) = grad.shape();
        let rows = self.out_channels * self.kernel * self.kernel;
        let gcols = im2col(grad.data(), self.out_channels, oh, ow, self.kernel, self.stride, self.pad, h, w);
        gemm(c, h * w, rows, x.data(), false, &gcols, true, T::one(), &mut self.weight.grad);
        let plane = oh * ow;
        for (o, db) in self.bias.grad.iter_mut().enumerate() {
            *db += grad.data()[o * plane..(o + 1) * plane].iter().copied().sum::<T>();
        }
        let mut dx = vec![T::zero(); c * h * w];
        gemm(c, rows, h * w, &self.weight.value, false, &gcols, false, T::zero(), &mut dx);
        Tensor::from_vec(c, h, w, dx)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Max pooling. With `same` padding the output side is `ceil(n / stride)`
/// and windows are clipped at the bottom/right border (the darknet rule that
/// lets a stride-1 pool keep its input size).
pub struct MaxPool2d {
    kernel: usize,
    stride: usize,
    same: bool,
    cache: Option<(Vec<usize>, (usize, usize, usize))>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        Self {
            kernel,
            stride,
            same: false,
            cache: None,
        }
    }

    pub fn same(kernel: usize, stride: usize) -> Self {
        Self {
            same: true,
            ..Self::new(kernel, stride)
        }
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let f = |n: usize| {
            if self.same {
                n.div_ceil(self.stride)
            } else {
                (n - self.kernel) / self.stride + 1
            }
        };
        (f(height), f(width))
    }

    fn compute<T: Real>(&self, x: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
        let (c, h, w) = x.shape();
        let (oh, ow) = self.output_size(h, w);
        let mut out = Vec::with_capacity(c * oh * ow);
        let mut arg = Vec::with_capacity(c * oh * ow);
        let data = x.data();
        for ch in 0..c {
            let base = ch * h * w;
            for oy in 0..oh {
                let y0 = oy * self.stride;
                let y1 = (y0 + self.kernel).min(h);
                for ox in 0..ow {
                    let x0 = ox * self.stride;
                    let x1 = (x0 + self.kernel).min(w);
                    let mut best = base + y0 * w + x0;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            let idx = base + yy * w + xx;
                            if data[idx] > data[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(data[best]);
                    arg.push(best);
                }
            }
        }
        (Tensor::from_vec(c, oh, ow, out), arg)
    }
}

impl<T: Real> Module<T> for MaxPool2d {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        self.compute(x).0
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut NnRng) -> Tensor<T> {
        let (y, arg) = self.compute(x);
        self.cache = Some((arg, x.shape()));
        y
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let (arg, (c, h, w)) = self.cache.take().expect("MaxPool2d::backward without forward_train");
        let mut dx = vec![T::zero(); c * h * w];
        for (&i, &g) in arg.iter().zip(grad.data()) {
            dx[i] += g;
        }
        Tensor::from_vec(c, h, w, dx)
    }
}

/// Pointwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

pub struct Activation<T: Real> {
    kind: ActivationKind,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Real> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, cache: None }
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu)
    }

    pub fn leaky(slope: f64) -> Self {
        Self::new(ActivationKind::LeakyRelu(slope))
    }

    pub fn sigmoid() -> Self {
        Self::new(ActivationKind::Sigmoid)
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh)
    }

    pub fn apply(kind: ActivationKind, v: T) -> T {
        match kind {
            ActivationKind::Relu => v.max(T::zero()),
            ActivationKind::LeakyRelu(s) => {
                if v > T::zero() {
                    v
                } else {
                    v * T::of(s)
                }
            }
            ActivationKind::Sigmoid => sigmoid(v),
            ActivationKind::Tanh => v.tanh(),
        }
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Module<T> for Activation<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let kind = self.kind;
        x.map(|v| Self::apply(kind, v))
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut NnRng) -> Tensor<T> {
        let y = self.forward(x);
        self.cache = Some((x.clone(), y.clone()));
        y
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let (x, y) = self.cache.take().expect("Activation::backward without forward_train");
        let (c, h, w) = x.shape();
        let g = grad.data();
        let dx: Vec<T> = match self.kind {
            ActivationKind::Relu => x
                .data()
                .iter()
                .zip(g)
                .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                .collect(),
            ActivationKind::LeakyRelu(s) => {
                let s = T::of(s);
                x.data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &g)| if v > T::zero() { g } else { g * s })
                    .collect()
            }
            ActivationKind::Sigmoid => y
                .data()
                .iter()
                .zip(g)
                .map(|(&s, &g)| g * s * (T::one() - s))
                .collect(),
            ActivationKind::Tanh => y
                .data()
                .iter()
                .zip(g)
                .map(|(&t, &g)| g * (T::one() - t * t))
                .collect(),
        };
        Tensor::from_vec(c, h, w, dx)
    }
}

/// Inverted dropout: active only in `forward_train`.
pub struct Dropout<T: Real> {
    probability: f64,
    mask: Option<Vec<T>>,
}

impl<T: Real> Dropout<T> {
    pub fn new(probability: f64) -> Self {
        assert!((0.0..1.0).contains(&probability), "dropout probability must be in [0, 1)");
        Self {
            probability,
            mask: None,
        }
    }
}

impl<T: Real> Module<T> for Dropout<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        x.clone()
    }

    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T> {
        if self.probability == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let scale = T::of(1.0 / (1.0 - self.probability));
        let mask: Vec<T> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.probability {
                    T::zero()
                } else {
                    scale
                }
            })
            .collect();
        let (c, h, w) = x.shape();
        let y = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::from_vec(c, h, w, y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        match self.mask.take() {
            None => grad.clone(),
            Some(mask) => {
                let (c, h, w) = grad.shape();
                let g = grad.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                Tensor::from_vec(c, h, w, g)
            }
        }
    }
}

/// Per-channel normalization over the spatial extent with learned affine
/// parameters. Identical in training and inference.
pub struct InstanceNorm<T: Real> {
    gamma: Param<T>,
    beta: Param<T>,
    eps: f64,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Real> InstanceNorm<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            gamma: Param::new(format!("{name}.gamma"), vec![channels], vec![T::one(); channels], false),
            beta: Param::zeros(format!("{name}.beta"), vec![channels], false),
            eps: 1e-5,
            cache: None,
        }
    }

    fn compute(&self, x: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Vec<T>) {
        let (c, h, w) = x.shape();
        let n = T::of((h * w) as f64);
        let mut xhat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        let mut inv_stds = Vec::with_capacity(c);
        for ch in 0..c {
            let plane = x.channel(ch);
            let mean = plane.iter().copied().sum::<T>() / n;
            let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv_std = T::one() / (var + T::of(self.eps)).sqrt();
            inv_stds.push(inv_std);
            let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
            for &v in plane {
                let xh = (v - mean) * inv_std;
                xhat.push(xh);
                y.push(g * xh + b);
            }
        }
        (
            Tensor::from_vec(c, h, w, y),
            Tensor::from_vec(c, h, w, xhat),
            inv_stds,
        )
    }
}

impl<T: Real> Module<T> for InstanceNorm<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        self.compute(x).0
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut NnRng) -> Tensor<T> {
        let (y, xhat, inv) = self.compute(x);
        self.cache = Some((xhat, inv));
        y
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let (xhat, inv) = self.cache.take().expect("InstanceNorm::backward without forward_train");
        let (c, h, w) = xhat.shape();
        let n = T::of((h * w) as f64);
        let mut dx = Vec::with_capacity(xhat.len());
        for ch in 0..c {
            let g = grad.channel(ch);
            let xh = xhat.channel(ch);
            let sum_g: T = g.iter().copied().sum();
            let sum_gx: T = g.iter().zip(xh).map(|(&a, &b)| a * b).sum();
            self.beta.grad[ch] += sum_g;
            self.gamma.grad[ch] += sum_gx;
            let scale = self.gamma.value[ch] * inv[ch] / n;
            for (&gi, &xi) in g.iter().zip(xh) {
                dx.push(scale * (n * gi - sum_g - xi * sum_gx));
            }
        }
        Tensor::from_vec(c, h, w, dx)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

/// Chain of modules applied in order.
#[derive(Default)]
pub struct Sequential<T: Real> {
    layers: Vec<Box<dyn Module<T>>>,
}

impl<T: Real> Sequential<T> {
    pub fn new() -> Self {
        Self { layers: Vec::new() }
    }

    pub fn push(&mut self, layer: impl Module<T> + 'static) -> &mut Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn with(mut self, layer: impl Module<T> + 'static) -> Self {
        self.push(layer);
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl<T: Real> Module<T> for Sequential<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur);
        }
        cur
    }

    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward_train(&cur, rng);
        }
        cur
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let mut cur = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(&cur);
        }
        cur
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for layer in &self.layers {
            layer.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for layer in &mut self.layers {
            layer.visit_params_mut(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> NnRng {
        NnRng::seed_from_u64(11)
    }

    fn input(c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(c, h, w, |c, y, x| ((c * 31 + y * 7 + x * 3) as f64 * 0.61 + 0.1).sin())
    }

    /// Central-difference check of d<out, probe>/d(input) and /d(params).
    fn check_module(mut m: impl Module<f64>, x: Tensor<f64>) {
        let mut r = rng();
        let y = m.forward_train(&x, &mut r);
        let probe = Tensor::from_fn(y.channels(), y.height(), y.width(), |c, yy, xx| {
            ((c * 13 + yy * 5 + xx) as f64 * 0.37).cos()
        });
        let dx = m.backward(&probe);
        let objective = |m: &dyn Module<f64>, x: &Tensor<f64>| -> f64 {
            m.forward(x).data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let eps = 1e-6;
        for i in (0..x.len()).step_by(3) {
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            let fd = (objective(&m, &xp) - objective(&m, &xm)) / (2.0 * eps);
            assert!((fd - dx.data()[i]).abs() < 1e-6, "input grad {i}: fd {fd} vs {}", dx.data()[i]);
        }
        let mut analytic = Vec::new();
        m.visit_params(&mut |p| analytic.push(p.grad.clone()));
        let counts: Vec<usize> = analytic.iter().map(Vec::len).collect();
        for (pi, &count) in counts.iter().enumerate() {
            for j in (0..count).step_by(2) {
                let bump = |m: &mut dyn Module<f64>, d: f64| {
                    let mut idx = 0;
                    m.visit_params_mut(&mut |p| {
                        if idx == pi {
                            p.value[j] += d;
                        }
                        idx += 1;
                    });
                };
                bump(&mut m, eps);
                let fp = objective(&m, &x);
                bump(&mut m, -2.0 * eps);
                let fm = objective(&m, &x);
                bump(&mut m, eps);
                let fd = (fp - fm) / (2.0 * eps);
                assert!(
                    (fd - analytic[pi][j]).abs() < 1e-6,
                    "param {pi}[{j}]: fd {fd} vs {}",
                    analytic[pi][j]
                );
            }
        }
    }

    #[test]
    fn conv_gradients() {
        let conv = Conv2d::<f64>::new("c", 2, 3, 3, 1, 1, Init::He { slope: 0.0 }, &mut rng());
        check_module(conv, input(2, 5, 4));
        let strided = Conv2d::<f64>::new("s", 2, 2, 4, 2, 1, Init::He { slope: 0.0 }, &mut rng());
        check_module(strided, input(2, 6, 6));
        let pointwise = Conv2d::<f64>::new("p", 3, 2, 1, 1, 0, Init::He { slope: 0.0 }, &mut rng());
        check_module(pointwise, input(3, 3, 3));
    }

    #[test]
    fn transposed_conv_gradients_and_shape() {
        let up = ConvTranspose2d::<f64>::new("u", 2, 3, 4, 2, 1, Init::Normal(0.3), &mut rng());
        assert_eq!(up.output_size(3, 5), (6, 10));
        check_module(up, input(2, 3, 5));
        let up8 = ConvTranspose2d::<f64>::new("u8", 2, 2, 16, 8, 4, Init::Normal(0.3), &mut rng());
        assert_eq!(up8.output_size(2, 3), (16, 24));
    }

    #[test]
    fn bilinear_transposed_conv_preserves_constants_in_the_interior() {
        let up = ConvTranspose2d::<f64>::new("u", 1, 1, 4, 2, 1, Init::Bilinear, &mut rng());
        let y = up.forward(&Tensor::filled(1, 4, 4, 2.0));
        for yy in 1..7 {
            for xx in 1..7 {
                assert!((y.at(0, yy, xx) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_gradients_and_sizes() {
        check_module(MaxPool2d::new(2, 2), input(2, 4, 6));
        let same = MaxPool2d::same(2, 1);
        assert_eq!(same.output_size(13, 13), (13, 13));
        check_module(same, input(1, 5, 5));
    }

    #[test]
    fn activation_and_norm_gradients() {
        check_module(Activation::<f64>::leaky(0.2), input(2, 3, 3));
        check_module(Activation::<f64>::sigmoid(), input(2, 3, 3));
        check_module(Activation::<f64>::tanh(), input(2, 3, 3));
        check_module(InstanceNorm::<f64>::new("n", 2), input(2, 4, 3));
    }

    #[test]
    fn dropout_is_identity_at_inference_and_scales_in_training() {
        let mut d = Dropout::<f64>::new(0.5);
        let x = Tensor::filled(1, 8, 8, 1.0);
        assert_eq!(d.forward(&x), x);
        let y = d.forward_train(&x, &mut rng());
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(y.data().iter().any(|&v| v == 0.0));
        let g = d.backward(&Tensor::filled(1, 8, 8, 1.0));
        assert_eq!(g, y);
    }
}
