//! Differentiable building blocks: convolution, instance normalization,
//! pooling, upsampling, and pointwise nonlinearities.
//!
//! Each layer owns its parameters, accumulates gradients in place, and
//! caches whatever its backward pass needs when `train` is set. A backward
//! call must follow the forward call whose cache it consumes; training
//! drives each domain stream as forward-then-backward for exactly this
//! reason.

use rand_distr::{Distribution, StandardNormal};

use crate::par;
use crate::rng::Rng;
use crate::tensor::{self, sigmoid, Scalar, Tensor};

/// One named parameter tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param<S> {
    pub v: Vec<S>,
    pub g: Vec<S>,
    shape: Vec<usize>,
}

impl<S: Scalar> Param<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param {
            v: vec![S::zero(); n],
            g: vec![S::zero(); n],
            shape: shape.to_vec(),
        }
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        let mut p = Param::zeros(shape);
        p.v.fill(value);
        p
    }

    /// He-style normal init with the given standard deviation.
    pub fn normal(shape: &[usize], std: f64, rng: &mut Rng) -> Self {
        let mut p = Param::zeros(shape);
        for v in p.v.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = S::from_f64(z * std);
        }
        p
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(S::zero());
    }
}

/// 2-D convolution over NCHW tensors (square kernel, zero padding).
#[derive(Clone, Debug)]
pub struct Conv2d<S> {
    pub w: Param<S>,
    pub b: Param<S>,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Conv2d<S> {
    /// He-normal weights scaled for a ReLU-family activation with negative
    /// slope `leak` (0 for plain ReLU).
    pub fn new(
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        leak: f64,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = (cin * k * k) as f64;
        let std = (2.0 / ((1.0 + leak * leak) * fan_in)).sqrt();
        Conv2d {
            w: Param::normal(&[cout, cin, k, k], std, rng),
            b: Param::zeros(&[cout]),
            cin,
            cout,
            k,
            stride,
            pad,
            cache: None,
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let (n, cin, h, w) = x.shape();
        assert_eq!(cin, self.cin, "conv expected {} input channels, got {cin}", self.cin);
        let (ho, wo) = self.out_dims(h, w);
        let npix = ho * wo;
        let ck = self.cin * self.k * self.k;
        let mut y = Tensor::zeros(n, self.cout, ho, wo);
        let mut cols = vec![S::zero(); ck * npix];
        for item in 0..n {
            tensor::im2col(x, item, self.k, self.k, self.stride, self.pad, &mut cols);
            let dst = y.item_mut(item);
            for co in 0..self.cout {
                dst[co * npix..(co + 1) * npix].fill(self.b.v[co]);
            }
            tensor::gemm_acc(dst, &self.w.v, &cols, self.cout, ck, npix);
        }
        if train {
            self.cache = Some(x.clone());
        }
        y
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.as_ref().expect("conv backward without forward");
        let (n, _, h, w) = x.shape();
        let (_, cout, ho, wo) = dy.shape();
        assert_eq!(cout, self.cout);
        let npix = ho * wo;
        let ck = self.cin * self.k * self.k;
        let mut dx = Tensor::zeros(n, self.cin, h, w);
        let mut cols = vec![S::zero(); ck * npix];
        let mut dcols = vec![S::zero(); ck * npix];
        for item in 0..n {
            let dyi = dy.item(item);
            // dW += dY . cols^T, db += row sums of dY.
            tensor::im2col(x, item, self.k, self.k, self.stride, self.pad, &mut cols);
            tensor::gemm_acc_abt(&mut self.w.g, dyi, &cols, self.cout, ck, npix);
            for co in 0..self.cout {
                self.b.g[co] =
                    self.b.g[co] + par::sum_by(&dyi[co * npix..(co + 1) * npix], |&v| v);
            }
            // dX = fold(W^T . dY).
            dcols.fill(S::zero());
            tensor::gemm_acc_atb(&mut dcols, &self.w.v, dyi, ck, self.cout, npix);
            tensor::col2im_acc(&dcols, &mut dx, item, self.k, self.k, self.stride, self.pad, ho, wo);
        }
        dx
    }
}

const NORM_EPS: f64 = 1e-5;

/// Instance normalization: each (item, channel) plane is standardized by
/// its own statistics, then scaled and shifted. Statistics always come
/// from the input itself, so the map is pure in eval mode and no batch
/// coupling can leak domain information.
#[derive(Clone, Debug)]
pub struct InstanceNorm<S> {
    pub gamma: Param<S>,
    pub beta: Param<S>,
    c: usize,
    cache: Option<NormCache<S>>,
}

#[derive(Clone, Debug)]
struct NormCache<S> {
    xhat: Tensor<S>,
    inv_std: Vec<S>,
}

impl<S: Scalar> InstanceNorm<S> {
    pub fn new(c: usize) -> Self {
        InstanceNorm {
            gamma: Param::filled(&[c], S::one()),
            beta: Param::zeros(&[c]),
            c,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let (n, c, h, w) = x.shape();
        assert_eq!(c, self.c);
        let hw = h * w;
        let m = S::from_f64(hw as f64);
        let eps = S::from_f64(NORM_EPS);
        // Each plane is independent; chunk size hw maps one closure call to
        // one (item, channel) plane.
        let stats: Vec<(S, S)> = par::map_indexed(n * c, |p| {
            let plane = &x.data()[p * hw..(p + 1) * hw];
            let mean = par::sum_by(plane, |&v| v) / m;
            let var = par::sum_by(plane, |&v| (v - mean) * (v - mean)) / m;
            (mean, (var + eps).sqrt().recip())
        });
        let inv_std: Vec<S> = stats.iter().map(|s| s.1).collect();
        let mut xhat = x.clone();
        par::for_each_chunk_mut(xhat.data_mut(), hw, |p, plane| {
            let (mean, is) = stats[p];
            for v in plane.iter_mut() {
                *v = (*v - mean) * is;
            }
        });
        let mut y = xhat.clone();
        par::for_each_chunk_mut(y.data_mut(), hw, |p, plane| {
            let ch = p % c;
            let (ga, be) = (self.gamma.v[ch], self.beta.v[ch]);
            for v in plane.iter_mut() {
                *v = ga * *v + be;
            }
        });
        if train {
            self.cache = Some(NormCache { xhat, inv_std });
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let cache = self.cache.as_ref().expect("norm backward without forward");
        let (n, c, h, w) = dy.shape();
        let hw = h * w;
        let m = S::from_f64(hw as f64);
        // Parameter gradients reduce over items and pixels per channel, in
        // fixed item order.
        for item in 0..n {
            for ch in 0..c {
                let p = item * c + ch;
                let dyp = &dy.data()[p * hw..(p + 1) * hw];
                let xh = &cache.xhat.data()[p * hw..(p + 1) * hw];
                let mut dg = S::zero();
                let mut db = S::zero();
                for (dv, xv) in dyp.iter().zip(xh.iter()) {
                    dg = dg + *dv * *xv;
                    db = db + *dv;
                }
                self.gamma.g[ch] = self.gamma.g[ch] + dg;
                self.beta.g[ch] = self.beta.g[ch] + db;
            }
        }
        let mut dx = dy.clone();
        par::for_each_chunk_mut(dx.data_mut(), hw, |p, plane| {
            let ch = p % c;
            let ga = self.gamma.v[ch];
            let is = cache.inv_std[p];
            let xh = &cache.xhat.data()[p * hw..(p + 1) * hw];
            let mut sum_d = S::zero();
            let mut sum_dx = S::zero();
            for (dv, xv) in plane.iter().zip(xh.iter()) {
                let dxh = ga * *dv;
                sum_d = sum_d + dxh;
                sum_dx = sum_dx + dxh * *xv;
            }
            for (dv, xv) in plane.iter_mut().zip(xh.iter()) {
                let dxh = ga * *dv;
                *dv = is * (dxh - (sum_d + *xv * sum_dx) / m);
            }
        });
        dx
    }
}

/// 2x2 max pooling with stride 2. Ties go to the first maximum in scan
/// order, which keeps the backward scatter deterministic.
#[derive(Clone, Debug, Default)]
pub struct MaxPool2<S> {
    cache: Option<(Vec<u32>, (usize, usize, usize, usize))>,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> MaxPool2<S> {
    pub fn new() -> Self {
        MaxPool2 {
            cache: None,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let (n, c, h, w) = x.shape();
        assert!(h % 2 == 0 && w % 2 == 0, "pooling needs even dims, got {h}x{w}");
        let (ho, wo) = (h / 2, w / 2);
        let mut y = Tensor::zeros(n, c, ho, wo);
        let mut arg = vec![0u32; n * c * ho * wo];
        for p in 0..n * c {
            let src = &x.data()[p * h * w..(p + 1) * h * w];
            let dst = &mut y.data_mut()[p * ho * wo..(p + 1) * ho * wo];
            let am = &mut arg[p * ho * wo..(p + 1) * ho * wo];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = S::neg_infinity();
                    let mut best_i = 0u32;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let i = (oy * 2 + dy) * w + ox * 2 + dx;
                            if src[i] > best {
                                best = src[i];
                                best_i = i as u32;
                            }
                        }
                    }
                    dst[oy * wo + ox] = best;
                    am[oy * wo + ox] = best_i;
                }
            }
        }
        if train {
            self.cache = Some((arg, (n, c, h, w)));
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let (arg, (n, c, h, w)) = self.cache.as_ref().expect("pool backward without forward");
        let (_, _, ho, wo) = dy.shape();
        let mut dx = Tensor::zeros(*n, *c, *h, *w);
        for p in 0..n * c {
            let src = &dy.data()[p * ho * wo..(p + 1) * ho * wo];
            let am = &arg[p * ho * wo..(p + 1) * ho * wo];
            let dst = &mut dx.data_mut()[p * h * w..(p + 1) * h * w];
            for (i, &a) in am.iter().enumerate() {
                dst[a as usize] = dst[a as usize] + src[i];
            }
        }
        dx
    }
}

/// Nearest-neighbour 2x upsampling.
#[derive(Clone, Debug, Default)]
pub struct Upsample2;

impl Upsample2 {
    pub fn forward<S: Scalar>(&self, x: &Tensor<S>) -> Tensor<S> {
        let (n, c, h, w) = x.shape();
        let mut y = Tensor::zeros(n, c, h * 2, w * 2);
        for p in 0..n * c {
            let src = &x.data()[p * h * w..(p + 1) * h * w];
            let dst = &mut y.data_mut()[p * 4 * h * w..(p + 1) * 4 * h * w];
            for yy in 0..h {
                for xx in 0..w {
                    let v = src[yy * w + xx];
                    let base = (yy * 2) * (w * 2) + xx * 2;
                    dst[base] = v;
                    dst[base + 1] = v;
                    dst[base + w * 2] = v;
                    dst[base + w * 2 + 1] = v;
                }
            }
        }
        y
    }

    pub fn backward<S: Scalar>(&self, dy: &Tensor<S>) -> Tensor<S> {
        let (n, c, h2, w2) = dy.shape();
        let (h, w) = (h2 / 2, w2 / 2);
        let mut dx = Tensor::zeros(n, c, h, w);
        for p in 0..n * c {
            let src = &dy.data()[p * h2 * w2..(p + 1) * h2 * w2];
            let dst = &mut dx.data_mut()[p * h * w..(p + 1) * h * w];
            for yy in 0..h {
                for xx in 0..w {
                    let base = (yy * 2) * w2 + xx * 2;
                    dst[yy * w + xx] = src[base] + src[base + 1] + src[base + w2] + src[base + w2 + 1];
                }
            }
        }
        dx
    }
}

/// Leaky ReLU with slope `leak` on the negative side; `leak` 0 is plain
/// ReLU.
#[derive(Clone, Debug)]
pub struct LeakyRelu<S> {
    leak: S,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> LeakyRelu<S> {
    pub fn new(leak: f64) -> Self {
        LeakyRelu {
            leak: S::from_f64(leak),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let leak = self.leak;
        let y = x.map(move |v| if v > S::zero() { v } else { leak * v });
        if train {
            self.cache = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.as_ref().expect("relu backward without forward");
        let mut dx = dy.clone();
        let leak = self.leak;
        par::for_each_chunk_mut(dx.data_mut(), 4096, |i, chunk| {
            let xs = &x.data()[i * 4096..i * 4096 + chunk.len()];
            for (d, &xv) in chunk.iter_mut().zip(xs.iter()) {
                if xv <= S::zero() {
                    *d = *d * leak;
                }
            }
        });
        dx
    }
}

/// Elementwise logistic sigmoid.
#[derive(Clone, Debug, Default)]
pub struct Sigmoid<S> {
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Sigmoid<S> {
    pub fn new() -> Self {
        Sigmoid { cache: None }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let y = x.map(sigmoid);
        if train {
            self.cache = Some(y.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let y = self.cache.as_ref().expect("sigmoid backward without forward");
        let mut dx = dy.clone();
        par::for_each_chunk_mut(dx.data_mut(), 4096, |i, chunk| {
            let ys = &y.data()[i * 4096..i * 4096 + chunk.len()];
            for (d, &yv) in chunk.iter_mut().zip(ys.iter()) {
                *d = *d * yv * (S::one() - yv);
            }
        });
        dx
    }
}

/// conv3x3 -> instance norm -> ReLU, the repeated unit of the backbone.
#[derive(Clone, Debug)]
pub struct ConvBlock<S> {
    pub conv: Conv2d<S>,
    pub norm: InstanceNorm<S>,
    relu: LeakyRelu<S>,
}

impl<S: Scalar> ConvBlock<S> {
    pub fn new(cin: usize, cout: usize, rng: &mut Rng) -> Self {
        ConvBlock {
            conv: Conv2d::new(cin, cout, 3, 1, 1, 0.0, rng),
            norm: InstanceNorm::new(cout),
            relu: LeakyRelu::new(0.0),
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        let y = self.conv.forward(x, train);
        let y = self.norm.forward(&y, train);
        self.relu.forward(&y, train)
    }

    pub fn backward(&mut self, dy: &Tensor<S>) -> Tensor<S> {
        let d = self.relu.backward(dy);
        let d = self.norm.backward(&d);
        self.conv.backward(&d)
    }

    /// Visit (suffix, param) pairs under this block.
    pub fn visit(&mut self, layer: &str, f: &mut dyn FnMut(String, &mut Param<S>)) {
        f(format!("{layer}.weight"), &mut self.conv.w);
        f(format!("{layer}.bias"), &mut self.conv.b);
        f(format!("{layer}_norm.gamma"), &mut self.norm.gamma);
        f(format!("{layer}_norm.beta"), &mut self.norm.beta);
    }
}
