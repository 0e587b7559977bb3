//! Shared encoder and the two decoders it feeds: a skip-connected
//! segmentation decoder and a skip-free reconstruction decoder.

use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

use super::layers::{Conv2d, ConvBlock, MaxPool2, Param, Sigmoid, Upsample2};

/// Encoder activations handed to the decoders: one pre-pooling skip tensor
/// per level plus the bottleneck. Tests ablate skips by editing this
/// struct directly.
#[derive(Clone, Debug)]
pub struct EncoderOut<S> {
    pub skips: Vec<Tensor<S>>,
    pub bottleneck: Tensor<S>,
}

#[derive(Debug)]
struct EncLevel<S> {
    b1: ConvBlock<S>,
    b2: ConvBlock<S>,
    pool: MaxPool2<S>,
}

/// `depth` levels of [conv3x3, norm, relu] x2 + 2x downsample, then a
/// bottleneck pair of conv blocks. Level i runs at width base_width * 2^i.
#[derive(Debug)]
pub struct Encoder<S> {
    levels: Vec<EncLevel<S>>,
    bn1: ConvBlock<S>,
    bn2: ConvBlock<S>,
}

impl<S: Scalar> Encoder<S> {
    pub fn new(in_channels: usize, base_width: usize, depth: usize, rng: &mut Rng) -> Self {
        let mut levels = Vec::with_capacity(depth);
        let mut cin = in_channels;
        for i in 0..depth {
            let w = base_width << i;
            levels.push(EncLevel {
                b1: ConvBlock::new(cin, w, rng),
                b2: ConvBlock::new(w, w, rng),
                pool: MaxPool2::new(),
            });
            cin = w;
        }
        let wb = base_width << depth;
        Encoder {
            levels,
            bn1: ConvBlock::new(cin, wb, rng),
            bn2: ConvBlock::new(wb, wb, rng),
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> EncoderOut<S> {
        let mut skips = Vec::with_capacity(self.levels.len());
        let mut cur = x.clone();
        for lv in self.levels.iter_mut() {
            let a = lv.b1.forward(&cur, train);
            let a = lv.b2.forward(&a, train);
            cur = lv.pool.forward(&a, train);
            skips.push(a);
        }
        let b = self.bn1.forward(&cur, train);
        let bottleneck = self.bn2.forward(&b, train);
        EncoderOut { skips, bottleneck }
    }

    /// `d_skips[i]` may be empty (all zeros are represented by `None`) when
    /// a caller has no gradient flowing into that skip.
    pub fn backward(
        &mut self,
        d_bottleneck: &Tensor<S>,
        mut d_skips: Vec<Option<Tensor<S>>>,
    ) -> Tensor<S> {
        assert_eq!(d_skips.len(), self.levels.len());
        let d = self.bn2.backward(d_bottleneck);
        let mut d = self.bn1.backward(&d);
        for (i, lv) in self.levels.iter_mut().enumerate().rev() {
            let mut da = lv.pool.backward(&d);
            if let Some(ds) = d_skips[i].take() {
                da.add_assign(&ds);
            }
            let da = lv.b2.backward(&da);
            d = lv.b1.backward(&da);
        }
        d
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(String, &mut Param<S>)) {
        for (i, lv) in self.levels.iter_mut().enumerate() {
            lv.b1.visit("conv1", &mut |s, p| f(format!("encoder.{i}.{s}"), p));
            lv.b2.visit("conv2", &mut |s, p| f(format!("encoder.{i}.{s}"), p));
        }
        let i = self.levels.len();
        self.bn1.visit("conv1", &mut |s, p| f(format!("encoder.{i}.{s}"), p));
        self.bn2.visit("conv2", &mut |s, p| f(format!("encoder.{i}.{s}"), p));
    }
}

#[derive(Debug)]
struct DecLevel<S> {
    up: Upsample2,
    reduce: ConvBlock<S>,
    b1: ConvBlock<S>,
    b2: ConvBlock<S>,
}

/// Skip-connected decoder producing the final feature map `f` at
/// base_width channels, plus a 1x1-conv + sigmoid head for the prediction
/// map `p`.
#[derive(Debug)]
pub struct SegDecoder<S> {
    levels: Vec<DecLevel<S>>, // stored deepest first
    out_conv: Conv2d<S>,
    out_act: Sigmoid<S>,
}

impl<S: Scalar> SegDecoder<S> {
    pub fn new(base_width: usize, depth: usize, rng: &mut Rng) -> Self {
        let mut levels = Vec::with_capacity(depth);
        for i in (0..depth).rev() {
            let w = base_width << i;
            let prev = w * 2; // width of the level below (or the bottleneck)
            levels.push(DecLevel {
                up: Upsample2,
                reduce: ConvBlock::new(prev, w, rng),
                b1: ConvBlock::new(2 * w, w, rng),
                b2: ConvBlock::new(w, w, rng),
            });
        }
        SegDecoder {
            levels,
            out_conv: Conv2d::new(base_width, 1, 1, 1, 0, 0.0, rng),
            out_act: Sigmoid::new(),
        }
    }

    /// Decode up to the final feature map `f` (before the output head).
    pub fn forward_trunk(&mut self, enc: &EncoderOut<S>, train: bool) -> Tensor<S> {
        let depth = self.levels.len();
        let mut cur = enc.bottleneck.clone();
        for (j, lv) in self.levels.iter_mut().enumerate() {
            let skip = &enc.skips[depth - 1 - j];
            let up = lv.up.forward(&cur);
            let red = lv.reduce.forward(&up, train);
            let cat = Tensor::concat_channels(&red, skip);
            let a = lv.b1.forward(&cat, train);
            cur = lv.b2.forward(&a, train);
        }
        cur
    }

    /// 1x1 conv + sigmoid on `f`, yielding the prediction map.
    pub fn forward_head(&mut self, f: &Tensor<S>, train: bool) -> Tensor<S> {
        let z = self.out_conv.forward(f, train);
        self.out_act.forward(&z, train)
    }

    pub fn backward_head(&mut self, dp: &Tensor<S>) -> Tensor<S> {
        let dz = self.out_act.backward(dp);
        self.out_conv.backward(&dz)
    }

    /// Returns (d_bottleneck, d_skips ordered shallowest-first to match
    /// `EncoderOut::skips`).
    pub fn backward_trunk(&mut self, df: &Tensor<S>) -> (Tensor<S>, Vec<Option<Tensor<S>>>) {
        let depth = self.levels.len();
        let mut d_skips: Vec<Option<Tensor<S>>> = (0..depth).map(|_| None).collect();
        let mut d = df.clone();
        for (j, lv) in self.levels.iter_mut().enumerate().rev() {
            let da = lv.b2.backward(&d);
            let dcat = lv.b1.backward(&da);
            let w = dcat.channels() / 2;
            let (dred, dskip) = dcat.split_channels(w);
            d_skips[depth - 1 - j] = Some(dskip);
            let dup = lv.reduce.backward(&dred);
            d = lv.up.backward(&dup);
        }
        (d, d_skips)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(String, &mut Param<S>)) {
        let depth = self.levels.len();
        for (j, lv) in self.levels.iter_mut().enumerate() {
            let i = depth - 1 - j; // name by resolution level
            lv.reduce
                .visit("reduce", &mut |s, p| f(format!("seg_decoder.{i}.{s}"), p));
            lv.b1.visit("conv1", &mut |s, p| f(format!("seg_decoder.{i}.{s}"), p));
            lv.b2.visit("conv2", &mut |s, p| f(format!("seg_decoder.{i}.{s}"), p));
        }
        f("seg_decoder.out.conv.weight".into(), &mut self.out_conv.w);
        f("seg_decoder.out.conv.bias".into(), &mut self.out_conv.b);
    }
}

/// Mirror decoder without skip connections; reconstructs the input image
/// from the bottleneck alone through a sigmoid head.
#[derive(Debug)]
pub struct RecDecoder<S> {
    levels: Vec<DecLevel<S>>, // reduce/b1/b2 all at width w (no concat)
    out_conv: Conv2d<S>,
    out_act: Sigmoid<S>,
}

impl<S: Scalar> RecDecoder<S> {
    pub fn new(base_width: usize, depth: usize, rng: &mut Rng) -> Self {
        let mut levels = Vec::with_capacity(depth);
        for i in (0..depth).rev() {
            let w = base_width << i;
            levels.push(DecLevel {
                up: Upsample2,
                reduce: ConvBlock::new(w * 2, w, rng),
                b1: ConvBlock::new(w, w, rng),
                b2: ConvBlock::new(w, w, rng),
            });
        }
        RecDecoder {
            levels,
            out_conv: Conv2d::new(base_width, 1, 1, 1, 0, 0.0, rng),
            out_act: Sigmoid::new(),
        }
    }

    pub fn forward(&mut self, bottleneck: &Tensor<S>, train: bool) -> Tensor<S> {
        let mut cur = bottleneck.clone();
        for lv in self.levels.iter_mut() {
            let up = lv.up.forward(&cur);
            let red = lv.reduce.forward(&up, train);
            let a = lv.b1.forward(&red, train);
            cur = lv.b2.forward(&a, train);
        }
        let z = self.out_conv.forward(&cur, train);
        self.out_act.forward(&z, train)
    }

    pub fn backward(&mut self, dxhat: &Tensor<S>) -> Tensor<S> {
        let dz = self.out_act.backward(dxhat);
        let mut d = self.out_conv.backward(&dz);
        for lv in self.levels.iter_mut().rev() {
            let da = lv.b2.backward(&d);
            let dred = lv.b1.backward(&da);
            let dup = lv.reduce.backward(&dred);
            d = lv.up.backward(&dup);
        }
        d
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(String, &mut Param<S>)) {
        let depth = self.levels.len();
        for (j, lv) in self.levels.iter_mut().enumerate() {
            let i = depth - 1 - j;
            lv.reduce
                .visit("reduce", &mut |s, p| f(format!("rec_decoder.{i}.{s}"), p));
            lv.b1.visit("conv1", &mut |s, p| f(format!("rec_decoder.{i}.{s}"), p));
            lv.b2.visit("conv2", &mut |s, p| f(format!("rec_decoder.{i}.{s}"), p));
        }
        f("rec_decoder.out.conv.weight".into(), &mut self.out_conv.w);
        f("rec_decoder.out.conv.bias".into(), &mut self.out_conv.b);
    }
}
