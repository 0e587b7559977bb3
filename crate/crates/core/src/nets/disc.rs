//! Fully convolutional patch discriminators.

use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

use super::layers::{Conv2d, LeakyRelu, Param};

const LEAK: f64 = 0.2;

/// A stack of stride-2 4x4 convolutions with leaky activations, closed by
/// a stride-1 convolution to a single channel. Outputs one logit per
/// receptive-field patch; no normalization, no final sigmoid.
#[derive(Debug)]
pub struct PatchDiscriminator<S> {
    name: &'static str,
    in_channels: usize,
    convs: Vec<(Conv2d<S>, LeakyRelu<S>)>,
    score: Conv2d<S>,
}

impl<S: Scalar> PatchDiscriminator<S> {
    pub fn new(
        name: &'static str,
        in_channels: usize,
        width: usize,
        depth: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut convs = Vec::with_capacity(depth);
        let mut cin = in_channels;
        for i in 0..depth {
            let w = width << i;
            convs.push((
                Conv2d::new(cin, w, 4, 2, 1, LEAK, rng),
                LeakyRelu::new(LEAK),
            ));
            cin = w;
        }
        PatchDiscriminator {
            name,
            in_channels,
            convs,
            score: Conv2d::new(cin, 1, 3, 1, 1, LEAK, rng),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn forward(&mut self, x: &Tensor<S>, train: bool) -> Tensor<S> {
        assert_eq!(
            x.channels(),
            self.in_channels,
            "{} expects {} input channels, got {}",
            self.name,
            self.in_channels,
            x.channels()
        );
        let mut cur = x.clone();
        for (conv, act) in self.convs.iter_mut() {
            let z = conv.forward(&cur, train);
            cur = act.forward(&z, train);
        }
        self.score.forward(&cur, train)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the
    /// discriminator input (needed when adversarial loss flows back into
    /// the generator).
    pub fn backward(&mut self, dscore: &Tensor<S>) -> Tensor<S> {
        let mut d = self.score.backward(dscore);
        for (conv, act) in self.convs.iter_mut().rev() {
            let dz = act.backward(&d);
            d = conv.backward(&dz);
        }
        d
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(String, &mut Param<S>)) {
        let name = self.name;
        for (i, (conv, _)) in self.convs.iter_mut().enumerate() {
            f(format!("{name}.{i}.conv.weight"), &mut conv.w);
            f(format!("{name}.{i}.conv.bias"), &mut conv.b);
        }
        f(format!("{name}.out.conv.weight"), &mut self.score.w);
        f(format!("{name}.out.conv.bias"), &mut self.score.b);
    }
}
