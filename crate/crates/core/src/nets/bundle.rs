//! The five-component network bundle and its composite forward/backward
//! passes.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

use super::disc::PatchDiscriminator;
use super::generator::{Encoder, RecDecoder, SegDecoder};
use super::layers::Param;

/// Backbone and discriminator sizing. The defaults are desk-scale; the
/// architecture scales through these fields, not code changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub base_width: usize,
    pub depth: usize,
    pub disc_width: usize,
    pub disc_depth: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            in_channels: 1,
            base_width: 16,
            depth: 3,
            disc_width: 32,
            disc_depth: 3,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_width == 0 || self.disc_width == 0 {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if self.depth < 1 {
            return Err(Error::Config(format!("depth {} must be >= 1", self.depth)));
        }
        if self.disc_depth < 1 {
            return Err(Error::Config(format!(
                "disc_depth {} must be >= 1",
                self.disc_depth
            )));
        }
        Ok(())
    }

    /// Smallest power of two every input side must divide by.
    pub fn min_divisor(&self) -> usize {
        1 << self.depth.max(self.disc_depth)
    }
}

/// Parameter groups as the optimizer sees them: the generator group spans
/// the shared encoder and both decoders; each discriminator is its own
/// group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Generator,
    DPred,
    DFeat,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Generator, Group::DPred, Group::DFeat];

    pub fn name(&self) -> &'static str {
        match self {
            Group::Generator => "generator",
            Group::DPred => "d_pred",
            Group::DFeat => "d_feat",
        }
    }
}

/// Segmentation-path outputs: prediction map `p` in (0,1) and the final
/// decoder feature `f` it was scored from.
#[derive(Debug)]
pub struct GeOutputs<S> {
    pub p: Tensor<S>,
    pub f: Tensor<S>,
}

/// Outputs of a full generator pass: segmentation pair plus the
/// reconstructed image.
#[derive(Debug)]
pub struct FullOutputs<S> {
    pub ge: GeOutputs<S>,
    pub xhat: Tensor<S>,
}

#[derive(Debug)]
pub struct NetworkBundle<S> {
    pub arch: ArchConfig,
    pub encoder: Encoder<S>,
    pub seg_decoder: SegDecoder<S>,
    pub rec_decoder: RecDecoder<S>,
    pub d_pred: PatchDiscriminator<S>,
    pub d_feat: PatchDiscriminator<S>,
}

/// Construct all five components with weights drawn deterministically from
/// `rng` in a fixed traversal order.
pub fn build_bundle<S: Scalar>(arch: &ArchConfig, rng: &mut Rng) -> Result<NetworkBundle<S>> {
    arch.validate()?;
    let encoder = Encoder::new(arch.in_channels, arch.base_width, arch.depth, rng);
    let seg_decoder = SegDecoder::new(arch.base_width, arch.depth, rng);
    let rec_decoder = RecDecoder::new(arch.base_width, arch.depth, rng);
    let d_pred = PatchDiscriminator::new("d_pred", 1, arch.disc_width, arch.disc_depth, rng);
    // d_feat reads the final decoder feature, which has base_width channels.
    let d_feat = PatchDiscriminator::new(
        "d_feat",
        arch.base_width,
        arch.disc_width,
        arch.disc_depth,
        rng,
    );
    Ok(NetworkBundle {
        arch: *arch,
        encoder,
        seg_decoder,
        rec_decoder,
        d_pred,
        d_feat,
    })
}

impl<S: Scalar> NetworkBundle<S> {
    fn check_input(&self, x: &Tensor<S>) -> Result<()> {
        let (_, c, h, w) = x.shape();
        if c != self.arch.in_channels {
            return Err(Error::Shape(format!(
                "expected {} input channels, got {c}",
                self.arch.in_channels
            )));
        }
        let d = self.arch.min_divisor();
        if h % d != 0 || w % d != 0 {
            return Err(Error::Shape(format!(
                "input {h}x{w} not divisible by 2^depth = {d}"
            )));
        }
        Ok(())
    }

    /// Segmentation path only: encoder, skip decoder, prediction head.
    pub fn forward_ge(&mut self, x: &Tensor<S>, train: bool) -> Result<GeOutputs<S>> {
        self.check_input(x)?;
        let enc = self.encoder.forward(x, train);
        let f = self.seg_decoder.forward_trunk(&enc, train);
        let p = self.seg_decoder.forward_head(&f, train);
        Ok(GeOutputs { p, f })
    }

    /// Reconstruction path only.
    pub fn forward_ae(&mut self, x: &Tensor<S>, train: bool) -> Result<Tensor<S>> {
        self.check_input(x)?;
        let enc = self.encoder.forward(x, train);
        Ok(self.rec_decoder.forward(&enc.bottleneck, train))
    }

    /// Both paths over one shared encoder pass.
    pub fn forward_full(&mut self, x: &Tensor<S>, train: bool) -> Result<FullOutputs<S>> {
        self.check_input(x)?;
        let enc = self.encoder.forward(x, train);
        let f = self.seg_decoder.forward_trunk(&enc, train);
        let p = self.seg_decoder.forward_head(&f, train);
        let xhat = self.rec_decoder.forward(&enc.bottleneck, train);
        Ok(FullOutputs {
            ge: GeOutputs { p, f },
            xhat,
        })
    }

    /// Backward for a `forward_full` pass. `dp` is the gradient w.r.t. the
    /// prediction map, `df_extra` an optional gradient injected directly on
    /// the feature map (adversarial term), `dxhat` an optional gradient
    /// w.r.t. the reconstruction.
    pub fn backward_full(
        &mut self,
        dp: &Tensor<S>,
        df_extra: Option<&Tensor<S>>,
        dxhat: Option<&Tensor<S>>,
    ) {
        let mut df = self.seg_decoder.backward_head(dp);
        if let Some(extra) = df_extra {
            df.add_assign(extra);
        }
        let (mut d_bn, d_skips) = self.seg_decoder.backward_trunk(&df);
        if let Some(dx) = dxhat {
            d_bn.add_assign(&self.rec_decoder.backward(dx));
        }
        self.encoder.backward(&d_bn, d_skips);
    }

    /// Visit one component's parameters in a fixed, stable order.
    pub fn visit_component(
        &mut self,
        which: &str,
        f: &mut dyn FnMut(String, &mut Param<S>),
    ) {
        match which {
            "encoder" => self.encoder.visit(f),
            "seg_decoder" => self.seg_decoder.visit(f),
            "rec_decoder" => self.rec_decoder.visit(f),
            "d_pred" => self.d_pred.visit(f),
            "d_feat" => self.d_feat.visit(f),
            other => panic!("unknown component {other}"),
        }
    }

    pub fn visit_group(&mut self, group: Group, f: &mut dyn FnMut(String, &mut Param<S>)) {
        match group {
            Group::Generator => {
                self.encoder.visit(f);
                self.seg_decoder.visit(f);
                self.rec_decoder.visit(f);
            }
            Group::DPred => self.d_pred.visit(f),
            Group::DFeat => self.d_feat.visit(f),
        }
    }

    pub fn visit_all(&mut self, f: &mut dyn FnMut(String, &mut Param<S>)) {
        self.visit_group(Group::Generator, f);
        self.visit_group(Group::DPred, f);
        self.visit_group(Group::DFeat, f);
    }

    pub fn zero_grads(&mut self, group: Group) {
        self.visit_group(group, &mut |_, p| p.zero_grad());
    }

    /// Digest over one component's parameter names and values.
    pub fn component_digest(&mut self, which: &str) -> String {
        let mut h = crate::digest::Hasher::new();
        self.visit_component(which, &mut |name, p| {
            h.update_str(&name);
            for v in &p.v {
                h.update(&v.into_f64().to_le_bytes());
            }
        });
        h.finish()
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_all(&mut |_, p| n += p.len());
        n
    }
}
