//! The resolved experiment configuration: every knob of dataset synthesis,
//! architecture, training, and evaluation in one flat `key = value` file
//! with section prefixes. Parsing starts from the defaults and overrides
//! whatever the text mentions; unknown keys are rejected by name. The
//! canonical rendering is what runs write to disk and digest for
//! provenance, so `parse(render(c)) == c` is load-bearing.

use std::collections::BTreeMap;

use crate::datapipe::SynthConfig;
use crate::error::Result;
use crate::eval::EvalSettings;
use crate::kv;
use crate::nets::ArchConfig;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FullConfig {
    pub synth: SynthConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

impl FullConfig {
    /// Defaults overridden by the given text.
    pub fn parse(text: &str) -> Result<FullConfig> {
        let mut cfg = FullConfig::default();
        cfg.apply(kv::parse(text)?)?;
        Ok(cfg)
    }

    /// Apply one override, e.g. from a command-line flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut map = BTreeMap::new();
        map.insert(key.to_string(), value.to_string());
        self.apply(map)
    }

    /// The shared seed: command-line `--seed` retargets synthesis and
    /// training at once.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
    }

    fn apply(&mut self, map: BTreeMap<String, String>) -> Result<()> {
        let mut t = kv::Taker::new(map);

        macro_rules! field {
            ($key:literal, $slot:expr) => {
                if let Some(v) = t.take_parsed($key)? {
                    $slot = v;
                }
            };
        }

        field!("synth.canvas_size", self.synth.canvas_size);
        field!("synth.blob_count_lo", self.synth.blob_count_range.0);
        field!("synth.blob_count_hi", self.synth.blob_count_range.1);
        field!("synth.blob_radius_lo", self.synth.blob_radius_range.0);
        field!("synth.blob_radius_hi", self.synth.blob_radius_range.1);
        field!("synth.texture_frequency", self.synth.source_texture.frequency);
        field!("synth.texture_amplitude", self.synth.source_texture.amplitude);
        field!("synth.shift_invert", self.synth.target_shift.invert);
        field!("synth.shift_freq_delta", self.synth.target_shift.freq_delta);
        field!("synth.shift_noise_sigma", self.synth.target_shift.noise_sigma);
        field!("synth.n_train_source", self.synth.n_train_source);
        field!("synth.n_train_target", self.synth.n_train_target);
        field!("synth.n_test_target", self.synth.n_test_target);
        field!("synth.seed", self.synth.seed);

        field!("arch.in_channels", self.arch.in_channels);
        field!("arch.base_width", self.arch.base_width);
        field!("arch.depth", self.arch.depth);
        field!("arch.disc_width", self.arch.disc_width);
        field!("arch.disc_depth", self.arch.disc_depth);

        field!("train.lr0", self.train.lr0);
        field!("train.poly_power", self.train.poly_power);
        field!("train.total_iters", self.train.total_iters);
        field!("train.pretrain_iters", self.train.pretrain_iters);
        field!("train.batch_size", self.train.batch_size);
        field!("train.patch_size", self.train.patch_size);
        field!("train.d_steps", self.train.d_steps);
        field!("train.checkpoint_every", self.train.checkpoint_every);
        field!("train.augment", self.train.augment);
        field!("train.seed", self.train.seed);
        field!("train.adam_beta1", self.train.adam_betas.0);
        field!("train.adam_beta2", self.train.adam_betas.1);
        field!("train.lambda_rec", self.train.weights.lambda_rec);
        field!("train.lambda_feat", self.train.weights.lambda_feat);
        field!("train.lambda_pred", self.train.weights.lambda_pred);
        field!("train.en", self.train.flags.en);
        field!("train.de_feat", self.train.flags.de_feat);
        field!("train.de_pred", self.train.flags.de_pred);

        field!("eval.threshold", self.eval.threshold);
        field!("eval.tile", self.eval.tile);
        field!("eval.overlap", self.eval.overlap);

        t.finish()
    }

    /// Canonical text: every key, grouped by section, in declaration order.
    pub fn render(&self) -> String {
        kv::render([
            ("synth.canvas_size", self.synth.canvas_size.to_string()),
            ("synth.blob_count_lo", self.synth.blob_count_range.0.to_string()),
            ("synth.blob_count_hi", self.synth.blob_count_range.1.to_string()),
            ("synth.blob_radius_lo", self.synth.blob_radius_range.0.to_string()),
            ("synth.blob_radius_hi", self.synth.blob_radius_range.1.to_string()),
            (
                "synth.texture_frequency",
                self.synth.source_texture.frequency.to_string(),
            ),
            (
                "synth.texture_amplitude",
                self.synth.source_texture.amplitude.to_string(),
            ),
            ("synth.shift_invert", self.synth.target_shift.invert.to_string()),
            (
                "synth.shift_freq_delta",
                self.synth.target_shift.freq_delta.to_string(),
            ),
            (
                "synth.shift_noise_sigma",
                self.synth.target_shift.noise_sigma.to_string(),
            ),
            ("synth.n_train_source", self.synth.n_train_source.to_string()),
            ("synth.n_train_target", self.synth.n_train_target.to_string()),
            ("synth.n_test_target", self.synth.n_test_target.to_string()),
            ("synth.seed", self.synth.seed.to_string()),
            ("arch.in_channels", self.arch.in_channels.to_string()),
            ("arch.base_width", self.arch.base_width.to_string()),
            ("arch.depth", self.arch.depth.to_string()),
            ("arch.disc_width", self.arch.disc_width.to_string()),
            ("arch.disc_depth", self.arch.disc_depth.to_string()),
            ("train.lr0", self.train.lr0.to_string()),
            ("train.poly_power", self.train.poly_power.to_string()),
            ("train.total_iters", self.train.total_iters.to_string()),
            ("train.pretrain_iters", self.train.pretrain_iters.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.patch_size", self.train.patch_size.to_string()),
            ("train.d_steps", self.train.d_steps.to_string()),
            ("train.checkpoint_every", self.train.checkpoint_every.to_string()),
            ("train.augment", self.train.augment.to_string()),
            ("train.seed", self.train.seed.to_string()),
            ("train.adam_beta1", self.train.adam_betas.0.to_string()),
            ("train.adam_beta2", self.train.adam_betas.1.to_string()),
            ("train.lambda_rec", self.train.weights.lambda_rec.to_string()),
            ("train.lambda_feat", self.train.weights.lambda_feat.to_string()),
            ("train.lambda_pred", self.train.weights.lambda_pred.to_string()),
            ("train.en", self.train.flags.en.to_string()),
            ("train.de_feat", self.train.flags.de_feat.to_string()),
            ("train.de_pred", self.train.flags.de_pred.to_string()),
            ("eval.threshold", self.eval.threshold.to_string()),
            ("eval.tile", self.eval.tile.to_string()),
            ("eval.overlap", self.eval.overlap.to_string()),
        ])
    }

    /// Digest of the canonical rendering; the provenance anchor carried by
    /// checkpoints, reports, and metrics.
    pub fn digest(&self) -> String {
        crate::digest::of_str(&self.render())
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }
}
