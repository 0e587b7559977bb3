//! The two-stage optimization schedule: a supervised warm-up of the
//! segmentation path on source patches, then alternating adaptation steps
//! in which the discriminators and the generator take turns, each phase
//! updating only its own parameter group.
//!
//! Everything observable about a run lands in one directory: the resolved
//! config, per-iteration loss history, periodic checkpoints, and a final
//! report. Identical config and seed reproduce every byte of it (modulo
//! nothing: checkpoints are written with fixed metadata), and a run resumed
//! from a checkpoint continues bit-for-bit where the donor run was.

pub mod adam;

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use crate::datapipe::{sample_batch, ImageStack, TrainBatch, UnlabeledStack};
use crate::error::{Error, Result};
use crate::losses::{self, LossValues, LossWeights};
use crate::nets::{
    build_bundle, load_checkpoint, save_checkpoint, ArchConfig, CheckpointMeta, Group,
    NetworkBundle,
};
use crate::rng::{self, stream_id, Rng};
use crate::tensor::Tensor;
use adam::Adam;

/// Which adaptation mechanisms are active: `en` the encoding-stage
/// reconstruction task, `de_feat` / `de_pred` the decoding-stage
/// adversarial alignment on the feature map and the prediction map. A flag
/// gates both the loss term and every update that would serve it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationFlags {
    pub en: bool,
    pub de_feat: bool,
    pub de_pred: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags::all()
    }
}

impl AblationFlags {
    pub fn all() -> Self {
        AblationFlags {
            en: true,
            de_feat: true,
            de_pred: true,
        }
    }

    pub fn none() -> Self {
        AblationFlags {
            en: false,
            de_feat: false,
            de_pred: false,
        }
    }

    pub fn any_disc(&self) -> bool {
        self.de_feat || self.de_pred
    }

    /// Row label for tables and reports: `baseline`, `EN`, `EN+DE_feat`, …
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.en {
            parts.push("EN");
        }
        if self.de_feat {
            parts.push("DE_feat");
        }
        if self.de_pred {
            parts.push("DE_pred");
        }
        if parts.is_empty() {
            "baseline".into()
        } else {
            parts.join("+")
        }
    }
}

/// Hyperparameters for the full warm-up + adaptation schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Base learning rate for both phases and the warm-up.
    pub lr0: f64,
    /// Exponent of the polynomial decay.
    pub poly_power: f64,
    /// Adaptation iterations; also the decay horizon.
    pub total_iters: u64,
    /// Supervised warm-up iterations at constant `lr0`.
    pub pretrain_iters: u64,
    /// Patches per domain per batch.
    pub batch_size: usize,
    /// Square crop side; must fit the network's downsampling grid.
    pub patch_size: usize,
    /// Discriminator updates per generator update.
    pub d_steps: u64,
    /// Checkpoint every this many adaptation iterations (0 = final only).
    pub checkpoint_every: u64,
    /// Dihedral augmentation of training crops.
    pub augment: bool,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub weights: LossWeights,
    pub flags: AblationFlags,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 2e-4,
            poly_power: 0.9,
            total_iters: 2000,
            pretrain_iters: 500,
            batch_size: 2,
            patch_size: 64,
            d_steps: 1,
            checkpoint_every: 500,
            augment: false,
            seed: 7,
            adam_betas: (0.9, 0.999),
            weights: LossWeights::default(),
            flags: AblationFlags::all(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return fail(format!("lr0 must be finite and positive, got {}", self.lr0));
        }
        if !(self.poly_power.is_finite() && self.poly_power >= 0.0) {
            return fail(format!("poly_power must be >= 0, got {}", self.poly_power));
        }
        if self.total_iters == 0 {
            return fail("total_iters must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.patch_size == 0 {
            return fail("patch_size must be at least 1".into());
        }
        if self.d_steps == 0 {
            return fail("d_steps must be at least 1".into());
        }
        self.weights.validate()
    }
}

/// Polynomial decay `lr0 · (1 − iter/total)^power`, defined on
/// 0 ≤ iter ≤ total only; anything outside is a scheduling bug surfaced as
/// an error rather than a NaN from a negative base.
pub fn poly_lr(lr0: f64, power: f64, iter: u64, total_iters: u64) -> Result<f64> {
    if total_iters == 0 || iter > total_iters {
        return Err(Error::Config(format!(
            "poly_lr: iteration {iter} outside schedule of {total_iters}"
        )));
    }
    let frac = 1.0 - iter as f64 / total_iters as f64;
    Ok(lr0 * frac.powf(power))
}

/// What one adaptation iteration produced: its 0-based index, the learning
/// rate both phases used, and every loss term (zero where a flag gated the
/// term off).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub iter: u64,
    pub lr: f64,
    pub losses: LossValues,
}

/// Hooks into the two halves of an adaptation step, for tests that pin
/// down which parameters each phase may touch. The bundle is handed out
/// mutably because parameter visiting (digesting) requires it; observers
/// are expected to only read.
pub trait PhaseObserver {
    fn after_phase_d(&mut self, _bundle: &mut NetworkBundle<f32>) {}
    fn after_phase_g(&mut self, _bundle: &mut NetworkBundle<f32>) {}
}

/// Ignores both hooks.
pub struct NoObserver;

impl PhaseObserver for NoObserver {}

/// Column layouts of the two history files.
pub const ADAPT_COLUMNS: [&str; 8] = [
    "iter", "lr", "seg", "rec", "d_pred", "d_feat", "g_pred", "g_feat",
];
pub const PRETRAIN_COLUMNS: [&str; 3] = ["iter", "lr", "seg"];

/// CSV writer that flushes after every row, so an aborted run still leaves
/// a parseable prefix on disk.
pub struct HistoryWriter {
    w: BufWriter<fs::File>,
    path: PathBuf,
    cols: usize,
}

impl HistoryWriter {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", columns.join(",")).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(HistoryWriter {
            w,
            path: path.to_path_buf(),
            cols: columns.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert_eq!(fields.len(), self.cols, "history row width");
        writeln!(self.w, "{}", fields.join(",")).map_err(|e| Error::io(&self.path, e))?;
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn adapt_row(&mut self, r: &StepRecord) -> Result<()> {
        let l = r.losses;
        self.row(&[
            r.iter.to_string(),
            fmt_f64(r.lr),
            fmt_f64(l.seg),
            fmt_f64(l.rec),
            fmt_f64(l.d_pred_loss),
            fmt_f64(l.d_feat_loss),
            fmt_f64(l.g_pred_loss),
            fmt_f64(l.g_feat_loss),
        ])
    }
}

/// Floats go to history files through `Display`, which emits the shortest
/// string that parses back to the same bits — full precision, and stable
/// across reruns for bitwise file comparison.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Map a loss-term outcome to the trainer's abort contract: a value that
/// is non-finite, or a term that refused non-finite inputs, aborts the run
/// naming the term and the iteration. (Within a step, data errors from
/// loss calls can only mean non-finite activations; shape mismatches use a
/// distinct error variant and pass through.)
fn term_value(iter: u64, term: &str, value: Result<f32>) -> Result<f64> {
    match value {
        Ok(v) if f64::from(v).is_finite() => Ok(f64::from(v)),
        Ok(_) | Err(Error::Data(_)) => Err(Error::NonFinite {
            iter,
            term: term.into(),
        }),
        Err(e) => Err(e),
    }
}

/// Owner of the whole optimization state: model, per-group Adam, the
/// sampling RNG, and the iteration cursor. Numerics are f32 end to end,
/// matching checkpoint storage, so save/resume is bit-exact.
#[derive(Debug)]
pub struct Trainer {
    cfg: TrainConfig,
    bundle: NetworkBundle<f32>,
    adam: Adam<f32>,
    rng: Rng,
    iter: u64,
    config_digest: String,
}

impl Trainer {
    /// Fresh state: weights from the init stream of `cfg.seed`, sampler on
    /// its own stream, iteration cursor at zero.
    pub fn new(arch: &ArchConfig, cfg: TrainConfig, config_digest: &str) -> Result<Self> {
        arch.validate()?;
        cfg.validate()?;
        check_patch(cfg.patch_size, arch.min_divisor())?;
        let mut init = rng::stream(cfg.seed, stream_id::INIT);
        let bundle = build_bundle(arch, &mut init)?;
        let adam = Adam::new(cfg.adam_betas)?;
        Ok(Trainer {
            rng: rng::stream(cfg.seed, stream_id::SAMPLE),
            bundle,
            adam,
            iter: 0,
            cfg,
            config_digest: config_digest.to_string(),
        })
    }

    /// Continue from a checkpoint. The caller's config must be the one the
    /// checkpoint was produced under; weights, optimizer moments, step
    /// counts, the sampler position, and the iteration cursor all restore
    /// exactly.
    pub fn resume(path: &Path, cfg: TrainConfig, config_digest: &str) -> Result<Self> {
        cfg.validate()?;
        let mut loaded = load_checkpoint(path)?;
        if loaded.meta.config_digest != config_digest {
            return Err(Error::Config(format!(
                "checkpoint {} was written under config digest {}, not {config_digest}",
                path.display(),
                loaded.meta.config_digest
            )));
        }
        if loaded.meta.seed != cfg.seed {
            return Err(Error::Config(format!(
                "checkpoint seed {} does not match configured seed {}",
                loaded.meta.seed, cfg.seed
            )));
        }
        check_patch(cfg.patch_size, loaded.bundle.arch.min_divisor())?;
        let mut adam = Adam::new(cfg.adam_betas)?;
        adam.import(&mut loaded.bundle, &loaded.opt, &loaded.meta.adam_t)?;
        let rng = rng::restore(cfg.seed, (loaded.meta.rng_stream, loaded.meta.rng_word_pos));
        Ok(Trainer {
            rng,
            bundle: loaded.bundle,
            adam,
            iter: loaded.meta.iter,
            cfg,
            config_digest: config_digest.to_string(),
        })
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    pub fn bundle_mut(&mut self) -> &mut NetworkBundle<f32> {
        &mut self.bundle
    }

    pub fn rng_position(&self) -> (u64, u128) {
        rng::position(&self.rng)
    }

    /// Draw the next training batch from the shared sampling stream.
    pub fn next_batch(
        &mut self,
        source: &ImageStack,
        target: UnlabeledStack<'_>,
    ) -> Result<TrainBatch> {
        sample_batch(
            source,
            target,
            self.cfg.patch_size,
            self.cfg.batch_size,
            &mut self.rng,
            self.cfg.augment,
        )
    }

    /// Supervised warm-up: `pretrain_iters` Adam steps on the segmentation
    /// loss alone, at constant `lr0`. Only encoder and segmentation-decoder
    /// gradients exist, so although the reconstruction decoder shares the
    /// optimizer group, its moments and values stay bitwise untouched.
    pub fn pretrain(
        &mut self,
        source: &ImageStack,
        target: UnlabeledStack<'_>,
        mut sink: Option<&mut HistoryWriter>,
    ) -> Result<()> {
        for t in 0..self.cfg.pretrain_iters {
            let batch = self.next_batch(source, target)?;
            let out = self.bundle.forward_ge(&batch.x_s, true)?;
            let seg = term_value(t, "seg", losses::seg_loss(&out.p, &batch.y_s))?;
            let dp = losses::seg_loss_grad(&out.p, &batch.y_s);
            self.bundle.zero_grads(Group::Generator);
            self.bundle.backward_full(&dp, None, None);
            self.adam.step(&mut self.bundle, Group::Generator, self.cfg.lr0);
            if let Some(w) = sink.as_deref_mut() {
                w.row(&[t.to_string(), fmt_f64(self.cfg.lr0), fmt_f64(seg)])?;
            }
        }
        Ok(())
    }

    /// One alternation. Phase D: each enabled discriminator trains on
    /// detached generator outputs (computed with a no-cache eval forward,
    /// so nothing can propagate back into the generator). Phase G: a fresh
    /// forward per domain, then one generator update on the composite
    /// objective with the flag-gated terms. Both phases use this
    /// iteration's poly-decayed learning rate.
    pub fn adapt_step(
        &mut self,
        batch: &TrainBatch,
        obs: &mut dyn PhaseObserver,
    ) -> Result<StepRecord> {
        let t = self.iter;
        if t >= self.cfg.total_iters {
            return Err(Error::Config(format!(
                "adaptation already complete at {} iterations",
                self.cfg.total_iters
            )));
        }
        let lr = poly_lr(self.cfg.lr0, self.cfg.poly_power, t, self.cfg.total_iters)?;
        let w = self.cfg.weights;
        let flags = self.cfg.flags;
        let mut lv = LossValues::default();

        // ---- Phase D: discriminators against frozen generator outputs.
        if flags.any_disc() {
            let det_s = self.bundle.forward_ge(&batch.x_s, false)?;
            let det_t = self.bundle.forward_ge(&batch.x_t, false)?;
            for _ in 0..self.cfg.d_steps {
                if flags.de_pred {
                    lv.d_pred_loss =
                        self.disc_step(Group::DPred, &det_s.p, &det_t.p, w.lambda_pred, lr, t)?;
                }
                if flags.de_feat {
                    lv.d_feat_loss =
                        self.disc_step(Group::DFeat, &det_s.f, &det_t.f, w.lambda_feat, lr, t)?;
                }
            }
        }
        obs.after_phase_d(&mut self.bundle);

        // ---- Phase G: the generator's turn.
        self.bundle.zero_grads(Group::Generator);
        let lam_rec = w.lambda_rec as f32;

        // Source stream: supervised segmentation, plus reconstruction when
        // the encoding-stage task is on.
        let mut xhat_s = None;
        if flags.en {
            let out = self.bundle.forward_full(&batch.x_s, true)?;
            lv.seg = term_value(t, "seg", losses::seg_loss(&out.ge.p, &batch.y_s))?;
            let dp = losses::seg_loss_grad(&out.ge.p, &batch.y_s);
            let dxhat = losses::rec_loss_grad_one(&batch.x_s, &out.xhat).map(|g| g * lam_rec);
            self.bundle.backward_full(&dp, None, Some(&dxhat));
            xhat_s = Some(out.xhat);
        } else {
            let out = self.bundle.forward_ge(&batch.x_s, true)?;
            lv.seg = term_value(t, "seg", losses::seg_loss(&out.p, &batch.y_s))?;
            let dp = losses::seg_loss_grad(&out.p, &batch.y_s);
            self.bundle.backward_full(&dp, None, None);
        }

        // Target stream, only if some active term consumes it. The
        // adversarial seeds flow backward through the (frozen-this-phase)
        // discriminators to reach the generator outputs; the disc gradients
        // accumulated on the way are discarded by the next Phase D zeroing
        // and never stepped.
        if flags.en || flags.any_disc() {
            let (p_t, f_t, xhat_t) = if flags.en {
                let out = self.bundle.forward_full(&batch.x_t, true)?;
                (out.ge.p, out.ge.f, Some(out.xhat))
            } else {
                let out = self.bundle.forward_ge(&batch.x_t, true)?;
                (out.p, out.f, None)
            };
            let mut dp = p_t.full_like(0.0);
            if flags.de_pred {
                let score = self.bundle.d_pred.forward(&p_t, true);
                lv.g_pred_loss = term_value(t, "g_pred", losses::gen_adv_loss(&score))?;
                let lam = w.lambda_pred as f32;
                let seed = losses::gen_adv_loss_grad(&score).map(|g| g * lam);
                dp.add_assign(&self.bundle.d_pred.backward(&seed));
            }
            let mut df = None;
            if flags.de_feat {
                let score = self.bundle.d_feat.forward(&f_t, true);
                lv.g_feat_loss = term_value(t, "g_feat", losses::gen_adv_loss(&score))?;
                let lam = w.lambda_feat as f32;
                let seed = losses::gen_adv_loss_grad(&score).map(|g| g * lam);
                df = Some(self.bundle.d_feat.backward(&seed));
            }
            let dxhat_t = xhat_t
                .as_ref()
                .map(|xh| losses::rec_loss_grad_one(&batch.x_t, xh).map(|g| g * lam_rec));
            self.bundle.backward_full(&dp, df.as_ref(), dxhat_t.as_ref());
            if let (Some(xh_s), Some(xh_t)) = (&xhat_s, &xhat_t) {
                lv.rec = term_value(
                    t,
                    "rec",
                    losses::rec_loss(&batch.x_s, xh_s, &batch.x_t, xh_t),
                )?;
            }
        }
        self.adam.step(&mut self.bundle, Group::Generator, lr);
        obs.after_phase_g(&mut self.bundle);

        self.iter += 1;
        Ok(StepRecord { iter: t, lr, losses: lv })
    }

    /// One discriminator update: score detached source outputs as real and
    /// detached target outputs as fake. Gradient seeds carry the term's
    /// weight from the discriminator objective.
    fn disc_step(
        &mut self,
        group: Group,
        src: &Tensor<f32>,
        tgt: &Tensor<f32>,
        lambda: f64,
        lr: f64,
        iter: u64,
    ) -> Result<f64> {
        self.bundle.zero_grads(group);
        let lam = lambda as f32;
        let disc = match group {
            Group::DPred => &mut self.bundle.d_pred,
            Group::DFeat => &mut self.bundle.d_feat,
            Group::Generator => unreachable!("disc_step is for discriminator groups"),
        };
        let score_s = disc.forward(src, true);
        let seed_s = losses::disc_loss_grad_source(&score_s).map(|g| g * lam);
        disc.backward(&seed_s);
        let score_t = disc.forward(tgt, true);
        let seed_t = losses::disc_loss_grad_target(&score_t).map(|g| g * lam);
        disc.backward(&seed_t);
        let term = match group {
            Group::DPred => "d_pred",
            _ => "d_feat",
        };
        let loss = term_value(iter, term, losses::disc_loss(&score_s, &score_t))?;
        self.adam.step(&mut self.bundle, group, lr);
        Ok(loss)
    }

    /// Write `ckpt_<iter>` under `dir` and return its path.
    pub fn save(&mut self, dir: &Path) -> Result<PathBuf> {
        let (opt, adam_t) = self.adam.export();
        let (rng_stream, rng_word_pos) = rng::position(&self.rng);
        let meta = CheckpointMeta {
            iter: self.iter,
            seed: self.cfg.seed,
            config_digest: self.config_digest.clone(),
            rng_stream,
            rng_word_pos,
            adam_t,
        };
        let path = dir.join(format!("ckpt_{}", self.iter));
        save_checkpoint(&path, &mut self.bundle, &meta, &opt)?;
        Ok(path)
    }
}

fn check_patch(patch: usize, divisor: usize) -> Result<()> {
    if patch % divisor != 0 {
        return Err(Error::Config(format!(
            "patch size {patch} is not divisible by the network grid {divisor}"
        )));
    }
    Ok(())
}

/// What a completed schedule leaves behind.
#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub final_checkpoint: PathBuf,
    pub last: Option<StepRecord>,
}

/// Full schedule in one run directory: write the resolved config, warm up,
/// checkpoint the warm-up result as `ckpt_0`, adapt with periodic
/// checkpoints and a loss history, and finish with a report.
pub fn train_full(
    arch: &ArchConfig,
    cfg: TrainConfig,
    config_text: &str,
    source: &ImageStack,
    target: UnlabeledStack<'_>,
    run_dir: &Path,
    obs: &mut dyn PhaseObserver,
) -> Result<TrainOutcome> {
    let digest = crate::digest::of_str(config_text);
    init_run_dir(run_dir, config_text)?;
    let mut trainer = Trainer::new(arch, cfg, &digest)?;
    let mut pre = HistoryWriter::create(&run_dir.join("pretrain_history.csv"), &PRETRAIN_COLUMNS)?;
    trainer.pretrain(source, target, Some(&mut pre))?;
    trainer.save(run_dir)?;
    adapt_to_end(&mut trainer, source, target, run_dir, obs)
}

/// The adaptation half of `train_full`, continuing from a checkpoint into
/// a fresh run directory. History starts at the resumed iteration.
pub fn resume_full(
    checkpoint: &Path,
    cfg: TrainConfig,
    config_text: &str,
    source: &ImageStack,
    target: UnlabeledStack<'_>,
    run_dir: &Path,
    obs: &mut dyn PhaseObserver,
) -> Result<TrainOutcome> {
    let digest = crate::digest::of_str(config_text);
    init_run_dir(run_dir, config_text)?;
    let mut trainer = Trainer::resume(checkpoint, cfg, &digest)?;
    adapt_to_end(&mut trainer, source, target, run_dir, obs)
}

fn init_run_dir(run_dir: &Path, config_text: &str) -> Result<()> {
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let cfg_path = run_dir.join("config.txt");
    fs::write(&cfg_path, config_text).map_err(|e| Error::io(&cfg_path, e))
}

fn adapt_to_end(
    trainer: &mut Trainer,
    source: &ImageStack,
    target: UnlabeledStack<'_>,
    run_dir: &Path,
    obs: &mut dyn PhaseObserver,
) -> Result<TrainOutcome> {
    let mut hist = HistoryWriter::create(&run_dir.join("history.csv"), &ADAPT_COLUMNS)?;
    let total = trainer.config().total_iters;
    let every = trainer.config().checkpoint_every;
    let mut last = None;
    let mut final_ckpt = None;
    while trainer.iter() < total {
        let batch = trainer.next_batch(source, target)?;
        let record = trainer.adapt_step(&batch, obs)?;
        hist.adapt_row(&record)?;
        let done = trainer.iter();
        if (every > 0 && done % every == 0) || done == total {
            final_ckpt = Some(trainer.save(run_dir)?);
        }
        last = Some(record);
    }
    let final_checkpoint = match final_ckpt {
        Some(p) => p,
        // Nothing ran (resumed an already-finished run): still leave a
        // checkpoint so the directory stands alone.
        None => trainer.save(run_dir)?,
    };
    write_report(trainer, run_dir, &final_checkpoint, last.as_ref())?;
    Ok(TrainOutcome {
        run_dir: run_dir.to_path_buf(),
        final_checkpoint,
        last,
    })
}

fn write_report(
    trainer: &mut Trainer,
    run_dir: &Path,
    final_checkpoint: &Path,
    last: Option<&StepRecord>,
) -> Result<()> {
    let cfg = trainer.config().clone();
    let mut pairs = vec![
        ("run", cfg.flags.label()),
        ("pretrain_iterations", cfg.pretrain_iters.to_string()),
        ("adapt_iterations", trainer.iter().to_string()),
        ("parameters", trainer.bundle_mut().param_count().to_string()),
        (
            "final_checkpoint",
            final_checkpoint
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        ),
    ];
    if let Some(r) = last {
        pairs.push(("final_lr", fmt_f64(r.lr)));
        pairs.push(("final_seg", fmt_f64(r.losses.seg)));
        pairs.push(("final_rec", fmt_f64(r.losses.rec)));
        pairs.push(("final_d_pred", fmt_f64(r.losses.d_pred_loss)));
        pairs.push(("final_d_feat", fmt_f64(r.losses.d_feat_loss)));
        pairs.push(("final_g_pred", fmt_f64(r.losses.g_pred_loss)));
        pairs.push(("final_g_feat", fmt_f64(r.losses.g_feat_loss)));
    }
    let path = run_dir.join("report.txt");
    fs::write(&path, crate::kv::render(pairs)).map_err(|e| Error::io(&path, e))
}
