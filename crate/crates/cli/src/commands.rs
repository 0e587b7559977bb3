//! Argument surface and dispatch for every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use shiftseg_core::config::FullConfig;
use shiftseg_core::experiment::{
    append_manifest, append_metrics, load_datasets, run_ablation, run_single, save_datasets,
    score_checkpoint, Datasets, RunManifest,
};
use shiftseg_core::eval::{evaluate_sections, Provenance};
use shiftseg_core::nets::load_checkpoint;
use shiftseg_core::trainer::{
    resume_full, HistoryWriter, Trainer, PRETRAIN_COLUMNS,
};
use shiftseg_core::{par, Error, Result};

/// Domain-adaptive segmentation benchmark: synthesize a source/target
/// pair, train with the adaptation mechanisms on or off, and score the
/// result on the held-out target split.
#[derive(Parser)]
#[command(name = "shiftseg", version)]
pub struct Cli {
    /// Config file of `key = value` lines; defaults fill whatever is absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override every seed in the config (synthesis and training).
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    /// Directory for this command's artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Run numeric loops on the sequential reference path instead of the
    /// data-parallel one (both produce identical bytes).
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Synthesize the source/target_train/target_test dataset directories.
    Synth,

    /// Supervised warm-up of the segmentation path on source patches only.
    Pretrain {
        /// Dataset directory produced by `synth`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },

    /// Full schedule — warm-up (or a donor checkpoint) plus adaptation —
    /// finishing with a score on the target test split.
    Adapt {
        /// Dataset directory produced by `synth`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,

        /// Continue from this checkpoint instead of warming up.
        #[arg(long, value_name = "CKPT")]
        from: Option<PathBuf>,
    },

    /// Score a saved checkpoint on a labeled split.
    Eval {
        /// Dataset directory produced by `synth`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,

        /// Checkpoint file to score.
        #[arg(long, value_name = "CKPT")]
        checkpoint: PathBuf,

        /// Which split to score.
        #[arg(long, value_enum, default_value_t = Split::TargetTest)]
        split: Split,

        /// Also print one scored row per section.
        #[arg(long)]
        per_section: bool,
    },

    /// Run the six-row mechanism grid — no adaptation, each mechanism
    /// alone, and the two combinations — with one seed and budget.
    Ablate {
        /// Dataset directory produced by `synth`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },

    /// Render loss curves per run and a qualitative panel per test
    /// section (input, ground truth, one prediction column per run).
    Plot {
        /// Dataset directory produced by `synth`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,

        /// Finished run directories to compare (at least one).
        #[arg(value_name = "RUN_DIR", required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
    },
}

/// Labeled splits a checkpoint can be scored on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Source,
    TargetTest,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Source => "source",
            Split::TargetTest => "target_test",
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    par::set_parallel(!cli.deterministic);
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            FullConfig::parse(&text)?
        }
        None => FullConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    let command_line: String = std::env::args().collect::<Vec<_>>().join(" ");
    let out = cli.out;
    match cli.command {
        Command::Synth => cmd_synth(&cfg, &out, &command_line),
        Command::Pretrain { data } => cmd_pretrain(&cfg, &data, &out, &command_line),
        Command::Adapt { data, from } => cmd_adapt(&cfg, &data, from.as_deref(), &out, &command_line),
        Command::Eval {
            data,
            checkpoint,
            split,
            per_section,
        } => cmd_eval(&cfg, &data, &checkpoint, split, per_section, &out, &command_line),
        Command::Ablate { data } => cmd_ablate(&cfg, &data, &out, &command_line),
        Command::Plot { data, runs } => cmd_plot(&cfg, &data, &runs, &out, &command_line),
    }
}

/// Write the resolved config next to a command's artifacts.
fn write_config(dir: &Path, cfg: &FullConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, cfg.render()).map_err(|e| Error::io(&path, e))
}

fn cmd_synth(cfg: &FullConfig, out: &Path, command_line: &str) -> Result<()> {
    let mut manifest = RunManifest::begin(command_line, cfg);
    let data = Datasets::synth(cfg)?;
    save_datasets(&data, out)?;
    write_config(out, cfg)?;
    manifest.dataset_digests = data.digests();
    append_manifest(out, manifest)?;
    println!(
        "wrote {} sections (source) + {} (target_train) + {} (target_test) under {}",
        data.source.depth(),
        data.target_train.depth(),
        data.target_test.depth(),
        out.display()
    );
    Ok(())
}

fn cmd_pretrain(cfg: &FullConfig, data_dir: &Path, out: &Path, command_line: &str) -> Result<()> {
    let data = load_datasets(data_dir)?;
    let mut manifest = RunManifest::begin(command_line, cfg);
    manifest.dataset_digests = data.digests();
    write_config(out, cfg)?;
    let mut trainer = Trainer::new(&cfg.arch, cfg.train.clone(), &cfg.digest())?;
    let mut hist = HistoryWriter::create(&out.join("pretrain_history.csv"), &PRETRAIN_COLUMNS)?;
    trainer.pretrain(&data.source, data.target_train.unlabeled(), Some(&mut hist))?;
    let ckpt = trainer.save(out)?;
    append_manifest(out, manifest)?;
    println!("warm-up checkpoint {}", ckpt.display());
    Ok(())
}

fn cmd_adapt(
    cfg: &FullConfig,
    data_dir: &Path,
    from: Option<&Path>,
    out: &Path,
    command_line: &str,
) -> Result<()> {
    let data = load_datasets(data_dir)?;
    let mut manifest = RunManifest::begin(command_line, cfg);
    manifest.dataset_digests = data.digests();
    let report = match from {
        Some(ckpt) => {
            let outcome = resume_full(
                ckpt,
                cfg.train.clone(),
                &cfg.render(),
                &data.source,
                data.target_train.unlabeled(),
                out,
                &mut shiftseg_core::trainer::NoObserver,
            )?;
            score_checkpoint(
                &outcome.final_checkpoint,
                cfg,
                "target_test",
                &data.target_test,
                out,
            )?
        }
        None => run_single(cfg, &data, out)?,
    };
    append_manifest(out, manifest)?;
    println!(
        "run {} [{}]: target_test dsc {:.2} jac {:.2}",
        out.display(),
        cfg.train.flags.label(),
        report.dsc,
        report.jac
    );
    Ok(())
}

fn cmd_eval(
    cfg: &FullConfig,
    data_dir: &Path,
    checkpoint: &Path,
    split: Split,
    per_section: bool,
    out: &Path,
    command_line: &str,
) -> Result<()> {
    let data = load_datasets(data_dir)?;
    let stack = match split {
        Split::Source => &data.source,
        Split::TargetTest => &data.target_test,
    };
    let mut manifest = RunManifest::begin(command_line, cfg);
    manifest.dataset_digests = data.digests();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_config(out, cfg)?;
    let run_id = checkpoint
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eval".into());
    let provenance = || Provenance {
        config_digest: cfg.digest(),
        checkpoint: checkpoint
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seed: cfg.train.seed,
    };
    let mut loaded = load_checkpoint(checkpoint)?;
    let report = shiftseg_core::eval::evaluate(&mut loaded.bundle, stack, &cfg.eval, provenance())?;
    append_metrics(&out.join("metrics.csv"), &run_id, split.name(), &report)?;
    println!(
        "{} @ {}: dsc {:.2} jac {:.2} over {} px",
        run_id,
        split.name(),
        report.dsc,
        report.jac,
        report.n_pixels
    );
    if per_section {
        let sections = evaluate_sections(&mut loaded.bundle, stack, &cfg.eval, provenance())?;
        for (i, r) in sections.iter().enumerate() {
            println!(
                "  section {i}: dsc {:.2} jac {:.2} over {} px",
                r.dsc, r.jac, r.n_pixels
            );
        }
    }
    append_manifest(out, manifest)?;
    Ok(())
}

fn cmd_ablate(cfg: &FullConfig, data_dir: &Path, out: &Path, command_line: &str) -> Result<()> {
    let data = load_datasets(data_dir)?;
    let mut manifest = RunManifest::begin(command_line, cfg);
    manifest.dataset_digests = data.digests();
    write_config(out, cfg)?;
    let rows = run_ablation(cfg, &data, out)?;
    append_manifest(out, manifest)?;
    println!("{:<22} {:>8} {:>8}", "row", "dsc", "jac");
    for row in &rows {
        match &row.outcome {
            Ok(r) => println!("{:<22} {:>8.2} {:>8.2}", row.label, r.dsc, r.jac),
            Err(e) => println!("{:<22} FAILED: {e}", row.label),
        }
    }
    println!("table: {}", out.join("ablation.csv").display());
    Ok(())
}

fn cmd_plot(
    cfg: &FullConfig,
    data_dir: &Path,
    runs: &[PathBuf],
    out: &Path,
    command_line: &str,
) -> Result<()> {
    let data = load_datasets(data_dir)?;
    let mut manifest = RunManifest::begin(command_line, cfg);
    manifest.dataset_digests = data.digests();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    crate::plot::render_all(&data, runs, out)?;
    append_manifest(out, manifest)?;
    Ok(())
}
