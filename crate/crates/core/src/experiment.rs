//! End-to-end experiment plumbing: benchmark dataset directories, single
//! train-and-score runs, the six-row mechanism-ablation grid, and the
//! provenance manifest every artifact directory carries.
//!
//! Everything here is deterministic given config and seed, except the
//! wall-clock timestamps recorded in manifests — which is why reruns are
//! compared on the data artifacts, never on `manifest.txt`.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::Path;

use crate::config::FullConfig;
use crate::datapipe::{load_stack, save_stack, synth_domains, ImageStack};
use crate::error::{Error, Result};
use crate::eval::{evaluate, metrics_csv_row, MetricsReport, Provenance, METRICS_COLUMNS};
use crate::kv;
use crate::nets::load_checkpoint;
use crate::trainer::{train_full, AblationFlags, NoObserver};

/// Subdirectory names of one benchmark dataset, in the order they are
/// written and digested.
pub const DOMAIN_DIRS: [&str; 3] = ["source", "target_train", "target_test"];

/// Name of the provenance file in every artifact directory.
pub const MANIFEST_FILE: &str = "manifest.txt";

/// The three stacks of one benchmark: labeled source, unlabeled-in-use
/// target training data, and the held-out labeled target test split.
#[derive(Debug)]
pub struct Datasets {
    pub source: ImageStack,
    pub target_train: ImageStack,
    pub target_test: ImageStack,
}

impl Datasets {
    /// Generate the benchmark in memory from a synthesis config.
    pub fn synth(cfg: &FullConfig) -> Result<Datasets> {
        let (source, target_train, target_test) = synth_domains(&cfg.synth)?;
        Ok(Datasets {
            source,
            target_train,
            target_test,
        })
    }

    /// Content digests per domain, in `DOMAIN_DIRS` order.
    pub fn digests(&self) -> Vec<(String, String)> {
        vec![
            ("source".into(), self.source.digest()),
            ("target_train".into(), self.target_train.digest()),
            ("target_test".into(), self.target_test.digest()),
        ]
    }
}

/// Write the benchmark under `dir`: one subdirectory per domain, each with
/// `images/` and `labels/` PNG stacks.
pub fn save_datasets(data: &Datasets, dir: &Path) -> Result<()> {
    for (name, stack) in [
        ("source", &data.source),
        ("target_train", &data.target_train),
        ("target_test", &data.target_test),
    ] {
        let base = dir.join(name);
        save_stack(stack, &base.join("images"), Some(&base.join("labels")))?;
    }
    Ok(())
}

/// Read a benchmark written by `save_datasets`. Target-train labels are
/// deliberately not loaded even when present on disk: adaptation never
/// sees them, so their content cannot influence any run.
pub fn load_datasets(dir: &Path) -> Result<Datasets> {
    let load = |name: &str, labels: bool| -> Result<ImageStack> {
        let base = dir.join(name);
        let label_dir = base.join("labels");
        load_stack(
            &base.join("images"),
            if labels { Some(&label_dir) } else { None },
        )
    };
    Ok(Datasets {
        source: load("source", true)?,
        target_train: load("target_train", false)?,
        target_test: load("target_test", true)?,
    })
}

/// Append one row to `metrics.csv`, creating it with a header first if
/// needed.
pub fn append_metrics(path: &Path, run_id: &str, split: &str, report: &MetricsReport) -> Result<()> {
    let mut text = String::new();
    if !path.exists() {
        text.push_str(&METRICS_COLUMNS.join(","));
        text.push('\n');
    }
    text.push_str(&metrics_csv_row(run_id, split, report));
    text.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Load a checkpoint, score it on a labeled stack with the config's
/// evaluation settings, and append the result to the run directory's
/// `metrics.csv`. The run id in the row is the directory's name.
pub fn score_checkpoint(
    checkpoint: &Path,
    cfg: &FullConfig,
    split: &str,
    stack: &ImageStack,
    run_dir: &Path,
) -> Result<MetricsReport> {
    let mut loaded = load_checkpoint(checkpoint)?;
    let provenance = Provenance {
        config_digest: cfg.digest(),
        checkpoint: checkpoint
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seed: cfg.train.seed,
    };
    let report = evaluate(&mut loaded.bundle, stack, &cfg.eval, provenance)?;
    let run_id = run_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    append_metrics(&run_dir.join("metrics.csv"), &run_id, split, &report)?;
    Ok(report)
}

/// Train one configuration end to end in `run_dir` and score the final
/// checkpoint on the target test split.
pub fn run_single(cfg: &FullConfig, data: &Datasets, run_dir: &Path) -> Result<MetricsReport> {
    cfg.validate()?;
    let outcome = train_full(
        &cfg.arch,
        cfg.train.clone(),
        &cfg.render(),
        &data.source,
        data.target_train.unlabeled(),
        run_dir,
        &mut NoObserver,
    )?;
    score_checkpoint(
        &outcome.final_checkpoint,
        cfg,
        "target_test",
        &data.target_test,
        run_dir,
    )
}

/// The mechanism study's rows in presentation order: no adaptation first,
/// then each mechanism alone, then the two combinations.
pub fn ablation_grid() -> [AblationFlags; 6] {
    let f = |en, de_feat, de_pred| AblationFlags {
        en,
        de_feat,
        de_pred,
    };
    [
        AblationFlags::none(),
        f(true, false, false),
        f(false, true, false),
        f(false, false, true),
        f(true, true, false),
        f(true, true, true),
    ]
}

/// One grid row's outcome: the flag label plus either the test report or
/// the error that stopped that row. A failed row never aborts the grid.
#[derive(Debug)]
pub struct AblationRow {
    pub label: String,
    pub outcome: std::result::Result<MetricsReport, Error>,
}

/// Run all six rows with identical seed and budget, each in its own
/// subdirectory of `out_dir`, and write `ablation.csv`. Per-row failures
/// land in the table's error column while the remaining rows still run.
pub fn run_ablation(base: &FullConfig, data: &Datasets, out_dir: &Path) -> Result<Vec<AblationRow>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::new();
    for flags in ablation_grid() {
        let mut cfg = base.clone();
        cfg.train.flags = flags;
        let label = flags.label();
        let run_dir = out_dir.join(&label);
        rows.push(AblationRow {
            outcome: run_single(&cfg, data, &run_dir),
            label,
        });
    }
    write_ablation_table(&out_dir.join("ablation.csv"), &rows)?;
    Ok(rows)
}

/// Render the grid outcome as CSV: `row,dsc,jac,error`, one line per row
/// in grid order. Failed rows leave the scores empty and quote the error.
pub fn write_ablation_table(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut text = String::from("row,dsc,jac,error\n");
    for row in rows {
        match &row.outcome {
            Ok(r) => text.push_str(&format!("{},{},{},\n", row.label, r.dsc, r.jac)),
            Err(e) => {
                let msg = e.to_string().replace('"', "'");
                text.push_str(&format!("{},,,\"{msg}\"\n", row.label));
            }
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Median with the midpoint convention for even sample sizes.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// UTC wall-clock timestamp for manifests, to whole seconds.
pub fn utc_now() -> String {
    chrono::Utc::now()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Provenance block for an artifact directory: which command produced it,
/// from which config and inputs, and when — every line `key = value`, with
/// the full resolved config inlined under its usual prefixed keys.
/// Appending keeps a directory's whole production history; a manifest is
/// never rewritten.
#[derive(Clone, Debug)]
pub struct RunManifest {
    /// The invocation as the operator issued it.
    pub command: String,
    /// The resolved config's canonical text.
    pub config_text: String,
    pub seed: u64,
    pub code_version: String,
    /// Content digests of the input/output datasets, named per domain.
    pub dataset_digests: Vec<(String, String)>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    /// Start a manifest for a command now; `finished` is stamped on write.
    pub fn begin(command: impl Into<String>, cfg: &FullConfig) -> RunManifest {
        RunManifest {
            command: command.into(),
            config_text: cfg.render(),
            seed: cfg.train.seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            dataset_digests: Vec::new(),
            started: utc_now(),
            finished: String::new(),
        }
    }

    fn render(&self) -> String {
        let mut pairs: Vec<(&str, String)> = vec![
            ("command", self.command.clone()),
            ("code_version", self.code_version.clone()),
            ("seed", self.seed.to_string()),
        ];
        for (name, digest) in &self.dataset_digests {
            pairs.push(("dataset", format!("{name} {digest}")));
        }
        pairs.push(("started", self.started.clone()));
        pairs.push(("finished", self.finished.clone()));
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&kv::render([(k, v)]));
        }
        out.push_str(&self.config_text);
        out
    }
}

/// Stamp the finish time and append the block to `dir`'s manifest,
/// separated from earlier blocks by a blank line.
pub fn append_manifest(dir: &Path, mut manifest: RunManifest) -> Result<()> {
    manifest.finished = utc_now();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    let mut block = String::new();
    if path.exists() {
        block.push('\n');
    }
    block.push_str(&manifest.render());
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    file.write_all(block.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// Experiment configuration sized for a single desk-class core: the
/// default benchmark, a narrow network, and a budget of a few hundred
/// iterations per run — small enough that the whole grid finishes in
/// minutes, strong enough that the adaptation mechanisms clear noise.
pub fn desk_config() -> FullConfig {
    let mut cfg = FullConfig::default();
    cfg.arch.base_width = 8;
    cfg.arch.disc_width = 8;
    cfg.train.lr0 = 1e-3;
    cfg.train.patch_size = 32;
    cfg.train.batch_size = 4;
    cfg.train.pretrain_iters = 200;
    cfg.train.total_iters = 400;
    cfg.train.checkpoint_every = 0;
    // Two dozen small sections overfit quickly; the dihedral augmentations
    // stretch them as far as they go.
    cfg.train.augment = true;
    // Loss weights rescaled for the short budget: reconstruction must
    // anchor the encoder within a few hundred steps, and the adversarial
    // terms push against a far smaller segmenter than the reference
    // setting assumes.
    cfg.train.weights.lambda_rec = 2.0;
    cfg.train.weights.lambda_feat = 0.02;
    cfg.train.weights.lambda_pred = 0.02;
    cfg
}
