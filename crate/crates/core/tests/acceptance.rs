//! Acceptance runner: the nine release criteria, one PASS/FAIL line each,
//! exit status 1 if any fail. Built without the libtest harness so the
//! lines stream in order and the long ordering experiment cannot be
//! interleaved with other tests.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;

use shiftseg_core::config::FullConfig;
use shiftseg_core::digest;
use shiftseg_core::eval::{dice_jaccard, MetricsReport};
use shiftseg_core::experiment::{
    desk_config, load_datasets, median, run_ablation, run_single, save_datasets, Datasets,
};
use shiftseg_core::losses::{self, LossValues, LossWeights};
use shiftseg_core::nets::{Group, NetworkBundle};
use shiftseg_core::rng;
use shiftseg_core::tensor::Tensor;
use shiftseg_core::trainer::{
    resume_full, train_full, AblationFlags, NoObserver, PhaseObserver, Trainer,
};

type Verdict = Result<String, String>;

fn main() {
    let t0 = Instant::now();
    // Optional args select a subset of criteria, for quick reruns.
    let only: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut results: Vec<(u8, &str, Verdict)> = Vec::new();
    // Fast property suites first, the two training experiments last.
    let plan: [(u8, &str, fn() -> Verdict); 9] = [
        (1, "loss-value unit suite", criterion_losses),
        (2, "gradient suite", criterion_gradients),
        (3, "alternation isolation", criterion_alternation),
        (4, "target-label quarantine", criterion_quarantine),
        (5, "metric oracle suite", criterion_metrics),
        (7, "lr schedule", criterion_lr_schedule),
        (8, "determinism and resume", criterion_determinism),
        (9, "null-shift sanity", criterion_null_shift),
        (6, "adaptation ordering experiment", criterion_ordering),
    ];
    for (n, name, f) in plan {
        if only.is_empty() || only.contains(&n) {
            section(&mut results, n, name, f);
        }
    }
    results.sort_by_key(|r| r.0);

    println!("\n================ acceptance summary ================");
    let mut passed = 0;
    for (n, name, verdict) in &results {
        match verdict {
            Ok(detail) => {
                passed += 1;
                println!("criterion {n} ({name}): PASS — {detail}");
            }
            Err(detail) => println!("criterion {n} ({name}): FAIL — {detail}"),
        }
    }
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        results.len(),
        t0.elapsed().as_secs_f64()
    );
    if passed != results.len() {
        std::process::exit(1);
    }
}

fn section(results: &mut Vec<(u8, &'static str, Verdict)>, n: u8, name: &'static str, f: fn() -> Verdict) {
    println!("[criterion {n}: {name}]");
    let t = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panicked".into());
        Err(format!("panicked: {msg}"))
    });
    let state = if verdict.is_ok() { "ok" } else { "FAILED" };
    println!("[criterion {n}: {name}] {state} in {:.1}s\n", t.elapsed().as_secs_f64());
    results.push((n, name, verdict));
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Shared small-scale setup: 32-pixel canvas, four-level-divisible patches,
/// a handful of sections, every adaptation mechanism enabled.
fn tiny_config() -> FullConfig {
    let mut cfg = FullConfig::default();
    cfg.synth.canvas_size = 32;
    cfg.synth.blob_count_range = (1, 3);
    cfg.synth.blob_radius_range = (2.0, 5.0);
    cfg.synth.n_train_source = 4;
    cfg.synth.n_train_target = 4;
    cfg.synth.n_test_target = 2;
    cfg.arch.base_width = 4;
    cfg.arch.depth = 2;
    cfg.arch.disc_width = 4;
    cfg.arch.disc_depth = 2;
    cfg.train.patch_size = 16;
    cfg.train.batch_size = 2;
    cfg.train.pretrain_iters = 2;
    cfg.train.total_iters = 4;
    cfg.train.checkpoint_every = 0;
    cfg.train.flags = AblationFlags::all();
    cfg.eval.tile = 32;
    cfg.eval.overlap = 16;
    cfg
}

/// `dsc = 200·jac / (100 + jac)` must hold on every report.
fn check_identity(rep: &MetricsReport, what: &str) -> Result<(), String> {
    let expected = 200.0 * rep.jac / (100.0 + rep.jac);
    let diff = (rep.dsc - expected).abs();
    if diff > 1e-9 {
        return Err(format!(
            "{what}: dsc {} and jac {} break the Dice–Jaccard identity by {diff:.2e}",
            rep.dsc, rep.jac
        ));
    }
    Ok(())
}

// --------------------------------------------------------------------
// Criterion 1: loss-value examples.

struct ExampleLog {
    n: usize,
    failures: Vec<String>,
}

impl ExampleLog {
    fn check(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.n += 1;
        let diff = (got - want).abs();
        if !(diff <= tol) {
            self.failures
                .push(format!("{name}: got {got}, want {want} (diff {diff:.2e} > {tol:.0e})"));
        }
    }

    fn bounded(&mut self, name: &str, got: f64, cap: f64) {
        self.n += 1;
        if !(got >= 0.0 && got < cap) {
            self.failures.push(format!("{name}: got {got}, want < {cap:.0e}"));
        }
    }
}

fn criterion_losses() -> Verdict {
    let mut log = ExampleLog {
        n: 0,
        failures: Vec::new(),
    };
    let grid = |vals: Vec<f64>| Tensor::from_vec(1, 1, 4, 4, vals);
    let fill = |v: f64| grid(vec![v; 16]);
    let mask: Vec<f64> = (0..16).map(|i| f64::from(i % 3 == 0)).collect();
    let y = grid(mask.clone());

    // Segmentation cross-entropy.
    let perfect = losses::seg_loss(&grid(mask), &y).unwrap();
    log.check("seg perfect prediction", perfect, 0.0, 1.2e-7);
    let uniform = losses::seg_loss(&fill(0.5), &y).unwrap();
    log.check("seg uniform 0.5", uniform, std::f64::consts::LN_2, 1e-6);
    let one = Tensor::from_vec(1, 1, 1, 1, vec![0.8]);
    let one_y = Tensor::from_vec(1, 1, 1, 1, vec![1.0]);
    let single = losses::seg_loss(&one, &one_y).unwrap();
    log.check("seg single pixel 0.8 vs 1", single, -(0.8f64.ln()), 1e-6);

    // Dual-domain reconstruction.
    let mut r = rng::stream(3, rng::stream_id::SAMPLE);
    let rand_t = |r: &mut rng::Rng| grid((0..16).map(|_| r.random::<f64>()).collect());
    let (x_s, x_t) = (rand_t(&mut r), rand_t(&mut r));
    log.check(
        "rec identity",
        losses::rec_loss(&x_s, &x_s, &x_t, &x_t).unwrap(),
        0.0,
        1e-12,
    );
    log.check(
        "rec constant offset",
        losses::rec_loss(&fill(0.0), &fill(0.5), &fill(0.0), &fill(0.5)).unwrap(),
        0.5,
        1e-12,
    );
    let (xh_s, xh_t) = (rand_t(&mut r), rand_t(&mut r));
    let brute = |a: &Tensor<f64>, b: &Tensor<f64>| {
        let (mut sum, mut cnt) = (0.0, 0.0);
        for (u, v) in a.data().iter().zip(b.data()) {
            sum += (u - v) * (u - v);
            cnt += 1.0;
        }
        sum / cnt
    };
    log.check(
        "rec elementwise oracle",
        losses::rec_loss(&x_s, &xh_s, &x_t, &xh_t).unwrap(),
        brute(&x_s, &xh_s) + brute(&x_t, &xh_t),
        1e-12,
    );

    // Discriminator loss on logits.
    log.check(
        "disc uninformed",
        losses::disc_loss(&fill(0.0), &fill(0.0)).unwrap(),
        2.0 * std::f64::consts::LN_2,
        1e-6,
    );
    log.bounded(
        "disc saturated ±20",
        losses::disc_loss(&fill(20.0), &fill(-20.0)).unwrap(),
        1e-8,
    );
    let s1 = Tensor::from_vec(1, 1, 1, 1, vec![1.0]);
    let t1 = Tensor::from_vec(1, 1, 1, 1, vec![-1.0]);
    log.check(
        "disc ±1 logits",
        losses::disc_loss(&s1, &t1).unwrap(),
        2.0 * (-1.0f64).exp().ln_1p(),
        1e-6,
    );

    // Generator adversarial loss.
    log.check(
        "gen adv uninformed",
        losses::gen_adv_loss(&fill(0.0)).unwrap(),
        std::f64::consts::LN_2,
        1e-6,
    );
    log.bounded(
        "gen adv saturated +20",
        losses::gen_adv_loss(&fill(20.0)).unwrap(),
        1e-8,
    );
    log.check(
        "gen adv logit -1",
        losses::gen_adv_loss(&fill(-1.0)).unwrap(),
        1.0f64.exp().ln_1p(),
        1e-6,
    );

    // Composite generator objective.
    let lv = LossValues {
        seg: 0.7,
        rec: 0.5,
        d_pred_loss: 1.1,
        d_feat_loss: 0.9,
        g_pred_loss: 0.4,
        g_feat_loss: 0.6,
    };
    let zero = LossWeights {
        lambda_rec: 0.0,
        lambda_feat: 0.0,
        lambda_pred: 0.0,
    };
    log.check(
        "generator objective, zero weights",
        losses::generator_objective(&lv, &zero),
        lv.seg,
        1e-12,
    );
    let rec_only = LossWeights {
        lambda_rec: 1e-3,
        ..zero
    };
    log.check(
        "generator objective, rec-only",
        losses::generator_objective(&lv, &rec_only),
        0.7005,
        1e-12,
    );
    let defaults = LossWeights::default();
    log.check(
        "generator objective, recomposition",
        losses::generator_objective(&lv, &defaults),
        lv.seg
            + defaults.lambda_rec * lv.rec
            + defaults.lambda_feat * lv.g_feat_loss
            + defaults.lambda_pred * lv.g_pred_loss,
        1e-12,
    );

    // Composite discriminator objective.
    log.check(
        "discriminator objective, zero weights",
        losses::discriminator_objective(1.3, 0.8, &zero),
        0.0,
        1e-12,
    );
    let milli = LossWeights {
        lambda_rec: 0.0,
        lambda_feat: 1e-3,
        lambda_pred: 1e-3,
    };
    let two_ln2 = 2.0 * std::f64::consts::LN_2;
    log.check(
        "discriminator objective, balanced",
        losses::discriminator_objective(two_ln2, two_ln2, &milli),
        4e-3 * std::f64::consts::LN_2,
        1e-12,
    );

    // Scaling both discriminator weights by 10 scales every discriminator
    // parameter gradient by 10.
    let batch = common::micro_batch(21);
    let (p_s, _, p_t, _) = common::detached_pair(&batch);
    let grads_at = |lam: f64| {
        let mut b = common::fresh_bundle(5);
        b.zero_grads(Group::DPred);
        let score_s = b.d_pred.forward(&p_s, true);
        b.d_pred
            .backward(&losses::disc_loss_grad_source(&score_s).map(|g| g * lam));
        let score_t = b.d_pred.forward(&p_t, true);
        b.d_pred
            .backward(&losses::disc_loss_grad_target(&score_t).map(|g| g * lam));
        common::read_grads(&mut b)
    };
    let (g1, g10) = (grads_at(1e-3), grads_at(1e-2));
    log.n += 1;
    let mut scale_bad = 0;
    for (name, lo) in &g1 {
        if !name.starts_with("d_pred.") {
            continue;
        }
        for (a, b) in lo.iter().zip(&g10[name]) {
            if a.abs() > 1e-12 && ((b - 10.0 * a) / (10.0 * a)).abs() > 1e-9 {
                scale_bad += 1;
            }
        }
    }
    if scale_bad > 0 {
        log.failures.push(format!(
            "discriminator objective: {scale_bad} gradients did not scale 10x with the weights"
        ));
    }

    if log.failures.is_empty() {
        Ok(format!("{} loss examples within tolerance", log.n))
    } else {
        Err(log.failures.join("; "))
    }
}

// --------------------------------------------------------------------
// Criterion 2: finite-difference gradients (shared harness).

fn criterion_gradients() -> Verdict {
    let mut total = 0;
    let mut worst = 0.0f64;
    for case in common::cases() {
        let rep = common::run_case(&case)?;
        println!(
            "  {}: {} params compared, max rel err {:.2e}",
            rep.name, rep.compared, rep.max_rel
        );
        total += rep.compared;
        worst = worst.max(rep.max_rel);
    }
    Ok(format!(
        "8 loss paths, {total} parameters compared, max rel err {worst:.2e} (tol 1e-4)"
    ))
}

// --------------------------------------------------------------------
// Criterion 3: phase isolation over 10 adaptation steps.

const COMPONENTS: [&str; 5] = ["encoder", "seg_decoder", "rec_decoder", "d_pred", "d_feat"];

fn component_digests(bundle: &mut NetworkBundle<f32>) -> Vec<String> {
    COMPONENTS
        .iter()
        .map(|comp| {
            let mut bytes = Vec::new();
            bundle.visit_component(comp, &mut |name, p| {
                bytes.extend_from_slice(name.as_bytes());
                for v in &p.v {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            });
            digest::of_bytes(&bytes)
        })
        .collect()
}

struct PhaseAudit {
    step: usize,
    pre: Vec<String>,
    after_d: Vec<String>,
    violations: Vec<String>,
    d_calls: usize,
    g_calls: usize,
}

impl PhaseObserver for PhaseAudit {
    fn after_phase_d(&mut self, bundle: &mut NetworkBundle<f32>) {
        self.d_calls += 1;
        let d = component_digests(bundle);
        for i in 0..3 {
            if d[i] != self.pre[i] {
                self.violations
                    .push(format!("step {}: phase D moved {}", self.step, COMPONENTS[i]));
            }
        }
        for i in 3..5 {
            if d[i] == self.pre[i] {
                self.violations.push(format!(
                    "step {}: phase D left {} unchanged",
                    self.step, COMPONENTS[i]
                ));
            }
        }
        self.after_d = d;
    }

    fn after_phase_g(&mut self, bundle: &mut NetworkBundle<f32>) {
        self.g_calls += 1;
        let g = component_digests(bundle);
        for i in 0..3 {
            if g[i] == self.after_d[i] {
                self.violations.push(format!(
                    "step {}: phase G left {} unchanged",
                    self.step, COMPONENTS[i]
                ));
            }
        }
        for i in 3..5 {
            if g[i] != self.after_d[i] {
                self.violations
                    .push(format!("step {}: phase G moved {}", self.step, COMPONENTS[i]));
            }
        }
    }
}

fn criterion_alternation() -> Verdict {
    let mut cfg = tiny_config();
    cfg.train.total_iters = 10;
    let data = Datasets::synth(&cfg).map_err(err)?;
    let mut tr = Trainer::new(&cfg.arch, cfg.train.clone(), "acceptance").map_err(err)?;
    let mut audit = PhaseAudit {
        step: 0,
        pre: Vec::new(),
        after_d: Vec::new(),
        violations: Vec::new(),
        d_calls: 0,
        g_calls: 0,
    };
    for step in 0..10 {
        audit.step = step;
        audit.pre = component_digests(tr.bundle_mut());
        let batch = tr
            .next_batch(&data.source, data.target_train.unlabeled())
            .map_err(err)?;
        tr.adapt_step(&batch, &mut audit).map_err(err)?;
    }
    if audit.d_calls != 10 || audit.g_calls != 10 {
        return Err(format!(
            "expected 10 calls per phase, saw D {} / G {}",
            audit.d_calls, audit.g_calls
        ));
    }
    if !audit.violations.is_empty() {
        return Err(audit.violations.join("; "));
    }
    Ok("10 steps: phase D moved exactly the discriminators, phase G exactly the generator".into())
}

// --------------------------------------------------------------------
// Criterion 4: poisoned target labels cannot reach any trainer output.

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_quarantine() -> Verdict {
    let mut cfg = tiny_config();
    cfg.train.total_iters = 6;
    let tmp = tempfile::tempdir().map_err(err)?;
    let data_dir = tmp.path().join("data");
    let data = Datasets::synth(&cfg).map_err(err)?;
    save_datasets(&data, &data_dir).map_err(err)?;

    let run = |tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let loaded = load_datasets(&data_dir).map_err(err)?;
        let run_dir = tmp.path().join(tag).join("run");
        run_single(&cfg, &loaded, &run_dir).map_err(err)?;
        Ok(dir_contents(&run_dir))
    };
    let clean = run("clean")?;

    // Poison: replace every target-train label with the same-named source
    // label — valid files, wrong content.
    let labels = data_dir.join("target_train").join("labels");
    let mut poisoned_any = false;
    for entry in fs::read_dir(&labels).map_err(err)? {
        let to = entry.map_err(err)?.path();
        let from = data_dir.join("source").join("labels").join(to.file_name().unwrap());
        if fs::read(&from).map_err(err)? != fs::read(&to).map_err(err)? {
            poisoned_any = true;
        }
        fs::copy(&from, &to).map_err(err)?;
    }
    if !poisoned_any {
        return Err("poisoning produced identical label bytes; test would be vacuous".into());
    }
    let poisoned = run("poisoned")?;
    if poisoned != clean {
        return Err("run artifacts changed after poisoning target-train labels".into());
    }

    // Remove the labels entirely: the loader must not even look for them.
    fs::remove_dir_all(&labels).map_err(err)?;
    let absent = run("absent")?;
    if absent != clean {
        return Err("run artifacts changed after deleting target-train labels".into());
    }
    Ok(format!(
        "{} artifact files bitwise-identical across clean / poisoned / deleted target labels",
        clean.len()
    ))
}

// --------------------------------------------------------------------
// Criterion 5: metric oracle.

fn criterion_metrics() -> Verdict {
    let mut r = rng::stream(31, rng::stream_id::SAMPLE);
    let mut worst_identity = 0.0f64;
    for pair in 0..200 {
        let mask = |r: &mut rng::Rng| -> Vec<u8> {
            (0..16 * 16).map(|_| u8::from(r.random::<f64>() < 0.5)).collect()
        };
        let (pred, gt) = (mask(&mut r), mask(&mut r));
        let (dsc, jac) = dice_jaccard(&pred, &gt).map_err(err)?;
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (p, g) in pred.iter().zip(&gt) {
            match (*p > 0, *g > 0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let (tpf, fpf, fnf) = (tp as f64, fp as f64, fn_ as f64);
        let dsc_oracle = 100.0 * 2.0 * tpf / (2.0 * tpf + fpf + fnf);
        let jac_oracle = 100.0 * tpf / (tpf + fpf + fnf);
        if dsc != dsc_oracle || jac != jac_oracle {
            return Err(format!(
                "pair {pair}: got ({dsc}, {jac}), confusion-count oracle says ({dsc_oracle}, {jac_oracle})"
            ));
        }
        let diff = (dsc - 200.0 * jac / (100.0 + jac)).abs();
        worst_identity = worst_identity.max(diff);
        if diff > 1e-9 {
            return Err(format!("pair {pair}: Dice–Jaccard identity off by {diff:.2e}"));
        }
    }
    Ok(format!(
        "200 random pairs exact vs oracle; identity within {worst_identity:.1e} (also asserted on every training report below)"
    ))
}

// --------------------------------------------------------------------
// Criterion 7: recorded learning-rate schedule.

fn history_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(err)?;
    let mut lines = text.lines();
    lines.next().ok_or_else(|| "empty history file".to_string())?;
    Ok(lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn criterion_lr_schedule() -> Verdict {
    let mut cfg = tiny_config();
    cfg.train.lr0 = 2e-4;
    cfg.train.pretrain_iters = 2;
    cfg.train.total_iters = 12;
    let data = Datasets::synth(&cfg).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(err)?;
    train_full(
        &cfg.arch,
        cfg.train.clone(),
        &cfg.render(),
        &data.source,
        data.target_train.unlabeled(),
        tmp.path(),
        &mut NoObserver,
    )
    .map_err(err)?;

    let rows = history_rows(&tmp.path().join("history.csv"))?;
    if rows.len() != 12 {
        return Err(format!("expected 12 adaptation rows, found {}", rows.len()));
    }
    let total = 12.0;
    let mut worst = 0.0f64;
    for row in &rows {
        let t: f64 = row[0].parse().map_err(err)?;
        let lr: f64 = row[1].parse().map_err(err)?;
        let expected = 2e-4 * (1.0 - t / total).powf(0.9);
        let diff = (lr - expected).abs();
        worst = worst.max(diff);
        if diff > 1e-12 {
            return Err(format!(
                "iteration {t}: recorded lr {lr}, schedule says {expected} (diff {diff:.2e})"
            ));
        }
    }
    // Warm-up runs at the constant base rate — the schedule's t = 0 value.
    for row in history_rows(&tmp.path().join("pretrain_history.csv"))? {
        let lr: f64 = row[1].parse().map_err(err)?;
        if lr != 2e-4 {
            return Err(format!("warm-up recorded lr {lr}, want the base rate 2e-4"));
        }
    }
    Ok(format!(
        "12 recorded rates match lr0·(1−t/T)^0.9 within {worst:.1e} (tol 1e-12), lr0 = 2e-4"
    ))
}

// --------------------------------------------------------------------
// Criterion 8: determinism and checkpoint-resume equivalence.

fn criterion_determinism() -> Verdict {
    let mut cfg = tiny_config();
    cfg.train.total_iters = 6;
    cfg.train.checkpoint_every = 2;
    let data = Datasets::synth(&cfg).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(err)?;
    let run = |dir: &Path| {
        train_full(
            &cfg.arch,
            cfg.train.clone(),
            &cfg.render(),
            &data.source,
            data.target_train.unlabeled(),
            dir,
            &mut NoObserver,
        )
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a).map_err(err)?;
    run(&b).map_err(err)?;
    for file in ["pretrain_history.csv", "history.csv", "ckpt_6"] {
        if fs::read(a.join(file)).map_err(err)? != fs::read(b.join(file)).map_err(err)? {
            return Err(format!("{file} differs between two identically-seeded runs"));
        }
    }

    let c = tmp.path().join("c");
    resume_full(
        &a.join("ckpt_2"),
        cfg.train.clone(),
        &cfg.render(),
        &data.source,
        data.target_train.unlabeled(),
        &c,
        &mut NoObserver,
    )
    .map_err(err)?;
    if fs::read(a.join("ckpt_6")).map_err(err)? != fs::read(c.join("ckpt_6")).map_err(err)? {
        return Err("resumed final checkpoint differs from the unbroken run's".into());
    }
    let full = history_rows(&a.join("history.csv"))?;
    let tail = history_rows(&c.join("history.csv"))?;
    if full[2..] != tail[..] {
        return Err("resumed history rows differ from the unbroken run's suffix".into());
    }
    Ok("rerun bitwise-identical; resume from ckpt_2 matches the unbroken run".into())
}

// --------------------------------------------------------------------
// Criterion 9: identity shift must leave adaptation near-inert.

fn criterion_null_shift() -> Verdict {
    let mut cfg = desk_config();
    cfg.synth.target_shift.invert = false;
    cfg.synth.target_shift.freq_delta = 0.0;
    cfg.synth.target_shift.noise_sigma = 0.0;
    cfg.synth.seed = 7;
    cfg.train.seed = 7;
    let data = Datasets::synth(&cfg).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(err)?;

    let mut baseline_cfg = cfg.clone();
    baseline_cfg.train.flags = AblationFlags::none();
    let baseline = run_single(&baseline_cfg, &data, &tmp.path().join("baseline")).map_err(err)?;
    check_identity(&baseline, "null-shift baseline")?;

    let mut full_cfg = cfg.clone();
    full_cfg.train.flags = AblationFlags::all();
    let full = run_single(&full_cfg, &data, &tmp.path().join("full")).map_err(err)?;
    check_identity(&full, "null-shift full")?;

    let diff = (full.dsc - baseline.dsc).abs();
    if diff > 2.0 {
        return Err(format!(
            "identity shift: baseline {:.2} vs full adaptation {:.2} DSC differ by {diff:.2} (> 2)",
            baseline.dsc, full.dsc
        ));
    }
    Ok(format!(
        "identity shift: baseline {:.2}, full adaptation {:.2} DSC (|Δ| = {diff:.2} ≤ 2)",
        baseline.dsc, full.dsc
    ))
}

// --------------------------------------------------------------------
// Criterion 6: the scaled ordering experiment.

fn criterion_ordering() -> Verdict {
    let seeds = [7u64, 8, 9];
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut per_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut slowest_run = 0.0f64;
    for seed in seeds {
        let mut cfg = desk_config();
        cfg.synth.seed = seed;
        cfg.train.seed = seed;
        let data = Datasets::synth(&cfg).map_err(err)?;
        let t = Instant::now();
        let rows = run_ablation(&cfg, &data, &tmp.path().join(format!("seed{seed}"))).map_err(err)?;
        let elapsed = t.elapsed().as_secs_f64();
        slowest_run = slowest_run.max(elapsed / rows.len() as f64);
        print!("  seed {seed} ({elapsed:.0}s):");
        for row in rows {
            let rep = match &row.outcome {
                Ok(rep) => rep,
                Err(e) => return Err(format!("{}: {e}", row.label)),
            };
            check_identity(rep, &row.label)?;
            let dsc = rep.dsc;
            print!("  {} {dsc:.2}", row.label);
            if !order.contains(&row.label) {
                order.push(row.label.clone());
            }
            per_label.entry(row.label.clone()).or_default().push(dsc);
        }
        println!();
    }
    // Average per-run cost stands in for the per-run budget; runs within a
    // seed are homogeneous to within seconds.
    if slowest_run > 600.0 {
        return Err(format!("average run cost {slowest_run:.0}s exceeds the 10-minute budget"));
    }

    let med: BTreeMap<&str, f64> = per_label
        .iter()
        .map(|(k, v)| (k.as_str(), median(v)))
        .collect();
    let summary = order
        .iter()
        .map(|l| format!("{l} {:.2}", med[l.as_str()]))
        .collect::<Vec<_>>()
        .join(", ");
    println!("  medians: {summary}");

    let baseline = med["baseline"];
    let full = med["EN+DE_feat+DE_pred"];
    let mut failures = Vec::new();
    for label in ["EN", "DE_feat", "DE_pred", "EN+DE_feat", "EN+DE_feat+DE_pred"] {
        if med[label] < baseline + 5.0 {
            failures.push(format!(
                "(a) {label} median {:.2} not ≥ baseline {baseline:.2} + 5",
                med[label]
            ));
        }
    }
    if med["EN+DE_feat"] < med["EN"] - 1.0 {
        failures.push(format!(
            "(b) EN+DE_feat median {:.2} below EN {:.2} − 1",
            med["EN+DE_feat"], med["EN"]
        ));
    }
    for label in ["EN", "DE_feat", "DE_pred"] {
        if full < med[label] - 1.0 {
            failures.push(format!(
                "(c) full median {full:.2} below {label} {:.2} − 1",
                med[label]
            ));
        }
    }
    if !failures.is_empty() {
        return Err(format!("medians: {summary}; {}", failures.join("; ")));
    }
    Ok(format!(
        "3-seed medians: {summary}; all orderings hold (≤ {slowest_run:.0}s per run)"
    ))
}
