//! Finite-difference gradient harness shared by the gradient test file and
//! the acceptance runner. Central differences on an 8×8 micro-network, in
//! f64 end to end, validate the analytic gradient of every loss path.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng as _;

use shiftseg_core::losses;
use shiftseg_core::nets::{build_bundle, ArchConfig, Group, NetworkBundle};
use shiftseg_core::rng;
use shiftseg_core::tensor::Tensor;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Sample at least this many parameters per loss path.
pub const MIN_CHECKS: usize = 50;

pub fn micro_arch() -> ArchConfig {
    ArchConfig {
        in_channels: 1,
        base_width: 2,
        depth: 1,
        disc_width: 2,
        disc_depth: 1,
    }
}

pub struct Batch {
    pub x_s: Tensor<f64>,
    pub y_s: Tensor<f64>,
    pub x_t: Tensor<f64>,
}

pub fn micro_batch(seed: u64) -> Batch {
    let mut r = rng::stream(seed, rng::stream_id::SAMPLE);
    let n = 2 * 8 * 8;
    let img = |r: &mut rng::Rng| -> Vec<f64> { (0..n).map(|_| r.random::<f64>()).collect() };
    let x_s = Tensor::from_vec(2, 1, 8, 8, img(&mut r));
    let y: Vec<f64> = (0..n)
        .map(|_| if r.random::<f64>() < 0.35 { 1.0 } else { 0.0 })
        .collect();
    let y_s = Tensor::from_vec(2, 1, 8, 8, y);
    let x_t = Tensor::from_vec(2, 1, 8, 8, img(&mut r));
    Batch { x_s, y_s, x_t }
}

pub fn fresh_bundle(seed: u64) -> NetworkBundle<f64> {
    let mut r = rng::stream(seed, rng::stream_id::INIT);
    build_bundle(&micro_arch(), &mut r).unwrap()
}

fn zero_all(b: &mut NetworkBundle<f64>) {
    for g in [Group::Generator, Group::DPred, Group::DFeat] {
        b.zero_grads(g);
    }
}

/// Names and sizes of every parameter tensor whose name starts with one of
/// the prefixes.
fn tensors_with(b: &mut NetworkBundle<f64>, prefixes: &[&str]) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    b.visit_all(&mut |name, p| {
        if prefixes.iter().any(|pre| name.starts_with(pre)) {
            out.push((name, p.v.len()));
        }
    });
    out
}

pub fn read_grads(b: &mut NetworkBundle<f64>) -> BTreeMap<String, Vec<f64>> {
    let mut out = BTreeMap::new();
    b.visit_all(&mut |name, p| {
        out.insert(name, p.g.clone());
    });
    out
}

fn nudge(b: &mut NetworkBundle<f64>, target: &str, idx: usize, delta: f64) {
    b.visit_all(&mut |name, p| {
        if name == target {
            p.v[idx] += delta;
        }
    });
}

type AnalyticFn = Box<dyn Fn(&mut NetworkBundle<f64>, &Batch)>;
type ValueFn = Box<dyn Fn(&mut NetworkBundle<f64>, &Batch) -> f64>;

/// One loss path: `analytic` must leave the path's gradient in the bundle,
/// `value` must recompute the loss from scratch, and parameters matching
/// `prefixes` carry the gradient under test.
pub struct Case {
    pub name: &'static str,
    prefixes: Vec<&'static str>,
    analytic: AnalyticFn,
    value: ValueFn,
}

pub struct CaseReport {
    pub name: &'static str,
    pub compared: usize,
    pub max_rel: f64,
}

/// Check one case, sampling parameters evenly from every matching tensor.
pub fn run_case(case: &Case) -> Result<CaseReport, String> {
    let batch = micro_batch(21);
    let mut b = fresh_bundle(5);
    zero_all(&mut b);
    (case.analytic)(&mut b, &batch);
    let grads = read_grads(&mut b);
    let tensors = tensors_with(&mut b, &case.prefixes);
    assert!(!tensors.is_empty(), "no parameters match {:?}", case.prefixes);
    let per_tensor = (MIN_CHECKS * 12 / 5).div_ceil(tensors.len()).max(4);
    let mut compared = 0_usize;
    let mut max_rel = 0.0_f64;
    for (name, len) in &tensors {
        let k = per_tensor.min(*len);
        for j in 0..k {
            let idx = j * (*len) / k;
            let a = grads[name][idx];
            nudge(&mut b, name, idx, STEP);
            let plus = (case.value)(&mut b, &batch);
            nudge(&mut b, name, idx, -2.0 * STEP);
            let minus = (case.value)(&mut b, &batch);
            nudge(&mut b, name, idx, STEP);
            let numeric = (plus - minus) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs());
            if scale < 1e-10 {
                continue; // both sides vanish; nothing to compare against
            }
            compared += 1;
            let rel = (a - numeric).abs() / scale;
            max_rel = max_rel.max(rel);
            if rel >= TOL {
                return Err(format!(
                    "{}: {name}[{idx}] analytic {a:.3e} vs numeric {numeric:.3e} (rel {rel:.3e})",
                    case.name
                ));
            }
        }
    }
    if compared < MIN_CHECKS {
        return Err(format!("{}: only {compared} parameters compared", case.name));
    }
    Ok(CaseReport {
        name: case.name,
        compared,
        max_rel,
    })
}

const GEN_SEG: &[&str] = &["encoder.", "seg_decoder."];
const GEN_REC: &[&str] = &["encoder.", "rec_decoder."];
const GEN_ALL: &[&str] = &["encoder.", "seg_decoder.", "rec_decoder."];

/// Detached generator outputs for the discriminator cases, computed once
/// from an untouched twin bundle so perturbing the checked bundle's
/// parameters cannot move the discriminator's inputs.
pub fn detached_pair(batch: &Batch) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>, Tensor<f64>) {
    let mut frozen = fresh_bundle(5);
    let s = frozen.forward_ge(&batch.x_s, false).unwrap();
    let t = frozen.forward_ge(&batch.x_t, false).unwrap();
    (s.p, s.f, t.p, t.f)
}

/// Distinct, non-default weights so a dropped or misplaced factor cannot
/// cancel out.
pub const W: losses::LossWeights = losses::LossWeights {
    lambda_rec: 0.7,
    lambda_feat: 0.3,
    lambda_pred: 0.2,
};

/// All eight loss paths: the four single losses, the two adversarial
/// generator terms, and the two weighted composite objectives.
pub fn cases() -> Vec<Case> {
    let mut v: Vec<Case> = Vec::new();

    v.push(Case {
        name: "seg",
        prefixes: GEN_SEG.to_vec(),
        analytic: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_s, true).unwrap();
            let dp = losses::seg_loss_grad(&out.p, &batch.y_s);
            b.backward_full(&dp, None, None);
        }),
        value: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_s, true).unwrap();
            losses::seg_loss(&out.p, &batch.y_s).unwrap()
        }),
    });

    v.push(Case {
        name: "rec",
        prefixes: GEN_REC.to_vec(),
        analytic: Box::new(|b, batch| {
            for x in [&batch.x_s, &batch.x_t] {
                let out = b.forward_full(x, true).unwrap();
                let dp = out.ge.p.full_like(0.0);
                let dxhat = losses::rec_loss_grad_one(x, &out.xhat);
                b.backward_full(&dp, None, Some(&dxhat));
            }
        }),
        value: Box::new(|b, batch| {
            let xhat_s = b.forward_ae(&batch.x_s, true).unwrap();
            let xhat_t = b.forward_ae(&batch.x_t, true).unwrap();
            losses::rec_loss(&batch.x_s, &xhat_s, &batch.x_t, &xhat_t).unwrap()
        }),
    });

    {
        let (p_s, _, p_t, _) = detached_pair(&micro_batch(21));
        let (ps, pt) = (p_s.clone(), p_t.clone());
        v.push(Case {
            name: "d_pred",
            prefixes: vec!["d_pred."],
            analytic: Box::new(move |b, _| {
                let score_s = b.d_pred.forward(&p_s, true);
                b.d_pred.backward(&losses::disc_loss_grad_source(&score_s));
                let score_t = b.d_pred.forward(&p_t, true);
                b.d_pred.backward(&losses::disc_loss_grad_target(&score_t));
            }),
            value: Box::new(move |b, _| {
                let score_s = b.d_pred.forward(&ps, true);
                let score_t = b.d_pred.forward(&pt, true);
                losses::disc_loss(&score_s, &score_t).unwrap()
            }),
        });
    }

    {
        let (_, f_s, _, f_t) = detached_pair(&micro_batch(21));
        let (fs, ft) = (f_s.clone(), f_t.clone());
        v.push(Case {
            name: "d_feat",
            prefixes: vec!["d_feat."],
            analytic: Box::new(move |b, _| {
                let score_s = b.d_feat.forward(&f_s, true);
                b.d_feat.backward(&losses::disc_loss_grad_source(&score_s));
                let score_t = b.d_feat.forward(&f_t, true);
                b.d_feat.backward(&losses::disc_loss_grad_target(&score_t));
            }),
            value: Box::new(move |b, _| {
                let score_s = b.d_feat.forward(&fs, true);
                let score_t = b.d_feat.forward(&ft, true);
                losses::disc_loss(&score_s, &score_t).unwrap()
            }),
        });
    }

    v.push(Case {
        name: "g_pred",
        prefixes: GEN_SEG.to_vec(),
        analytic: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_t, true).unwrap();
            let score = b.d_pred.forward(&out.p, true);
            let seed = losses::gen_adv_loss_grad(&score);
            let dp = b.d_pred.backward(&seed);
            b.backward_full(&dp, None, None);
        }),
        value: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_t, true).unwrap();
            let score = b.d_pred.forward(&out.p, true);
            losses::gen_adv_loss(&score).unwrap()
        }),
    });

    // The decoder feature reaches d_feat before the prediction head, so
    // only encoder and trunk parameters carry this gradient; sampling the
    // encoder keeps every comparison meaningful.
    v.push(Case {
        name: "g_feat",
        prefixes: vec!["encoder."],
        analytic: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_t, true).unwrap();
            let score = b.d_feat.forward(&out.f, true);
            let seed = losses::gen_adv_loss_grad(&score);
            let df = b.d_feat.backward(&seed);
            let dp = out.p.full_like(0.0);
            b.backward_full(&dp, Some(&df), None);
        }),
        value: Box::new(|b, batch| {
            let out = b.forward_ge(&batch.x_t, true).unwrap();
            let score = b.d_feat.forward(&out.f, true);
            losses::gen_adv_loss(&score).unwrap()
        }),
    });

    v.push(Case {
        name: "generator objective",
        prefixes: GEN_ALL.to_vec(),
        analytic: Box::new(|b, batch| {
            // Source stream: supervised + weighted reconstruction.
            let out = b.forward_full(&batch.x_s, true).unwrap();
            let dp = losses::seg_loss_grad(&out.ge.p, &batch.y_s);
            let dxhat =
                losses::rec_loss_grad_one(&batch.x_s, &out.xhat).map(|g| g * W.lambda_rec);
            b.backward_full(&dp, None, Some(&dxhat));
            // Target stream: weighted adversarial terms + reconstruction.
            let out = b.forward_full(&batch.x_t, true).unwrap();
            let score_p = b.d_pred.forward(&out.ge.p, true);
            let seed_p = losses::gen_adv_loss_grad(&score_p).map(|g| g * W.lambda_pred);
            let mut dp = out.ge.p.full_like(0.0);
            dp.add_assign(&b.d_pred.backward(&seed_p));
            let score_f = b.d_feat.forward(&out.ge.f, true);
            let seed_f = losses::gen_adv_loss_grad(&score_f).map(|g| g * W.lambda_feat);
            let df = b.d_feat.backward(&seed_f);
            let dxhat =
                losses::rec_loss_grad_one(&batch.x_t, &out.xhat).map(|g| g * W.lambda_rec);
            b.backward_full(&dp, Some(&df), Some(&dxhat));
        }),
        value: Box::new(|b, batch| {
            let out_s = b.forward_full(&batch.x_s, true).unwrap();
            let seg = losses::seg_loss(&out_s.ge.p, &batch.y_s).unwrap();
            let out_t = b.forward_full(&batch.x_t, true).unwrap();
            let rec = losses::rec_loss(&batch.x_s, &out_s.xhat, &batch.x_t, &out_t.xhat).unwrap();
            let g_pred = losses::gen_adv_loss(&b.d_pred.forward(&out_t.ge.p, true)).unwrap();
            let g_feat = losses::gen_adv_loss(&b.d_feat.forward(&out_t.ge.f, true)).unwrap();
            seg + W.lambda_rec * rec + W.lambda_pred * g_pred + W.lambda_feat * g_feat
        }),
    });

    {
        let (p_s, f_s, p_t, f_t) = detached_pair(&micro_batch(21));
        let inputs = (p_s.clone(), f_s.clone(), p_t.clone(), f_t.clone());
        v.push(Case {
            name: "discriminator objective",
            prefixes: vec!["d_pred.", "d_feat."],
            analytic: Box::new(move |b, _| {
                let score_s = b.d_pred.forward(&p_s, true);
                b.d_pred
                    .backward(&losses::disc_loss_grad_source(&score_s).map(|g| g * W.lambda_pred));
                let score_t = b.d_pred.forward(&p_t, true);
                b.d_pred
                    .backward(&losses::disc_loss_grad_target(&score_t).map(|g| g * W.lambda_pred));
                let score_s = b.d_feat.forward(&f_s, true);
                b.d_feat
                    .backward(&losses::disc_loss_grad_source(&score_s).map(|g| g * W.lambda_feat));
                let score_t = b.d_feat.forward(&f_t, true);
                b.d_feat
                    .backward(&losses::disc_loss_grad_target(&score_t).map(|g| g * W.lambda_feat));
            }),
            value: Box::new(move |b, _| {
                let (p_s, f_s, p_t, f_t) = &inputs;
                let d_pred =
                    losses::disc_loss(&b.d_pred.forward(p_s, true), &b.d_pred.forward(p_t, true))
                        .unwrap();
                let d_feat =
                    losses::disc_loss(&b.d_feat.forward(f_s, true), &b.d_feat.forward(f_t, true))
                        .unwrap();
                losses::discriminator_objective(d_pred, d_feat, &W)
            }),
        });
    }

    v
}
