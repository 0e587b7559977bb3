//! Training losses: segmentation cross-entropy, dual-domain
//! reconstruction, the discriminator losses, the inverted-label generator
//! losses, and the two composite objectives.
//!
//! Adversarial terms take raw logits and evaluate the log-sigmoid parts in
//! softplus form, so nothing here can produce log(0). Every loss has a
//! matching closed-form gradient helper; gradients are mean-scaled the
//! same way as the loss values.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{sigmoid, softplus, Scalar, Tensor};

/// Trade-off weights applied to the reconstruction and the two adversarial
/// terms, shared between the generator and discriminator objectives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_rec: f64,
    pub lambda_feat: f64,
    pub lambda_pred: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_rec: 1e-3,
            lambda_feat: 1e-3,
            lambda_pred: 1e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_rec", self.lambda_rec),
            ("lambda_feat", self.lambda_feat),
            ("lambda_pred", self.lambda_pred),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One iteration's loss record, in natural-log units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub seg: f64,
    pub rec: f64,
    pub d_pred_loss: f64,
    pub d_feat_loss: f64,
    pub g_pred_loss: f64,
    pub g_feat_loss: f64,
}

/// Probability clamp for the cross-entropy log terms.
pub const PROB_EPS: f64 = 1e-7;

fn check_shapes<S: Scalar>(name: &str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{name}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_finite<S: Scalar>(name: &str, t: &Tensor<S>) -> Result<()> {
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{name}: non-finite input value")));
    }
    Ok(())
}

fn clamp_prob<S: Scalar>(p: S) -> S {
    let lo = S::from_f64(PROB_EPS);
    let hi = S::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// Mean over all pixels of -[y ln p + (1-y) ln(1-p)], with p clamped to
/// [eps, 1-eps].
pub fn seg_loss<S: Scalar>(p: &Tensor<S>, y: &Tensor<S>) -> Result<S> {
    check_shapes("seg_loss", p, y)?;
    check_finite("seg_loss", p)?;
    let one = S::one();
    let mut acc = vec![S::zero(); p.numel()];
    for ((a, &pv), &yv) in acc.iter_mut().zip(p.iter()).zip(y.iter()) {
        let pv = clamp_prob(pv);
        *a = -(yv * pv.ln() + (one - yv) * (one - pv).ln());
    }
    Ok(par::sum_by(&acc, |&v| v) / S::from_f64(p.numel() as f64))
}

/// d seg_loss / d p, evaluated at the clamped probabilities.
pub fn seg_loss_grad<S: Scalar>(p: &Tensor<S>, y: &Tensor<S>) -> Tensor<S> {
    let inv_n = S::from_f64(1.0 / p.numel() as f64);
    let one = S::one();
    let mut g = p.clone();
    let py: Vec<(S, S)> = p.iter().zip(y.iter()).map(|(&a, &b)| (a, b)).collect();
    par::for_each_chunk_mut(g.data_mut(), 4096, |i, chunk| {
        for (k, gv) in chunk.iter_mut().enumerate() {
            let (pv, yv) = py[i * 4096 + k];
            let pv = clamp_prob(pv);
            *gv = (pv - yv) / (pv * (one - pv)) * inv_n;
        }
    });
    g
}

/// Mean squared error of the source pair plus that of the target pair.
pub fn rec_loss<S: Scalar>(
    x_s: &Tensor<S>,
    xhat_s: &Tensor<S>,
    x_t: &Tensor<S>,
    xhat_t: &Tensor<S>,
) -> Result<S> {
    check_shapes("rec_loss(source)", x_s, xhat_s)?;
    check_shapes("rec_loss(target)", x_t, xhat_t)?;
    Ok(mse(x_s, xhat_s) + mse(x_t, xhat_t))
}

fn mse<S: Scalar>(x: &Tensor<S>, xhat: &Tensor<S>) -> S {
    let sq: Vec<S> = x
        .iter()
        .zip(xhat.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .collect();
    par::sum_by(&sq, |&v| v) / S::from_f64(x.numel() as f64)
}

/// Gradient of one domain's mean-squared term w.r.t. the reconstruction.
pub fn rec_loss_grad_one<S: Scalar>(x: &Tensor<S>, xhat: &Tensor<S>) -> Tensor<S> {
    let scale = S::from_f64(2.0 / x.numel() as f64);
    let mut g = xhat.clone();
    let xv: Vec<S> = x.iter().copied().collect();
    par::for_each_chunk_mut(g.data_mut(), 4096, |i, chunk| {
        for (k, gv) in chunk.iter_mut().enumerate() {
            *gv = (*gv - xv[i * 4096 + k]) * scale;
        }
    });
    g
}

/// Discriminator loss -[mean ln sigma(score_s) + mean ln(1 - sigma(score_t))]
/// in softplus form; minimizing scores source high and target low.
pub fn disc_loss<S: Scalar>(score_s: &Tensor<S>, score_t: &Tensor<S>) -> Result<S> {
    check_finite("disc_loss(source)", score_s)?;
    check_finite("disc_loss(target)", score_t)?;
    let s = par::sum_by(score_s.data(), |&v| softplus(-v)) / S::from_f64(score_s.numel() as f64);
    let t = par::sum_by(score_t.data(), |&v| softplus(v)) / S::from_f64(score_t.numel() as f64);
    Ok(s + t)
}

/// d disc_loss / d score_s = -sigma(-s) / n.
pub fn disc_loss_grad_source<S: Scalar>(score_s: &Tensor<S>) -> Tensor<S> {
    let inv_n = S::from_f64(1.0 / score_s.numel() as f64);
    score_s.map(move |v| -sigmoid(-v) * inv_n)
}

/// d disc_loss / d score_t = sigma(s) / n.
pub fn disc_loss_grad_target<S: Scalar>(score_t: &Tensor<S>) -> Tensor<S> {
    let inv_n = S::from_f64(1.0 / score_t.numel() as f64);
    score_t.map(move |v| sigmoid(v) * inv_n)
}

/// Non-saturating generator loss -mean ln sigma(score_t): the target batch
/// is pushed toward the discriminator's source class (inverted labels).
pub fn gen_adv_loss<S: Scalar>(score_t: &Tensor<S>) -> Result<S> {
    check_finite("gen_adv_loss", score_t)?;
    Ok(par::sum_by(score_t.data(), |&v| softplus(-v)) / S::from_f64(score_t.numel() as f64))
}

/// d gen_adv_loss / d score_t = -sigma(-s) / n.
pub fn gen_adv_loss_grad<S: Scalar>(score_t: &Tensor<S>) -> Tensor<S> {
    let inv_n = S::from_f64(1.0 / score_t.numel() as f64);
    score_t.map(move |v| -sigmoid(-v) * inv_n)
}

/// Full generator objective: seg + lambda_rec*rec + lambda_feat*g_feat +
/// lambda_pred*g_pred. All signs are folded into the component losses, so
/// every term is minimized.
pub fn generator_objective(lv: &LossValues, w: &LossWeights) -> f64 {
    lv.seg + w.lambda_rec * lv.rec + w.lambda_feat * lv.g_feat_loss + w.lambda_pred * lv.g_pred_loss
}

/// Discriminator objective: lambda_feat*d_feat + lambda_pred*d_pred.
pub fn discriminator_objective(d_pred_loss: f64, d_feat_loss: f64, w: &LossWeights) -> f64 {
    w.lambda_feat * d_feat_loss + w.lambda_pred * d_pred_loss
}
