//! Random patch sampling for training batches.

use rand::Rng as _;

use super::dihedral;
use super::stack::{ImageStack, UnlabeledStack};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One training batch: labeled source patches and unlabeled target patches,
/// all N×1×patch×patch.
#[derive(Clone, Debug)]
pub struct TrainBatch {
    pub x_s: Tensor<f32>,
    pub y_s: Tensor<f32>,
    pub x_t: Tensor<f32>,
}

/// Draw `n` uniformly random square crops from each domain.
///
/// Draw order is fixed: first the n source (section, y, x) triples, then the
/// n target triples, then — only when `augment` is set — one dihedral
/// transform index per crop (source crops first). Labels receive the same
/// transform as their image. Keeping position draws ahead of transform
/// draws means augmented and unaugmented runs from the same generator state
/// visit identical crop windows.
pub fn sample_batch(
    source: &ImageStack,
    target: UnlabeledStack<'_>,
    patch: usize,
    n: usize,
    rng: &mut Rng,
    augment: bool,
) -> Result<TrainBatch> {
    if !source.has_labels() {
        return Err(Error::Data("source stack has no labels".into()));
    }
    for (name, h, w) in [
        ("source", source.height(), source.width()),
        ("target", target.height(), target.width()),
    ] {
        if patch > h || patch > w {
            return Err(Error::Config(format!(
                "patch {patch} exceeds {name} section size {h}x{w}"
            )));
        }
    }

    let draw =
        |rng: &mut Rng, depth: usize, h: usize, w: usize, n: usize| -> Vec<(usize, usize, usize)> {
            (0..n)
                .map(|_| {
                    let s = rng.random_range(0..depth);
                    let y = rng.random_range(0..=h - patch);
                    let x = rng.random_range(0..=w - patch);
                    (s, y, x)
                })
                .collect()
        };
    let src_pos = draw(rng, source.depth(), source.height(), source.width(), n);
    let tgt_pos = draw(rng, target.depth(), target.height(), target.width(), n);
    let (src_k, tgt_k): (Vec<u8>, Vec<u8>) = if augment {
        let a = (0..n)
            .map(|_| rng.random_range(0..dihedral::COUNT))
            .collect();
        let b = (0..n)
            .map(|_| rng.random_range(0..dihedral::COUNT))
            .collect();
        (a, b)
    } else {
        (vec![0; n], vec![0; n])
    };

    let crop_f32 = |plane: &[f32], w: usize, y0: usize, x0: usize| -> Vec<f32> {
        let mut out = Vec::with_capacity(patch * patch);
        for y in y0..y0 + patch {
            out.extend_from_slice(&plane[y * w + x0..y * w + x0 + patch]);
        }
        out
    };

    let mut x_s = Vec::with_capacity(n * patch * patch);
    let mut y_s = Vec::with_capacity(n * patch * patch);
    let mut x_t = Vec::with_capacity(n * patch * patch);
    for (i, &(s, y, x)) in src_pos.iter().enumerate() {
        let img = crop_f32(source.section(s), source.width(), y, x);
        let lab: Vec<f32> = {
            let l = source.label(s).unwrap();
            let mut out = Vec::with_capacity(patch * patch);
            for yy in y..y + patch {
                out.extend(
                    l[yy * source.width() + x..yy * source.width() + x + patch]
                        .iter()
                        .map(|&v| v as f32),
                );
            }
            out
        };
        x_s.extend(dihedral::apply(&img, patch, src_k[i]));
        y_s.extend(dihedral::apply(&lab, patch, src_k[i]));
    }
    for (i, &(s, y, x)) in tgt_pos.iter().enumerate() {
        let img = crop_f32(target.section(s), target.width(), y, x);
        x_t.extend(dihedral::apply(&img, patch, tgt_k[i]));
    }

    Ok(TrainBatch {
        x_s: Tensor::from_vec(n, 1, patch, patch, x_s),
        y_s: Tensor::from_vec(n, 1, patch, patch, y_s),
        x_t: Tensor::from_vec(n, 1, patch, patch, x_t),
    })
}
