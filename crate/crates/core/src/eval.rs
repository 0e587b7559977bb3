//! Tiled full-section inference and the two overlap metrics (DSC, JAC),
//! reported with enough provenance to trace a number back to its run.
//!
//! Metrics aggregate confusion counts over every pixel of a stack by
//! default — the stricter, scale-weighted convention — with a per-section
//! variant for sensitivity checks. Both mask arguments are validated as
//! strictly binary so a probability map can never be scored by accident.

use crate::datapipe::ImageStack;
use crate::error::{Error, Result};
use crate::nets::NetworkBundle;
use crate::tensor::Tensor;

/// Where a metrics number came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_digest: String,
    pub checkpoint: String,
    pub seed: u64,
}

/// One evaluation result. `dsc` and `jac` are percentages computed from
/// the same confusion counts, so they always satisfy
/// `dsc = 200·jac / (100 + jac)` and `jac ≤ dsc`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub dsc: f64,
    pub jac: f64,
    pub threshold: f64,
    pub n_pixels: u64,
    pub provenance: Provenance,
}

/// Inference and scoring knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSettings {
    /// Foreground decision threshold on the predicted probability.
    pub threshold: f64,
    /// Square tile side for full-section inference.
    pub tile: usize,
    /// Pixels shared between neighboring tiles.
    pub overlap: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            threshold: 0.5,
            tile: 64,
            overlap: 32,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        check_threshold(self.threshold)?;
        if self.tile == 0 {
            return Err(Error::Config("tile must be positive".into()));
        }
        if self.overlap >= self.tile {
            return Err(Error::Config(format!(
                "overlap {} must be smaller than tile {}",
                self.overlap, self.tile
            )));
        }
        Ok(())
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    Ok(())
}

/// Strict foreground test: mask = (p > threshold). Probabilities are
/// assumed to lie in [0,1]; the threshold is validated.
pub fn binarize(p: &[f32], threshold: f64) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    let t = threshold as f32;
    Ok(p.iter().map(|&v| u8::from(v > t)).collect())
}

/// Global confusion counts (TP, FP, FN) of two equal-shape binary masks.
fn confusion(pred: &[u8], gt: &[u8], counts: &mut (u64, u64, u64)) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "mask lengths differ: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    for (name, mask) in [("prediction", pred), ("ground truth", gt)] {
        if let Some(i) = mask.iter().position(|&v| v > 1) {
            return Err(Error::Data(format!(
                "{name} mask is not binary: value {} at pixel {i}",
                mask[i]
            )));
        }
    }
    for (&p, &g) in pred.iter().zip(gt) {
        counts.0 += u64::from(p & g);
        counts.1 += u64::from(p & !g & 1);
        counts.2 += u64::from(!p & g & 1);
    }
    Ok(())
}

/// Percentages from confusion counts; two empty masks count as a perfect
/// match rather than 0/0.
fn metrics_from_counts((tp, fp, fn_): (u64, u64, u64)) -> (f64, f64) {
    if tp + fp + fn_ == 0 {
        return (100.0, 100.0);
    }
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    let dsc = 100.0 * 2.0 * tp / (2.0 * tp + fp + fn_);
    let jac = 100.0 * tp / (tp + fp + fn_);
    (dsc, jac)
}

/// Overlap scores of a predicted mask against ground truth, as
/// percentages: Dice 100·2TP/(2TP+FP+FN) and Jaccard 100·TP/(TP+FP+FN).
pub fn dice_jaccard(pred: &[u8], gt: &[u8]) -> Result<(f64, f64)> {
    let mut counts = (0, 0, 0);
    confusion(pred, gt, &mut counts)?;
    Ok(metrics_from_counts(counts))
}

/// Fold an index into [0, n) by mirroring at both edges without repeating
/// them (triangular wave of period 2n−2), so padding of any width is
/// defined even for tiles much larger than the section.
fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let j = i % period;
    if j < n {
        j
    } else {
        period - j
    }
}

/// Tile origins along one axis: step by `stride` until a tile reaches the
/// end of the section. The final tile may extend past it, into padding.
fn tile_origins(len: usize, tile: usize, stride: usize) -> Vec<usize> {
    let mut v = vec![0];
    while v.last().unwrap() + tile < len {
        v.push(v.last().unwrap() + stride);
    }
    v
}

/// Full-section segmentation probabilities from a window-limited network.
/// Each section is covered by overlapping tiles (reflectively padded at
/// the edges), every tile runs through the segmentation path in one batch,
/// and each pixel's probability is averaged over the tiles that cover it —
/// in fixed tile order, so the result does not depend on the parallelism
/// mode.
pub fn tiled_inference(
    bundle: &mut NetworkBundle<f32>,
    stack: &ImageStack,
    tile: usize,
    overlap: usize,
) -> Result<Vec<Vec<f32>>> {
    let grid = bundle.arch.min_divisor();
    if tile == 0 || tile % grid != 0 {
        return Err(Error::Config(format!(
            "tile {tile} is not divisible by the network grid {grid}"
        )));
    }
    if overlap >= tile {
        return Err(Error::Config(format!(
            "overlap {overlap} must be smaller than tile {tile}"
        )));
    }
    let stride = tile - overlap;
    let (_, h, w) = stack.axis_meta();
    let ys = tile_origins(h, tile, stride);
    let xs = tile_origins(w, tile, stride);
    let per_section = ys.len() * xs.len();

    let mut out = Vec::with_capacity(stack.depth());
    for s in 0..stack.depth() {
        let section = stack.section(s);
        let mut batch = Tensor::zeros(per_section, 1, tile, tile);
        for (i, &(y0, x0)) in cartesian(&ys, &xs).iter().enumerate() {
            let dst = batch.item_mut(i);
            for dy in 0..tile {
                let sy = reflect_index(y0 + dy, h);
                for dx in 0..tile {
                    dst[dy * tile + dx] = section[sy * w + reflect_index(x0 + dx, w)];
                }
            }
        }
        let p = bundle.forward_ge(&batch, false)?.p;
        let mut sum = vec![0.0f32; h * w];
        let mut cover = vec![0u32; h * w];
        for (i, &(y0, x0)) in cartesian(&ys, &xs).iter().enumerate() {
            let src = p.item(i);
            for dy in 0..tile.min(h.saturating_sub(y0)) {
                let row = (y0 + dy) * w;
                for dx in 0..tile.min(w.saturating_sub(x0)) {
                    sum[row + x0 + dx] += src[dy * tile + dx];
                    cover[row + x0 + dx] += 1;
                }
            }
        }
        debug_assert!(cover.iter().all(|&c| c > 0), "tiling left a pixel uncovered");
        out.push(
            sum.iter()
                .zip(&cover)
                .map(|(&v, &c)| v / c as f32)
                .collect(),
        );
    }
    Ok(out)
}

fn cartesian(ys: &[usize], xs: &[usize]) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(ys.len() * xs.len());
    for &y in ys {
        for &x in xs {
            v.push((y, x));
        }
    }
    v
}

/// Score precomputed probabilities against the stack's labels with global
/// confusion counts. Split out from `evaluate` so the aggregation path can
/// be exercised with known probabilities.
pub fn report_from_probs(
    probs: &[Vec<f32>],
    stack: &ImageStack,
    threshold: f64,
    provenance: Provenance,
) -> Result<MetricsReport> {
    if !stack.has_labels() {
        return Err(Error::Data("evaluation stack has no labels".into()));
    }
    if probs.len() != stack.depth() {
        return Err(Error::Shape(format!(
            "{} probability sections for a stack of depth {}",
            probs.len(),
            stack.depth()
        )));
    }
    let mut counts = (0, 0, 0);
    let mut n_pixels = 0u64;
    for (s, p) in probs.iter().enumerate() {
        let mask = binarize(p, threshold)?;
        let gt = stack.label(s).expect("labels checked above");
        confusion(&mask, gt, &mut counts)?;
        n_pixels += mask.len() as u64;
    }
    let (dsc, jac) = metrics_from_counts(counts);
    Ok(MetricsReport {
        dsc,
        jac,
        threshold,
        n_pixels,
        provenance,
    })
}

/// Tiled inference, thresholding, and global-count scoring in one call.
pub fn evaluate(
    bundle: &mut NetworkBundle<f32>,
    stack: &ImageStack,
    settings: &EvalSettings,
    provenance: Provenance,
) -> Result<MetricsReport> {
    settings.validate()?;
    if !stack.has_labels() {
        return Err(Error::Data("evaluation stack has no labels".into()));
    }
    let probs = tiled_inference(bundle, stack, settings.tile, settings.overlap)?;
    report_from_probs(&probs, stack, settings.threshold, provenance)
}

/// Sensitivity variant: one report per section, each from that section's
/// own confusion counts (and hence each satisfying the Dice–Jaccard
/// identity on its own).
pub fn evaluate_sections(
    bundle: &mut NetworkBundle<f32>,
    stack: &ImageStack,
    settings: &EvalSettings,
    provenance: Provenance,
) -> Result<Vec<MetricsReport>> {
    settings.validate()?;
    if !stack.has_labels() {
        return Err(Error::Data("evaluation stack has no labels".into()));
    }
    let probs = tiled_inference(bundle, stack, settings.tile, settings.overlap)?;
    (0..stack.depth())
        .map(|s| {
            let mask = binarize(&probs[s], settings.threshold)?;
            let gt = stack.label(s).expect("labels checked above");
            let mut counts = (0, 0, 0);
            confusion(&mask, gt, &mut counts)?;
            let (dsc, jac) = metrics_from_counts(counts);
            Ok(MetricsReport {
                dsc,
                jac,
                threshold: settings.threshold,
                n_pixels: mask.len() as u64,
                provenance: provenance.clone(),
            })
        })
        .collect()
}

/// Column layout of `metrics.csv`.
pub const METRICS_COLUMNS: [&str; 7] = [
    "run_id",
    "checkpoint",
    "split",
    "threshold",
    "dsc",
    "jac",
    "n_pixels",
];

/// One `metrics.csv` row (no trailing newline); the checkpoint column
/// comes from the report's provenance.
pub fn metrics_csv_row(run_id: &str, split: &str, r: &MetricsReport) -> String {
    format!(
        "{run_id},{},{split},{},{},{},{}",
        r.provenance.checkpoint, r.threshold, r.dsc, r.jac, r.n_pixels
    )
}
