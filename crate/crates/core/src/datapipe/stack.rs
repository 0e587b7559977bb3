//! Image stacks: ordered grayscale sections with optional binary labels.

use crate::error::{Error, Result};

/// A stack of 2-D grayscale sections, optionally with per-section binary
/// masks. All sections share one height and width; gray values live in
/// [0,1] once normalized.
#[derive(Clone, Debug)]
pub struct ImageStack {
    height: usize,
    width: usize,
    sections: Vec<Vec<f32>>,
    labels: Option<Vec<Vec<u8>>>,
}

impl ImageStack {
    pub fn new(
        height: usize,
        width: usize,
        sections: Vec<Vec<f32>>,
        labels: Option<Vec<Vec<u8>>>,
    ) -> Result<Self> {
        if sections.is_empty() {
            return Err(Error::Data("stack has no sections".into()));
        }
        for (i, s) in sections.iter().enumerate() {
            if s.len() != height * width {
                return Err(Error::Data(format!(
                    "section {i} has {} pixels, expected {height}x{width}",
                    s.len()
                )));
            }
        }
        if let Some(ls) = &labels {
            if ls.len() != sections.len() {
                return Err(Error::Data(format!(
                    "label count {} does not match section count {}",
                    ls.len(),
                    sections.len()
                )));
            }
            for (i, l) in ls.iter().enumerate() {
                if l.len() != height * width {
                    return Err(Error::Data(format!(
                        "label {i} has {} pixels, expected {height}x{width}",
                        l.len()
                    )));
                }
                if let Some(bad) = l.iter().find(|&&v| v > 1) {
                    return Err(Error::Data(format!(
                        "label {i} contains value {bad}, masks must be 0/1"
                    )));
                }
            }
        }
        Ok(ImageStack {
            height,
            width,
            sections,
            labels,
        })
    }

    /// (depth, height, width) in pixels.
    pub fn axis_meta(&self) -> (usize, usize, usize) {
        (self.sections.len(), self.height, self.width)
    }

    pub fn depth(&self) -> usize {
        self.sections.len()
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn section(&self, i: usize) -> &[f32] {
        &self.sections[i]
    }

    pub fn label(&self, i: usize) -> Option<&[u8]> {
        self.labels.as_ref().map(|ls| ls[i].as_slice())
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Copy of this stack with labels removed.
    pub fn without_labels(&self) -> ImageStack {
        ImageStack {
            height: self.height,
            width: self.width,
            sections: self.sections.clone(),
            labels: None,
        }
    }

    /// Label-stripped view for training-time target sampling.
    pub fn unlabeled(&self) -> UnlabeledStack<'_> {
        UnlabeledStack { stack: self }
    }

    /// Hex digest over dims, section values, and labels; bit-identical
    /// stacks share a digest.
    pub fn digest(&self) -> String {
        let mut h = crate::digest::Hasher::new();
        let (d, hh, ww) = self.axis_meta();
        h.update_u64(d as u64);
        h.update_u64(hh as u64);
        h.update_u64(ww as u64);
        for s in &self.sections {
            h.update_f32s(s);
        }
        match &self.labels {
            Some(ls) => {
                h.update_str("labels");
                for l in ls {
                    h.update(l);
                }
            }
            None => h.update_str("nolabels"),
        }
        h.finish()
    }
}

/// View of a stack that exposes images only. Target training data is passed
/// through this type so label access is ruled out by the signature, not by
/// convention.
#[derive(Clone, Copy, Debug)]
pub struct UnlabeledStack<'a> {
    stack: &'a ImageStack,
}

impl<'a> UnlabeledStack<'a> {
    pub fn axis_meta(&self) -> (usize, usize, usize) {
        self.stack.axis_meta()
    }
    pub fn depth(&self) -> usize {
        self.stack.depth()
    }
    pub fn height(&self) -> usize {
        self.stack.height()
    }
    pub fn width(&self) -> usize {
        self.stack.width()
    }
    pub fn section(&self, i: usize) -> &'a [f32] {
        self.stack.section(i)
    }
}

/// Min-max scale a section to [0,1]. Constant sections map to all zeros.
pub fn normalize(section: &[f32]) -> Result<Vec<f32>> {
    if let Some(bad) = section.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "section contains non-finite value {bad}"
        )));
    }
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &v in section {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        return Ok(vec![0.0; section.len()]);
    }
    let scale = 1.0 / (hi - lo);
    Ok(section.iter().map(|&v| (v - lo) * scale).collect())
}

/// Cut every section at column boundary floor(train_fraction * width):
/// columns [0, b) become the train stack, the rest the test stack. Labels
/// are cut identically.
pub fn split_target_x(stack: &ImageStack, train_fraction: f64) -> Result<(ImageStack, ImageStack)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let (depth, h, w) = stack.axis_meta();
    if w < 2 {
        return Err(Error::Data(format!("stack width {w} too small to split")));
    }
    let b = (train_fraction * w as f64).floor() as usize;
    if b == 0 || b == w {
        return Err(Error::Config(format!(
            "train_fraction {train_fraction} leaves an empty side at width {w}"
        )));
    }

    let cut = |plane: &[f32]| -> (Vec<f32>, Vec<f32>) {
        let mut left = Vec::with_capacity(h * b);
        let mut right = Vec::with_capacity(h * (w - b));
        for row in plane.chunks(w) {
            left.extend_from_slice(&row[..b]);
            right.extend_from_slice(&row[b..]);
        }
        (left, right)
    };
    let cut_u8 = |plane: &[u8]| -> (Vec<u8>, Vec<u8>) {
        let mut left = Vec::with_capacity(h * b);
        let mut right = Vec::with_capacity(h * (w - b));
        for row in plane.chunks(w) {
            left.extend_from_slice(&row[..b]);
            right.extend_from_slice(&row[b..]);
        }
        (left, right)
    };

    let mut train_secs = Vec::with_capacity(depth);
    let mut test_secs = Vec::with_capacity(depth);
    for i in 0..depth {
        let (l, r) = cut(stack.section(i));
        train_secs.push(l);
        test_secs.push(r);
    }
    let (train_labels, test_labels) = if stack.has_labels() {
        let mut tl = Vec::with_capacity(depth);
        let mut te = Vec::with_capacity(depth);
        for i in 0..depth {
            let (l, r) = cut_u8(stack.label(i).unwrap());
            tl.push(l);
            te.push(r);
        }
        (Some(tl), Some(te))
    } else {
        (None, None)
    };

    Ok((
        ImageStack::new(h, b, train_secs, train_labels)?,
        ImageStack::new(h, w - b, test_secs, test_labels)?,
    ))
}
