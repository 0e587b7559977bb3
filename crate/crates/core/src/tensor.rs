//! Minimal dense 4-D tensor (N, C, H, W) plus the convolution primitives
//! the networks are built from.
//!
//! Everything is generic over [`Scalar`] so the same forward/backward code
//! runs in f32 for training and in f64 for finite-difference gradient
//! checks. All reductions accumulate in a fixed order; results do not
//! depend on the number of worker threads.

use crate::par;

/// Floating-point element type for tensors: f32 or f64.
pub trait Scalar:
    num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
}

/// Numerically stable ln(1 + e^x).
pub fn softplus<S: Scalar>(x: S) -> S {
    let zero = S::zero();
    if x > zero {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    let one = S::one();
    if x >= S::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

/// Dense row-major tensor with shape (n, c, h, w).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![S::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length mismatch");
        Tensor { n, c, h, w, data }
    }

    pub fn full_like(&self, v: S) -> Self {
        Tensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: vec![v; self.data.len()],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }
    pub fn channels(&self) -> usize {
        self.c
    }
    pub fn height(&self) -> usize {
        self.h
    }
    pub fn width(&self) -> usize {
        self.w
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Flat slice of one batch item (all channels).
    pub fn item(&self, n: usize) -> &[S] {
        let stride = self.c * self.h * self.w;
        &self.data[n * stride..(n + 1) * stride]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [S] {
        let stride = self.c * self.h * self.w;
        &mut self.data[n * stride..(n + 1) * stride]
    }

    /// One (n, c) spatial plane.
    pub fn plane(&self, n: usize, c: usize) -> &[S] {
        let hw = self.h * self.w;
        let off = (n * self.c + c) * hw;
        &self.data[off..off + hw]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [S] {
        let hw = self.h * self.w;
        let off = (n * self.c + c) * hw;
        &mut self.data[off..off + hw]
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: S) {
        self.data[((n * self.c + c) * self.h + y) * self.w + x] = v;
    }

    pub fn map(&self, f: impl Fn(S) -> S + Send + Sync) -> Tensor<S> {
        let mut out = self.clone();
        par::for_each_chunk_mut(out.data_mut(), 4096, |_, c| {
            for v in c.iter_mut() {
                *v = f(*v);
            }
        });
        out
    }

    pub fn add_assign(&mut self, other: &Tensor<S>) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
    }

    /// Deterministic sum of all elements.
    pub fn sum(&self) -> S {
        par::sum_by(&self.data, |&x| x)
    }

    /// Deterministic mean of all elements.
    pub fn mean(&self) -> S {
        self.sum() / S::from_f64(self.numel() as f64)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.data.iter()
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
        assert_eq!(a.n, b.n);
        assert_eq!(a.h, b.h);
        assert_eq!(a.w, b.w);
        let mut out = Tensor::zeros(a.n, a.c + b.c, a.h, a.w);
        let hw = a.h * a.w;
        for n in 0..a.n {
            let dst = out.item_mut(n);
            dst[..a.c * hw].copy_from_slice(a.item(n));
            dst[a.c * hw..].copy_from_slice(b.item(n));
        }
        out
    }

    /// Split a channel-concatenated tensor back into its two parts.
    pub fn split_channels(&self, c_first: usize) -> (Tensor<S>, Tensor<S>) {
        assert!(c_first < self.c);
        let c_second = self.c - c_first;
        let mut a = Tensor::zeros(self.n, c_first, self.h, self.w);
        let mut b = Tensor::zeros(self.n, c_second, self.h, self.w);
        let hw = self.h * self.w;
        for n in 0..self.n {
            let src = self.item(n);
            a.item_mut(n).copy_from_slice(&src[..c_first * hw]);
            b.item_mut(n).copy_from_slice(&src[c_first * hw..]);
        }
        (a, b)
    }
}

/// out[m][j] += sum_k a[m][k] * b[k][j], row-major.
///
/// Each output row accumulates over k in a fixed order, so the result is
/// independent of how rows are distributed over threads.
pub fn gemm_acc<S: Scalar>(out: &mut [S], a: &[S], b: &[S], m: usize, k: usize, n: usize) {
    assert_eq!(out.len(), m * n);
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    // Process four output rows at a time so each B row is reused.
    const MR: usize = 4;
    par::for_each_chunk_mut(out, MR * n, |blk, out_rows| {
        let row0 = blk * MR;
        let rows = out_rows.len() / n;
        for kk in 0..k {
            let brow = &b[kk * n..kk * n + n];
            for r in 0..rows {
                let av = a[(row0 + r) * k + kk];
                let orow = &mut out_rows[r * n..(r + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                    *o = *o + av * bv;
                }
            }
        }
    });
}

/// out[m][j] += sum_k a[m][k] * b[j][k] (B used transposed).
///
/// Rows of `out` pair a row of A with a row of B, so the inner loop is a
/// contiguous dot product.
pub fn gemm_acc_abt<S: Scalar>(out: &mut [S], a: &[S], b: &[S], m: usize, n: usize, k: usize) {
    assert_eq!(out.len(), m * n);
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    par::for_each_chunk_mut(out, n, |i, orow| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for (&av, &bv) in arow.iter().zip(brow.iter()) {
                acc = acc + av * bv;
            }
            *o = *o + acc;
        }
    });
}

/// out[i][j] += sum_r a[r][i] * b[r][j] (A used transposed).
///
/// Accumulates over A/B rows in index order for every output row, so the
/// result is independent of the thread count.
pub fn gemm_acc_atb<S: Scalar>(out: &mut [S], a: &[S], b: &[S], m: usize, k: usize, n: usize) {
    assert_eq!(out.len(), m * n);
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    par::for_each_chunk_mut(out, n, |i, orow| {
        for r in 0..k {
            let av = a[r * m + i];
            let brow = &b[r * n..(r + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + av * bv;
            }
        }
    });
}

/// Unfold one batch item into columns: cols[c*kh*kw + ki][oy*wo + ox].
///
/// Out-of-bounds taps read zero (zero padding).
pub fn im2col<S: Scalar>(
    x: &Tensor<S>,
    item: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    cols: &mut [S],
) -> (usize, usize) {
    let (_, c, h, w) = x.shape();
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let npix = ho * wo;
    assert_eq!(cols.len(), c * kh * kw * npix);
    let src = x.item(item);
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[((ci * kh + ky) * kw + kx) * npix..][..npix];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let orow = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        for v in orow.iter_mut() {
                            *v = S::zero();
                        }
                        continue;
                    }
                    let iy = iy as usize;
                    for (ox, v) in orow.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            S::zero()
                        } else {
                            plane[iy * w + ix as usize]
                        };
                    }
                }
            }
        }
    }
    (ho, wo)
}

/// Scatter-add column gradients back onto one batch item of `dx`.
pub fn col2im_acc<S: Scalar>(
    cols: &[S],
    dx: &mut Tensor<S>,
    item: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) {
    let (_, c, h, w) = dx.shape();
    let npix = ho * wo;
    assert_eq!(cols.len(), c * kh * kw * npix);
    let dst = dx.item_mut(item);
    for ci in 0..c {
        let plane = &mut dst[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &cols[((ci * kh + ky) * kw + kx) * npix..][..npix];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let iy = iy as usize;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        plane[iy * w + ix as usize] =
                            plane[iy * w + ix as usize] + row[oy * wo + ox];
                    }
                }
            }
        }
    }
}
