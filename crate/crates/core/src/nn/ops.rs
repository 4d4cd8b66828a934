//! Forward and backward kernels. Convolutions lower to im2col + GEMM per
//! sample; per-sample results are reduced in sample order, so outputs do
//! not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::real::matmul;
use super::{Real, Tensor};

/// Geometry of a patch extraction: an image of `channels × img_h × img_w`
/// sampled on a `grid_h × grid_w` grid of `k × k` windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Patch {
    pub channels: usize,
    pub img_h: usize,
    pub img_w: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Patch {
    pub fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    pub fn cols(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn img_len(&self) -> usize {
        self.channels * self.img_h * self.img_w
    }
}

/// Grid positions `o` in `0..out_len` with `o*stride + offset - pad` inside `0..in_len`.
#[inline]
fn valid_range(offset: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > offset {
        (pad - offset).div_ceil(stride)
    } else {
        0
    };
    let reach = in_len + pad;
    let hi = if reach > offset {
        ((reach - offset - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Patch matrix of `img`: row (c, ky, kx), column (oy, ox).
pub(crate) fn im2col<T: Real>(img: &[T], p: &Patch) -> Vec<T> {
    let mut col = Vec::with_capacity(p.rows() * p.cols());
    let zero = T::zero();
    for c in 0..p.channels {
        for ky in 0..p.k {
            let (y_lo, y_hi) = valid_range(ky, p.pad, p.stride, p.img_h, p.grid_h);
            for kx in 0..p.k {
                let (x_lo, x_hi) = valid_range(kx, p.pad, p.stride, p.img_w, p.grid_w);
                for oy in 0..p.grid_h {
                    if oy < y_lo || oy >= y_hi || x_lo >= x_hi {
                        col.resize(col.len() + p.grid_w, zero);
                        continue;
                    }
                    let iy = oy * p.stride + ky - p.pad;
                    let src = &img[(c * p.img_h + iy) * p.img_w..][..p.img_w];
                    col.resize(col.len() + x_lo, zero);
                    let start = x_lo * p.stride + kx - p.pad;
                    if p.stride == 1 {
                        col.extend_from_slice(&src[start..start + (x_hi - x_lo)]);
                    } else {
                        col.extend(src[start..].iter().step_by(p.stride).take(x_hi - x_lo));
                    }
                    col.resize(col.len() + (p.grid_w - x_hi), zero);
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into `img`.
pub(crate) fn col2im<T: Real>(col: &[T], p: &Patch, img: &mut [T]) {
    let gw = p.grid_w;
    let ncols = p.cols();
    for c in 0..p.channels {
        for ky in 0..p.k {
            let (y_lo, y_hi) = valid_range(ky, p.pad, p.stride, p.img_h, p.grid_h);
            for kx in 0..p.k {
                let (x_lo, x_hi) = valid_range(kx, p.pad, p.stride, p.img_w, p.grid_w);
                let row = &col[((c * p.k + ky) * p.k + kx) * ncols..][..ncols];
                for oy in y_lo..y_hi {
                    let iy = oy * p.stride + ky - p.pad;
                    let dst = &mut img[(c * p.img_h + iy) * p.img_w..][..p.img_w];
                    let src = &row[oy * gw + x_lo..oy * gw + x_hi];
                    let Some(first) = (x_lo * p.stride + kx).checked_sub(p.pad) else { continue };
                    if src.is_empty() {
                        continue;
                    }
                    if p.stride == 1 {
                        for (d, s) in dst[first..first + src.len()].iter_mut().zip(src) {
                            *d += *s;
                        }
                    } else {
                        for (d, s) in dst[first..].iter_mut().step_by(p.stride).zip(src) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
}

fn per_sample<R: Send>(batch: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    if batch <= 1 || rayon::current_num_threads() <= 1 {
        (0..batch).map(f).collect()
    } else {
        (0..batch).into_par_iter().map(f).collect()
    }
}

fn concat<T: Real>(parts: impl IntoIterator<Item = Vec<T>>) -> Vec<T> {
    let mut out = Vec::new();
    for part in parts {
        out.extend_from_slice(&part);
    }
    out
}

fn sum_in_order<T: Real>(parts: Vec<Vec<T>>, len: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); len];
    for part in parts {
        for (a, b) in acc.iter_mut().zip(part) {
            *a += b;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub batch: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub patch: Patch,
}

pub(crate) fn conv2d_shape<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, stride: usize, pad: usize) -> Result<ConvShape> {
    let (b, c, h, w) = input.dims4()?;
    let (o, i, kh, kw) = kernel.dims4()?;
    if i != c {
        return Err(Error::Shape(format!("conv2d: input has {c} channels, kernel expects {i}")));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(Error::Shape(format!("conv2d: kernel must be square with odd size, got {kh}x{kw}")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv2d: stride must be positive".into()));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(Error::Shape(format!("conv2d: {h}x{w} input with pad {pad} is smaller than the {kh}x{kw} kernel")));
    }
    let grid_h = (h + 2 * pad - kh) / stride + 1;
    let grid_w = (w + 2 * pad - kw) / stride + 1;
    Ok(ConvShape {
        batch: b,
        in_c: c,
        out_c: o,
        patch: Patch {
            channels: c,
            img_h: h,
            img_w: w,
            grid_h,
            grid_w,
            k: kh,
            stride,
            pad,
        },
    })
}

/// Returns the output and the per-sample im2col buffers (needed for the
/// kernel gradient).
pub(crate) fn conv2d_forward<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, s: &ConvShape) -> (Tensor<T>, Vec<Vec<T>>) {
    let p = &s.patch;
    let (rows, cols) = (p.rows(), p.cols());
    let results = per_sample(s.batch, |b| {
        let img = &input.data()[b * p.img_len()..][..p.img_len()];
        let col = im2col(img, p);
        let mut out = vec![T::zero(); s.out_c * cols];
        matmul(s.out_c, rows, cols, kernel.data(), false, &col, false, T::zero(), &mut out);
        (out, col)
    });
    let mut data = Vec::with_capacity(s.batch * s.out_c * cols);
    let mut cols_cache = Vec::with_capacity(s.batch);
    for (out, col) in results {
        data.extend_from_slice(&out);
        cols_cache.push(col);
    }
    let out = Tensor::new(vec![s.batch, s.out_c, p.grid_h, p.grid_w], data).expect("conv2d output shape");
    (out, cols_cache)
}

/// Gradients of conv2d w.r.t. input (if requested) and kernel.
pub(crate) fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    kernel: &Tensor<T>,
    cols: &[Vec<T>],
    s: &ConvShape,
    need_input: bool,
    need_kernel: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let p = &s.patch;
    let (rows, ncols) = (p.rows(), p.cols());
    let parts = per_sample(s.batch, |b| {
        let g = &grad_out.data()[b * s.out_c * ncols..][..s.out_c * ncols];
        let dk = need_kernel.then(|| {
            let mut dk = vec![T::zero(); s.out_c * rows];
            matmul(s.out_c, ncols, rows, g, false, &cols[b], true, T::zero(), &mut dk);
            dk
        });
        let dx = need_input.then(|| {
            let mut dcol = vec![T::zero(); rows * ncols];
            matmul(rows, s.out_c, ncols, kernel.data(), true, g, false, T::zero(), &mut dcol);
            let mut dx = vec![T::zero(); p.img_len()];
            col2im(&dcol, p, &mut dx);
            dx
        });
        (dx, dk)
    });
    let (dxs, dks): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let dx = need_input.then(|| {
        Tensor::new(vec![s.batch, s.in_c, p.img_h, p.img_w], concat(dxs.into_iter().flatten())).expect("conv2d input grad shape")
    });
    let dk = need_kernel.then(|| {
        let data = sum_in_order(dks.into_iter().flatten().collect(), s.out_c * rows);
        Tensor::new(kernel.shape().to_vec(), data).expect("conv2d kernel grad shape")
    });
    (dx, dk)
}

/// Transposed convolution is the adjoint of a conv2d whose kernel is
/// `kernel` (shape in × out × K × K) run from the output grid back to the
/// input grid. `patch` describes that conv2d: image = transposed output.
pub(crate) fn conv_transpose2d_shape<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
    out_hw: Option<(usize, usize)>,
) -> Result<ConvShape> {
    let (b, c, h, w) = input.dims4()?;
    let (ci, co, kh, kw) = kernel.dims4()?;
    if ci != c {
        return Err(Error::Shape(format!("conv_transpose2d: input has {c} channels, kernel expects {ci}")));
    }
    if kh != kw {
        return Err(Error::Shape(format!("conv_transpose2d: kernel must be square, got {kh}x{kw}")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv_transpose2d: stride must be positive".into()));
    }
    let natural = |len: usize| ((len - 1) * stride + kh).checked_sub(2 * pad).filter(|&v| v > 0);
    let (oh, ow) = match out_hw {
        Some(hw) => hw,
        None => match (natural(h), natural(w)) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => return Err(Error::Shape("conv_transpose2d: output size is not positive".into())),
        },
    };
    if oh == 0 || ow == 0 {
        return Err(Error::Shape("conv_transpose2d: output size is not positive".into()));
    }
    Ok(ConvShape {
        batch: b,
        in_c: c,
        out_c: co,
        patch: Patch {
            channels: co,
            img_h: oh,
            img_w: ow,
            grid_h: h,
            grid_w: w,
            k: kh,
            stride,
            pad,
        },
    })
}

pub(crate) fn conv_transpose2d_forward<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, s: &ConvShape) -> Tensor<T> {
    let p = &s.patch;
    let (rows, ncols) = (p.rows(), p.cols());
    let outs = per_sample(s.batch, |b| {
        let x = &input.data()[b * s.in_c * ncols..][..s.in_c * ncols];
        let mut col = vec![T::zero(); rows * ncols];
        matmul(rows, s.in_c, ncols, kernel.data(), true, x, false, T::zero(), &mut col);
        let mut out = vec![T::zero(); p.img_len()];
        col2im(&col, p, &mut out);
        out
    });
    Tensor::new(vec![s.batch, s.out_c, p.img_h, p.img_w], concat(outs)).expect("conv_transpose2d output shape")
}

pub(crate) fn conv_transpose2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    s: &ConvShape,
    need_input: bool,
    need_kernel: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let p = &s.patch;
    let (rows, ncols) = (p.rows(), p.cols());
    let parts = per_sample(s.batch, |b| {
        let g = &grad_out.data()[b * p.img_len()..][..p.img_len()];
        let gcol = im2col(g, p);
        let dx = need_input.then(|| {
            let mut dx = vec![T::zero(); s.in_c * ncols];
            matmul(s.in_c, rows, ncols, kernel.data(), false, &gcol, false, T::zero(), &mut dx);
            dx
        });
        let dk = need_kernel.then(|| {
            let x = &input.data()[b * s.in_c * ncols..][..s.in_c * ncols];
            let mut dk = vec![T::zero(); s.in_c * rows];
            matmul(s.in_c, ncols, rows, x, false, &gcol, true, T::zero(), &mut dk);
            dk
        });
        (dx, dk)
    });
    let (dxs, dks): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let dx = need_input.then(|| {
        Tensor::new(input.shape().to_vec(), concat(dxs.into_iter().flatten())).expect("conv_transpose2d input grad shape")
    });
    let dk = need_kernel.then(|| {
        let data = sum_in_order(dks.into_iter().flatten().collect(), s.in_c * rows);
        Tensor::new(kernel.shape().to_vec(), data).expect("conv_transpose2d kernel grad shape")
    });
    (dx, dk)
}

/// 2-D convolution with zero padding. Input is B×C×H×W, kernel O×C×K×K.
pub fn conv2d<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let s = conv2d_shape(input, kernel, stride, pad)?;
    Ok(conv2d_forward(input, kernel, &s).0)
}

/// Transposed convolution. Input is B×C×H×W, kernel C×O×K×K; output side
/// is `(H−1)·stride − 2·pad + K`.
pub fn conv_transpose2d<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let s = conv_transpose2d_shape(input, kernel, stride, pad, None)?;
    Ok(conv_transpose2d_forward(input, kernel, &s))
}

/// Same as [`conv_transpose2d`] with an explicit output size; contributions
/// falling outside it are dropped.
pub fn conv_transpose2d_sized<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
    out_hw: (usize, usize),
) -> Result<Tensor<T>> {
    let s = conv_transpose2d_shape(input, kernel, stride, pad, Some(out_hw))?;
    Ok(conv_transpose2d_forward(input, kernel, &s))
}

pub(crate) fn dense_check<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (b, f) = input.dims2()?;
    let (wf, g) = weights.dims2()?;
    if wf != f || bias.shape() != [g] {
        return Err(Error::Shape(format!(
            "dense: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    Ok((b, f, g))
}

/// Affine map `input · weights + bias` for B×F input and F×G weights.
pub fn dense<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, f, g) = dense_check(input, weights, bias)?;
    let mut out = Vec::with_capacity(b * g);
    for _ in 0..b {
        out.extend_from_slice(bias.data());
    }
    matmul(b, f, g, input.data(), false, weights.data(), false, T::one(), &mut out);
    Tensor::new(vec![b, g], out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    /// Leaky ReLU with the usual GAN slope of 0.2.
    pub const LEAKY: Activation = Activation::LeakyRelu(0.2);

    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu(a) => {
                if x >= T::zero() {
                    x
                } else {
                    x * T::of(a)
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative given input `x` and output `y`.
    #[inline]
    pub fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(a) => {
                if x >= T::zero() {
                    T::one()
                } else {
                    T::of(a)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

pub fn activation<T: Real>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    x.map(|v| kind.apply(v))
}

/// Checks that the last two dims are square and returns (leading, side).
pub(crate) fn square_tail<T: Real>(t: &Tensor<T>) -> Result<(usize, usize)> {
    let shape = t.shape();
    if shape.len() < 2 || shape[shape.len() - 1] != shape[shape.len() - 2] {
        return Err(Error::Shape(format!("expected square trailing dims, got {shape:?}")));
    }
    let side = shape[shape.len() - 1];
    Ok((t.numel() / (side * side).max(1), side))
}

/// (X + Xᵀ)/2 on each trailing square matrix.
pub fn symmetrize_tensor<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (lead, n) = square_tail(x)?;
    let half = T::of(0.5);
    let mut out = x.clone();
    let src = x.data();
    let dst = out.data_mut();
    for m in 0..lead {
        let base = m * n * n;
        for i in 0..n {
            for j in 0..n {
                dst[base + i * n + j] = (src[base + i * n + j] + src[base + j * n + i]) * half;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct nested-loop convolution.
    fn conv_reference(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (b, c, h, w) = x.dims4().unwrap();
        let (o, _, kk, _) = k.dims4().unwrap();
        let oh = (h + 2 * pad - kk) / stride + 1;
        let ow = (w + 2 * pad - kk) / stride + 1;
        let mut out = Tensor::zeros(&[b, o, oh, ow]);
        for bi in 0..b {
            for oi in 0..o {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for ky in 0..kk {
                                for kx in 0..kk {
                                    let iy = (y * stride + ky) as isize - pad as isize;
                                    let ix = (xx * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += x.data()[((bi * c + ci) * h + iy as usize) * w + ix as usize]
                                        * k.data()[((oi * c + ci) * kk + ky) * kk + kx];
                                }
                            }
                        }
                        out.data_mut()[((bi * o + oi) * oh + y) * ow + xx] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 1, 5, 5], &mut rng);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
        assert_eq!(conv_transpose2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn all_ones_overlap_counts() {
        let x = Tensor::<f64>::full(&[1, 1, 5, 5], 1.0);
        let k = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 5, 5]);
        assert_eq!(y.data()[2 * 5 + 2], 9.0);
        assert_eq!(y.data()[0], 4.0);
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(stride, pad) in &[(1, 1), (2, 1), (1, 0), (2, 0)] {
            let x = random(&[2, 3, 8, 8], &mut rng);
            let k = random(&[4, 3, 3, 3], &mut rng);
            let got = conv2d(&x, &k, stride, pad).unwrap();
            let want = conv_reference(&x, &k, stride, pad);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn transposed_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(k, stride, pad) in &[(3, 1, 1), (3, 2, 1), (4, 2, 1), (5, 2, 2)] {
            // conv2d maps a (4 ch) -> b (3 ch); transposed uses kernel 3->4 stored as O×I
            let a = random(&[2, 4, 9, 9], &mut rng);
            let kernel = random(&[3, 4, k, k], &mut rng);
            let shape = conv2d_shape_unchecked(&a, &kernel, stride, pad);
            let b = random(&[2, 3, shape.patch.grid_h, shape.patch.grid_w], &mut rng);
            let lhs = conv2d_forward(&a, &kernel, &shape).0.dot(&b);
            let rhs = conv_transpose2d_sized(&b, &kernel, stride, pad, (9, 9)).unwrap().dot(&a);
            assert!((lhs - rhs).abs() <= 1e-5 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    fn conv2d_shape_unchecked(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> ConvShape {
        let (b, c, h, w) = x.dims4().unwrap();
        let (o, _, kk, _) = k.dims4().unwrap();
        ConvShape {
            batch: b,
            in_c: c,
            out_c: o,
            patch: Patch {
                channels: c,
                img_h: h,
                img_w: w,
                grid_h: (h + 2 * pad - kk) / stride + 1,
                grid_w: (w + 2 * pad - kk) / stride + 1,
                k: kk,
                stride,
                pad,
            },
        }
    }

    #[test]
    fn transposed_output_size() {
        let x = Tensor::<f32>::zeros(&[1, 2, 8, 8]);
        let k = Tensor::zeros(&[2, 3, 4, 4]);
        assert_eq!(conv_transpose2d(&x, &k, 2, 1).unwrap().shape(), &[1, 3, 16, 16]);
    }

    #[test]
    fn conv_errors() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        assert!(conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), 1, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 7, 7]), 1, 0).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 2, 2]), 1, 0).is_err());
        assert!(conv_transpose2d(&x, &Tensor::zeros(&[3, 2, 4, 4]), 2, 1).is_err());
    }

    #[test]
    fn dense_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[3, 4], &mut rng);
        let eye = Tensor::from_fn(&[4, 4], |k| if k / 4 == k % 4 { 1.0 } else { 0.0 });
        assert_eq!(dense(&x, &eye, &Tensor::zeros(&[4])).unwrap(), x);
        let bias = Tensor::new(vec![2], vec![0.5, -1.5]).unwrap();
        let y = dense(&x, &Tensor::zeros(&[4, 2]), &bias).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, bias.data());
        }
        let w = random(&[4, 2], &mut rng);
        let y = dense(&x, &w, &bias).unwrap();
        for r in 0..3 {
            for g in 0..2 {
                let want: f64 = bias.data()[g] + (0..4).map(|f| x.data()[r * 4 + f] * w.data()[f * 2 + g]).sum::<f64>();
                assert!((y.data()[r * 2 + g] - want).abs() < 1e-6);
            }
        }
        assert!(dense(&x, &Tensor::zeros(&[3, 2]), &bias).is_err());
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Relu.apply(-2.0_f64), 0.0);
        assert_eq!(Activation::Relu.apply(3.0_f64), 3.0);
        assert_eq!(Activation::Sigmoid.apply(0.0_f64), 0.5);
        assert!((Activation::LEAKY.apply(-1.0_f64) + 0.2).abs() < 1e-15);
        for x in [-30.0_f64, -3.0, 0.1, 4.0, 30.0] {
            let t = Activation::Tanh.apply(x);
            assert!(t > -1.0 && t < 1.0 || x.abs() > 15.0);
            let s = Activation::Sigmoid.apply(x);
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn symmetrize_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&[3, 1, 10, 10], &mut rng);
        let y = symmetrize_tensor(&x).unwrap();
        for m in 0..3 {
            for i in 0..10 {
                for j in 0..10 {
                    assert_eq!(y.data()[m * 100 + i * 10 + j], y.data()[m * 100 + j * 10 + i]);
                }
            }
        }
    }
}
