//! im2col-based convolution kernels.
//!
//! Transposed convolution reuses the same lowering: its forward pass is the
//! input-gradient of a convolution with identical weights and geometry, so the
//! pair is adjoint by construction.

use super::tensor::Real;
use crate::error::{Error, Result};

/// Spatial geometry of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn new(kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            kernel,
            stride,
            pad,
        }
    }

    /// Output extent of a convolution over an input extent.
    pub fn conv_out(&self, len: usize) -> Option<usize> {
        let padded = len + 2 * self.pad;
        if self.stride == 0 || padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Output extent of a transposed convolution over an input extent.
    pub fn deconv_out(&self, len: usize) -> Option<usize> {
        let full = (len.checked_sub(1)?) * self.stride + self.kernel;
        full.checked_sub(2 * self.pad).filter(|&v| v > 0)
    }
}

/// Lowers one C×H×W image into a (C·k·k) × (Ho·Wo) column matrix.
pub(crate) fn im2col<T: Real>(
    img: &[T],
    c: usize,
    h: usize,
    w: usize,
    g: ConvGeom,
    ho: usize,
    wo: usize,
    cols: &mut [T],
) {
    let k = g.kernel;
    let p = ho * wo;
    for ch in 0..c {
        let plane = &img[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let out = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let dst = &mut out[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto a C×H×W image (adjoint of im2col).
pub(crate) fn col2im<T: Real>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    g: ConvGeom,
    ho: usize,
    wo: usize,
    img: &mut [T],
) {
    let k = g.kernel;
    let p = ho * wo;
    for ch in 0..c {
        let plane = &mut img[ch * h * w..(ch + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst[ix as usize] = dst[ix as usize] + src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Shape bookkeeping shared by the forward and backward kernels.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvShape {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub ho: usize,
    pub wo: usize,
    pub geom: ConvGeom,
}

impl ConvShape {
    pub fn for_conv(input: &[usize], weight: &[usize], bias: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let op = "conv2d";
        let [n, c_in, h, w] = dims4(op, "input", input)?;
        let [c_out, wc_in, kh, kw] = dims4(op, "weight", weight)?;
        if wc_in != c_in {
            return Err(Error::shape(op, format!("input has C_in={c_in} but weight expects C_in={wc_in}")));
        }
        if kh != kw {
            return Err(Error::shape(op, format!("kernel must be square, got {kh}×{kw}")));
        }
        check_bias(op, bias, c_out)?;
        let geom = ConvGeom::new(kh, stride, pad);
        let (ho, wo) = match (geom.conv_out(h), geom.conv_out(w)) {
            (Some(ho), Some(wo)) if stride > 0 => (ho, wo),
            _ => {
                return Err(Error::shape(
                    op,
                    format!("input H×W={h}×{w} smaller than kernel {kh} with pad {pad} (stride {stride})"),
                ))
            }
        };
        Ok(Self { n, c_in, c_out, h, w, ho, wo, geom })
    }

    /// Transposed convolution; weight is C_in×C_out×k×k. In the returned
    /// shape, `h`/`w` are the (small) input extents and `ho`/`wo` the
    /// upsampled output extents.
    pub fn for_deconv(input: &[usize], weight: &[usize], bias: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let op = "deconv2d";
        let [n, c_in, h, w] = dims4(op, "input", input)?;
        let [wc_in, c_out, kh, kw] = dims4(op, "weight", weight)?;
        if wc_in != c_in {
            return Err(Error::shape(op, format!("input has C_in={c_in} but weight expects C_in={wc_in}")));
        }
        if kh != kw {
            return Err(Error::shape(op, format!("kernel must be square, got {kh}×{kw}")));
        }
        check_bias(op, bias, c_out)?;
        let geom = ConvGeom::new(kh, stride, pad);
        let (ho, wo) = match (geom.deconv_out(h), geom.deconv_out(w)) {
            (Some(ho), Some(wo)) if stride > 0 => (ho, wo),
            _ => {
                return Err(Error::shape(
                    op,
                    format!("input H×W={h}×{w} too small for kernel {kh}, stride {stride}, pad {pad}"),
                ))
            }
        };
        Ok(Self { n, c_in, c_out, h, w, ho, wo, geom })
    }

    pub fn col_rows_conv(&self) -> usize {
        self.c_in * self.geom.kernel * self.geom.kernel
    }

    pub fn col_rows_deconv(&self) -> usize {
        self.c_out * self.geom.kernel * self.geom.kernel
    }
}

fn dims4(op: &'static str, what: &str, shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(Error::shape(op, format!("{what} must be rank 4, got {shape:?}"))),
    }
}

fn check_bias(op: &'static str, bias: &[usize], c_out: usize) -> Result<()> {
    if bias != [c_out] {
        return Err(Error::shape(op, format!("bias must have shape [{c_out}], got {bias:?}")));
    }
    Ok(())
}

/// Forward convolution. Returns the output and the per-sample column
/// matrices (kept for the weight gradient).
pub(crate) fn conv_forward<T: Real>(s: &ConvShape, x: &[T], wt: &[T], b: &[T]) -> (Vec<T>, Vec<T>) {
    let r = s.col_rows_conv();
    let p = s.ho * s.wo;
    let in_sz = s.c_in * s.h * s.w;
    let out_sz = s.c_out * p;
    let mut cols = vec![T::zero(); s.n * r * p];
    let mut out = vec![T::zero(); s.n * out_sz];
    for i in 0..s.n {
        let col = &mut cols[i * r * p..(i + 1) * r * p];
        im2col(&x[i * in_sz..(i + 1) * in_sz], s.c_in, s.h, s.w, s.geom, s.ho, s.wo, col);
        let o = &mut out[i * out_sz..(i + 1) * out_sz];
        for co in 0..s.c_out {
            o[co * p..(co + 1) * p].iter_mut().for_each(|v| *v = b[co]);
        }
        T::gemm(s.c_out, r, p, wt, r as isize, 1, col, p as isize, 1, T::one(), o);
    }
    (out, cols)
}

/// Gradients of a convolution w.r.t. input, weight and bias.
/// Which gradients the caller will consume; skipped ones come back empty.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Needs {
    pub input: bool,
    pub weight: bool,
}

pub(crate) fn conv_backward<T: Real>(
    s: &ConvShape,
    wt: &[T],
    cols: &[T],
    dout: &[T],
    needs: Needs,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let r = s.col_rows_conv();
    let p = s.ho * s.wo;
    let in_sz = s.c_in * s.h * s.w;
    let out_sz = s.c_out * p;
    let mut dx = vec![T::zero(); if needs.input { s.n * in_sz } else { 0 }];
    let mut dw = vec![T::zero(); if needs.weight { s.c_out * r } else { 0 }];
    let mut db = vec![T::zero(); if needs.weight { s.c_out } else { 0 }];
    let mut dcols = vec![T::zero(); if needs.input { r * p } else { 0 }];
    for i in 0..s.n {
        let d = &dout[i * out_sz..(i + 1) * out_sz];
        if needs.weight {
            let col = &cols[i * r * p..(i + 1) * r * p];
            for co in 0..s.c_out {
                db[co] = db[co] + sum64(&d[co * p..(co + 1) * p]);
            }
            // dW += dOut · colsᵀ
            T::gemm(s.c_out, p, r, d, p as isize, 1, col, 1, p as isize, T::one(), &mut dw);
        }
        if needs.input {
            // dCols = Wᵀ · dOut
            T::gemm(r, s.c_out, p, wt, 1, r as isize, d, p as isize, 1, T::zero(), &mut dcols);
            col2im(&dcols, s.c_in, s.h, s.w, s.geom, s.ho, s.wo, &mut dx[i * in_sz..(i + 1) * in_sz]);
        }
    }
    (dx, dw, db)
}

/// Forward transposed convolution.
pub(crate) fn deconv_forward<T: Real>(s: &ConvShape, x: &[T], wt: &[T], b: &[T]) -> Vec<T> {
    let r = s.col_rows_deconv();
    let hw = s.h * s.w;
    let in_sz = s.c_in * hw;
    let out_sz = s.c_out * s.ho * s.wo;
    let mut cols = vec![T::zero(); r * hw];
    let mut out = vec![T::zero(); s.n * out_sz];
    for i in 0..s.n {
        // cols = Wᵀ · x, W viewed as C_in × (C_out·k·k)
        T::gemm(r, s.c_in, hw, wt, 1, r as isize, &x[i * in_sz..(i + 1) * in_sz], hw as isize, 1, T::zero(), &mut cols);
        let o = &mut out[i * out_sz..(i + 1) * out_sz];
        col2im(&cols, s.c_out, s.ho, s.wo, s.geom, s.h, s.w, o);
        let plane = s.ho * s.wo;
        for co in 0..s.c_out {
            o[co * plane..(co + 1) * plane].iter_mut().for_each(|v| *v = *v + b[co]);
        }
    }
    out
}

pub(crate) fn deconv_backward<T: Real>(
    s: &ConvShape,
    x: &[T],
    wt: &[T],
    dout: &[T],
    needs: Needs,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let r = s.col_rows_deconv();
    let hw = s.h * s.w;
    let in_sz = s.c_in * hw;
    let plane = s.ho * s.wo;
    let out_sz = s.c_out * plane;
    let mut dx = vec![T::zero(); if needs.input { s.n * in_sz } else { 0 }];
    let mut dw = vec![T::zero(); if needs.weight { s.c_in * r } else { 0 }];
    let mut db = vec![T::zero(); if needs.weight { s.c_out } else { 0 }];
    let mut dcols = vec![T::zero(); r * hw];
    for i in 0..s.n {
        let d = &dout[i * out_sz..(i + 1) * out_sz];
        im2col(d, s.c_out, s.ho, s.wo, s.geom, s.h, s.w, &mut dcols);
        if needs.input {
            // dX = W · dCols
            T::gemm(s.c_in, r, hw, wt, r as isize, 1, &dcols, hw as isize, 1, T::zero(), &mut dx[i * in_sz..(i + 1) * in_sz]);
        }
        if needs.weight {
            for co in 0..s.c_out {
                db[co] = db[co] + sum64(&d[co * plane..(co + 1) * plane]);
            }
            // dW += x · dColsᵀ
            let xi = &x[i * in_sz..(i + 1) * in_sz];
            T::gemm(s.c_in, hw, r, xi, hw as isize, 1, &dcols, 1, hw as isize, T::one(), &mut dw);
        }
    }
    (dx, dw, db)
}

pub(crate) fn sum64<T: Real>(xs: &[T]) -> T {
    T::of(xs.iter().map(|v| v.f64()).sum::<f64>())
}
