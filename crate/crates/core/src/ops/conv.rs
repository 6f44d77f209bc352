use super::matmul::{conj_transpose, Matmul};
use super::{same_dtype, with_scalar};
use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Scalar, Tensor};

/// 1-D cross-correlation with complex (or real) multiply-accumulate.
///
/// `x: [c_in, m]`, `kernel: [c_out, c_in, k]`, `bias: [c_out]`; output
/// `[c_out, (m + 2 pad - k) / stride + 1]`.
pub fn conv1d<'g>(
    x: Var<'g>,
    kernel: Var<'g>,
    bias: Option<Var<'g>>,
    stride: usize,
    padding: usize,
) -> Result<Var<'g>> {
    let mut vars = vec![x, kernel];
    vars.extend(bias);
    same_dtype("conv1d", &vars)?;
    let (xv, kv) = (x.value(), kernel.value());
    let &[c_in, m] = xv.shape() else {
        return Err(Error::shape("conv1d", format!("input must be [c_in, m], got {:?}", xv.shape())));
    };
    let &[c_out, kc_in, k] = kv.shape() else {
        return Err(Error::shape("conv1d", format!("kernel must be 3-D, got {:?}", kv.shape())));
    };
    if kc_in != c_in {
        return Err(Error::shape("conv1d", format!("kernel expects {kc_in} channels, input has {c_in}")));
    }
    if stride == 0 || m + 2 * padding < k {
        return Err(Error::shape("conv1d", "kernel longer than padded input or zero stride"));
    }
    let bv = bias.map(|b| b.value());
    if let Some(b) = &bv {
        if b.shape() != [c_out] {
            return Err(Error::shape("conv1d", format!("bias {:?} vs {c_out} channels", b.shape())));
        }
    }
    let m_out = (m + 2 * padding - k) / stride + 1;
    let geo = Geometry { c: c_in, len: m, k, cols: m_out, stride, padding };

    let data = with_scalar!(xv.dtype(), S => {
        let cols = geo.im2col(S::unwrap(xv.data()));
        let mut y = S::matmul(c_out, c_in * k, m_out, S::unwrap(kv.data()), &cols);
        if let Some(b) = &bv {
            add_row_bias(&mut y, S::unwrap(b.data()), m_out);
        }
        S::wrap(y)
    });
    let out = Tensor::new(vec![c_out, m_out], data)?;
    Ok(x.graph().op(out, &vars, move || {
        Box::new(move |g, wants| {
            with_scalar!(g.dtype(), S => {
                let gy = S::unwrap(g);
                let gx = wants[0].then(|| {
                    let kh = conj_transpose(S::unwrap(kv.data()), c_out, c_in * k);
                    let gcols = S::matmul(c_in * k, c_out, m_out, &kh, gy);
                    S::wrap(geo.col2im(&gcols))
                });
                let gk = wants[1].then(|| {
                    let cols = geo.im2col(S::unwrap(xv.data()));
                    let ch = conj_transpose(&cols, c_in * k, m_out);
                    S::wrap(S::matmul(c_out, m_out, c_in * k, gy, &ch))
                });
                let mut res = vec![gx, gk];
                if bv.is_some() {
                    res.push(wants[2].then(|| S::wrap(row_sums(gy, m_out))));
                }
                res
            })
        })
    }))
}

/// Transposed 1-D convolution (fractionally strided), the adjoint of
/// [`conv1d`]'s input map.
///
/// `x: [c_in, m]`, `kernel: [c_in, c_out, k]`, `bias: [c_out]`; output
/// `[c_out, (m - 1) stride + k - 2 pad]`.
pub fn conv_transpose1d<'g>(
    x: Var<'g>,
    kernel: Var<'g>,
    bias: Option<Var<'g>>,
    stride: usize,
    padding: usize,
) -> Result<Var<'g>> {
    let mut vars = vec![x, kernel];
    vars.extend(bias);
    same_dtype("conv_transpose1d", &vars)?;
    let (xv, kv) = (x.value(), kernel.value());
    let &[c_in, m] = xv.shape() else {
        return Err(Error::shape("conv_transpose1d", format!("input must be [c_in, m], got {:?}", xv.shape())));
    };
    let &[kc_in, c_out, k] = kv.shape() else {
        return Err(Error::shape("conv_transpose1d", format!("kernel must be 3-D, got {:?}", kv.shape())));
    };
    if kc_in != c_in {
        return Err(Error::shape("conv_transpose1d", format!("kernel expects {kc_in} channels, input has {c_in}")));
    }
    if stride == 0 || m == 0 || (m - 1) * stride + k < 2 * padding + 1 {
        return Err(Error::shape("conv_transpose1d", "empty output"));
    }
    let bv = bias.map(|b| b.value());
    if let Some(b) = &bv {
        if b.shape() != [c_out] {
            return Err(Error::shape("conv_transpose1d", format!("bias {:?} vs {c_out} channels", b.shape())));
        }
    }
    let len_out = (m - 1) * stride + k - 2 * padding;
    // the output of a transposed conv is the input side of an ordinary conv
    let geo = Geometry { c: c_out, len: len_out, k, cols: m, stride, padding };

    let data = with_scalar!(xv.dtype(), S => {
        // kernel viewed as [c_in, c_out * k]; columns = K^T x
        let kt = super::matmul::transpose_copy(S::unwrap(kv.data()), c_in, c_out * k);
        let cols = S::matmul(c_out * k, c_in, m, &kt, S::unwrap(xv.data()));
        let mut y = geo.col2im(&cols);
        if let Some(b) = &bv {
            add_row_bias(&mut y, S::unwrap(b.data()), len_out);
        }
        S::wrap(y)
    });
    let out = Tensor::new(vec![c_out, len_out], data)?;
    Ok(x.graph().op(out, &vars, move || {
        Box::new(move |g, wants| {
            with_scalar!(g.dtype(), S => {
                let gy = S::unwrap(g);
                let gcols = geo.im2col(gy);
                let gx = wants[0].then(|| {
                    let kc: Vec<S> = S::unwrap(kv.data()).iter().map(|v| v.conj()).collect();
                    S::wrap(S::matmul(c_in, c_out * k, m, &kc, &gcols))
                });
                let gk = wants[1].then(|| {
                    // g_kernel[ci, r] = sum_i conj(x[ci, i]) gcols[r, i]
                    let gct = super::matmul::transpose_copy(&gcols, c_out * k, m);
                    let xc: Vec<S> = S::unwrap(xv.data()).iter().map(|v| v.conj()).collect();
                    S::wrap(S::matmul(c_in, m, c_out * k, &xc, &gct))
                });
                let mut res = vec![gx, gk];
                if bv.is_some() {
                    res.push(wants[2].then(|| S::wrap(row_sums(gy, len_out))));
                }
                res
            })
        })
    }))
}

/// Index bookkeeping shared by both convolutions: an input of `c` channels
/// and length `len`, read through windows of `k` taps at `cols` positions.
#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    len: usize,
    k: usize,
    cols: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn source(&self, col: usize, tap: usize) -> Option<usize> {
        let pos = (col * self.stride + tap) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < self.len).then_some(pos as usize)
    }

    /// `[c, len]` -> `[c * k, cols]`.
    fn im2col<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.c * self.k * self.cols];
        for ch in 0..self.c {
            for tap in 0..self.k {
                let row = (ch * self.k + tap) * self.cols;
                for col in 0..self.cols {
                    if let Some(p) = self.source(col, tap) {
                        out[row + col] = x[ch * self.len + p];
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Self::im2col`]: scatter-add back to `[c, len]`.
    fn col2im<S: Scalar>(&self, cols: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.c * self.len];
        for ch in 0..self.c {
            for tap in 0..self.k {
                let row = (ch * self.k + tap) * self.cols;
                for col in 0..self.cols {
                    if let Some(p) = self.source(col, tap) {
                        out[ch * self.len + p] += cols[row + col];
                    }
                }
            }
        }
        out
    }
}

fn add_row_bias<S: Scalar>(y: &mut [S], bias: &[S], width: usize) {
    for (row, b) in y.chunks_exact_mut(width).zip(bias) {
        row.iter_mut().for_each(|v| *v += *b);
    }
}

fn row_sums<S: Scalar>(g: &[S], width: usize) -> Vec<S> {
    g.chunks_exact(width)
        .map(|row| row.iter().fold(S::zero(), |a, b| a + *b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::tensor::DType;
    use num_complex::Complex64;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_c(n: usize, seed: u64) -> Vec<Complex64> {
        let mut r = crate::rng::seeded(seed);
        (0..n).map(|_| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let g = Graph::new();
        let x = rand_c(2 * 5, 1);
        let xv = g.constant(Tensor::complex(&[2, 5], x.clone()).unwrap());
        let mut kern = vec![c(0.0, 0.0); 4];
        kern[0] = c(1.0, 0.0);
        kern[3] = c(1.0, 0.0);
        let kv = g.leaf(Tensor::complex(&[2, 2, 1], kern).unwrap());
        let y = conv1d(xv, kv, None, 1, 0).unwrap().value();
        assert_eq!(y.as_complex().unwrap(), &x[..]);
    }

    #[test]
    fn imaginary_kernel_rotates() {
        let g = Graph::new();
        let x = rand_c(6, 2);
        let xv = g.constant(Tensor::complex(&[1, 6], x.clone()).unwrap());
        let kv = g.leaf(Tensor::complex(&[1, 1, 1], vec![c(0.0, 1.0)]).unwrap());
        let y = conv1d(xv, kv, None, 1, 0).unwrap().value();
        for (a, b) in y.as_complex().unwrap().iter().zip(&x) {
            assert_eq!(*a, b * c(0.0, 1.0));
        }
    }

    #[test]
    fn random_matches_nested_loop_oracle() {
        let (c_in, c_out, m, k, stride, pad) = (3, 2, 11, 3, 2, 1);
        let x = rand_c(c_in * m, 3);
        let kern = rand_c(c_out * c_in * k, 4);
        let bias = rand_c(c_out, 5);
        let g = Graph::new();
        let y = conv1d(
            g.constant(Tensor::complex(&[c_in, m], x.clone()).unwrap()),
            g.leaf(Tensor::complex(&[c_out, c_in, k], kern.clone()).unwrap()),
            Some(g.leaf(Tensor::complex(&[c_out], bias.clone()).unwrap())),
            stride,
            pad,
        )
        .unwrap()
        .value();
        let m_out = (m + 2 * pad - k) / stride + 1;
        assert_eq!(y.shape(), &[c_out, m_out]);
        let y = y.as_complex().unwrap();
        for o in 0..c_out {
            for t in 0..m_out {
                let mut acc = bias[o];
                for ci in 0..c_in {
                    for q in 0..k {
                        let pos = (t * stride + q) as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < m {
                            acc += kern[(o * c_in + ci) * k + q] * x[ci * m + pos as usize];
                        }
                    }
                }
                assert!((y[o * m_out + t] - acc).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn transposed_conv_matches_scatter_oracle() {
        let (c_in, c_out, m, k, stride, pad) = (2, 3, 5, 4, 2, 1);
        let mut r = crate::rng::seeded(8);
        let x: Vec<f64> = (0..c_in * m).map(|_| r.random::<f64>() - 0.5).collect();
        let kern: Vec<f64> = (0..c_in * c_out * k).map(|_| r.random::<f64>() - 0.5).collect();
        let g = Graph::new();
        let y = conv_transpose1d(
            g.constant(Tensor::real(&[c_in, m], x.clone()).unwrap()),
            g.leaf(Tensor::real(&[c_in, c_out, k], kern.clone()).unwrap()),
            None,
            stride,
            pad,
        )
        .unwrap()
        .value();
        let len = (m - 1) * stride + k - 2 * pad;
        let mut expect = vec![0.0; c_out * len];
        for ci in 0..c_in {
            for i in 0..m {
                for o in 0..c_out {
                    for q in 0..k {
                        let t = (i * stride + q) as isize - pad as isize;
                        if t >= 0 && (t as usize) < len {
                            expect[o * len + t as usize] += x[ci * m + i] * kern[(ci * c_out + o) * k + q];
                        }
                    }
                }
            }
        }
        for (a, b) in y.as_real().unwrap().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 8], DType::Complex));
        let k = g.leaf(Tensor::zeros(&[1, 3, 3], DType::Complex));
        assert!(conv1d(x, k, None, 1, 1).is_err());
    }
}
