use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{DType, Data, Scalar, Tensor};

/// Variance ridge shared by both layer norms.
pub const LN_EPS: f64 = 1e-5;

/// Standard layer norm over the last axis of a real tensor, with optional
/// per-channel `gamma` and `beta` (both `[C]`).
pub fn layer_norm<'g>(x: Var<'g>, gamma: Option<Var<'g>>, beta: Option<Var<'g>>) -> Result<Var<'g>> {
    let xv = x.value();
    let xs = xv.as_real().ok_or_else(|| Error::shape("layer_norm", "expects a real tensor"))?;
    let ch = *xv.shape().last().ok_or_else(|| Error::shape("layer_norm", "scalar input"))?;
    if ch == 0 {
        return Err(Error::shape("layer_norm", "empty channel axis"));
    }
    let gv = gamma.map(|g| g.value());
    let bv = beta.map(|b| b.value());
    for t in gv.iter().chain(bv.iter()) {
        if t.shape() != [ch] || t.dtype() != DType::Real {
            return Err(Error::shape("layer_norm", format!("affine parameters must be real [{ch}]")));
        }
    }
    let mut xhat = Vec::with_capacity(xs.len());
    let mut inv_std = Vec::with_capacity(xs.len() / ch);
    for row in xs.chunks_exact(ch) {
        let mean = row.iter().sum::<f64>() / ch as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ch as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(is);
        xhat.extend(row.iter().map(|v| (v - mean) * is));
    }
    let gam = gv.as_ref().map(|g| g.as_real().unwrap().to_vec());
    let bet = bv.as_ref().map(|b| b.as_real().unwrap().to_vec());
    let y: Vec<f64> = xhat
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = i % ch;
            v * gam.as_ref().map_or(1.0, |g| g[c]) + bet.as_ref().map_or(0.0, |b| b[c])
        })
        .collect();
    let out = Tensor::real(xv.shape(), y)?;
    let mut vars = vec![x];
    vars.extend(gamma);
    vars.extend(beta);
    let has_gamma = gamma.is_some();
    let has_beta = beta.is_some();
    Ok(x.graph().op(out, &vars, move || {
        Box::new(move |g, wants| {
            let g = f64::unwrap(g);
            let mut res = Vec::new();
            res.push(wants[0].then(|| {
                let mut gx = Vec::with_capacity(g.len());
                for (r, (grow, hrow)) in g.chunks_exact(ch).zip(xhat.chunks_exact(ch)).enumerate() {
                    let gh: Vec<f64> = grow
                        .iter()
                        .enumerate()
                        .map(|(c, v)| v * gam.as_ref().map_or(1.0, |gm| gm[c]))
                        .collect();
                    let m1 = gh.iter().sum::<f64>() / ch as f64;
                    let m2 = gh.iter().zip(hrow).map(|(a, b)| a * b).sum::<f64>() / ch as f64;
                    gx.extend(gh.iter().zip(hrow).map(|(a, h)| inv_std[r] * (a - m1 - h * m2)));
                }
                Data::Real(gx)
            }));
            let mut slot = 1;
            if has_gamma {
                res.push(wants[slot].then(|| {
                    let mut gg = vec![0.0; ch];
                    for (i, (gi, h)) in g.iter().zip(&xhat).enumerate() {
                        gg[i % ch] += gi * h;
                    }
                    Data::Real(gg)
                }));
                slot += 1;
            }
            if has_beta {
                res.push(wants[slot].then(|| {
                    let mut gb = vec![0.0; ch];
                    for (i, gi) in g.iter().enumerate() {
                        gb[i % ch] += gi;
                    }
                    Data::Real(gb)
                }));
            }
            res
        })
    }))
}

/// Value with partials with respect to the three covariance entries.
#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 3],
}

impl Dual {
    fn var(v: f64, slot: usize) -> Self {
        let mut d = [0.0; 3];
        d[slot] = 1.0;
        Self { v, d }
    }

    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        Self { v: r, d: self.d.map(|x| x / (2.0 * r)) }
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d: [0, 1, 2].map(|i| self.d[i] + o.d[i]) }
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d: [0, 1, 2].map(|i| self.d[i] - o.d[i]) }
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self { v: self.v * o.v, d: [0, 1, 2].map(|i| self.d[i] * o.v + self.v * o.d[i]) }
    }
}

impl Mul<f64> for Dual {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self { v: self.v * k, d: self.d.map(|x| x * k) }
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let v = self.v / o.v;
        Self { v, d: [0, 1, 2].map(|i| (self.d[i] - v * o.d[i]) / o.v) }
    }
}

/// Inverse square root `[w11, w12, w22]` of the symmetric matrix
/// `[[a, b], [b, c]]`, with partials in `(a, b, c)`.
fn whitening(a: f64, b: f64, c: f64) -> [Dual; 3] {
    let (a, b, c) = (Dual::var(a, 0), Dual::var(b, 1), Dual::var(c, 2));
    let s = (a * c - b * b).sqrt();
    let t = (a + c + s * 2.0).sqrt();
    let st = s * t;
    [(c + s) / st, (b * -1.0) / st, (a + s) / st]
}

/// Per-position statistics kept for the reverse pass.
struct Whitened {
    centered: Vec<Complex64>,
    normed: Vec<Complex64>,
    w: Vec<[Dual; 3]>,
}

fn whiten(x: &[Complex64], ch: usize) -> Whitened {
    let n = ch as f64;
    let mut centered = Vec::with_capacity(x.len());
    let mut normed = Vec::with_capacity(x.len());
    let mut w = Vec::with_capacity(x.len() / ch);
    for row in x.chunks_exact(ch) {
        let mean = row.iter().sum::<Complex64>() / n;
        let v: Vec<Complex64> = row.iter().map(|z| z - mean).collect();
        let a = v.iter().map(|z| z.re * z.re).sum::<f64>() / n + LN_EPS;
        let b = v.iter().map(|z| z.re * z.im).sum::<f64>() / n;
        let c = v.iter().map(|z| z.im * z.im).sum::<f64>() / n + LN_EPS;
        let wm = whitening(a, b, c);
        let [w11, w12, w22] = wm.map(|d| d.v);
        normed.extend(v.iter().map(|z| Complex64::new(w11 * z.re + w12 * z.im, w12 * z.re + w22 * z.im)));
        centered.extend(v);
        w.push(wm);
    }
    Whitened { centered, normed, w }
}

/// Complex layer norm over the last axis.
///
/// Each position is centred by its complex mean and whitened so that the
/// real and imaginary parts, pooled over channels, have identity covariance.
/// `gamma: [C, 4]` holds a real 2x2 matrix per channel acting on
/// `(Re, Im)` in row-major order; `beta: [C]` is a complex shift.
pub fn cv_layer_norm<'g>(x: Var<'g>, gamma: Option<Var<'g>>, beta: Option<Var<'g>>) -> Result<Var<'g>> {
    let xv = x.value();
    let xs = xv
        .as_complex()
        .ok_or_else(|| Error::shape("cv_layer_norm", "expects a complex tensor"))?;
    let ch = *xv.shape().last().ok_or_else(|| Error::shape("cv_layer_norm", "scalar input"))?;
    if ch < 2 {
        return Err(Error::invalid(format!(
            "cv_layer_norm needs at least 2 channels for a covariance, got {ch}"
        )));
    }
    let gv = gamma.map(|g| g.value());
    let bv = beta.map(|b| b.value());
    if let Some(g) = &gv {
        if g.shape() != [ch, 4] || g.dtype() != DType::Real {
            return Err(Error::shape("cv_layer_norm", format!("gamma must be real [{ch}, 4]")));
        }
    }
    if let Some(b) = &bv {
        if b.shape() != [ch] || b.dtype() != DType::Complex {
            return Err(Error::shape("cv_layer_norm", format!("beta must be complex [{ch}]")));
        }
    }
    let wh = whiten(xs, ch);
    let gam = gv.as_ref().map(|g| g.as_real().unwrap().to_vec());
    let bet = bv.as_ref().map(|b| b.as_complex().unwrap().to_vec());
    let y: Vec<Complex64> = wh
        .normed
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let c = i % ch;
            let mut o = match &gam {
                Some(g) => {
                    let m = &g[4 * c..4 * c + 4];
                    Complex64::new(m[0] * z.re + m[1] * z.im, m[2] * z.re + m[3] * z.im)
                }
                None => *z,
            };
            if let Some(b) = &bet {
                o += b[c];
            }
            o
        })
        .collect();
    let out = Tensor::complex(xv.shape(), y)?;
    let mut vars = vec![x];
    vars.extend(gamma);
    vars.extend(beta);
    let has_gamma = gamma.is_some();
    let has_beta = beta.is_some();
    Ok(x.graph().op(out, &vars, move || {
        Box::new(move |g, wants| {
            let Data::Complex(g) = g else { panic!("expected a complex gradient") };
            // gradient at the whitened output, before the affine map
            let gn: Vec<Complex64> = match &gam {
                Some(gm) => g
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let m = &gm[4 * (i % ch)..4 * (i % ch) + 4];
                        Complex64::new(m[0] * z.re + m[2] * z.im, m[1] * z.re + m[3] * z.im)
                    })
                    .collect(),
                None => g.clone(),
            };
            let mut res = Vec::new();
            res.push(wants[0].then(|| {
                let n = ch as f64;
                let mut gx = Vec::with_capacity(g.len());
                for (r, (grow, vrow)) in gn.chunks_exact(ch).zip(wh.centered.chunks_exact(ch)).enumerate() {
                    let [w11, w12, w22] = wh.w[r];
                    let (mut d11, mut d12, mut d22) = (0.0, 0.0, 0.0);
                    for (gz, v) in grow.iter().zip(vrow) {
                        d11 += gz.re * v.re;
                        d22 += gz.im * v.im;
                        d12 += gz.re * v.im + gz.im * v.re;
                    }
                    // dL/d(a, b, c)
                    let dabc: [f64; 3] =
                        [0, 1, 2].map(|k| d11 * w11.d[k] + d12 * w12.d[k] + d22 * w22.d[k]);
                    let gv: Vec<Complex64> = grow
                        .iter()
                        .zip(vrow)
                        .map(|(gz, v)| {
                            Complex64::new(
                                w11.v * gz.re + w12.v * gz.im + dabc[0] * 2.0 * v.re / n + dabc[1] * v.im / n,
                                w12.v * gz.re + w22.v * gz.im + dabc[1] * v.re / n + dabc[2] * 2.0 * v.im / n,
                            )
                        })
                        .collect();
                    let mean = gv.iter().sum::<Complex64>() / n;
                    gx.extend(gv.iter().map(|z| z - mean));
                }
                Data::Complex(gx)
            }));
            let mut slot = 1;
            if has_gamma {
                res.push(wants[slot].then(|| {
                    let mut gg = vec![0.0; 4 * ch];
                    for (i, (gz, z)) in g.iter().zip(&wh.normed).enumerate() {
                        let m = &mut gg[4 * (i % ch)..4 * (i % ch) + 4];
                        m[0] += gz.re * z.re;
                        m[1] += gz.re * z.im;
                        m[2] += gz.im * z.re;
                        m[3] += gz.im * z.im;
                    }
                    Data::Real(gg)
                }));
                slot += 1;
            }
            if has_beta {
                res.push(wants[slot].then(|| {
                    let mut gb = vec![Complex64::new(0.0, 0.0); ch];
                    for (i, gz) in g.iter().enumerate() {
                        gb[i % ch] += gz;
                    }
                    Data::Complex(gb)
                }));
            }
            res
        })
    }))
}
