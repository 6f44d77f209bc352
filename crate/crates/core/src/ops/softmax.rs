use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{DType, Scalar, Tensor};

/// Below this modulus an entry's phase is taken as 1.
pub const CV_SOFTMAX_EPS: f64 = 1e-12;

/// Row softmax for real logits and the modulus/phase softmax for complex ones.
///
/// `keep`, when given, marks the entries that take part; the rest get weight
/// zero and receive no gradient.
pub trait SoftmaxScalar: Scalar {
    fn softmax_row(x: &[Self], keep: Option<&[bool]>) -> Vec<Self>;

    /// Gradient with respect to `x` given the forward input, output and the
    /// output gradient.
    fn softmax_row_backward(x: &[Self], y: &[Self], g: &[Self], keep: Option<&[bool]>) -> Vec<Self>;
}

fn kept(keep: Option<&[bool]>, i: usize) -> bool {
    keep.is_none_or(|k| k[i])
}

fn real_softmax(x: &[f64], keep: Option<&[bool]>) -> Vec<f64> {
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| kept(keep, i))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| if kept(keep, i) { (v - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = y.iter().sum();
    if sum > 0.0 {
        y.iter_mut().for_each(|v| *v /= sum);
    }
    y
}

fn real_softmax_backward(y: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    y.iter().zip(g).map(|(yi, gi)| yi * (gi - dot)).collect()
}

impl SoftmaxScalar for f64 {
    fn softmax_row(x: &[f64], keep: Option<&[bool]>) -> Vec<f64> {
        real_softmax(x, keep)
    }

    fn softmax_row_backward(_x: &[f64], y: &[f64], g: &[f64], _keep: Option<&[bool]>) -> Vec<f64> {
        // masked entries have y = 0 and so get zero gradient
        real_softmax_backward(y, g)
    }
}

fn unit_phase(x: Complex64) -> Complex64 {
    let r = x.norm();
    if r >= CV_SOFTMAX_EPS {
        x / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

impl SoftmaxScalar for Complex64 {
    fn softmax_row(x: &[Complex64], keep: Option<&[bool]>) -> Vec<Complex64> {
        let r: Vec<f64> = x.iter().map(|v| v.norm()).collect();
        let s = real_softmax(&r, keep);
        x.iter().zip(s).map(|(v, w)| unit_phase(*v) * w).collect()
    }

    fn softmax_row_backward(
        x: &[Complex64],
        y: &[Complex64],
        g: &[Complex64],
        _keep: Option<&[bool]>,
    ) -> Vec<Complex64> {
        let s: Vec<f64> = y.iter().map(|v| v.norm()).collect();
        let u: Vec<Complex64> = x.iter().map(|v| unit_phase(*v)).collect();
        let gs: Vec<f64> = g.iter().zip(&u).map(|(gi, ui)| (gi.conj() * ui).re).collect();
        let gr = real_softmax_backward(&s, &gs);
        x.iter()
            .enumerate()
            .map(|(i, xi)| {
                let r = xi.norm();
                if r >= CV_SOFTMAX_EPS {
                    let gu = g[i] * s[i];
                    u[i] * gr[i] + (gu - u[i] * (u[i].conj() * gu).re) / r
                } else if r > 0.0 {
                    xi / r * gr[i]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }
}

fn last_axis_softmax<'g, S: SoftmaxScalar>(op: &'static str, x: Var<'g>) -> Result<Var<'g>> {
    let xv = x.value();
    let width = *xv.shape().last().ok_or_else(|| Error::shape(op, "scalar input"))?;
    if width == 0 {
        return Err(Error::shape(op, "empty softmax axis"));
    }
    let y: Vec<S> = S::unwrap(xv.data())
        .chunks_exact(width)
        .flat_map(|row| S::softmax_row(row, None))
        .collect();
    let out = Tensor::new(xv.shape().to_vec(), S::wrap(y))?;
    let yv = x.graph().is_recording().then(|| out.clone());
    Ok(x.graph().op(out, &[x], move || {
        let yv = yv.expect("recording graph keeps the output");
        Box::new(move |g, _| {
            let xs = S::unwrap(xv.data());
            let ys = S::unwrap(yv.data());
            let gx: Vec<S> = S::unwrap(g)
                .chunks_exact(width)
                .enumerate()
                .flat_map(|(r, gr)| {
                    let span = r * width..(r + 1) * width;
                    S::softmax_row_backward(&xs[span.clone()], &ys[span], gr, None)
                })
                .collect();
            vec![Some(S::wrap(gx))]
        })
    }))
}

/// Real softmax along the last axis.
pub fn softmax<'g>(x: Var<'g>) -> Result<Var<'g>> {
    if x.dtype() != DType::Real {
        return Err(Error::shape("softmax", "expects a real tensor, use cv_softmax"));
    }
    last_axis_softmax::<f64>("softmax", x)
}

/// `S_R(|x|) x / |x|` along the last axis.
pub fn cv_softmax<'g>(x: Var<'g>) -> Result<Var<'g>> {
    if x.dtype() != DType::Complex {
        return Err(Error::shape("cv_softmax", "expects a complex tensor"));
    }
    last_axis_softmax::<Complex64>("cv_softmax", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equal_moduli_give_equal_weights() {
        let y = Complex64::softmax_row(&[c(1.0, 0.0), c(0.0, 1.0)], None);
        assert!((y[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((y[1] - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn positive_real_input_reduces_to_real_softmax() {
        let x = [0.3, 1.7, 0.9, 2.2];
        let real = f64::softmax_row(&x, None);
        let cx: Vec<Complex64> = x.iter().map(|v| c(*v, 0.0)).collect();
        for (a, b) in Complex64::softmax_row(&cx, None).iter().zip(&real) {
            assert!((a - c(*b, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn moduli_follow_softmax_and_phases_survive() {
        let x = [Complex64::from_polar(2.0, 0.3), Complex64::from_polar(1.0, -1.1)];
        let y = Complex64::softmax_row(&x, None);
        let e = (1.0f64).exp();
        let w0 = e / (e + 1.0);
        assert!((y[0].norm() - w0).abs() < 1e-12);
        assert!((y[1].norm() - (1.0 - w0)).abs() < 1e-12);
        assert!((y[0].arg() - 0.3).abs() < 1e-12);
        assert!((y[1].arg() + 1.1).abs() < 1e-12);
        assert!((w0 - 0.731).abs() < 1e-3);
    }

    #[test]
    fn zero_entry_has_unit_phase() {
        let y = Complex64::softmax_row(&[c(0.0, 0.0), c(0.0, 0.0)], None);
        assert_eq!(y, vec![c(0.5, 0.0), c(0.5, 0.0)]);
    }

    #[test]
    fn masked_entries_get_nothing() {
        let keep = [true, false, true];
        let y = f64::softmax_row(&[1.0, 100.0, 1.0], Some(&keep));
        assert_eq!(y, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn dtype_is_checked() {
        let g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[3], DType::Complex));
        assert!(softmax(x).is_err());
        assert!(cv_softmax(x).is_ok());
    }
}
