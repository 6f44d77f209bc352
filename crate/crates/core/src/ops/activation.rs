use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Data, Scalar, Tensor};

fn real_map<'g>(
    op: &'static str,
    x: Var<'g>,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64 + 'static,
) -> Result<Var<'g>> {
    let xv = x.value();
    let xs = xv.as_real().ok_or_else(|| Error::shape(op, "expects a real tensor"))?;
    let out = Tensor::real(xv.shape(), xs.iter().map(|v| f(*v)).collect())?;
    Ok(x.graph().op(out, &[x], move || {
        Box::new(move |g, _| {
            let xs = xv.as_real().unwrap();
            let gx = f64::unwrap(g).iter().zip(xs).map(|(gi, v)| gi * df(*v)).collect();
            vec![Some(Data::Real(gx))]
        })
    }))
}

/// `max(x, 0)` on a real tensor.
pub fn relu<'g>(x: Var<'g>) -> Result<Var<'g>> {
    real_map("relu", x, |v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 })
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// GELU, tanh approximation.
pub fn gelu<'g>(x: Var<'g>) -> Result<Var<'g>> {
    real_map(
        "gelu",
        x,
        |v| 0.5 * v * (1.0 + (GELU_K * (v + 0.044715 * v.powi(3))).tanh()),
        |v| {
            let t = (GELU_K * (v + 0.044715 * v.powi(3))).tanh();
            0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * 0.044715 * v * v)
        },
    )
}

fn prelu(v: f64, a: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        a * v
    }
}

/// PReLU on the real and imaginary parts separately, with slopes
/// `slopes = [a_re, a_im]` (real).
pub fn cprelu<'g>(x: Var<'g>, slopes: Var<'g>) -> Result<Var<'g>> {
    let xv = x.value();
    let sv = slopes.value();
    let xs = xv.as_complex().ok_or_else(|| Error::shape("cprelu", "expects a complex tensor"))?;
    let &[a_re, a_im] = sv.as_real().unwrap_or(&[]) else {
        return Err(Error::shape("cprelu", "slopes must be real [2]"));
    };
    let y = xs
        .iter()
        .map(|z| Complex64::new(prelu(z.re, a_re), prelu(z.im, a_im)))
        .collect();
    let out = Tensor::complex(xv.shape(), y)?;
    Ok(x.graph().op(out, &[x, slopes], move || {
        Box::new(move |g, wants| {
            let Data::Complex(g) = g else { panic!("expected a complex gradient") };
            let xs = xv.as_complex().unwrap();
            let gx = wants[0].then(|| {
                Data::Complex(
                    g.iter()
                        .zip(xs)
                        .map(|(gz, z)| {
                            Complex64::new(
                                if z.re >= 0.0 { gz.re } else { a_re * gz.re },
                                if z.im >= 0.0 { gz.im } else { a_im * gz.im },
                            )
                        })
                        .collect(),
                )
            });
            let ga = wants[1].then(|| {
                let mut d = [0.0, 0.0];
                for (gz, z) in g.iter().zip(xs) {
                    if z.re < 0.0 {
                        d[0] += gz.re * z.re;
                    }
                    if z.im < 0.0 {
                        d[1] += gz.im * z.im;
                    }
                }
                Data::Real(d.to_vec())
            });
            vec![gx, ga]
        })
    }))
}
