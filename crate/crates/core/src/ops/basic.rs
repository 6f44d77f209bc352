use num_complex::Complex64;

use super::{same_dtype, with_scalar};
use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Data, Scalar, Tensor};

pub fn add<'g>(a: Var<'g>, b: Var<'g>) -> Result<Var<'g>> {
    same_dtype("add", &[a, b])?;
    let (av, bv) = (a.value(), b.value());
    if av.shape() != bv.shape() {
        return Err(Error::shape("add", format!("{:?} vs {:?}", av.shape(), bv.shape())));
    }
    let data = with_scalar!(av.dtype(), S => {
        let x = S::unwrap(av.data());
        let y = S::unwrap(bv.data());
        S::wrap(x.iter().zip(y).map(|(p, q)| *p + *q).collect())
    });
    let out = Tensor::new(av.shape().to_vec(), data)?;
    Ok(a.graph().op(out, &[a, b], || {
        Box::new(|g, wants| vec![wants[0].then(|| g.clone()), wants[1].then(|| g.clone())])
    }))
}

pub fn scale<'g>(a: Var<'g>, c: f64) -> Result<Var<'g>> {
    let av = a.value();
    let data = with_scalar!(av.dtype(), S => {
        S::wrap(S::unwrap(av.data()).iter().map(|x| *x * c).collect())
    });
    let out = Tensor::new(av.shape().to_vec(), data)?;
    Ok(a.graph().op(out, &[a], || {
        Box::new(move |g, _| {
            let gd = with_scalar!(g.dtype(), S => {
                S::wrap(S::unwrap(g).iter().map(|x| *x * c).collect())
            });
            vec![Some(gd)]
        })
    }))
}

pub fn reshape<'g>(a: Var<'g>, shape: &[usize]) -> Result<Var<'g>> {
    let out = a.value().reshaped(shape)?;
    Ok(a.graph().op(out, &[a], || Box::new(|g, _| vec![Some(g.clone())])))
}

/// Swap the two axes of a matrix.
pub fn transpose<'g>(a: Var<'g>) -> Result<Var<'g>> {
    let av = a.value();
    let &[rows, cols] = av.shape() else {
        return Err(Error::shape("transpose", format!("expected 2-D, got {:?}", av.shape())));
    };
    let data = with_scalar!(av.dtype(), S => {
        S::wrap(super::matmul::transpose_copy(S::unwrap(av.data()), rows, cols))
    });
    let out = Tensor::new(vec![cols, rows], data)?;
    Ok(a.graph().op(out, &[a], || {
        Box::new(move |g, _| {
            let gd = with_scalar!(g.dtype(), S => {
                S::wrap(super::matmul::transpose_copy(S::unwrap(g), cols, rows))
            });
            vec![Some(gd)]
        })
    }))
}

/// Elementwise `|x|`, always real-valued.
pub fn modulus<'g>(a: Var<'g>) -> Result<Var<'g>> {
    let av = a.value();
    let values: Vec<f64> = match av.data() {
        Data::Real(v) => v.iter().map(|x| x.abs()).collect(),
        Data::Complex(v) => v.iter().map(|x| x.norm()).collect(),
    };
    let out = Tensor::real(av.shape(), values)?;
    Ok(a.graph().op(out, &[a], || {
        Box::new(move |g, _| {
            let g = f64::unwrap(g);
            let gd = match av.data() {
                Data::Real(v) => Data::Real(
                    v.iter().zip(g).map(|(x, gy)| if *x == 0.0 { 0.0 } else { gy * x.signum() }).collect(),
                ),
                Data::Complex(v) => Data::Complex(
                    v.iter()
                        .zip(g)
                        .map(|(x, gy)| {
                            let r = x.norm();
                            if r == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                x * (gy / r)
                            }
                        })
                        .collect(),
                ),
            };
            vec![Some(gd)]
        })
    }))
}

/// Mean squared error against a fixed real target; returns a scalar.
pub fn mse<'g>(pred: Var<'g>, target: &[f64]) -> Result<Var<'g>> {
    let pv = pred.value();
    let p = pv
        .as_real()
        .ok_or_else(|| Error::shape("mse", "prediction must be real"))?;
    if p.len() != target.len() {
        return Err(Error::shape("mse", format!("{} predictions vs {} targets", p.len(), target.len())));
    }
    let n = p.len() as f64;
    let diff: Vec<f64> = p.iter().zip(target).map(|(a, b)| a - b).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let shape = pv.shape().to_vec();
    Ok(pred.graph().op(Tensor::scalar(loss), &[pred], || {
        Box::new(move |g, _| {
            let g0 = f64::unwrap(g)[0];
            let gd = diff.iter().map(|d| 2.0 * d * g0 / n).collect();
            debug_assert_eq!(shape.iter().product::<usize>(), diff.len());
            vec![Some(Data::Real(gd))]
        })
    }))
}

/// `sum_i Re(conj(w_i) x_i)`: a real scalar probe of any tensor.
pub fn weighted_sum<'g>(x: Var<'g>, weights: &Data) -> Result<Var<'g>> {
    let xv = x.value();
    if weights.dtype() != xv.dtype() || weights.len() != xv.numel() {
        return Err(Error::shape("weighted_sum", "weights must match the input"));
    }
    let total = match (xv.data(), weights) {
        (Data::Real(a), Data::Real(w)) => a.iter().zip(w).map(|(p, q)| p * q).sum(),
        (Data::Complex(a), Data::Complex(w)) => a.iter().zip(w).map(|(p, q)| (q.conj() * p).re).sum(),
        _ => unreachable!(),
    };
    let w = weights.clone();
    Ok(x.graph().op(Tensor::scalar(total), &[x], || {
        Box::new(move |g, _| {
            let g0 = f64::unwrap(g)[0];
            let gd = with_scalar!(w.dtype(), S => {
                S::wrap(S::unwrap(&w).iter().map(|v| *v * g0).collect())
            });
            vec![Some(gd)]
        })
    }))
}
