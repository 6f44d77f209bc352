use super::matmul::{conj_transpose, Matmul};
use super::{same_dtype, with_scalar};
use crate::error::{Error, Result};
use crate::graph::Var;
use crate::tensor::{Scalar, Tensor};

/// `y = x W + b` over the last axis of `x`.
///
/// `x: [..., in]`, `weight: [in, out]`, `bias: [out]`. Complex inputs use the
/// three-product Gauss multiplication for every matrix product, forward and
/// reverse.
pub fn linear<'g>(x: Var<'g>, weight: Var<'g>, bias: Option<Var<'g>>) -> Result<Var<'g>> {
    let mut vars = vec![x, weight];
    vars.extend(bias);
    same_dtype("linear", &vars)?;
    let (xv, wv) = (x.value(), weight.value());
    let &[fan_in, fan_out] = wv.shape() else {
        return Err(Error::shape("linear", format!("weight must be 2-D, got {:?}", wv.shape())));
    };
    let xs = xv.shape();
    if xs.last() != Some(&fan_in) {
        return Err(Error::shape("linear", format!("input {xs:?} does not end in {fan_in}")));
    }
    let bv = bias.map(|b| b.value());
    if let Some(b) = &bv {
        if b.shape() != [fan_out] {
            return Err(Error::shape("linear", format!("bias {:?} vs out {fan_out}", b.shape())));
        }
    }
    let rows = xv.numel() / fan_in;
    let mut out_shape = xs.to_vec();
    *out_shape.last_mut().unwrap() = fan_out;

    let data = with_scalar!(xv.dtype(), S => {
        let mut y = S::matmul(rows, fan_in, fan_out, S::unwrap(xv.data()), S::unwrap(wv.data()));
        if let Some(b) = &bv {
            let b = S::unwrap(b.data());
            for row in y.chunks_exact_mut(fan_out) {
                row.iter_mut().zip(b).for_each(|(v, bb)| *v += *bb);
            }
        }
        S::wrap(y)
    });
    let out = Tensor::new(out_shape, data)?;
    Ok(x.graph().op(out, &vars, move || {
        Box::new(move |g, wants| {
            with_scalar!(g.dtype(), S => {
                let gy = S::unwrap(g);
                let gx = wants[0].then(|| {
                    let wh = conj_transpose(S::unwrap(wv.data()), fan_in, fan_out);
                    S::wrap(S::matmul(rows, fan_out, fan_in, gy, &wh))
                });
                let gw = wants[1].then(|| {
                    let xh = conj_transpose(S::unwrap(xv.data()), rows, fan_in);
                    S::wrap(S::matmul(fan_in, rows, fan_out, &xh, gy))
                });
                let mut res = vec![gx, gw];
                if bv.is_some() {
                    res.push(wants[2].then(|| {
                        let mut gb = vec![S::zero(); fan_out];
                        for row in gy.chunks_exact(fan_out) {
                            gb.iter_mut().zip(row).for_each(|(a, b)| *a += *b);
                        }
                        S::wrap(gb)
                    }));
                }
                res
            })
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn run(x: Vec<Complex64>, w: Vec<Complex64>, b: Vec<Complex64>, shape: (usize, usize, usize)) -> Vec<Complex64> {
        let (r, i, o) = shape;
        let g = Graph::new();
        let xv = g.constant(Tensor::complex(&[r, i], x).unwrap());
        let wv = g.leaf(Tensor::complex(&[i, o], w).unwrap());
        let bv = g.leaf(Tensor::complex(&[o], b).unwrap());
        linear(xv, wv, Some(bv)).unwrap().value().as_complex().unwrap().to_vec()
    }

    #[test]
    fn identity_weight() {
        assert_eq!(run(vec![c(1.0, 1.0)], vec![c(1.0, 0.0)], vec![c(0.0, 0.0)], (1, 1, 1)), vec![c(1.0, 1.0)]);
    }

    #[test]
    fn imaginary_weight_rotates() {
        assert_eq!(run(vec![c(1.0, 0.0)], vec![c(0.0, 1.0)], vec![c(0.0, 0.0)], (1, 1, 1)), vec![c(0.0, 1.0)]);
    }

    #[test]
    fn random_matches_naive_oracle() {
        use rand::Rng;
        let mut r = crate::rng::seeded(12);
        let mut rc = || c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        let x: Vec<_> = (0..12).map(|_| rc()).collect();
        let w: Vec<_> = (0..6).map(|_| rc()).collect();
        let b: Vec<_> = (0..2).map(|_| rc()).collect();
        let y = run(x.clone(), w.clone(), b.clone(), (4, 3, 2));
        for i in 0..4 {
            for o in 0..2 {
                let mut acc = b[o];
                for k in 0..3 {
                    acc += x[i * 3 + k] * w[k * 2 + o];
                }
                assert!((y[i * 2 + o] - acc).norm() <= 1e-6 * acc.norm());
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 3], crate::tensor::DType::Real));
        let w = g.leaf(Tensor::zeros(&[4, 2], crate::tensor::DType::Real));
        assert!(linear(x, w, None).is_err());
    }
}
