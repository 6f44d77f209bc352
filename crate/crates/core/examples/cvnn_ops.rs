//! Complex-valued building blocks and the gradient checker.
//!
//! cargo run --example cvnn_ops

use num_complex::Complex64;
use swinfreq::graph::Graph;
use swinfreq::ops::{cv_layer_norm, cv_softmax, grad_check};
use swinfreq::tensor::Tensor;

fn main() -> swinfreq::Result<()> {
    let c = Complex64::new;
    let logits = Tensor::complex(&[1, 4], vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.4, -0.2), c(2.0, -1.0)])?;

    let g = Graph::no_grad();
    let sm = cv_softmax(g.constant(logits.clone()))?.value();
    let p = sm.as_complex().unwrap();
    let total: f64 = p.iter().map(|z| z.norm()).sum();
    println!("cv_softmax moduli sum to {total:.12}");
    for (z, w) in logits.as_complex().unwrap().iter().zip(p) {
        println!("  arg in {:+.4}  arg out {:+.4}", z.arg(), w.arg());
    }

    let feats = Tensor::complex(&[1, 8], (0..8).map(|i| c((i as f64).sin() * 3.0, (i * i) as f64 * 0.1)).collect())?;
    let y = cv_layer_norm(g.constant(feats.clone()), None, None)?.value();
    let v = y.as_complex().unwrap();
    let (rr, ii, ri) = v.iter().fold((0.0, 0.0, 0.0), |(a, b, d), z| (a + z.re * z.re, b + z.im * z.im, d + z.re * z.im));
    let k = v.len() as f64;
    println!("whitened covariance [[{:.4}, {:.4}], [{:.4}, {:.4}]]", rr / k, ri / k, ri / k, ii / k);

    let sm_check = grad_check("cv_softmax", |_, v| cv_softmax(v[0]), &[logits], 1e-6, 0)?;
    let ln_check = grad_check("cv_layer_norm", |_, v| cv_layer_norm(v[0], None, None), &[feats], 1e-6, 0)?;
    println!("grad check: cv_softmax {:.2e}, cv_layer_norm {:.2e}", sm_check.max_rel_error, ln_check.max_rel_error);
    Ok(())
}
