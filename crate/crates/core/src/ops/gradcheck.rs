use num_complex::Complex64;
use rand::Rng;

use super::weighted_sum;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::{Data, Tensor};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max over all real coordinates of `|analytic - numeric| / max(1e-8, |numeric|)`.
    pub max_rel_error: f64,
    /// `(input index, real coordinate)` where the maximum occurred.
    pub worst: (usize, usize),
    pub coords_checked: usize,
}

/// Check the reverse pass of `f` at `inputs`.
///
/// The output is reduced to a real scalar by a fixed random weighting, every
/// real coordinate of every input (real and imaginary parts separately) is
/// perturbed by `±eps`, and the resulting difference quotient is compared
/// with the gradient from [`Graph::backward`]. Differences within the
/// floating-point rounding bound of the quotient itself count as zero.
pub fn grad_check<F>(name: &'static str, f: F, inputs: &[Tensor], eps: f64, seed: u64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&g, &vars)?;
    if !out.requires_grad() {
        return Err(Error::NoReversePass { op: name.to_string() });
    }
    let weights = probe_weights(&out.value(), seed);
    let loss = weighted_sum(out, &weights)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| match grads.get(*v) {
            Some(d) => d.real_coords(),
            None => vec![0.0; t.scalar_count()],
        })
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let g = Graph::no_grad();
        let vars: Vec<Var<'_>> = probe.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&g, &vars)?;
        let l = weighted_sum(out, &weights)?;
        let v = l.value().as_real().unwrap()[0];
        Ok(v)
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), coords_checked: 0 };
    let mut probe = inputs.to_vec();
    for (ti, t) in inputs.iter().enumerate() {
        for coord in 0..t.scalar_count() {
            probe[ti] = perturbed(t, coord, eps);
            let lp = eval(&probe)?;
            probe[ti] = perturbed(t, coord, -eps);
            let lm = eval(&probe)?;
            probe[ti] = t.clone();
            let numeric = (lp - lm) / (2.0 * eps);
            let rounding = 8.0 * f64::EPSILON * lp.abs().max(lm.abs()) / (2.0 * eps);
            let diff = ((analytic[ti][coord] - numeric).abs() - rounding).max(0.0);
            let rel = diff / numeric.abs().max(1e-8);
            report.coords_checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = (ti, coord);
            }
        }
    }
    Ok(report)
}

fn probe_weights(out: &Tensor, seed: u64) -> Data {
    let mut r = crate::rng::seeded(seed);
    match out.data() {
        Data::Real(v) => Data::Real((0..v.len()).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()),
        Data::Complex(v) => Data::Complex(
            (0..v.len())
                .map(|_| Complex64::new(r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0))
                .collect(),
        ),
    }
}

fn perturbed(t: &Tensor, coord: usize, delta: f64) -> Tensor {
    let mut t = t.clone();
    match t.data_mut() {
        Data::Real(v) => v[coord] += delta,
        Data::Complex(v) => {
            if coord % 2 == 0 {
                v[coord / 2].re += delta;
            } else {
                v[coord / 2].im += delta;
            }
        }
    }
    t
}
